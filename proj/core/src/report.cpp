#include "specstab/report.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "specstab/io.hpp"

namespace specstab {

namespace {

using nlohmann::json;

json num(double v) {
    if (std::isfinite(v))
        return v;
    return format_double(v);
}

double from_num(const json& j) {
    if (j.is_string())
        return parse_double(j.get<std::string>());
    return j.get<double>();
}

json vec(const Vector& v) {
    json a = json::array();
    for (double x : v)
        a.push_back(num(x));
    return a;
}

Vector from_vec(const json& j) {
    Vector v;
    for (const auto& x : j)
        v.push_back(from_num(x));
    return v;
}

json summary(const SpectralSummary& s) {
    return {{"sigma", vec(s.sigma.values())},   {"entropy_nats", num(s.entropy_nats)},
            {"sc_quarter", num(s.sc_quarter)}, {"sc_half", num(s.sc_half)},
            {"acn", num(s.acn)},               {"top", num(s.top)},
            {"trace_sum", num(s.trace_sum)}};
}

json header(std::string_view kind) {
    return {{"schema", "v1"}, {"kind", kind}};
}

json parse_report(std::string_view text, std::string_view kind) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed JSON report: ") + e.what());
    }
    if (j.value("schema", "") != "v1" || j.value("kind", "") != kind)
        throw IoError("JSON report is not a v1 '" + std::string(kind) + "' report");
    return j;
}

json witness(const std::optional<StabilityWitness>& w) {
    if (!w)
        return nullptr;
    return {{"x", vec(w->x)}, {"x_prime", vec(w->x_prime)}, {"lhs", num(w->lhs)}, {"rhs", num(w->rhs)}};
}

}  // namespace

std::string profile_json(const StabilityProfile& p) {
    json j = header("profile");
    j["gmsi_label"] = "empirical GMSI";
    j["gmsi"] = num(p.gmsi);
    j["breakdown"] = {{"input_jacobian", num(p.breakdown.input_jacobian)},
                      {"param_jacobian", num(p.breakdown.param_jacobian)},
                      {"ntk", num(p.breakdown.ntk)},
                      {"hessian", num(p.breakdown.hessian)}};
    j["hessian_skipped"] = p.hessian_skipped;
    j["gram"] = summary(p.gram);
    j["gram_conditioning"] = {{"lambda_max", num(p.gram_conditioning.lambda_max)},
                              {"lambda_min_nonzero", num(p.gram_conditioning.lambda_min_nonzero)},
                              {"kappa", num(p.gram_conditioning.kappa)},
                              {"degenerate", p.gram_conditioning.degenerate}};
    json samples = json::array();
    for (const SampleProfile& s : p.samples) {
        json e = {{"jacobian", summary(s.jacobian)},
                  {"product", summary(s.product)},
                  {"jacobian_norm", num(s.jacobian_norm)},
                  {"param_jacobian_norm", num(s.param_jacobian_norm)}};
        e["hessian_top"] = s.hessian_top ? num(*s.hessian_top) : json(nullptr);
        if (s.hessian)
            e["hessian_abs"] = summary(*s.hessian);
        samples.push_back(std::move(e));
    }
    j["samples"] = std::move(samples);
    return j.dump(2);
}

std::string sensitivity_json(const SensitivityReport& r) {
    json j = header("sensitivity");
    j["epsilon"] = num(r.epsilon);
    j["n_mc"] = r.n_mc;
    j["empirical_mean_sq"] = num(r.empirical_mean_sq);
    j["empirical_stderr"] = num(r.empirical_stderr);
    j["analytic_mean_sq"] = num(r.analytic_mean_sq);
    j["constant_k"] = num(r.constant_k);
    j["entropy"] = num(r.entropy);
    j["bound_rhs"] = num(r.bound_rhs);
    j["mc_tolerance"] = num(r.mc_tolerance);
    j["holds"] = r.holds;
    return j.dump(2);
}

SensitivityReport parse_sensitivity_json(std::string_view text) {
    const json j = parse_report(text, "sensitivity");
    SensitivityReport r;
    try {
        r.epsilon = from_num(j.at("epsilon"));
        r.n_mc = j.at("n_mc").get<std::size_t>();
        r.empirical_mean_sq = from_num(j.at("empirical_mean_sq"));
        r.empirical_stderr = from_num(j.at("empirical_stderr"));
        r.analytic_mean_sq = from_num(j.at("analytic_mean_sq"));
        r.constant_k = from_num(j.at("constant_k"));
        r.entropy = from_num(j.at("entropy"));
        r.bound_rhs = from_num(j.at("bound_rhs"));
        r.mc_tolerance = from_num(j.at("mc_tolerance"));
        r.holds = j.at("holds").get<bool>();
    } catch (const json::exception& e) {
        throw IoError(std::string("sensitivity report: ") + e.what());
    }
    return r;
}

std::string serr_json(const std::vector<SerrResult>& sweep) {
    json j = header("serr");
    json rows = json::array();
    for (const SerrResult& s : sweep)
        rows.push_back({{"gain", num(s.gain)},
                        {"n_inits", s.n_inits},
                        {"mean", num(s.mean)},
                        {"std_error", num(s.std_error)},
                        {"entropies", vec(s.entropies)}});
    j["sweep"] = std::move(rows);
    return j.dump(2);
}

std::vector<SerrResult> parse_serr_json(std::string_view text) {
    const json j = parse_report(text, "serr");
    std::vector<SerrResult> out;
    try {
        for (const auto& e : j.at("sweep")) {
            SerrResult s;
            s.gain = from_num(e.at("gain"));
            s.n_inits = e.at("n_inits").get<std::size_t>();
            s.mean = from_num(e.at("mean"));
            s.std_error = from_num(e.at("std_error"));
            s.entropies = from_vec(e.at("entropies"));
            out.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("serr report: ") + e.what());
    }
    return out;
}

std::string attribution_json(const AttributionDiagnostics& unstable, const AttributionDiagnostics& stable) {
    json j = header("attribution_pair");
    auto row = [](const AttributionDiagnostics& a) {
        return json{{"SE", num(a.spectral_entropy)}, {"ACN", num(a.acn)}, {"FD", num(a.fd)},
                    {"delta_grad", num(a.delta_grad)}};
    };
    j["unstable"] = row(unstable);
    j["stable"] = row(stable);
    return j.dump(2);
}

std::string forward_stability_json(const ForwardStabilityReport& r) {
    json j = header("forward_stability");
    j["pairs_checked"] = r.pairs_checked;
    j["violations"] = r.violations;
    j["max_ratio"] = num(r.max_ratio);
    j["empirical_c1"] = num(r.empirical_c1);
    j["witness"] = witness(r.witness);
    return j.dump(2);
}

std::string attribution_stability_json(const AttributionStabilityReport& r) {
    json j = header("attribution_stability");
    j["pairs_checked"] = r.pairs_checked;
    j["violations"] = r.violations;
    j["jacobian_lipschitz"] = num(r.jacobian_lipschitz);
    j["margin"] = num(r.margin);
    j["max_ratio"] = num(r.max_ratio);
    j["witness"] = witness(r.witness);
    return j.dump(2);
}

std::string profile_csv(const StabilityProfile& p) {
    CsvTable t;
    t.header = {"sample", "jacobian_norm", "entropy_nats", "sc_quarter", "sc_half", "acn",
                "param_jacobian_norm", "hessian_top"};
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        const SampleProfile& s = p.samples[i];
        t.add_numeric_row({static_cast<double>(i), s.jacobian_norm, s.jacobian.entropy_nats, s.jacobian.sc_quarter,
                           s.jacobian.sc_half, s.jacobian.acn, s.param_jacobian_norm,
                           s.hessian_top ? *s.hessian_top : std::numeric_limits<double>::quiet_NaN()});
    }
    return to_csv(t);
}

}  // namespace specstab
