#include "specstab_cli/run.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>

#include <nlohmann/json.hpp>

#include "specstab/data.hpp"
#include "specstab/diagnostics.hpp"
#include "specstab/io.hpp"
#include "specstab/net.hpp"
#include "specstab/ntk.hpp"
#include "specstab/report.hpp"
#include "specstab/train.hpp"
#include "specstab/verify.hpp"

#ifndef SPECSTAB_VERSION
#define SPECSTAB_VERSION "0.0.0"
#endif

namespace specstab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"gen-data",       "train", "profile",      "sensitivity",
                                                "ntk-flow",       "serr",  "attr-stability", "compare-pair",
                                                "selftest"};
    return names;
}

RunConfig load_run_config(const std::string& path) {
    const std::string text = read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw IoError("manifest '" + path + "': " + e.what());
        }
        if (j.value("kind", "") != "manifest" || !j.contains("config"))
            throw ConfigError("'" + path + "' is JSON but not a run manifest");
        return RunConfig::parse(j["config"].get<std::string>());
    }
    return RunConfig::parse(text);
}

namespace {

struct Context {
    RunConfig cfg;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    fs::path out_dir;
    std::vector<std::string> outputs;
    std::ostream& out;

    void write(const std::string& name, std::string_view content) {
        write_file((out_dir / name).string(), content);
        outputs.push_back(name);
    }
    std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) const {
        return static_cast<std::size_t>(cfg.get_u64(section, key, fallback));
    }
};

Dataset load_data(const Context& c, std::size_t default_n = 256, std::size_t default_d = 2) {
    const std::string kind = c.cfg.get("experiment", "data", "blobs");
    Dataset ds;
    if (kind == "idx") {
        if (!c.cfg.has("experiment", "images") || !c.cfg.has("experiment", "labels"))
            throw ConfigError("[experiment] data = idx needs images and labels paths");
        ds = load_idx(c.cfg.get("experiment", "images", ""), c.cfg.get("experiment", "labels", ""),
                      c.count("experiment", "limit", 0));
    } else if (kind == "csv") {
        if (!c.cfg.has("experiment", "dataset"))
            throw ConfigError("[experiment] data = csv needs a dataset path");
        ds = load_dataset(c.cfg.get("experiment", "dataset", ""));
        if (c.cfg.has("experiment", "limit"))
            ds = head(ds, c.count("experiment", "limit", 0));
    } else {
        GenSpec g;
        g.kind = parse_data_kind(kind);
        g.n = c.count("experiment", "n", default_n);
        g.d = c.count("experiment", "d", default_d);
        g.seed = c.seed;
        g.classes = c.count("experiment", "classes", 3);
        g.separation = c.cfg.get_double("experiment", "separation", 3.0);
        g.noise = c.cfg.get_double("experiment", "noise", 0.0);
        g.outputs = c.count("experiment", "outputs", 1);
        ds = gen_data(g);
    }
    if (ds.size() == 0)
        throw std::invalid_argument("dataset is empty");
    return ds;
}

Architecture architecture(const Context& c, std::size_t d, std::size_t outputs) {
    Architecture a;
    if (c.cfg.has("net", "widths")) {
        for (double w : c.cfg.get_list("net", "widths", {})) {
            if (!(w >= 1.0) || w != std::floor(w))
                throw ConfigError("[net] widths must be positive integers");
            a.widths.push_back(static_cast<std::size_t>(w));
        }
        if (a.widths.size() < 2)
            throw ConfigError("[net] widths needs at least input and output width");
    } else {
        a.widths = {d, 16, outputs};
    }
    a.hidden = parse_activation(c.cfg.get("net", "activation", "tanh"));
    a.bias = c.cfg.get_bool("net", "bias", true);
    return a;
}

InitScheme init_scheme(const Context& c) {
    const std::string s = c.cfg.get("net", "init", "gaussian");
    if (s == "gaussian")
        return InitScheme::gaussian;
    if (s == "orthogonal")
        return InitScheme::orthogonal;
    throw ConfigError("[net] init must be gaussian or orthogonal, got '" + s + "'");
}

Loss loss_for(const Context& c, const Dataset& ds) {
    return parse_loss(c.cfg.get("net", "loss", ds.meta.classes > 0 ? "cross_entropy" : "squared_error"));
}

Mlp make_net(const Context& c, const Dataset& ds) {
    Mlp net;
    if (c.cfg.has("net", "model")) {
        net = load_mlp(c.cfg.get("net", "model", ""));
    } else {
        Rng rng(derive_seed(c.seed, 0));
        net = init_mlp(architecture(c, ds.meta.d, ds.targets.front().size()), c.cfg.get_double("net", "gain", 1.0),
                       rng, init_scheme(c));
    }
    if (net.input_dim() != ds.meta.d || net.output_dim() != ds.targets.front().size())
        throw std::invalid_argument("network maps " + std::to_string(net.input_dim()) + " -> " +
                                    std::to_string(net.output_dim()) + " but data is " + std::to_string(ds.meta.d) +
                                    " -> " + std::to_string(ds.targets.front().size()));
    return net;
}

TrainConfig train_config(const Context& c) {
    TrainConfig t;
    t.epochs = c.count("train", "epochs", t.epochs);
    t.batch_size = c.count("train", "batch_size", t.batch_size);
    t.learning_rate = c.cfg.get_double("train", "learning_rate", t.learning_rate);
    t.penalty = parse_penalty(c.cfg.get("train", "penalty", "none"));
    t.penalty_weight = c.cfg.get_double("train", "penalty_weight", 0.0);
    t.curvature_guard = c.cfg.get_bool("train", "curvature_guard", false);
    t.probe_size = c.count("train", "probe_size", t.probe_size);
    t.seed = c.seed;
    t.validate();
    return t;
}

PerturbationLaw law(const Context& c) {
    const std::string s = c.cfg.get("experiment", "law", "gaussian");
    if (s == "gaussian")
        return PerturbationLaw::gaussian;
    if (s == "sphere")
        return PerturbationLaw::sphere;
    throw ConfigError("[experiment] law must be gaussian or sphere, got '" + s + "'");
}

// Points of the convex hull of the inputs, Dirichlet(1) weights.
std::vector<InputPair> hull_pairs(const Dataset& ds, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    auto point = [&] {
        Vector z(ds.meta.d, 0.0);
        Vector w(ds.size());
        double s = 0.0;
        for (double& v : w) {
            v = -std::log(1.0 - rng.uniform());
            s += v;
        }
        for (std::size_t i = 0; i < ds.size(); ++i)
            z = axpy(w[i] / s, ds.inputs[i], z);
        return z;
    };
    std::vector<InputPair> pairs;
    for (std::size_t i = 0; i < count; ++i) {
        Vector a = point();
        pairs.emplace_back(std::move(a), point());
    }
    return pairs;
}

int cmd_gen_data(Context& c) {
    const Dataset ds = load_data(c);
    save_dataset(ds, (c.out_dir / "dataset.csv").string());
    c.outputs.push_back("dataset.csv");
    c.outputs.push_back("dataset.csv.meta.json");
    c.out << "wrote " << ds.size() << " samples (" << ds.meta.name << ", d=" << ds.meta.d << ")\n";
    return ok;
}

int cmd_train(Context& c) {
    const Dataset ds = load_data(c);
    const Mlp net = make_net(c, ds);
    const TrainConfig t = train_config(c);
    try {
        const TrainResult r = train(net, ds.inputs, ds.targets, loss_for(c, ds), t);
        c.write("model.txt", to_text(r.net));
        c.write("train_log.csv", train_log_csv(r.log));
        if (!r.log.epochs.empty())
            c.out << "final loss " << r.log.epochs.back().loss << ", accuracy " << r.log.epochs.back().accuracy
                  << "\n";
        return ok;
    } catch (const TrainingDiverged& e) {
        c.write("train_log.csv", train_log_csv(e.log()));
        throw;
    }
}

int cmd_profile(Context& c) {
    const Dataset ds = load_data(c, 32);
    const Mlp net = make_net(c, ds);
    ProfileOptions po;
    po.threads = c.threads;
    po.include_hessian = c.cfg.get_bool("experiment", "hessian", true);
    po.hessian.parameter_cap = c.count("experiment", "hessian_cap", po.hessian.parameter_cap);
    const StabilityProfile p = build_profile(net, ds.inputs, ds.targets, loss_for(c, ds), po);
    c.write("profile.json", profile_json(p));
    c.write("profile.csv", profile_csv(p));
    c.out << "empirical GMSI " << p.gmsi << " (input jacobian " << p.breakdown.input_jacobian << ", param jacobian "
          << p.breakdown.param_jacobian << ", ntk " << p.breakdown.ntk << ", hessian " << p.breakdown.hessian
          << (p.hessian_skipped ? ", skipped above cap" : "") << ")\n";
    return ok;
}

int cmd_sensitivity(Context& c) {
    const Dataset ds = load_data(c, 16);
    const Mlp net = make_net(c, ds);
    const std::size_t i = c.count("experiment", "x_index", 0);
    if (i >= ds.size())
        throw std::invalid_argument("x_index " + std::to_string(i) + " out of range");
    const Vector& x = ds.inputs[i];
    const double eps = c.cfg.get_double("experiment", "epsilon", 1e-3 * norm2(x));
    const SensitivityReport r =
        monte_carlo_sensitivity(net, x, eps, c.count("experiment", "n_mc", 100000), derive_seed(c.seed, 1), law(c));
    c.write("sensitivity.json", sensitivity_json(r));
    c.out << "empirical " << r.empirical_mean_sq << " +/- " << r.empirical_stderr << ", analytic "
          << r.analytic_mean_sq << ", bound " << r.bound_rhs << (r.holds ? " (holds)" : " (VIOLATED)") << "\n";
    return r.holds ? ok : validation_failure;
}

int cmd_ntk_flow(Context& c) {
    const Dataset ds = load_data(c, 32);
    const Mlp net = make_net(c, ds);
    const GramMatrix g = gram(net, ds.inputs, c.threads);
    const SymEig e = g.eig();
    Rng rng(derive_seed(c.seed, 1));
    const Vector dy = rng.gaussian_vector(g.size(), c.cfg.get_double("experiment", "dy_scale", 0.1));
    const Vector times = default_time_grid(e);
    const FlowReport rep = flow_difference(e, dy, times);
    c.write("ntk_flow.csv", flow_csv(rep));
    json j = json::parse(flow_json(rep));
    const Conditioning k = conditioning(g);
    j["conditioning"] = {{"lambda_max", k.lambda_max},
                         {"lambda_min_nonzero", k.lambda_min_nonzero},
                         {"kappa", std::isfinite(k.kappa) ? json(k.kappa) : json(format_double(k.kappa))},
                         {"degenerate", k.degenerate}};
    c.write("ntk_flow.json", j.dump(2));
    if (c.cfg.has("experiment", "eta")) {
        const double eta = c.cfg.get_double("experiment", "eta", 0.0);
        const Vector zero(g.size(), 0.0);
        CsvTable t;
        t.header = {"t", "closed_form", "euler"};
        const std::size_t steps = c.count("experiment", "steps", 1000);
        const auto a = simulate_discrete_flow(g, zero, zero, eta, steps);
        const auto b = simulate_discrete_flow(g, dy, zero, eta, steps);
        for (std::size_t s = 0; s <= steps; ++s) {
            const double ts = eta * static_cast<double>(s);
            const Vector tv{ts};
            const Vector d = sub(a[s], b[s]);
            t.add_numeric_row({ts, flow_difference(e, dy, tv).diff_norm_sq.front(), dot(d, d)});
        }
        c.write("ntk_flow_euler.csv", to_csv(t));
    }
    c.out << "lambda_max " << k.lambda_max << ", kappa " << k.kappa << ", " << times.size() << " time points\n";
    return ok;
}

int cmd_serr(Context& c) {
    Architecture a;
    if (c.cfg.has("net", "widths"))
        a = architecture(c, 0, 0);
    else {
        a.widths.assign(21, 32);
        a.hidden = parse_activation(c.cfg.get("net", "activation", "tanh"));
        a.bias = c.cfg.get_bool("net", "bias", true);
    }
    Rng rng(derive_seed(c.seed, 1));
    const Vector x = rng.gaussian_vector(a.widths.front());
    const std::size_t n_inits = c.count("experiment", "n_inits", 32);
    std::vector<SerrResult> sweep;
    CsvTable t;
    t.header = {"gain", "serr", "std_error", "n_inits"};
    for (double gain : c.cfg.get_list("experiment", "gains", {0.5, 1.0, 2.0, 4.0})) {
        sweep.push_back(serr(a, gain, n_inits, x, derive_seed(c.seed, 2), init_scheme(c), c.threads));
        t.add_numeric_row({gain, sweep.back().mean, sweep.back().std_error, static_cast<double>(n_inits)});
        c.out << "gain " << gain << ": SERR " << sweep.back().mean << " +/- " << sweep.back().std_error << "\n";
    }
    c.write("serr.json", serr_json(sweep));
    c.write("serr.csv", to_csv(t));
    return ok;
}

int cmd_attr_stability(Context& c) {
    const Dataset ds = load_data(c, 32);
    const Mlp net = make_net(c, ds);
    const auto pairs = hull_pairs(ds, c.count("experiment", "pairs", 200), derive_seed(c.seed, 1));
    ProfileOptions po;
    po.threads = c.threads;
    po.include_hessian = c.cfg.get_bool("experiment", "hessian", false);
    const StabilityProfile p = build_profile(net, ds.inputs, ds.targets, loss_for(c, ds), po);
    const std::size_t grid = c.count("experiment", "grid_points", 33);
    const ForwardStabilityReport f = verify_forward_stability(net, p, pairs, grid);
    const AttributionStabilityReport a =
        attribution_stability_check(net, c.cfg.get_double("experiment", "psi_lipschitz", 1.0), pairs,
                                    std::max<std::size_t>(2, grid / 2 + 1));
    c.write("forward_stability.json", forward_stability_json(f));
    c.write("attr_stability.json", attribution_stability_json(a));
    c.out << "forward: " << f.violations << "/" << f.pairs_checked << " violations, empirical C1 " << f.empirical_c1
          << "\nattribution: " << a.violations << "/" << a.pairs_checked << " violations, L_J "
          << a.jacobian_lipschitz << "\n";
    return f.violations == 0 && a.violations == 0 ? ok : validation_failure;
}

int cmd_compare_pair(Context& c) {
    const Dataset ds = load_data(c);
    const Loss loss = loss_for(c, ds);
    const Architecture arch = architecture(c, ds.meta.d, ds.targets.front().size());
    TrainConfig stable = train_config(c);
    if (!c.cfg.has("train", "penalty")) {
        stable.penalty = Penalty::top_sv;
        stable.penalty_weight = c.cfg.get_double("train", "penalty_weight", 0.05);
    }
    TrainConfig unstable = stable;
    unstable.penalty = Penalty::none;
    unstable.penalty_weight = 0.0;
    const auto [u, s] = make_pair(arch, c.cfg.get_double("net", "gain", 1.0), ds.inputs, ds.targets, loss,
                                  unstable, stable);
    const Dataset eval = head(ds, c.count("experiment", "eval_points", 256));
    const double eps = c.cfg.get_double("experiment", "epsilon", 0.5);
    const AttributionDiagnostics du = attribution_diagnostics(u.net, eval.inputs, eps, derive_seed(c.seed, 3));
    const AttributionDiagnostics dstab = attribution_diagnostics(s.net, eval.inputs, eps, derive_seed(c.seed, 3));
    c.write("model_unstable.txt", to_text(u.net));
    c.write("model_stable.txt", to_text(s.net));
    c.write("train_log_unstable.csv", train_log_csv(u.log));
    c.write("train_log_stable.csv", train_log_csv(s.log));
    c.write("compare_pair.json", attribution_json(du, dstab));
    CsvTable t;
    t.header = {"model", "SE", "ACN", "FD", "delta_grad"};
    t.add_row({"unstable", format_double(du.spectral_entropy), format_double(du.acn), format_double(du.fd),
               format_double(du.delta_grad)});
    t.add_row({"stable", format_double(dstab.spectral_entropy), format_double(dstab.acn), format_double(dstab.fd),
               format_double(dstab.delta_grad)});
    c.write("compare_pair.csv", to_csv(t));
    c.out << std::left << std::setw(10) << "model" << std::setw(14) << "SE" << std::setw(14) << "ACN" << std::setw(14)
          << "FD" << "delta_grad\n";
    for (const auto& [name, d] : {std::pair{"unstable", du}, std::pair{"stable", dstab}})
        c.out << std::setw(10) << name << std::setw(14) << d.spectral_entropy << std::setw(14) << d.acn
              << std::setw(14) << d.fd << d.delta_grad << "\n";
    return ok;
}

int cmd_selftest(Context& c) {
    SelftestOptions o;
    o.seed = c.cfg.has("experiment", "seed") ? c.seed : o.seed;
    o.threads = c.threads;
    CsvTable t;
    t.header = {"check", "result", "seconds", "detail"};
    bool all = true;
    run_selftest(o, [&](const CheckResult& r) {
        all = all && r.passed;
        c.out << r.name << ": " << (r.passed ? "PASS" : "FAIL") << "  (" << std::fixed << std::setprecision(1)
              << r.seconds << " s) " << r.detail << std::defaultfloat << std::setprecision(6) << "\n";
        c.out.flush();
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        t.add_row({r.name, r.passed ? "PASS" : "FAIL", format_double(r.seconds), detail});
    });
    c.write("selftest.csv", to_csv(t));
    c.out << (all ? "selftest: all checks passed\n" : "selftest: FAILED\n");
    return all ? ok : validation_failure;
}

void write_manifest(Context& c, const std::string& subcommand) {
    json j;
    j["schema"] = "v1";
    j["kind"] = "manifest";
    j["subcommand"] = subcommand;
    const std::string canon = c.cfg.canonical();
    j["config_hash"] = config_hash(canon);
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["versions"] = {{"specstab", SPECSTAB_VERSION},
                     {"compiler", __VERSION__},
                     {"cxx", static_cast<long>(__cplusplus)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    j["config"] = canon;
    j["outputs"] = c.outputs;
    write_file((c.out_dir / "manifest.json").string(), j.dump(2));
}

}  // namespace

int run(const std::string& subcommand, RunConfig config, const Overrides& ov, std::ostream& out, std::ostream& err) {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
        err << "error: unknown subcommand '" << subcommand << "'\n";
        return validation_failure;
    }
    try {
        if (ov.seed)
            config.set("experiment", "seed", std::to_string(*ov.seed));
        if (ov.threads)
            config.set("experiment", "threads", std::to_string(*ov.threads));
        if (ov.out_dir)
            config.set("output", "dir", *ov.out_dir);

        Context c{config, 0, 1, {}, {}, out};
        c.seed = config.get_u64("experiment", "seed", 0);
        c.threads = std::max<std::size_t>(1, c.count("experiment", "threads", 1));
        c.out_dir = config.get("output", "dir", "out");
        std::error_code ec;
        fs::create_directories(c.out_dir, ec);
        if (ec)
            throw IoError("cannot create output directory '" + c.out_dir.string() + "': " + ec.message());

        int code = ok;
        if (subcommand == "gen-data")
            code = cmd_gen_data(c);
        else if (subcommand == "train")
            code = cmd_train(c);
        else if (subcommand == "profile")
            code = cmd_profile(c);
        else if (subcommand == "sensitivity")
            code = cmd_sensitivity(c);
        else if (subcommand == "ntk-flow")
            code = cmd_ntk_flow(c);
        else if (subcommand == "serr")
            code = cmd_serr(c);
        else if (subcommand == "attr-stability")
            code = cmd_attr_stability(c);
        else if (subcommand == "compare-pair")
            code = cmd_compare_pair(c);
        else
            code = cmd_selftest(c);
        write_manifest(c, subcommand);
        return code;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return io_failure;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return io_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return validation_failure;
    }
}

}  // namespace specstab::cli
