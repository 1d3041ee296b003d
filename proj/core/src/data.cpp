#include "specstab/data.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "specstab/io.hpp"
#include "specstab/random.hpp"

namespace specstab {

void Dataset::validate() const {
    if (targets.size() != inputs.size())
        throw std::invalid_argument("dataset: " + std::to_string(inputs.size()) + " inputs but " +
                                    std::to_string(targets.size()) + " targets");
    if (!labels.empty() && labels.size() != inputs.size())
        throw std::invalid_argument("dataset: label count mismatch");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != meta.d)
            throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has dimension " +
                                        std::to_string(inputs[i].size()) + ", expected " + std::to_string(meta.d));
        if (targets[i].size() != targets.front().size())
            throw std::invalid_argument("dataset: ragged targets at sample " + std::to_string(i));
        if (!labels.empty() && (labels[i] >= targets[i].size() || targets[i][labels[i]] != 1.0))
            throw std::invalid_argument("dataset: label/target disagreement at sample " + std::to_string(i));
    }
}

std::string_view to_string(DataKind k) noexcept {
    switch (k) {
    case DataKind::blobs: return "blobs";
    case DataKind::two_moons: return "two_moons";
    case DataKind::linear_teacher: return "linear_teacher";
    }
    return "blobs";
}

DataKind parse_data_kind(std::string_view name) {
    if (name == "blobs")
        return DataKind::blobs;
    if (name == "two_moons")
        return DataKind::two_moons;
    if (name == "linear_teacher")
        return DataKind::linear_teacher;
    throw std::invalid_argument("unknown dataset kind '" + std::string(name) +
                                "' (blobs, two_moons, linear_teacher)");
}

namespace {

Vector one_hot(std::size_t c, std::size_t classes) {
    Vector v(classes, 0.0);
    v[c] = 1.0;
    return v;
}

void push_labelled(Dataset& ds, Vector x, std::size_t c) {
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back(one_hot(c, ds.meta.classes));
    ds.labels.push_back(c);
}

}  // namespace

Dataset gen_data(const GenSpec& gs) {
    if (gs.n == 0)
        throw std::invalid_argument("gen_data: n must be at least 1");
    if (gs.d == 0)
        throw std::invalid_argument("gen_data: d must be at least 1");
    Dataset ds;
    ds.meta = {std::string(to_string(gs.kind)), gs.d, 0, gs.n, gs.seed};
    Rng rng(gs.seed);

    switch (gs.kind) {
    case DataKind::blobs: {
        if (gs.classes < 2)
            throw std::invalid_argument("gen_data: blobs need at least 2 classes");
        ds.meta.classes = gs.classes;
        std::vector<Vector> centres;
        for (std::size_t c = 0; c < gs.classes; ++c)
            centres.push_back(rng.gaussian_vector(gs.d, gs.separation));
        for (std::size_t i = 0; i < gs.n; ++i) {
            const std::size_t c = i % gs.classes;
            push_labelled(ds, axpy(1.0, rng.gaussian_vector(gs.d), centres[c]), c);
        }
        break;
    }
    case DataKind::two_moons: {
        if (gs.d < 2)
            throw std::invalid_argument("gen_data: two_moons needs d >= 2");
        ds.meta.classes = 2;
        const double jitter = gs.noise > 0.0 ? gs.noise : 0.1;
        for (std::size_t i = 0; i < gs.n; ++i) {
            const std::size_t c = i % 2;
            const double a = std::numbers::pi * rng.uniform();
            Vector x = rng.gaussian_vector(gs.d, jitter);
            x[0] += c == 0 ? std::cos(a) : 1.0 - std::cos(a);
            x[1] += c == 0 ? std::sin(a) : 0.5 - std::sin(a);
            push_labelled(ds, std::move(x), c);
        }
        break;
    }
    case DataKind::linear_teacher: {
        if (gs.outputs == 0)
            throw std::invalid_argument("gen_data: linear_teacher needs at least one output");
        Matrix w = rng.gaussian_matrix(gs.outputs, gs.d, 1.0 / std::sqrt(static_cast<double>(gs.d)));
        for (std::size_t i = 0; i < gs.n; ++i) {
            Vector x = rng.gaussian_vector(gs.d);
            Vector y = w * x;
            if (gs.noise > 0.0)
                for (double& v : y)
                    v += gs.noise * rng.normal();
            ds.inputs.push_back(std::move(x));
            ds.targets.push_back(std::move(y));
        }
        ds.teacher = std::move(w);
        break;
    }
    }
    return ds;
}

namespace {

std::uint32_t be32(std::string_view buf, std::size_t at) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + 3]));
}

std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

Dataset parse_idx(std::string_view images, std::string_view labels, std::size_t limit) {
    if (images.size() < 16)
        throw IoError("idx images: truncated header (" + std::to_string(images.size()) + " bytes)");
    if (labels.size() < 8)
        throw IoError("idx labels: truncated header (" + std::to_string(labels.size()) + " bytes)");
    if (const auto m = be32(images, 0); m != 0x00000803)
        throw IoError("idx images: bad magic, expected 0x00000803, found " + hex32(m));
    if (const auto m = be32(labels, 0); m != 0x00000801)
        throw IoError("idx labels: bad magic, expected 0x00000801, found " + hex32(m));
    const std::size_t count = be32(images, 4);
    const std::size_t rows = be32(images, 8);
    const std::size_t cols = be32(images, 12);
    const std::size_t label_count = be32(labels, 4);
    if (count != label_count)
        throw IoError("idx: image file has " + std::to_string(count) + " records, label file has " +
                      std::to_string(label_count));
    const std::size_t pixels = rows * cols;
    if (pixels == 0)
        throw IoError("idx images: zero-sized images");
    if (images.size() < 16 + count * pixels)
        throw IoError("idx images: truncated, need " + std::to_string(16 + count * pixels) + " bytes, have " +
                      std::to_string(images.size()));
    if (labels.size() < 8 + count)
        throw IoError("idx labels: truncated, need " + std::to_string(8 + count) + " bytes, have " +
                      std::to_string(labels.size()));

    const std::size_t n = limit == 0 ? count : std::min(limit, count);
    Dataset ds;
    ds.meta = {"mnist", pixels, 10, n, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = static_cast<unsigned char>(labels[8 + i]);
        if (c >= 10)
            throw IoError("idx labels: label " + std::to_string(c) + " at record " + std::to_string(i) +
                          " is not a digit");
        Vector x(pixels);
        for (std::size_t k = 0; k < pixels; ++k)
            x[k] = static_cast<unsigned char>(images[16 + i * pixels + k]) / 255.0;
        push_labelled(ds, std::move(x), c);
    }
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, std::size_t limit) {
    return parse_idx(read_file(images_path), read_file(labels_path), limit);
}

Dataset head(const Dataset& ds, std::size_t n) {
    n = std::min(n, ds.size());
    Dataset out;
    out.meta = ds.meta;
    out.meta.n = n;
    out.teacher = ds.teacher;
    out.inputs.assign(ds.inputs.begin(), ds.inputs.begin() + static_cast<std::ptrdiff_t>(n));
    out.targets.assign(ds.targets.begin(), ds.targets.begin() + static_cast<std::ptrdiff_t>(n));
    if (!ds.labels.empty())
        out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    const std::size_t k = ds.targets.empty() ? 0 : ds.targets.front().size();
    CsvTable t;
    for (std::size_t j = 0; j < ds.meta.d; ++j)
        t.header.push_back("x" + std::to_string(j));
    for (std::size_t j = 0; j < k; ++j)
        t.header.push_back("t" + std::to_string(j));
    const bool labelled = !ds.labels.empty();
    if (labelled)
        t.header.push_back("label");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<double> row = ds.inputs[i];
        row.insert(row.end(), ds.targets[i].begin(), ds.targets[i].end());
        if (labelled)
            row.push_back(static_cast<double>(ds.labels[i]));
        t.add_numeric_row(row);
    }
    write_file(path, to_csv(t));

    nlohmann::json j;
    j["schema"] = "v1";
    j["name"] = ds.meta.name;
    j["d"] = ds.meta.d;
    j["classes"] = ds.meta.classes;
    j["n"] = ds.size();
    j["seed"] = ds.meta.seed;
    j["targets"] = k;
    if (ds.teacher) {
        j["teacher"]["rows"] = ds.teacher->rows();
        j["teacher"]["cols"] = ds.teacher->cols();
        j["teacher"]["data"] = Vector(ds.teacher->data().begin(), ds.teacher->data().end());
    }
    write_file(path + ".meta.json", j.dump(2));
}

Dataset load_dataset(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path + ".meta.json"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("dataset metadata '" + path + ".meta.json': " + e.what());
    }
    Dataset ds;
    CsvTable t;
    try {
        ds.meta.name = j.at("name").get<std::string>();
        ds.meta.d = j.at("d").get<std::size_t>();
        ds.meta.classes = j.at("classes").get<std::size_t>();
        ds.meta.n = j.at("n").get<std::size_t>();
        ds.meta.seed = j.at("seed").get<std::uint64_t>();
        const std::size_t k = j.at("targets").get<std::size_t>();
        if (j.contains("teacher")) {
            const auto& tj = j["teacher"];
            ds.teacher = Matrix(tj.at("rows").get<std::size_t>(), tj.at("cols").get<std::size_t>(),
                                tj.at("data").get<Vector>());
        }
        t = parse_csv(read_file(path));
        const bool labelled = ds.meta.classes > 0;
        if (t.header.size() != ds.meta.d + k + (labelled ? 1 : 0))
            throw IoError("dataset '" + path + "': column count does not match metadata");
        for (const auto& row : t.rows) {
            Vector x, y;
            for (std::size_t c = 0; c < ds.meta.d; ++c)
                x.push_back(parse_double(row[c]));
            for (std::size_t c = 0; c < k; ++c)
                y.push_back(parse_double(row[ds.meta.d + c]));
            ds.inputs.push_back(std::move(x));
            ds.targets.push_back(std::move(y));
            if (labelled)
                ds.labels.push_back(static_cast<std::size_t>(parse_double(row[ds.meta.d + k])));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("dataset metadata '" + path + ".meta.json': " + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError("dataset '" + path + "': " + e.what());
    }
    if (ds.size() != ds.meta.n)
        throw IoError("dataset '" + path + "': metadata says " + std::to_string(ds.meta.n) + " rows, file has " +
                      std::to_string(ds.size()));
    ds.validate();
    return ds;
}

}  // namespace specstab
