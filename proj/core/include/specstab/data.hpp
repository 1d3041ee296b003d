#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specstab/matrix.hpp"

namespace specstab {

struct DatasetMeta {
    std::string name;
    std::size_t d = 0;
    std::size_t classes = 0;  // 0 for regression targets
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<Vector> inputs;
    std::vector<Vector> targets;       // one-hot rows for classification
    std::vector<std::size_t> labels;   // class indices; empty for regression
    DatasetMeta meta;
    std::optional<Matrix> teacher;     // linear_teacher only

    std::size_t size() const noexcept { return inputs.size(); }
    /// Lengths agree, every input has dimension meta.d, labels match targets.
    void validate() const;
};

enum class DataKind { blobs, two_moons, linear_teacher };

std::string_view to_string(DataKind k) noexcept;
DataKind parse_data_kind(std::string_view name);

struct GenSpec {
    DataKind kind = DataKind::blobs;
    std::size_t n = 0;
    std::size_t d = 2;
    std::uint64_t seed = 0;
    std::size_t classes = 3;      // blobs
    double separation = 3.0;      // blobs: std of the cluster centres
    std::size_t outputs = 1;      // linear_teacher
    double noise = 0.0;           // linear_teacher label noise, two_moons jitter
};

/// Deterministic given the seed. Throws std::invalid_argument for n = 0 or d = 0.
Dataset gen_data(const GenSpec& spec);

/// MNIST IDX pair (big-endian; magics 0x00000803 and 0x00000801), pixels /255.
/// limit = 0 reads everything; otherwise the first `limit` records in file order.
Dataset load_idx(const std::string& images_path, const std::string& labels_path, std::size_t limit = 0);
Dataset parse_idx(std::string_view images, std::string_view labels, std::size_t limit = 0);

/// First n samples.
Dataset head(const Dataset& ds, std::size_t n);

/// CSV with columns x0.., t0.., and `label` for classification data; the
/// metadata and teacher go to a JSON sidecar at `<path>.meta.json`.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace specstab
