#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "npnet/matrix.hpp"

namespace npnet {

struct Dataset {
    Matrix X;           // |D| x d0
    std::vector<int> y; // class indices in [0, num_classes)
    int num_classes = 0;

    // Present when features were standardized (train-split statistics).
    bool standardized = false;
    std::vector<double> feat_mean, feat_std;

    std::size_t size() const { return X.rows(); }
    std::size_t feature_count() const { return X.cols(); }
};

/// IDX-format loader (big-endian, magic 0x803 images / 0x801 labels).
/// Pixels are scaled to [0,1] by /255 and flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Rectangular numeric CSV. label_column < 0 selects the last column. Labels
/// are mapped to dense class indices by sorted unique value.
Dataset load_csv(const std::string& path, int label_column, bool has_header);

/// Whitespace-separated float rows, label in the last column.
Dataset load_amat(const std::string& path);

/// Seeded permutation followed by contiguous slices; sizes must sum to |D|.
std::vector<Dataset> split(const Dataset& data, std::span<const std::size_t> sizes,
                           std::uint64_t seed);

struct SyntheticSpec {
    enum class Kind { GaussianBlobs, XorQuadrants };
    Kind kind = Kind::GaussianBlobs;
    std::size_t n = 1000;
    std::size_t d0 = 2;
    int classes = 2;
    double noise = 0.1;
};

/// Deterministic synthetic datasets for tests and demos.
///  - gaussian_blobs: class centers on a circle of radius 3 (first two
///    features), points = center + noise * N(0, I), labels round-robin.
///  - xor_quadrants: features uniform in (-1,1), label = XOR of the signs of
///    the first two features, then Gaussian jitter of scale `noise` is added
///    to the features (labels keep their pre-jitter value).
Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Feature standardization fitted on one dataset (the train split) and
/// applied to any other with the same width.
struct Scaler {
    std::vector<double> mean, stddev;
    static Scaler fit(const Dataset& data);
    void apply(Dataset& data) const;
};

/// Content hash of X, y, and num_classes (manifest fingerprint).
std::uint64_t fingerprint(const Dataset& data);

/// Seeded index permutation shared by split() and the mini-batch shuffler.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

} // namespace npnet
