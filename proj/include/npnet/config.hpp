#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "npnet/common.hpp"
#include "npnet/model.hpp"
#include "npnet/optimizer.hpp"

namespace npnet {

/// Value in a flat, typed key-value document (TOML-compatible grammar):
/// `key = value` lines, # comments, strings, booleans, integers, floats, and
/// homogeneous integer arrays.
using TomlValue =
    std::variant<std::int64_t, double, bool, std::string, std::vector<std::int64_t>>;

std::map<std::string, TomlValue> toml_parse(const std::string& text);
std::string toml_format_value(const TomlValue& v);

/// Fully typed run configuration. Every field has a default; parsing a file
/// overrides fields and rejects unknown keys or wrong types with a message
/// naming the key.
struct RunConfig {
    // model
    std::int64_t layers = 3;
    std::vector<std::int64_t> hidden_units = {10, 10};
    std::string norm = "capnorm"; // capnorm|batchnorm|batchnorm_affine|none

    // optimizer
    std::string optimizer = "adarad"; // adarad|adaradm|sgd|rmsprop
    double lambda = 1e-3;
    double alpha_phi = 30.0;
    double alpha = 1.0;    // sgd/rmsprop step size
    double alpha_r = 0.0;  // 0 = derive from alpha_r_rule
    std::string alpha_r_rule = "small"; // small: 1/(50 lambda); large: 1/(5 lambda)
    double beta_arith = 0.1;
    double beta_quad = 0.005;
    double epsilon = 1e-8;
    std::int64_t nu = 1;
    std::int64_t additions_per_epoch = 1;
    bool sgd_shrink = true;

    // schedule
    std::int64_t batch_size = 1000;
    std::int64_t patience_grow = 100;
    std::int64_t patience_shrink = 100;
    double patience_anneal = 5.0;
    double anneal_factor = 3.0;
    std::int64_t max_anneals = 12;
    std::int64_t max_epochs = 0; // 0 = no cap
    double eval_stats_momentum = 0.01;

    // data
    std::string dataset = "synthetic"; // idx|csv|amat|synthetic
    std::string data_images;
    std::string data_labels;
    std::string data_path;
    std::int64_t label_column = -1;
    bool csv_has_header = false;
    bool standardize = true;
    std::string synthetic_kind = "xor_quadrants";
    std::int64_t synthetic_n = 4000;
    std::int64_t synthetic_d0 = 2;
    std::int64_t synthetic_classes = 2;
    double synthetic_noise = 0.05;
    std::int64_t valid_count = 0; // 0 = |D|/6
    std::int64_t test_count = 0;

    // run
    std::int64_t seed = 1;
    bool metrics_norms = false;
    std::int64_t checkpoint_every = 1;

    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
    void set_key(const std::string& key, const std::string& value);

    /// Canonical serialization; parse -> serialize -> parse is a fixed point.
    std::string serialize() const;
    std::uint64_t hash() const;

    /// Field-level validation of ranges and cross-field requirements.
    void validate() const;

    OptimizerKind optimizer_kind() const;
    NormMode norm_mode() const;
    bool nonparametric() const;
    /// Radial step size after applying the alpha_r rule.
    double resolved_alpha_r() const;

    bool operator==(const RunConfig&) const = default;
};

} // namespace npnet
