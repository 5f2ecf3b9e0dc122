#include "npnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace npnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

TomlValue parse_scalar(const std::string& raw, std::size_t lineno) {
    const std::string v = trim(raw);
    if (v.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": missing value");
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw ConfigError("config line " + std::to_string(lineno) + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    default:
                        throw ConfigError("config line " + std::to_string(lineno) +
                                          ": bad escape \\" + v[i]);
                }
            } else {
                out.push_back(v[i]);
            }
        }
        return out;
    }
    // Integer if it parses fully as one, else float.
    {
        std::int64_t iv = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), iv);
        if (ec == std::errc() && p == v.data() + v.size()) return iv;
    }
    {
        double dv = 0.0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), dv);
        if (ec == std::errc() && p == v.data() + v.size()) return dv;
    }
    throw ConfigError("config line " + std::to_string(lineno) + ": cannot parse value '" + v + "'");
}

} // namespace

std::map<std::string, TomlValue> toml_parse(const std::string& text) {
    std::map<std::string, TomlValue> out;
    std::istringstream stream(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        for (char c : key)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
                throw ConfigError("config line " + std::to_string(lineno) + ": bad key '" + key +
                                  "'");
        if (out.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
        const std::string value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated array");
            std::vector<std::int64_t> arr;
            const std::string inner = value.substr(1, value.size() - 2);
            std::size_t start = 0;
            if (!trim(inner).empty()) {
                while (true) {
                    const std::size_t comma = inner.find(',', start);
                    const std::string cell = inner.substr(
                        start, comma == std::string::npos ? std::string::npos : comma - start);
                    const TomlValue v = parse_scalar(cell, lineno);
                    if (!std::holds_alternative<std::int64_t>(v))
                        throw ConfigError("config line " + std::to_string(lineno) +
                                          ": arrays must hold integers");
                    arr.push_back(std::get<std::int64_t>(v));
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
            }
            out[key] = std::move(arr);
        } else {
            out[key] = parse_scalar(value, lineno);
        }
    }
    return out;
}

std::string toml_format_value(const TomlValue& v) {
    if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
    if (std::holds_alternative<double>(v)) {
        const double d = std::get<double>(v);
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
        std::string s(buf, p);
        // Keep floats recognizably floats so the round-trip stays typed.
        if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
            s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
            s += ".0";
        return s;
    }
    if (std::holds_alternative<std::string>(v)) {
        std::string out = "\"";
        for (char c : std::get<std::string>(v)) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                default: out.push_back(c);
            }
        }
        out += "\"";
        return out;
    }
    const auto& arr = std::get<std::vector<std::int64_t>>(v);
    std::string out = "[";
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(arr[i]);
    }
    out += "]";
    return out;
}

namespace {

// Schema: key name -> getter/setter pair over RunConfig, in canonical order.
struct Field {
    const char* key;
    std::function<TomlValue(const RunConfig&)> get;
    std::function<void(RunConfig&, const TomlValue&, const std::string&)> set;
};

template <typename T>
T expect(const TomlValue& v, const std::string& key) {
    if constexpr (std::is_same_v<T, double>) {
        if (std::holds_alternative<std::int64_t>(v))
            return static_cast<double>(std::get<std::int64_t>(v));
    }
    if (!std::holds_alternative<T>(v)) throw ConfigError("config key '" + key + "': wrong type");
    return std::get<T>(v);
}

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = [] {
        std::vector<Field> f;
        const auto add_i64 = [&f](const char* key, std::int64_t RunConfig::* member) {
            f.push_back({key, [member](const RunConfig& c) { return TomlValue(c.*member); },
                         [member](RunConfig& c, const TomlValue& v, const std::string& k) {
                             c.*member = expect<std::int64_t>(v, k);
                         }});
        };
        const auto add_f64 = [&f](const char* key, double RunConfig::* member) {
            f.push_back({key, [member](const RunConfig& c) { return TomlValue(c.*member); },
                         [member](RunConfig& c, const TomlValue& v, const std::string& k) {
                             c.*member = expect<double>(v, k);
                         }});
        };
        const auto add_bool = [&f](const char* key, bool RunConfig::* member) {
            f.push_back({key, [member](const RunConfig& c) { return TomlValue(c.*member); },
                         [member](RunConfig& c, const TomlValue& v, const std::string& k) {
                             c.*member = expect<bool>(v, k);
                         }});
        };
        const auto add_str = [&f](const char* key, std::string RunConfig::* member) {
            f.push_back({key, [member](const RunConfig& c) { return TomlValue(c.*member); },
                         [member](RunConfig& c, const TomlValue& v, const std::string& k) {
                             c.*member = expect<std::string>(v, k);
                         }});
        };

        add_i64("layers", &RunConfig::layers);
        f.push_back({"hidden_units",
                     [](const RunConfig& c) { return TomlValue(c.hidden_units); },
                     [](RunConfig& c, const TomlValue& v, const std::string& k) {
                         c.hidden_units = expect<std::vector<std::int64_t>>(v, k);
                     }});
        add_str("norm", &RunConfig::norm);
        add_str("optimizer", &RunConfig::optimizer);
        add_f64("lambda", &RunConfig::lambda);
        add_f64("alpha_phi", &RunConfig::alpha_phi);
        add_f64("alpha", &RunConfig::alpha);
        add_f64("alpha_r", &RunConfig::alpha_r);
        add_str("alpha_r_rule", &RunConfig::alpha_r_rule);
        add_f64("beta_arith", &RunConfig::beta_arith);
        add_f64("beta_quad", &RunConfig::beta_quad);
        add_f64("epsilon", &RunConfig::epsilon);
        add_i64("nu", &RunConfig::nu);
        add_i64("additions_per_epoch", &RunConfig::additions_per_epoch);
        add_bool("sgd_shrink", &RunConfig::sgd_shrink);
        add_i64("batch_size", &RunConfig::batch_size);
        add_i64("patience_grow", &RunConfig::patience_grow);
        add_i64("patience_shrink", &RunConfig::patience_shrink);
        add_f64("patience_anneal", &RunConfig::patience_anneal);
        add_f64("anneal_factor", &RunConfig::anneal_factor);
        add_i64("max_anneals", &RunConfig::max_anneals);
        add_i64("max_epochs", &RunConfig::max_epochs);
        add_f64("eval_stats_momentum", &RunConfig::eval_stats_momentum);
        add_str("dataset", &RunConfig::dataset);
        add_str("data_images", &RunConfig::data_images);
        add_str("data_labels", &RunConfig::data_labels);
        add_str("data_path", &RunConfig::data_path);
        add_i64("label_column", &RunConfig::label_column);
        add_bool("csv_has_header", &RunConfig::csv_has_header);
        add_bool("standardize", &RunConfig::standardize);
        add_str("synthetic_kind", &RunConfig::synthetic_kind);
        add_i64("synthetic_n", &RunConfig::synthetic_n);
        add_i64("synthetic_d0", &RunConfig::synthetic_d0);
        add_i64("synthetic_classes", &RunConfig::synthetic_classes);
        add_f64("synthetic_noise", &RunConfig::synthetic_noise);
        add_i64("valid_count", &RunConfig::valid_count);
        add_i64("test_count", &RunConfig::test_count);
        add_i64("seed", &RunConfig::seed);
        add_bool("metrics_norms", &RunConfig::metrics_norms);
        add_i64("checkpoint_every", &RunConfig::checkpoint_every);
        return f;
    }();
    return fields;
}

} // namespace

RunConfig RunConfig::from_text(const std::string& text) {
    const auto kv = toml_parse(text);
    RunConfig cfg;
    for (const auto& [key, value] : kv) {
        bool known = false;
        for (const Field& field : schema()) {
            if (key == field.key) {
                field.set(cfg, value, key);
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("config key '" + key + "': unknown key");
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

void RunConfig::set_key(const std::string& key, const std::string& value) {
    const auto kv = toml_parse(key + " = " + value + "\n");
    for (const Field& field : schema()) {
        if (key == field.key) {
            field.set(*this, kv.at(key), key);
            return;
        }
    }
    throw ConfigError("config key '" + key + "': unknown key");
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const Field& field : schema()) {
        out += field.key;
        out += " = ";
        out += toml_format_value(field.get(*this));
        out += "\n";
    }
    return out;
}

std::uint64_t RunConfig::hash() const {
    const std::string text = serialize();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

OptimizerKind RunConfig::optimizer_kind() const {
    if (optimizer == "adarad") return OptimizerKind::AdaRad;
    if (optimizer == "adaradm") return OptimizerKind::AdaRadM;
    if (optimizer == "sgd") return OptimizerKind::Sgd;
    if (optimizer == "rmsprop") return OptimizerKind::RmsProp;
    throw ConfigError("config key 'optimizer': must be adarad, adaradm, sgd, or rmsprop");
}

NormMode RunConfig::norm_mode() const {
    if (norm == "capnorm") return NormMode::CapNorm;
    if (norm == "batchnorm") return NormMode::BatchNorm;
    if (norm == "batchnorm_affine") return NormMode::BatchNormAffine;
    if (norm == "none") return NormMode::None;
    throw ConfigError("config key 'norm': must be capnorm, batchnorm, batchnorm_affine, or none");
}

bool RunConfig::nonparametric() const {
    const OptimizerKind k = optimizer_kind();
    return k == OptimizerKind::AdaRad || k == OptimizerKind::AdaRadM;
}

double RunConfig::resolved_alpha_r() const {
    if (alpha_r > 0.0) return alpha_r;
    if (lambda <= 0.0)
        throw ConfigError("config key 'alpha_r': must be set explicitly when lambda = 0");
    if (alpha_r_rule == "small") return 1.0 / (50.0 * lambda);
    if (alpha_r_rule == "large") return 1.0 / (5.0 * lambda);
    throw ConfigError("config key 'alpha_r_rule': must be small or large");
}

void RunConfig::validate() const {
    const auto bad = [](const std::string& key, const std::string& why) {
        throw ConfigError("config key '" + key + "': " + why);
    };
    if (layers < 1) bad("layers", "must be >= 1");
    if (hidden_units.size() != static_cast<std::size_t>(layers - 1))
        bad("hidden_units", "must list exactly layers-1 widths");
    for (std::int64_t h : hidden_units)
        if (h < 0) bad("hidden_units", "widths must be >= 0");
    norm_mode();
    optimizer_kind();
    if (lambda < 0.0) bad("lambda", "must be >= 0");
    if (alpha_phi <= 0.0) bad("alpha_phi", "must be > 0");
    if (alpha <= 0.0) bad("alpha", "must be > 0");
    if (alpha_r < 0.0) bad("alpha_r", "must be >= 0");
    if (alpha_r_rule != "small" && alpha_r_rule != "large")
        bad("alpha_r_rule", "must be small or large");
    if (beta_arith <= 0.0 || beta_arith > 1.0) bad("beta_arith", "must be in (0, 1]");
    if (beta_quad <= 0.0 || beta_quad > 1.0) bad("beta_quad", "must be in (0, 1]");
    if (epsilon <= 0.0) bad("epsilon", "must be > 0");
    if (nu < 0) bad("nu", "must be >= 0");
    if (additions_per_epoch < 1) bad("additions_per_epoch", "must be >= 1");
    if (batch_size < 2) bad("batch_size", "must be >= 2");
    if (patience_grow < 1) bad("patience_grow", "must be >= 1");
    if (patience_shrink < 1) bad("patience_shrink", "must be >= 1");
    if (patience_anneal <= 0.0) bad("patience_anneal", "must be > 0");
    if (anneal_factor <= 1.0) bad("anneal_factor", "must be > 1");
    if (max_anneals < 1) bad("max_anneals", "must be >= 1");
    if (max_epochs < 0) bad("max_epochs", "must be >= 0");
    if (eval_stats_momentum <= 0.0 || eval_stats_momentum > 1.0)
        bad("eval_stats_momentum", "must be in (0, 1]");
    if (dataset == "idx") {
        if (data_images.empty()) bad("data_images", "required for dataset = idx");
        if (data_labels.empty()) bad("data_labels", "required for dataset = idx");
    } else if (dataset == "csv" || dataset == "amat") {
        if (data_path.empty()) bad("data_path", "required for dataset = " + dataset);
    } else if (dataset == "synthetic") {
        if (synthetic_kind != "gaussian_blobs" && synthetic_kind != "xor_quadrants")
            bad("synthetic_kind", "must be gaussian_blobs or xor_quadrants");
        if (synthetic_n < 1) bad("synthetic_n", "must be >= 1");
        if (synthetic_d0 < 1) bad("synthetic_d0", "must be >= 1");
        if (synthetic_classes < 2) bad("synthetic_classes", "must be >= 2");
        if (synthetic_noise < 0.0) bad("synthetic_noise", "must be >= 0");
    } else {
        bad("dataset", "must be idx, csv, amat, or synthetic");
    }
    if (valid_count < 0) bad("valid_count", "must be >= 0");
    if (test_count < 0) bad("test_count", "must be >= 0");
    if (seed < 0) bad("seed", "must be >= 0");
    if (checkpoint_every < 1) bad("checkpoint_every", "must be >= 1");
    if (nonparametric() && norm_has_affine(norm_mode()))
        bad("norm", "batchnorm_affine is not usable with adarad/adaradm");
}

} // namespace npnet
