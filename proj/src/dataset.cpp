#include "npnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "npnet/common.hpp"
#include "npnet/rng.hpp"

namespace npnet {

namespace {

std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw Error(path + ": truncated at offset " + std::to_string(off));
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

int remap_labels(const std::vector<double>& raw, std::vector<int>& out) {
    std::vector<double> uniq = raw;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::map<double, int> index;
    for (std::size_t i = 0; i < uniq.size(); ++i) index[uniq[i]] = static_cast<int>(i);
    out.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = index[raw[i]];
    return static_cast<int>(uniq.size());
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<char> img = read_file(images_path);
    const std::vector<char> lab = read_file(labels_path);

    const std::uint32_t img_magic = read_be32(img, 0, images_path);
    if (img_magic != 0x00000803u)
        throw Error(images_path + ": bad magic at offset 0 (expected 0x00000803)");
    const std::uint32_t count = read_be32(img, 4, images_path);
    const std::uint32_t rows = read_be32(img, 8, images_path);
    const std::uint32_t cols = read_be32(img, 12, images_path);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    if (img.size() != 16 + static_cast<std::size_t>(count) * pixels)
        throw Error(images_path + ": truncated pixel data at offset " + std::to_string(img.size()));

    const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
    if (lab_magic != 0x00000801u)
        throw Error(labels_path + ": bad magic at offset 0 (expected 0x00000801)");
    const std::uint32_t lab_count = read_be32(lab, 4, labels_path);
    if (lab_count != count)
        throw Error(labels_path + ": label count " + std::to_string(lab_count) +
                    " does not match image count " + std::to_string(count) + " (offset 4)");
    if (lab.size() != 8 + static_cast<std::size_t>(lab_count))
        throw Error(labels_path + ": truncated label data at offset " + std::to_string(lab.size()));

    Dataset d;
    d.X = Matrix(count, pixels);
    d.y.resize(count);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const unsigned char* px =
            reinterpret_cast<const unsigned char*>(img.data()) + 16 + static_cast<std::size_t>(i) * pixels;
        double* row = d.X.row(i);
        for (std::size_t p = 0; p < pixels; ++p) row[p] = static_cast<double>(px[p]) / 255.0;
        d.y[i] = static_cast<int>(static_cast<unsigned char>(lab[8 + i]));
        max_label = std::max(max_label, d.y[i]);
    }
    d.num_classes = max_label + 1;
    return d;
}

Dataset load_csv(const std::string& path, int label_column, bool has_header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (has_header && lineno == 1) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw Error(path + ": non-numeric cell '" + cell + "' at row " +
                            std::to_string(lineno));
            row.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(path + ": ragged row at row " + std::to_string(lineno) + " (got " +
                        std::to_string(row.size()) + " cells, expected " +
                        std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(path + ": no data rows");
    const std::size_t width = rows.front().size();
    if (width < 2) throw Error(path + ": need at least one feature and one label column");
    std::size_t label_idx;
    if (label_column < 0)
        label_idx = width - 1;
    else if (static_cast<std::size_t>(label_column) < width)
        label_idx = static_cast<std::size_t>(label_column);
    else
        throw Error(path + ": label column " + std::to_string(label_column) + " out of range");

    Dataset d;
    d.X = Matrix(rows.size(), width - 1);
    std::vector<double> raw_labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double* dst = d.X.row(i);
        std::size_t o = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_idx)
                raw_labels[i] = rows[i][c];
            else
                dst[o++] = rows[i][c];
        }
    }
    d.num_classes = remap_labels(raw_labels, d.y);
    return d;
}

Dataset load_amat(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        while (ss >> v) row.push_back(v);
        if (!ss.eof())
            throw Error(path + ": non-numeric token at row " + std::to_string(lineno));
        if (row.empty()) continue;
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(path + ": ragged row at row " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(path + ": no data rows");
    const std::size_t width = rows.front().size();
    if (width < 2) throw Error(path + ": need at least one feature and one label column");

    Dataset d;
    d.X = Matrix(rows.size(), width - 1);
    std::vector<double> raw_labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c + 1 < width; ++c) d.X(i, c) = rows[i][c];
        raw_labels[i] = rows[i][width - 1];
    }
    d.num_classes = remap_labels(raw_labels, d.y);
    return d;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::vector<Dataset> split(const Dataset& data, std::span<const std::size_t> sizes,
                           std::uint64_t seed) {
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (total != data.size())
        throw Error("split: sizes sum to " + std::to_string(total) + " but dataset has " +
                    std::to_string(data.size()) + " rows");
    const std::vector<std::size_t> perm = permutation(data.size(), seed);
    std::vector<Dataset> out;
    std::size_t cursor = 0;
    for (std::size_t s : sizes) {
        Dataset piece;
        piece.num_classes = data.num_classes;
        piece.standardized = data.standardized;
        piece.feat_mean = data.feat_mean;
        piece.feat_std = data.feat_std;
        piece.X = Matrix(s, data.X.cols());
        piece.y.resize(s);
        for (std::size_t i = 0; i < s; ++i) {
            const std::size_t src = perm[cursor + i];
            const double* from = data.X.row(src);
            double* to = piece.X.row(i);
            for (std::size_t c = 0; c < data.X.cols(); ++c) to[c] = from[c];
            piece.y[i] = data.y[src];
        }
        cursor += s;
        out.push_back(std::move(piece));
    }
    return out;
}

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.classes < 1) throw Error("gen_synthetic: classes must be >= 1");
    if (spec.n < static_cast<std::size_t>(spec.classes))
        throw Error("gen_synthetic: need n >= classes");
    if (spec.d0 < 1) throw Error("gen_synthetic: d0 must be >= 1");
    if (spec.kind == SyntheticSpec::Kind::XorQuadrants && spec.d0 < 2)
        throw Error("gen_synthetic: xor_quadrants needs d0 >= 2");

    Rng rng(mix_seed(seed, 0x5E17));
    Dataset d;
    d.X = Matrix(spec.n, spec.d0);
    d.y.resize(spec.n);

    if (spec.kind == SyntheticSpec::Kind::GaussianBlobs) {
        d.num_classes = spec.classes;
        for (std::size_t i = 0; i < spec.n; ++i) {
            const int cls = static_cast<int>(i % static_cast<std::size_t>(spec.classes));
            d.y[i] = cls;
            double cx = 0.0, cy = 0.0;
            if (spec.d0 == 1) {
                cx = 6.0 * cls;
            } else {
                const double angle =
                    2.0 * std::numbers::pi * cls / static_cast<double>(spec.classes);
                cx = 3.0 * std::cos(angle);
                cy = 3.0 * std::sin(angle);
            }
            double* row = d.X.row(i);
            for (std::size_t c = 0; c < spec.d0; ++c) {
                double center = 0.0;
                if (c == 0) center = cx;
                if (c == 1) center = cy;
                row[c] = center + spec.noise * rng.normal();
            }
        }
    } else {
        d.num_classes = 2;
        for (std::size_t i = 0; i < spec.n; ++i) {
            double* row = d.X.row(i);
            for (std::size_t c = 0; c < spec.d0; ++c) row[c] = rng.uniform(-1.0, 1.0);
            const bool a = row[0] > 0.0;
            const bool b = row[1] > 0.0;
            d.y[i] = (a != b) ? 1 : 0;
            if (spec.noise > 0.0)
                for (std::size_t c = 0; c < spec.d0; ++c) row[c] += spec.noise * rng.normal();
        }
    }
    return d;
}

Scaler Scaler::fit(const Dataset& data) {
    if (data.size() == 0) throw Error("Scaler::fit: empty dataset");
    const std::size_t w = data.X.cols();
    Scaler s;
    s.mean.assign(w, 0.0);
    s.stddev.assign(w, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* row = data.X.row(i);
        for (std::size_t c = 0; c < w; ++c) s.mean[c] += row[c];
    }
    for (std::size_t c = 0; c < w; ++c) s.mean[c] /= static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* row = data.X.row(i);
        for (std::size_t c = 0; c < w; ++c) {
            const double dlt = row[c] - s.mean[c];
            s.stddev[c] += dlt * dlt;
        }
    }
    for (std::size_t c = 0; c < w; ++c) {
        s.stddev[c] = std::sqrt(s.stddev[c] / static_cast<double>(data.size()));
        if (s.stddev[c] == 0.0) s.stddev[c] = 1.0;
    }
    return s;
}

void Scaler::apply(Dataset& data) const {
    if (data.X.cols() != mean.size()) throw Error("Scaler::apply: feature width mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) {
        double* row = data.X.row(i);
        for (std::size_t c = 0; c < mean.size(); ++c) row[c] = (row[c] - mean[c]) / stddev[c];
    }
    data.standardized = true;
    data.feat_mean = mean;
    data.feat_std = stddev;
}

std::uint64_t fingerprint(const Dataset& data) {
    // FNV-1a over the raw feature bytes, labels, and class count.
    std::uint64_t h = 0xCBF29CE484222325ull;
    const auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ull;
        }
    };
    const std::uint64_t rows = data.X.rows(), cols = data.X.cols();
    mix(&rows, sizeof rows);
    mix(&cols, sizeof cols);
    mix(data.X.flat().data(), data.X.size() * sizeof(double));
    mix(data.y.data(), data.y.size() * sizeof(int));
    mix(&data.num_classes, sizeof data.num_classes);
    return h;
}

} // namespace npnet
