// npnet command line: train / eval / gradcheck / inspect.
// Talks to the core exclusively through the C API in npnet.h; the inspect
// subcommand only reads files a training run wrote.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npnet.h"

namespace {

int report(npnet_status status) {
    if (status != NPNET_OK) std::cerr << "npnet: " << npnet_last_error() << "\n";
    return static_cast<int>(status);
}

struct ConfigHandle {
    npnet_config* ptr = nullptr;
    ~ConfigHandle() { npnet_config_free(ptr); }
};
struct ModelHandle {
    npnet_model* ptr = nullptr;
    ~ModelHandle() { npnet_model_free(ptr); }
};
struct DatasetHandle {
    npnet_dataset* ptr = nullptr;
    ~DatasetHandle() { npnet_dataset_free(ptr); }
};

int cmd_train(const std::string& config_path, long long seed, bool has_seed,
              const std::string& out_dir, const std::string& resume) {
    ConfigHandle cfg;
    if (auto st = npnet_config_load(config_path.c_str(), &cfg.ptr); st != NPNET_OK)
        return report(st);
    if (has_seed) {
        if (auto st = npnet_config_set(cfg.ptr, "seed", std::to_string(seed).c_str());
            st != NPNET_OK)
            return report(st);
    }
    ModelHandle model;
    if (auto st = npnet_train_run(cfg.ptr, out_dir.c_str(), resume.empty() ? nullptr : resume.c_str(),
                                  &model.ptr);
        st != NPNET_OK)
        return report(st);

    const size_t layers = npnet_model_layer_count(model.ptr);
    std::vector<size_t> dims(layers + 1);
    npnet_model_dims(model.ptr, dims.data(), dims.size());
    std::cout << "trained model dims:";
    for (size_t d : dims) std::cout << " " << d;
    std::cout << "\noutputs written to " << out_dir << "\n";
    return 0;
}

int load_data_for_eval(const std::string& data, const std::string& labels,
                       const std::string& format, int label_column, bool has_header,
                       DatasetHandle& out) {
    npnet_status st;
    if (format == "idx")
        st = npnet_dataset_load_idx(data.c_str(), labels.c_str(), &out.ptr);
    else if (format == "csv")
        st = npnet_dataset_load_csv(data.c_str(), label_column, has_header ? 1 : 0, &out.ptr);
    else if (format == "amat")
        st = npnet_dataset_load_amat(data.c_str(), &out.ptr);
    else {
        std::cerr << "npnet: unknown data format '" << format << "'\n";
        return 2;
    }
    return report(st);
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& labels,
             const std::string& format, int label_column, bool has_header, bool json) {
    ModelHandle model;
    if (auto st = npnet_model_load(model_path.c_str(), &model.ptr); st != NPNET_OK)
        return report(st);
    DatasetHandle ds;
    if (int rc = load_data_for_eval(data, labels, format, label_column, has_header, ds); rc != 0)
        return rc;
    double ce = 0.0, err = 0.0;
    if (auto st = npnet_model_eval(model.ptr, ds.ptr, &ce, &err); st != NPNET_OK)
        return report(st);
    if (json)
        std::printf("{\"cross_entropy\": %.17g, \"error_rate\": %.17g}\n", ce, err);
    else
        std::printf("cross-entropy: %.6f\nerror rate: %.4f%%\n", ce, 100.0 * err);
    return 0;
}

int cmd_gradcheck(const std::string& config_path, int trials) {
    if (trials <= 0) {
        std::cerr << "npnet: --trials must be >= 1\n";
        return 2;
    }
    ConfigHandle cfg;
    if (auto st = npnet_config_load(config_path.c_str(), &cfg.ptr); st != NPNET_OK)
        return report(st);
    double worst = 0.0;
    const npnet_status st = npnet_gradcheck(cfg.ptr, trials, &worst);
    std::printf("max relative error over %d trials: %.3e\n", trials, worst);
    if (st != NPNET_OK) return report(st);
    std::printf("gradcheck passed\n");
    return 0;
}

// ---- inspect: pure file munging over metrics.csv / units.csv / norms.csv ----

std::vector<std::vector<std::string>> read_csv(const std::string& path, std::string& header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            header = line;
            first = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

int cmd_inspect(const std::string& metrics_path, const std::string& emit) {
    try {
        if (emit == "sizes") {
            std::string header;
            const auto rows = read_csv(metrics_path, header);
            if (rows.empty()) {
                std::cerr << "npnet: metrics file has no data rows\n";
                return 2;
            }
            // Columns d_1..d_k sit between valid_err and alpha_phi.
            std::vector<std::string> cols;
            {
                std::stringstream ss(header);
                std::string c;
                while (std::getline(ss, c, ',')) cols.push_back(c);
            }
            std::vector<size_t> dcols;
            for (size_t i = 0; i < cols.size(); ++i)
                if (cols[i].rfind("d_", 0) == 0) dcols.push_back(i);
            if (dcols.empty()) {
                std::cerr << "npnet: no layer-size columns in metrics file\n";
                return 2;
            }
            std::cout << "epoch,total_hidden";
            for (size_t i : dcols) std::cout << "," << cols[i];
            std::cout << "\n";
            for (const auto& row : rows) {
                long total = 0;
                for (size_t i : dcols) total += std::stol(row.at(i));
                std::cout << row.at(0) << "," << total;
                for (size_t i : dcols) std::cout << "," << row.at(i);
                std::cout << "\n";
            }
            return 0;
        }
        if (emit == "lifetimes") {
            std::string header;
            const auto rows = read_csv(metrics_path, header);
            if (header != "unit_id,layer,birth_epoch,death_epoch") {
                std::cerr << "npnet: expected a units.csv file for --emit lifetimes\n";
                return 2;
            }
            if (rows.empty()) {
                std::cerr << "npnet: units file has no data rows\n";
                return 2;
            }
            std::cout << "unit_id,layer,birth_epoch,death_epoch,lifetime,survived\n";
            for (const auto& row : rows) {
                const long birth = std::stol(row.at(2));
                const long death = std::stol(row.at(3));
                const bool alive = death < 0;
                std::cout << row.at(0) << "," << row.at(1) << "," << birth << "," << death << ","
                          << (alive ? -1 : death - birth) << "," << (alive ? 1 : 0) << "\n";
            }
            return 0;
        }
        if (emit == "norms") {
            std::string header;
            const auto rows = read_csv(metrics_path, header);
            if (header != "epoch,layer,unit_id,fanin_norm,fanout_norm") {
                std::cerr << "npnet: expected a norms.csv file for --emit norms\n";
                return 2;
            }
            if (rows.empty()) {
                std::cerr << "npnet: norms file has no data rows\n";
                return 2;
            }
            std::cout << header << "\n";
            for (const auto& row : rows) {
                for (size_t i = 0; i < row.size(); ++i)
                    std::cout << (i ? "," : "") << row[i];
                std::cout << "\n";
            }
            return 0;
        }
        std::cerr << "npnet: --emit must be sizes, norms, or lifetimes\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "npnet: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"npnet: trains feedforward networks whose hidden widths adapt during training"};
    app.require_subcommand(1);

    // train
    std::string train_config, train_out = "npnet-out", train_resume;
    long long train_seed = 0;
    bool train_has_seed = false;
    auto* train = app.add_subcommand("train", "run the full training schedule");
    train->add_option("--config", train_config, "config file (flat TOML)")->required();
    train->add_option("--out", train_out, "output directory");
    train->add_option("--resume", train_resume, "checkpoint file to resume from");
    train->add_option("--seed", train_seed, "override the config seed")
        ->each([&](const std::string&) { train_has_seed = true; });

    // eval
    std::string eval_model, eval_data, eval_labels, eval_format = "csv";
    int eval_label_column = -1;
    bool eval_header = false, eval_json = false;
    auto* eval = app.add_subcommand("eval", "evaluate a trained model on a dataset");
    eval->add_option("--model", eval_model, "model file (model.npck)")->required();
    eval->add_option("--data", eval_data, "dataset file (images file for idx)")->required();
    eval->add_option("--labels", eval_labels, "labels file (idx format only)");
    eval->add_option("--format", eval_format, "idx, csv, or amat");
    eval->add_option("--label-column", eval_label_column, "csv label column (-1 = last)");
    eval->add_flag("--header", eval_header, "csv file has a header row");
    eval->add_flag("--json", eval_json, "machine-readable output");

    // gradcheck
    std::string grad_config;
    int grad_trials = 5;
    auto* grad = app.add_subcommand("gradcheck", "check analytic gradients vs finite differences");
    grad->add_option("--config", grad_config, "config file (flat TOML)")->required();
    grad->add_option("--trials", grad_trials, "number of random networks");

    // inspect
    std::string inspect_metrics, inspect_emit = "sizes";
    auto* inspect = app.add_subcommand("inspect", "emit CSV series from run outputs");
    inspect->add_option("--metrics", inspect_metrics,
                        "metrics.csv (sizes), units.csv (lifetimes), or norms.csv (norms)")
        ->required();
    inspect->add_option("--emit", inspect_emit, "sizes, norms, or lifetimes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (train->parsed())
        return cmd_train(train_config, train_seed, train_has_seed, train_out, train_resume);
    if (eval->parsed())
        return cmd_eval(eval_model, eval_data, eval_labels, eval_format, eval_label_column,
                        eval_header, eval_json);
    if (grad->parsed()) return cmd_gradcheck(grad_config, grad_trials);
    if (inspect->parsed()) return cmd_inspect(inspect_metrics, inspect_emit);
    return 2;
}
