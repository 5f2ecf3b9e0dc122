#include "npnet.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "npnet/checkpoint.hpp"
#include "npnet/common.hpp"
#include "npnet/config.hpp"
#include "npnet/dataset.hpp"
#include "npnet/driver.hpp"

namespace {

thread_local std::string g_last_error;

npnet_status fail(const std::exception& e) {
    g_last_error = e.what();
    return dynamic_cast<const npnet::ConfigError*>(&e) ? NPNET_ERR_USAGE : NPNET_ERR_RUNTIME;
}

npnet_status usage(const char* msg) {
    g_last_error = msg;
    return NPNET_ERR_USAGE;
}

} // namespace

struct npnet_config {
    npnet::RunConfig cfg;
};

struct npnet_dataset {
    npnet::Dataset data;
};

struct npnet_model {
    npnet::NetworkParams params;
    npnet::ModelConfig config;
    std::uint64_t config_hash = 0;
};

extern "C" {

const char* npnet_version(void) {
    static const std::string v = npnet::version_string();
    return v.c_str();
}

const char* npnet_last_error(void) { return g_last_error.c_str(); }

npnet_status npnet_config_parse(const char* text, npnet_config** out) {
    if (!text || !out) return usage("npnet_config_parse: NULL argument");
    try {
        auto* handle = new npnet_config{npnet::RunConfig::from_text(text)};
        *out = handle;
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_config_load(const char* path, npnet_config** out) {
    if (!path || !out) return usage("npnet_config_load: NULL argument");
    try {
        auto* handle = new npnet_config{npnet::RunConfig::from_file(path)};
        *out = handle;
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_config_set(npnet_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return usage("npnet_config_set: NULL argument");
    try {
        cfg->cfg.set_key(key, value);
        cfg->cfg.validate();
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

char* npnet_config_serialize(const npnet_config* cfg) {
    if (!cfg) return nullptr;
    const std::string text = cfg->cfg.serialize();
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (!buf) return nullptr;
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return buf;
}

void npnet_config_free(npnet_config* cfg) { delete cfg; }

npnet_status npnet_dataset_load_idx(const char* images_path, const char* labels_path,
                                    npnet_dataset** out) {
    if (!images_path || !labels_path || !out) return usage("npnet_dataset_load_idx: NULL argument");
    try {
        *out = new npnet_dataset{npnet::load_idx(images_path, labels_path)};
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_dataset_load_csv(const char* path, int label_column, int has_header,
                                    npnet_dataset** out) {
    if (!path || !out) return usage("npnet_dataset_load_csv: NULL argument");
    try {
        *out = new npnet_dataset{npnet::load_csv(path, label_column, has_header != 0)};
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_dataset_load_amat(const char* path, npnet_dataset** out) {
    if (!path || !out) return usage("npnet_dataset_load_amat: NULL argument");
    try {
        *out = new npnet_dataset{npnet::load_amat(path)};
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_dataset_synthetic(const char* kind, size_t n, size_t d0, int classes,
                                     double noise, unsigned long long seed, npnet_dataset** out) {
    if (!kind || !out) return usage("npnet_dataset_synthetic: NULL argument");
    try {
        npnet::SyntheticSpec spec;
        if (std::strcmp(kind, "gaussian_blobs") == 0)
            spec.kind = npnet::SyntheticSpec::Kind::GaussianBlobs;
        else if (std::strcmp(kind, "xor_quadrants") == 0)
            spec.kind = npnet::SyntheticSpec::Kind::XorQuadrants;
        else
            return usage("npnet_dataset_synthetic: kind must be gaussian_blobs or xor_quadrants");
        spec.n = n;
        spec.d0 = d0;
        spec.classes = classes;
        spec.noise = noise;
        *out = new npnet_dataset{npnet::gen_synthetic(spec, seed)};
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

size_t npnet_dataset_rows(const npnet_dataset* d) { return d ? d->data.size() : 0; }
size_t npnet_dataset_features(const npnet_dataset* d) { return d ? d->data.feature_count() : 0; }
int npnet_dataset_classes(const npnet_dataset* d) { return d ? d->data.num_classes : 0; }
void npnet_dataset_free(npnet_dataset* d) { delete d; }

npnet_status npnet_train_run(const npnet_config* cfg, const char* out_dir,
                             const char* resume_path, npnet_model** out_model) {
    if (!cfg) return usage("npnet_train_run: NULL config");
    try {
        const npnet::RunOutcome outcome = npnet::run_training(
            cfg->cfg, out_dir ? out_dir : "", resume_path ? resume_path : "");
        if (out_model) {
            auto* m = new npnet_model;
            m->params = outcome.model;
            m->config = outcome.model_config;
            m->config_hash = cfg->cfg.hash();
            *out_model = m;
        }
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_model_load(const char* path, npnet_model** out) {
    if (!path || !out) return usage("npnet_model_load: NULL argument");
    try {
        npnet::LoadedModel lm = npnet::load_model(path);
        auto* m = new npnet_model;
        m->params = std::move(lm.params);
        m->config = lm.config;
        m->config_hash = lm.config_hash;
        *out = m;
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_model_save(const npnet_model* m, const char* path) {
    if (!m || !path) return usage("npnet_model_save: NULL argument");
    try {
        npnet::save_model(m->params, m->config.norm, m->config_hash, path);
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

npnet_status npnet_model_eval(const npnet_model* m, const npnet_dataset* d, double* ce,
                              double* err_rate) {
    if (!m || !d) return usage("npnet_model_eval: NULL argument");
    try {
        const npnet::EvalResult r = npnet::evaluate(m->params, m->config, d->data);
        if (ce) *ce = r.ce;
        if (err_rate) *err_rate = r.err_rate;
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

size_t npnet_model_layer_count(const npnet_model* m) { return m ? m->params.layer_count() : 0; }

npnet_status npnet_model_dims(const npnet_model* m, size_t* dims, size_t dims_len) {
    if (!m || !dims) return usage("npnet_model_dims: NULL argument");
    if (dims_len < m->params.dims.size()) return usage("npnet_model_dims: buffer too small");
    for (std::size_t i = 0; i < m->params.dims.size(); ++i) dims[i] = m->params.dims[i];
    return NPNET_OK;
}

void npnet_model_free(npnet_model* m) { delete m; }

npnet_status npnet_gradcheck(const npnet_config* cfg, int trials, double* max_rel_err) {
    if (!cfg) return usage("npnet_gradcheck: NULL config");
    try {
        const double worst = npnet::gradcheck_run(cfg->cfg, trials);
        if (max_rel_err) *max_rel_err = worst;
        if (worst >= 1e-6) {
            g_last_error = "gradient check failed: max relative error " + std::to_string(worst);
            return NPNET_ERR_RUNTIME;
        }
        return NPNET_OK;
    } catch (const std::exception& e) {
        return fail(e);
    }
}

} // extern "C"
