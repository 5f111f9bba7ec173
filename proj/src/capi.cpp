#include <tagcomp/tagcomp.h>

#include <tagcomp/error.hpp>
#include <tagcomp/gradcheck.hpp>
#include <tagcomp/io.hpp>
#include <tagcomp/optimizer.hpp>
#include <tagcomp/tagging_tasks.hpp>

#include <filesystem>
#include <new>
#include <string>

struct tc_config {
    tagcomp::HyperParams hp;
};

struct tc_dataset {
    tagcomp::Dataset data;
};

struct tc_model {
    tagcomp::TrainState ts;
    tagcomp::HyperParams hp;
};

struct tc_cv_report {
    tagcomp::CrossValidation cv;
};

namespace {

thread_local std::string g_last_error;

template <class F>
tc_status guarded(F&& body) {
    try {
        body();
        return TC_OK;
    } catch (const tagcomp::InvalidArgument& e) {
        g_last_error = e.what();
        return TC_ERR_INVALID_ARGUMENT;
    } catch (const tagcomp::ParseError& e) {
        g_last_error = e.what();
        return TC_ERR_PARSE;
    } catch (const tagcomp::IoError& e) {
        g_last_error = e.what();
        return TC_ERR_IO;
    } catch (const tagcomp::DivergenceError& e) {
        g_last_error = e.what();
        return TC_ERR_DIVERGED;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return TC_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return TC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return TC_ERR_INTERNAL;
    }
}

template <class T>
void require(const T* p, const char* what) {
    if (p == nullptr) throw tagcomp::InvalidArgument(std::string(what) + " is null");
}

const tagcomp::EvalReport& pick(const tc_cv_report* rep, tc_metric metric) {
    switch (metric) {
        case TC_METRIC_PRECISION_AT_K: return rep->cv.precision;
        case TC_METRIC_POS_AT_TOP: return rep->cv.pos_at_top;
    }
    throw tagcomp::InvalidArgument("unknown metric");
}

std::vector<tagcomp::Index> indices(const size_t* p, size_t n) {
    if (n > 0 && p == nullptr) throw tagcomp::InvalidArgument("index array is null");
    return std::vector<tagcomp::Index>(p, p + n);
}

}  // namespace

extern "C" {

const char* tc_last_error(void) { return g_last_error.c_str(); }

const char* tc_status_name(tc_status status) {
    switch (status) {
        case TC_OK: return "ok";
        case TC_ERR_INVALID_ARGUMENT: return "invalid argument";
        case TC_ERR_PARSE: return "parse error";
        case TC_ERR_IO: return "i/o error";
        case TC_ERR_DIVERGED: return "diverged";
        case TC_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

tc_status tc_config_create(tc_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new tc_config{};
    });
}

tc_status tc_config_load(const char* path, tc_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new tc_config{tagcomp::io::read_config(path)};
    });
}

tc_status tc_config_set(tc_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        require(cfg, "config");
        require(key, "key");
        require(value, "value");
        tagcomp::HyperParams hp = cfg->hp;
        tagcomp::io::set_config_value(hp, key, value);
        hp.validate();
        cfg->hp = hp;
    });
}

tc_status tc_config_save(const tc_config* cfg, const char* path) {
    return guarded([&] {
        require(cfg, "config");
        require(path, "path");
        tagcomp::io::write_config(path, cfg->hp);
    });
}

void tc_config_destroy(tc_config* cfg) { delete cfg; }

tc_status tc_dataset_load(const char* manifest_path, const char* tags_path,
                          const tc_config* cfg, tc_dataset** out) {
    return guarded([&] {
        require(manifest_path, "manifest path");
        require(tags_path, "tags path");
        require(out, "out");
        const tagcomp::HyperParams hp = cfg ? cfg->hp : tagcomp::HyperParams{};
        *out = new tc_dataset{tagcomp::io::load_dataset(manifest_path, tags_path, hp)};
    });
}

tc_status tc_dataset_shape(const tc_dataset* ds, size_t* images, size_t* tags, size_t* dim) {
    return guarded([&] {
        require(ds, "dataset");
        if (images) *images = static_cast<size_t>(ds->data.size());
        if (tags) *tags = static_cast<size_t>(ds->data.T_hat.rows());
        if (dim) *dim = static_cast<size_t>(ds->data.images.front().dim());
    });
}

void tc_dataset_destroy(tc_dataset* ds) { delete ds; }

tc_synth_params tc_synth_defaults(void) {
    const tagcomp::SynthParams p;
    return tc_synth_params{p.images, p.tags,  p.dim, p.patches_per_image,
                           p.clusters, p.noise, p.seed, 0.0};
}

tc_status tc_synth_write(const tc_synth_params* params, const char* out_dir) {
    return guarded([&] {
        namespace fs = std::filesystem;
        require(params, "params");
        require(out_dir, "output directory");
        if (!(params->rho == 0.0 || (params->rho > 0.0 && params->rho < 1.0))) {
            throw tagcomp::InvalidArgument("rho must be 0 or lie in (0, 1)");
        }
        tagcomp::SynthParams p;
        p.images = params->images;
        p.tags = params->tags;
        p.dim = params->dim;
        p.patches_per_image = params->patches_per_image;
        p.clusters = params->clusters;
        p.noise = params->noise;
        p.seed = params->seed;
        const auto synth = tagcomp::synth_dataset(p);

        const fs::path dir(out_dir);
        std::error_code ec;
        fs::create_directories(dir / "patches", ec);
        if (ec) throw tagcomp::IoError("cannot create '" + (dir / "patches").string() + "'");

        tagcomp::io::DatasetManifest mf;
        mf.tags = p.tags;
        mf.dim = p.dim;
        for (const auto& img : synth.images) {
            const fs::path rel = fs::path("patches") / (img.image_id + ".txt");
            tagcomp::io::write_matrix(dir / rel, img.data);
            mf.entries.push_back({img.image_id, rel, tagcomp::io::ImageKind::patches});
        }
        tagcomp::io::write_manifest(dir / "manifest.txt", mf);
        tagcomp::io::write_full_tags(dir / "tags_full.txt", synth.T_full);
        if (params->rho > 0.0) {
            const auto mask = tagcomp::mask_generate(synth.T_full, params->rho, p.seed);
            tagcomp::io::write_tags(dir / "tags_observed.txt", mask.T_hat, mask.Phi);
        }
    });
}

tc_status tc_run(const tc_dataset* ds, const tc_config* cfg, uint64_t seed, tc_model** out) {
    return guarded([&] {
        require(ds, "dataset");
        require(out, "out");
        const tagcomp::HyperParams hp = cfg ? cfg->hp : tagcomp::HyperParams{};
        *out = new tc_model{tagcomp::run(ds->data, hp, seed), hp};
    });
}

tc_status tc_model_shape(const tc_model* model, size_t* tags, size_t* images, size_t* filters,
                         size_t* dim) {
    return guarded([&] {
        require(model, "model");
        if (tags) *tags = static_cast<size_t>(model->ts.state.tags());
        if (images) *images = static_cast<size_t>(model->ts.state.images());
        if (filters) *filters = static_cast<size_t>(model->ts.bank.filters());
        if (dim) *dim = static_cast<size_t>(model->ts.bank.dim());
    });
}

tc_status tc_model_completed(const tc_model* model, double* out, size_t len) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        const auto& T = model->ts.state.T;
        if (len != static_cast<size_t>(T.size())) {
            throw tagcomp::InvalidArgument("buffer length " + std::to_string(len) +
                                           " does not match " + std::to_string(T.size()));
        }
        for (tagcomp::Index j = 0; j < T.rows(); ++j) {
            for (tagcomp::Index i = 0; i < T.cols(); ++i) *out++ = T(j, i);
        }
    });
}

tc_status tc_model_trace_length(const tc_model* model, size_t* len) {
    return guarded([&] {
        require(model, "model");
        require(len, "len");
        *len = model->ts.trace.size();
    });
}

tc_status tc_model_trace_row(const tc_model* model, size_t index, tc_trace_row* row) {
    return guarded([&] {
        require(model, "model");
        require(row, "row");
        const auto& trace = tagcomp::export_trace(model->ts);
        if (index >= trace.size()) throw tagcomp::InvalidArgument("trace index out of range");
        const auto& t = trace[index];
        *row = tc_trace_row{t.iteration,           t.objective.total,
                            t.objective.consistency, t.objective.prediction,
                            t.objective.smoothness,  t.objective.sparsity};
    });
}

tc_status tc_model_write_completed(const tc_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        tagcomp::io::write_matrix(path, model->ts.state.T);
    });
}

tc_status tc_model_write_trace(const tc_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        tagcomp::io::write_trace_csv(path, tagcomp::export_trace(model->ts));
    });
}

tc_status tc_model_save(const tc_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        tagcomp::io::save_model(path, model->ts.bank, model->ts.pred, model->hp);
    });
}

void tc_model_destroy(tc_model* model) { delete model; }

tc_status tc_cross_validate(const tc_dataset* ds, const tc_config* cfg, int folds, double rho,
                            int K, uint64_t seed, tc_cv_report** out) {
    return guarded([&] {
        require(ds, "dataset");
        require(out, "out");
        const tagcomp::HyperParams hp = cfg ? cfg->hp : tagcomp::HyperParams{};
        const tagcomp::Matrix T_full = ds->data.T_hat.cwiseProduct(ds->data.Phi);
        *out = new tc_cv_report{
            tagcomp::cross_validate(ds->data.images, T_full, folds, rho, hp, seed, K)};
    });
}

tc_status tc_cv_report_folds(const tc_cv_report* rep, tc_metric metric, size_t* count) {
    return guarded([&] {
        require(rep, "report");
        require(count, "count");
        *count = pick(rep, metric).per_fold.size();
    });
}

tc_status tc_cv_report_value(const tc_cv_report* rep, tc_metric metric, size_t fold,
                             double* value) {
    return guarded([&] {
        require(rep, "report");
        require(value, "value");
        const auto& r = pick(rep, metric);
        if (fold >= r.per_fold.size()) throw tagcomp::InvalidArgument("fold out of range");
        *value = r.per_fold[fold];
    });
}

tc_status tc_cv_report_mean(const tc_cv_report* rep, tc_metric metric, double* value) {
    return guarded([&] {
        require(rep, "report");
        require(value, "value");
        *value = pick(rep, metric).mean;
    });
}

void tc_cv_report_destroy(tc_cv_report* rep) { delete rep; }

tc_status tc_precision_at_k(const size_t* predicted, size_t n_predicted, const size_t* truth,
                            size_t n_truth, int K, double* value) {
    return guarded([&] {
        require(value, "value");
        *value = tagcomp::precision_at_k(indices(predicted, n_predicted),
                                         indices(truth, n_truth), K);
    });
}

tc_status tc_pos_at_top(const size_t* ranking, size_t n_ranking, const size_t* relevant,
                        size_t n_relevant, double* value, int* defined) {
    return guarded([&] {
        require(value, "value");
        require(defined, "defined");
        const auto v = tagcomp::pos_at_top(indices(ranking, n_ranking),
                                           indices(relevant, n_relevant));
        *defined = v ? 1 : 0;
        *value = v.value_or(0.0);
    });
}

tc_status tc_gradcheck(uint64_t seed, int instances, tc_gradcheck_size size,
                       tc_gradcheck_result* out) {
    return guarded([&] {
        require(out, "out");
        if (instances < 1) throw tagcomp::InvalidArgument("instances must be positive");
        tagcomp::InstanceLimits limits;
        if (size == TC_GRADCHECK_MEDIUM) limits = {10, 12, 8, 8, 6};
        else if (size != TC_GRADCHECK_SMALL) throw tagcomp::InvalidArgument("unknown size");
        constexpr double kTol = 1e-4;
        const auto r = tagcomp::run_gradient_check(seed, instances, limits, 1e-5, kTol);
        *out = tc_gradcheck_result{r.instances, r.max_rel_T, r.max_rel_U, r.max_rel_b,
                                   r.max_rel_W, kTol, r.pass ? 1 : 0};
    });
}

}  // extern "C"
