#include "gam.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "gam/checkpoint.hpp"
#include "gam/config.hpp"
#include "gam/dataset.hpp"
#include "gam/errors.hpp"
#include "gam/evaluate.hpp"
#include "gam/train.hpp"

using namespace gam;

namespace {

thread_local std::string g_last_error;

struct ModelBox {
    Model model;
    ExperimentConfig config;
};

// The config handle keeps the raw key/value tree; cross-field validation
// happens when a consuming call parses it, before any work starts.
ConfigTree* tree_of(gam_config* c) { return reinterpret_cast<ConfigTree*>(c); }
const ConfigTree* tree_of(const gam_config* c) { return reinterpret_cast<const ConfigTree*>(c); }

ExperimentConfig parse_config(const gam_config* c) { return experiment_from_tree(*tree_of(c)); }

const ModelBox* unbox(const gam_model* m) { return reinterpret_cast<const ModelBox*>(m); }

gam_status fail(gam_status status, const char* what) {
    g_last_error = what ? what : "";
    return status;
}

// Runs fn, translating exceptions into status codes + the thread-local
// message.
template <typename Fn>
gam_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return GAM_OK;
    } catch (const ParseError& e) {
        return fail(GAM_ERROR_PARSE, e.what());
    } catch (const IoError& e) {
        return fail(GAM_ERROR_IO, e.what());
    } catch (const NumericError& e) {
        return fail(GAM_ERROR_NUMERIC, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(GAM_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::domain_error& e) {
        return fail(GAM_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(GAM_ERROR_UNKNOWN, e.what());
    } catch (...) {
        return fail(GAM_ERROR_UNKNOWN, "unknown error");
    }
}

gam_status require(bool ok, const char* what) {
    return ok ? GAM_OK : fail(GAM_ERROR_INVALID_ARGUMENT, what);
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

EvalOptions eval_options(int pairs, double noise_stddev, double noise_fraction,
                         unsigned long long seed, const char* mask) {
    EvalOptions options;
    options.pairs = pairs;
    options.seed = seed;
    if (noise_stddev > 0.0) options.noise = NoisePolicy{true, noise_fraction, noise_stddev};
    if (mask && *mask) options.mask = MaskSpec::parse(mask);
    return options;
}

}  // namespace

extern "C" {

const char* gam_version(void) { return "0.1.0"; }

const char* gam_status_name(gam_status status) {
    switch (status) {
        case GAM_OK: return "ok";
        case GAM_ERROR_INVALID_ARGUMENT: return "invalid argument";
        case GAM_ERROR_IO: return "io error";
        case GAM_ERROR_PARSE: return "parse error";
        case GAM_ERROR_NUMERIC: return "numeric error";
        case GAM_ERROR_UNKNOWN: break;
    }
    return "unknown error";
}

const char* gam_last_error(void) { return g_last_error.c_str(); }

void gam_string_free(char* text) { delete[] text; }

gam_status gam_config_preset(const char* variant, gam_config** out) {
    if (gam_status s = require(variant && out, "preset: null argument")) return s;
    return guarded([&] {
        *out = reinterpret_cast<gam_config*>(new ConfigTree(experiment_to_tree(preset(variant))));
    });
}

gam_status gam_config_read(const char* path, gam_config** out) {
    if (gam_status s = require(path && out, "config_read: null argument")) return s;
    return guarded([&] {
        ConfigTree tree = ConfigTree::load(path);
        experiment_from_tree(tree);  // reject unknown keys and bad values now
        *out = reinterpret_cast<gam_config*>(new ConfigTree(std::move(tree)));
    });
}

gam_status gam_config_write(const gam_config* config, const char* path) {
    if (gam_status s = require(config && path, "config_write: null argument")) return s;
    return guarded([&] { tree_of(config)->save(path); });
}

gam_status gam_config_set(gam_config* config, const char* key, const char* value) {
    if (gam_status s = require(config && key && value, "config_set: null argument")) return s;
    return guarded([&] {
        if (!is_known_config_key(key)) throw ParseError("config: unknown key '" + std::string(key) + "'");
        tree_of(config)->set(key, value);
    });
}

gam_status gam_config_get(const gam_config* config, const char* key, char** out_value) {
    if (gam_status s = require(config && key && out_value, "config_get: null argument")) return s;
    return guarded([&] { *out_value = dup_string(tree_of(config)->get(key)); });
}

gam_status gam_config_describe(const gam_config* config, char** out_text) {
    if (gam_status s = require(config && out_text, "config_describe: null argument")) return s;
    return guarded([&] { *out_text = dup_string(describe(parse_config(config))); });
}

gam_status gam_config_serialize(const gam_config* config, char** out_text) {
    if (gam_status s = require(config && out_text, "config_serialize: null argument")) return s;
    return guarded([&] { *out_text = dup_string(tree_of(config)->serialize()); });
}

gam_status gam_config_parameter_count(const gam_config* config, long long* out_count) {
    if (gam_status s = require(config && out_count, "parameter_count: null argument")) return s;
    return guarded([&] { *out_count = parameter_count(parse_config(config).model).total(); });
}

void gam_config_free(gam_config* config) { delete tree_of(config); }

gam_status gam_dataset_generate(int count, int points_per_shape, unsigned long long seed,
                                gam_dataset** out) {
    if (gam_status s = require(out != nullptr, "dataset_generate: null output")) return s;
    return guarded([&] {
        *out = reinterpret_cast<gam_dataset*>(
            new ShapeDataset(generate_synthetic_dataset(count, points_per_shape, seed)));
    });
}

gam_status gam_dataset_write(const gam_dataset* dataset, const char* dir) {
    if (gam_status s = require(dataset && dir, "dataset_write: null argument")) return s;
    return guarded([&] { save_dataset(*reinterpret_cast<const ShapeDataset*>(dataset), dir); });
}

gam_status gam_dataset_read(const char* dir, gam_dataset** out) {
    if (gam_status s = require(dir && out, "dataset_read: null argument")) return s;
    return guarded([&] { *out = reinterpret_cast<gam_dataset*>(new ShapeDataset(load_dataset(dir))); });
}

int gam_dataset_count(const gam_dataset* dataset) {
    return dataset ? reinterpret_cast<const ShapeDataset*>(dataset)->count() : 0;
}

int gam_dataset_points(const gam_dataset* dataset) {
    return dataset ? reinterpret_cast<const ShapeDataset*>(dataset)->n : 0;
}

void gam_dataset_free(gam_dataset* dataset) { delete reinterpret_cast<ShapeDataset*>(dataset); }

gam_status gam_train(const gam_config* config, const gam_dataset* dataset, const char* out_dir,
                     gam_epoch_callback on_epoch, void* user_data, gam_model** out_model) {
    if (gam_status s = require(config && dataset, "train: null argument")) return s;
    return guarded([&] {
        const ExperimentConfig experiment = parse_config(config);
        const auto& shapes = *reinterpret_cast<const ShapeDataset*>(dataset);
        std::function<void(const EpochRecord&)> callback;
        if (on_epoch)
            callback = [on_epoch, user_data](const EpochRecord& r) {
                on_epoch(r.epoch, r.loss, user_data);
            };
        TrainResult result = train(experiment, shapes, out_dir ? out_dir : "", callback);
        if (out_model)
            *out_model = reinterpret_cast<gam_model*>(
                new ModelBox{std::move(result.model), experiment});
    });
}

gam_status gam_model_read(const char* path, gam_model** out) {
    if (gam_status s = require(path && out, "model_read: null argument")) return s;
    return guarded([&] {
        auto [model, config] = load_checkpoint(path);
        *out = reinterpret_cast<gam_model*>(new ModelBox{std::move(model), std::move(config)});
    });
}

gam_status gam_model_write(const gam_model* model, const char* path) {
    if (gam_status s = require(model && path, "model_write: null argument")) return s;
    return guarded([&] {
        const ModelBox* box = unbox(model);
        save_checkpoint(box->model, box->config, path);
    });
}

gam_status gam_model_config(const gam_model* model, gam_config** out) {
    if (gam_status s = require(model && out, "model_config: null argument")) return s;
    return guarded([&] {
        *out = reinterpret_cast<gam_config*>(new ConfigTree(experiment_to_tree(unbox(model)->config)));
    });
}

void gam_model_free(gam_model* model) { delete reinterpret_cast<ModelBox*>(model); }

gam_status gam_evaluate(const gam_model* model, const gam_dataset* dataset, int pairs,
                        double noise_stddev, double noise_fraction, unsigned long long seed,
                        const char* mask, const char* report_csv, double* out_mean_error) {
    if (gam_status s = require(model && dataset, "evaluate: null argument")) return s;
    return guarded([&] {
        const auto& shapes = *reinterpret_cast<const ShapeDataset*>(dataset);
        EvalOptions options = eval_options(pairs, noise_stddev, noise_fraction, seed, mask);
        options.normalize_geodesic = unbox(model)->config.normalize_geodesic;
        EvalSummary summary = evaluate_testset(unbox(model)->model, shapes, options);
        if (report_csv) write_match_report_csv(summary, report_csv);
        if (out_mean_error) *out_mean_error = summary.mean_error;
    });
}

gam_status gam_ablate_heads(const gam_model* model, const gam_dataset* dataset, int pairs,
                            unsigned long long seed, const char* report_csv) {
    if (gam_status s = require(model && dataset, "ablate_heads: null argument")) return s;
    return guarded([&] {
        const auto& shapes = *reinterpret_cast<const ShapeDataset*>(dataset);
        EvalOptions options = eval_options(pairs, 0.0, 1.0, seed, nullptr);
        EvalSummary full = evaluate_testset(unbox(model)->model, shapes, options);
        std::vector<HeadAblationRow> rows = ablate_heads(unbox(model)->model, shapes, options);
        if (report_csv) write_head_ablation_csv(rows, full.mean_error, report_csv);
    });
}

gam_status gam_ablate_layers(const gam_config* config, const gam_dataset* dataset,
                             const char* out_dir, int pairs, unsigned long long seed,
                             const char* report_csv) {
    if (gam_status s = require(config && dataset, "ablate_layers: null argument")) return s;
    return guarded([&] {
        const ExperimentConfig experiment = parse_config(config);
        const auto& shapes = *reinterpret_cast<const ShapeDataset*>(dataset);
        EvalOptions options = eval_options(pairs, 0.0, 1.0, seed, nullptr);
        std::vector<LayerAblationRow> rows =
            ablate_layers(experiment, shapes, out_dir ? out_dir : "", options);
        if (report_csv) write_layer_ablation_csv(rows, report_csv);
    });
}

gam_status gam_export_attention(const gam_model* model, const gam_dataset* dataset, int src,
                                int dst, int layer, int head, int point_index,
                                const char* matrix_csv, const char* row_csv) {
    if (gam_status s =
            require(model && dataset && matrix_csv && row_csv, "export_attention: null argument"))
        return s;
    return guarded([&] {
        const auto& shapes = *reinterpret_cast<const ShapeDataset*>(dataset);
        if (src < 0 || src >= shapes.count() || dst < 0 || dst >= shapes.count())
            throw std::invalid_argument("export_attention: shape index out of range");
        PointCloud x = normalize(shapes.clouds[src]);
        PointCloud y = normalize(shapes.clouds[dst]);
        export_attention(unbox(model)->model, x, y, layer, head, point_index, matrix_csv, row_csv);
    });
}

}  // extern "C"
