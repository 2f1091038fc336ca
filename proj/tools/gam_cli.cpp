// Command-line front end. Talks to the library exclusively through the C API
// in gam.h.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "gam.h"

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(gam_status status) {
    if (status != GAM_OK)
        throw CliError(std::string(gam_status_name(status)) + ": " + gam_last_error());
}

struct ConfigHandle {
    gam_config* ptr = nullptr;
    ~ConfigHandle() { gam_config_free(ptr); }
};

struct DatasetHandle {
    gam_dataset* ptr = nullptr;
    ~DatasetHandle() { gam_dataset_free(ptr); }
};

struct ModelHandle {
    gam_model* ptr = nullptr;
    ~ModelHandle() { gam_model_free(ptr); }
};

std::string take_string(char* text) {
    std::string out = text ? text : "";
    gam_string_free(text);
    return out;
}

struct CommonOpts {
    std::string config_path;
    std::string preset_name;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint;
    unsigned long long seed = 0;
    bool seed_given = false;
    int epochs = 0;
    bool epochs_given = false;
    std::vector<std::string> sets;
    std::string noise;  // "sigma" or "sigma:fraction"
    std::vector<std::string> mask_heads;
    int pairs = 0;
    bool pairs_given = false;
};

void add_config_options(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file");
    cmd->add_option("--preset", opts.preset_name, "named preset (see inspect-config --list)");
    cmd->add_option("--seed", opts.seed, "override the experiment seed")
        ->each([&](const std::string&) { opts.seed_given = true; });
    cmd->add_option("--epochs", opts.epochs, "override the number of training epochs")
        ->each([&](const std::string&) { opts.epochs_given = true; });
    cmd->add_option("--set", opts.sets, "override a config key, e.g. --set train.lr=0.001")
        ->take_all();
}

std::pair<std::string, std::string> split_noise(const std::string& text, double default_fraction) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        std::ostringstream frac;
        frac << default_fraction;
        return {text, frac.str()};
    }
    return {text.substr(0, colon), text.substr(colon + 1)};
}

ConfigHandle build_config(const CommonOpts& opts, bool noise_is_training) {
    if (!opts.config_path.empty() && !opts.preset_name.empty())
        throw CliError("pass either --config or --preset, not both");
    ConfigHandle config;
    if (!opts.config_path.empty())
        check(gam_config_read(opts.config_path.c_str(), &config.ptr));
    else if (!opts.preset_name.empty())
        check(gam_config_preset(opts.preset_name.c_str(), &config.ptr));
    else
        throw CliError("a configuration is required: --config FILE or --preset NAME");

    if (opts.seed_given)
        check(gam_config_set(config.ptr, "seed", std::to_string(opts.seed).c_str()));
    if (opts.epochs_given)
        check(gam_config_set(config.ptr, "train.epochs", std::to_string(opts.epochs).c_str()));
    if (opts.pairs_given)
        check(gam_config_set(config.ptr, "eval.pairs", std::to_string(opts.pairs).c_str()));
    if (!opts.data_dir.empty()) check(gam_config_set(config.ptr, "data.dir", opts.data_dir.c_str()));
    if (!opts.checkpoint.empty())
        check(gam_config_set(config.ptr, "eval.checkpoint", opts.checkpoint.c_str()));
    if (!opts.noise.empty()) {
        if (noise_is_training) {
            auto [stddev, fraction] = split_noise(opts.noise, 0.5);
            check(gam_config_set(config.ptr, "train.noise.enabled", "true"));
            check(gam_config_set(config.ptr, "train.noise.stddev", stddev.c_str()));
            check(gam_config_set(config.ptr, "train.noise.fraction", fraction.c_str()));
        } else {
            auto [stddev, fraction] = split_noise(opts.noise, 1.0);
            check(gam_config_set(config.ptr, "eval.noise_stddev", stddev.c_str()));
            check(gam_config_set(config.ptr, "eval.noise_fraction", fraction.c_str()));
        }
    }
    for (const std::string& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CliError("--set expects key=value, got '" + kv + "'");
        check(gam_config_set(config.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    return config;
}

std::string config_value(const gam_config* config, const char* key) {
    char* text = nullptr;
    check(gam_config_get(config, key, &text));
    return take_string(text);
}

unsigned long long config_seed(const gam_config* config) {
    return std::stoull(config_value(config, "seed"));
}

// Every run leaves a manifest with the tool version, the exact command and
// the fully resolved configuration.
void write_manifest(const std::string& out_dir, const gam_config* config, int argc, char** argv) {
    fs::create_directories(out_dir);
    std::ofstream manifest(fs::path(out_dir) / "run_manifest.txt");
    manifest << "# gam " << gam_version() << "\n# command:";
    for (int i = 0; i < argc; ++i) manifest << ' ' << argv[i];
    manifest << "\n";
    char* text = nullptr;
    check(gam_config_serialize(config, &text));
    manifest << take_string(text);
}

DatasetHandle load_data(const gam_config* config) {
    const std::string dir = config_value(config, "data.dir");
    if (dir.empty()) throw CliError("no dataset: pass --data DIR (or set data.dir)");
    DatasetHandle dataset;
    check(gam_dataset_read(dir.c_str(), &dataset.ptr));
    return dataset;
}

ModelHandle load_model(const gam_config* config) {
    const std::string path = config_value(config, "eval.checkpoint");
    if (path.empty()) throw CliError("no model: pass --checkpoint FILE (or set eval.checkpoint)");
    ModelHandle model;
    check(gam_model_read(path.c_str(), &model.ptr));
    return model;
}

std::string mask_spec(const std::vector<std::string>& entries) {
    std::string joined;
    for (const std::string& e : entries) {
        if (!joined.empty()) joined.push_back(',');
        joined += e;
    }
    return joined;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"transformer point-cloud matching with fixed Gaussian attention heads"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(gam_version()));

    CommonOpts opts;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
    int gen_count = 200, gen_points = 128;
    unsigned long long gen_seed = 1;
    gen->add_option("--count", gen_count, "number of shapes");
    gen->add_option("--points", gen_points, "points per shape (>= 16)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", opts.out_dir, "output dataset directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
    add_config_options(train_cmd, opts);
    train_cmd->add_option("--out", opts.out_dir, "output directory for checkpoints and logs")
        ->required();
    train_cmd->add_option("--data", opts.data_dir, "dataset directory");
    train_cmd->add_option("--noise", opts.noise,
                          "training noise 'STDDEV[:FRACTION]' (fraction defaults to 0.5)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on test pairs");
    add_config_options(eval_cmd, opts);
    eval_cmd->add_option("--out", opts.out_dir, "output directory for the match report")->required();
    eval_cmd->add_option("--data", opts.data_dir, "dataset directory");
    eval_cmd->add_option("--checkpoint", opts.checkpoint, "model checkpoint to evaluate");
    eval_cmd->add_option("--pairs", opts.pairs, "number of random test pairs")
        ->each([&](const std::string&) { opts.pairs_given = true; });
    eval_cmd->add_option("--noise", opts.noise,
                         "evaluation noise 'STDDEV[:FRACTION]' (fraction defaults to 1)");
    eval_cmd->add_option("--mask-head", opts.mask_heads,
                         "mask head LAYER:HEAD ('all:H' for every layer); repeatable")
        ->take_all();

    auto* ablate_heads_cmd =
        app.add_subcommand("ablate-heads", "re-evaluate with each head masked, one at a time");
    add_config_options(ablate_heads_cmd, opts);
    ablate_heads_cmd->add_option("--out", opts.out_dir, "output directory")->required();
    ablate_heads_cmd->add_option("--data", opts.data_dir, "dataset directory");
    ablate_heads_cmd->add_option("--checkpoint", opts.checkpoint, "model checkpoint");
    ablate_heads_cmd->add_option("--pairs", opts.pairs, "number of random test pairs")
        ->each([&](const std::string&) { opts.pairs_given = true; });

    auto* ablate_layers_cmd = app.add_subcommand(
        "ablate-layers", "train one short run per layer position with Gaussian heads only there");
    add_config_options(ablate_layers_cmd, opts);
    ablate_layers_cmd->add_option("--out", opts.out_dir, "output directory")->required();
    ablate_layers_cmd->add_option("--data", opts.data_dir, "dataset directory");
    ablate_layers_cmd->add_option("--pairs", opts.pairs, "number of random test pairs")
        ->each([&](const std::string&) { opts.pairs_given = true; });

    auto* export_cmd =
        app.add_subcommand("export-attn", "export one attention matrix and one of its rows");
    add_config_options(export_cmd, opts);
    export_cmd->add_option("--out", opts.out_dir, "output directory")->required();
    export_cmd->add_option("--data", opts.data_dir, "dataset directory");
    export_cmd->add_option("--checkpoint", opts.checkpoint, "model checkpoint");
    int pair_src = 0, pair_dst = 1, layer = 0, head = 0, point = 0;
    export_cmd->add_option("--src", pair_src, "dataset index of shape X");
    export_cmd->add_option("--dst", pair_dst, "dataset index of shape Y");
    export_cmd->add_option("--layer", layer, "attention layer index");
    export_cmd->add_option("--head", head, "head index");
    export_cmd->add_option("--point", point, "row index for the per-point field");

    auto* inspect_cmd =
        app.add_subcommand("inspect-config", "print the resolved config and parameter count");
    add_config_options(inspect_cmd, opts);
    inspect_cmd->add_option("--out", opts.out_dir, "optional directory for the run manifest");
    bool list_presets = false;
    inspect_cmd->add_flag("--list", list_presets, "list available presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            DatasetHandle dataset;
            check(gam_dataset_generate(gen_count, gen_points, gen_seed, &dataset.ptr));
            check(gam_dataset_write(dataset.ptr, opts.out_dir.c_str()));
            std::printf("wrote %d shapes of %d points to %s\n", gam_dataset_count(dataset.ptr),
                        gam_dataset_points(dataset.ptr), opts.out_dir.c_str());
            return 0;
        }
        if (inspect_cmd->parsed()) {
            if (list_presets) {
                for (const char* name : {"0gh", "4gh", "4gh.lis", "4gh.lis.noise", "0gh-mini",
                                         "4gh-mini", "4gh-mini.lis", "4gh-mini.noise"})
                    std::printf("%s\n", name);
                return 0;
            }
            ConfigHandle config = build_config(opts, false);
            char* text = nullptr;
            check(gam_config_describe(config.ptr, &text));
            std::fputs(take_string(text).c_str(), stdout);
            if (!opts.out_dir.empty()) write_manifest(opts.out_dir, config.ptr, argc, argv);
            return 0;
        }
        if (train_cmd->parsed()) {
            ConfigHandle config = build_config(opts, true);
            write_manifest(opts.out_dir, config.ptr, argc, argv);
            DatasetHandle dataset = load_data(config.ptr);
            auto print_epoch = [](int epoch, double loss, void*) {
                std::printf("epoch %d  loss %.6f\n", epoch, loss);
                std::fflush(stdout);
            };
            ModelHandle model;
            check(gam_train(config.ptr, dataset.ptr, opts.out_dir.c_str(), print_epoch, nullptr,
                            &model.ptr));
            std::printf("checkpoints and loss curve written to %s\n", opts.out_dir.c_str());
            return 0;
        }
        if (eval_cmd->parsed()) {
            ConfigHandle config = build_config(opts, false);
            write_manifest(opts.out_dir, config.ptr, argc, argv);
            DatasetHandle dataset = load_data(config.ptr);
            ModelHandle model = load_model(config.ptr);
            const std::string report = (fs::path(opts.out_dir) / "match_report.csv").string();
            double mean_error = 0.0;
            const std::string mask = mask_spec(opts.mask_heads);
            check(gam_evaluate(model.ptr, dataset.ptr, std::stoi(config_value(config.ptr, "eval.pairs")),
                               std::stod(config_value(config.ptr, "eval.noise_stddev")),
                               std::stod(config_value(config.ptr, "eval.noise_fraction")),
                               config_seed(config.ptr), mask.empty() ? nullptr : mask.c_str(),
                               report.c_str(), &mean_error));
            std::printf("pairs: %s\nmean geodesic error: %.6f\nreport: %s\n",
                        config_value(config.ptr, "eval.pairs").c_str(), mean_error, report.c_str());
            return 0;
        }
        if (ablate_heads_cmd->parsed()) {
            ConfigHandle config = build_config(opts, false);
            write_manifest(opts.out_dir, config.ptr, argc, argv);
            DatasetHandle dataset = load_data(config.ptr);
            ModelHandle model = load_model(config.ptr);
            const std::string report = (fs::path(opts.out_dir) / "head_ablation.csv").string();
            check(gam_ablate_heads(model.ptr, dataset.ptr,
                                   std::stoi(config_value(config.ptr, "eval.pairs")),
                                   config_seed(config.ptr), report.c_str()));
            std::printf("head ablation written to %s\n", report.c_str());
            return 0;
        }
        if (ablate_layers_cmd->parsed()) {
            ConfigHandle config = build_config(opts, true);
            write_manifest(opts.out_dir, config.ptr, argc, argv);
            DatasetHandle dataset = load_data(config.ptr);
            const std::string report = (fs::path(opts.out_dir) / "layer_ablation.csv").string();
            check(gam_ablate_layers(config.ptr, dataset.ptr, opts.out_dir.c_str(),
                                    std::stoi(config_value(config.ptr, "eval.pairs")),
                                    config_seed(config.ptr), report.c_str()));
            std::printf("layer ablation written to %s\n", report.c_str());
            return 0;
        }
        if (export_cmd->parsed()) {
            ConfigHandle config = build_config(opts, false);
            write_manifest(opts.out_dir, config.ptr, argc, argv);
            DatasetHandle dataset = load_data(config.ptr);
            ModelHandle model = load_model(config.ptr);
            const std::string matrix_csv = (fs::path(opts.out_dir) / "attention.csv").string();
            const std::string row_csv = (fs::path(opts.out_dir) / "attention_row.csv").string();
            check(gam_export_attention(model.ptr, dataset.ptr, pair_src, pair_dst, layer, head,
                                       point, matrix_csv.c_str(), row_csv.c_str()));
            std::printf("attention matrix: %s\nper-point row: %s\n", matrix_csv.c_str(),
                        row_csv.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
