// Exercises the shared-library C surface end to end: configs, dataset
// generation and IO, a short training run, checkpoint IO, evaluation, head
// ablation and attention export, plus the error paths.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gam.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gam_capi_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

gam_config* mini_preset() {
    gam_config* config = nullptr;
    REQUIRE(gam_config_preset("4gh-mini", &config) == GAM_OK);
    REQUIRE(gam_config_set(config, "model.d", "16") == GAM_OK);
    REQUIRE(gam_config_set(config, "model.layers", "2") == GAM_OK);
    REQUIRE(gam_config_set(config, "model.heads", "4") == GAM_OK);
    REQUIRE(gam_config_set(config, "model.ff_hidden", "32") == GAM_OK);
    REQUIRE(gam_config_set(config, "model.head_layout", "dd01") == GAM_OK);
    REQUIRE(gam_config_set(config, "model.sigmas", "0.1, 0.5") == GAM_OK);
    REQUIRE(gam_config_set(config, "train.epochs", "3") == GAM_OK);
    REQUIRE(gam_config_set(config, "train.batch_shapes", "8") == GAM_OK);
    REQUIRE(gam_config_set(config, "eval.pairs", "3") == GAM_OK);
    return config;
}

}  // namespace

TEST_CASE("version and status names") {
    CHECK(gam_version() != nullptr);
    CHECK(std::string(gam_status_name(GAM_OK)) == "ok");
    CHECK(std::string(gam_status_name(GAM_ERROR_PARSE)) == "parse error");
}

TEST_CASE("config lifecycle, presets, sets and parameter counts") {
    gam_config* config = nullptr;
    REQUIRE(gam_config_preset("4gh", &config) == GAM_OK);

    char* value = nullptr;
    REQUIRE(gam_config_get(config, "model.d", &value) == GAM_OK);
    CHECK(std::string(value) == "512");
    gam_string_free(value);

    long long with_gaussian = 0;
    REQUIRE(gam_config_parameter_count(config, &with_gaussian) == GAM_OK);
    gam_config* baseline = nullptr;
    REQUIRE(gam_config_preset("0gh", &baseline) == GAM_OK);
    long long without_gaussian = 0;
    REQUIRE(gam_config_parameter_count(baseline, &without_gaussian) == GAM_OK);
    CHECK(without_gaussian - with_gaussian == 6LL * 2 * 512 * 256 + 6LL * 4 * 2 * 64);

    char* text = nullptr;
    REQUIRE(gam_config_describe(config, &text) == GAM_OK);
    CHECK(std::string(text).find("dddd0123") != std::string::npos);
    gam_string_free(text);

    CHECK(gam_config_set(config, "model.bogus", "1") == GAM_ERROR_PARSE);
    CHECK(std::string(gam_last_error()).find("bogus") != std::string::npos);
    CHECK(gam_config_preset("not-a-variant", &baseline) == GAM_ERROR_INVALID_ARGUMENT);

    gam_config_free(config);
    gam_config_free(baseline);
}

TEST_CASE("config file round trip") {
    TempDir tmp;
    gam_config* config = mini_preset();
    const std::string path = tmp.file("config.txt");
    REQUIRE(gam_config_write(config, path.c_str()) == GAM_OK);
    gam_config* loaded = nullptr;
    REQUIRE(gam_config_read(path.c_str(), &loaded) == GAM_OK);
    char* value = nullptr;
    REQUIRE(gam_config_get(loaded, "model.head_layout", &value) == GAM_OK);
    CHECK(std::string(value) == "dd01");
    gam_string_free(value);
    gam_config_free(config);
    gam_config_free(loaded);

    CHECK(gam_config_read(tmp.file("missing.txt").c_str(), &loaded) == GAM_ERROR_IO);
}

TEST_CASE("dataset generate, write, read") {
    TempDir tmp;
    gam_dataset* dataset = nullptr;
    REQUIRE(gam_dataset_generate(6, 24, 42, &dataset) == GAM_OK);
    CHECK(gam_dataset_count(dataset) == 6);
    CHECK(gam_dataset_points(dataset) == 24);

    const std::string dir = tmp.file("data");
    REQUIRE(gam_dataset_write(dataset, dir.c_str()) == GAM_OK);
    gam_dataset* loaded = nullptr;
    REQUIRE(gam_dataset_read(dir.c_str(), &loaded) == GAM_OK);
    CHECK(gam_dataset_count(loaded) == 6);
    gam_dataset_free(dataset);
    gam_dataset_free(loaded);

    CHECK(gam_dataset_generate(1, 24, 0, &dataset) == GAM_ERROR_INVALID_ARGUMENT);
    CHECK(gam_dataset_read(tmp.file("nope").c_str(), &loaded) == GAM_ERROR_IO);
}

TEST_CASE("train, checkpoint, evaluate, ablate, export through the C surface") {
    TempDir tmp;
    gam_config* config = mini_preset();
    gam_dataset* dataset = nullptr;
    REQUIRE(gam_dataset_generate(8, 20, 7, &dataset) == GAM_OK);

    int epochs_seen = 0;
    auto count_epochs = [](int, double, void* user_data) { ++*static_cast<int*>(user_data); };
    gam_model* model = nullptr;
    REQUIRE(gam_train(config, dataset, tmp.file("run").c_str(), count_epochs, &epochs_seen,
                      &model) == GAM_OK);
    CHECK(epochs_seen == 3);
    CHECK(fs::exists(tmp.path / "run" / "checkpoint_last.gam"));
    CHECK(fs::exists(tmp.path / "run" / "loss_curve.csv"));

    const std::string ckpt = tmp.file("model.gam");
    REQUIRE(gam_model_write(model, ckpt.c_str()) == GAM_OK);
    gam_model* loaded = nullptr;
    REQUIRE(gam_model_read(ckpt.c_str(), &loaded) == GAM_OK);

    gam_config* stored = nullptr;
    REQUIRE(gam_model_config(loaded, &stored) == GAM_OK);
    char* variant = nullptr;
    REQUIRE(gam_config_get(stored, "variant", &variant) == GAM_OK);
    CHECK(std::string(variant) == "4gh-mini");
    gam_string_free(variant);
    gam_config_free(stored);

    double clean = 0.0, same = 0.0;
    REQUIRE(gam_evaluate(model, dataset, 3, 0.0, 1.0, 5, nullptr, tmp.file("report.csv").c_str(),
                         &clean) == GAM_OK);
    REQUIRE(gam_evaluate(loaded, dataset, 3, 0.0, 1.0, 5, nullptr, nullptr, &same) == GAM_OK);
    CHECK(clean == same);
    CHECK(fs::exists(tmp.path / "report.csv"));

    double masked = 0.0;
    REQUIRE(gam_evaluate(model, dataset, 3, 0.0, 1.0, 5, "all:3", nullptr, &masked) == GAM_OK);
    CHECK(masked != clean);
    CHECK(gam_evaluate(model, dataset, 3, 0.0, 1.0, 5, "junk", nullptr, &masked) ==
          GAM_ERROR_INVALID_ARGUMENT);

    REQUIRE(gam_ablate_heads(model, dataset, 2, 5, tmp.file("heads.csv").c_str()) == GAM_OK);
    CHECK(fs::exists(tmp.path / "heads.csv"));

    REQUIRE(gam_export_attention(model, dataset, 0, 1, 0, 3, 2, tmp.file("attn.csv").c_str(),
                                 tmp.file("attn_row.csv").c_str()) == GAM_OK);
    CHECK(fs::exists(tmp.path / "attn.csv"));
    CHECK(gam_export_attention(model, dataset, 0, 99, 0, 0, 0, tmp.file("a.csv").c_str(),
                               tmp.file("b.csv").c_str()) == GAM_ERROR_INVALID_ARGUMENT);

    gam_model_free(model);
    gam_model_free(loaded);
    gam_dataset_free(dataset);
    gam_config_free(config);
}

TEST_CASE("layer ablation through the C surface") {
    TempDir tmp;
    gam_config* config = mini_preset();
    REQUIRE(gam_config_set(config, "train.epochs", "1") == GAM_OK);
    gam_dataset* dataset = nullptr;
    REQUIRE(gam_dataset_generate(8, 16, 3, &dataset) == GAM_OK);
    REQUIRE(gam_ablate_layers(config, dataset, tmp.file("layers").c_str(), 2, 5,
                              tmp.file("layers.csv").c_str()) == GAM_OK);
    CHECK(fs::exists(tmp.path / "layers.csv"));
    gam_dataset_free(dataset);
    gam_config_free(config);
}

TEST_CASE("null arguments are rejected not crashed") {
    CHECK(gam_config_preset(nullptr, nullptr) == GAM_ERROR_INVALID_ARGUMENT);
    CHECK(gam_train(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) ==
          GAM_ERROR_INVALID_ARGUMENT);
    CHECK(gam_evaluate(nullptr, nullptr, 1, 0, 1, 0, nullptr, nullptr, nullptr) ==
          GAM_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(gam_last_error()).size() > 0);
}
