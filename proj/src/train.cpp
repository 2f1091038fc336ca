#include "gam/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "gam/adam.hpp"
#include "gam/errors.hpp"
#include "gam/losses.hpp"

namespace fs = std::filesystem;

namespace gam {

std::vector<double> TrainLog::losses() const {
    std::vector<double> out;
    out.reserve(epochs.size());
    for (const EpochRecord& r : epochs) out.push_back(r.loss);
    return out;
}

namespace {

void clip_gradients(const std::vector<Tensor>& params, double max_norm) {
    double sq = 0.0;
    for (const Tensor& p : params) {
        if (!p.has_grad()) continue;
        for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double factor = max_norm / norm;
    for (const Tensor& p : params) {
        if (!p.has_grad()) continue;
        Tensor t = p;
        auto& node = *t.node();
        for (double& g : node.grad) g *= factor;
    }
}

}  // namespace

TrainResult train(const ExperimentConfig& config, const ShapeDataset& dataset,
                  const std::string& out_dir,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    config.validate();
    if (dataset.count() < config.batch_shapes)
        throw std::invalid_argument("train: dataset smaller than one batch");

    if (!out_dir.empty()) fs::create_directories(out_dir);

    Model model(config.model, config.seed);
    std::vector<Tensor> params = model.parameters();
    Adam optimizer(config.adam, params);

    std::vector<PointCloud> normalized;
    normalized.reserve(dataset.count());
    for (const PointCloud& cloud : dataset.clouds) normalized.push_back(normalize(cloud));
    const Correspondence identity = Correspondence::identity(dataset.n);

    TrainResult result;
    result.log.best_loss = std::numeric_limits<double>::infinity();

    std::vector<int> order(dataset.count());
    for (int i = 0; i < dataset.count(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        std::mt19937_64 epoch_rng(mix_seed(config.seed, 0x45504f43ULL + epoch));
        std::shuffle(order.begin(), order.end(), epoch_rng);

        double epoch_loss = 0.0, epoch_xy = 0.0, epoch_yx = 0.0, epoch_sep = 0.0;
        int couples_seen = 0;
        const int batches = dataset.count() / config.batch_shapes;
        for (int batch = 0; batch < batches; ++batch) {
            std::mt19937_64 batch_rng(
                mix_seed(config.seed, (static_cast<std::uint64_t>(epoch) << 20) + batch));
            optimizer.zero_grad();
            const int couples = config.batch_shapes / 2;
            for (int c = 0; c < couples; ++c) {
                const int a = order[batch * config.batch_shapes + 2 * c];
                const int b = order[batch * config.batch_shapes + 2 * c + 1];
                Couple couple =
                    augment_pair(normalized[a], normalized[b], identity, config.augment, batch_rng);
                ForwardResult out = model.forward(couple.x, couple.y);
                auto [loss, breakdown] = total_loss(out, couple.x, couple.y, couple.corr, config.loss);
                if (!std::isfinite(breakdown.total)) {
                    if (!out_dir.empty())
                        save_checkpoint(model, config, (fs::path(out_dir) / "checkpoint_nan.gam").string());
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch));
                }
                // Mean over the couples of the batch.
                scale(loss, 1.0 / couples).backward();
                epoch_loss += breakdown.total;
                epoch_xy += breakdown.l_xy;
                epoch_yx += breakdown.l_yx;
                epoch_sep += breakdown.l_sep;
                ++couples_seen;
            }
            if (config.grad_clip > 0.0) clip_gradients(params, config.grad_clip);
            optimizer.step();
        }

        EpochRecord record;
        record.epoch = epoch;
        record.loss = epoch_loss / couples_seen;
        record.l_xy = epoch_xy / couples_seen;
        record.l_yx = epoch_yx / couples_seen;
        record.l_sep = epoch_sep / couples_seen;
        record.sigmas = model.sigma_values();
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        result.log.epochs.push_back(record);
        if (record.loss < result.log.best_loss) {
            result.log.best_loss = record.loss;
            result.log.best_epoch = epoch;
            result.best_model = model.clone();
            if (!out_dir.empty())
                save_checkpoint(model, config, (fs::path(out_dir) / "checkpoint_best.gam").string());
        }
        if (!out_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
            save_checkpoint(model, config,
                            (fs::path(out_dir) / ("checkpoint_epoch" + std::to_string(epoch) + ".gam")).string());
        if (on_epoch) on_epoch(record);
    }

    result.model = std::move(model);
    if (!out_dir.empty()) {
        save_checkpoint(result.model, config, (fs::path(out_dir) / "checkpoint_last.gam").string());
        emit_loss_curve(result.log, (fs::path(out_dir) / "loss_curve.csv").string());
    }
    return result;
}

std::vector<double> moving_average(const std::vector<double>& values, int window) {
    if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
    std::vector<double> out(values.size());
    double running = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        running += values[i];
        if (i >= static_cast<std::size_t>(window)) running -= values[i - window];
        const std::size_t denom = std::min<std::size_t>(i + 1, window);
        out[i] = running / static_cast<double>(denom);
    }
    return out;
}

void emit_loss_curve(const TrainLog& log, const std::string& path, int window) {
    if (log.epochs.empty()) throw std::invalid_argument("emit_loss_curve: empty log");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);
    out << "epoch,loss,loss_smoothed,l_xy,l_yx,l_sep";
    for (std::size_t k = 0; k < log.epochs.front().sigmas.size(); ++k) out << ",sigma" << k;
    out << "\n";
    const std::vector<double> smoothed = moving_average(log.losses(), window);
    for (std::size_t i = 0; i < log.epochs.size(); ++i) {
        const EpochRecord& r = log.epochs[i];
        out << r.epoch << ',' << r.loss << ',' << smoothed[i] << ',' << r.l_xy << ',' << r.l_yx
            << ',' << r.l_sep;
        for (double s : r.sigmas) out << ',' << s;
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace gam
