#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gam/checkpoint.hpp"
#include "gam/config.hpp"
#include "gam/dataset.hpp"
#include "gam/encoder.hpp"

namespace gam {

struct EpochRecord {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double l_xy = 0.0;
    double l_yx = 0.0;
    double l_sep = 0.0;
    std::vector<double> sigmas;
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 1-based, epoch with the smallest mean loss
    double best_loss = 0.0;

    std::vector<double> losses() const;
};

struct TrainResult {
    Model model;       // after the last epoch
    Model best_model;  // snapshot at best_epoch
    TrainLog log;
};

// Epochs of shuffle -> couple -> augment -> forward -> loss -> backward ->
// Adam. When out_dir is nonempty, writes checkpoint_last / checkpoint_best
// plus loss_curve.csv there. Aborts with NumericError on a non-finite loss
// after writing a diagnostic snapshot.
TrainResult train(const ExperimentConfig& config, const ShapeDataset& dataset,
                  const std::string& out_dir = "",
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

std::vector<double> moving_average(const std::vector<double>& values, int window);

// CSV with raw and smoothed loss per epoch plus the sigma snapshot.
void emit_loss_curve(const TrainLog& log, const std::string& path, int window = 10);

}  // namespace gam
