#pragma once

#include "vdn/model.hpp"
#include "vdn/optim.hpp"
#include "vdn/targets.hpp"
#include "vdn/var.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vdn {

struct TrainSample {
    Image patch;
    std::vector<PointerAnnotation> pointers;  // patch pixels
};

struct TrainConfig {
    int epochs = 30;
    std::size_t batch_size = 8;
    double base_lr = 1e-3;
    // Epoch index (0-based) from which the rate applies.
    std::map<int, double> milestones{{20, 1e-4}, {27, 1e-5}};
    double mu = 1.0;     // weight of the direction loss at the final epoch
    double sigma = 3.0;  // target Gaussian std, map pixels
    std::uint64_t seed = 1;
    bool augment = true;
    AugmentConfig augmentation;
    AdamConfig adam;
    int checkpoint_interval = 0;  // epochs; 0 writes only the final checkpoint
    std::filesystem::path checkpoint_path;
    std::string config_hash;  // copied into every report line

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Piecewise-constant learning rate at a 0-based epoch.
double lr_at(const TrainConfig& cfg, int epoch);

struct LossTerms {
    Var total;
    double heatmap = 0.0;
    double scalarmap = 0.0;
    double weight = 0.0;  // mu * epoch / epochs applied to the scalarmap term
};

/// l = l_H + mu (epoch / epochs) l_V with 1-based `epoch`; both terms are
/// mean squared errors over their full maps.
LossTerms scheduled_loss(const Var& heatmap, const Tensor& heatmap_target, const Var& scalarmap,
                         const Tensor& scalarmap_target, int epoch, int epochs, double mu);

struct EpochReport {
    int epoch = 0;  // 1-based
    double lr = 0.0;
    double loss = 0.0;
    double loss_heatmap = 0.0;
    double loss_scalarmap = 0.0;
    double scalarmap_weight = 0.0;
    std::size_t steps = 0;
    std::size_t samples = 0;
    std::string config_hash;
};

void to_json(nlohmann::json& j, const EpochReport& r);

/// Deterministic minibatch Adam training: epoch-seeded shuffles, per-sample
/// augmentation seeds, partial last batches dropped. A non-finite loss or
/// gradient throws NumericError before the step, leaving the last good
/// checkpoint on disk.
std::vector<EpochReport> train(VdnModel& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                               const std::function<void(const EpochReport&)>& on_epoch = {});

/// Builds targets for a batch of samples (heatmap N x 1 x h x w, scalarmap N x 2 x h x w).
std::pair<Tensor, Tensor> batch_targets(std::span<const std::vector<PointerAnnotation>> pointers,
                                        const ModelConfig& model, double sigma);

}  // namespace vdn
