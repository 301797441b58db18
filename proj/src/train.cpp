#include "vdn/train.hpp"

#include "vdn/error.hpp"
#include "vdn/ops.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace vdn {

using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs <= 0) throw std::invalid_argument("train.epochs must be positive");
    if (batch_size == 0) throw std::invalid_argument("train.batch_size must be positive");
    if (!(base_lr > 0.0)) throw std::invalid_argument("train.base_lr must be positive");
    for (const auto& [epoch, lr] : milestones)
        if (epoch < 0 || epoch >= epochs || !(lr > 0.0))
            throw std::invalid_argument("train.milestones need 0 <= epoch < epochs and lr > 0");
    if (!(mu >= 0.0)) throw std::invalid_argument("train.mu must be non-negative");
    if (!(sigma > 0.0)) throw std::invalid_argument("train.sigma must be positive");
    if (!(augmentation.scale_min > 0.0 && augmentation.scale_max >= augmentation.scale_min))
        throw std::invalid_argument("train.augment scale range invalid");
    if (checkpoint_interval < 0) throw std::invalid_argument("train.checkpoint_interval must be >= 0");
}

void to_json(json& j, const TrainConfig& c) {
    json ms = json::object();
    for (const auto& [epoch, lr] : c.milestones) ms[std::to_string(epoch)] = lr;
    j = json{{"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"base_lr", c.base_lr},
             {"milestones", std::move(ms)},
             {"mu", c.mu},
             {"sigma", c.sigma},
             {"seed", c.seed},
             {"augment", c.augment},
             {"augment_scale", {c.augmentation.scale_min, c.augmentation.scale_max}},
             {"augment_rotation_deg", c.augmentation.max_rotation_deg},
             {"checkpoint_interval", c.checkpoint_interval}};
}

void from_json(const json& j, TrainConfig& c) {
    static const char* kKeys[] = {"epochs", "batch_size",           "base_lr",           "milestones",
                                  "mu",     "sigma",                "seed",              "augment",
                                  "augment_scale", "augment_rotation_deg", "checkpoint_interval"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) == std::end(kKeys))
            throw std::invalid_argument("unknown key train." + key);
    TrainConfig out;
    out.epochs = j.value("epochs", out.epochs);
    out.batch_size = j.value("batch_size", out.batch_size);
    out.base_lr = j.value("base_lr", out.base_lr);
    if (j.contains("milestones")) {
        out.milestones.clear();
        for (const auto& [k, v] : j.at("milestones").items()) {
            std::size_t used = 0;
            int epoch = 0;
            try {
                epoch = std::stoi(k, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != k.size()) throw std::invalid_argument("train.milestones keys must be epoch numbers");
            out.milestones[epoch] = v.get<double>();
        }
    }
    out.mu = j.value("mu", out.mu);
    out.sigma = j.value("sigma", out.sigma);
    out.seed = j.value("seed", out.seed);
    out.augment = j.value("augment", out.augment);
    if (j.contains("augment_scale")) {
        const auto s = j.at("augment_scale").get<std::vector<double>>();
        if (s.size() != 2) throw std::invalid_argument("train.augment_scale must be [min, max]");
        out.augmentation.scale_min = s[0];
        out.augmentation.scale_max = s[1];
    }
    out.augmentation.max_rotation_deg = j.value("augment_rotation_deg", out.augmentation.max_rotation_deg);
    out.checkpoint_interval = j.value("checkpoint_interval", out.checkpoint_interval);
    out.validate();
    c = std::move(out);
}

double lr_at(const TrainConfig& cfg, int epoch) {
    double lr = cfg.base_lr;
    for (const auto& [start, value] : cfg.milestones)
        if (epoch >= start) lr = value;
    return lr;
}

LossTerms scheduled_loss(const Var& heatmap, const Tensor& heatmap_target, const Var& scalarmap,
                         const Tensor& scalarmap_target, int epoch, int epochs, double mu) {
    if (epochs <= 0 || epoch < 0 || epoch > epochs) throw std::invalid_argument("scheduled_loss: epoch out of range");
    const Var lh = mse(heatmap, Var(heatmap_target));
    const Var lv = mse(scalarmap, Var(scalarmap_target));
    LossTerms out;
    out.weight = mu * static_cast<double>(epoch) / static_cast<double>(epochs);
    out.total = add(lh, scale(lv, out.weight));
    out.heatmap = lh.item();
    out.scalarmap = lv.item();
    return out;
}

void to_json(json& j, const EpochReport& r) {
    j = json{{"epoch", r.epoch},
             {"lr", r.lr},
             {"loss", r.loss},
             {"loss_heatmap", r.loss_heatmap},
             {"loss_scalarmap", r.loss_scalarmap},
             {"scalarmap_weight", r.scalarmap_weight},
             {"steps", r.steps},
             {"samples", r.samples},
             {"config_hash", r.config_hash}};
}

std::pair<Tensor, Tensor> batch_targets(std::span<const std::vector<PointerAnnotation>> pointers,
                                        const ModelConfig& model, double sigma) {
    const std::size_t n = pointers.size(), h = model.map_height(), w = model.map_width();
    Tensor H({n, 1, h, w}), V({n, 2, h, w});
    const TargetConfig tc{w, h, model.lambda(), sigma};
    for (std::size_t i = 0; i < n; ++i) {
        const TargetMaps t = encode_targets(pointers[i], tc);
        std::copy(t.heatmap.values().begin(), t.heatmap.values().end(), H.data() + i * h * w);
        std::copy(t.scalarmap.values().begin(), t.scalarmap.values().end(), V.data() + i * 2 * h * w);
    }
    return {std::move(H), std::move(V)};
}

std::vector<EpochReport> train(VdnModel& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                               const std::function<void(const EpochReport&)>& on_epoch) {
    cfg.validate();
    if (data.empty()) throw DataError("training set is empty");
    const ModelConfig& mc = model.config();
    for (const TrainSample& s : data)
        if (s.patch.width != static_cast<int>(mc.input_width) || s.patch.height != static_cast<int>(mc.input_height))
            throw DataError("training patch size does not match the model input size");

    const std::size_t n = data.size();
    const std::size_t batch = std::min(cfg.batch_size, n);
    const std::size_t steps_per_epoch = n / batch;
    const auto seed_lo = static_cast<std::uint32_t>(cfg.seed), seed_hi = static_cast<std::uint32_t>(cfg.seed >> 32);

    AdamState adam = make_adam_state(model.parameters());
    std::vector<std::size_t> order(n);
    std::vector<EpochReport> reports;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::seed_seq shuffle_seed{seed_lo, seed_hi, static_cast<std::uint32_t>(epoch), 0u};
        std::mt19937_64 shuffle_rng(shuffle_seed);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        EpochReport rep;
        rep.epoch = epoch + 1;
        rep.lr = lr_at(cfg, epoch);
        rep.config_hash = cfg.config_hash;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            std::vector<Image> patches;
            std::vector<std::vector<PointerAnnotation>> labels;
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t idx = order[step * batch + b];
                const TrainSample& s = data[idx];
                if (cfg.augment) {
                    std::seed_seq ss{seed_lo, seed_hi, static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(idx),
                                     1u};
                    std::mt19937_64 rng(ss);
                    AugmentedPatch a = augment(s.patch, s.pointers, rng, cfg.augmentation);
                    patches.push_back(std::move(a.patch));
                    labels.push_back(std::move(a.annotations));
                } else {
                    patches.push_back(s.patch);
                    labels.push_back(s.pointers);
                }
            }
            const auto [H, V] = batch_targets(labels, mc, cfg.sigma);
            model.zero_grad();
            const ModelOutput out = model.forward(to_tensor(patches));
            const LossTerms loss = scheduled_loss(out.heatmap, H, out.scalarmap, V, epoch + 1, cfg.epochs, cfg.mu);
            const double l = loss.total.item();
            if (!std::isfinite(l))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                                   std::to_string(step + 1));
            loss.total.backward();
            adam_step(model.parameters(), adam, rep.lr, cfg.adam);

            rep.loss += l;
            rep.loss_heatmap += loss.heatmap;
            rep.loss_scalarmap += loss.scalarmap;
            rep.scalarmap_weight = loss.weight;
            ++rep.steps;
            rep.samples += batch;
        }
        const auto steps = static_cast<double>(rep.steps);
        rep.loss /= steps;
        rep.loss_heatmap /= steps;
        rep.loss_scalarmap /= steps;

        const bool last = epoch + 1 == cfg.epochs;
        if (!cfg.checkpoint_path.empty() &&
            (last || (cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0)))
            save(model, cfg.checkpoint_path, cfg.config_hash);
        reports.push_back(rep);
        if (on_epoch) on_epoch(rep);
    }
    return reports;
}

}  // namespace vdn
