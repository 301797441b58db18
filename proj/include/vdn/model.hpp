#pragma once

#include "vdn/tensor.hpp"
#include "vdn/var.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace vdn {

struct ModelConfig {
    std::size_t input_width = 128;
    std::size_t input_height = 128;
    // One 3x3 stride-2 conv stage per entry.
    std::vector<std::size_t> encoder_channels{8, 16, 32, 32, 32};
    // One 4x4 stride-2 deconvolution per entry.
    std::vector<std::size_t> deconv_channels{32, 32, 32};
    // Adds a 3x3 stride-1 residual block after each encoder stage.
    bool residual = false;

    /// Output-map resolution relative to the input: 2^|deconv| / 2^|encoder|.
    double lambda() const;
    std::size_t map_width() const;
    std::size_t map_height() const;

    /// Throws std::invalid_argument when extents or channel lists are inconsistent.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ModelOutput {
    Var heatmap;    // N x 1 x h* x w*, no output activation
    Var scalarmap;  // N x 2 x h* x w*, tanh-bounded
};

/// Encoder of stride-2 conv stages, three x2 deconvolutions, and two 1x1 heads.
///
/// Every conv/deconv is followed by a learned per-channel scale+shift and a
/// ReLU. Parameters are kept in a fixed, named order so checkpoints and
/// optimizer state line up across runs.
class VdnModel {
public:
    explicit VdnModel(ModelConfig config, std::uint64_t seed = 0);

    const ModelConfig& config() const { return config_; }

    ModelOutput forward(const Tensor& patches) const;
    ModelOutput forward(const Var& patches) const;

    std::vector<Var>& parameters() { return params_; }
    const std::vector<Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    const Var& parameter(const std::string& name) const;
    std::size_t count_params() const;
    void zero_grad();

private:
    Var& add_param(std::string name, Tensor value);

    ModelConfig config_;
    std::vector<std::string> names_;
    std::vector<Var> params_;
};

inline constexpr const char* kCheckpointVersion = "vdn-ckpt-1";

/// Atomic write (temp file + rename). A non-empty hash is stored as "config_hash".
void save(const VdnModel& model, const std::filesystem::path& path, const std::string& config_hash = {});
/// Reconstructs the model from the config embedded in the checkpoint.
VdnModel load(const std::filesystem::path& path);
/// Loads parameters into an existing model. Every check runs before any value
/// is assigned, so a failed load leaves the model untouched.
void load_into(VdnModel& model, const std::filesystem::path& path);

nlohmann::json checkpoint_json(const VdnModel& model, const std::string& config_hash = {});
VdnModel model_from_json(const nlohmann::json& j);

}  // namespace vdn
