#pragma once

#include "vdn/decode.hpp"
#include "vdn/metrics.hpp"
#include "vdn/model.hpp"
#include "vdn/synth.hpp"
#include "vdn/train.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace vdn {

struct DataConfig {
    std::size_t images = 1000;
    std::uint64_t seed = 7;
    SampleRanges ranges;
    SplitRatios split;
    double hard_quota = 0.4;
};

struct PipelineConfig {
    double template_radius = 100.0;  // canonical template frame: [0, 2R]^2
};

/// Full run configuration. Every section is optional in JSON; unknown keys
/// anywhere are rejected.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DecodeConfig decode;
    MetricConfig metrics;
    DataConfig data;
    PipelineConfig pipeline;

    void validate() const;
    /// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
    std::string hash() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Throws std::invalid_argument for bad content, DataError for unreadable files.
RunConfig read_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace vdn
