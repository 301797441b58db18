#pragma once

#include "vdn/annotations.hpp"
#include "vdn/decode.hpp"
#include "vdn/image.hpp"
#include "vdn/metrics.hpp"
#include "vdn/model.hpp"
#include "vdn/synth.hpp"
#include "vdn/targets.hpp"
#include "vdn/train.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vdn {

/// One meter cropped to a square network patch, with labels in patch pixels.
struct MeterPatch {
    Image patch;
    Affine patch_to_image;
    BBox bbox;                                // meter box, image pixels
    std::vector<PointerAnnotation> pointers;  // patch pixels
    std::vector<PointerLabel> labels;         // same pointers, image pixels
    std::optional<MeterTemplate> scale;       // image pixels
    bool hard = false;
};

/// Crops every meter of an image. Pointers whose tip or tail is not labeled
/// (visibility 0) are dropped.
std::vector<MeterPatch> meter_patches(const Image& image, const ImageRecord& record, int patch_size);

/// Renders `count` random single-meter images (seeded) and crops them.
std::vector<MeterPatch> render_patches(std::size_t count, std::uint64_t seed, const SampleRanges& ranges,
                                       int patch_size);

/// Dataset directory written by render_dataset:
///   images/dial_NNNNN.png, annotations.json, templates/dial_NNNNN.json, splits.json
struct RenderOptions {
    std::size_t count = 1000;
    std::uint64_t seed = 7;
    SampleRanges ranges;
    SplitRatios split;
    double hard_quota = 0.0;
    double template_radius = 100.0;
    std::string config_hash;
};

/// Same draws as render_patches(count, seed, ranges): image i of the directory
/// is patch i there. Templates are canonical (see canonical_template).
AnnotationSet render_dataset(const std::filesystem::path& dir, const RenderOptions& opts);

/// splits.json maps "train"/"val"/"test" to image file names.
void write_splits(const DatasetSplit& split, const AnnotationSet& set, const std::filesystem::path& path,
                  const std::string& config_hash = {});
DatasetSplit read_splits(const std::filesystem::path& path, const AnnotationSet& set);

/// Image indices of `split` ("train", "val", "test" or "all"). Missing
/// splits.json means every image belongs to every split.
std::vector<std::size_t> split_indices(const std::filesystem::path& dir, const AnnotationSet& set,
                                       const std::string& split);

/// Reads the images of `indices` below `dir` and crops their meters.
std::vector<MeterPatch> load_patches(const std::filesystem::path& dir, const AnnotationSet& set,
                                     std::span<const std::size_t> indices, int patch_size);

std::vector<TrainSample> to_train_samples(std::span<const MeterPatch> patches);

/// Maps patch-frame detections into the image frame.
std::vector<VectorDetection> to_image_frame(std::span<const VectorDetection> dets, const Affine& patch_to_image);

/// Runs the network on patches in batches and decodes in patch pixels.
std::vector<std::vector<VectorDetection>> detect(const VdnModel& model, std::span<const Image> patches,
                                                 const DecodeConfig& cfg, std::size_t batch_size = 16);

struct ReadingStats {
    std::size_t pointers = 0;  // in-range labeled pointers with a known value
    std::size_t read = 0;      // of those, matched to a detection that produced a reading
    double median_error = -1;  // |reading - value| / full scale; unread pointers count as +inf
    double mean_error = -1;    // over read pointers only
};

struct EvalOptions {
    DecodeConfig decode;
    MetricConfig metrics;
    std::optional<Perturbation> perturbation;
    double sigma = 3.0;
    std::size_t batch_size = 16;
};

struct EvalSummary {
    ApArReport oks;
    ApArReport vds;
    ReadingStats reading;
    std::size_t patches = 0;
    std::size_t pointers = 0;
    std::size_t detections = 0;
};

/// Detects, scores (OKS and VDS, image pixels) and reads every patch.
EvalSummary evaluate(const VdnModel& model, std::span<const MeterPatch> patches, const EvalOptions& opts);

void to_json(nlohmann::json& j, const EvalSummary& s);

}  // namespace vdn
