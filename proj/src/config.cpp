#include "vdn/config.hpp"

#include "vdn/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>

namespace vdn {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::invalid_argument("config section '" + section + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw std::invalid_argument("unknown config key " + section + "." + key);
    }
}

json decode_json(const DecodeConfig& d) {
    return {{"threshold", d.threshold}, {"nms_radius", d.nms_radius}, {"subpixel", d.subpixel}};
}

DecodeConfig decode_from(const json& j) {
    check_keys(j, "decode", {"threshold", "nms_radius", "subpixel"});
    DecodeConfig d;
    d.threshold = j.value("threshold", d.threshold);
    d.nms_radius = j.value("nms_radius", d.nms_radius);
    d.subpixel = j.value("subpixel", d.subpixel);
    return d;
}

json metrics_json(const MetricConfig& m) {
    return {{"tau", m.tau},
            {"kappa", m.kappa},
            {"ap_thresholds", m.ap_thresholds},
            {"medium_min", m.medium_min},
            {"large_min", m.large_min}};
}

MetricConfig metrics_from(const json& j) {
    check_keys(j, "metrics", {"tau", "kappa", "ap_thresholds", "medium_min", "large_min"});
    MetricConfig m;
    m.tau = j.value("tau", m.tau);
    m.kappa = j.value("kappa", m.kappa);
    m.ap_thresholds = j.value("ap_thresholds", m.ap_thresholds);
    m.medium_min = j.value("medium_min", m.medium_min);
    m.large_min = j.value("large_min", m.large_min);
    return m;
}

json data_json(const DataConfig& d) {
    const SampleRanges& r = d.ranges;
    return {{"images", d.images},
            {"seed", d.seed},
            {"radius", {r.radius_min, r.radius_max}},
            {"two_pointer_fraction", r.two_pointer_fraction},
            {"out_of_range_fraction", r.out_of_range_fraction},
            {"blur_fraction", r.blur_fraction},
            {"noise_fraction", r.noise_fraction},
            {"glare_fraction", r.glare_fraction},
            {"split", {d.split.train, d.split.val, d.split.test}},
            {"hard_quota", d.hard_quota}};
}

DataConfig data_from(const json& j) {
    check_keys(j, "data",
               {"images", "seed", "radius", "two_pointer_fraction", "out_of_range_fraction", "blur_fraction",
                "noise_fraction", "glare_fraction", "split", "hard_quota"});
    DataConfig d;
    SampleRanges& r = d.ranges;
    d.images = j.value("images", d.images);
    d.seed = j.value("seed", d.seed);
    if (j.contains("radius")) {
        const auto v = j.at("radius").get<std::vector<double>>();
        if (v.size() != 2 || !(v[0] > 0.0 && v[1] >= v[0])) throw std::invalid_argument("data.radius must be [min, max]");
        r.radius_min = v[0];
        r.radius_max = v[1];
    }
    r.two_pointer_fraction = j.value("two_pointer_fraction", r.two_pointer_fraction);
    r.out_of_range_fraction = j.value("out_of_range_fraction", r.out_of_range_fraction);
    r.blur_fraction = j.value("blur_fraction", r.blur_fraction);
    r.noise_fraction = j.value("noise_fraction", r.noise_fraction);
    r.glare_fraction = j.value("glare_fraction", r.glare_fraction);
    if (j.contains("split")) {
        const auto v = j.at("split").get<std::vector<double>>();
        if (v.size() != 3) throw std::invalid_argument("data.split must be [train, val, test]");
        d.split = {v[0], v[1], v[2], v[0] + v[1] + v[2]};
    }
    d.hard_quota = j.value("hard_quota", d.hard_quota);
    return d;
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    decode.validate();
    metrics.validate();
    if (data.images == 0) throw std::invalid_argument("data.images must be positive");
    if (!(data.split.train >= 0 && data.split.val >= 0 && data.split.test >= 0 && data.split.total > 0))
        throw std::invalid_argument("data.split must be non-negative with a positive sum");
    if (!(data.hard_quota >= 0.0 && data.hard_quota <= 1.0)) throw std::invalid_argument("data.hard_quota outside [0, 1]");
    if (!(pipeline.template_radius > 0.0)) throw std::invalid_argument("pipeline.template_radius must be positive");
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"model", c.model},
             {"train", c.train},
             {"decode", decode_json(c.decode)},
             {"metrics", metrics_json(c.metrics)},
             {"data", data_json(c.data)},
             {"pipeline", {{"template_radius", c.pipeline.template_radius}}}};
}

void from_json(const json& j, RunConfig& c) {
    check_keys(j, "", {"model", "train", "decode", "metrics", "data", "pipeline"});
    RunConfig out;
    try {
        if (j.contains("model")) out.model = j.at("model").get<ModelConfig>();
        if (j.contains("train")) out.train = j.at("train").get<TrainConfig>();
        if (j.contains("decode")) out.decode = decode_from(j.at("decode"));
        if (j.contains("metrics")) out.metrics = metrics_from(j.at("metrics"));
        if (j.contains("data")) out.data = data_from(j.at("data"));
        if (j.contains("pipeline")) {
            check_keys(j.at("pipeline"), "pipeline", {"template_radius"});
            out.pipeline.template_radius = j.at("pipeline").value("template_radius", out.pipeline.template_radius);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config value has the wrong type: ") + e.what());
    }
    out.validate();
    c = std::move(out);
}

RunConfig read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return j.get<RunConfig>();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(json(*this).dump())));
    return buf;
}

}  // namespace vdn
