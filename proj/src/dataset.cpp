#include "vdn/dataset.hpp"

#include "vdn/error.hpp"
#include "vdn/geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>

namespace vdn {

std::vector<MeterPatch> meter_patches(const Image& image, const ImageRecord& record, int patch_size) {
    std::vector<MeterPatch> out;
    for (const MeterLabel& m : record.meters) {
        PatchCrop crop = crop_patch(image, m.bbox, patch_size);
        const Affine to_patch = crop.patch_to_image.inverse();
        MeterPatch mp;
        mp.patch = std::move(crop.patch);
        mp.patch_to_image = crop.patch_to_image;
        mp.bbox = m.bbox;
        mp.scale = m.scale;
        mp.hard = record.hard;
        for (const PointerLabel& p : m.pointers) {
            if (p.visibility[0] == 0 || p.visibility[2] == 0 || p.tip == p.tail) continue;
            mp.pointers.push_back({to_patch.apply(p.tip), to_patch.apply(p.tail)});
            mp.labels.push_back(p);
        }
        out.push_back(std::move(mp));
    }
    return out;
}

std::vector<MeterPatch> render_patches(std::size_t count, std::uint64_t seed, const SampleRanges& ranges,
                                       int patch_size) {
    std::mt19937_64 rng(seed);
    std::vector<MeterPatch> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const RenderedDial r = render_dial(sample_spec(rng, ranges));
        for (MeterPatch& mp : meter_patches(r.image, r.record, patch_size)) out.push_back(std::move(mp));
    }
    return out;
}

namespace {

std::string stem_for(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "dial_%05zu", i);
    return buf;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << j.dump(1) << "\n";
    if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

AnnotationSet render_dataset(const std::filesystem::path& dir, const RenderOptions& opts) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "templates");
    std::mt19937_64 rng(opts.seed);
    AnnotationSet set;
    std::vector<char> hard;
    for (std::size_t i = 0; i < opts.count; ++i) {
        const DialSpec spec = sample_spec(rng, opts.ranges);
        RenderedDial r = render_dial(spec);
        const std::string stem = stem_for(i);
        r.record.id = static_cast<int>(i) + 1;
        r.record.file_name = "images/" + stem + ".png";
        for (MeterLabel& m : r.record.meters) m.id = static_cast<int>(i) + 1;
        write_png(r.image, dir / r.record.file_name);
        nlohmann::json t = canonical_template(spec, opts.template_radius);
        if (!opts.config_hash.empty()) t["config_hash"] = opts.config_hash;
        write_json(t, dir / "templates" / (stem + ".json"));
        hard.push_back(r.record.hard);
        set.images.push_back(std::move(r.record));
    }
    nlohmann::json ann = annotations_to_json(set);
    if (!opts.config_hash.empty()) ann["info"] = {{"config_hash", opts.config_hash}};
    write_json(ann, dir / "annotations.json");

    std::unique_ptr<bool[]> flags(new bool[hard.size()]);
    for (std::size_t i = 0; i < hard.size(); ++i) flags[i] = hard[i] != 0;
    const DatasetSplit split = split_dataset({flags.get(), hard.size()}, opts.split, opts.seed, opts.hard_quota);
    write_splits(split, set, dir / "splits.json", opts.config_hash);
    return set;
}

void write_splits(const DatasetSplit& split, const AnnotationSet& set, const std::filesystem::path& path,
                  const std::string& config_hash) {
    auto names = [&](const std::vector<std::size_t>& idx) {
        nlohmann::json a = nlohmann::json::array();
        for (std::size_t i : idx) a.push_back(set.images.at(i).file_name);
        return a;
    };
    nlohmann::json j{{"train", names(split.train)}, {"val", names(split.val)}, {"test", names(split.test)}};
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    write_json(j, path);
}

DatasetSplit read_splits(const std::filesystem::path& path, const AnnotationSet& set) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed " + path.string() + ": " + e.what());
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < set.images.size(); ++i) index[set.images[i].file_name] = i;
    auto read = [&](const char* key) {
        std::vector<std::size_t> out;
        if (!j.contains(key)) return out;
        for (const auto& name : j.at(key)) {
            const auto it = index.find(name.get<std::string>());
            if (it == index.end()) throw DataError("split lists unknown image " + name.dump());
            out.push_back(it->second);
        }
        return out;
    };
    return {read("train"), read("val"), read("test")};
}

std::vector<std::size_t> split_indices(const std::filesystem::path& dir, const AnnotationSet& set,
                                       const std::string& split) {
    if (split != "train" && split != "val" && split != "test" && split != "all")
        throw std::invalid_argument("unknown split " + split);
    const std::filesystem::path path = dir / "splits.json";
    if (split == "all" || !std::filesystem::exists(path)) {
        std::vector<std::size_t> all(set.images.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    const DatasetSplit s = read_splits(path, set);
    return split == "train" ? s.train : split == "val" ? s.val : s.test;
}

std::vector<MeterPatch> load_patches(const std::filesystem::path& dir, const AnnotationSet& set,
                                     std::span<const std::size_t> indices, int patch_size) {
    std::vector<MeterPatch> out;
    for (std::size_t i : indices) {
        const ImageRecord& rec = set.images.at(i);
        const Image img = read_png(dir / rec.file_name);
        if (img.width != rec.width || img.height != rec.height)
            throw DataError(rec.file_name + ": image size does not match its annotation");
        for (MeterPatch& mp : meter_patches(img, rec, patch_size)) out.push_back(std::move(mp));
    }
    return out;
}

std::vector<TrainSample> to_train_samples(std::span<const MeterPatch> patches) {
    std::vector<TrainSample> out;
    out.reserve(patches.size());
    for (const MeterPatch& mp : patches) out.push_back({mp.patch, mp.pointers});
    return out;
}

std::vector<VectorDetection> to_image_frame(std::span<const VectorDetection> dets, const Affine& patch_to_image) {
    std::vector<VectorDetection> out;
    out.reserve(dets.size());
    for (VectorDetection d : dets) {
        const Point p = patch_to_image.apply({d.x, d.y});
        const Point v = patch_to_image.apply_linear({d.alpha, d.beta});
        const double n = norm(v);
        d.x = p.x;
        d.y = p.y;
        if (n > 0.0) {
            d.alpha = v.x / n;
            d.beta = v.y / n;
        }
        out.push_back(d);
    }
    return out;
}

std::vector<std::vector<VectorDetection>> detect(const VdnModel& model, std::span<const Image> patches,
                                                 const DecodeConfig& cfg, std::size_t batch_size) {
    cfg.validate();
    if (batch_size == 0) batch_size = 1;
    std::vector<std::vector<VectorDetection>> out;
    for (std::size_t i = 0; i < patches.size(); i += batch_size) {
        const auto batch = patches.subspan(i, std::min(batch_size, patches.size() - i));
        const ModelOutput o = model.forward(to_tensor(batch));
        auto dets = decode_batch(o.heatmap.value(), o.scalarmap.value(), model.config().lambda(), cfg);
        for (auto& d : dets) out.push_back(std::move(d));
    }
    return out;
}

namespace {

double linear_scale(const Affine& a) { return std::sqrt(std::abs(a.m[0] * a.m[4] - a.m[1] * a.m[3])); }

}  // namespace

EvalSummary evaluate(const VdnModel& model, std::span<const MeterPatch> patches, const EvalOptions& opts) {
    opts.metrics.validate();
    EvalSummary summary;
    summary.patches = patches.size();

    std::vector<Image> inputs;
    std::vector<std::vector<PointerAnnotation>> gts;
    // Maps the original image frame to the perturbed one (identity for masks).
    std::vector<Affine> image_warp;
    for (const MeterPatch& mp : patches) {
        if (opts.perturbation) {
            PerturbedPatch pp = perturb_input(mp.patch, *opts.perturbation, mp.pointers, opts.sigma);
            inputs.push_back(std::move(pp.patch));
            gts.push_back(std::move(pp.annotations));
        } else {
            inputs.push_back(mp.patch);
            gts.push_back(mp.pointers);
        }
        Affine warp;
        if (opts.perturbation && opts.perturbation->mode == PerturbMode::scale) {
            const Point c{(mp.patch.width - 1) / 2.0, (mp.patch.height - 1) / 2.0};
            warp = mp.patch_to_image.compose(Affine::similarity(opts.perturbation->param, 0.0, c))
                       .compose(mp.patch_to_image.inverse());
        }
        image_warp.push_back(warp);
    }

    const auto dets = detect(model, inputs, opts.decode, opts.batch_size);

    std::vector<EvalInstance> instances;
    std::vector<double> errors;
    double read_sum = 0.0;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const MeterPatch& mp = patches[i];
        EvalInstance inst;
        for (const PointerAnnotation& a : gts[i])
            inst.gt.push_back(to_vector({mp.patch_to_image.apply(a.tip), mp.patch_to_image.apply(a.tail)}));
        inst.det = to_image_frame(dets[i], mp.patch_to_image);
        const double s = linear_scale(image_warp[i]);
        inst.bbox_area = mp.bbox.area() * s * s;
        inst.patch_side = mp.patch.width * linear_scale(mp.patch_to_image);
        summary.pointers += inst.gt.size();
        summary.detections += inst.det.size();

        if (mp.scale) {
            MeterTemplate t = *mp.scale;
            for (Point& p : t.scale_points) p = image_warp[i].apply(p);
            const auto readings = read_meter(inst.det, t, Homography{});
            const ImageScore match = match_and_score(inst, opts.metrics, SimilarityKind::oks);
            std::vector<std::optional<double>> read_of_gt(inst.gt.size());
            for (const ScoredDetection& sd : match.detections)
                if (sd.gt && sd.similarity >= 0.5 && readings[sd.det].reading)
                    read_of_gt[*sd.gt] = readings[sd.det].reading->value;
            const double full = t.full_scale_range();
            for (std::size_t g = 0; g < mp.labels.size(); ++g) {
                const PointerLabel& lab = mp.labels[g];
                if (!lab.value || lab.out_of_range || !(full > 0.0)) continue;
                ++summary.reading.pointers;
                if (read_of_gt[g]) {
                    const double e = std::abs(*read_of_gt[g] - *lab.value) / full;
                    errors.push_back(e);
                    read_sum += e;
                    ++summary.reading.read;
                } else {
                    errors.push_back(std::numeric_limits<double>::infinity());
                }
            }
        }
        instances.push_back(std::move(inst));
    }

    const auto oks = match_and_score(instances, opts.metrics, SimilarityKind::oks);
    const auto vds = match_and_score(instances, opts.metrics, SimilarityKind::vds);
    summary.oks = ap_ar(oks, opts.metrics);
    summary.vds = ap_ar(vds, opts.metrics);
    if (!errors.empty()) {
        const std::size_t mid = errors.size() / 2;
        std::nth_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(mid), errors.end());
        double med = errors[mid];
        if (errors.size() % 2 == 0) {
            const double lower = *std::max_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(mid));
            med = 0.5 * (med + lower);
        }
        summary.reading.median_error = med;
    }
    if (summary.reading.read > 0) summary.reading.mean_error = read_sum / static_cast<double>(summary.reading.read);
    return summary;
}

void to_json(nlohmann::json& j, const EvalSummary& s) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j = nlohmann::json{{"oks", s.oks},
                       {"vds", s.vds},
                       {"reading",
                        {{"pointers", s.reading.pointers},
                         {"read", s.reading.read},
                         {"median_error", finite_or_null(s.reading.median_error)},
                         {"mean_error", s.reading.mean_error}}},
                       {"patches", s.patches},
                       {"pointers", s.pointers},
                       {"detections", s.detections}};
}

}  // namespace vdn
