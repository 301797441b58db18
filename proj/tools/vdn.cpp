// vdn: dataset rendering, training, detection, reading, evaluation and
// gradient checks from the command line.
//
// Exit codes: 0 ok, 1 usage or invalid config, 2 data error, 3 numeric failure.

#include "vdn/assignment.hpp"
#include "vdn/config.hpp"
#include "vdn/dataset.hpp"
#include "vdn/error.hpp"
#include "vdn/gradcheck.hpp"
#include "vdn/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vdn;

namespace {

constexpr int kUsage = 1, kData = 2, kNumeric = 3;

RunConfig load_run_config(const std::string& path) {
    RunConfig rc = path.empty() ? RunConfig{} : read_config(path);
    rc.validate();
    return rc;
}

void write_json_file(const json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(1) << "\n";
    if (!out) throw DataError("cannot write " + path.string());
}

AnnotationSet read_dataset(const fs::path& dir) { return read_annotations(dir / "annotations.json"); }

// Meter boxes come from annotations.json when present; otherwise every PNG in
// the directory is one meter spanning the whole image.
AnnotationSet boxes_for(const fs::path& dir) {
    if (fs::exists(dir / "annotations.json")) return read_dataset(dir);
    if (!fs::is_directory(dir)) throw DataError("no such image directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    AnnotationSet set;
    for (const fs::path& f : files) {
        const Image img = read_png(f);
        ImageRecord rec;
        rec.id = static_cast<int>(set.images.size()) + 1;
        rec.file_name = f.filename().string();
        rec.width = img.width;
        rec.height = img.height;
        MeterLabel m;
        m.id = rec.id;
        m.bbox = {0, 0, static_cast<double>(img.width), static_cast<double>(img.height)};
        rec.meters.push_back(m);
        set.images.push_back(std::move(rec));
    }
    if (set.images.empty()) throw DataError("no PNG images in " + dir.string());
    return set;
}

int patch_size_of(const ModelConfig& mc) {
    if (mc.input_width != mc.input_height) throw std::invalid_argument("model input must be square");
    return static_cast<int>(mc.input_width);
}

json detection_json(const VectorDetection& d) {
    return {{"x", d.x},         {"y", d.y}, {"alpha", d.alpha}, {"beta", d.beta}, {"confidence", d.confidence},
            {"degenerate", d.degenerate_direction}};
}

// Overlay drawing: detected vectors as colored rays from the tip.
const std::array<std::array<std::uint8_t, 3>, 6> kPalette{
    {{230, 25, 75}, {60, 180, 75}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180}, {70, 240, 240}}};

void stamp(Image& img, Point p, double r, const std::array<std::uint8_t, 3>& col) {
    for (int y = static_cast<int>(std::floor(p.y - r)); y <= static_cast<int>(std::ceil(p.y + r)); ++y)
        for (int x = static_cast<int>(std::floor(p.x - r)); x <= static_cast<int>(std::ceil(p.x + r)); ++x)
            if (img.contains(x, y) && std::hypot(x - p.x, y - p.y) <= r)
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
}

void draw_ray(Image& img, const VectorDetection& d, const std::array<std::uint8_t, 3>& col) {
    const double len = std::hypot(img.width, img.height);
    for (double t = 0.0; t <= len; t += 0.5) {
        const Point p{d.x + t * d.alpha, d.y + t * d.beta};
        if (!img.contains(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)))) break;
        stamp(img, p, 0.8, col);
    }
    stamp(img, {d.x, d.y}, 2.5, col);
}

void draw_box(Image& img, const BBox& b) {
    const std::array<std::uint8_t, 3> col{255, 225, 25};
    for (double t = 0.0; t <= 1.0; t += 0.5 / std::max(b.width, b.height)) {
        stamp(img, {b.x + t * b.width, b.y}, 0.5, col);
        stamp(img, {b.x + t * b.width, b.y + b.height}, 0.5, col);
        stamp(img, {b.x, b.y + t * b.height}, 0.5, col);
        stamp(img, {b.x + b.width, b.y + t * b.height}, 0.5, col);
    }
}

struct MeterDetections {
    const ImageRecord* image = nullptr;
    const MeterLabel* meter = nullptr;
    std::vector<VectorDetection> dets;  // image pixels
};

// Crops every meter of the selected images, runs the network and maps the
// detections back to image pixels.
std::vector<MeterDetections> run_detection(const VdnModel& model, const fs::path& dir, const AnnotationSet& set,
                                           std::span<const std::size_t> indices, const DecodeConfig& decode) {
    const int size = patch_size_of(model.config());
    std::vector<MeterDetections> out;
    std::vector<Image> patches;
    std::vector<Affine> to_image;
    for (std::size_t i : indices) {
        const ImageRecord& rec = set.images.at(i);
        const Image img = read_png(dir / rec.file_name);
        for (const MeterLabel& m : rec.meters) {
            PatchCrop crop = crop_patch(img, m.bbox, size);
            patches.push_back(std::move(crop.patch));
            to_image.push_back(crop.patch_to_image);
            out.push_back({&rec, &m, {}});
        }
    }
    const auto dets = detect(model, patches, decode);
    for (std::size_t k = 0; k < out.size(); ++k) out[k].dets = to_image_frame(dets[k], to_image[k]);
    return out;
}

void write_overlays(const fs::path& overlay_dir, const fs::path& dir, const std::vector<MeterDetections>& found) {
    fs::create_directories(overlay_dir);
    std::map<const ImageRecord*, Image> canvases;
    for (const MeterDetections& md : found) {
        auto it = canvases.find(md.image);
        if (it == canvases.end()) it = canvases.emplace(md.image, read_png(dir / md.image->file_name)).first;
        draw_box(it->second, md.meter->bbox);
        for (std::size_t k = 0; k < md.dets.size(); ++k) draw_ray(it->second, md.dets[k], kPalette[k % kPalette.size()]);
    }
    for (const auto& [rec, img] : canvases) write_png(img, overlay_dir / fs::path(rec->file_name).filename());
}

// A template file holds one template object or an array of them.
std::vector<MeterTemplate> read_templates(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open template " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("template " + path.string() + " is not valid JSON: " + e.what());
    }
    std::vector<MeterTemplate> out;
    if (j.is_array())
        for (const json& t : j) out.push_back(t.get<MeterTemplate>());
    else
        out.push_back(j.get<MeterTemplate>());
    return out;
}

// --- subcommands -----------------------------------------------------------

struct Options {
    std::string config, out, data, ckpt, images, templates, overlay, split;
    std::vector<std::string> perturb;
    long long count = -1;
    long long seed = -1;
};

int cmd_render(const Options& o) {
    RunConfig rc = load_run_config(o.config);
    if (o.count >= 0) rc.data.images = static_cast<std::size_t>(o.count);
    if (o.seed >= 0) rc.data.seed = static_cast<std::uint64_t>(o.seed);
    rc.validate();
    RenderOptions ro;
    ro.count = rc.data.images;
    ro.seed = rc.data.seed;
    ro.ranges = rc.data.ranges;
    ro.split = rc.data.split;
    ro.hard_quota = rc.data.hard_quota;
    ro.template_radius = rc.pipeline.template_radius;
    ro.config_hash = rc.hash();
    const AnnotationSet set = render_dataset(o.out, ro);
    json cfg = rc;
    write_json_file({{"config", cfg}, {"config_hash", ro.config_hash}}, fs::path(o.out) / "config.json");
    std::cout << "rendered " << set.images.size() << " images into " << o.out << " (config " << ro.config_hash
              << ")\n";
    return 0;
}

int cmd_train(const Options& o) {
    RunConfig rc = load_run_config(o.config);
    if (o.seed >= 0) rc.train.seed = static_cast<std::uint64_t>(o.seed);
    rc.validate();
    const int size = patch_size_of(rc.model);
    const AnnotationSet set = read_dataset(o.data);
    const auto idx = split_indices(o.data, set, o.split.empty() ? "train" : o.split);
    const auto patches = load_patches(o.data, set, idx, size);
    if (patches.empty()) throw DataError("no training patches in " + o.data);
    const auto samples = to_train_samples(patches);

    const std::string hash = rc.hash();
    fs::create_directories(o.out);
    const fs::path out(o.out);
    write_json_file({{"config", json(rc)}, {"config_hash", hash}}, out / "config.json");
    TrainConfig tc = rc.train;
    tc.checkpoint_path = out / "checkpoint.json";
    tc.config_hash = hash;
    VdnModel model(rc.model, rc.train.seed);
    std::ofstream report(out / "train_report.jsonl");
    train(model, samples, tc, [&](const EpochReport& r) {
        report << json(r).dump() << "\n" << std::flush;
        std::cout << "epoch " << r.epoch << "/" << tc.epochs << " loss " << r.loss << " (heatmap " << r.loss_heatmap
                  << ", scalarmap " << r.loss_scalarmap << ") lr " << r.lr << "\n"
                  << std::flush;
    });
    std::cout << "checkpoint " << tc.checkpoint_path.string() << " (config " << hash << ")\n";
    return 0;
}

int cmd_detect(const Options& o) {
    const RunConfig rc = load_run_config(o.config);
    const VdnModel model = load(o.ckpt);
    const AnnotationSet set = boxes_for(o.images);
    const auto idx = split_indices(o.images, set, o.split.empty() ? "all" : o.split);
    const auto found = run_detection(model, o.images, set, idx, rc.decode);
    json images = json::array();
    std::map<const ImageRecord*, std::size_t> slot;
    for (const MeterDetections& md : found) {
        if (!slot.count(md.image)) {
            slot[md.image] = images.size();
            images.push_back({{"file_name", md.image->file_name}, {"meters", json::array()}});
        }
        json dets = json::array();
        for (const VectorDetection& d : md.dets) dets.push_back(detection_json(d));
        const BBox& b = md.meter->bbox;
        images[slot[md.image]]["meters"].push_back(
            {{"meter_id", md.meter->id}, {"bbox", {b.x, b.y, b.width, b.height}}, {"detections", dets}});
    }
    write_json_file({{"config_hash", rc.hash()}, {"checkpoint", o.ckpt}, {"images", images}}, o.out);
    if (!o.overlay.empty()) write_overlays(o.overlay, o.images, found);
    std::cout << "detected pointers on " << found.size() << " meters\n";
    return 0;
}

int cmd_read(const Options& o) {
    const RunConfig rc = load_run_config(o.config);
    const VdnModel model = load(o.ckpt);
    const AnnotationSet set = boxes_for(o.images);
    const auto idx = split_indices(o.images, set, o.split.empty() ? "all" : o.split);
    const fs::path tpath(o.templates);
    const bool per_image = fs::is_directory(tpath);
    std::vector<MeterTemplate> shared;
    if (!per_image) shared = read_templates(tpath);

    const auto found = run_detection(model, o.images, set, idx, rc.decode);
    json images = json::array();
    std::size_t read = 0, total = 0;
    for (std::size_t k = 0; k < found.size();) {
        // All meters of one image are consecutive in `found`.
        const ImageRecord* rec = found[k].image;
        std::size_t end = k;
        while (end < found.size() && found[end].image == rec) ++end;
        const std::vector<MeterTemplate> templates =
            per_image ? read_templates(tpath / (fs::path(rec->file_name).stem().string() + ".json")) : shared;

        std::vector<Point> det_centers, tmpl_centers;
        for (std::size_t m = k; m < end; ++m) det_centers.push_back(found[m].meter->bbox.center());
        for (const MeterTemplate& t : templates) tmpl_centers.push_back(t.bbox.center());
        const BoxPairing pairing = assign_boxes(det_centers, tmpl_centers);

        json meters = json::array();
        for (const auto& [d, t] : pairing.pairs) {
            const MeterDetections& md = found[k + d];
            const Homography H = bbox_homography(templates[t].bbox, md.meter->bbox);
            const auto readings = read_meter(md.dets, templates[t], H);
            json rs = json::array();
            for (const PointerReading& r : readings) {
                json e = detection_json(md.dets[r.pointer]);
                e["dial"] = r.dial;
                if (r.reading) {
                    e["value"] = r.reading->value;
                    e["segment"] = r.reading->segment;
                    e["scale_point"] = {r.reading->point.x, r.reading->point.y};
                    ++read;
                } else {
                    e["value"] = nullptr;
                }
                ++total;
                rs.push_back(std::move(e));
            }
            json dials = json::object();
            for (const auto& [dial, values] : combine_independent_dials(readings)) dials[std::to_string(dial)] = values;
            const BBox& b = md.meter->bbox;
            meters.push_back({{"meter_id", md.meter->id},
                              {"template", t},
                              {"bbox", {b.x, b.y, b.width, b.height}},
                              {"pointers", rs},
                              {"dials", dials}});
        }
        json unmatched = json::array();
        for (std::size_t d : pairing.unassigned_detected) unmatched.push_back(found[k + d].meter->id);
        images.push_back({{"file_name", rec->file_name}, {"meters", meters}, {"meters_without_template", unmatched}});
        k = end;
    }
    write_json_file({{"config_hash", rc.hash()}, {"checkpoint", o.ckpt}, {"images", images}}, o.out);
    if (!o.overlay.empty()) write_overlays(o.overlay, o.images, found);
    std::cout << "read " << read << " of " << total << " detected pointers\n";
    return 0;
}

int cmd_evaluate(const Options& o) {
    const RunConfig rc = load_run_config(o.config);
    std::vector<std::optional<Perturbation>> settings{std::nullopt};
    for (const std::string& p : o.perturb) settings.push_back(Perturbation::parse(p));
    const VdnModel model = load(o.ckpt);
    const AnnotationSet set = read_dataset(o.data);
    const auto idx = split_indices(o.data, set, o.split.empty() ? "test" : o.split);
    const auto patches = load_patches(o.data, set, idx, patch_size_of(model.config()));

    json reports = json::array();
    for (const auto& s : settings) {
        EvalOptions eo;
        eo.decode = rc.decode;
        eo.metrics = rc.metrics;
        eo.sigma = rc.train.sigma;
        eo.perturbation = s;
        json r = evaluate(model, patches, eo);
        r["perturbation"] = s ? s->str() : "none";
        std::cout << r["perturbation"].get<std::string>() << ": OKS AP50 " << r["oks"]["AP50"] << ", VDS AP50 "
                  << r["vds"]["AP50"] << ", median reading error " << r["reading"]["median_error"] << "\n";
        reports.push_back(std::move(r));
    }
    write_json_file({{"config_hash", rc.hash()}, {"checkpoint", o.ckpt}, {"split", o.split.empty() ? "test" : o.split},
                     {"reports", reports}},
                    o.out);
    return 0;
}

int cmd_gradcheck(const Options& o) {
    const RunConfig rc = load_run_config(o.config);
    auto rows = gradcheck_ops(rc.train.seed);
    const auto e2e = gradcheck_end_to_end(rc.train.seed);
    rows.insert(rows.end(), e2e.begin(), e2e.end());
    bool ok = true;
    std::printf("%-16s %-20s %12s %10s\n", "op", "wrt", "rel_error", "tolerance");
    for (const GradCheckRow& r : rows) {
        std::printf("%-16s %-20s %12.3e %10.0e %s\n", r.op.c_str(), r.wrt.c_str(), r.rel_error, r.tolerance,
                    r.passed() ? "ok" : "FAIL");
        ok = ok && r.passed();
    }
    std::printf("config %s\n", rc.hash().c_str());
    return ok ? 0 : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vector detection network for analog meter pointers"};
    app.require_subcommand(1);
    Options o;

    auto* render = app.add_subcommand("render-dataset", "Render a synthetic dial dataset");
    render->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
    render->add_option("--out", o.out, "Output directory")->required();
    render->add_option("--count", o.count, "Number of images (overrides data.images)")->check(CLI::NonNegativeNumber);
    render->add_option("--seed", o.seed, "Seed (overrides data.seed)")->check(CLI::NonNegativeNumber);

    auto* trn = app.add_subcommand("train", "Train a model on a rendered dataset");
    trn->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
    trn->add_option("--data", o.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    trn->add_option("--out", o.out, "Output directory for checkpoint and report")->required();
    trn->add_option("--split", o.split, "Split to train on (default train)");
    trn->add_option("--seed", o.seed, "Seed (overrides train.seed)")->check(CLI::NonNegativeNumber);

    auto* det = app.add_subcommand("detect", "Detect pointer vectors");
    det->add_option("--config", o.config, "Run config JSON (decode section)")->check(CLI::ExistingFile);
    det->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    det->add_option("--images", o.images, "Image directory or dataset directory")->required();
    det->add_option("--out", o.out, "Detections JSON")->required();
    det->add_option("--overlay", o.overlay, "Directory for overlay PNGs");
    det->add_option("--split", o.split, "Dataset split (default all)");

    auto* rd = app.add_subcommand("read", "Detect pointers and compute meter readings");
    rd->add_option("--config", o.config, "Run config JSON (decode section)")->check(CLI::ExistingFile);
    rd->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    rd->add_option("--images", o.images, "Image directory or dataset directory")->required();
    rd->add_option("--templates", o.templates, "Template file, or directory with <image>.json per image")
        ->required()
        ->check(CLI::ExistingPath);
    rd->add_option("--out", o.out, "Readings JSON")->required();
    rd->add_option("--overlay", o.overlay, "Directory for overlay PNGs");
    rd->add_option("--split", o.split, "Dataset split (default all)");

    auto* ev = app.add_subcommand("evaluate", "OKS/VDS AP-AR and reading error on a dataset split");
    ev->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
    ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", o.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--perturb", o.perturb, "scale:<s>, mask_tip:<gamma> or mask_tail:<gamma>; repeatable");
    ev->add_option("--split", o.split, "Dataset split (default test)");
    ev->add_option("--out", o.out, "Report JSON")->required();

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
    gc->add_option("--config", o.config, "Run config JSON (train.seed)")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (render->parsed()) return cmd_render(o);
        if (trn->parsed()) return cmd_train(o);
        if (det->parsed()) return cmd_detect(o);
        if (rd->parsed()) return cmd_read(o);
        if (ev->parsed()) return cmd_evaluate(o);
        if (gc->parsed()) return cmd_gradcheck(o);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
