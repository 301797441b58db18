#include "vdn/annotations.hpp"

#include "vdn/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>

namespace vdn {

using nlohmann::json;

PointerLabel PointerLabel::from_tip_tail(Point tip, Point tail) {
    PointerLabel p;
    p.tip = tip;
    p.tail = tail;
    p.midpoint = 0.5 * (tip + tail);
    return p;
}

namespace {

json bbox_json(const BBox& b) { return json::array({b.x, b.y, b.width, b.height}); }

BBox parse_bbox(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4) throw DataError("bbox must have 4 numbers");
    return {v[0], v[1], v[2], v[3]};
}

json meter_json(const MeterLabel& m, int image_id) {
    json j{{"id", m.id}, {"image_id", image_id}, {"bbox", bbox_json(m.bbox)}};
    if (m.scale) {
        json t = *m.scale;
        j["scale_points"] = t["scale_points"];
        j["scale_values"] = t["scale_values"];
        j["dial_groups"] = t["dial_groups"];
    }
    return j;
}

}  // namespace

json annotations_to_json(const AnnotationSet& set) {
    json images = json::array(), anns = json::array(), meters = json::array();
    int ann_id = 1;
    for (const ImageRecord& im : set.images) {
        images.push_back(
            {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}, {"hard", im.hard}});
        for (const MeterLabel& m : im.meters) {
            meters.push_back(meter_json(m, im.id));
            for (const PointerLabel& p : m.pointers) {
                const Point kp[3] = {p.tip, p.midpoint, p.tail};
                json k = json::array();
                int visible = 0;
                for (int i = 0; i < 3; ++i) {
                    k.push_back(kp[i].x);
                    k.push_back(kp[i].y);
                    k.push_back(p.visibility[i]);
                    visible += p.visibility[i] > 0;
                }
                json a{{"id", ann_id++},
                       {"image_id", im.id},
                       {"meter_id", m.id},
                       {"category_id", 1},
                       {"bbox", bbox_json(m.bbox)},
                       {"area", m.bbox.area()},
                       {"iscrowd", 0},
                       {"num_keypoints", visible},
                       {"keypoints", std::move(k)}};
                if (p.value) a["value"] = *p.value;
                if (p.out_of_range) a["out_of_range"] = true;
                anns.push_back(std::move(a));
            }
        }
    }
    json cat{{"id", 1},
             {"name", "meter"},
             {"supercategory", "meter"},
             {"keypoints", {"tip", "midpoint", "tail"}},
             {"skeleton", {{1, 2}, {2, 3}}}};
    return json{{"info", {{"description", "pointer meter annotations"}}},
                {"images", std::move(images)},
                {"annotations", std::move(anns)},
                {"meters", std::move(meters)},
                {"categories", json::array({cat})}};
}

AnnotationSet annotations_from_json(const json& j) {
    try {
        AnnotationSet set;
        std::map<int, std::size_t> image_index;
        for (const json& im : j.at("images")) {
            ImageRecord r;
            r.id = im.at("id").get<int>();
            r.file_name = im.at("file_name").get<std::string>();
            r.width = im.at("width").get<int>();
            r.height = im.at("height").get<int>();
            r.hard = im.value("hard", false);
            if (!image_index.emplace(r.id, set.images.size()).second)
                throw DataError("duplicate image id " + std::to_string(r.id));
            set.images.push_back(std::move(r));
        }
        auto image_of = [&](const json& x) -> ImageRecord& {
            const int id = x.at("image_id").get<int>();
            const auto it = image_index.find(id);
            if (it == image_index.end()) throw DataError("annotation references unknown image " + std::to_string(id));
            return set.images[it->second];
        };
        // (image id, meter id) -> position in that image's meter list
        std::map<std::pair<int, int>, std::size_t> meter_index;
        if (j.contains("meters")) {
            for (const json& mj : j.at("meters")) {
                ImageRecord& im = image_of(mj);
                MeterLabel m;
                m.id = mj.at("id").get<int>();
                m.bbox = parse_bbox(mj.at("bbox"));
                if (mj.contains("scale_points")) {
                    json t{{"version", kTemplateVersion},
                           {"bbox", mj.at("bbox")},
                           {"scale_points", mj.at("scale_points")},
                           {"scale_values", mj.at("scale_values")},
                           {"dial_groups", mj.value("dial_groups", json::array())}};
                    m.scale = t.get<MeterTemplate>();
                }
                if (!meter_index.emplace(std::pair{im.id, m.id}, im.meters.size()).second)
                    throw DataError("duplicate meter id " + std::to_string(m.id));
                im.meters.push_back(std::move(m));
            }
        }
        int synthetic_meter = -1;
        for (const json& a : j.at("annotations")) {
            ImageRecord& im = image_of(a);
            const auto kp = a.at("keypoints").get<std::vector<double>>();
            if (kp.size() != 9)
                throw DataError("annotation " + std::to_string(a.value("id", -1)) + " has " +
                                std::to_string(kp.size() / 3) + " keypoints, expected 3");
            PointerLabel p;
            p.tip = {kp[0], kp[1]};
            p.midpoint = {kp[3], kp[4]};
            p.tail = {kp[6], kp[7]};
            p.visibility = {static_cast<int>(kp[2]), static_cast<int>(kp[5]), static_cast<int>(kp[8])};
            if (a.contains("value")) p.value = a.at("value").get<double>();
            p.out_of_range = a.value("out_of_range", false);

            // Plain COCO files carry no meter ids: each annotation is its own meter.
            const int meter_id = a.contains("meter_id") ? a.at("meter_id").get<int>() : synthetic_meter--;
            auto it = meter_index.find({im.id, meter_id});
            if (it == meter_index.end()) {
                MeterLabel m;
                m.id = meter_id;
                m.bbox = parse_bbox(a.at("bbox"));
                it = meter_index.emplace(std::pair{im.id, meter_id}, im.meters.size()).first;
                im.meters.push_back(std::move(m));
            }
            im.meters[it->second].pointers.push_back(p);
        }
        return set;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed annotation file: ") + e.what());
    }
}

void write_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << annotations_to_json(set).dump(1) << '\n';
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + " is not valid JSON: " + e.what());
    }
    return annotations_from_json(j);
}

}  // namespace vdn
