#include "vdn/pipeline.hpp"

#include "vdn/assignment.hpp"
#include "vdn/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

namespace vdn {

using nlohmann::json;

void MeterTemplate::validate() const {
    if (scale_points.size() < 2) throw DataError("template needs at least two scale points");
    if (scale_points.size() != scale_values.size()) throw DataError("template scale point and value counts differ");
    for (const DialGroup& g : effective_groups()) {
        if (g.indices.size() < 2) throw DataError("dial group " + std::to_string(g.id) + " has fewer than 2 points");
        for (std::size_t i = 0; i < g.indices.size(); ++i) {
            if (g.indices[i] >= scale_points.size())
                throw DataError("dial group " + std::to_string(g.id) + " references a missing scale point");
            if (i > 0 && scale_points[g.indices[i]] == scale_points[g.indices[i - 1]])
                throw DataError("consecutive scale points coincide");
        }
    }
}

std::vector<DialGroup> MeterTemplate::effective_groups() const {
    if (!dial_groups.empty()) return dial_groups;
    DialGroup all;
    for (std::size_t i = 0; i < scale_points.size(); ++i) all.indices.push_back(i);
    return {all};
}

double MeterTemplate::full_scale_range() const {
    if (scale_values.empty()) return 0.0;
    return std::abs(scale_values.back() - scale_values.front());
}

void to_json(json& j, const MeterTemplate& t) {
    json pts = json::array();
    for (const Point& p : t.scale_points) pts.push_back({p.x, p.y});
    json groups = json::array();
    for (const DialGroup& g : t.dial_groups) groups.push_back({{"id", g.id}, {"indices", g.indices}});
    j = json{{"version", kTemplateVersion},
             {"bbox", {t.bbox.x, t.bbox.y, t.bbox.width, t.bbox.height}},
             {"scale_points", std::move(pts)},
             {"scale_values", t.scale_values},
             {"dial_groups", std::move(groups)}};
}

void from_json(const json& j, MeterTemplate& t) {
    if (j.value("version", std::string{}) != kTemplateVersion)
        throw DataError(std::string("template is not a ") + kTemplateVersion + " document");
    try {
        MeterTemplate out;
        const auto b = j.at("bbox").get<std::vector<double>>();
        if (b.size() != 4) throw DataError("template bbox must be [x, y, w, h]");
        out.bbox = {b[0], b[1], b[2], b[3]};
        for (const auto& p : j.at("scale_points")) {
            const auto xy = p.get<std::vector<double>>();
            if (xy.size() != 2) throw DataError("scale points must be [x, y]");
            out.scale_points.push_back({xy[0], xy[1]});
        }
        out.scale_values = j.at("scale_values").get<std::vector<double>>();
        if (j.contains("dial_groups"))
            for (const auto& g : j.at("dial_groups"))
                out.dial_groups.push_back({g.at("id").get<int>(), g.at("indices").get<std::vector<std::size_t>>()});
        out.validate();
        t = std::move(out);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed template: ") + e.what());
    }
}

MeterTemplate read_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open template " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("template " + path.string() + " is not valid JSON: " + e.what());
    }
    return j.get<MeterTemplate>();
}

void write_template(const MeterTemplate& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write template " + path.string());
    out << json(t).dump(2) << '\n';
}

Point dial_center(std::span<const Point> pts, const DialGroup& group) {
    Point c{0.0, 0.0};
    for (std::size_t i : group.indices) c = c + pts[i];
    return (1.0 / static_cast<double>(group.indices.size())) * c;
}

int assign_pointer_to_dial(Point pinpoint, std::span<const Point> pts, std::span<const DialGroup> groups) {
    if (groups.empty()) throw DataError("no dial groups to assign to");
    // Lowest dial id wins ties, independent of group order.
    std::vector<const DialGroup*> order;
    for (const DialGroup& g : groups) order.push_back(&g);
    std::stable_sort(order.begin(), order.end(), [](const DialGroup* a, const DialGroup* b) { return a->id < b->id; });
    std::vector<Point> centers;
    for (const DialGroup* g : order) centers.push_back(dial_center(pts, *g));
    return order[nearest_dial(pinpoint, centers)]->id;
}

std::vector<PointerReading> read_meter(std::span<const VectorDetection> detections, const MeterTemplate& tmpl,
                                       const Homography& template_to_image) {
    tmpl.validate();
    const std::vector<Point> projected = project_scale_points(template_to_image, tmpl.scale_points);
    const std::vector<DialGroup> groups = tmpl.effective_groups();

    std::vector<PointerReading> out;
    for (std::size_t k = 0; k < detections.size(); ++k) {
        const VectorDetection& d = detections[k];
        PointerReading pr;
        pr.pointer = k;
        pr.dial = assign_pointer_to_dial({d.x, d.y}, projected, groups);
        const DialGroup& g = *std::find_if(groups.begin(), groups.end(), [&](const DialGroup& x) { return x.id == pr.dial; });
        std::vector<Point> poly;
        std::vector<double> values;
        for (std::size_t i : g.indices) {
            poly.push_back(projected[i]);
            values.push_back(tmpl.scale_values[i]);
        }
        if (!d.degenerate_direction) {
            if (const auto hit = intersect_ray_polyline({d.x, d.y}, {d.alpha, d.beta}, poly)) {
                pr.reading = Reading{k, compute_reading(hit->point, hit->segment, poly, values), hit->segment,
                                     hit->point};
            }
        }
        out.push_back(pr);
    }
    return out;
}

Homography bbox_homography(const BBox& t, const BBox& i) {
    const Correspondence pairs[] = {
        {{t.x, t.y}, {i.x, i.y}},
        {{t.x + t.width, t.y}, {i.x + i.width, i.y}},
        {{t.x + t.width, t.y + t.height}, {i.x + i.width, i.y + i.height}},
        {{t.x, t.y + t.height}, {i.x, i.y + i.height}},
    };
    return estimate_homography(pairs).homography;
}

std::map<int, std::vector<double>> combine_independent_dials(std::span<const PointerReading> readings) {
    std::map<int, std::vector<double>> out;
    for (const PointerReading& r : readings)
        if (r.reading) out[r.dial].push_back(r.reading->value);
    return out;
}

}  // namespace vdn
