#include "vdn/synth.hpp"

#include "vdn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vdn {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Point unit(double angle_deg) { return {std::cos(angle_deg * kDeg), std::sin(angle_deg * kDeg)}; }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Float RGB canvas in [0, 1] used before quantization.
struct Canvas {
    int w, h;
    std::vector<double> px;

    Canvas(int w_, int h_, double gray) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_ * 3, gray) {}
    double& at(int x, int y, int c) { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }

    // Blends `color` with per-pixel coverage given by a signed distance
    // function over the pixel-center grid, restricted to a bounding box.
    template <class Sdf>
    void fill(double x0, double y0, double x1, double y1, const std::array<double, 3>& color, Sdf sdf) {
        const int ix0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
        const int iy0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
        const int ix1 = std::min(w - 1, static_cast<int>(std::ceil(x1)) + 1);
        const int iy1 = std::min(h - 1, static_cast<int>(std::ceil(y1)) + 1);
        for (int y = iy0; y <= iy1; ++y)
            for (int x = ix0; x <= ix1; ++x) {
                const double cov = clamp01(0.5 - sdf(Point{static_cast<double>(x), static_cast<double>(y)}));
                if (cov <= 0.0) continue;
                for (int c = 0; c < 3; ++c) at(x, y, c) = at(x, y, c) * (1.0 - cov) + color[c] * cov;
            }
    }

    void disc(Point c, double r, const std::array<double, 3>& color) {
        fill(c.x - r, c.y - r, c.x + r, c.y + r, color, [&](Point p) { return distance(p, c) - r; });
    }

    void ring(Point c, double r, double width, const std::array<double, 3>& color) {
        const double ro = r + width / 2;
        fill(c.x - ro, c.y - ro, c.x + ro, c.y + ro, color,
             [&](Point p) { return std::abs(distance(p, c) - r) - width / 2; });
    }

    void segment(Point a, Point b, double width, const std::array<double, 3>& color) {
        const double hw = width / 2;
        const Point ab = b - a;
        const double len2 = ab.x * ab.x + ab.y * ab.y;
        fill(std::min(a.x, b.x) - hw, std::min(a.y, b.y) - hw, std::max(a.x, b.x) + hw, std::max(a.y, b.y) + hw, color,
             [&](Point p) {
                 const Point ap = p - a;
                 const double t = len2 > 0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
                 return distance(p, a + t * ab) - hw;
             });
    }

    void convex_polygon(const std::vector<Point>& v, const std::array<double, 3>& color) {
        double x0 = v[0].x, x1 = v[0].x, y0 = v[0].y, y1 = v[0].y;
        for (const Point& p : v) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        fill(x0, y0, x1, y1, color, [&](Point p) {
            double d = 1e300;
            int pos = 0, neg = 0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const Point a = v[i], b = v[(i + 1) % v.size()];
                const Point ab = b - a, ap = p - a;
                const double len2 = ab.x * ab.x + ab.y * ab.y;
                const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0);
                d = std::min(d, distance(p, a + t * ab));
                const double s = ab.x * ap.y - ab.y * ap.x;
                pos += s > 0;
                neg += s < 0;
            }
            return (pos == 0 || neg == 0) ? -d : d;
        });
    }
};

std::array<double, 3> gray(double g) { return {g, g, g}; }

void gaussian_blur(Canvas& cv, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : k) v /= sum;
    std::vector<double> tmp(cv.px.size());
    auto idx = [&](int x, int y, int c) { return (static_cast<std::size_t>(y) * cv.w + x) * 3 + c; };
    for (int y = 0; y < cv.h; ++y)
        for (int x = 0; x < cv.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * cv.px[idx(std::clamp(x + i, 0, cv.w - 1), y, c)];
                tmp[idx(x, y, c)] = acc;
            }
    for (int y = 0; y < cv.h; ++y)
        for (int x = 0; x < cv.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[idx(x, std::clamp(y + i, 0, cv.h - 1), c)];
                cv.px[idx(x, y, c)] = acc;
            }
}

}  // namespace

bool Degradation::is_hard() const { return blur_radius >= 2.0 || noise_std >= 0.1 || glare; }

void DialSpec::validate() const {
    if (image_width <= 0 || image_height <= 0) throw std::invalid_argument("dial image size must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("dial radius must be positive");
    if (tick_values.size() < 2) throw std::invalid_argument("dial needs at least two ticks");
    for (std::size_t i = 1; i < tick_values.size(); ++i)
        if (!(tick_values[i] > tick_values[i - 1])) throw std::invalid_argument("tick values must increase");
    if (!(arc_end_deg > arc_start_deg && arc_end_deg - arc_start_deg <= 360.0))
        throw std::invalid_argument("scale arc must span (0, 360] degrees");
    if (!(scale_radius_ratio > 0.0 && scale_radius_ratio < 1.0))
        throw std::invalid_argument("scale radius ratio must lie in (0, 1)");
    for (const PointerSpec& p : pointers) {
        if (!(p.length_ratio > 0.0)) throw std::invalid_argument("pointer length must be positive");
        if (p.length_ratio > 1.0) throw std::invalid_argument("pointer is longer than the dial radius");
        if (!(p.tail_ratio >= 0.0 && p.tail_ratio < 1.0)) throw std::invalid_argument("pointer tail ratio out of range");
        if (!(p.width > 0.0)) throw std::invalid_argument("pointer width must be positive");
        const double v = pointer_value(p);
        if (!p.out_of_range && (v < tick_values.front() - 1e-9 || v > tick_values.back() + 1e-9))
            throw std::invalid_argument("pointer value outside the scale and not flagged out of range");
    }
}

double DialSpec::value_to_angle_deg(double v) const {
    const std::size_t e = tick_values.size();
    const double step = (arc_end_deg - arc_start_deg) / static_cast<double>(e - 1);
    std::size_t q = 0;
    while (q + 2 < e && v > tick_values[q + 1]) ++q;
    const double f = (v - tick_values[q]) / (tick_values[q + 1] - tick_values[q]);
    return arc_start_deg + (static_cast<double>(q) + f) * step;
}

double DialSpec::angle_to_value(double angle_deg) const {
    const std::size_t e = tick_values.size();
    const double step = (arc_end_deg - arc_start_deg) / static_cast<double>(e - 1);
    // Wrap into one turn split at the middle of the gap, so gap angles map just
    // below the first tick or just above the last one.
    const double gap_mid = arc_end_deg + (360.0 - (arc_end_deg - arc_start_deg)) / 2.0;
    const double a = gap_mid - 360.0 + std::fmod(std::fmod(angle_deg - gap_mid, 360.0) + 360.0, 360.0);
    const double pos = (a - arc_start_deg) / step;
    const auto q = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(e - 2)));
    return tick_values[q] + (pos - static_cast<double>(q)) * (tick_values[q + 1] - tick_values[q]);
}

double DialSpec::pointer_angle_deg(const PointerSpec& p) const {
    return p.angle_deg ? *p.angle_deg : value_to_angle_deg(p.value);
}

double DialSpec::pointer_value(const PointerSpec& p) const { return p.angle_deg ? angle_to_value(*p.angle_deg) : p.value; }

BBox DialSpec::dial_bbox() const { return {center.x - radius, center.y - radius, 2 * radius, 2 * radius}; }

std::vector<Point> DialSpec::scale_points() const {
    std::vector<Point> out;
    const std::size_t e = tick_values.size();
    for (std::size_t i = 0; i < e; ++i) {
        const double a = arc_start_deg + (arc_end_deg - arc_start_deg) * static_cast<double>(i) / static_cast<double>(e - 1);
        out.push_back(center + (scale_radius_ratio * radius) * unit(a));
    }
    return out;
}

RenderedDial render_dial(const DialSpec& spec) {
    spec.validate();
    const double R = spec.radius;
    const Point c = spec.center;

    // Labels first, from the exact geometry.
    MeterLabel meter;
    meter.bbox = spec.dial_bbox();
    for (const PointerSpec& p : spec.pointers) {
        const Point u = unit(spec.pointer_angle_deg(p));
        PointerLabel lab = PointerLabel::from_tip_tail(c + (p.length_ratio * R) * u, c - (p.tail_ratio * R) * u);
        lab.value = spec.pointer_value(p);
        lab.out_of_range = p.out_of_range;
        meter.pointers.push_back(lab);
    }
    meter.scale = MeterTemplate{meter.bbox, spec.scale_points(), spec.tick_values, {}};

    Canvas cv(spec.image_width, spec.image_height, spec.background_gray);
    const double rim = std::max(1.5, 0.035 * R);
    cv.disc(c, R, gray(spec.face_gray));
    cv.ring(c, R - rim / 2, rim, gray(0.18));

    const std::size_t e = spec.tick_values.size();
    const double span = spec.arc_end_deg - spec.arc_start_deg;
    const double outer = 1.0 - rim / R - 0.03;
    const double major_w = std::max(1.2, 0.022 * R);
    const double inner_minor = spec.scale_radius_ratio + 0.45 * (outer - spec.scale_radius_ratio);
    for (std::size_t i = 0; i < e; ++i) {
        const double a = spec.arc_start_deg + span * static_cast<double>(i) / static_cast<double>(e - 1);
        cv.segment(c + (spec.scale_radius_ratio * R) * unit(a), c + (outer * R) * unit(a), major_w, gray(0.12));
        if (i + 1 == e) continue;
        for (int m = 1; m <= spec.minor_ticks; ++m) {
            const double am = a + span / static_cast<double>(e - 1) * m / (spec.minor_ticks + 1.0);
            cv.segment(c + (inner_minor * R) * unit(am), c + (outer * R) * unit(am), 0.6 * major_w, gray(0.25));
        }
    }

    double cap = 0.05 * R;
    for (std::size_t k = 0; k < spec.pointers.size(); ++k) {
        const PointerSpec& p = spec.pointers[k];
        const PointerLabel& lab = meter.pointers[k];
        const Point u = unit(spec.pointer_angle_deg(p));
        const Point n{-u.y, u.x};
        const double hw = p.width / 2;
        // Constant width from the tail to the spindle, then tapering to the tip apex.
        const std::vector<Point> poly{lab.tail - hw * n, c - hw * n, lab.tip, c + hw * n, lab.tail + hw * n};
        const std::array<double, 3> col{p.color[0] / 255.0, p.color[1] / 255.0, p.color[2] / 255.0};
        cv.convex_polygon(poly, col);
        cap = std::max(cap, 0.8 * p.width);
    }
    cv.disc(c, cap, gray(0.1));

    for (std::size_t i = 0; i < cv.px.size(); ++i) cv.px[i] *= spec.tint[i % 3];

    // Degradations: pixels only.
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const Degradation& d = spec.degradation;
    for (double& v : cv.px) v *= d.brightness;
    if (d.glare) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double ga = 2 * std::numbers::pi * u01(rng);
        const Point g = c + (0.6 * R * std::sqrt(u01(rng))) * Point{std::cos(ga), std::sin(ga)};
        const double s = R * (0.25 + 0.3 * u01(rng));
        const double amp = 0.3 + 0.3 * u01(rng);
        for (int y = 0; y < cv.h; ++y)
            for (int x = 0; x < cv.w; ++x) {
                const double dd = (x - g.x) * (x - g.x) + (y - g.y) * (y - g.y);
                const double add = amp * std::exp(-dd / (2 * s * s));
                for (int ch = 0; ch < 3; ++ch) cv.at(x, y, ch) += add;
            }
    }
    if (d.blur_radius > 0.0) gaussian_blur(cv, d.blur_radius);
    if (d.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, d.noise_std);
        for (double& v : cv.px) v += noise(rng);
    }

    RenderedDial out;
    out.image = Image(spec.image_width, spec.image_height);
    for (std::size_t i = 0; i < cv.px.size(); ++i)
        out.image.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * clamp01(cv.px[i])));
    out.record.width = spec.image_width;
    out.record.height = spec.image_height;
    out.record.hard = d.is_hard();
    out.record.meters.push_back(std::move(meter));
    return out;
}

DialSpec sample_spec(std::mt19937_64& rng, const SampleRanges& r) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    DialSpec s;
    s.radius = uni(r.radius_min, r.radius_max);
    const double ml = uni(r.margin_min, r.margin_max), mr = uni(r.margin_min, r.margin_max);
    const double mt = uni(r.margin_min, r.margin_max), mb = uni(r.margin_min, r.margin_max);
    s.image_width = static_cast<int>(std::ceil(ml + 2 * s.radius + mr));
    s.image_height = static_cast<int>(std::ceil(mt + 2 * s.radius + mb));
    s.center = {ml + s.radius, mt + s.radius};

    const int ticks = std::uniform_int_distribution<int>(r.ticks_min, r.ticks_max)(rng);
    const double span = uni(r.arc_span_min_deg, r.arc_span_max_deg);
    s.arc_start_deg = 90.0 + (360.0 - span) / 2;
    s.arc_end_deg = s.arc_start_deg + span;
    static constexpr double kFullScale[] = {1, 1.6, 2.5, 4, 6, 10, 16, 25, 40, 60, 100, 160, 250};
    const double full = kFullScale[std::uniform_int_distribution<std::size_t>(0, std::size(kFullScale) - 1)(rng)];
    s.tick_values.clear();
    for (int i = 0; i < ticks; ++i) s.tick_values.push_back(full * i / (ticks - 1.0));
    s.minor_ticks = std::uniform_int_distribution<int>(0, 4)(rng);
    s.scale_radius_ratio = uni(0.82, 0.88);

    const int n_pointers = u01(rng) < r.two_pointer_fraction ? 2 : 1;
    s.pointers.clear();
    for (int k = 0; k < n_pointers; ++k) {
        PointerSpec p;
        if (u01(rng) < r.out_of_range_fraction) {
            p.out_of_range = true;
            p.angle_deg = uni(s.arc_end_deg, s.arc_start_deg + 360.0);
        } else {
            p.angle_deg = uni(s.arc_start_deg, s.arc_end_deg);
        }
        p.length_ratio = uni(r.length_ratio_min, r.length_ratio_max);
        p.tail_ratio = uni(0.08, 0.25);
        p.width = std::max(1.5, uni(0.035, 0.07) * s.radius);
        if (u01(rng) < 0.3) {
            p.color = {static_cast<std::uint8_t>(uni(170, 220)), static_cast<std::uint8_t>(uni(10, 40)),
                       static_cast<std::uint8_t>(uni(10, 40))};
        } else {
            const auto g = static_cast<std::uint8_t>(uni(10, 50));
            p.color = {g, g, g};
        }
        s.pointers.push_back(p);
    }

    s.face_gray = uni(0.75, 0.98);
    s.background_gray = uni(0.1, 0.7);
    for (double& t : s.tint) t = uni(0.85, 1.0);
    Degradation& d = s.degradation;
    d.brightness = uni(r.brightness_min, r.brightness_max);
    if (u01(rng) < r.blur_fraction) d.blur_radius = uni(0.5, r.blur_max);
    if (u01(rng) < r.noise_fraction) d.noise_std = uni(0.01, r.noise_max);
    d.glare = u01(rng) < r.glare_fraction;
    s.seed = rng();
    return s;
}

MeterTemplate canonical_template(const DialSpec& spec, double template_radius) {
    MeterTemplate t;
    t.bbox = {0.0, 0.0, 2 * template_radius, 2 * template_radius};
    const double k = template_radius / spec.radius;
    for (const Point& p : spec.scale_points())
        t.scale_points.push_back(Point{template_radius, template_radius} + k * (p - spec.center));
    t.scale_values = spec.tick_values;
    return t;
}

DatasetSplit split_dataset(std::span<const bool> hard_flags, const SplitRatios& ratios, std::uint64_t seed,
                           double hard_quota) {
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
        throw std::invalid_argument("split ratios must be non-negative");
    if (std::abs(ratios.train + ratios.val + ratios.test - ratios.total) > 1e-9 || !(ratios.total > 0))
        throw std::invalid_argument("split ratios do not sum to their total");
    if (hard_quota < 0.0 || hard_quota > 1.0) throw std::invalid_argument("hard quota must lie in [0, 1]");

    const std::size_t n = hard_flags.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.test / ratios.total));
    const auto n_val = std::min(
        n - n_test, static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.val / ratios.total)));

    DatasetSplit out;
    std::vector<char> used(n, 0);
    const auto want_hard = static_cast<std::size_t>(std::ceil(hard_quota * static_cast<double>(n_test) - 1e-9));
    auto take = [&](bool want, std::size_t limit) {
        for (std::size_t i : order) {
            if (out.test.size() >= limit) break;
            if (!used[i] && hard_flags[i] == want) {
                used[i] = 1;
                out.test.push_back(i);
            }
        }
    };
    if (want_hard > 0) {
        take(true, want_hard);
        take(false, n_test);
    }
    // Plain fill (also covers a shortage of either kind).
    for (std::size_t i : order) {
        if (out.test.size() >= n_test) break;
        if (!used[i]) {
            used[i] = 1;
            out.test.push_back(i);
        }
    }
    for (std::size_t i : order) {
        if (used[i]) continue;
        (out.val.size() < n_val ? out.val : out.train).push_back(i);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace vdn
