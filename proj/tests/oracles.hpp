// Naive reference implementations used as test oracles. They follow the
// defining formulas directly and are deliberately slow.
#pragma once

#include "vdn/decode.hpp"
#include "vdn/metrics.hpp"
#include "vdn/targets.hpp"
#include "vdn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using vdn::Tensor;

// out[n,o,y,x] = b[o] + sum_{i,ky,kx} in[n,i,y*s-p+ky,x*s-p+kx] K[o,i,ky,kx]
inline Tensor conv2d(const Tensor& in, const Tensor& K, const Tensor& b, std::size_t s, std::size_t p) {
    const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const std::size_t O = K.dim(0), kh = K.dim(2), kw = K.dim(3);
    const std::size_t oh = (H + 2 * p - kh) / s + 1, ow = (W + 2 * p - kw) / s + 1;
    Tensor out({N, O, oh, ow});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) {
                    double acc = b[o];
                    for (std::size_t i = 0; i < C; ++i)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long iy = static_cast<long>(y * s + ky) - static_cast<long>(p);
                                const long ix = static_cast<long>(x * s + kx) - static_cast<long>(p);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                                acc += in.at(n, i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                                       K.at(o, i, ky, kx);
                            }
                    out.at(n, o, y, x) = acc;
                }
    return out;
}

// Scatter form: every input pixel stamps its kernel into the output.
inline Tensor deconv2d(const Tensor& in, const Tensor& K, const Tensor& b, std::size_t s, std::size_t p) {
    const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const std::size_t O = K.dim(1), kh = K.dim(2), kw = K.dim(3);
    const std::size_t oh = (H - 1) * s + kh - 2 * p, ow = (W - 1) * s + kw - 2 * p;
    Tensor out({N, O, oh, ow});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) out.at(n, o, y, x) = b[o];
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    for (std::size_t o = 0; o < O; ++o)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long oy = static_cast<long>(y * s + ky) - static_cast<long>(p);
                                const long ox = static_cast<long>(x * s + kx) - static_cast<long>(p);
                                if (oy < 0 || ox < 0 || oy >= static_cast<long>(oh) || ox >= static_cast<long>(ow)) continue;
                                out.at(n, o, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) +=
                                    in.at(n, i, y, x) * K.at(i, o, ky, kx);
                            }
    return out;
}

// H(rho) = exp(-min_k |rho - lambda p_k|^2 / (2 sigma^2))
inline Tensor heatmap(const std::vector<vdn::GroundTruthVector>& v, std::size_t w, std::size_t h, double lambda,
                      double sigma) {
    Tensor out({h, w});
    if (v.empty()) return out;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& g : v) {
                const double dx = static_cast<double>(x) - lambda * g.x, dy = static_cast<double>(y) - lambda * g.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            out[y * w + x] = std::exp(-best / (2 * sigma * sigma));
        }
    return out;
}

// Per pixel: sum of unit vectors over covering discs divided by the cover count.
inline Tensor scalarmap(const std::vector<vdn::GroundTruthVector>& v, std::size_t w, std::size_t h, double lambda,
                        double sigma) {
    Tensor out({2, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double sa = 0, sb = 0;
            int count = 0;
            for (const auto& g : v) {
                const double dx = static_cast<double>(x) - lambda * g.x, dy = static_cast<double>(y) - lambda * g.y;
                if (std::sqrt(dx * dx + dy * dy) <= 3 * sigma + 1e-12 * sigma) {
                    sa += g.alpha;
                    sb += g.beta;
                    ++count;
                }
            }
            if (count > 0) {
                out[y * w + x] = sa / count;
                out[h * w + y * w + x] = sb / count;
            }
        }
    return out;
}

struct OraclePeak {
    std::size_t x, y;
    double c;
};

inline std::vector<OraclePeak> peaks(const Tensor& hm, std::size_t w, std::size_t h, double thr, double radius) {
    std::vector<OraclePeak> cand;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double c = hm[y * w + x];
            if (c < thr) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dx && !dy) continue;
                    const long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
                    if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
                    if (!(hm[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)] < c)) is_max = false;
                }
            if (is_max) cand.push_back({x, y, c});
        }
    std::vector<OraclePeak> kept;
    // Repeatedly take the strongest remaining candidate (earliest in row-major order on ties).
    std::vector<bool> gone(cand.size(), false);
    for (;;) {
        std::size_t best = cand.size();
        for (std::size_t i = 0; i < cand.size(); ++i)
            if (!gone[i] && (best == cand.size() || cand[i].c > cand[best].c)) best = i;
        if (best == cand.size()) break;
        gone[best] = true;
        bool suppressed = false;
        for (const auto& k : kept) {
            const double dx = static_cast<double>(k.x) - static_cast<double>(cand[best].x);
            const double dy = static_cast<double>(k.y) - static_cast<double>(cand[best].y);
            if (dx * dx + dy * dy <= radius * radius) suppressed = true;
        }
        if (!suppressed) kept.push_back(cand[best]);
    }
    return kept;
}

// Per-image greedy match + COCO 101-point AP straight from the definitions.
struct Ranked {
    double conf;
    double sim;  // -1 when unmatched
    std::size_t order;
};

inline double interpolated_ap(std::vector<Ranked> r, std::size_t num_gt, double thr, double* recall_out) {
    std::sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) {
        return a.conf != b.conf ? a.conf > b.conf : a.order < b.order;
    });
    std::vector<double> prec, rec;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i].sim >= thr) ++tp;
        prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    }
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double level = k / 100.0;
        double best = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i)
            if (rec[i] >= level) best = std::max(best, prec[i]);
        sum += best;
    }
    if (recall_out) *recall_out = rec.empty() ? 0.0 : rec.back();
    return sum / 101.0;
}

inline std::vector<Ranked> greedy(const std::vector<vdn::EvalInstance>& insts, const vdn::MetricConfig& cfg,
                                  vdn::SimilarityKind kind, std::size_t* num_gt) {
    std::vector<Ranked> out;
    *num_gt = 0;
    std::size_t order = 0;
    for (const auto& inst : insts) {
        *num_gt += inst.gt.size();
        std::vector<std::size_t> idx(inst.det.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return inst.det[a].confidence != inst.det[b].confidence ? inst.det[a].confidence > inst.det[b].confidence
                                                                    : a < b;
        });
        std::vector<bool> used(inst.gt.size(), false);
        for (std::size_t d : idx) {
            double best = -1.0;
            std::size_t bg = inst.gt.size();
            for (std::size_t g = 0; g < inst.gt.size(); ++g) {
                if (used[g]) continue;
                double s;
                const auto& G = inst.gt[g];
                const auto& D = inst.det[d];
                if (kind == vdn::SimilarityKind::oks) {
                    const double d2 = (D.x - G.x) * (D.x - G.x) + (D.y - G.y) * (D.y - G.y);
                    s = std::exp(-d2 / (2 * inst.bbox_area * cfg.tau * cfg.tau));
                } else {
                    const double c = std::clamp((D.alpha * G.alpha + D.beta * G.beta) /
                                                    (std::hypot(D.alpha, D.beta) * std::hypot(G.alpha, G.beta)),
                                                -1.0, 1.0);
                    const double th = std::acos(c);
                    const double sc = std::sqrt(inst.bbox_area) / inst.patch_side * cfg.kappa;
                    s = std::exp(-th * th / (2 * sc * sc));
                }
                if (s > best) {
                    best = s;
                    bg = g;
                }
            }
            if (bg < inst.gt.size()) used[bg] = true;
            out.push_back({inst.det[d].confidence, bg < inst.gt.size() ? best : -1.0, order++});
        }
    }
    return out;
}

}  // namespace oracle
