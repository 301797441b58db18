#include "vdn/ops.hpp"

#include "vdn/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>

namespace vdn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

struct Geometry {
    std::size_t channels, height, width;   // spatial side the kernel slides over
    std::size_t out_h, out_w;              // grid of kernel placements
    std::size_t kh, kw, stride, pad;
    std::size_t rows() const { return channels * kh * kw; }
    std::size_t cols() const { return out_h * out_w; }
};

// col[(c*kh + i)*kw + j][oy*out_w + ox] = img[c][oy*stride - pad + i][ox*stride - pad + j]
void im2col(const double* img, const Geometry& g, double* col) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
    for (std::size_t c = 0; c < g.channels; ++c) {
        const double* plane = img + c * g.height * g.width;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                double* row = col + ((c * g.kh + i) * g.kw + j) * g.cols();
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    double* dst = row + oy * g.out_w;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + g.out_w, 0.0);
                        continue;
                    }
                    const double* src = plane + iy * W;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        dst[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates into img (not cleared).
void col2im(const double* col, const Geometry& g, double* img) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
    for (std::size_t c = 0; c < g.channels; ++c) {
        double* plane = img + c * g.height * g.width;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const double* row = col + ((c * g.kh + i) * g.kw + j) * g.cols();
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= H) continue;
                    const double* src = row + oy * g.out_w;
                    double* dst = plane + iy * W;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
}

struct ConvShapes {
    std::size_t n, in_ch, out_ch, in_h, in_w, out_h, out_w, kh, kw;
};

ConvShapes check_conv(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                      std::size_t pad) {
    require_rank(x, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    require_rank(bias, 1, "conv2d bias");
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    if (x.dim(1) != kernel.dim(1))
        throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
                         std::to_string(kernel.dim(1)));
    if (bias.dim(0) != kernel.dim(0)) throw ShapeError("conv2d: bias length must equal out channels");
    return {x.dim(0),
            x.dim(1),
            kernel.dim(0),
            x.dim(2),
            x.dim(3),
            conv_out_extent(x.dim(2), kernel.dim(2), stride, pad),
            conv_out_extent(x.dim(3), kernel.dim(3), stride, pad),
            kernel.dim(2),
            kernel.dim(3)};
}

ConvShapes check_deconv(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t pad) {
    require_rank(x, 4, "deconv2d input");
    require_rank(kernel, 4, "deconv2d kernel");
    require_rank(bias, 1, "deconv2d bias");
    if (stride == 0) throw ShapeError("deconv2d: stride must be positive");
    if (x.dim(1) != kernel.dim(0))
        throw ShapeError("deconv2d: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
                         std::to_string(kernel.dim(0)));
    if (bias.dim(0) != kernel.dim(1)) throw ShapeError("deconv2d: bias length must equal out channels");
    return {x.dim(0),
            x.dim(1),
            kernel.dim(1),
            x.dim(2),
            x.dim(3),
            deconv_out_extent(x.dim(2), kernel.dim(2), stride, pad),
            deconv_out_extent(x.dim(3), kernel.dim(3), stride, pad),
            kernel.dim(2),
            kernel.dim(3)};
}

// Geometry of the conv whose sliding grid is `grid_h x grid_w` over an image of `img_h x img_w`.
Geometry conv_geometry(std::size_t ch, std::size_t img_h, std::size_t img_w, std::size_t grid_h,
                       std::size_t grid_w, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
    return {ch, img_h, img_w, grid_h, grid_w, kh, kw, stride, pad};
}

Tensor conv_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                    std::size_t pad, std::vector<double>* cols_out) {
    const ConvShapes s = check_conv(x, kernel, bias, stride, pad);
    const Geometry g = conv_geometry(s.in_ch, s.in_h, s.in_w, s.out_h, s.out_w, s.kh, s.kw, stride, pad);
    Tensor out({s.n, s.out_ch, s.out_h, s.out_w});
    const ConstMatMap w(kernel.data(), static_cast<Eigen::Index>(s.out_ch), static_cast<Eigen::Index>(g.rows()));
    std::vector<double> local;
    std::vector<double>& cols = cols_out ? *cols_out : local;
    cols.resize((cols_out ? s.n : 1) * g.rows() * g.cols());
    for (std::size_t n = 0; n < s.n; ++n) {
        double* col = cols.data() + (cols_out ? n : 0) * g.rows() * g.cols();
        im2col(x.data() + n * s.in_ch * s.in_h * s.in_w, g, col);
        MatMap o(out.data() + n * s.out_ch * g.cols(), static_cast<Eigen::Index>(s.out_ch),
                 static_cast<Eigen::Index>(g.cols()));
        o.noalias() = w * ConstMatMap(col, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
        for (std::size_t c = 0; c < s.out_ch; ++c) o.row(static_cast<Eigen::Index>(c)).array() += bias[c];
    }
    return out;
}

Tensor deconv_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                      std::size_t pad) {
    const ConvShapes s = check_deconv(x, kernel, bias, stride, pad);
    // The deconvolution scatters over the output image with the input as the kernel grid.
    const Geometry g = conv_geometry(s.out_ch, s.out_h, s.out_w, s.in_h, s.in_w, s.kh, s.kw, stride, pad);
    Tensor out({s.n, s.out_ch, s.out_h, s.out_w});
    const ConstMatMap k(kernel.data(), static_cast<Eigen::Index>(s.in_ch), static_cast<Eigen::Index>(g.rows()));
    RowMatrix col(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    for (std::size_t n = 0; n < s.n; ++n) {
        const ConstMatMap xn(x.data() + n * s.in_ch * g.cols(), static_cast<Eigen::Index>(s.in_ch),
                             static_cast<Eigen::Index>(g.cols()));
        col.noalias() = k.transpose() * xn;
        double* o = out.data() + n * s.out_ch * s.out_h * s.out_w;
        col2im(col.data(), g, o);
        for (std::size_t c = 0; c < s.out_ch; ++c) {
            double* plane = o + c * s.out_h * s.out_w;
            for (std::size_t i = 0; i < s.out_h * s.out_w; ++i) plane[i] += bias[c];
        }
    }
    return out;
}

void accumulate_bias_grad(const Tensor& g_out, Tensor& g_bias) {
    const std::size_t n = g_out.dim(0), c = g_out.dim(1), hw = g_out.dim(2) * g_out.dim(3);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const double* p = g_out.data() + (b * c + k) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += p[i];
            g_bias[k] += s;
        }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw ShapeError("stride must be positive");
    if (in + 2 * pad < k)
        throw ShapeError("kernel extent " + std::to_string(k) + " exceeds padded input " +
                         std::to_string(in + 2 * pad));
    return (in + 2 * pad - k) / stride + 1;
}

std::size_t deconv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw ShapeError("stride must be positive");
    const std::size_t full = (in - 1) * stride + k;
    if (full <= 2 * pad) throw ShapeError("deconvolution output extent would be empty");
    return full - 2 * pad;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    return conv_forward(x, p.kernel, p.bias, p.stride, p.padding, nullptr);
}

Tensor deconv2d(const Tensor& x, const ConvParams& p) {
    return deconv_forward(x, p.kernel, p.bias, p.stride, p.padding);
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding) {
    const ConvShapes s = check_conv(x.value(), kernel.value(), bias.value(), stride, padding);
    auto cols = std::make_shared<std::vector<double>>();
    Tensor out = conv_forward(x.value(), kernel.value(), bias.value(), stride, padding,
                              kernel.requires_grad() ? cols.get() : nullptr);
    return Var::make(std::move(out), {x, kernel, bias}, [s, stride, padding, cols](detail::Node& self) {
        const Tensor& gout = self.grad;
        const detail::Node& x_node = *self.parents[0];
        const detail::Node& k_node = *self.parents[1];
        detail::Node& b_node = *self.parents[2];
        const Geometry g = conv_geometry(s.in_ch, s.in_h, s.in_w, s.out_h, s.out_w, s.kh, s.kw, stride, padding);
        const ConstMatMap w(k_node.value.data(), static_cast<Eigen::Index>(s.out_ch),
                            static_cast<Eigen::Index>(g.rows()));
        if (b_node.requires_grad) accumulate_bias_grad(gout, b_node.grad_buffer());
        if (k_node.requires_grad) {
            MatMap gw(self.parents[1]->grad_buffer().data(), static_cast<Eigen::Index>(s.out_ch),
                      static_cast<Eigen::Index>(g.rows()));
            for (std::size_t n = 0; n < s.n; ++n) {
                const ConstMatMap go(gout.data() + n * s.out_ch * g.cols(), static_cast<Eigen::Index>(s.out_ch),
                                     static_cast<Eigen::Index>(g.cols()));
                const ConstMatMap col(cols->data() + n * g.rows() * g.cols(), static_cast<Eigen::Index>(g.rows()),
                                      static_cast<Eigen::Index>(g.cols()));
                gw.noalias() += go * col.transpose();
            }
        }
        if (x_node.requires_grad) {
            Tensor& gx = self.parents[0]->grad_buffer();
            RowMatrix dcol(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
            for (std::size_t n = 0; n < s.n; ++n) {
                const ConstMatMap go(gout.data() + n * s.out_ch * g.cols(), static_cast<Eigen::Index>(s.out_ch),
                                     static_cast<Eigen::Index>(g.cols()));
                dcol.noalias() = w.transpose() * go;
                col2im(dcol.data(), g, gx.data() + n * s.in_ch * s.in_h * s.in_w);
            }
        }
    });
}

Var deconv2d(const Var& x, const Var& kernel, const Var& bias, std::size_t stride, std::size_t padding) {
    const ConvShapes s = check_deconv(x.value(), kernel.value(), bias.value(), stride, padding);
    Tensor out = deconv_forward(x.value(), kernel.value(), bias.value(), stride, padding);
    return Var::make(std::move(out), {x, kernel, bias}, [s, stride, padding](detail::Node& self) {
        const Tensor& gout = self.grad;
        const detail::Node& x_node = *self.parents[0];
        const detail::Node& k_node = *self.parents[1];
        detail::Node& b_node = *self.parents[2];
        const Geometry g = conv_geometry(s.out_ch, s.out_h, s.out_w, s.in_h, s.in_w, s.kh, s.kw, stride, padding);
        if (b_node.requires_grad) accumulate_bias_grad(gout, b_node.grad_buffer());
        if (!x_node.requires_grad && !k_node.requires_grad) return;
        const ConstMatMap k(k_node.value.data(), static_cast<Eigen::Index>(s.in_ch),
                            static_cast<Eigen::Index>(g.rows()));
        RowMatrix dcol(static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
        for (std::size_t n = 0; n < s.n; ++n) {
            im2col(gout.data() + n * s.out_ch * s.out_h * s.out_w, g, dcol.data());
            if (x_node.requires_grad) {
                MatMap gx(self.parents[0]->grad_buffer().data() + n * s.in_ch * g.cols(),
                          static_cast<Eigen::Index>(s.in_ch), static_cast<Eigen::Index>(g.cols()));
                gx.noalias() += k * dcol;
            }
            if (k_node.requires_grad) {
                const ConstMatMap xn(x_node.value.data() + n * s.in_ch * g.cols(), static_cast<Eigen::Index>(s.in_ch),
                                     static_cast<Eigen::Index>(g.cols()));
                MatMap gk(self.parents[1]->grad_buffer().data(), static_cast<Eigen::Index>(s.in_ch),
                          static_cast<Eigen::Index>(g.rows()));
                gk.noalias() += xn * dcol.transpose();
            }
        }
    });
}

Var relu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return Var::make(std::move(out), {x}, [](detail::Node& self) {
        detail::Node& in = *self.parents[0];
        Tensor& gx = in.grad_buffer();
        for (std::size_t i = 0; i < gx.numel(); ++i)
            if (in.value[i] > 0.0) gx[i] += self.grad[i];
    });
}

Var tanh_act(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.values()) v = std::tanh(v);
    return Var::make(std::move(out), {x}, [](detail::Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            const double y = self.value[i];
            gx[i] += self.grad[i] * (1.0 - y * y);
        }
    });
}

Var channel_affine(const Var& x, const Var& scale_v, const Var& shift_v) {
    const Tensor& xv = x.value();
    require_rank(xv, 4, "channel_affine input");
    const std::size_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
    if (scale_v.shape() != Shape{c} || shift_v.shape() != Shape{c})
        throw ShapeError("channel_affine: scale/shift must have shape [" + std::to_string(c) + "]");
    Tensor out(xv.shape());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            const double a = scale_v.value()[k], s = shift_v.value()[k];
            const double* src = xv.data() + (b * c + k) * hw;
            double* dst = out.data() + (b * c + k) * hw;
            for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * a + s;
        }
    return Var::make(std::move(out), {x, scale_v, shift_v}, [n, c, hw](detail::Node& self) {
        detail::Node& xn = *self.parents[0];
        detail::Node& an = *self.parents[1];
        detail::Node& sn = *self.parents[2];
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t k = 0; k < c; ++k) {
                const double* g = self.grad.data() + (b * c + k) * hw;
                const double* xv = xn.value.data() + (b * c + k) * hw;
                if (xn.requires_grad) {
                    double* gx = xn.grad_buffer().data() + (b * c + k) * hw;
                    const double a = an.value[k];
                    for (std::size_t i = 0; i < hw; ++i) gx[i] += g[i] * a;
                }
                if (an.requires_grad) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) acc += g[i] * xv[i];
                    an.grad_buffer()[k] += acc;
                }
                if (sn.requires_grad) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) acc += g[i];
                    sn.grad_buffer()[k] += acc;
                }
            }
    });
}

Var add(const Var& a, const Var& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
    return Var::make(std::move(out), {a, b}, [](detail::Node& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            Tensor& g = p->grad_buffer();
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
    });
}

Var scale(const Var& x, double factor) {
    Tensor out = x.value();
    for (double& v : out.values()) v *= factor;
    return Var::make(std::move(out), {x}, [factor](detail::Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += factor * self.grad[i];
    });
}

double mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("mse: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
}

Var mse(const Var& pred, const Var& target) {
    const double loss = mse(pred.value(), target.value());
    return Var::make(Tensor({1}, loss), {pred, target}, [](detail::Node& self) {
        detail::Node& p = *self.parents[0];
        detail::Node& t = *self.parents[1];
        const double k = 2.0 * self.grad[0] / static_cast<double>(p.value.numel());
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double d = k * (p.value[i] - t.value[i]);
            if (p.requires_grad) p.grad_buffer()[i] += d;
            if (t.requires_grad) t.grad_buffer()[i] -= d;
        }
    });
}

}  // namespace vdn
