#include "msap/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "msap/ops.hpp"

namespace msap {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tensor record(const char* kind, Tensor result, std::vector<Tensor> operands, BackwardRule rule) {
    Tape* tape = common_tape(operands, kind);
    if (!tape) return result;
    return tape->record(kind, std::move(result), std::move(operands), std::move(rule));
}

void require_rank3(const Tensor& x, const std::string& what) {
    if (x.rank() != 3) throw ShapeError(what + ": expected [C,H,W] input, got " + shape_str(x.shape()));
}

struct ConvGeometry {
    std::size_t cin, h, w, kh, kw, stride, pad, ho, wo;
    std::size_t rows() const { return cin * kh * kw; }
    std::size_t cols() const { return ho * wo; }
};

void im2col(std::span<const double> x, const ConvGeometry& g, std::vector<double>& cols) {
    cols.assign(g.rows() * g.cols(), 0.0);
    for (std::size_t c = 0; c < g.cin; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                double* row = cols.data() + ((c * g.kh + ky) * g.kw + kx) * g.cols();
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const double* src = x.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    double* dst = row + oy * g.wo;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ox] = src[ix];
                    }
                }
            }
        }
    }
}

void col2im(std::span<const double> cols, const ConvGeometry& g, std::span<double> dx) {
    for (std::size_t c = 0; c < g.cin; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* row = cols.data() + ((c * g.kh + ky) * g.kw + kx) * g.cols();
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    double* dst = dx.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const double* src = row + oy * g.wo;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

// Per-axis bilinear taps for one output coordinate.
struct Tap {
    std::size_t lo, hi;
    double w_hi;
};

std::vector<Tap> bilinear_taps(std::size_t in_extent, std::size_t factor) {
    std::vector<Tap> taps(in_extent * factor);
    const double max_coord = static_cast<double>(in_extent - 1);
    for (std::size_t d = 0; d < taps.size(); ++d) {
        double src = (static_cast<double>(d) + 0.5) / static_cast<double>(factor) - 0.5;
        src = std::clamp(src, 0.0, max_coord);
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, in_extent - 1);
        taps[d] = Tap{lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

}  // namespace

void Conv2dSpec::validate() const {
    if (in_channels == 0 || out_channels == 0) throw ContractError("conv2d: channel counts must be positive");
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0) throw ContractError("conv2d: kernel extents must be odd");
    if (stride == 0) throw ContractError("conv2d: stride must be positive");
}

std::size_t Conv2dSpec::out_extent(std::size_t extent, std::size_t kernel) const {
    const std::size_t padded = extent + 2 * padding;
    if (padded < kernel) return 0;
    return (padded - kernel) / stride + 1;
}

Conv2dLayer Conv2dLayer::create(ParameterSet& params, std::string path, const Conv2dSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    Conv2dLayer layer;
    layer.spec = spec;
    layer.path = path;
    const std::size_t fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
    layer.weight = params.add(path + ".weight",
                              init_fan_in_uniform({spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}, fan_in, rng));
    layer.bias = params.add(path + ".bias", Tensor::zeros({spec.out_channels}));
    return layer;
}

Tensor Conv2dLayer::operator()(const BoundParameters& bound, const Tensor& x) const {
    return conv2d(x, bound[weight], bound[bias], spec, path);
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dSpec& spec, const std::string& path) {
    spec.validate();
    require_rank3(x, path);
    if (x.dim(0) != spec.in_channels) {
        throw ShapeError(path + ": expected " + std::to_string(spec.in_channels) + " input channels, got " + shape_str(x.shape()));
    }
    const Shape wshape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
    if (weight.shape() != wshape || bias.shape() != Shape{spec.out_channels}) {
        throw ShapeError(path + ": parameter shapes " + shape_str(weight.shape()) + "/" + shape_str(bias.shape()) +
                         " do not match spec " + shape_str(wshape));
    }
    ConvGeometry g{spec.in_channels, x.dim(1), x.dim(2), spec.kernel_h, spec.kernel_w, spec.stride, spec.padding,
                   spec.out_height(x.dim(1)), spec.out_width(x.dim(2))};
    if (g.ho == 0 || g.wo == 0) {
        throw ShapeError(path + ": input " + shape_str(x.shape()) + " too small for kernel and padding");
    }

    auto cols = std::make_shared<std::vector<double>>();
    im2col(x.data(), g, *cols);
    const auto cout = static_cast<Eigen::Index>(spec.out_channels);
    const auto k = static_cast<Eigen::Index>(g.rows());
    const auto n = static_cast<Eigen::Index>(g.cols());
    std::vector<double> out(static_cast<std::size_t>(cout * n));
    MutMap Y(out.data(), cout, n);
    Y.noalias() = ConstMap(weight.data().data(), cout, k) * ConstMap(cols->data(), k, n);
    for (Eigen::Index o = 0; o < cout; ++o) Y.row(o).array() += bias[static_cast<std::size_t>(o)];

    Tensor wv = weight.detach();
    // The column buffer is only needed for the weight gradient.
    if (!weight.requires_grad()) cols.reset();
    return record("conv2d", Tensor({spec.out_channels, g.ho, g.wo}, std::move(out)), {x, weight, bias},
                  [g, wv, cols, cout, k, n](BackwardContext& ctx) {
                      ConstMap G(ctx.grad_output().data(), cout, n);
                      if (ctx.needs(1)) {
                          MutMap dW(ctx.grad_input(1).data(), cout, k);
                          dW.noalias() += G * ConstMap(cols->data(), k, n).transpose();
                      }
                      if (ctx.needs(2)) {
                          auto db = ctx.grad_input(2);
                          // plain loop: Eigen's vectorised sum depends on the row's alignment
                          for (Eigen::Index o = 0; o < cout; ++o) {
                              const double* row = G.data() + o * n;
                              double s = 0.0;
                              for (Eigen::Index j = 0; j < n; ++j) s += row[j];
                              db[static_cast<std::size_t>(o)] += s;
                          }
                      }
                      if (ctx.needs(0)) {
                          std::vector<double> dcols(static_cast<std::size_t>(k * n));
                          MutMap dC(dcols.data(), k, n);
                          dC.noalias() = ConstMap(wv.data().data(), cout, k).transpose() * G;
                          col2im(dcols, g, ctx.grad_input(0));
                      }
                  });
}

Tensor avg_pool2d(const Tensor& x, std::size_t factor) {
    require_rank3(x, "avg_pool2d");
    if (factor == 0 || x.dim(1) % factor != 0 || x.dim(2) % factor != 0) {
        throw ShapeError("avg_pool2d: extents of " + shape_str(x.shape()) + " not divisible by " + std::to_string(factor));
    }
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), h = H / factor, w = W / factor;
    const double inv = 1.0 / static_cast<double>(factor * factor);
    std::vector<double> out(C * h * w, 0.0);
    auto xd = x.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t xx = 0; xx < W; ++xx) out[(c * h + y / factor) * w + xx / factor] += xd[(c * H + y) * W + xx];
    for (auto& v : out) v *= inv;
    return record("avg_pool2d", Tensor({C, h, w}, std::move(out)), {x}, [C, H, W, h, w, factor, inv](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xx = 0; xx < W; ++xx) gi[(c * H + y) * W + xx] += inv * go[(c * h + y / factor) * w + xx / factor];
    });
}

Tensor upsample_bilinear(const Tensor& x, std::size_t factor) {
    require_rank3(x, "upsample_bilinear");
    if (factor == 0) throw ShapeError("upsample_bilinear: factor must be positive");
    const std::size_t C = x.dim(0), h = x.dim(1), w = x.dim(2), H = h * factor, W = w * factor;
    auto ty = std::make_shared<std::vector<Tap>>(bilinear_taps(h, factor));
    auto tx = std::make_shared<std::vector<Tap>>(bilinear_taps(w, factor));
    std::vector<double> out(C * H * W);
    auto xd = x.data();
    for (std::size_t c = 0; c < C; ++c) {
        const double* src = xd.data() + c * h * w;
        for (std::size_t y = 0; y < H; ++y) {
            const Tap& a = (*ty)[y];
            for (std::size_t xx = 0; xx < W; ++xx) {
                const Tap& b = (*tx)[xx];
                const double top = src[a.lo * w + b.lo] * (1.0 - b.w_hi) + src[a.lo * w + b.hi] * b.w_hi;
                const double bot = src[a.hi * w + b.lo] * (1.0 - b.w_hi) + src[a.hi * w + b.hi] * b.w_hi;
                out[(c * H + y) * W + xx] = top * (1.0 - a.w_hi) + bot * a.w_hi;
            }
        }
    }
    return record("upsample_bilinear", Tensor({C, H, W}, std::move(out)), {x}, [C, h, w, H, W, ty, tx](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        for (std::size_t c = 0; c < C; ++c) {
            double* dst = gi.data() + c * h * w;
            for (std::size_t y = 0; y < H; ++y) {
                const Tap& a = (*ty)[y];
                for (std::size_t xx = 0; xx < W; ++xx) {
                    const Tap& b = (*tx)[xx];
                    const double g = go[(c * H + y) * W + xx];
                    dst[a.lo * w + b.lo] += g * (1.0 - a.w_hi) * (1.0 - b.w_hi);
                    dst[a.lo * w + b.hi] += g * (1.0 - a.w_hi) * b.w_hi;
                    dst[a.hi * w + b.lo] += g * a.w_hi * (1.0 - b.w_hi);
                    dst[a.hi * w + b.hi] += g * a.w_hi * b.w_hi;
                }
            }
        }
    });
}

Tensor global_avg_pool(const Tensor& x) {
    require_rank3(x, "global_avg_pool");
    const std::size_t C = x.dim(0), area = x.dim(1) * x.dim(2);
    const double inv = 1.0 / static_cast<double>(area);
    std::vector<double> out(C, 0.0);
    auto xd = x.data();
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < area; ++i) s += xd[c * area + i];
        out[c] = s * inv;
    }
    return record("global_avg_pool", Tensor({C}, std::move(out)), {x}, [C, area, inv](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < area; ++i) gi[c * area + i] += go[c] * inv;
    });
}

LstmLayer LstmLayer::create(ParameterSet& params, std::string path, const LstmSpec& spec, std::mt19937_64& rng) {
    if (spec.input_dim == 0 || spec.hidden_dim == 0) throw ContractError(path + ": LSTM dimensions must be positive");
    LstmLayer layer;
    layer.spec = spec;
    layer.path = path;
    const std::size_t g = 4 * spec.hidden_dim;
    layer.w_input = params.add(path + ".w_input", init_fan_in_uniform({g, spec.input_dim}, spec.input_dim, rng));
    layer.w_hidden = params.add(path + ".w_hidden", init_fan_in_uniform({g, spec.hidden_dim}, spec.hidden_dim, rng));
    layer.bias = params.add(path + ".bias", Tensor::zeros({g}));
    return layer;
}

LstmOutput lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& w_input, const Tensor& w_hidden,
                     const Tensor& bias, const LstmSpec& spec) {
    const std::size_t H = spec.hidden_dim;
    if (x.shape() != Shape{spec.input_dim} || h.shape() != Shape{H} || c.shape() != Shape{H}) {
        throw ShapeError("lstm_cell: x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) + ", c " +
                         shape_str(c.shape()) + " do not match input " + std::to_string(spec.input_dim) + " / hidden " +
                         std::to_string(H));
    }
    if (w_input.shape() != Shape{4 * H, spec.input_dim} || w_hidden.shape() != Shape{4 * H, H} || bias.shape() != Shape{4 * H}) {
        throw ShapeError("lstm_cell: parameter shapes do not match spec");
    }
    const Tensor pre = add(add(matmul(w_input, x), matmul(w_hidden, h)), bias);
    const Tensor in_gate = sigmoid(slice_rows(pre, 0, H));
    const Tensor forget_gate = sigmoid(slice_rows(pre, H, H));
    const Tensor candidate = tanh(slice_rows(pre, 2 * H, H));
    const Tensor out_gate = sigmoid(slice_rows(pre, 3 * H, H));
    Tensor c_next = add(mul(forget_gate, c), mul(in_gate, candidate));
    Tensor h_next = mul(out_gate, tanh(c_next));
    return {std::move(h_next), std::move(c_next)};
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2 || x.shape() != Shape{weight.dim(1)} || bias.shape() != Shape{weight.dim(0)}) {
        throw ShapeError("linear: x " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) + ", bias " +
                         shape_str(bias.shape()) + " do not conform");
    }
    return add(matmul(weight, x), bias);
}

LinearLayer LinearLayer::create(ParameterSet& params, std::string path, std::size_t in, std::size_t out, std::mt19937_64& rng) {
    LinearLayer layer;
    layer.path = path;
    layer.weight = params.add(path + ".weight", init_fan_in_uniform({out, in}, in, rng));
    layer.bias = params.add(path + ".bias", Tensor::zeros({out}));
    return layer;
}

Tensor LinearLayer::operator()(const BoundParameters& bound, const Tensor& x) const {
    return linear(x, bound[weight], bound[bias]);
}

Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = unit(rng) < p ? 0.0 : keep_scale;
    return mul(x, Tensor(x.shape(), std::move(mask)));
}

std::vector<double> softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
    for (auto& v : p) v /= z;
    return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 1) throw ShapeError("softmax_cross_entropy: logits must be a vector, got " + shape_str(logits.shape()));
    if (label >= logits.size()) {
        throw ContractError("softmax_cross_entropy: label " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
    }
    auto l = logits.data();
    const double mx = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - mx);
    const double loss = std::log(z) + mx - l[label];
    auto probs = std::make_shared<std::vector<double>>(softmax(l));
    return record("softmax_cross_entropy", Tensor::scalar(loss), {logits}, [probs, label](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        const double g = ctx.grad_output()[0];
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g * ((*probs)[i] - (i == label ? 1.0 : 0.0));
    });
}

}  // namespace msap
