#include "msap/ops.hpp"

#include <Eigen/Core>
#include <cmath>

namespace msap {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

enum class Broadcast { none, left_scalar, right_scalar };

Broadcast check_elementwise(Primitive kind, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::none;
    if (b.size() == 1) return Broadcast::right_scalar;
    if (a.size() == 1) return Broadcast::left_scalar;
    throw ShapeError(std::string(to_string(kind)) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not conform");
}

// Accumulates an output-shaped gradient into an operand that may have been
// broadcast from a single element.
void accumulate(std::span<double> dst, std::span<const double> src, double factor = 1.0) {
    if (dst.empty()) return;
    if (dst.size() == src.size()) {
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += factor * src[i];
    } else {
        double s = 0.0;
        for (double v : src) s += v;
        dst[0] += factor * s;
    }
}

template <class F>
Tensor binary_forward(Primitive kind, const Tensor& a, const Tensor& b, F f, Broadcast& bc) {
    bc = check_elementwise(kind, a, b);
    const Shape out_shape = bc == Broadcast::left_scalar ? b.shape() : a.shape();
    std::vector<double> out(numel(out_shape));
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = bc == Broadcast::left_scalar ? da[0] : da[i];
        const double y = bc == Broadcast::right_scalar ? db[0] : db[i];
        out[i] = f(x, y);
    }
    return Tensor(out_shape, std::move(out));
}

Tensor record(const char* kind, Tensor result, std::vector<Tensor> operands, BackwardRule rule) {
    Tape* tape = common_tape(operands, kind);
    if (!tape) return result;
    return tape->record(kind, std::move(result), std::move(operands), std::move(rule));
}

template <class F>
Tensor unary(const char*, const Tensor& a, F f) {
    std::vector<double> out(a.size());
    auto da = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[i]);
    return Tensor(a.shape(), std::move(out));
}

}  // namespace

std::string_view to_string(Primitive kind) {
    switch (kind) {
        case Primitive::add: return "add";
        case Primitive::sub: return "sub";
        case Primitive::mul: return "mul";
        case Primitive::scale: return "scale";
        case Primitive::relu: return "relu";
        case Primitive::sigmoid: return "sigmoid";
        case Primitive::tanh: return "tanh";
        case Primitive::matmul: return "matmul";
        case Primitive::sum: return "sum";
        case Primitive::mean: return "mean";
    }
    return "unknown";
}

Tensor apply_primitive(Primitive kind, std::span<const Tensor> operands) {
    const std::size_t arity = [&] {
        switch (kind) {
            case Primitive::add:
            case Primitive::sub:
            case Primitive::mul:
            case Primitive::scale:
            case Primitive::matmul: return std::size_t{2};
            default: return std::size_t{1};
        }
    }();
    if (operands.size() != arity) {
        throw ContractError(std::string(to_string(kind)) + " takes " + std::to_string(arity) + " operand(s), got " +
                            std::to_string(operands.size()));
    }
    switch (kind) {
        case Primitive::add: return add(operands[0], operands[1]);
        case Primitive::sub: return sub(operands[0], operands[1]);
        case Primitive::mul: return mul(operands[0], operands[1]);
        case Primitive::scale:
            if (operands[1].size() != 1) {
                throw ShapeError("scale: factor must have one element, got " + shape_str(operands[1].shape()));
            }
            return scale(operands[0], operands[1].item());
        case Primitive::relu: return relu(operands[0]);
        case Primitive::sigmoid: return sigmoid(operands[0]);
        case Primitive::tanh: return tanh(operands[0]);
        case Primitive::matmul: return matmul(operands[0], operands[1]);
        case Primitive::sum: return sum(operands[0]);
        case Primitive::mean: return mean(operands[0]);
    }
    throw ContractError("unknown primitive");
}

Tensor add(const Tensor& a, const Tensor& b) {
    Broadcast bc;
    auto out = binary_forward(Primitive::add, a, b, [](double x, double y) { return x + y; }, bc);
    return record("add", std::move(out), {a, b}, [](BackwardContext& ctx) {
        accumulate(ctx.grad_input(0), ctx.grad_output());
        accumulate(ctx.grad_input(1), ctx.grad_output());
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Broadcast bc;
    auto out = binary_forward(Primitive::sub, a, b, [](double x, double y) { return x - y; }, bc);
    return record("sub", std::move(out), {a, b}, [](BackwardContext& ctx) {
        accumulate(ctx.grad_input(0), ctx.grad_output());
        accumulate(ctx.grad_input(1), ctx.grad_output(), -1.0);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Broadcast bc;
    auto out = binary_forward(Primitive::mul, a, b, [](double x, double y) { return x * y; }, bc);
    Tensor av = a.detach(), bv = b.detach();
    return record("mul", std::move(out), {a, b}, [av, bv, bc](BackwardContext& ctx) {
        auto go = ctx.grad_output();
        auto da = av.data();
        auto db = bv.data();
        std::vector<double> tmp(go.size());
        if (ctx.needs(0)) {
            for (std::size_t i = 0; i < go.size(); ++i) tmp[i] = go[i] * (bc == Broadcast::right_scalar ? db[0] : db[i]);
            accumulate(ctx.grad_input(0), tmp);
        }
        if (ctx.needs(1)) {
            for (std::size_t i = 0; i < go.size(); ++i) tmp[i] = go[i] * (bc == Broadcast::left_scalar ? da[0] : da[i]);
            accumulate(ctx.grad_input(1), tmp);
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    auto out = unary("scale", a, [factor](double x) { return factor * x; });
    return record("scale", std::move(out), {a}, [factor](BackwardContext& ctx) {
        accumulate(ctx.grad_input(0), ctx.grad_output(), factor);
    });
}

Tensor relu(const Tensor& a) {
    auto out = unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; });
    Tensor av = a.detach();
    return record("relu", std::move(out), {a}, [av](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        auto x = av.data();
        for (std::size_t i = 0; i < go.size(); ++i) {
            if (x[i] > 0.0) gi[i] += go[i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    auto out = unary("sigmoid", a, [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    Tensor yv = out;
    return record("sigmoid", std::move(out), {a}, [yv](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        auto y = yv.data();
        for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * y[i] * (1.0 - y[i]);
    });
}

Tensor tanh(const Tensor& a) {
    auto out = unary("tanh", a, [](double x) { return std::tanh(x); });
    Tensor yv = out;
    return record("tanh", std::move(out), {a}, [yv](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        auto y = yv.data();
        for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i] * (1.0 - y[i] * y[i]);
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " do not conform");
    }
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.rank() == 1 ? 1 : b.dim(1));
    std::vector<double> out(static_cast<std::size_t>(m * n));
    ConstMap A(a.data().data(), m, k);
    ConstMap B(b.data().data(), k, n);
    MutMap C(out.data(), m, n);
    C.noalias() = A * B;
    Shape out_shape = b.rank() == 1 ? Shape{a.dim(0)} : Shape{a.dim(0), b.dim(1)};
    Tensor av = a.detach(), bv = b.detach();
    return record("matmul", Tensor(std::move(out_shape), std::move(out)), {a, b}, [av, bv, m, k, n](BackwardContext& ctx) {
        ConstMap G(ctx.grad_output().data(), m, n);
        if (ctx.needs(0)) {
            MutMap dA(ctx.grad_input(0).data(), m, k);
            dA.noalias() += G * ConstMap(bv.data().data(), k, n).transpose();
        }
        if (ctx.needs(1)) {
            MutMap dB(ctx.grad_input(1).data(), k, n);
            dB.noalias() += ConstMap(av.data().data(), m, k).transpose() * G;
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return record("sum", Tensor::scalar(s), {a}, [](BackwardContext& ctx) {
        const double g = ctx.grad_output()[0];
        for (auto& v : ctx.grad_input(0)) v += g;
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double n = static_cast<double>(a.size());
    return record("mean", Tensor::scalar(s / n), {a}, [n](BackwardContext& ctx) {
        const double g = ctx.grad_output()[0] / n;
        for (auto& v : ctx.grad_input(0)) v += g;
    });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
    if (a.rank() == 0 || count == 0 || begin + count > a.dim(0)) {
        throw ShapeError("slice_rows: rows [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                         ") out of range for " + shape_str(a.shape()));
    }
    const std::size_t row = a.size() / a.dim(0);
    Shape out_shape = a.shape();
    out_shape[0] = count;
    auto src = a.data().subspan(begin * row, count * row);
    Tensor out(out_shape, std::vector<double>(src.begin(), src.end()));
    return record("slice_rows", std::move(out), {a}, [begin, row](BackwardContext& ctx) {
        auto gi = ctx.grad_input(0);
        auto go = ctx.grad_output();
        for (std::size_t i = 0; i < go.size(); ++i) gi[begin * row + i] += go[i];
    });
}

}  // namespace msap
