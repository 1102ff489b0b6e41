#pragma once

#include <span>
#include <string_view>

#include "msap/tensor.hpp"

namespace msap {

enum class Primitive { add, sub, mul, scale, relu, sigmoid, tanh, matmul, sum, mean };

std::string_view to_string(Primitive kind);

/// Elementwise kinds accept equal shapes or a one-element operand broadcast
/// against the other. `scale` takes the tensor and a one-element factor;
/// the factor is treated as a constant.
Tensor apply_primitive(Primitive kind, std::span<const Tensor> operands);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// [m,k] x [k,n] -> [m,n]; [m,k] x [k] -> [m].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Sum of all entries as a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Contiguous rows [begin, begin+count) of a tensor's leading axis.
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);

}  // namespace msap
