#pragma once

#include <functional>
#include <string>

#include "msap/parameters.hpp"

namespace msap {

/// Scalar objective evaluated on parameters bound for one forward pass.
using ScalarObjective = std::function<Tensor(const BoundParameters&)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t entries = 0;
};

/// Compares reverse-mode gradients of `f` at `point` against central finite
/// differences (f(θ+eps) − f(θ−eps)) / (2·eps), entry by entry. Relative
/// error is |a−b| / max(|a|, |b|, 1e-8). `f` must be deterministic.
GradCheckReport grad_check_report(const ScalarObjective& f, const ParameterSet& point, double eps = 1e-4);

double grad_check(const ScalarObjective& f, const ParameterSet& point, double eps = 1e-4);

double relative_error(double a, double b);

}  // namespace msap
