#include "msap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace msap {

double relative_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

GradCheckReport grad_check_report(const ScalarObjective& f, const ParameterSet& point, double eps) {
    GradCheckReport report;
    ParameterSet probe = point.clone();

    Gradients grads = [&] {
        Tape tape;
        BoundParameters bound(probe, tape);
        Tensor root = f(bound);
        if (root.size() != 1) throw ContractError("grad_check objective must be scalar");
        if (!root.requires_grad()) {
            // Constant objective: every gradient is zero.
            Tape empty;
            Tensor z = empty.leaf(Tensor::scalar(0.0));
            return empty.backward(z);
        }
        return tape.backward(root);
    }();

    auto evaluate = [&] {
        BoundParameters bound(probe);
        return f(bound).item();
    };

    for (ParamId id = 0; id < probe.size(); ++id) {
        const std::string name = probe[id].name;
        const auto& named = grads.by_name();
        auto it = named.find(name);
        for (std::size_t i = 0; i < probe[id].value.size(); ++i) {
            const double analytic = it == named.end() ? 0.0 : it->second[i];
            auto vals = probe.values(id);
            const double orig = vals[i];
            vals[i] = orig + eps;
            const double up = evaluate();
            probe.values(id)[i] = orig - eps;
            const double down = evaluate();
            probe.values(id)[i] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = (analytic == 0.0 && numeric == 0.0) ? 0.0 : relative_error(analytic, numeric);
            ++report.entries;
            if (err > report.max_relative_error || report.entries == 1) {
                report.max_relative_error = std::max(report.max_relative_error, err);
                report.worst_parameter = name;
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

double grad_check(const ScalarObjective& f, const ParameterSet& point, double eps) {
    return grad_check_report(f, point, eps).max_relative_error;
}

}  // namespace msap
