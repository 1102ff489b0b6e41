#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msap/errors.hpp"

namespace msap {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

/// Dense row-major tensor of doubles.
///
/// Storage is shared between copies; forward operations never mutate an
/// operand's storage, so a Tensor behaves as an immutable value. A tensor that
/// was produced on a Tape carries the node id of its record there.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_ ? data_->size() : 0; }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    bool empty() const { return !data_; }

    std::span<const double> data() const;
    double operator[](std::size_t i) const { return (*data_)[i]; }
    double item() const;
    /// Writable view of this tensor's storage; storage shared with other
    /// tensors is copied first, so they keep their values.
    std::span<double> mutable_data();

    bool requires_grad() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    /// Same values, no tape association.
    Tensor detach() const;
    /// Same storage viewed under a new shape with equal element count.
    Tensor reshape(Shape shape) const;

private:
    friend class Tape;
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

/// Gradient buffers handed to a record's backward rule.
class BackwardContext {
public:
    std::span<const double> grad_output() const { return grad_out_; }
    /// Accumulation buffer for operand `i`; empty when that operand does not
    /// require a gradient.
    std::span<double> grad_input(std::size_t i);
    bool needs(std::size_t i) const;

private:
    friend class Tape;
    std::span<const double> grad_out_;
    std::vector<int> inputs_;
    std::vector<std::vector<double>>* grads_ = nullptr;
    const Tape* tape_ = nullptr;
};

using BackwardRule = std::function<void(BackwardContext&)>;

/// Gradients produced by one backward pass.
class Gradients {
public:
    /// Gradient with respect to a tensor that lives on the differentiated
    /// tape; zeros when the tensor was unreachable from the root.
    Tensor of(const Tensor& t) const;
    /// Gradients of every named leaf, keyed by name.
    const std::map<std::string, Tensor>& by_name() const { return named_; }
    const Tensor& at(const std::string& name) const;

private:
    friend class Tape;
    const Tape* tape_ = nullptr;
    std::vector<std::vector<double>> grads_;
    std::map<std::string, Tensor> named_;
};

/// Define-by-run record of primitive applications.
///
/// Node ids index leaves and records alike; every record's operands have
/// smaller ids than its result, so a reverse sweep is a valid topological
/// order. Backward does not consume the tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers `value` as a differentiable leaf. Named leaves are reported
    /// by Gradients::by_name(); names must be unique on one tape.
    Tensor leaf(const Tensor& value, std::string name = {});

    /// Appends a record computing `result` from `operands`. Returns `result`
    /// bound to the tape, or unbound when no operand requires a gradient.
    Tensor record(const char* kind, Tensor result, std::vector<Tensor> operands, BackwardRule rule);

    Gradients backward(const Tensor& root) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t record_count() const;

private:
    friend class BackwardContext;
    struct Node {
        Shape shape;
        std::string name;
        const char* kind = "leaf";
        std::vector<int> inputs;
        BackwardRule rule;
    };
    std::vector<Node> nodes_;
    std::map<std::string, int> names_;
};

/// Tape that receives operations whose operands require gradients; throws
/// when operands come from two different tapes.
Tape* common_tape(std::span<const Tensor> operands, const char* kind);

}  // namespace msap
