#include "msap/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace msap {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<double>>(std::move(data))) {
    for (auto e : shape_) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
    }
    if (numel(shape_) != data_->size()) {
        throw ShapeError("tensor of shape " + shape_str(shape_) + " needs " + std::to_string(numel(shape_)) +
                         " values, got " + std::to_string(data_->size()));
    }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::span<const double> Tensor::data() const {
    if (!data_) return {};
    return {data_->data(), data_->size()};
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
    return (*data_)[0];
}

std::span<double> Tensor::mutable_data() {
    if (!data_) return {};
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
    return {data_->data(), data_->size()};
}

Tensor Tensor::detach() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
}

Tensor Tensor::reshape(Shape shape) const {
    if (numel(shape) != size()) {
        throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    if (tape_) {
        // A reshape on the tape is an identity record with a new shape.
        Tensor src = *this;
        return tape_->record("reshape", t.detach(), {src}, [](BackwardContext& ctx) {
            auto gi = ctx.grad_input(0);
            auto go = ctx.grad_output();
            for (std::size_t i = 0; i < go.size(); ++i) gi[i] += go[i];
        });
    }
    return t;
}

std::span<double> BackwardContext::grad_input(std::size_t i) {
    const int id = inputs_.at(i);
    if (id < 0) return {};
    auto& g = (*grads_)[static_cast<std::size_t>(id)];
    if (g.empty()) g.assign(numel(tape_->nodes_[static_cast<std::size_t>(id)].shape), 0.0);
    return {g.data(), g.size()};
}

bool BackwardContext::needs(std::size_t i) const { return inputs_.at(i) >= 0; }

Tensor Gradients::of(const Tensor& t) const {
    if (t.tape() != tape_ || t.node() < 0) return Tensor::zeros(t.shape());
    const auto& g = grads_[static_cast<std::size_t>(t.node())];
    if (g.empty()) return Tensor::zeros(t.shape());
    return Tensor(t.shape(), g);
}

const Tensor& Gradients::at(const std::string& name) const {
    auto it = named_.find(name);
    if (it == named_.end()) throw ContractError("no gradient recorded for '" + name + "'");
    return it->second;
}

Tensor Tape::leaf(const Tensor& value, std::string name) {
    if (value.empty()) throw ContractError("cannot register an empty tensor as a leaf");
    const int id = static_cast<int>(nodes_.size());
    if (!name.empty()) {
        if (!names_.emplace(name, id).second) throw ContractError("duplicate leaf name '" + name + "'");
    }
    nodes_.push_back(Node{value.shape(), std::move(name), "leaf", {}, {}});
    Tensor t = value.detach();
    t.tape_ = this;
    t.node_ = id;
    return t;
}

Tensor Tape::record(const char* kind, Tensor result, std::vector<Tensor> operands, BackwardRule rule) {
    std::vector<int> inputs;
    inputs.reserve(operands.size());
    bool any = false;
    for (const auto& op : operands) {
        if (op.tape_ == this) {
            inputs.push_back(op.node_);
            any = true;
        } else {
            inputs.push_back(-1);
        }
    }
    result.tape_ = nullptr;
    result.node_ = -1;
    if (!any) return result;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{result.shape(), {}, kind, std::move(inputs), std::move(rule)});
    result.tape_ = this;
    result.node_ = id;
    return result;
}

std::size_t Tape::record_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.rule != nullptr; }));
}

Gradients Tape::backward(const Tensor& root) const {
    if (root.tape() != this || root.node() < 0) throw ContractError("backward root was not produced on this tape");
    if (root.size() != 1) throw ContractError("backward root must be scalar, got shape " + shape_str(root.shape()));

    Gradients out;
    out.tape_ = this;
    out.grads_.resize(nodes_.size());
    out.grads_[static_cast<std::size_t>(root.node())].assign(1, 1.0);

    BackwardContext ctx;
    ctx.grads_ = &out.grads_;
    ctx.tape_ = this;
    for (int id = root.node(); id >= 0; --id) {
        const auto& node = nodes_[static_cast<std::size_t>(id)];
        const auto& g = out.grads_[static_cast<std::size_t>(id)];
        if (!node.rule || g.empty()) continue;
        ctx.grad_out_ = {g.data(), g.size()};
        ctx.inputs_ = node.inputs;
        node.rule(ctx);
    }

    for (const auto& [name, id] : names_) {
        const auto& node = nodes_[static_cast<std::size_t>(id)];
        const auto& g = out.grads_[static_cast<std::size_t>(id)];
        out.named_.emplace(name, g.empty() ? Tensor::zeros(node.shape) : Tensor(node.shape, g));
    }
    return out;
}

Tape* common_tape(std::span<const Tensor> operands, const char* kind) {
    Tape* tape = nullptr;
    for (const auto& op : operands) {
        if (!op.tape()) continue;
        if (tape && tape != op.tape()) throw ContractError(std::string(kind) + ": operands live on different tapes");
        tape = op.tape();
    }
    return tape;
}

}  // namespace msap
