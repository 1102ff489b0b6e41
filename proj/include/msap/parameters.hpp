#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msap/tensor.hpp"

namespace msap {

using ParamId = std::size_t;

struct Parameter {
    std::string name;
    Tensor value;
};

/// Named, ordered collection of trainable tensors.
class ParameterSet {
public:
    /// Adds a parameter; names are unique within one set.
    ParamId add(std::string name, Tensor value);

    std::size_t size() const { return params_.size(); }
    const Parameter& operator[](ParamId id) const { return params_.at(id); }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t scalar_count() const;

    ParamId id_of(const std::string& name) const;
    bool contains(const std::string& name) const;

    /// Replaces a parameter's values in place; the shape must match.
    void assign(ParamId id, std::vector<double> values);
    /// Mutable access for optimizers and finite-difference probes.
    std::span<double> values(ParamId id);

    /// Deep copy (fresh storage).
    ParameterSet clone() const;

private:
    std::vector<Parameter> params_;
};

/// Parameter tensors bound for one forward pass, indexed like the set.
class BoundParameters {
public:
    /// Registers every parameter as a named leaf on `tape`.
    BoundParameters(const ParameterSet& set, Tape& tape);
    /// Constant binding (evaluation, no gradients).
    explicit BoundParameters(const ParameterSet& set);

    const Tensor& operator[](ParamId id) const { return tensors_.at(id); }
    Tape* tape() const { return tape_; }

private:
    std::vector<Tensor> tensors_;
    Tape* tape_ = nullptr;
};

/// Fan-in scaled uniform initialisation, bound = sqrt(6 / fan_in).
Tensor init_fan_in_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

/// Mixes integers into a 64-bit seed (splitmix64 finaliser chain).
std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts);

}  // namespace msap
