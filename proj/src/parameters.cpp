#include "msap/parameters.hpp"

#include <algorithm>
#include <cmath>

namespace msap {

ParamId ParameterSet::add(std::string name, Tensor value) {
    if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    if (value.empty()) throw ContractError("parameter '" + name + "' has no storage");
    params_.push_back(Parameter{std::move(name), value.detach()});
    return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

ParamId ParameterSet::id_of(const std::string& name) const {
    auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
    if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
    return static_cast<ParamId>(it - params_.begin());
}

bool ParameterSet::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

void ParameterSet::assign(ParamId id, std::vector<double> values) {
    auto& p = params_.at(id);
    if (values.size() != p.value.size()) {
        throw ShapeError("parameter '" + p.name + "' expects " + std::to_string(p.value.size()) + " values, got " +
                         std::to_string(values.size()));
    }
    p.value = Tensor(p.value.shape(), std::move(values));
}

std::span<double> ParameterSet::values(ParamId id) { return params_.at(id).value.mutable_data(); }

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (const auto& p : params_) {
        out.params_.push_back(Parameter{p.name, Tensor(p.value.shape(), std::vector<double>(p.value.data().begin(), p.value.data().end()))});
    }
    return out;
}

BoundParameters::BoundParameters(const ParameterSet& set, Tape& tape) : tape_(&tape) {
    tensors_.reserve(set.size());
    for (const auto& p : set.all()) tensors_.push_back(tape.leaf(p.value, p.name));
}

BoundParameters::BoundParameters(const ParameterSet& set) {
    tensors_.reserve(set.size());
    for (const auto& p : set.all()) tensors_.push_back(p.value);
}

Tensor init_fan_in_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor(std::move(shape), std::move(data));
}

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts) {
    auto splitmix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    std::uint64_t h = splitmix(seed);
    for (auto s : salts) h = splitmix(h ^ splitmix(s + 0x632be59bd9b4e019ULL));
    return h;
}

}  // namespace msap
