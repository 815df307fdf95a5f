#include "ablab/params.hpp"

#include <stdexcept>

namespace ablab {

void ParamSet::add(const std::string& name, Tensor value, bool trainable) {
    if (values_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    grads_.emplace(name, Tensor(value.shape(), 0.0));
    values_.emplace(name, std::move(value));
    if (trainable) trainable_.insert(name);
}

const Tensor& ParamSet::value(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamSet::value(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamSet::grad(const std::string& name) const {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamSet::grad(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [k, _] : values_) out.push_back(k);
    return out;
}

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto& [_, v] : values_) n += v.size();
    return n;
}

void ParamSet::set_trainable(const std::set<std::string>& names) {
    for (const auto& n : names)
        if (!values_.count(n)) throw std::invalid_argument("trainable mask names unknown parameter '" + n + "'");
    trainable_ = names;
}

void ParamSet::zero_grads() {
    for (auto& [_, g] : grads_) g.fill(0.0);
}

bool ParamSet::identical(const ParamSet& other) const {
    if (values_.size() != other.values_.size()) return false;
    auto it = other.values_.begin();
    for (const auto& [k, v] : values_) {
        if (k != it->first || !v.identical(it->second)) return false;
        ++it;
    }
    return true;
}

}  // namespace ablab
