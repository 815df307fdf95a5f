#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ablab/tensor.hpp"

namespace ablab {

// Named parameters with matching gradient buffers and a trainable mask.
// Iteration order is the lexicographic order of names.
class ParamSet {
public:
    void add(const std::string& name, Tensor value, bool trainable = true);

    bool contains(const std::string& name) const { return values_.count(name) != 0; }
    const Tensor& value(const std::string& name) const;
    Tensor& value(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    Tensor& grad(const std::string& name);

    std::vector<std::string> names() const;
    std::size_t count() const { return values_.size(); }
    std::size_t numel() const;

    const std::set<std::string>& trainable() const { return trainable_; }
    bool is_trainable(const std::string& name) const { return trainable_.count(name) != 0; }
    // Replaces the mask; every name must exist.
    void set_trainable(const std::set<std::string>& names);

    void zero_grads();

    // Bitwise equality of names, shapes and values (gradients ignored).
    bool identical(const ParamSet& other) const;

    const std::map<std::string, Tensor>& values() const { return values_; }

private:
    std::map<std::string, Tensor> values_;
    std::map<std::string, Tensor> grads_;
    std::set<std::string> trainable_;
};

}  // namespace ablab
