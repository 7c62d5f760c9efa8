#include "cars/param_store.hpp"

#include <algorithm>

#include "cars/errors.hpp"

namespace cars {

size_t ParamStore::add_slot(const std::string& name, std::vector<int> shape) {
    ParamSlot s;
    s.name = name;
    s.size = Tensor::numel_of(shape);
    s.shape = std::move(shape);
    s.offset = values_.size();
    slots_.push_back(std::move(s));
    values_.resize(values_.size() + slots_.back().size, 0.0f);
    grads_.resize(values_.size(), 0.0f);
    momentum_.resize(values_.size(), 0.0f);
    return slots_.size() - 1;
}

void ParamStore::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0f); }

void sgd_step(ParamStore& store, float lr, float momentum, float weight_decay) {
    if (lr <= 0.0f) throw ConfigError("sgd_step: learning rate must be positive");
    auto w = store.values();
    auto g = store.grads();
    auto v = store.momentum();
    for (size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
        w[i] -= lr * v[i];
    }
    store.zero_grads();
}

} // namespace cars
