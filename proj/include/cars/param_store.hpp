#pragma once

#include <span>
#include <string>
#include <vector>

#include "cars/rng.hpp"
#include "cars/tensor.hpp"

namespace cars {

struct ParamSlot {
    std::string name;
    std::vector<int> shape; // flat [len] for packed multi-tensor slots
    size_t offset = 0;
    size_t size = 0;
};

// Flat shared parameter pool with matching gradient and momentum buffers.
// Slot ranges are disjoint and cover [0, total). Zero-size slots are legal;
// they hold mask positions for parameter-free ops.
class ParamStore {
  public:
    size_t add_slot(const std::string& name, std::vector<int> shape);

    size_t total() const { return values_.size(); }
    size_t slot_count() const { return slots_.size(); }
    const ParamSlot& slot(size_t i) const { return slots_[i]; }

    std::span<float> values() { return values_; }
    std::span<const float> values() const { return values_; }
    std::span<float> grads() { return grads_; }
    std::span<const float> grads() const { return grads_; }
    std::span<float> momentum() { return momentum_; }
    std::span<const float> momentum() const { return momentum_; }

    std::span<float> slot_values(size_t i) {
        return {values_.data() + slots_[i].offset, slots_[i].size};
    }
    std::span<const float> slot_values(size_t i) const {
        return {values_.data() + slots_[i].offset, slots_[i].size};
    }

    void zero_grads();

    bool operator==(const ParamStore& other) const = default;

  private:
    std::vector<ParamSlot> slots_;
    std::vector<float> values_;
    std::vector<float> grads_;
    std::vector<float> momentum_;
};

// v <- momentum*v + grad + weight_decay*w;  w <- w - lr*v;  grads zeroed.
void sgd_step(ParamStore& store, float lr, float momentum, float weight_decay);

} // namespace cars
