#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cars/autodiff.hpp"
#include "cars/param_store.hpp"
#include "cars/rng.hpp"
#include "cars/search_space.hpp"

namespace cars {

// Shared-weight over-parameterized network. One parameter slot per
// (layer, edge, op); the slot layout is a pure function of (space, shape),
// so connection masks align across runs and checkpoints.
//
// Channel plan: stem_channels everywhere. Reduction cells halve the spatial
// map (stride-2 ops on edges fed by cell inputs) and keep the channel count.
class SuperNet {
  public:
    SuperNet(const SpaceDescriptor& space, const NetShape& shape);

    void init_params(Rng& rng);

    const SpaceDescriptor& space() const { return space_; }
    const NetShape& shape() const { return shape_; }
    const SlotTable& table() const { return table_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    int channels() const { return space_.stem_channels; }

    // Number of reduction layers strictly before `layer` (resolution stage).
    int stage_of(int layer) const;

    size_t edge_offset(int layer, int node, int pred, int op) const {
        return table_.slot_offset(table_.edge_slot(layer, node, pred, op));
    }

  private:
    SpaceDescriptor space_;
    NetShape shape_;
    SlotTable table_;
    ParamStore store_;
};

// One architecture realized inside the SuperNet: (W_i, C_i). Forwards touch
// only the slots the genome's connection mask keeps.
class SampledNet {
  public:
    SampledNet(const SuperNet& net, Genome genome);

    const Genome& genome() const { return genome_; }
    const std::vector<uint8_t>& mask() const { return mask_; }
    const SuperNet& net() const { return *net_; }

    // Records the forward pass on the tape and returns the logits node.
    int build_forward(Tape& tape, const Tensor& inputs) const;

    Tensor logits(const Tensor& inputs) const;

  private:
    const SuperNet* net_;
    Genome genome_;
    std::vector<uint8_t> mask_;
};

struct GradResult {
    std::vector<float> grad; // flat, aligned with the parameter store
    LossValue loss;
};

// Masked single-architecture gradient: nonzero only at mask-1 slots.
GradResult grad_single(const SampledNet& s, const Batch& batch);

// Forward+backward with the given seed scale, accumulating into sink.
// Returns the loss; the workhorse behind the averaged-gradient operations.
LossValue accumulate_grad(const SampledNet& s, const Batch& batch, float scale,
                          std::span<float> sink);

// (1/P) sum of per-architecture gradients on one shared data batch.
GradResult grad_population(const SuperNet& net, const std::vector<Genome>& genomes,
                           const Batch& batch);

// Unbiased mini-batch estimate: B indices sampled uniformly without
// replacement, gradients averaged with weight 1/B.
GradResult grad_minibatch(const SuperNet& net, const std::vector<Genome>& genomes, int batch_arch,
                          Rng& rng, const Batch& batch, std::vector<int>* picked = nullptr);

} // namespace cars
