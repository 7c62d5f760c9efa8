#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cars/data.hpp"
#include "cars/moea.hpp"
#include "cars/search_space.hpp"
#include "cars/supernet.hpp"

namespace cars {

// Per-individual measurement history. Accuracies are validation top-1 in
// [0,1], keyed by the evolution generation that produced them.
struct FitnessRecord {
    uint64_t genome_id = 0;
    std::vector<std::pair<int, double>> accuracy_history;
    size_t params = 0;
    long long flops = 0;
    double latency_ms = 0.0;
};

// Accuracy gain between the two latest generations; a newcomer with a
// single entry scores its accuracy itself so fresh offspring are not
// annihilated by the speed-based sort.
double accuracy_speed(const FitnessRecord& rec);

// Top-1 accuracy over the given validation indices, evaluated in batches.
// Pure in (weights, data, index order).
double evaluate_accuracy(const SampledNet& s, const Dataset& ds, const std::vector<int>& indices,
                         int batch_size);

// Scalar weights kept by the genome's connection mask (mask popcount over
// slot sizes).
size_t count_params(const Genome& g, const SlotTable& table);
size_t count_params(const Genome& g, const SuperNet& net);

// Multiply-add count of one forward pass at the given input shape.
// Pool/skip/none and the parameter-free reductions count zero.
long long count_flops(const Genome& g, const SpaceDescriptor& space, const NetShape& shape);
long long count_flops(const Genome& g, const SuperNet& net);

// Static latency proxy: fixed overhead plus one table entry per active
// edge, keyed "op/stage/channels" where stage counts reductions before the
// edge's layer.
struct LatencyLUT {
    double overhead_ms = 0.0;
    std::map<std::string, double> entries_ms;

    static std::string key(OpKind op, int stage, int channels);

    // Synthetic default scaled off per-op multiply-adds; documented stand-in
    // for on-device measurement.
    static LatencyLUT synthetic_default(const SpaceDescriptor& space, const NetShape& shape);

    static LatencyLUT load_json(const std::string& path);
    void save_json(const std::string& path) const;
};

double latency_proxy(const Genome& g, const SpaceDescriptor& space, const LatencyLUT& lut);

} // namespace cars
