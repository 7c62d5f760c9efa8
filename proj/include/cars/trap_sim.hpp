#pragma once

#include <cstdint>
#include <vector>

#include "cars/objectives.hpp"

namespace cars {

// Synthetic training-curve model: small models converge fast, large models
// climb slowly to a higher ceiling, and every evaluation carries seeded
// noise. This is the fitness stand-in used to study selection dynamics
// without touching a real network.
struct TrapCurveModel {
    double size = 0.0; // parameter count
    double final_acc = 0.9;
    double convergence_rate = 0.1;
    double noise_amp = 0.0;
    uint64_t seed = 0;

    // acc(e) = final_acc*(1 - exp(-rate*e)) + noise_amp*eta(e), clipped to
    // [0,1]; eta(e) is the e-th draw of the model's noise stream.
    double accuracy_at(int epoch) const;
};

// Accuracy sequences for epochs 1..epochs.
std::vector<std::vector<double>> simulate_trap_curves(const std::vector<TrapCurveModel>& models,
                                                      int epochs);

// Selection-dynamics harness: a population of curve models evolves under
// plain or protected non-dominated sorting on (error, params) while the
// global training epoch advances each generation.
struct TrapSimConfig {
    int population = 32;
    int expand_ratio = 2;
    int generations = 20;
    int epochs_per_gen = 2;
    double size_min = 0.5e6;
    double size_max = 4.0e6;
    double final_base = 0.92;
    double final_span = 0.06;   // ceiling grows linearly with size
    double rate_scale = 0.15e6; // convergence_rate = rate_scale / size
    double noise_amp = 0.02;
    uint64_t seed = 1;
};

struct TrapIndividualStat {
    uint64_t id = 0;
    double params = 0.0;
    double accuracy = 0.0;
    double speed = 0.0;
};

struct TrapGenStats {
    int generation = 0;
    std::vector<TrapIndividualStat> population;
    double max_params = 0.0;
    double min_params = 0.0;
};

struct TrapSimResult {
    double initial_max_params = 0.0;
    std::vector<TrapGenStats> generations;
};

TrapSimResult run_trap_simulation(const TrapSimConfig& cfg, bool protected_merge);

} // namespace cars
