#include "cars/trap_sim.hpp"

#include <algorithm>
#include <cmath>

namespace cars {

double TrapCurveModel::accuracy_at(int epoch) const {
    if (epoch < 1) throw UsageError("trap curve epoch must be >= 1");
    Rng rng(seed);
    double eta = 0.0;
    for (int e = 0; e < epoch; ++e) eta = rng.normal();
    const double acc = final_acc * (1.0 - std::exp(-convergence_rate * epoch)) + noise_amp * eta;
    return std::clamp(acc, 0.0, 1.0);
}

std::vector<std::vector<double>> simulate_trap_curves(const std::vector<TrapCurveModel>& models,
                                                      int epochs) {
    if (epochs < 1) throw UsageError("simulate_trap_curves: epochs must be >= 1");
    std::vector<std::vector<double>> curves;
    curves.reserve(models.size());
    for (const auto& m : models) {
        Rng rng(m.seed);
        std::vector<double> acc;
        acc.reserve(epochs);
        for (int e = 1; e <= epochs; ++e) {
            const double v =
                m.final_acc * (1.0 - std::exp(-m.convergence_rate * e)) + m.noise_amp * rng.normal();
            acc.push_back(std::clamp(v, 0.0, 1.0));
        }
        curves.push_back(std::move(acc));
    }
    return curves;
}

// ============================================================================
// Evolution harness
// ============================================================================

namespace {

struct TrapIndividual {
    TrapCurveModel model;
    FitnessRecord record;
};

TrapIndividual fresh_model(const TrapSimConfig& cfg, Rng& rng, uint64_t id) {
    TrapIndividual ind;
    const double size = cfg.size_min + rng.uniform() * (cfg.size_max - cfg.size_min);
    ind.model.size = size;
    ind.model.final_acc =
        cfg.final_base + cfg.final_span * (size - cfg.size_min) / (cfg.size_max - cfg.size_min);
    ind.model.convergence_rate = cfg.rate_scale / size;
    ind.model.noise_amp = cfg.noise_amp;
    ind.model.seed = (static_cast<uint64_t>(rng.next_u32()) << 32) | rng.next_u32();
    ind.record.genome_id = id;
    ind.record.params = static_cast<size_t>(size);
    return ind;
}

} // namespace

TrapSimResult run_trap_simulation(const TrapSimConfig& cfg, bool protected_merge) {
    if (cfg.population < 2 || cfg.generations < 1 || cfg.expand_ratio < 1)
        throw ConfigError("trap simulation: bad population/generations/expand_ratio");
    Rng rng(cfg.seed);
    uint64_t next_id = 0;

    std::vector<TrapIndividual> pop;
    pop.reserve(cfg.population);
    for (int i = 0; i < cfg.population; ++i) pop.push_back(fresh_model(cfg, rng, next_id++));

    TrapSimResult result;
    auto record_stats = [&](int generation) {
        TrapGenStats stats;
        stats.generation = generation;
        stats.max_params = 0.0;
        stats.min_params = pop.empty() ? 0.0 : pop.front().model.size;
        for (const auto& ind : pop) {
            TrapIndividualStat s;
            s.id = ind.record.genome_id;
            s.params = ind.model.size;
            s.accuracy = ind.record.accuracy_history.back().second;
            s.speed = accuracy_speed(ind.record);
            stats.population.push_back(s);
            stats.max_params = std::max(stats.max_params, s.params);
            stats.min_params = std::min(stats.min_params, s.params);
        }
        result.generations.push_back(std::move(stats));
    };

    auto evaluate = [&](std::vector<TrapIndividual>& inds, int generation) {
        const int epoch = generation * cfg.epochs_per_gen;
        for (auto& ind : inds)
            ind.record.accuracy_history.emplace_back(generation, ind.model.accuracy_at(epoch));
    };

    evaluate(pop, 1);
    result.initial_max_params = 0.0;
    for (const auto& ind : pop)
        result.initial_max_params = std::max(result.initial_max_params, ind.model.size);
    record_stats(1);

    for (int g = 2; g <= cfg.generations; ++g) {
        std::vector<TrapIndividual> candidates = pop;
        for (int i = 0; i < cfg.expand_ratio * cfg.population; ++i)
            candidates.push_back(fresh_model(cfg, rng, next_id++));
        evaluate(candidates, g);

        std::vector<Individual> inds;
        inds.reserve(candidates.size());
        for (const auto& c : candidates) {
            Individual ind;
            ind.id = c.record.genome_id;
            ind.objectives.values = {1.0 - c.record.accuracy_history.back().second, c.model.size};
            ind.objectives.labels = {"error", "params"};
            ind.speed = accuracy_speed(c.record);
            inds.push_back(std::move(ind));
        }
        const std::vector<int> keep = protected_merge ? pnsga3_select(inds, cfg.population)
                                                      : nsga3_select(inds, cfg.population);
        std::vector<TrapIndividual> survivors;
        survivors.reserve(keep.size());
        for (int idx : keep) survivors.push_back(candidates[static_cast<size_t>(idx)]);
        pop = std::move(survivors);
        record_stats(g);
    }
    return result;
}

} // namespace cars
