#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cars/config.hpp"
#include "cars/data.hpp"
#include "cars/moea.hpp"
#include "cars/objectives.hpp"
#include "cars/supernet.hpp"

namespace cars {

// ============================================================================
// Search-time model
// ============================================================================

struct TimeModel {
    double t_train_epoch_s = 0.0; // one training epoch, one architecture
    double t_val_s = 0.0;         // one full validation inference
};

struct TimeBreakdown {
    double warm_s = 0.0;
    double param_s = 0.0; // per generation
    double arch_s = 0.0;  // per generation
    double evo_s = 0.0;
    double total_s = 0.0;
    double total_gpu_days() const { return total_s / 86400.0; }
};

// T_total = E_warm*T_tr + E_evo*(E_param*T_tr*B + T_val)
TimeBreakdown estimate_search_time(const EvolutionConfig& cfg, const TimeModel& tm);

// ============================================================================
// Search state
// ============================================================================

struct Member {
    Genome genome;
    FitnessRecord record;
};

struct SearchState {
    EvolutionConfig config;
    SuperNet net;
    std::vector<Member> population;
    Rng rng;
    int generation = 0;
    int param_epochs_done = 0;
    uint64_t next_genome_id = 0;

    explicit SearchState(const EvolutionConfig& cfg) : config(cfg), net(cfg.space, cfg.net_shape()) {}
};

// Data and helper tables resolved once per run from the config.
struct SearchContext {
    Dataset data;
    std::vector<int> param_split;
    std::vector<int> arch_split;
    LatencyLUT lut;
};

SearchContext build_context(const EvolutionConfig& cfg);

// Fresh state: parameters initialized from the seed, empty population.
SearchState init_state(const EvolutionConfig& cfg);

// ============================================================================
// Objective evaluation
// ============================================================================

// Boundary for objective measurement so tests can substitute synthetic
// fitness (e.g. trap curves) for real validation accuracy. Implementations
// must be safe for concurrent evaluate() calls.
class ObjectiveEvaluator {
  public:
    struct Result {
        double accuracy = 0.0;
        size_t params = 0;
        long long flops = 0;
        double latency_ms = 0.0;
    };
    virtual ~ObjectiveEvaluator() = default;
    virtual Result evaluate(const SuperNet& net, const Genome& g, int generation) = 0;
};

// The real thing: validation accuracy over the architecture split plus the
// static size/flops/latency measurements.
class SupernetEvaluator : public ObjectiveEvaluator {
  public:
    SupernetEvaluator(const Dataset& data, std::vector<int> arch_split, int eval_batch_size,
                      LatencyLUT lut);
    Result evaluate(const SuperNet& net, const Genome& g, int generation) override;

  private:
    const Dataset* data_;
    std::vector<int> arch_split_;
    int eval_batch_size_;
    LatencyLUT lut_;
};

// ============================================================================
// Algorithm steps
// ============================================================================

struct WarmupReport {
    int steps = 0;
    std::vector<long long> op_draws; // per op id, both slots of every node
    std::vector<double> step_losses;
};

// Uniform-sampling warmup: every step trains one fresh random architecture.
WarmupReport warmup(SearchState& state, const SearchContext& ctx);

// P fresh random architectures (run once, after warmup).
void init_population(SearchState& state);

// One full generation: E_param epochs of mini-batch-architecture updates,
// t*P offspring, objective evaluation of all (t+1)*P candidates, protected
// selection back down to P. Returns the successor state; the input state is
// untouched, so a failed generation has no effect.
SearchState run_generation(const SearchState& state, const SearchContext& ctx,
                           ObjectiveEvaluator& evaluator);

// Objective vector of one member under the config's objective list.
Individual member_individual(const EvolutionConfig& cfg, const Member& m);

// Front 0 of the population on the primary objectives.
std::vector<int> population_front0(const EvolutionConfig& cfg, const std::vector<Member>& pop);

// fitness.csv line format shared by the logger and the pareto exporter.
std::string fitness_csv_header();
std::string fitness_csv_row(int generation, const Member& m);

// Front-0 report of a (possibly checkpointed) state. CSV columns:
// genome_id,error,params,flops,latency_ms,speed,genome
void export_pareto_csv(const SearchState& state, std::ostream& out);
void export_pareto_json(const SearchState& state, std::ostream& out);

struct RunResult {
    SearchState state;
    std::string out_dir;
};

// Full Algorithm: warmup + E_evo generations. Writes fitness.csv,
// pareto.json, supernet.ckpt and state.ckpt under out_dir; resumes from
// resume_path when given. `log` may be null.
RunResult run_search(const EvolutionConfig& cfg, const std::string& out_dir,
                     const std::string& resume_path = "", std::ostream* log = nullptr);

} // namespace cars
