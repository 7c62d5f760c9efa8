#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cars/data.hpp"
#include "cars/search_space.hpp"

namespace cars {

struct DatasetSpec {
    enum class Source { synthetic, cifar10_binary };
    Source source = Source::synthetic;
    std::string cifar_dir;
    SyntheticImageTask synthetic;
    double param_fraction = 0.5;
    double arch_fraction = 0.5;
    int batch_size = 64;
    bool flip = false;
    bool crop = false;
};

// Every hyperparameter of the search loop. JSON round-trips through a
// strict, documented schema (unknown keys are rejected).
struct EvolutionConfig {
    int population = 16;          // P
    int expand_ratio = 1;         // t, offspring per parent
    int arch_minibatch = 1;       // B, architectures averaged per weight update
    int warmup_epochs = 5;        // E_warm
    int evolution_generations = 10; // E_evo
    int param_epochs = 2;         // E_param, epochs between selections

    double lr = 0.05;
    double lr_min = 0.001;
    bool cosine_lr = true;
    double momentum = 0.9;
    double weight_decay = 3e-4;

    uint64_t seed = 1;
    int eval_batch_size = 64;
    std::vector<std::string> objectives = {"error", "params"};
    std::string latency_lut_path; // empty -> synthetic default table

    SpaceDescriptor space = SpaceDescriptor::default_desk();
    DatasetSpec dataset;

    void validate(bool resuming = false) const;

    // Input geometry implied by the dataset spec (no data loading needed).
    NetShape net_shape() const;

    std::string to_json_text() const;
    static EvolutionConfig from_json_text(const std::string& text);
    static EvolutionConfig load_file(const std::string& path);
    void save_file(const std::string& path) const;

    // Desk-scale acceptance configuration.
    static EvolutionConfig desk_default();
    // The full-scale CIFAR-10 search setting (population 128, 500 epochs);
    // provided for completeness, far beyond desk-scale budgets.
    static EvolutionConfig paper_cifar10();
};

} // namespace cars
