#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cars/autodiff.hpp"
#include "cars/rng.hpp"
#include "cars/tensor.hpp"

namespace cars {

struct Dataset {
    int n = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<float> images; // n * c * h * w, row major
    std::vector<int> labels;
};

struct Cifar10 {
    Dataset train;
    Dataset test;
};

// Standard binary distribution: data_batch_{1..5}.bin + test_batch.bin,
// 3073-byte records (label + 3x32x32 pixels). Pixels are scaled to [0,1]
// and standardized with the usual CIFAR-10 per-channel constants.
Cifar10 load_cifar10(const std::string& dir);

// Seeded shuffle split into disjoint, exhaustive index sets.
std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& ds, double param_frac,
                                                            double arch_frac, uint64_t seed);

// Deterministic class-separable stand-in task: oriented sinusoidal gratings
// per class plus Gaussian pixel noise.
struct SyntheticImageTask {
    int classes = 4;
    int samples = 2048;
    int image_size = 16;
    double noise = 0.25;
    uint64_t seed = 7;
};

Dataset generate_synthetic(const SyntheticImageTask& spec);

struct AugmentOptions {
    bool flip = false;
    bool crop = false;
    int crop_pad = 2;
};

// Gathers the given sample indices into a batch. Augmentation draws come
// from `rng` in index order, one flip draw then two shift draws per sample,
// so batch contents are a pure function of (indices, options, rng state).
Batch make_batch(const Dataset& ds, std::span<const int> indices, const AugmentOptions& aug,
                 Rng* rng);

} // namespace cars
