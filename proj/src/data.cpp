#include "cars/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cars/errors.hpp"

namespace cars {

// ============================================================================
// CIFAR-10
// ============================================================================

namespace {

constexpr int kCifarDim = 32;
constexpr int kCifarChannels = 3;
constexpr size_t kCifarRecord = 1 + kCifarChannels * kCifarDim * kCifarDim;
constexpr float kCifarMean[3] = {0.4914f, 0.4822f, 0.4465f};
constexpr float kCifarStd[3] = {0.2470f, 0.2435f, 0.2616f};

void load_cifar_file(const std::string& path, Dataset& out) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open CIFAR-10 batch file: " + path);
    const auto size = static_cast<size_t>(in.tellg());
    if (size == 0 || size % kCifarRecord != 0)
        throw DataError("corrupt CIFAR-10 batch (size not a multiple of 3073): " + path);
    in.seekg(0);
    const size_t records = size / kCifarRecord;
    std::vector<unsigned char> raw(size);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size)))
        throw IoError("short read on CIFAR-10 batch file: " + path);

    const size_t plane = static_cast<size_t>(kCifarDim) * kCifarDim;
    for (size_t r = 0; r < records; ++r) {
        const unsigned char* rec = raw.data() + r * kCifarRecord;
        if (rec[0] > 9) throw DataError("corrupt CIFAR-10 label in " + path);
        out.labels.push_back(rec[0]);
        for (int c = 0; c < kCifarChannels; ++c) {
            const unsigned char* src = rec + 1 + static_cast<size_t>(c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const float v = static_cast<float>(src[i]) / 255.0f;
                out.images.push_back((v - kCifarMean[c]) / kCifarStd[c]);
            }
        }
    }
    out.n += static_cast<int>(records);
}

} // namespace

Cifar10 load_cifar10(const std::string& dir) {
    Cifar10 data;
    for (Dataset* ds : {&data.train, &data.test}) {
        ds->channels = kCifarChannels;
        ds->height = kCifarDim;
        ds->width = kCifarDim;
        ds->num_classes = 10;
    }
    for (int i = 1; i <= 5; ++i)
        load_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin", data.train);
    load_cifar_file(dir + "/test_batch.bin", data.test);
    return data;
}

// ============================================================================
// Splitting
// ============================================================================

std::pair<std::vector<int>, std::vector<int>> split_dataset(const Dataset& ds, double param_frac,
                                                            double arch_frac, uint64_t seed) {
    if (param_frac <= 0.0 || arch_frac <= 0.0 || std::abs(param_frac + arch_frac - 1.0) > 1e-9)
        throw ConfigError("split fractions must be positive and sum to 1");
    std::vector<int> idx(ds.n);
    for (int i = 0; i < ds.n; ++i) idx[i] = i;
    Rng rng(seed);
    for (int i = ds.n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.u32(static_cast<uint32_t>(i + 1)));
        std::swap(idx[i], idx[j]);
    }
    const auto cut = static_cast<size_t>(std::lround(param_frac * ds.n));
    std::vector<int> param_split(idx.begin(), idx.begin() + cut);
    std::vector<int> arch_split(idx.begin() + cut, idx.end());
    return {std::move(param_split), std::move(arch_split)};
}

// ============================================================================
// Synthetic task
// ============================================================================

Dataset generate_synthetic(const SyntheticImageTask& spec) {
    if (spec.classes < 2) throw ConfigError("synthetic task needs at least 2 classes");
    if (spec.samples < spec.classes) throw ConfigError("synthetic task: too few samples");
    Dataset ds;
    ds.n = spec.samples;
    ds.channels = 1;
    ds.height = spec.image_size;
    ds.width = spec.image_size;
    ds.num_classes = spec.classes;
    ds.images.reserve(static_cast<size_t>(ds.n) * ds.height * ds.width);
    ds.labels.reserve(ds.n);

    // Per-class oriented grating.
    const double s = spec.image_size;
    auto pattern = [&](int cls, int y, int x) {
        const double theta = M_PI * cls / spec.classes;
        const double freq = 2.0 + cls % 3;
        const double phase = 0.7 * cls;
        const double u = x * std::cos(theta) + y * std::sin(theta);
        return std::sin(2.0 * M_PI * freq * u / s + phase);
    };

    Rng rng(spec.seed);
    for (int i = 0; i < ds.n; ++i) {
        const int cls = i % spec.classes;
        ds.labels.push_back(cls);
        for (int y = 0; y < ds.height; ++y) {
            for (int x = 0; x < ds.width; ++x) {
                const double v = pattern(cls, y, x) + spec.noise * rng.normal();
                ds.images.push_back(static_cast<float>(v));
            }
        }
    }
    return ds;
}

// ============================================================================
// Batching
// ============================================================================

Batch make_batch(const Dataset& ds, std::span<const int> indices, const AugmentOptions& aug,
                 Rng* rng) {
    if (indices.empty()) throw DataError("make_batch: empty index list");
    if ((aug.flip || aug.crop) && rng == nullptr)
        throw UsageError("make_batch: augmentation requires an rng");
    const int c = ds.channels, h = ds.height, w = ds.width;
    const size_t chw = static_cast<size_t>(c) * h * w;
    Batch batch;
    batch.inputs = Tensor({static_cast<int>(indices.size()), c, h, w});
    batch.targets.reserve(indices.size());
    for (size_t bi = 0; bi < indices.size(); ++bi) {
        const int i = indices[bi];
        if (i < 0 || i >= ds.n) throw DataError("make_batch: sample index out of range");
        batch.targets.push_back(ds.labels[static_cast<size_t>(i)]);
        const float* src = ds.images.data() + static_cast<size_t>(i) * chw;
        float* dst = batch.inputs.data.data() + bi * chw;

        bool flip = false;
        int dy = 0, dx = 0;
        if (aug.flip) flip = rng->bernoulli(0.5);
        if (aug.crop) {
            dy = static_cast<int>(rng->u32(static_cast<uint32_t>(2 * aug.crop_pad + 1))) -
                 aug.crop_pad;
            dx = static_cast<int>(rng->u32(static_cast<uint32_t>(2 * aug.crop_pad + 1))) -
                 aug.crop_pad;
        }
        if (!flip && dy == 0 && dx == 0) {
            std::copy(src, src + chw, dst);
            continue;
        }
        for (int ci = 0; ci < c; ++ci) {
            for (int y = 0; y < h; ++y) {
                const int sy = y + dy;
                for (int x = 0; x < w; ++x) {
                    int sx = x + dx;
                    if (flip) sx = w - 1 - sx;
                    float v = 0.0f;
                    if (sy >= 0 && sy < h && sx >= 0 && sx < w)
                        v = src[(static_cast<size_t>(ci) * h + sy) * w + sx];
                    dst[(static_cast<size_t>(ci) * h + y) * w + x] = v;
                }
            }
        }
    }
    return batch;
}

} // namespace cars
