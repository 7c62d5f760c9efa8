#include "cars/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cars/util.hpp"

namespace cars {

double accuracy_speed(const FitnessRecord& rec) {
    if (rec.accuracy_history.empty())
        throw UsageError("accuracy_speed on empty history (genome " +
                         std::to_string(rec.genome_id) + ")");
    const size_t n = rec.accuracy_history.size();
    if (n == 1) return rec.accuracy_history.back().second;
    return rec.accuracy_history[n - 1].second - rec.accuracy_history[n - 2].second;
}

double evaluate_accuracy(const SampledNet& s, const Dataset& ds, const std::vector<int>& indices,
                         int batch_size) {
    if (indices.empty()) throw DataError("evaluate_accuracy: empty validation split");
    if (batch_size < 1) throw ConfigError("evaluate_accuracy: batch_size must be >= 1");
    long long correct = 0;
    for (size_t start = 0; start < indices.size(); start += static_cast<size_t>(batch_size)) {
        const size_t count = std::min(static_cast<size_t>(batch_size), indices.size() - start);
        const Batch batch =
            make_batch(ds, {indices.data() + start, count}, AugmentOptions{}, nullptr);
        const Tensor logits = s.logits(batch.inputs);
        const int classes = logits.shape[1];
        for (size_t i = 0; i < count; ++i) {
            const float* row = logits.data.data() + i * static_cast<size_t>(classes);
            int arg = 0;
            for (int j = 1; j < classes; ++j) {
                if (row[j] > row[arg]) arg = j;
            }
            if (arg == batch.targets[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

size_t count_params(const Genome& g, const SlotTable& table) {
    const auto mask = encode_mask(g, table);
    size_t total = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) total += table.slot_size(i);
    }
    return total;
}

size_t count_params(const Genome& g, const SuperNet& net) { return count_params(g, net.table()); }

// ============================================================================
// FLOPs
// ============================================================================

namespace {

long long op_madds(OpKind k, int channels, long long out_hw) {
    const long long c = channels;
    switch (k) {
    case OpKind::conv3x3:
        return c * c * 9 * out_hw;
    case OpKind::conv1x1:
        return c * c * out_hw;
    case OpKind::sepconv3x3:
        return (c * 9 + c * c) * out_hw;
    case OpKind::sepconv5x5:
        return (c * 25 + c * c) * out_hw;
    default:
        return 0;
    }
}

} // namespace

long long count_flops(const Genome& g, const SpaceDescriptor& space, const NetShape& shape) {
    validate_genome(g, space);
    const int c = space.stem_channels;
    long long total = static_cast<long long>(c) * shape.in_channels * 9 * shape.height *
                      shape.width; // stem
    int h = shape.height, w = shape.width;
    for (int layer = 0; layer < space.stack_depth; ++layer) {
        const bool reduce = space.is_reduction_layer(layer);
        const CellGenome& cell = reduce ? g.reduction : g.normal;
        const long long out_hw =
            static_cast<long long>(reduce ? h / 2 : h) * (reduce ? w / 2 : w);
        for (int j = 0; j < space.node_count; ++j) {
            const NodeGene& n = cell.nodes[j];
            total += op_madds(space.op_set[n.op_a], c, out_hw);
            total += op_madds(space.op_set[n.op_b], c, out_hw);
        }
        if (reduce) {
            h /= 2;
            w /= 2;
        }
    }
    total += static_cast<long long>(c) * shape.num_classes; // classifier
    return total;
}

long long count_flops(const Genome& g, const SuperNet& net) {
    return count_flops(g, net.space(), net.shape());
}

// ============================================================================
// Latency proxy
// ============================================================================

std::string LatencyLUT::key(OpKind op, int stage, int channels) {
    std::ostringstream os;
    os << op_name(op) << '/' << stage << '/' << channels;
    return os.str();
}

LatencyLUT LatencyLUT::synthetic_default(const SpaceDescriptor& space, const NetShape& shape) {
    LatencyLUT lut;
    lut.overhead_ms = 0.05;
    const int stages = static_cast<int>(space.reduction_positions.size()) + 1;
    const int c = space.stem_channels;
    for (int stage = 0; stage < stages; ++stage) {
        const long long hw =
            (static_cast<long long>(shape.height) >> stage) * (shape.width >> stage);
        for (OpKind op : space.op_set) {
            // Multiply-add derived cost plus a small per-op dispatch charge.
            const double ms = 1e-6 * static_cast<double>(op_madds(op, c, hw)) +
                              (op == OpKind::none ? 0.0 : 0.002);
            lut.entries_ms[key(op, stage, c)] = ms;
        }
    }
    return lut;
}

LatencyLUT LatencyLUT::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open latency table: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("latency table " + path + ": " + e.what());
    }
    LatencyLUT lut;
    lut.overhead_ms = j.at("overhead_ms").get<double>();
    for (const auto& [k, v] : j.at("entries_ms").items()) {
        const double ms = v.get<double>();
        if (ms < 0.0) throw DataError("negative latency entry: " + k);
        lut.entries_ms[k] = ms;
    }
    return lut;
}

void LatencyLUT::save_json(const std::string& path) const {
    nlohmann::json j;
    j["overhead_ms"] = overhead_ms;
    j["entries_ms"] = entries_ms;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write latency table: " + path);
    out << j.dump(2) << '\n';
}

double latency_proxy(const Genome& g, const SpaceDescriptor& space, const LatencyLUT& lut) {
    validate_genome(g, space);
    double total = lut.overhead_ms;
    const int c = space.stem_channels;
    int stage = 0;
    for (int layer = 0; layer < space.stack_depth; ++layer) {
        const bool reduce = space.is_reduction_layer(layer);
        const CellGenome& cell = reduce ? g.reduction : g.normal;
        for (int j = 0; j < space.node_count; ++j) {
            const NodeGene& n = cell.nodes[j];
            for (int op : {n.op_a, n.op_b}) {
                const std::string k = LatencyLUT::key(space.op_set[op], stage, c);
                const auto it = lut.entries_ms.find(k);
                if (it == lut.entries_ms.end())
                    throw ConfigError("latency table is missing entry: " + k);
                total += it->second;
            }
        }
        if (reduce) ++stage;
    }
    return total;
}

} // namespace cars
