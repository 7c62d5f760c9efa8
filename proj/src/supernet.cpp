#include "cars/supernet.hpp"

#include <algorithm>
#include <cmath>

namespace cars {

// ============================================================================
// SuperNet
// ============================================================================

SuperNet::SuperNet(const SpaceDescriptor& space, const NetShape& shape)
    : space_(space), shape_(shape), table_(space, shape) {
    const int reductions = static_cast<int>(space_.reduction_positions.size());
    const int div = 1 << reductions;
    if (shape_.height % div != 0 || shape_.width % div != 0)
        throw ConfigError("input spatial size must be divisible by 2^(#reductions)");
    if ((shape_.height / div) < 1 || (shape_.width / div) < 1)
        throw ConfigError("input too small for the reduction count");

    for (size_t i = 0; i < table_.slot_count(); ++i) {
        const SlotKey& key = table_.key(i);
        std::vector<int> slot_shape;
        const int c = space_.stem_channels;
        switch (key.kind) {
        case SlotKey::Kind::stem_w:
            slot_shape = {c, shape_.in_channels, 3, 3};
            break;
        case SlotKey::Kind::stem_b:
            slot_shape = {c};
            break;
        case SlotKey::Kind::fc_w:
            slot_shape = {shape_.num_classes, c};
            break;
        case SlotKey::Kind::fc_b:
            slot_shape = {shape_.num_classes};
            break;
        case SlotKey::Kind::cell_edge:
            slot_shape = {static_cast<int>(table_.slot_size(i))};
            break;
        }
        store_.add_slot(table_.slot_name(i), std::move(slot_shape));
        if (store_.slot(i).offset != table_.slot_offset(i))
            throw StructuralError("param store / slot table offset drift");
    }
}

int SuperNet::stage_of(int layer) const {
    int stage = 0;
    for (int p : space_.reduction_positions) {
        if (p < layer) ++stage;
    }
    return stage;
}

void SuperNet::init_params(Rng& rng) {
    const int c = space_.stem_channels;
    auto fill_normal = [&](std::span<float> dst, size_t count, float stddev) {
        for (size_t i = 0; i < count; ++i) dst[i] = rng.normal_f(stddev);
    };
    for (size_t i = 0; i < table_.slot_count(); ++i) {
        auto dst = store_.slot_values(i);
        const SlotKey& key = table_.key(i);
        switch (key.kind) {
        case SlotKey::Kind::stem_w:
            fill_normal(dst, dst.size(), std::sqrt(2.0f / (9.0f * shape_.in_channels)));
            break;
        case SlotKey::Kind::fc_w:
            fill_normal(dst, dst.size(), std::sqrt(1.0f / c));
            break;
        case SlotKey::Kind::stem_b:
        case SlotKey::Kind::fc_b:
            break; // zeros
        case SlotKey::Kind::cell_edge: {
            if (dst.empty()) break;
            const OpKind kind = space_.op_set[key.op];
            const size_t cc = static_cast<size_t>(c) * c;
            switch (kind) {
            case OpKind::conv3x3:
                fill_normal(dst, cc * 9, std::sqrt(2.0f / (9.0f * c)));
                break;
            case OpKind::conv1x1:
                fill_normal(dst, cc, std::sqrt(2.0f / c));
                break;
            case OpKind::sepconv3x3:
                fill_normal(dst, static_cast<size_t>(c) * 9, std::sqrt(2.0f / 9.0f));
                fill_normal(dst.subspan(static_cast<size_t>(c) * 9), cc, std::sqrt(2.0f / c));
                break;
            case OpKind::sepconv5x5:
                fill_normal(dst, static_cast<size_t>(c) * 25, std::sqrt(2.0f / 25.0f));
                fill_normal(dst.subspan(static_cast<size_t>(c) * 25), cc, std::sqrt(2.0f / c));
                break;
            default:
                break;
            }
            break;
        }
        }
    }
}

// ============================================================================
// SampledNet
// ============================================================================

SampledNet::SampledNet(const SuperNet& net, Genome genome)
    : net_(&net), genome_(std::move(genome)), mask_(encode_mask(genome_, net.table())) {}

int SampledNet::build_forward(Tape& tape, const Tensor& inputs) const {
    const SuperNet& net = *net_;
    const SpaceDescriptor& space = net.space();
    const SlotTable& table = net.table();
    const int c = net.channels();

    const int x = tape.input(inputs);
    const int stem =
        tape.conv2d(x, table.slot_offset(table.stem_w_slot()), c, 3, 1, 1);

    int prev_prev = stem;
    int prev = stem;
    for (int layer = 0; layer < space.stack_depth; ++layer) {
        const bool reduce = space.is_reduction_layer(layer);
        const CellGenome& cell = reduce ? genome_.reduction : genome_.normal;

        int s0 = prev_prev;
        const int s1 = prev;
        // Align the older input's resolution when a reduction sits between.
        while (tape.value(s0).shape[2] > tape.value(s1).shape[2]) s0 = tape.fac_reduce(s0);

        std::vector<int> vals = {s0, s1};
        std::vector<int> node_outs;
        node_outs.reserve(space.node_count);
        for (int j = 0; j < space.node_count; ++j) {
            const NodeGene& gene = cell.nodes[j];
            auto stride_of = [&](int pred) { return reduce && pred < space.input_count ? 2 : 1; };
            const int a = tape.apply_op(space.op_set[gene.op_a], vals[gene.pred_a],
                                        net.edge_offset(layer, j, gene.pred_a, gene.op_a),
                                        stride_of(gene.pred_a));
            const int b = tape.apply_op(space.op_set[gene.op_b], vals[gene.pred_b],
                                        net.edge_offset(layer, j, gene.pred_b, gene.op_b),
                                        stride_of(gene.pred_b));
            const int out = tape.add2_scaled(a, b, 0.5f);
            vals.push_back(out);
            node_outs.push_back(out);
        }
        const int cell_out = tape.mean_list(node_outs);
        prev_prev = prev;
        prev = cell_out;
    }

    const int pooled = tape.gap(prev);
    return tape.linear(pooled, table.slot_offset(table.fc_w_slot()), net.shape().num_classes);
}

Tensor SampledNet::logits(const Tensor& inputs) const {
    Tape tape(&net_->store());
    const int out = build_forward(tape, inputs);
    return tape.value(out);
}

// ============================================================================
// Gradient operations
// ============================================================================

LossValue accumulate_grad(const SampledNet& s, const Batch& batch, float scale,
                          std::span<float> sink) {
    Tape tape(&s.net().store());
    const int logits = s.build_forward(tape, batch.inputs);
    auto ce = tape.softmax_ce(logits, batch.targets);
    tape.backward(ce.node, scale, sink);
    return ce.loss;
}

GradResult grad_single(const SampledNet& s, const Batch& batch) {
    GradResult r;
    r.grad.assign(s.net().store().total(), 0.0f);
    r.loss = accumulate_grad(s, batch, 1.0f, r.grad);
    return r;
}

GradResult grad_population(const SuperNet& net, const std::vector<Genome>& genomes,
                           const Batch& batch) {
    if (genomes.empty()) throw ConfigError("grad_population: empty genome list");
    GradResult r;
    r.grad.assign(net.store().total(), 0.0f);
    const float scale = 1.0f / static_cast<float>(genomes.size());
    double loss_acc = 0.0;
    for (const Genome& g : genomes) {
        SampledNet s(net, g);
        const LossValue lv = accumulate_grad(s, batch, scale, r.grad);
        loss_acc += lv.value;
        r.loss.correct = lv.correct;
    }
    r.loss.value = static_cast<float>(loss_acc / static_cast<double>(genomes.size()));
    return r;
}

GradResult grad_minibatch(const SuperNet& net, const std::vector<Genome>& genomes, int batch_arch,
                          Rng& rng, const Batch& batch, std::vector<int>* picked) {
    const int population = static_cast<int>(genomes.size());
    if (batch_arch < 1 || batch_arch > population)
        throw ConfigError("grad_minibatch: B must be in [1, P]");
    // Partial Fisher-Yates: the first B entries are a uniform sample
    // without replacement.
    std::vector<int> idx(population);
    for (int i = 0; i < population; ++i) idx[i] = i;
    for (int i = 0; i < batch_arch; ++i) {
        const int j = i + static_cast<int>(rng.u32(static_cast<uint32_t>(population - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(batch_arch);
    if (picked) *picked = idx;

    GradResult r;
    r.grad.assign(net.store().total(), 0.0f);
    const float scale = 1.0f / static_cast<float>(batch_arch);
    double loss_acc = 0.0;
    for (int i : idx) {
        SampledNet s(net, genomes[static_cast<size_t>(i)]);
        const LossValue lv = accumulate_grad(s, batch, scale, r.grad);
        loss_acc += lv.value;
        r.loss.correct = lv.correct;
    }
    r.loss.value = static_cast<float>(loss_acc / static_cast<double>(batch_arch));
    return r;
}

} // namespace cars
