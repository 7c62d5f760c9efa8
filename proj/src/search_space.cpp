#include "cars/search_space.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace cars {

// ============================================================================
// Op vocabulary
// ============================================================================

namespace {
constexpr const char* kOpNames[] = {
    "conv3x3", "conv1x1", "sepconv3x3", "sepconv5x5", "maxpool3x3", "avgpool3x3", "skip", "none",
};
} // namespace

const char* op_name(OpKind k) { return kOpNames[static_cast<int>(k)]; }

OpKind op_from_name(const std::string& name) {
    for (int i = 0; i < 8; ++i) {
        if (name == kOpNames[i]) return static_cast<OpKind>(i);
    }
    throw ConfigError("unknown op name: " + name);
}

bool op_has_params(OpKind k) {
    switch (k) {
    case OpKind::conv3x3:
    case OpKind::conv1x1:
    case OpKind::sepconv3x3:
    case OpKind::sepconv5x5:
        return true;
    default:
        return false;
    }
}

size_t op_param_count(OpKind k, int channels) {
    const size_t c = static_cast<size_t>(channels);
    switch (k) {
    case OpKind::conv3x3:
        return c * c * 9 + c;
    case OpKind::conv1x1:
        return c * c + c;
    case OpKind::sepconv3x3:
        return c * 9 + c * c + c;
    case OpKind::sepconv5x5:
        return c * 25 + c * c + c;
    default:
        return 0;
    }
}

// ============================================================================
// SpaceDescriptor
// ============================================================================

SpaceDescriptor SpaceDescriptor::default_desk() {
    SpaceDescriptor s;
    s.op_set = {OpKind::conv3x3,    OpKind::conv1x1,    OpKind::maxpool3x3,
                OpKind::avgpool3x3, OpKind::skip,       OpKind::none};
    s.node_count = 4;
    s.input_count = 2;
    s.stack_depth = 5;
    s.reduction_positions = {2};
    s.stem_channels = 8;
    return s;
}

SpaceDescriptor SpaceDescriptor::darts8() {
    SpaceDescriptor s = default_desk();
    s.op_set = {OpKind::conv3x3,    OpKind::conv1x1,    OpKind::sepconv3x3, OpKind::sepconv5x5,
                OpKind::maxpool3x3, OpKind::avgpool3x3, OpKind::skip,       OpKind::none};
    return s;
}

void SpaceDescriptor::validate() const {
    if (op_set.size() < 2) throw ConfigError("op_set must have at least 2 ops");
    if (op_id_of(OpKind::none) < 0) throw ConfigError("op_set must include `none`");
    for (size_t i = 0; i < op_set.size(); ++i) {
        for (size_t j = i + 1; j < op_set.size(); ++j) {
            if (op_set[i] == op_set[j]) throw ConfigError("duplicate op in op_set");
        }
    }
    if (node_count < 1) throw ConfigError("node_count must be >= 1");
    if (input_count < 1) throw ConfigError("input_count must be >= 1");
    if (stack_depth < 1) throw ConfigError("stack_depth must be >= 1");
    if (stem_channels < 1) throw ConfigError("stem_channels must be >= 1");
    for (size_t i = 0; i < reduction_positions.size(); ++i) {
        const int p = reduction_positions[i];
        if (p < 0 || p >= stack_depth) throw ConfigError("reduction position out of range");
        if (i > 0 && reduction_positions[i - 1] >= p)
            throw ConfigError("reduction positions must be strictly increasing");
    }
    if (!reduction_positions.empty() && stem_channels % 2 != 0)
        throw ConfigError("stem_channels must be even when reduction cells are used");
}

int SpaceDescriptor::edges_per_cell() const {
    int n = 0;
    for (int j = 0; j < node_count; ++j) n += pred_count(j);
    return n;
}

bool SpaceDescriptor::is_reduction_layer(int layer) const {
    return std::find(reduction_positions.begin(), reduction_positions.end(), layer) !=
           reduction_positions.end();
}

int SpaceDescriptor::op_id_of(OpKind k) const {
    for (size_t i = 0; i < op_set.size(); ++i) {
        if (op_set[i] == k) return static_cast<int>(i);
    }
    return -1;
}

// ============================================================================
// Genome validity and identity
// ============================================================================

namespace {

void validate_cell(const CellGenome& cell, const SpaceDescriptor& space, const char* which) {
    const std::string tag = std::string(which) + " cell: ";
    if (cell.node_count != space.node_count || cell.input_count != space.input_count)
        throw StructuralError(tag + "arity does not match space");
    if (static_cast<int>(cell.nodes.size()) != space.node_count)
        throw StructuralError(tag + "node list length != node_count");
    for (int j = 0; j < space.node_count; ++j) {
        const NodeGene& n = cell.nodes[j];
        const int np = space.pred_count(j);
        if (n.pred_a < 0 || n.pred_a >= np || n.pred_b < 0 || n.pred_b >= np)
            throw StructuralError(tag + "predecessor out of range at node " + std::to_string(j));
        if (n.pred_a > n.pred_b)
            throw StructuralError(tag + "pred_a > pred_b at node " + std::to_string(j));
        if (n.op_a < 0 || n.op_a >= space.num_ops() || n.op_b < 0 || n.op_b >= space.num_ops())
            throw StructuralError(tag + "op id out of range at node " + std::to_string(j));
    }
}

} // namespace

void validate_genome(const Genome& g, const SpaceDescriptor& space) {
    validate_cell(g.normal, space, "normal");
    validate_cell(g.reduction, space, "reduction");
}

bool genome_valid(const Genome& g, const SpaceDescriptor& space) {
    try {
        validate_genome(g, space);
        return true;
    } catch (const StructuralError&) {
        return false;
    }
}

NodeGene normalize_node(const NodeGene& n) {
    NodeGene r = n;
    if (r.pred_a > r.pred_b || (r.pred_a == r.pred_b && r.op_a > r.op_b)) {
        std::swap(r.pred_a, r.pred_b);
        std::swap(r.op_a, r.op_b);
    }
    return r;
}

Genome normalize_genome(const Genome& g) {
    Genome r = g;
    for (auto& n : r.normal.nodes) n = normalize_node(n);
    for (auto& n : r.reduction.nodes) n = normalize_node(n);
    return r;
}

bool same_architecture(const Genome& a, const Genome& b) {
    const Genome na = normalize_genome(a);
    const Genome nb = normalize_genome(b);
    return na.normal == nb.normal && na.reduction == nb.reduction;
}

// ============================================================================
// Text form
// ============================================================================

namespace {

void cell_to_text(const CellGenome& cell, std::ostringstream& os) {
    os << '[';
    for (size_t j = 0; j < cell.nodes.size(); ++j) {
        const NodeGene& n = cell.nodes[j];
        if (j) os << ';';
        os << '(' << n.pred_a << ',' << n.pred_b << ',' << n.op_a << ',' << n.op_b << ')';
    }
    os << ']';
}

CellGenome cell_from_text(const std::string& body) {
    CellGenome cell;
    cell.nodes.clear();
    size_t pos = 0;
    while (pos < body.size()) {
        if (body[pos] == ';') {
            ++pos;
            continue;
        }
        int pa, pb, oa, ob;
        int consumed = 0;
        if (std::sscanf(body.c_str() + pos, "(%d,%d,%d,%d)%n", &pa, &pb, &oa, &ob, &consumed) != 4)
            throw DataError("malformed genome node text: " + body.substr(pos));
        cell.nodes.push_back(NodeGene{pa, oa, pb, ob});
        pos += static_cast<size_t>(consumed);
    }
    cell.node_count = static_cast<int>(cell.nodes.size());
    return cell;
}

} // namespace

std::string genome_to_text(const Genome& g) {
    std::ostringstream os;
    os << "normal=";
    cell_to_text(g.normal, os);
    os << " reduce=";
    cell_to_text(g.reduction, os);
    return os.str();
}

Genome genome_from_text(const std::string& line, uint64_t id) {
    const auto npos = line.find("normal=[");
    const auto rpos = line.find(" reduce=[");
    if (npos == std::string::npos || rpos == std::string::npos || line.back() != ']')
        throw DataError("malformed genome text: " + line);
    const size_t nstart = npos + 8;
    const std::string nbody = line.substr(nstart, line.find(']', nstart) - nstart);
    const size_t rstart = rpos + 9;
    const std::string rbody = line.substr(rstart, line.size() - 1 - rstart);
    Genome g;
    g.normal = cell_from_text(nbody);
    g.reduction = cell_from_text(rbody);
    g.normal.input_count = 2;
    g.reduction.input_count = 2;
    g.id = id;
    return g;
}

// ============================================================================
// Genetic operators
// ============================================================================

namespace {

// Uniform node draw; the pair is oriented by predecessor, ops keep their
// draw order on ties so every op slot stays marginally uniform.
NodeGene random_node(const SpaceDescriptor& space, int node, Rng& rng) {
    const uint32_t np = static_cast<uint32_t>(space.pred_count(node));
    const uint32_t k = static_cast<uint32_t>(space.num_ops());
    NodeGene n;
    n.pred_a = static_cast<int>(rng.u32(np));
    n.op_a = static_cast<int>(rng.u32(k));
    n.pred_b = static_cast<int>(rng.u32(np));
    n.op_b = static_cast<int>(rng.u32(k));
    if (n.pred_a > n.pred_b) {
        std::swap(n.pred_a, n.pred_b);
        std::swap(n.op_a, n.op_b);
    }
    return n;
}

CellGenome random_cell(const SpaceDescriptor& space, Rng& rng) {
    CellGenome cell;
    cell.node_count = space.node_count;
    cell.input_count = space.input_count;
    cell.nodes.resize(space.node_count);
    for (int j = 0; j < space.node_count; ++j) cell.nodes[j] = random_node(space, j, rng);
    return cell;
}

} // namespace

Genome random_genome(const SpaceDescriptor& space, Rng& rng, uint64_t id) {
    Genome g;
    g.normal = random_cell(space, rng);
    g.reduction = random_cell(space, rng);
    g.id = id;
    return g;
}

Genome crossover(const Genome& a, const Genome& b, const SpaceDescriptor& space, Rng& rng,
                 double node_rate, uint64_t id) {
    validate_genome(a, space);
    validate_genome(b, space);
    Genome child = a;
    child.id = id;
    for (int j = 0; j < space.node_count; ++j) {
        if (rng.bernoulli(node_rate)) child.normal.nodes[j] = b.normal.nodes[j];
    }
    for (int j = 0; j < space.node_count; ++j) {
        if (rng.bernoulli(node_rate)) child.reduction.nodes[j] = b.reduction.nodes[j];
    }
    return child;
}

Genome mutate(const Genome& a, const SpaceDescriptor& space, Rng& rng, double node_rate,
              uint64_t id) {
    validate_genome(a, space);
    Genome child = a;
    child.id = id;
    for (int j = 0; j < space.node_count; ++j) {
        if (rng.bernoulli(node_rate)) child.normal.nodes[j] = random_node(space, j, rng);
    }
    for (int j = 0; j < space.node_count; ++j) {
        if (rng.bernoulli(node_rate)) child.reduction.nodes[j] = random_node(space, j, rng);
    }
    return child;
}

std::vector<Genome> generate_offspring(const std::vector<Genome>& parents, int t,
                                       const SpaceDescriptor& space, Rng& rng, uint64_t& next_id,
                                       std::vector<OffspringOp>* trace) {
    if (parents.empty()) throw UsageError("generate_offspring on empty population");
    if (t < 1) throw ConfigError("offspring expand ratio t must be >= 1");
    const size_t count = static_cast<size_t>(t) * parents.size();
    std::vector<Genome> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const double u = rng.uniform();
        if (u < 0.25) {
            const Genome& pa = parents[rng.index(parents.size())];
            const Genome& pb = parents[rng.index(parents.size())];
            out.push_back(crossover(pa, pb, space, rng, 0.5, next_id++));
            if (trace) trace->push_back(OffspringOp::crossover);
        } else if (u < 0.5) {
            const Genome& p = parents[rng.index(parents.size())];
            out.push_back(mutate(p, space, rng, 0.5, next_id++));
            if (trace) trace->push_back(OffspringOp::mutation);
        } else {
            out.push_back(random_genome(space, rng, next_id++));
            if (trace) trace->push_back(OffspringOp::random);
        }
    }
    return out;
}

// ============================================================================
// SlotTable and masks
// ============================================================================

SlotTable::SlotTable(const SpaceDescriptor& space, const NetShape& shape)
    : space_(space), shape_(shape) {
    space_.validate();
    const int c = space_.stem_channels;
    const int k = space_.num_ops();

    auto push = [&](SlotKey key, size_t size) {
        keys_.push_back(key);
        sizes_.push_back(size);
        offsets_.push_back(total_params_);
        total_params_ += size;
    };

    push({SlotKey::Kind::stem_w, -1, -1, -1, -1},
         static_cast<size_t>(c) * shape_.in_channels * 9);
    push({SlotKey::Kind::stem_b, -1, -1, -1, -1}, static_cast<size_t>(c));

    edge_stride_layer_ = space_.edges_per_cell() * k;
    edge_index_.assign(static_cast<size_t>(space_.stack_depth) * edge_stride_layer_, 0);
    for (int layer = 0; layer < space_.stack_depth; ++layer) {
        int edge = 0;
        for (int node = 0; node < space_.node_count; ++node) {
            for (int pred = 0; pred < space_.pred_count(node); ++pred, ++edge) {
                for (int op = 0; op < k; ++op) {
                    edge_index_[static_cast<size_t>(layer) * edge_stride_layer_ + edge * k + op] =
                        keys_.size();
                    push({SlotKey::Kind::cell_edge, layer, node, pred, op},
                         op_param_count(space_.op_set[op], c));
                }
            }
        }
    }

    push({SlotKey::Kind::fc_w, -1, -1, -1, -1},
         static_cast<size_t>(c) * shape_.num_classes);
    push({SlotKey::Kind::fc_b, -1, -1, -1, -1}, static_cast<size_t>(shape_.num_classes));
}

size_t SlotTable::edge_slot(int layer, int node, int pred, int op) const {
    int edge = 0;
    for (int j = 0; j < node; ++j) edge += space_.pred_count(j);
    edge += pred;
    return edge_index_[static_cast<size_t>(layer) * edge_stride_layer_ +
                       edge * space_.num_ops() + op];
}

std::string SlotTable::slot_name(size_t slot) const {
    const SlotKey& key = keys_[slot];
    switch (key.kind) {
    case SlotKey::Kind::stem_w:
        return "stem.w";
    case SlotKey::Kind::stem_b:
        return "stem.b";
    case SlotKey::Kind::fc_w:
        return "fc.w";
    case SlotKey::Kind::fc_b:
        return "fc.b";
    case SlotKey::Kind::cell_edge: {
        std::ostringstream os;
        os << 'l' << key.layer << ".n" << key.node << ".e" << key.pred << '.'
           << op_name(space_.op_set[key.op]);
        return os.str();
    }
    }
    return {};
}

std::vector<uint8_t> encode_mask(const Genome& g, const SlotTable& table) {
    const SpaceDescriptor& space = table.space();
    validate_genome(g, space);
    std::vector<uint8_t> mask(table.slot_count(), 0);
    mask[table.stem_w_slot()] = 1;
    mask[table.stem_b_slot()] = 1;
    mask[table.fc_w_slot()] = 1;
    mask[table.fc_b_slot()] = 1;
    for (int layer = 0; layer < space.stack_depth; ++layer) {
        const CellGenome& cell = space.is_reduction_layer(layer) ? g.reduction : g.normal;
        for (int j = 0; j < space.node_count; ++j) {
            const NodeGene& n = cell.nodes[j];
            mask[table.edge_slot(layer, j, n.pred_a, n.op_a)] = 1;
            mask[table.edge_slot(layer, j, n.pred_b, n.op_b)] = 1;
        }
    }
    return mask;
}

Genome decode_mask(const std::vector<uint8_t>& mask, const SlotTable& table, uint64_t id) {
    const SpaceDescriptor& space = table.space();
    if (mask.size() != table.slot_count())
        throw StructuralError("mask length does not match slot table");

    // Representative layer for each cell type.
    int normal_layer = -1;
    int reduction_layer = -1;
    for (int layer = 0; layer < space.stack_depth; ++layer) {
        if (space.is_reduction_layer(layer)) {
            if (reduction_layer < 0) reduction_layer = layer;
        } else if (normal_layer < 0) {
            normal_layer = layer;
        }
    }

    auto decode_cell = [&](int layer) {
        CellGenome cell;
        cell.node_count = space.node_count;
        cell.input_count = space.input_count;
        cell.nodes.assign(space.node_count, NodeGene{});
        if (layer < 0) return cell;
        for (int j = 0; j < space.node_count; ++j) {
            std::vector<std::pair<int, int>> active;
            for (int pred = 0; pred < space.pred_count(j); ++pred) {
                for (int op = 0; op < space.num_ops(); ++op) {
                    if (mask[table.edge_slot(layer, j, pred, op)]) active.emplace_back(pred, op);
                }
            }
            if (active.empty() || active.size() > 2)
                throw StructuralError("mask does not describe a two-input node");
            const auto& [pa, oa] = active.front();
            const auto& [pb, ob] = active.back();
            cell.nodes[j] = NodeGene{pa, oa, pb, ob};
        }
        return cell;
    };

    Genome g;
    g.normal = decode_cell(normal_layer);
    g.reduction = decode_cell(reduction_layer);
    g.id = id;
    validate_genome(g, space);
    return g;
}

} // namespace cars
