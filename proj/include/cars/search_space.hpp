#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cars/errors.hpp"
#include "cars/rng.hpp"

namespace cars {

// ============================================================================
// Operation vocabulary
// ============================================================================

enum class OpKind : uint8_t {
    conv3x3 = 0,
    conv1x1,
    sepconv3x3,
    sepconv5x5,
    maxpool3x3,
    avgpool3x3,
    skip,
    none,
};

const char* op_name(OpKind k);
OpKind op_from_name(const std::string& name);
bool op_has_params(OpKind k);

// Floats owned by one cell op at a given channel count. Parameterized ops
// pack their tensors into a single flat slot:
//   conv:    [w C*C*k*k][b C]
//   sepconv: [dw C*k*k][pw C*C][b C]
size_t op_param_count(OpKind k, int channels);

// ============================================================================
// Search space and genome
// ============================================================================

struct NodeGene {
    int pred_a = 0;
    int op_a = 0;
    int pred_b = 0;
    int op_b = 0;

    bool operator==(const NodeGene&) const = default;
};

struct CellGenome {
    std::vector<NodeGene> nodes;
    int node_count = 4;
    int input_count = 2;

    bool operator==(const CellGenome&) const = default;
};

struct Genome {
    CellGenome normal;
    CellGenome reduction;
    uint64_t id = 0;
};

// Architecture space: op vocabulary, cell arity, and the macro layout the
// cells are stacked into.
struct SpaceDescriptor {
    std::vector<OpKind> op_set;
    int node_count = 4;
    int input_count = 2;
    int stack_depth = 5;
    std::vector<int> reduction_positions;
    int stem_channels = 8;

    // Desk-scale default: six ops (separable convs dropped), one reduction
    // at the middle of the stack.
    static SpaceDescriptor default_desk();
    // The full eight-op cell vocabulary.
    static SpaceDescriptor darts8();

    void validate() const; // throws ConfigError

    int num_ops() const { return static_cast<int>(op_set.size()); }
    int pred_count(int node) const { return input_count + node; }
    int edges_per_cell() const;
    bool is_reduction_layer(int layer) const;
    int op_id_of(OpKind k) const; // -1 when absent
};

// Structural agreement between a genome and a space. Throws StructuralError.
void validate_genome(const Genome& g, const SpaceDescriptor& space);
bool genome_valid(const Genome& g, const SpaceDescriptor& space);

// Node genes keep pred_a <= pred_b; ops travel with their predecessor when
// the pair is swapped, so op draws stay orientation-free. Two genomes are
// the same architecture when their fully normalized forms (ops sorted on
// pred ties) match.
NodeGene normalize_node(const NodeGene& n);
Genome normalize_genome(const Genome& g);
bool same_architecture(const Genome& a, const Genome& b);

// One-line text form: normal=[(p,p,op,op);...] reduce=[(...)]
std::string genome_to_text(const Genome& g);
Genome genome_from_text(const std::string& line, uint64_t id);

// ============================================================================
// Genetic operators
// ============================================================================

Genome random_genome(const SpaceDescriptor& space, Rng& rng, uint64_t id = 0);

// Per node position the child copies that node from a or b with probability
// node_rate each way; both cells handled independently.
Genome crossover(const Genome& a, const Genome& b, const SpaceDescriptor& space, Rng& rng,
                 double node_rate = 0.5, uint64_t id = 0);

// Per node position the gene is kept or replaced by a fresh uniform draw.
Genome mutate(const Genome& a, const SpaceDescriptor& space, Rng& rng, double node_rate = 0.5,
              uint64_t id = 0);

enum class OffspringOp : uint8_t { crossover, mutation, random };

// t*P offspring: crossover with probability 0.25, mutation 0.25, fresh
// random genome 0.5. Parents drawn uniformly. Fresh ids from next_id.
std::vector<Genome> generate_offspring(const std::vector<Genome>& parents, int t,
                                       const SpaceDescriptor& space, Rng& rng, uint64_t& next_id,
                                       std::vector<OffspringOp>* trace = nullptr);

// ============================================================================
// Parameter-slot layout and binary connection masks
// ============================================================================

struct NetShape {
    int in_channels = 1;
    int num_classes = 4;
    int height = 16;
    int width = 16;
};

struct SlotKey {
    enum class Kind : uint8_t { stem_w, stem_b, cell_edge, fc_w, fc_b };
    Kind kind = Kind::cell_edge;
    int layer = -1;
    int node = -1;
    int pred = -1;
    int op = -1;
};

// Ordered parameter-slot table. The slot order is a pure function of the
// space, so masks align across runs; sizes additionally depend on the
// network shape (stem input channels, classifier width).
class SlotTable {
  public:
    SlotTable(const SpaceDescriptor& space, const NetShape& shape);

    size_t slot_count() const { return keys_.size(); }
    size_t total_params() const { return total_params_; }
    const SlotKey& key(size_t slot) const { return keys_[slot]; }
    size_t slot_size(size_t slot) const { return sizes_[slot]; }
    size_t slot_offset(size_t slot) const { return offsets_[slot]; }
    std::string slot_name(size_t slot) const;

    size_t edge_slot(int layer, int node, int pred, int op) const;
    size_t stem_w_slot() const { return 0; }
    size_t stem_b_slot() const { return 1; }
    size_t fc_w_slot() const { return keys_.size() - 2; }
    size_t fc_b_slot() const { return keys_.size() - 1; }

    const SpaceDescriptor& space() const { return space_; }
    const NetShape& shape() const { return shape_; }

  private:
    SpaceDescriptor space_;
    NetShape shape_;
    std::vector<SlotKey> keys_;
    std::vector<size_t> sizes_;
    std::vector<size_t> offsets_;
    std::vector<size_t> edge_index_; // (layer, node, pred, op) -> slot
    size_t total_params_ = 0;
    int edge_stride_layer_ = 0;
};

// Binary mask over the slot table: 1 at slots owned by (edge, op) pairs the
// genome uses plus the always-active stem and classifier slots.
std::vector<uint8_t> encode_mask(const Genome& g, const SlotTable& table);

// Inverse of encode_mask up to architecture identity. Requires the space to
// instantiate at least one layer of each cell type the mask should pin down;
// with no reduction layers the reduction cell decodes to all-zero genes.
Genome decode_mask(const std::vector<uint8_t>& mask, const SlotTable& table, uint64_t id = 0);

} // namespace cars
