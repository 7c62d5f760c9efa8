#pragma once

#include <string>

#include "cars/engine.hpp"

namespace cars {

// Checkpoint container: magic + version, a canonical JSON document, then
// raw little-endian float32 arrays (parameter values, momentum). Loading a
// truncated or mismatched file throws CorruptFileError before any state is
// handed out; load-then-save reproduces the file byte for byte.

void save_state(const SearchState& state, const std::string& path);
SearchState load_state(const std::string& path);

// Weights-only artifact: parameter store + space + run metadata.
void save_supernet(const SuperNet& net, int generation, const std::string& rng_state,
                   const std::string& path);

struct SupernetCheckpoint {
    SpaceDescriptor space;
    NetShape shape;
    std::vector<float> values;
    int generation = 0;
    std::string rng_state;
};

SupernetCheckpoint load_supernet(const std::string& path);

} // namespace cars
