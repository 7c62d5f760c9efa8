#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cars/errors.hpp"

namespace cars {

// All objective values live under the minimization convention (error rate
// rather than accuracy, negated improvement speed, ...).
struct ObjectiveVector {
    std::vector<double> values;
    std::vector<std::string> labels;

    size_t arity() const { return values.size(); }
};

// One population member as the selection machinery sees it: objective
// vector for the primary sort plus the accuracy-increase speed driving the
// protective second sort.
struct Individual {
    uint64_t id = 0;
    ObjectiveVector objectives;
    double speed = 0.0;
};

// Successive non-dominated fronts; front 0 is the non-dominated set.
struct FrontSet {
    std::vector<std::vector<int>> fronts;
};

// Strict Pareto domination: a <= b on every objective, a < b on at least one.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

// Fast non-dominated sort; order within a front follows input index.
FrontSet nondominated_sort(const std::vector<Individual>& pop);

// Das-Dennis reference directions on the (m-1)-simplex: every direction has
// nonnegative components summing to one.
std::vector<std::vector<double>> das_dennis_directions(int m, int min_count);

// NSGA-III style niching: pick k members of `front`, normalizing objectives
// over already_selected + front, associating members to the nearest
// reference direction by perpendicular distance and filling the least
// crowded niches first. Ties break on smaller distance, then input index.
std::vector<int> niche_select(const std::vector<Individual>& front, int k,
                              const std::vector<std::vector<double>>& dirs,
                              const std::vector<Individual>& already_selected);

// Plain NSGA-III survivor selection on the primary objectives.
std::vector<int> nsga3_select(const std::vector<Individual>& pop, int survivors);

// Protected selection: fronts R from the primary sort and fronts Q from the
// speed sort (first objective replaced by -speed) are merged layer by layer,
// U_i = (R_1 u Q_1) u ... u (R_i u Q_i), until P members are reached; the
// last layer is cut with niche_select on the primary objectives.
std::vector<int> pnsga3_select(const std::vector<Individual>& pop, int survivors);

} // namespace cars
