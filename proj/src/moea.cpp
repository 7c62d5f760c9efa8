#include "cars/moea.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cars {

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    if (a.arity() != b.arity() || a.labels != b.labels)
        throw StructuralError("dominates: objective vectors disagree");
    bool strict = false;
    for (size_t k = 0; k < a.values.size(); ++k) {
        if (a.values[k] > b.values[k]) return false;
        if (a.values[k] < b.values[k]) strict = true;
    }
    return strict;
}

FrontSet nondominated_sort(const std::vector<Individual>& pop) {
    if (pop.empty()) throw UsageError("nondominated_sort on empty population");
    const int n = static_cast<int>(pop.size());
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> dom_count(n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (dominates(pop[i].objectives, pop[j].objectives)) {
                dominated[i].push_back(j);
                ++dom_count[j];
            } else if (dominates(pop[j].objectives, pop[i].objectives)) {
                dominated[j].push_back(i);
                ++dom_count[i];
            }
        }
    }
    FrontSet fs;
    std::vector<int> current;
    for (int i = 0; i < n; ++i) {
        if (dom_count[i] == 0) current.push_back(i);
    }
    while (!current.empty()) {
        fs.fronts.push_back(current);
        std::vector<int> next;
        for (int i : current) {
            for (int j : dominated[i]) {
                if (--dom_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fs;
}

// ============================================================================
// Reference directions and niching
// ============================================================================

namespace {

uint64_t binomial(int n, int k) {
    uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<uint64_t>(n - k + i) / i;
    return r;
}

void compositions(int parts, int total, std::vector<int>& cur,
                  std::vector<std::vector<double>>& out, int divisions) {
    if (parts == 1) {
        cur.push_back(total);
        std::vector<double> dir(cur.size());
        for (size_t i = 0; i < cur.size(); ++i)
            dir[i] = static_cast<double>(cur[i]) / divisions;
        out.push_back(std::move(dir));
        cur.pop_back();
        return;
    }
    for (int v = 0; v <= total; ++v) {
        cur.push_back(v);
        compositions(parts - 1, total - v, cur, out, divisions);
        cur.pop_back();
    }
}

double perp_distance(const std::vector<double>& f, const std::vector<double>& dir) {
    double dd = 0.0, fd = 0.0, ff = 0.0;
    for (size_t i = 0; i < f.size(); ++i) {
        dd += dir[i] * dir[i];
        fd += f[i] * dir[i];
        ff += f[i] * f[i];
    }
    const double proj = fd * fd / dd;
    return std::sqrt(std::max(0.0, ff - proj));
}

int nearest_direction(const std::vector<double>& f, const std::vector<std::vector<double>>& dirs,
                      double* dist_out) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t d = 0; d < dirs.size(); ++d) {
        const double dist = perp_distance(f, dirs[d]);
        if (dist < best_d) {
            best_d = dist;
            best = static_cast<int>(d);
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

} // namespace

std::vector<std::vector<double>> das_dennis_directions(int m, int min_count) {
    if (m < 1) throw UsageError("das_dennis_directions: m must be >= 1");
    int divisions = 1;
    while (binomial(divisions + m - 1, m - 1) < static_cast<uint64_t>(std::max(1, min_count)))
        ++divisions;
    std::vector<std::vector<double>> out;
    std::vector<int> cur;
    compositions(m, divisions, cur, out, divisions);
    return out;
}

std::vector<int> niche_select(const std::vector<Individual>& front, int k,
                              const std::vector<std::vector<double>>& dirs,
                              const std::vector<Individual>& already_selected) {
    if (k <= 0 || k > static_cast<int>(front.size()))
        throw UsageError("niche_select: k out of range");
    const size_t m = front[0].objectives.arity();

    // Ideal point over the whole working set; nadir over its first front.
    std::vector<const Individual*> all;
    for (const auto& ind : already_selected) all.push_back(&ind);
    for (const auto& ind : front) all.push_back(&ind);
    std::vector<double> ideal(m, std::numeric_limits<double>::infinity());
    for (const auto* ind : all) {
        for (size_t x = 0; x < m; ++x) ideal[x] = std::min(ideal[x], ind->objectives.values[x]);
    }
    std::vector<double> nadir(m, -std::numeric_limits<double>::infinity());
    for (const auto* ind : all) {
        bool dominated_by_any = false;
        for (const auto* other : all) {
            if (other != ind && dominates(other->objectives, ind->objectives)) {
                dominated_by_any = true;
                break;
            }
        }
        if (dominated_by_any) continue;
        for (size_t x = 0; x < m; ++x) nadir[x] = std::max(nadir[x], ind->objectives.values[x]);
    }
    std::vector<double> span(m);
    for (size_t x = 0; x < m; ++x) {
        span[x] = nadir[x] - ideal[x];
        if (!(span[x] > 1e-12)) span[x] = 1.0;
    }
    auto normalized = [&](const Individual& ind) {
        std::vector<double> f(m);
        for (size_t x = 0; x < m; ++x) f[x] = (ind.objectives.values[x] - ideal[x]) / span[x];
        return f;
    };

    std::vector<int> counts(dirs.size(), 0);
    for (const auto& ind : already_selected) {
        counts[nearest_direction(normalized(ind), dirs, nullptr)]++;
    }

    struct Cand {
        int index;
        double dist;
    };
    std::vector<std::vector<Cand>> per_niche(dirs.size());
    for (size_t i = 0; i < front.size(); ++i) {
        double dist = 0.0;
        const int d = nearest_direction(normalized(front[i]), dirs, &dist);
        per_niche[d].push_back({static_cast<int>(i), dist});
    }
    for (auto& cands : per_niche) {
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return a.index < b.index;
        });
    }

    std::vector<int> picked;
    picked.reserve(k);
    while (static_cast<int>(picked.size()) < k) {
        int best_dir = -1;
        for (size_t d = 0; d < dirs.size(); ++d) {
            if (per_niche[d].empty()) continue;
            if (best_dir < 0 || counts[d] < counts[best_dir]) best_dir = static_cast<int>(d);
        }
        auto& cands = per_niche[best_dir];
        picked.push_back(cands.front().index);
        cands.erase(cands.begin());
        counts[best_dir]++;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

// ============================================================================
// Survivor selection
// ============================================================================

namespace {

std::vector<int> select_by_fronts(const std::vector<Individual>& pop, int survivors,
                                  const FrontSet& fs) {
    const auto dirs =
        das_dennis_directions(static_cast<int>(pop[0].objectives.arity()), survivors);
    std::vector<int> selected;
    for (const auto& front : fs.fronts) {
        const int room = survivors - static_cast<int>(selected.size());
        if (room <= 0) break;
        if (static_cast<int>(front.size()) <= room) {
            selected.insert(selected.end(), front.begin(), front.end());
            continue;
        }
        std::vector<Individual> front_inds, chosen_inds;
        for (int i : front) front_inds.push_back(pop[i]);
        for (int i : selected) chosen_inds.push_back(pop[i]);
        for (int local : niche_select(front_inds, room, dirs, chosen_inds))
            selected.push_back(front[local]);
        break;
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

} // namespace

std::vector<int> nsga3_select(const std::vector<Individual>& pop, int survivors) {
    if (survivors <= 0 || survivors > static_cast<int>(pop.size()))
        throw UsageError("nsga3_select: survivor count out of range");
    return select_by_fronts(pop, survivors, nondominated_sort(pop));
}

std::vector<int> pnsga3_select(const std::vector<Individual>& pop, int survivors) {
    if (survivors <= 0) throw UsageError("pnsga3_select: survivor count must be positive");
    if (static_cast<int>(pop.size()) < survivors)
        throw UsageError("pnsga3_select: population smaller than survivor count");

    // Second sort: first objective (error) replaced by negated improvement
    // speed, the rest kept.
    std::vector<Individual> speed_pop = pop;
    for (auto& ind : speed_pop) {
        ind.objectives.values[0] = -ind.speed;
        ind.objectives.labels[0] = "neg_speed";
    }
    const FrontSet primary = nondominated_sort(pop);
    const FrontSet speedy = nondominated_sort(speed_pop);

    const auto dirs =
        das_dennis_directions(static_cast<int>(pop[0].objectives.arity()), survivors);

    std::vector<char> in_selected(pop.size(), 0);
    std::vector<int> selected;
    const size_t layers = std::max(primary.fronts.size(), speedy.fronts.size());
    for (size_t i = 0; i < layers && static_cast<int>(selected.size()) < survivors; ++i) {
        std::vector<int> layer_new;
        auto add_from = [&](const FrontSet& fs) {
            if (i >= fs.fronts.size()) return;
            for (int idx : fs.fronts[i]) {
                if (!in_selected[idx]) {
                    in_selected[idx] = 1;
                    layer_new.push_back(idx);
                }
            }
        };
        add_from(primary);
        add_from(speedy);
        std::sort(layer_new.begin(), layer_new.end());

        const int room = survivors - static_cast<int>(selected.size());
        if (static_cast<int>(layer_new.size()) <= room) {
            selected.insert(selected.end(), layer_new.begin(), layer_new.end());
            continue;
        }
        std::vector<Individual> front_inds, chosen_inds;
        for (int idx : layer_new) front_inds.push_back(pop[idx]);
        for (int idx : selected) chosen_inds.push_back(pop[idx]);
        for (int local : niche_select(front_inds, room, dirs, chosen_inds))
            selected.push_back(layer_new[local]);
        break;
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

} // namespace cars
