#pragma once

#include <cstdint>
#include <vector>

#include "gwtrace/offspring.hpp"
#include "gwtrace/rng.hpp"

namespace gwtrace {

// Default cap on nodes any single simulation call may materialize.
inline constexpr std::uint64_t kDefaultNodeBudget = 100'000'000ULL;

// Generation sizes z[0..depth] of one realized tree, z[0] == 1.
struct LevelProfile {
    std::vector<std::uint64_t> z;
    int depth() const { return static_cast<int>(z.size()) - 1; }
};

// A realized tree up to a fixed depth, stored level by level.
//
// Node ids are contiguous within a level: level n occupies the id range
// [level_offsets[n], level_offsets[n+1]).  parent[id] lives in the previous
// level; the root's parent is kNoParent.  Children of one parent are
// contiguous, so the layout doubles as a breadth-first ordering.
struct TreeArena {
    static constexpr std::uint32_t kNoParent = 0xFFFFFFFFu;

    std::vector<std::uint32_t> parent;
    std::vector<std::uint64_t> level_offsets;  // size depth + 2

    std::uint64_t size() const { return parent.size(); }
    int depth() const { return static_cast<int>(level_offsets.size()) - 2; }

    // Level containing `node`; O(log depth).
    int level_of(std::uint64_t node) const;
};

// Generation sizes only; memory O(depth).  Throws NodeBudgetError if the
// running total would exceed node_budget.
LevelProfile simulate_profile(const OffspringDist& dist, int depth,
                              RngStream& rng,
                              std::uint64_t node_budget = kDefaultNodeBudget);

// Sum of all generation sizes in the profile.
std::uint64_t cumulative_size(const LevelProfile& profile);

// Full arena with parent pointers.  Same draw order as simulate_profile:
// one offspring draw per node, level by level, left to right, so the same
// stream yields the same generation sizes in both.
TreeArena build_tree(const OffspringDist& dist, int depth, RngStream& rng,
                     std::uint64_t node_budget = kDefaultNodeBudget);

// One normalized population size Z_horizon / m^horizon per replica.
// Replica i uses RngStream(seed, i), so results do not depend on worker
// count or scheduling.  workers <= 0 means use hardware concurrency.
struct WSample {
    double value;
    int horizon;
};
std::vector<WSample> estimate_W_samples(
    const OffspringDist& dist, int horizon, std::uint64_t replicas,
    std::uint64_t seed, int workers = 0,
    std::uint64_t node_budget = kDefaultNodeBudget);

// Level sizes of the size-biased tree: alongside everyone's ordinary
// offspring, each generation receives one immigrant group whose size is
// drawn from the size-biased step law.  Mean level sizes grow like
// m^n + (m^n - 1) * g2 / (m (m - 1)), strictly faster than the ordinary
// process when the offspring law is non-degenerate.
LevelProfile simulate_size_biased_profile(
    const OffspringDist& dist, int depth, RngStream& rng,
    std::uint64_t node_budget = kDefaultNodeBudget);

// Exact mean level size of the size-biased process at generation n.
double size_biased_mean(const OffspringDist& dist, int n);

}  // namespace gwtrace
