#include "gwtrace/gw_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwtrace/detail/parallel.hpp"
#include "gwtrace/errors.hpp"

namespace gwtrace {

namespace {

[[noreturn]] void throw_budget(const char* what, std::uint64_t budget) {
    throw NodeBudgetError(std::string(what) +
                          " would exceed the node budget of " +
                          std::to_string(budget) +
                          "; lower the depth or raise node_budget");
}

void check_depth(int depth) {
    if (depth < 0) throw DomainError("depth must be >= 0");
}

}  // namespace

int TreeArena::level_of(std::uint64_t node) const {
    auto it = std::upper_bound(level_offsets.begin(), level_offsets.end(), node);
    return static_cast<int>(it - level_offsets.begin()) - 1;
}

LevelProfile simulate_profile(const OffspringDist& dist, int depth,
                              RngStream& rng, std::uint64_t node_budget) {
    check_depth(depth);
    LevelProfile profile;
    profile.z.resize(depth + 1);
    profile.z[0] = 1;
    std::uint64_t total = 1;
    for (int n = 0; n < depth; ++n) {
        const std::uint64_t zn = profile.z[n];
        const std::uint64_t room = node_budget - std::min(node_budget, total);
        // cheapest possible next level is min_support per node; refuse early
        if (static_cast<std::uint64_t>(dist.min_support()) * zn > room)
            throw_budget("growing the next generation", node_budget);
        std::uint64_t next = 0;
        for (std::uint64_t i = 0; i < zn; ++i) next += dist.sample(rng);
        if (next > room)
            throw_budget("growing the next generation", node_budget);
        profile.z[n + 1] = next;
        total += next;
    }
    return profile;
}

std::uint64_t cumulative_size(const LevelProfile& profile) {
    std::uint64_t total = 0;
    for (std::uint64_t z : profile.z) total += z;
    return total;
}

TreeArena build_tree(const OffspringDist& dist, int depth, RngStream& rng,
                     std::uint64_t node_budget) {
    check_depth(depth);
    // arena ids are 32-bit; keep the total below that no matter the budget
    node_budget = std::min<std::uint64_t>(node_budget, 0xFFFFFFF0ull);

    TreeArena tree;
    tree.parent.push_back(TreeArena::kNoParent);
    tree.level_offsets.push_back(0);
    tree.level_offsets.push_back(1);

    for (int n = 0; n < depth; ++n) {
        const std::uint64_t level_begin = tree.level_offsets[n];
        const std::uint64_t level_end = tree.level_offsets[n + 1];
        for (std::uint64_t j = level_begin; j < level_end; ++j) {
            const std::uint32_t g = dist.sample(rng);
            if (tree.parent.size() + g > node_budget)
                throw_budget("expanding the tree", node_budget);
            for (std::uint32_t c = 0; c < g; ++c)
                tree.parent.push_back(static_cast<std::uint32_t>(j));
        }
        tree.level_offsets.push_back(tree.parent.size());
    }
    return tree;
}

std::vector<WSample> estimate_W_samples(const OffspringDist& dist, int horizon,
                                        std::uint64_t replicas,
                                        std::uint64_t seed, int workers,
                                        std::uint64_t node_budget) {
    check_depth(horizon);
    const double scale = std::pow(dist.mean(), horizon);
    std::vector<WSample> out(replicas);
    detail::parallel_for_indices(replicas, workers, [&](std::uint64_t i) {
        RngStream rng(seed, i);
        const LevelProfile p = simulate_profile(dist, horizon, rng, node_budget);
        out[i] = WSample{static_cast<double>(p.z[horizon]) / scale, horizon};
    });
    return out;
}

LevelProfile simulate_size_biased_profile(const OffspringDist& dist, int depth,
                                          RngStream& rng,
                                          std::uint64_t node_budget) {
    check_depth(depth);
    const OffspringDist biased = dist.size_biased();
    LevelProfile profile;
    profile.z.resize(depth + 1);
    profile.z[0] = 1;
    std::uint64_t total = 1;
    for (int n = 0; n < depth; ++n) {
        const std::uint64_t zn = profile.z[n];
        const std::uint64_t room = node_budget - std::min(node_budget, total);
        if (static_cast<std::uint64_t>(dist.min_support()) * zn > room)
            throw_budget("growing the next generation", node_budget);
        // ordinary offspring for everyone, plus one immigrant group drawn
        // from the size-biased step law
        std::uint64_t next = 0;
        for (std::uint64_t i = 0; i < zn; ++i) next += dist.sample(rng);
        next += biased.sample(rng);
        if (next > room)
            throw_budget("growing the next generation", node_budget);
        profile.z[n + 1] = next;
        total += next;
    }
    return profile;
}

double size_biased_mean(const OffspringDist& dist, int n) {
    check_depth(n);
    const double m = dist.mean();
    const double g2 = dist.second_moment();
    const double mn = std::pow(m, n);
    // E(Z~_n) = m^n + (m^n - 1) g2 / (m (m - 1)); the immigrant at step j
    // has mean g2/m and then grows by m^(n-1-j)
    return mn + (mn - 1.0) * g2 / (m * (m - 1.0));
}

}  // namespace gwtrace
