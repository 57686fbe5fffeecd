#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "gwtrace/gw_core.hpp"

namespace gwtrace {

// Every node at depth <= depth is marked independently with probability
// 1 - e^{-lambda}.  Requires tree.depth() == depth when marking.
struct UniformMarking {
    double lambda;
    int depth;
};

// A node at depth n is marked independently with probability
// 1 - e^{-(alpha/m)^n}; deeper nodes are exponentially harder to select.
struct DepthBiasedMarking {
    double alpha;
    double mean_m;
};

using MarkingModel = std::variant<UniformMarking, DepthBiasedMarking>;

// One byte per node, 1 = marked.  Consumes exactly one uniform per node in
// id order, so marking the same arena with coupled models (same stream
// state, larger rate) yields a superset of marks.
std::vector<std::uint8_t> mark_nodes(const TreeArena& tree,
                                     const MarkingModel& model,
                                     RngStream& rng);

// Number of nodes whose subtree contains at least one mark; equivalently
// the size of the union of root paths of all marked nodes.  One reverse
// sweep over the arena, O(size).
std::uint64_t discovered_size(const TreeArena& tree,
                              const std::vector<std::uint8_t>& marks);

// Smallest D with sum_{n > D} (expected marks at depth n) <= eps for the
// depth-biased model, i.e. alpha^{D+1} / (1 - alpha) <= eps.
int truncation_depth(double alpha, double eps);

// Per-replica tallies retained when McOptions::keep_trials is set.
struct TrialOutcome {
    std::uint64_t discovered;
    std::uint64_t total;
    std::uint64_t marks;
};

struct McOptions {
    std::uint64_t replicas = 10000;
    std::uint64_t seed = 1;
    int workers = 0;  // <= 0: hardware concurrency
    std::uint64_t node_budget = kDefaultNodeBudget;
    bool root_selected = false;  // force a mark at the root of every replica
    bool keep_trials = false;
};

struct UniformMcSummary {
    double mean_R = 0, se_R = 0, var_R = 0;
    double mean_T = 0, var_T = 0, cov_RT = 0;
    double mean_marks = 0;
    double rho_hat = 0, se_rho = 0;  // mean_R / mean_T, delta-method SE
    int depth = 0;
    double lambda = 0;
    std::uint64_t replicas = 0;
    std::vector<TrialOutcome> trials;
};

struct DepthBiasedMcSummary {
    double mean_R = 0, se_R = 0;
    double mean_marks = 0, se_marks = 0;
    double ratio_hat = 0, se_ratio = 0;  // mean_R / mean_marks^2
    int depth_used = 0;
    double alpha = 0;
    double missed_marks_bound = 0;  // expected marks below the truncation depth
    std::uint64_t replicas = 0;
    std::vector<TrialOutcome> trials;
};

// Replicated uniform-model experiment: grow a tree to `depth`, mark, count
// the discovered subtree.  Accumulation is in exact integer arithmetic, so
// summaries are bit-identical for a given (seed, replicas) regardless of
// worker count.
UniformMcSummary mc_uniform(const OffspringDist& dist, int depth,
                            double lambda, const McOptions& opt);

// Replicated depth-biased experiment, truncated at truncation_depth(alpha,
// eps).  Materializes only the discovered skeleton, never the full tree:
// each replica is drawn from the exact joint law of (discovered set, marks
// above the truncation depth) by walking the tree conditionally on which
// subtrees contain a mark, at cost proportional to the discovered count.
DepthBiasedMcSummary mc_depth_biased(const OffspringDist& dist, double alpha,
                                     double eps, const McOptions& opt);

// P(the subtree of a depth-n node contains a mark at depth <= horizon)
// under the depth-biased model, for n = 0..horizon+1 (the last entry is 0).
// Exact one-pass recursion in survival form, stable down to probabilities
// around 1e-300.
std::vector<double> subtree_hit_probabilities(const OffspringDist& dist,
                                              double alpha, int horizon);

}  // namespace gwtrace
