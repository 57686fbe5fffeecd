#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "gwtrace/gw_core.hpp"
#include "gwtrace/offspring.hpp"

namespace gwtrace {

enum class SeriesMethod {
    ExactRecursion,      // finite recursion, exact up to rounding
    DeterministicSeries, // infinite series with a certified tail bound
    MonteCarloInner,     // series whose terms hold an inner MC expectation
};

const char* to_string(SeriesMethod m);

// Result of a truncated series evaluation.  Invariant: evaluating the same
// quantity with more terms moves `value` by at most `tail_bound` (plus MC
// noise covered by `se` when method == MonteCarloInner).
struct SeriesResult {
    double value = 0;
    std::int64_t terms_used = 0;
    double tail_bound = 0;
    SeriesMethod method = SeriesMethod::ExactRecursion;
    double se = 0;  // nonzero only for MonteCarloInner
};

// E(e^{-lambda T_n}) where T_n is the total size of the first n+1
// generations.  Computed by the one-step recursion
//   L_0 = e^{-lambda},  L_n = e^{-lambda} * pgf(L_{n-1}),
// which conditions on the root's offspring count.
double laplace_cumulative(const OffspringDist& dist, double lambda, int n);

// Limit discovered fraction rho(lambda) = sum_n (m-1)/m^{n+1} (1 - L_n).
// Terms are cut once the certified geometric tail drops below tol.
SeriesResult rho_series(const OffspringDist& dist, double lambda, double tol);

// Limit of Var(R_N) / T_N for a degenerate offspring law (every node has
// exactly m children), as a two-index series with a certified tail bound.
SeriesResult rho2_deterministic_series(int m, double lambda, double tol);

// Tree-to-tree variance coefficient: limit of Var over replicates of the
// per-tree mean discovered count, divided by E(T_N)^2.  Equals
// Var(G)/(m^2 - m) * rho(lambda)^2; identically zero (and therefore
// rejected) for degenerate laws.
SeriesResult rho2_nondeterministic(const OffspringDist& dist, double lambda,
                                   double tol);

// E(R(alpha)) for the depth-biased model: sum_n m^n (1 - E e^{-(alpha/m)^n S})
// with S = sum_i alpha^i Z_i / m^i.  Degenerate laws use a closed form per
// term (method DeterministicSeries, se = 0).  Otherwise each term's inner
// expectation is a Monte Carlo average over `inner_replicas` profiles drawn
// once and reused across terms (method MonteCarloInner, common random
// numbers, delta-free SE from per-profile totals).  depth_eps picks the
// profile truncation depth via truncation_depth(alpha, depth_eps).
SeriesResult mean_R_alpha(const OffspringDist& dist, double alpha,
                          std::uint64_t inner_replicas, double depth_eps,
                          std::uint64_t seed, double tol = 1e-10,
                          std::uint64_t node_budget = kDefaultNodeBudget);

// Bracket and exact value for the expected number of selected nodes in the
// depth-biased model with a degenerate law of mean m:
//   1/(1-alpha) - 1/(2 (1 - alpha^2/m)) <= E <= 1/(1-alpha).
struct SelectedCountBounds {
    double lower = 0;
    double upper = 0;
    double exact = 0;
};
SelectedCountBounds selected_count_bounds(double alpha, double m,
                                          double tol = 1e-12);

// Kernel for the harmonic-type sums below: bounded nondecreasing h with
// h(0) = 0; sup = sup h, deriv0 = h'(0).
struct HarmonicKernel {
    std::function<double(double)> h;
    double sup = 1;
    double deriv0 = 1;
    std::string name;
};

// h(u) = 1 - e^{-u}.
HarmonicKernel one_minus_exp_kernel();

// The random factor V: either a point mass (inner expectation exact) or a
// sampler whose draws are taken once and reused across terms and x values.
struct PointMass {
    double c = 1;
};
struct SampledV {
    std::function<double(RngStream&)> draw;
};
using VSpec = std::variant<PointMass, SampledV>;

// Psi(h)(x) = sum_{n>=0} m^{-n} E(h(x V m^n)), truncated once the certified
// tail sup_h * m^{-n}/(m-1) drops below tol.  As x -> 0,
// Psi(h)(x) / (x log_m(1/x)) -> E(V) h'(0).
SeriesResult psi_harmonic_sum(const HarmonicKernel& kernel, const VSpec& v,
                              double x, double m,
                              std::uint64_t inner_replicas, double tol,
                              std::uint64_t seed);

}  // namespace gwtrace
