#pragma once

// Independent reference implementations used only by tests.  Everything
// here takes the slowest, most literal route available so that it shares
// no logic with the library code it is checking.

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "gwtrace/gw_core.hpp"
#include "gwtrace/offspring.hpp"

namespace oracles {

// Discovered count as the size of the union of root paths of marked nodes.
inline std::uint64_t discovered_by_root_paths(
    const gwtrace::TreeArena& tree, const std::vector<std::uint8_t>& marks) {
    std::set<std::uint64_t> found;
    for (std::uint64_t i = 0; i < tree.size(); ++i) {
        if (!marks[i]) continue;
        std::uint64_t cur = i;
        for (;;) {
            found.insert(cur);
            if (cur == 0) break;
            cur = tree.parent[cur];
        }
    }
    return found.size();
}

// Exhaustive first and second moments of the discovered count on the
// complete binary tree of the given depth, marking every node
// independently with probability 1 - e^{-lambda}.  Enumerates all 2^T mark
// patterns; keep depth <= 3.
struct ExhaustiveMoments {
    double mean = 0;
    double second = 0;
};

inline ExhaustiveMoments exhaustive_discovered_det2(int depth, double lambda) {
    const int total = (1 << (depth + 1)) - 1;  // heap layout, root at 0
    const double p = -std::expm1(-lambda);

    ExhaustiveMoments out;
    for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
        // union of root paths of the set bits
        std::uint32_t covered = 0;
        for (int i = 0; i < total; ++i) {
            if (!(mask & (1u << i))) continue;
            int cur = i;
            for (;;) {
                covered |= 1u << cur;
                if (cur == 0) break;
                cur = (cur - 1) / 2;
            }
        }
        const int r = __builtin_popcount(covered);
        const int k = __builtin_popcount(mask);
        const double weight =
            std::pow(p, k) * std::pow(1.0 - p, total - k);
        out.mean += weight * r;
        out.second += weight * static_cast<double>(r) * r;
    }
    return out;
}

// Mean discovered count on the depth-`depth` complete m-ary tree under
// uniform marking, summed directly over levels: a depth-d node is
// discovered iff its subtree of (depth - d + 1) levels holds a mark.
inline double level_sum_mean_discovered(int m, int depth, double lambda) {
    std::vector<double> T(depth + 1);
    T[0] = 1;
    for (int n = 1; n <= depth; ++n) T[n] = m * T[n - 1] + 1;
    double mean = 0;
    for (int d = 0; d <= depth; ++d)
        mean += std::pow(m, d) * (-std::expm1(-lambda * T[depth - d]));
    return mean;
}

// Literal double-loop form of the limit variance series for the
// degenerate law with m children: diagonal from n = 0 plus twice the
// cross sum, every factor written out rather than telescoped into the
// single-pass recurrence the library uses.  Splitting T_n as
// T_{n-k-1} + m^{n-k} T_k gives the untelescoped cross factor
// e^{-lambda T_{n-k-1}} m^{n-k} q_k^{m^{n-k}} (1 - q_k).
inline double variance_series_literal(int m, double lambda, int terms) {
    std::vector<double> T(terms + 1), q(terms + 1);
    T[0] = 1;
    q[0] = std::exp(-lambda);
    for (int n = 1; n <= terms; ++n) {
        T[n] = m * T[n - 1] + 1;
        q[n] = std::exp(-lambda * T[n]);
    }
    double total = 0;
    for (int n = 0; n <= terms; ++n) {
        double inner = q[n] * (1.0 - q[n]);  // diagonal, n = 0 included
        for (int k = 0; k < n; ++k) {
            const double copies = std::pow(static_cast<double>(m), n - k);
            inner += 2.0 * std::exp(-lambda * T[n - k - 1]) * copies *
                     std::pow(q[k], copies - 1.0) * q[k] * (1.0 - q[k]);
        }
        total += std::pow(m, -n) * inner;
    }
    return (m - 1.0) / m * total;
}

// Direct harmonic sum: sum_{n<terms} m^{-n} (1 - e^{-x c m^n}).
inline double psi_direct(double x, double m, double c, int terms) {
    double acc = 0;
    for (int n = 0; n < terms; ++n)
        acc += std::pow(m, -n) * (-std::expm1(-x * c * std::pow(m, n)));
    return acc;
}

// Closed-form subtree hit probabilities for the degenerate m-child law:
// P(no mark under a depth-n node within horizon D) =
// exp(-(alpha/m)^n (1 - alpha^{D-n+1}) / (1 - alpha)).
inline double subtree_hit_det_closed(int m, double alpha, int horizon, int n) {
    const double c = std::pow(alpha / m, n) *
                     (1.0 - std::pow(alpha, horizon - n + 1)) / (1.0 - alpha);
    return -std::expm1(-c);
}

// E(e^{-sum_j u_j Z_j}) for generation sizes Z_j of the branching process,
// by the backward product recursion over levels 0..D.
inline double profile_laplace(const gwtrace::OffspringDist& dist,
                              const std::vector<double>& u) {
    double F = std::exp(-u.back());
    for (int j = static_cast<int>(u.size()) - 2; j >= 0; --j)
        F = std::exp(-u[j]) * dist.pgf(F);
    return F;
}

// Truncated mean discovered count under depth-biased marking, using the
// level sum E(R) = sum_n m^n s_n over exact subtree hit probabilities.
// Degenerate laws use the non-recursive closed form; other laws run the
// no-hit ladder in extended precision, because near-one products lose the
// complement and m^n amplifies the loss at deep horizons.
inline double truncated_mean_discovered_depth_biased(
    const gwtrace::OffspringDist& dist, double alpha, int horizon) {
    const double m = dist.mean();
    if (dist.is_deterministic()) {
        double mean = 0;
        for (int n = 0; n <= horizon; ++n) {
            const double c = std::pow(alpha / m, n) *
                             (1.0 - std::pow(alpha, horizon - n + 1)) /
                             (1.0 - alpha);
            mean += std::pow(m, n) * (-std::expm1(-c));
        }
        return mean;
    }
    const std::vector<std::uint32_t>& ks = dist.support();
    const std::vector<double>& ps = dist.probs();
    std::vector<long double> miss(horizon + 2);
    miss[horizon + 1] = 1.0L;
    for (int n = horizon; n >= 0; --n) {
        long double g = 0.0L;
        for (std::size_t i = 0; i < ks.size(); ++i)
            g += static_cast<long double>(ps[i]) *
                 std::pow(miss[n + 1], static_cast<long double>(ks[i]));
        miss[n] =
            std::exp(-std::pow(static_cast<long double>(alpha / m),
                               static_cast<long double>(n))) *
            g;
    }
    long double mean = 0.0L;
    for (int n = 0; n <= horizon; ++n)
        mean += std::pow(static_cast<long double>(m),
                         static_cast<long double>(n)) *
                (1.0L - miss[n]);
    return static_cast<double>(mean);
}

// Upper critical values of the chi-square law at p = 0.001, df 1..9.
inline double chi2_crit_001(int df) {
    static const double table[] = {10.828, 13.816, 16.266, 18.467, 20.515,
                                   22.458, 24.322, 26.124, 27.877};
    return table[df - 1];
}

}  // namespace oracles
