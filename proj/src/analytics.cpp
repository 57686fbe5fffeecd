#include "gwtrace/analytics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "gwtrace/discovery.hpp"
#include "gwtrace/errors.hpp"

namespace gwtrace {

namespace {

constexpr std::int64_t kMaxSeriesTerms = 10'000'000;

[[noreturn]] void throw_terms_exhausted(const char* what) {
    throw DomainError(std::string(what) +
                      ": tolerance not reachable within the term cap; "
                      "loosen tol");
}

// (1 - e^{-x}) / x, continuous at 0; multiplying by a growth factor in this
// form avoids ever forming m^n on its own.
double one_minus_exp_over(double x) {
    if (x < 1e-8) return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

double mean_and_se(const std::vector<double>& totals, double& se_out) {
    const double n = static_cast<double>(totals.size());
    double mean = 0.0;
    for (double t : totals) mean += t;
    mean /= n;
    double ss = 0.0;
    for (double t : totals) ss += (t - mean) * (t - mean);
    se_out = std::sqrt(ss / (n * (n - 1.0)));
    return mean;
}

}  // namespace

const char* to_string(SeriesMethod m) {
    switch (m) {
        case SeriesMethod::ExactRecursion: return "exact-recursion";
        case SeriesMethod::DeterministicSeries: return "deterministic-series";
        case SeriesMethod::MonteCarloInner: return "monte-carlo-inner";
    }
    return "unknown";
}

double laplace_cumulative(const OffspringDist& dist, double lambda, int n) {
    if (!(lambda >= 0)) throw DomainError("laplace transform needs lambda >= 0");
    if (n < 0) throw DomainError("laplace transform needs n >= 0");
    // conditioning on the root's offspring: the subtrees of its children
    // are independent copies one level shorter, so
    // L_n = e^{-lambda} * pgf(L_{n-1}) with L_0 = e^{-lambda}
    const double e = std::exp(-lambda);
    double L = e;
    for (int i = 1; i <= n; ++i) L = e * dist.pgf(L);
    return L;
}

SeriesResult rho_series(const OffspringDist& dist, double lambda, double tol) {
    if (!(lambda > 0)) throw DomainError("rho series needs lambda > 0");
    if (!(tol > 0)) throw DomainError("rho series needs tol > 0");
    const double m = dist.mean();
    const double e = std::exp(-lambda);

    SeriesResult r;
    r.method = SeriesMethod::DeterministicSeries;
    double L = e;            // L_n, starting at n = 0
    double weight = 1.0 / m; // (m-1)/m^{n+1} carries (m-1) * weight
    double tail = 1.0;       // sum_{n >= terms} (m-1)/m^{n+1} * 1 = m^{-terms}
    while (tail > tol) {
        r.value += (m - 1.0) * weight * (1.0 - L);
        ++r.terms_used;
        if (r.terms_used > kMaxSeriesTerms) throw_terms_exhausted("rho series");
        L = e * dist.pgf(L);
        weight /= m;
        tail /= m;
    }
    r.tail_bound = tail;
    return r;
}

SeriesResult rho2_deterministic_series(int m, double lambda, double tol) {
    if (m < 2) throw DomainError("variance series needs integer m >= 2");
    if (!(lambda > 0)) throw DomainError("variance series needs lambda > 0");
    if (!(tol > 0)) throw DomainError("variance series needs tol > 0");

    const double md = m;
    const double front = (md - 1.0) / md;

    // tail of sum_{n >= N} m^{-n} (1/4 + 2n/e), using
    // q_n (1-q_n) <= 1/4 and each cross term q_n m^{n-k}(1-q_k) <= 1/e
    auto tail_after = [&](std::int64_t N) {
        const double x = 1.0 / md;
        const double xn = std::pow(x, static_cast<double>(N));
        const double geo = xn / (1.0 - x);
        const double lin =
            xn * (static_cast<double>(N) * (1.0 - x) + x) / ((1.0 - x) * (1.0 - x));
        return front * (0.25 * geo + (2.0 / std::exp(1.0)) * lin);
    };

    SeriesResult r;
    r.method = SeriesMethod::DeterministicSeries;
    double T = 1.0;       // T_n = 1 + m + ... + m^n
    double C = 0.0;       // sum_{k < n} m^{n-k} (1 - q_k)
    double last_q = 0.0;  // q_{n-1}
    double inv_mn = 1.0;  // m^{-n}
    std::int64_t n = 0;
    while (tail_after(n) > tol) {
        if (n > 0) C = md * (C + (1.0 - last_q));
        const double q = std::exp(-lambda * T);
        r.value += front * inv_mn * (q * (1.0 - q) + 2.0 * q * C);
        last_q = q;
        T = md * T + 1.0;
        inv_mn /= md;
        ++n;
        if (n > kMaxSeriesTerms) throw_terms_exhausted("variance series");
    }
    r.terms_used = n;
    r.tail_bound = tail_after(n);
    return r;
}

SeriesResult rho2_nondeterministic(const OffspringDist& dist, double lambda,
                                   double tol) {
    if (dist.is_deterministic())
        throw DeterministicOffspringError(
            "tree-to-tree variance vanishes for a constant offspring count; "
            "this coefficient needs Var(G) > 0");
    if (!(tol > 0)) throw DomainError("variance coefficient needs tol > 0");
    const double m = dist.mean();
    const double c = dist.variance() / (m * m - m);
    // rho <= 1 and its tail t <= t, so the value moves by at most
    // c (2 rho t + t^2) <= 3 c t; pick the inner tolerance accordingly
    const SeriesResult rho = rho_series(dist, lambda, tol / (3.0 * c));

    SeriesResult r;
    r.method = SeriesMethod::DeterministicSeries;
    r.value = c * rho.value * rho.value;
    r.terms_used = rho.terms_used;
    r.tail_bound =
        c * (2.0 * rho.value * rho.tail_bound + rho.tail_bound * rho.tail_bound);
    return r;
}

SeriesResult mean_R_alpha(const OffspringDist& dist, double alpha,
                          std::uint64_t inner_replicas, double depth_eps,
                          std::uint64_t seed, double tol,
                          std::uint64_t node_budget) {
    if (!(alpha >= 0 && alpha < 1))
        throw DomainError("mean selected-ancestor series needs alpha in [0, 1)");
    if (!(tol > 0)) throw DomainError("tol must be > 0");

    if (alpha == 0.0) {
        // only the root term survives: 1 - E(e^{-Z_0}) = 1 - e^{-1}
        SeriesResult r;
        r.value = -std::expm1(-1.0);
        r.terms_used = 1;
        r.tail_bound = 0.0;
        r.method = SeriesMethod::ExactRecursion;
        return r;
    }

    const double m = dist.mean();
    // every term n is at most alpha^n E(S) = alpha^n / (1 - alpha), so the
    // remainder after N terms is under alpha^{N+1} / (1-alpha)^2
    const double denom = (1.0 - alpha) * (1.0 - alpha);
    std::int64_t N = 0;
    while (std::pow(alpha, static_cast<double>(N + 1)) / denom > tol) {
        ++N;
        if (N > kMaxSeriesTerms)
            throw_terms_exhausted("mean selected-ancestor series");
    }

    SeriesResult r;
    if (dist.is_deterministic()) {
        // S is the constant geometric sum 1/(1-alpha); every term closed form
        const double S = 1.0 / (1.0 - alpha);
        double an = 1.0;       // alpha^n
        double cn = 1.0;       // (alpha/m)^n
        for (std::int64_t n = 0; n <= N; ++n) {
            r.value += an * S * one_minus_exp_over(cn * S);
            an *= alpha;
            cn *= alpha / m;
        }
        r.terms_used = N + 1;
        r.tail_bound = std::pow(alpha, static_cast<double>(N + 1)) / denom;
        r.method = SeriesMethod::DeterministicSeries;
        return r;
    }

    // random S: common random numbers - one pool of level profiles feeds
    // every term, and the SE comes from per-profile series totals
    if (inner_replicas < 2)
        throw DomainError("inner_replicas must be >= 2 for a random offspring law");
    const int depth = truncation_depth(alpha, depth_eps);
    const double expected_nodes =
        (std::pow(m, depth + 1) - 1.0) / (m - 1.0) *
        static_cast<double>(inner_replicas);
    if (expected_nodes > static_cast<double>(node_budget))
        throw NodeBudgetError(
            "inner sampling at alpha = " + std::to_string(alpha) +
            " needs profiles of depth " + std::to_string(depth) + ", about " +
            std::to_string(expected_nodes) +
            " nodes in total; raise node_budget, lower inner_replicas, or "
            "loosen depth_eps");

    std::vector<double> svals(inner_replicas);
    for (std::uint64_t b = 0; b < inner_replicas; ++b) {
        RngStream rng(seed, b);
        const LevelProfile prof = simulate_profile(dist, depth, rng, node_budget);
        double S = 0.0, ai = 1.0, mi = 1.0;
        for (int i = 0; i <= depth; ++i) {
            S += ai * static_cast<double>(prof.z[i]) / mi;
            ai *= alpha;
            mi *= m;
        }
        svals[b] = S;
    }

    std::vector<double> totals(inner_replicas, 0.0);
    for (std::uint64_t b = 0; b < inner_replicas; ++b) {
        const double S = svals[b];
        double an = 1.0, cn = 1.0;
        double tot = 0.0;
        for (std::int64_t n = 0; n <= N; ++n) {
            tot += an * S * one_minus_exp_over(cn * S);
            an *= alpha;
            cn *= alpha / m;
        }
        totals[b] = tot;
    }
    r.value = mean_and_se(totals, r.se);
    r.terms_used = N + 1;
    r.tail_bound = std::pow(alpha, static_cast<double>(N + 1)) / denom;
    r.method = SeriesMethod::MonteCarloInner;
    return r;
}

SelectedCountBounds selected_count_bounds(double alpha, double m, double tol) {
    if (!(alpha > 0 && alpha < 1))
        throw DomainError("selected-count bounds need alpha in (0, 1)");
    if (!(m > 1)) throw DomainError("selected-count bounds need m > 1");
    if (!(tol > 0)) throw DomainError("selected-count bounds need tol > 0");

    SelectedCountBounds b;
    b.upper = 1.0 / (1.0 - alpha);
    b.lower = 1.0 / (1.0 - alpha) - 0.5 / (1.0 - alpha * alpha / m);

    // E(selected) = sum_n m^n (1 - e^{-(alpha/m)^n}) = sum_n alpha^n *
    // (1 - e^{-c_n})/c_n, terms <= alpha^n
    double an = 1.0, cn = 1.0;
    std::int64_t n = 0;
    while (an / (1.0 - alpha) > tol) {
        b.exact += an * one_minus_exp_over(cn);
        an *= alpha;
        cn *= alpha / m;
        if (++n > kMaxSeriesTerms)
            throw_terms_exhausted("selected-count series");
    }
    return b;
}

HarmonicKernel one_minus_exp_kernel() {
    HarmonicKernel k;
    k.h = [](double u) { return -std::expm1(-u); };
    k.sup = 1.0;
    k.deriv0 = 1.0;
    k.name = "one-minus-exp";
    return k;
}

SeriesResult psi_harmonic_sum(const HarmonicKernel& kernel, const VSpec& v,
                              double x, double m,
                              std::uint64_t inner_replicas, double tol,
                              std::uint64_t seed) {
    if (!(x > 0)) throw DomainError("harmonic sum needs x > 0");
    if (!(m > 1)) throw DomainError("harmonic sum needs m > 1");
    if (!(tol > 0)) throw DomainError("harmonic sum needs tol > 0");
    if (!(kernel.sup > 0)) throw DomainError("kernel sup must be > 0");

    // remainder after N terms is at most sup * sum_{n >= N} m^{-n}
    std::int64_t N = 0;
    auto tail_after = [&](std::int64_t n) {
        return kernel.sup * std::pow(m, -static_cast<double>(n)) * m / (m - 1.0);
    };
    while (tail_after(N) > tol) {
        ++N;
        if (N > kMaxSeriesTerms) throw_terms_exhausted("harmonic sum");
    }

    SeriesResult r;
    r.terms_used = N;
    r.tail_bound = tail_after(N);

    if (const auto* pm = std::get_if<PointMass>(&v)) {
        if (!(pm->c > 0)) throw DomainError("point-mass V must be > 0");
        double inv_mn = 1.0, mn = 1.0;
        for (std::int64_t n = 0; n < N; ++n) {
            r.value += inv_mn * kernel.h(x * pm->c * mn);
            inv_mn /= m;
            mn *= m;
        }
        r.method = SeriesMethod::DeterministicSeries;
        return r;
    }

    const auto& sampled = std::get<SampledV>(v);
    if (inner_replicas < 2)
        throw DomainError("sampled V needs inner_replicas >= 2");
    std::vector<double> totals(inner_replicas, 0.0);
    for (std::uint64_t b = 0; b < inner_replicas; ++b) {
        RngStream rng(seed, b);
        const double vb = sampled.draw(rng);
        if (!(vb > 0)) throw DomainError("V sampler must return values > 0");
        double inv_mn = 1.0, mn = 1.0;
        double tot = 0.0;
        for (std::int64_t n = 0; n < N; ++n) {
            tot += inv_mn * kernel.h(x * vb * mn);
            inv_mn /= m;
            mn *= m;
        }
        totals[b] = tot;
    }
    r.value = mean_and_se(totals, r.se);
    r.method = SeriesMethod::MonteCarloInner;
    return r;
}

}  // namespace gwtrace
