#include "gwtrace/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gwtrace/detail/parallel.hpp"
#include "gwtrace/errors.hpp"

namespace gwtrace {

namespace {

void check_replicas(std::uint64_t replicas) {
    if (replicas < 2)
        throw DomainError("replicated runs need replicas >= 2");
}

double sample_variance(unsigned __int128 sum, unsigned __int128 sum_sq,
                       std::uint64_t n) {
    // n * sum_sq - sum^2 is exact in 128-bit arithmetic and nonnegative
    const unsigned __int128 num = n * sum_sq - sum * sum;
    return static_cast<double>(num) /
           (static_cast<double>(n) * static_cast<double>(n - 1));
}

double sample_covariance(unsigned __int128 sum_xy, unsigned __int128 sum_x,
                         unsigned __int128 sum_y, std::uint64_t n) {
    const __int128 num = static_cast<__int128>(n * sum_xy) -
                         static_cast<__int128>(sum_x * sum_y);
    return static_cast<double>(num) /
           (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

std::vector<std::uint8_t> mark_nodes(const TreeArena& tree,
                                     const MarkingModel& model,
                                     RngStream& rng) {
    std::vector<std::uint8_t> marks(tree.size(), 0);

    if (const auto* u = std::get_if<UniformMarking>(&model)) {
        if (!(u->lambda >= 0))
            throw DomainError("uniform marking needs lambda >= 0");
        if (u->depth != tree.depth())
            throw DomainError("uniform marking depth " +
                              std::to_string(u->depth) +
                              " does not match the tree depth " +
                              std::to_string(tree.depth()));
        const double p = -std::expm1(-u->lambda);
        for (std::uint64_t i = 0; i < tree.size(); ++i)
            marks[i] = rng.uniform01() < p ? 1 : 0;
        return marks;
    }

    const auto& d = std::get<DepthBiasedMarking>(model);
    if (!(d.alpha >= 0))
        throw DomainError("depth-biased marking needs alpha >= 0");
    if (!(d.mean_m > 1))
        throw DomainError("depth-biased marking needs mean_m > 1");
    const double ratio = d.alpha / d.mean_m;
    for (int n = 0; n <= tree.depth(); ++n) {
        const double p = -std::expm1(-std::pow(ratio, n));
        for (std::uint64_t i = tree.level_offsets[n];
             i < tree.level_offsets[n + 1]; ++i)
            marks[i] = rng.uniform01() < p ? 1 : 0;
    }
    return marks;
}

std::uint64_t discovered_size(const TreeArena& tree,
                              const std::vector<std::uint8_t>& marks) {
    if (marks.size() != tree.size())
        throw DomainError("marks vector does not match the tree size");
    // children always have larger ids than their parents, so one reverse
    // sweep propagates "subtree holds a mark" to every ancestor
    std::vector<std::uint8_t> hit(marks);
    for (std::uint64_t i = tree.size(); i-- > 1;)
        if (hit[i]) hit[tree.parent[i]] = 1;
    std::uint64_t count = 0;
    for (std::uint8_t h : hit) count += h;
    return count;
}

int truncation_depth(double alpha, double eps) {
    if (!(alpha > 0 && alpha < 1))
        throw DomainError("truncation depth needs alpha in (0, 1)");
    if (!(eps > 0)) throw DomainError("truncation depth needs eps > 0");
    // expected marks below depth D are at most sum_{n>D} alpha^n
    //  = alpha^{D+1}/(1-alpha); pick the smallest D pushing that under eps
    const double target = eps * (1.0 - alpha);
    if (alpha <= target) return 0;
    int d = std::max(
        0, static_cast<int>(std::ceil(std::log(target) / std::log(alpha))) - 1);
    while (std::pow(alpha, d + 1) > target) ++d;
    while (d > 0 && std::pow(alpha, d) <= target) --d;
    return d;
}

UniformMcSummary mc_uniform(const OffspringDist& dist, int depth,
                            double lambda, const McOptions& opt) {
    check_replicas(opt.replicas);
    if (!(lambda >= 0)) throw DomainError("mc_uniform needs lambda >= 0");
    if (depth < 0) throw DomainError("mc_uniform needs depth >= 0");

    std::vector<TrialOutcome> trials(opt.replicas);
    detail::parallel_for_indices(opt.replicas, opt.workers,
                                 [&](std::uint64_t i) {
        RngStream rng(opt.seed, i);
        const TreeArena tree = build_tree(dist, depth, rng, opt.node_budget);
        std::vector<std::uint8_t> marks =
            mark_nodes(tree, UniformMarking{lambda, depth}, rng);
        if (opt.root_selected) marks[0] = 1;
        std::uint64_t mark_count = 0;
        for (std::uint8_t b : marks) mark_count += b;
        trials[i] =
            TrialOutcome{discovered_size(tree, marks), tree.size(), mark_count};
    });

    // exact integer totals: the reduction result cannot depend on worker
    // count or merge order
    unsigned __int128 sR = 0, sR2 = 0, sT = 0, sT2 = 0, sRT = 0, sM = 0;
    for (const TrialOutcome& t : trials) {
        sR += t.discovered;
        sR2 += static_cast<unsigned __int128>(t.discovered) * t.discovered;
        sT += t.total;
        sT2 += static_cast<unsigned __int128>(t.total) * t.total;
        sRT += static_cast<unsigned __int128>(t.discovered) * t.total;
        sM += t.marks;
    }

    const std::uint64_t B = opt.replicas;
    UniformMcSummary s;
    s.depth = depth;
    s.lambda = lambda;
    s.replicas = B;
    s.mean_R = static_cast<double>(sR) / static_cast<double>(B);
    s.mean_T = static_cast<double>(sT) / static_cast<double>(B);
    s.mean_marks = static_cast<double>(sM) / static_cast<double>(B);
    s.var_R = sample_variance(sR, sR2, B);
    s.var_T = sample_variance(sT, sT2, B);
    s.cov_RT = sample_covariance(sRT, sR, sT, B);
    s.se_R = std::sqrt(s.var_R / static_cast<double>(B));
    s.rho_hat = static_cast<double>(sR) / static_cast<double>(sT);
    // delta method for the ratio of means
    const double var_ratio =
        (s.var_R - 2.0 * s.rho_hat * s.cov_RT + s.rho_hat * s.rho_hat * s.var_T) /
        (static_cast<double>(B) * s.mean_T * s.mean_T);
    s.se_rho = std::sqrt(std::max(0.0, var_ratio));
    if (opt.keep_trials) s.trials = std::move(trials);
    return s;
}

std::vector<double> subtree_hit_probabilities(const OffspringDist& dist,
                                              double alpha, int horizon) {
    if (!(alpha >= 0)) throw DomainError("alpha must be >= 0");
    if (horizon < 0) throw DomainError("horizon must be >= 0");
    const double ratio = alpha / dist.mean();
    std::vector<double> s(horizon + 2, 0.0);
    // s_n = p_n + (1 - p_n) (1 - pgf(1 - s_{n+1})), downward from the
    // horizon; survival form keeps full relative precision when s is tiny
    for (int n = horizon; n >= 0; --n) {
        const double p = -std::expm1(-std::pow(ratio, n));
        s[n] = p + (1.0 - p) * dist.pgf_complement(s[n + 1]);
    }
    return s;
}

namespace {

// Per-depth constants of the conditional skeleton walk, precomputed once
// per call so the per-node work is a few multiplies and compares.
struct SkeletonTables {
    double root_hit;                  // s_0
    std::vector<double> mark_given_hit;  // p_d / s_d
    std::vector<double> s_child;         // s_{d+1}
    std::vector<double> odds;            // s_{d+1} / (1 - s_{d+1})
    // tilted offspring weights per depth: probs[k] * P(>=1 flagged | g_k),
    // their total, and the f=1 truncated-binomial term per support index
    std::vector<std::vector<double>> w;
    std::vector<double> w_total;
    std::vector<std::vector<double>> first_term;
};

SkeletonTables make_skeleton_tables(const OffspringDist& dist, double alpha,
                                    int horizon) {
    const std::vector<double> s =
        subtree_hit_probabilities(dist, alpha, horizon);
    const double ratio = alpha / dist.mean();
    const std::size_t kmax = dist.support().size();

    SkeletonTables t;
    t.root_hit = s[0];
    t.mark_given_hit.resize(horizon + 1);
    t.s_child.resize(horizon + 1, 0.0);
    t.odds.resize(horizon + 1, 0.0);
    t.w.assign(horizon + 1, std::vector<double>(kmax, 0.0));
    t.w_total.resize(horizon + 1, 0.0);
    t.first_term.assign(horizon + 1, std::vector<double>(kmax, 0.0));

    for (int d = 0; d <= horizon; ++d) {
        const double p = -std::expm1(-std::pow(ratio, d));
        // at the horizon a flagged node is the mark itself (s == p there);
        // pin the ratio to 1 instead of dividing two equal floats
        t.mark_given_hit[d] = d == horizon ? 1.0 : p / s[d];
        if (d == horizon) continue;
        const double sc = s[d + 1];
        const double log_miss = std::log1p(-sc);
        t.s_child[d] = sc;
        t.odds[d] = sc / (1.0 - sc);
        for (std::size_t k = 0; k < kmax; ++k) {
            const double g = dist.support()[k];
            t.w[d][k] = dist.probs()[k] * (-std::expm1(g * log_miss));
            t.w_total[d] += t.w[d][k];
            t.first_term[d][k] = g * sc * std::exp((g - 1.0) * log_miss);
        }
    }
    return t;
}

// One replica of the conditional skeleton walk.  Only nodes whose subtree
// (truncated at the horizon) contains a mark are ever visited; the walk
// draws from the exact joint law of (discovered set, mark count), so its
// cost is proportional to the discovered count, not the tree size.
struct SkeletonWalker {
    const OffspringDist& dist;
    const SkeletonTables& t;
    int horizon;
    std::uint64_t node_budget;

    std::uint64_t discovered = 0;
    std::uint64_t marks = 0;
    std::vector<int> pending;  // depths of flagged nodes not yet expanded

    void run(RngStream& rng, bool root_selected) {
        if (root_selected) {
            expand(0, rng, /*forced_mark=*/true);
        } else {
            if (rng.uniform01() >= t.root_hit) return;  // no mark anywhere
            expand(0, rng, false);
        }
        while (!pending.empty()) {
            const int d = pending.back();
            pending.pop_back();
            expand(d, rng, false);
        }
    }

    void expand(int d, RngStream& rng, bool forced_mark) {
        if (++discovered > node_budget)
            throw NodeBudgetError(
                "depth-biased replica exceeded the node budget of " +
                std::to_string(node_budget) + "; raise node_budget");
        const bool marked =
            forced_mark || rng.uniform01() < t.mark_given_hit[d];
        if (marked) {
            ++marks;
            if (d == horizon) return;
            // subtree already hit; children carry marks independently
            const std::uint32_t g = dist.sample(rng);
            for (std::uint32_t c = 0; c < g; ++c)
                if (rng.uniform01() < t.s_child[d]) pending.push_back(d + 1);
            return;
        }
        // flagged but unmarked: the mark sits under at least one child, so
        // the offspring pmf is tilted by P(>=1 flagged child | g) and the
        // flagged-child count is Binomial(g, s_child) truncated at >= 1
        const std::vector<double>& w = t.w[d];
        const std::size_t kmax = w.size();
        double u = rng.uniform01() * t.w_total[d];
        std::size_t pick = 0;
        for (; pick + 1 < kmax; ++pick) {
            if (u < w[pick]) break;
            u -= w[pick];
        }
        const std::uint32_t g = dist.support()[pick];
        // inverse CDF over the renormalized binomial tail; the normalizer
        // P(>=1 | g) equals w[pick] / probs[pick]
        const double zb = w[pick] / dist.probs()[pick];
        double v = rng.uniform01() * zb;
        double term = t.first_term[d][pick];
        std::uint32_t f = 1;
        while (f < g && v >= term) {
            v -= term;
            term *= (static_cast<double>(g - f) / (f + 1)) * t.odds[d];
            ++f;
        }
        for (std::uint32_t c = 0; c < f; ++c) pending.push_back(d + 1);
    }
};

}  // namespace

DepthBiasedMcSummary mc_depth_biased(const OffspringDist& dist, double alpha,
                                     double eps, const McOptions& opt) {
    check_replicas(opt.replicas);
    const int horizon = truncation_depth(alpha, eps);
    const SkeletonTables tables = make_skeleton_tables(dist, alpha, horizon);

    std::vector<TrialOutcome> trials(opt.replicas);
    detail::parallel_for_indices(opt.replicas, opt.workers,
                                 [&](std::uint64_t i) {
        RngStream rng(opt.seed, i);
        SkeletonWalker walker{dist, tables, horizon, opt.node_budget, 0, 0, {}};
        walker.run(rng, opt.root_selected);
        // total stays 0: the tree outside the discovered skeleton is never
        // materialized
        trials[i] = TrialOutcome{walker.discovered, 0, walker.marks};
    });

    unsigned __int128 sR = 0, sR2 = 0, sM = 0, sM2 = 0, sRM = 0;
    for (const TrialOutcome& t : trials) {
        sR += t.discovered;
        sR2 += static_cast<unsigned __int128>(t.discovered) * t.discovered;
        sM += t.marks;
        sM2 += static_cast<unsigned __int128>(t.marks) * t.marks;
        sRM += static_cast<unsigned __int128>(t.discovered) * t.marks;
    }

    const std::uint64_t B = opt.replicas;
    DepthBiasedMcSummary out;
    out.depth_used = horizon;
    out.alpha = alpha;
    out.replicas = B;
    out.missed_marks_bound = std::pow(alpha, horizon + 1) / (1.0 - alpha);
    out.mean_R = static_cast<double>(sR) / static_cast<double>(B);
    out.mean_marks = static_cast<double>(sM) / static_cast<double>(B);
    const double var_R = sample_variance(sR, sR2, B);
    const double var_M = sample_variance(sM, sM2, B);
    const double cov_RM = sample_covariance(sRM, sR, sM, B);
    out.se_R = std::sqrt(var_R / static_cast<double>(B));
    out.se_marks = std::sqrt(var_M / static_cast<double>(B));
    if (sM == 0) {
        out.ratio_hat = std::numeric_limits<double>::quiet_NaN();
        out.se_ratio = std::numeric_limits<double>::quiet_NaN();
    } else {
        const double mr = out.mean_R;
        const double mm = out.mean_marks;
        out.ratio_hat = mr / (mm * mm);
        // delta method for R / M^2 in the two sample means
        const double var_ratio =
            (var_R / std::pow(mm, 4) +
             4.0 * mr * mr * var_M / std::pow(mm, 6) -
             4.0 * mr * cov_RM / std::pow(mm, 5)) /
            static_cast<double>(B);
        out.se_ratio = std::sqrt(std::max(0.0, var_ratio));
    }
    if (opt.keep_trials) out.trials = std::move(trials);
    return out;
}

}  // namespace gwtrace
