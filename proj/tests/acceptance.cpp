// Acceptance gate: every release-blocking check, one [PASS]/[FAIL] line
// each, exit status 0 iff all pass.  Run with --only <id> to run a single
// check (e.g. --only 06a).

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gwtrace/analytics.hpp"
#include "gwtrace/discovery.hpp"
#include "gwtrace/errors.hpp"
#include "gwtrace/experiments.hpp"
#include "gwtrace/gw_core.hpp"
#include "gwtrace/offspring.hpp"
#include "gwtrace/rng.hpp"
#include "oracles.hpp"

using namespace gwtrace;

namespace {

int failures = 0;
int checks_run = 0;
std::string only;

bool want(const char* id) { return only.empty() || only == id; }

void report(const char* id, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %s %s (%s)\n", ok ? "PASS" : "FAIL", id, name,
                detail.c_str());
    std::fflush(stdout);
    ++checks_run;
    if (!ok) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// 01: degenerate laws, exact totals and the cumulative-size transform.
void c01() {
    double worst = 0;
    bool sizes_ok = true;
    for (int m : {2, 3}) {
        const OffspringDist det = parse_offspring_spec("det:" + std::to_string(m));
        const int top = 16;
        RngStream rng(1, 0);
        const LevelProfile prof = simulate_profile(det, top, rng);
        std::uint64_t t = 0, level = 1;
        for (int n = 0; n <= top; ++n) {
            if (prof.z[n] != level) sizes_ok = false;
            t += level;
            level *= m;
            for (double lambda : {0.01, 0.1, 1.0}) {
                const double got = laplace_cumulative(det, lambda, n);
                const double expect = std::exp(-lambda * static_cast<double>(t));
                worst = std::max(worst, std::abs(got - expect));
            }
        }
        const std::uint64_t closed = (level - 1) / (m - 1);
        if (cumulative_size(prof) != closed) sizes_ok = false;
    }
    report("01", "exact-totals-and-transform", sizes_ok && worst <= 1e-12,
           fmt("max transform gap %.3e, totals %s", worst,
               sizes_ok ? "exact" : "WRONG"));
}

// 02: discovered count equals the union of root paths, exactly, on 1000
// random trees of at most 200 nodes.
void c02() {
    const char* specs[] = {"det:2", "det:3", "1:0.5,3:0.5", "1:0.6,2:0.2,4:0.2"};
    int checked = 0;
    std::uint64_t seed = 50000, mismatches = 0;
    RngStream aux(4242, 0);
    while (checked < 1000) {
        const OffspringDist d = parse_offspring_spec(specs[seed % 4]);
        const int depth = 1 + static_cast<int>(seed % 6);
        RngStream rng(seed++, 0);
        TreeArena tree = build_tree(d, depth, rng);
        if (tree.size() > 200) continue;
        const double p = 0.02 + 0.96 * aux.uniform01();
        std::vector<std::uint8_t> marks(tree.size());
        for (std::size_t i = 0; i < marks.size(); ++i)
            marks[i] = aux.uniform01() < p ? 1 : 0;
        if (discovered_size(tree, marks) !=
            oracles::discovered_by_root_paths(tree, marks))
            ++mismatches;
        ++checked;
    }
    report("02", "discovery-equals-root-path-union", mismatches == 0,
           fmt("%d trees, %llu mismatches", checked,
               static_cast<unsigned long long>(mismatches)));
}

// 03: exhaustive enumeration of the 15-node binary tree against the level
// sum and against simulation.
void c03() {
    bool ok = true;
    std::string detail;
    for (double lambda : {0.1, 1.0}) {
        const oracles::ExhaustiveMoments ex =
            oracles::exhaustive_discovered_det2(3, lambda);
        const double series = oracles::level_sum_mean_discovered(2, 3, lambda);
        const double gap = std::abs(ex.mean - series);
        if (gap > 1e-10) ok = false;

        McOptions opt;
        opt.replicas = 100000;
        opt.seed = 9001;
        const OffspringDist det2 = parse_offspring_spec("det:2");
        const UniformMcSummary mc = mc_uniform(det2, 3, lambda, opt);
        const double mc_gap = std::abs(mc.mean_R - ex.mean);
        if (mc_gap > 3.0 * mc.se_R) ok = false;
        detail += fmt("lambda=%.1f enum-vs-series %.2e, mc-gap %.2e vs 3SE %.2e; ",
                      lambda, gap, mc_gap, 3.0 * mc.se_R);
    }
    report("03", "exhaustive-small-tree-mean", ok, detail);
}

// 04: simulated discovered fraction vs the series, both laws.
void c04() {
    bool ok = true;
    std::string detail;
    for (const char* spec : {"det:2", "1:0.5,3:0.5"}) {
        const OffspringDist d = parse_offspring_spec(spec);
        const SeriesResult rho = rho_series(d, 0.1, 1e-12);
        McOptions opt;
        opt.replicas = 10000;
        opt.seed = 777;
        const UniformMcSummary mc = mc_uniform(d, 14, 0.1, opt);
        const double gap = std::abs(mc.rho_hat - rho.value);
        const double band =
            3.0 * mc.se_rho + 2.0 * std::pow(d.mean(), -15.0);
        if (gap > band) ok = false;
        detail += fmt("%s gap %.2e vs %.2e; ", spec, gap, band);
    }
    report("04", "simulated-fraction-matches-series", ok, detail);
}

// 05: small-intensity rate law, strictly improving over five decades.
void c05() {
    const OffspringDist det2 = parse_offspring_spec("det:2");
    bool ok = true;
    double prev_gap = -1, last_ratio = 0;
    for (double lambda : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        const double rho = rho_series(det2, lambda, 1e-13).value;
        const double ratio = rho / (lambda * (-std::log(lambda) / std::log(2.0)));
        const double gap = std::abs(ratio - 1.0);
        if (prev_gap >= 0 && gap >= prev_gap) ok = false;
        prev_gap = gap;
        last_ratio = ratio;
    }
    if (!(last_ratio > 0.8 && last_ratio < 1.2)) ok = false;
    report("05", "small-intensity-rate-law", ok,
           fmt("final ratio %.6f, final gap %.4f", last_ratio, prev_gap));
}

// 06a: within-tree variance ratio for the degenerate law against the
// series limit, judged by bootstrap error.
void c06a() {
    ExperimentConfig cfg = parse_config_text(
        "experiment = variance-scaling\n"
        "dist = det:2\n"
        "lambda = 0.1\n"
        "N = 12\n"
        "replicas = 100000\n"
        "seed = 606\n"
        "timestamp = false\n",
        "acceptance");
    const ExperimentReport rep = run_experiment(cfg);
    bool ok = rep.all_pass && !rep.rows.empty();
    std::string detail;
    for (const ReportRow& r : rep.rows)
        detail += fmt("N=%lld ratio %.6f vs limit %.6f band %.2e; ",
                      static_cast<long long>(r.n_or_d), r.sim_value,
                      r.analytic_value, r.band_hi);
    report("06a", "variance-scaling-within-tree", ok, detail);
}

// 06b: between-tree variance ratio trend for the two-point law.
void c06b() {
    ExperimentConfig cfg = parse_config_text(
        "experiment = variance-scaling\n"
        "dist = 1:0.5,3:0.5\n"
        "lambda = 0.1\n"
        "N = 8,10,12\n"
        "replicas = 100000\n"
        "seed = 616\n"
        "timestamp = false\n",
        "acceptance");
    const ExperimentReport rep = run_experiment(cfg);
    bool ok = rep.all_pass;
    std::string detail;
    for (const ReportRow& r : rep.rows)
        if (r.check_name == "var-ratio-trend" || r.is_final)
            detail += fmt("%s N=%lld gap %.4f; ", r.check_name.c_str(),
                          static_cast<long long>(r.n_or_d), r.check_value);
    report("06b", "variance-scaling-between-trees", ok, detail);
}

// 07: variance-series rate law over four decades.
void c07() {
    bool ok = true;
    double prev_gap = -1, last_ratio = 0;
    for (double lambda : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const double v = rho2_deterministic_series(2, lambda, 1e-12).value;
        const double lg = -std::log(lambda) / std::log(2.0);
        const double ratio = v / (lambda * lg * lg);
        const double gap = std::abs(ratio - 1.0);
        if (prev_gap >= 0 && gap >= prev_gap) ok = false;
        prev_gap = gap;
        last_ratio = ratio;
    }
    if (!(last_ratio > 0.7 && last_ratio < 1.3)) ok = false;
    report("07", "variance-rate-law", ok,
           fmt("final ratio %.6f, final gap %.4f", last_ratio, prev_gap));
}

// 08: depth-biased mean, its normalized trend, the bracket, and a
// simulation cross-check.
void c08() {
    const OffspringDist det2 = parse_offspring_spec("det:2");
    bool ok = true;
    std::string detail;
    double prev_gap = -1, final_metric = 0;
    for (double alpha : {0.5, 0.8, 0.9, 0.95}) {
        const SeriesResult ra = mean_R_alpha(det2, alpha, 0, 1e-3, 1);
        const double metric = ra.value * (1 - alpha) * (1 - alpha);
        const double gap = std::abs(metric - 1.0);
        if (prev_gap >= 0 && gap >= prev_gap) ok = false;
        prev_gap = gap;
        final_metric = metric;

        const SelectedCountBounds b = selected_count_bounds(alpha, 2.0);
        if (!(b.lower <= b.exact && b.exact <= b.upper)) ok = false;
    }
    if (!(final_metric > 0.6 && final_metric < 1.1)) ok = false;
    detail += fmt("final metric %.4f; ", final_metric);

    const SeriesResult ra = mean_R_alpha(det2, 0.8, 0, 1e-3, 1);
    McOptions opt;
    opt.replicas = 10000;
    opt.seed = 808;
    const DepthBiasedMcSummary mc = mc_depth_biased(det2, 0.8, 1e-3, opt);
    const double mc_gap = std::abs(mc.mean_R - ra.value);
    if (mc_gap > 3.0 * mc.se_R) ok = false;
    detail += fmt("mc gap %.3e vs 3SE %.3e at alpha=0.8 D=%d", mc_gap,
                  3.0 * mc.se_R, mc.depth_used);
    report("08", "depth-biased-mean-and-bracket", ok, detail);
}

// 09: normalized deep level: mean one, dispersion at the law's constant.
void c09() {
    const OffspringDist uni = parse_offspring_spec("1:0.5,3:0.5");
    const std::vector<WSample> ws = estimate_W_samples(uni, 20, 10000, 909);
    const double B = static_cast<double>(ws.size());
    double mean_w = 0, mean_d = 0;
    for (const WSample& w : ws) {
        mean_w += w.value;
        mean_d += (1 - w.value) * (1 - w.value);
    }
    mean_w /= B;
    mean_d /= B;
    double ss_w = 0, ss_d = 0;
    for (const WSample& w : ws) {
        ss_w += (w.value - mean_w) * (w.value - mean_w);
        const double d = (1 - w.value) * (1 - w.value);
        ss_d += (d - mean_d) * (d - mean_d);
    }
    const double se_w = std::sqrt(ss_w / (B * (B - 1)));
    const double se_d = std::sqrt(ss_d / (B * (B - 1)));
    const bool ok_w = std::abs(mean_w - 1.0) <= 3 * se_w;
    const bool ok_d = std::abs(mean_d - 0.5) <= 3 * se_d + 0.01;
    report("09", "deep-level-normalization", ok_w && ok_d,
           fmt("mean W %.4f (3SE %.4f), dispersion %.4f vs 0.5 (band %.4f)",
               mean_w, 3 * se_w, mean_d, 3 * se_d + 0.01));
}

// 10: reweighted process mean at level 5 against the closed form.
void c10() {
    const OffspringDist uni = parse_offspring_spec("1:0.5,3:0.5");
    const int replicas = 10000, level = 5;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < replicas; ++i) {
        RngStream rng(101000 + i, 0);
        const LevelProfile p = simulate_size_biased_profile(uni, level, rng);
        const double v = static_cast<double>(p.z[level]);
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / replicas;
    const double var = (sum2 - sum * sum / replicas) / (replicas - 1.0);
    const double se = std::sqrt(var / replicas);
    const double target = size_biased_mean(uni, level);
    const bool ok = std::abs(mean - target) <= 3 * se &&
                    std::abs(target - 109.5) < 1e-12;
    report("10", "reweighted-level-mean", ok,
           fmt("mean %.3f vs %.1f, 3SE %.3f", mean, target, 3 * se));
}

// 11: harmonic-sum rate law over three decades.
void c11() {
    const HarmonicKernel k = one_minus_exp_kernel();
    const VSpec unit = PointMass{1.0};
    bool ok = true;
    double prev_gap = -1, last_ratio = 0;
    for (double x : {1e-3, 1e-5, 1e-7}) {
        const double psi = psi_harmonic_sum(k, unit, x, 2.0, 0, 1e-13, 1).value;
        const double ratio = psi / (x * (-std::log(x) / std::log(2.0)));
        const double gap = std::abs(ratio - 1.0);
        if (prev_gap >= 0 && gap >= prev_gap) ok = false;
        prev_gap = gap;
        last_ratio = ratio;
    }
    if (!(last_ratio > 0.85 && last_ratio < 1.15)) ok = false;
    report("11", "harmonic-sum-rate-law", ok,
           fmt("final ratio %.6f, final gap %.4f", last_ratio, prev_gap));
}

// 12: bit-identical summaries and reports regardless of worker count.
void c12() {
    const OffspringDist uni = parse_offspring_spec("1:0.5,3:0.5");
    bool ok = true;
    std::string detail;

    McOptions a;
    a.replicas = 4000;
    a.seed = 1212;
    a.workers = 1;
    McOptions b = a;
    b.workers = 4;
    const UniformMcSummary u1 = mc_uniform(uni, 8, 0.1, a);
    const UniformMcSummary u4 = mc_uniform(uni, 8, 0.1, b);
    const bool uniform_same =
        u1.mean_R == u4.mean_R && u1.se_R == u4.se_R && u1.var_R == u4.var_R &&
        u1.mean_T == u4.mean_T && u1.var_T == u4.var_T &&
        u1.cov_RT == u4.cov_RT && u1.rho_hat == u4.rho_hat &&
        u1.se_rho == u4.se_rho && u1.mean_marks == u4.mean_marks;
    if (!uniform_same) ok = false;
    detail += fmt("uniform summary %s; ", uniform_same ? "identical" : "DIFFERS");

    const DepthBiasedMcSummary d1 = mc_depth_biased(uni, 0.6, 1e-2, a);
    const DepthBiasedMcSummary d4 = mc_depth_biased(uni, 0.6, 1e-2, b);
    const bool depth_same = d1.mean_R == d4.mean_R && d1.se_R == d4.se_R &&
                            d1.mean_marks == d4.mean_marks &&
                            d1.se_marks == d4.se_marks &&
                            d1.ratio_hat == d4.ratio_hat;
    if (!depth_same) ok = false;
    detail += fmt("depth-biased summary %s; ",
                  depth_same ? "identical" : "DIFFERS");

    ExperimentConfig cfg = parse_config_text(
        "experiment = uniform-convergence\n"
        "dist = 1:0.5,3:0.5\n"
        "lambda = 0.2\n"
        "N = 4,6\n"
        "replicas = 1500\n"
        "seed = 123\n"
        "timestamp = false\n",
        "acceptance");
    cfg.workers = 1;
    const std::string t1 = csv_text(run_experiment(cfg), cfg);
    cfg.workers = 4;
    const std::string t4 = csv_text(run_experiment(cfg), cfg);
    cfg.workers = 1;
    const std::string t1b = csv_text(run_experiment(cfg), cfg);
    const bool text_same = t1 == t4 && t1 == t1b;
    if (!text_same) ok = false;
    detail += fmt("report text %s", text_same ? "identical" : "DIFFERS");

    report("12", "worker-count-invariance", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only = argv[++i];
    }
    try {
        if (want("01")) c01();
        if (want("02")) c02();
        if (want("03")) c03();
        if (want("04")) c04();
        if (want("05")) c05();
        if (want("06a")) c06a();
        if (want("06b")) c06b();
        if (want("07")) c07();
        if (want("08")) c08();
        if (want("09")) c09();
        if (want("10")) c10();
        if (want("11")) c11();
        if (want("12")) c12();
    } catch (const std::exception& e) {
        std::printf("[FAIL] ?? unexpected exception (%s)\n", e.what());
        ++failures;
    }
    if (checks_run == 0) {
        std::printf("no checks matched '%s'\n", only.c_str());
        return 2;
    }
    std::printf("%d/%d acceptance checks passed\n", checks_run - failures,
                checks_run);
    return failures == 0 ? 0 : 1;
}
