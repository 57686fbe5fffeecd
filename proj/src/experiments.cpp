#include "gwtrace/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "gwtrace/errors.hpp"
#include "gwtrace/version.hpp"

namespace gwtrace {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kBootstrapResamples = 200;

// Role-specific sub-seeds so the main replica pool, inner analytic
// sampling, and bootstrap resampling never share RNG streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role) {
    std::uint64_t state = seed + 0xA24BAED4963EE407ULL * (role + 1);
    return splitmix64_next(state);
}

// Encodes "strictly below prev" as an inclusive upper bound.
double strict_below(double prev) {
    if (std::isnan(prev)) return kNaN;
    if (!(prev > 0)) return -1.0;  // nothing is strictly below zero
    return std::nextafter(prev, 0.0);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            return out;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw ConfigError("key '" + key + "': cannot parse number '" + text + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw ConfigError("key '" + key + "': cannot parse integer '" + text + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
    const long long v = parse_int(key, text);
    if (v < 0) throw ConfigError("key '" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "1" || t == "true" || t == "yes") return true;
    if (t == "0" || t == "false" || t == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + text + "'");
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& text) {
    std::vector<double> out;
    for (const std::string& item : split(text, ','))
        out.push_back(parse_double(key, item));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& key,
                                const std::string& text) {
    std::vector<int> out;
    for (const std::string& item : split(text, ','))
        out.push_back(static_cast<int>(parse_int(key, item)));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

template <typename T>
void require_strictly_increasing(const std::vector<T>& v,
                                 const std::string& key) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1]))
            throw ConfigError("key '" + key +
                              "' must be strictly increasing");
}

template <typename T>
void require_strictly_decreasing(const std::vector<T>& v,
                                 const std::string& key) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]))
            throw ConfigError("key '" + key +
                              "' must be strictly decreasing");
}

}  // namespace

ParsedVSpec parse_v_string(const std::string& text) {
    const std::string t = trim(text);
    if (t.rfind("point:", 0) == 0) {
        const double c = parse_double("v", t.substr(6));
        if (!(c > 0)) throw ConfigError("key 'v': point mass must be > 0");
        return ParsedVSpec{PointMass{c}, c};
    }
    if (t.rfind("uniform:", 0) == 0) {
        const std::vector<double> ab = parse_double_list("v", t.substr(8));
        if (ab.size() != 2 || !(ab[0] > 0) || !(ab[1] > ab[0]))
            throw ConfigError("key 'v': uniform needs 0 < a < b");
        const double a = ab[0], b = ab[1];
        return ParsedVSpec{SampledV{[a, b](RngStream& rng) {
                               return a + (b - a) * rng.uniform01();
                           }},
                           0.5 * (a + b)};
    }
    throw ConfigError("key 'v': expected point:C or uniform:a,b, got '" + text +
                      "'");
}

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::UniformConvergence: return "uniform-convergence";
        case ExperimentKind::UniformRate: return "uniform-rate";
        case ExperimentKind::VarianceScaling: return "variance-scaling";
        case ExperimentKind::DepthBiasedRatio: return "depth-biased-ratio";
        case ExperimentKind::KestenStigum: return "kesten-stigum";
        case ExperimentKind::PsiCheck: return "psi-check";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::UniformConvergence, ExperimentKind::UniformRate,
          ExperimentKind::VarianceScaling, ExperimentKind::DepthBiasedRatio,
          ExperimentKind::KestenStigum, ExperimentKind::PsiCheck})
        if (name == to_string(k)) return k;
    throw ConfigError(
        "unknown experiment '" + name +
        "'; expected one of uniform-convergence, uniform-rate, "
        "variance-scaling, depth-biased-ratio, kesten-stigum, psi-check");
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
    if (key == "experiment") {
        cfg.kind = experiment_kind_from_string(trim(value));
        cfg.experiment = to_string(cfg.kind);
    } else if (key == "dist") {
        parse_offspring_spec(value);  // reject bad specs at config time
        cfg.offspring = trim(value);
    } else if (key == "lambda") {
        cfg.lambda_grid = parse_double_list(key, value);
        for (double l : cfg.lambda_grid)
            if (!(l > 0)) throw ConfigError("key 'lambda': entries must be > 0");
        require_strictly_decreasing(cfg.lambda_grid, key);
    } else if (key == "alpha") {
        cfg.alpha_grid = parse_double_list(key, value);
        for (double a : cfg.alpha_grid)
            if (!(a > 0 && a < 1))
                throw ConfigError("key 'alpha': entries must lie in (0, 1)");
        require_strictly_increasing(cfg.alpha_grid, key);
    } else if (key == "N") {
        cfg.n_grid = parse_int_list(key, value);
        for (int n : cfg.n_grid)
            if (n < 0) throw ConfigError("key 'N': entries must be >= 0");
        require_strictly_increasing(cfg.n_grid, key);
    } else if (key == "x") {
        cfg.x_grid = parse_double_list(key, value);
        for (double x : cfg.x_grid)
            if (!(x > 0)) throw ConfigError("key 'x': entries must be > 0");
        require_strictly_decreasing(cfg.x_grid, key);
    } else if (key == "replicas") {
        cfg.replicas = parse_uint(key, value);
        if (cfg.replicas == 1)
            throw ConfigError(
                "key 'replicas': use 0 for analytics only, otherwise >= 2");
    } else if (key == "inner_replicas") {
        cfg.inner_replicas = parse_uint(key, value);
        if (cfg.inner_replicas < 2)
            throw ConfigError("key 'inner_replicas' must be >= 2");
    } else if (key == "horizon") {
        const long long h = parse_int(key, value);
        if (h < 1) throw ConfigError("key 'horizon' must be >= 1");
        cfg.horizon = static_cast<int>(h);
    } else if (key == "tol") {
        cfg.tol = parse_double(key, value);
        if (!(cfg.tol > 0)) throw ConfigError("key 'tol' must be > 0");
    } else if (key == "eps") {
        cfg.eps = parse_double(key, value);
        if (!(cfg.eps > 0)) throw ConfigError("key 'eps' must be > 0");
    } else if (key == "mc_alpha") {
        cfg.mc_alpha = parse_double(key, value);
        if (!(cfg.mc_alpha > 0 && cfg.mc_alpha < 1))
            throw ConfigError("key 'mc_alpha' must lie in (0, 1)");
    } else if (key == "psi_m") {
        cfg.psi_m = parse_double(key, value);
        if (!(cfg.psi_m > 1)) throw ConfigError("key 'psi_m' must be > 1");
    } else if (key == "v") {
        parse_v_string(value);
        cfg.v_spec = trim(value);
    } else if (key == "seed") {
        cfg.seed = parse_uint(key, value);
    } else if (key == "out") {
        cfg.out = trim(value);
        if (cfg.out.empty()) throw ConfigError("key 'out' must be nonempty");
    } else if (key == "workers") {
        cfg.workers = static_cast<int>(parse_int(key, value));
    } else if (key == "node_budget") {
        cfg.node_budget = parse_uint(key, value);
        if (cfg.node_budget == 0)
            throw ConfigError("key 'node_budget' must be > 0");
    } else if (key == "root_selected") {
        cfg.root_selected = parse_bool(key, value);
    } else if (key == "timestamp") {
        cfg.timestamp = parse_bool(key, value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.raw[key] = trim(value);
}

namespace {

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.experiment.empty())
        throw ConfigError("config must set experiment=<name>");
    const bool sim = cfg.replicas > 0;
    switch (cfg.kind) {
        case ExperimentKind::UniformConvergence:
            if (cfg.lambda_grid.empty())
                throw ConfigError("uniform-convergence needs lambda=<value>");
            if (cfg.n_grid.empty())
                throw ConfigError("uniform-convergence needs N=<grid>");
            break;
        case ExperimentKind::UniformRate:
            if (cfg.lambda_grid.empty())
                throw ConfigError("uniform-rate needs lambda=<grid>");
            for (double l : cfg.lambda_grid)
                if (!(l < 1))
                    throw ConfigError(
                        "uniform-rate needs lambda entries in (0, 1)");
            break;
        case ExperimentKind::VarianceScaling:
            if (cfg.lambda_grid.empty())
                throw ConfigError("variance-scaling needs lambda=<value>");
            if (cfg.n_grid.empty())
                throw ConfigError("variance-scaling needs N=<grid>");
            if (!sim)
                throw ConfigError(
                    "variance-scaling estimates a variance; replicas >= 2");
            break;
        case ExperimentKind::DepthBiasedRatio:
            if (cfg.alpha_grid.empty())
                throw ConfigError("depth-biased-ratio needs alpha=<grid>");
            break;
        case ExperimentKind::KestenStigum:
            break;
        case ExperimentKind::PsiCheck:
            if (cfg.x_grid.empty())
                throw ConfigError("psi-check needs x=<grid>");
            for (double x : cfg.x_grid)
                if (!(x < 1))
                    throw ConfigError("psi-check needs x entries in (0, 1)");
            parse_v_string(cfg.v_spec);
            break;
    }
}

ReportRow base_row(const ExperimentConfig& cfg, const std::string& dist_name) {
    ReportRow r;
    r.experiment = cfg.experiment;
    r.dist = dist_name;
    r.param_value = kNaN;
    r.sim_value = kNaN;
    r.sim_se = kNaN;
    r.analytic_value = kNaN;
    r.analytic_tail = kNaN;
    r.check_value = kNaN;
    r.band_lo = kNaN;
    r.band_hi = kNaN;
    r.trend_prev_gap = kNaN;
    return r;
}

void finish_row(ReportRow& r) { r.pass = row_passes(r); }

// Bootstrap SE of a statistic of the replica pool: resample the replicas
// with replacement, recompute the statistic from exact integer sums, and
// report the standard deviation over resamples.  Fully seeded, so reruns
// and worker counts cannot change it.
template <typename Stat>
double bootstrap_se(const std::vector<TrialOutcome>& trials,
                    std::uint64_t seed, Stat stat) {
    const std::uint64_t n = trials.size();
    std::vector<double> stats(kBootstrapResamples);
    for (int b = 0; b < kBootstrapResamples; ++b) {
        RngStream rng(seed, static_cast<std::uint64_t>(b));
        unsigned __int128 sR = 0, sR2 = 0, sT = 0;
        for (std::uint64_t j = 0; j < n; ++j) {
            const TrialOutcome& t = trials[rng.below(n)];
            sR += t.discovered;
            sR2 += static_cast<unsigned __int128>(t.discovered) * t.discovered;
            sT += t.total;
        }
        const double var_R =
            static_cast<double>(n * sR2 - sR * sR) /
            (static_cast<double>(n) * static_cast<double>(n - 1));
        stats[b] = stat(var_R, static_cast<double>(sT) / static_cast<double>(n));
    }
    double mean = 0.0;
    for (double s : stats) mean += s;
    mean /= kBootstrapResamples;
    double ss = 0.0;
    for (double s : stats) ss += (s - mean) * (s - mean);
    return std::sqrt(ss / (kBootstrapResamples - 1));
}

McOptions mc_options(const ExperimentConfig& cfg, bool keep_trials) {
    McOptions opt;
    opt.replicas = cfg.replicas;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    opt.node_budget = cfg.node_budget;
    opt.root_selected = cfg.root_selected;
    opt.keep_trials = keep_trials;
    return opt;
}

ExperimentReport run_uniform_convergence(const ExperimentConfig& cfg) {
    const OffspringDist dist = parse_offspring_spec(cfg.offspring);
    const double lambda = cfg.lambda_grid.front();
    const double m = dist.mean();
    const SeriesResult rho = rho_series(dist, lambda, cfg.tol);

    ExperimentReport rep;
    if (cfg.replicas == 0) {
        rep.criteria.push_back(
            "rho-analytic: limit discovered fraction echoed per N (no "
            "simulation)");
        for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
            ReportRow r = base_row(cfg, dist.to_string());
            r.param_name = "lambda";
            r.param_value = lambda;
            r.n_or_d = cfg.n_grid[i];
            r.replicas = 0;
            r.check_name = "rho-analytic";
            r.analytic_value = rho.value;
            r.analytic_tail = rho.tail_bound;
            r.check_value = rho.value;
            r.is_final = i + 1 == cfg.n_grid.size();
            finish_row(r);
            rep.rows.push_back(std::move(r));
        }
        return rep;
    }

    rep.criteria.push_back(
        "rho-gap-band: |rho_hat - rho| <= 3 SE + 2 m^-(N+1) at every grid N");
    double prev_gap = kNaN;
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        const int N = cfg.n_grid[i];
        const UniformMcSummary mc =
            mc_uniform(dist, N, lambda, mc_options(cfg, false));
        ReportRow r = base_row(cfg, dist.to_string());
        r.param_name = "lambda";
        r.param_value = lambda;
        r.n_or_d = N;
        r.replicas = static_cast<std::int64_t>(cfg.replicas);
        r.check_name = "rho-gap-band";
        r.sim_value = mc.rho_hat;
        r.sim_se = mc.se_rho;
        r.analytic_value = rho.value;
        r.analytic_tail = rho.tail_bound;
        r.check_value = std::abs(mc.rho_hat - rho.value);
        r.band_hi = 3.0 * mc.se_rho + 2.0 * std::pow(m, -(N + 1.0));
        r.trend_prev_gap = prev_gap;
        r.is_final = i + 1 == cfg.n_grid.size();
        prev_gap = r.check_value;
        finish_row(r);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

ExperimentReport run_uniform_rate(const ExperimentConfig& cfg) {
    const OffspringDist dist = parse_offspring_spec(cfg.offspring);
    const double m = dist.mean();

    ExperimentReport rep;
    rep.criteria.push_back(
        "rate-gap-trend: |rho/(lambda log_m(1/lambda)) - 1| strictly "
        "decreasing along the lambda grid");
    rep.criteria.push_back(
        "rate-final-band: the ratio at the last lambda lies in (0.8, 1.2)");

    double prev_gap = kNaN;
    double last_ratio = kNaN;
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        const double lambda = cfg.lambda_grid[i];
        const SeriesResult rho = rho_series(dist, lambda, cfg.tol);
        const double denom = lambda * (-std::log(lambda) / std::log(m));
        const double ratio = rho.value / denom;
        last_ratio = ratio;

        ReportRow r = base_row(cfg, dist.to_string());
        r.param_name = "lambda";
        r.param_value = lambda;
        r.n_or_d = rho.terms_used;
        r.replicas = 0;
        r.check_name = "rate-gap-trend";
        r.analytic_value = ratio;
        r.analytic_tail = rho.tail_bound / denom;
        r.check_value = std::abs(ratio - 1.0);
        r.band_hi = strict_below(prev_gap);
        r.trend_prev_gap = prev_gap;
        r.is_final = i + 1 == cfg.lambda_grid.size();
        prev_gap = r.check_value;
        finish_row(r);
        rep.rows.push_back(std::move(r));
    }

    ReportRow fin = base_row(cfg, dist.to_string());
    fin.param_name = "lambda";
    fin.param_value = cfg.lambda_grid.back();
    fin.replicas = 0;
    fin.check_name = "rate-final-band";
    fin.analytic_value = last_ratio;
    fin.check_value = last_ratio;
    fin.band_lo = 0.8;
    fin.band_hi = 1.2;
    fin.is_final = 1;
    finish_row(fin);
    rep.rows.push_back(std::move(fin));
    return rep;
}

ExperimentReport run_variance_scaling(const ExperimentConfig& cfg) {
    const OffspringDist dist = parse_offspring_spec(cfg.offspring);
    const double lambda = cfg.lambda_grid.front();
    const double m = dist.mean();
    const std::uint64_t boot_seed = derive_seed(cfg.seed, 2);

    ExperimentReport rep;
    if (dist.is_deterministic()) {
        const SeriesResult limit = rho2_deterministic_series(
            static_cast<int>(dist.min_support()), lambda, cfg.tol);
        rep.criteria.push_back(
            "var-ratio-band: |Var(R_N)/T_N - limit| <= 4 bootstrap SE at "
            "every grid N");
        for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
            const int N = cfg.n_grid[i];
            const UniformMcSummary mc =
                mc_uniform(dist, N, lambda, mc_options(cfg, true));
            const double vhat = mc.var_R / mc.mean_T;
            const double bse =
                bootstrap_se(mc.trials, boot_seed,
                             [](double var_R, double mean_T) {
                                 return var_R / mean_T;
                             });
            ReportRow r = base_row(cfg, dist.to_string());
            r.param_name = "lambda";
            r.param_value = lambda;
            r.n_or_d = N;
            r.replicas = static_cast<std::int64_t>(cfg.replicas);
            r.check_name = "var-ratio-band";
            r.sim_value = vhat;
            r.sim_se = bse;
            r.analytic_value = limit.value;
            r.analytic_tail = limit.tail_bound;
            r.check_value = std::abs(vhat - limit.value);
            r.band_hi = 4.0 * bse;
            r.is_final = i + 1 == cfg.n_grid.size();
            finish_row(r);
            rep.rows.push_back(std::move(r));
        }
        return rep;
    }

    const SeriesResult limit = rho2_nondeterministic(dist, lambda, cfg.tol);
    rep.criteria.push_back(
        "var-ratio-trend: |Var(R_N)/E(T_N)^2 / limit - 1| strictly "
        "decreasing along the N grid");
    rep.criteria.push_back(
        "var-ratio-final-band: the relative gap at the last N is <= 0.25");
    double prev_gap = kNaN;
    double final_gap = kNaN;
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
        const int N = cfg.n_grid[i];
        const UniformMcSummary mc =
            mc_uniform(dist, N, lambda, mc_options(cfg, true));
        const double et = (std::pow(m, N + 1.0) - 1.0) / (m - 1.0);
        const double vhat = mc.var_R / (et * et);
        const double bse = bootstrap_se(
            mc.trials, boot_seed,
            [et](double var_R, double) { return var_R / (et * et); });
        const double gap = std::abs(vhat / limit.value - 1.0);
        final_gap = gap;

        ReportRow r = base_row(cfg, dist.to_string());
        r.param_name = "lambda";
        r.param_value = lambda;
        r.n_or_d = N;
        r.replicas = static_cast<std::int64_t>(cfg.replicas);
        r.check_name = "var-ratio-trend";
        r.sim_value = vhat;
        r.sim_se = bse;
        r.analytic_value = limit.value;
        r.analytic_tail = limit.tail_bound;
        r.check_value = gap;
        r.band_hi = strict_below(prev_gap);
        r.trend_prev_gap = prev_gap;
        r.is_final = i + 1 == cfg.n_grid.size();
        prev_gap = gap;
        finish_row(r);
        rep.rows.push_back(std::move(r));
    }

    ReportRow fin = base_row(cfg, dist.to_string());
    fin.param_name = "lambda";
    fin.param_value = lambda;
    fin.n_or_d = cfg.n_grid.back();
    fin.replicas = static_cast<std::int64_t>(cfg.replicas);
    fin.check_name = "var-ratio-final-band";
    fin.analytic_value = limit.value;
    fin.check_value = final_gap;
    fin.band_hi = 0.25;
    fin.is_final = 1;
    finish_row(fin);
    rep.rows.push_back(std::move(fin));
    return rep;
}

ExperimentReport run_depth_biased_ratio(const ExperimentConfig& cfg) {
    const OffspringDist dist = parse_offspring_spec(cfg.offspring);
    const double m = dist.mean();
    const std::uint64_t inner_seed = derive_seed(cfg.seed, 1);

    ExperimentReport rep;
    rep.criteria.push_back(
        "oscil-trend: |E(R(alpha)) (1-alpha)^2 - 1| strictly decreasing "
        "along the alpha grid");
    rep.criteria.push_back(
        "oscil-final-band: E(R(alpha)) (1-alpha)^2 at the last alpha lies in "
        "(0.6, 1.1)");
    rep.criteria.push_back(
        "bracket-band: the exact mean selected count lies between its lower "
        "and upper bounds at every alpha");
    rep.criteria.push_back(
        "eta-band: (1-alpha) * mean selected count lies in (0, 1)");
    if (cfg.replicas > 0)
        rep.criteria.push_back(
            "mc-crosscheck-band: |simulated mean discovered - series| <= 3 SE "
            "at alpha = mc_alpha");

    double prev_gap = kNaN;
    double final_metric = kNaN;
    for (std::size_t i = 0; i < cfg.alpha_grid.size(); ++i) {
        const double alpha = cfg.alpha_grid[i];
        const SeriesResult ra = mean_R_alpha(dist, alpha, cfg.inner_replicas,
                                             cfg.eps, inner_seed, cfg.tol,
                                             cfg.node_budget);
        const double metric = ra.value * (1.0 - alpha) * (1.0 - alpha);
        final_metric = metric;
        const bool last = i + 1 == cfg.alpha_grid.size();

        ReportRow r = base_row(cfg, dist.to_string());
        r.param_name = "alpha";
        r.param_value = alpha;
        r.n_or_d = ra.terms_used;
        r.replicas = 0;
        r.check_name = "oscil-trend";
        r.sim_se = ra.se;
        r.analytic_value = ra.value;
        r.analytic_tail = ra.tail_bound;
        r.check_value = std::abs(metric - 1.0);
        r.band_hi = strict_below(prev_gap);
        r.trend_prev_gap = prev_gap;
        r.is_final = last;
        prev_gap = r.check_value;
        finish_row(r);
        rep.rows.push_back(std::move(r));

        const SelectedCountBounds bounds =
            selected_count_bounds(alpha, m, cfg.tol);
        ReportRow rb = base_row(cfg, dist.to_string());
        rb.param_name = "alpha";
        rb.param_value = alpha;
        rb.replicas = 0;
        rb.check_name = "bracket-band";
        rb.analytic_value = bounds.exact;
        rb.check_value = bounds.exact;
        rb.band_lo = bounds.lower;
        rb.band_hi = bounds.upper;
        rb.is_final = last;
        finish_row(rb);
        rep.rows.push_back(std::move(rb));

        ReportRow re = base_row(cfg, dist.to_string());
        re.param_name = "alpha";
        re.param_value = alpha;
        re.replicas = 0;
        re.check_name = "eta-band";
        re.analytic_value = bounds.exact;
        re.check_value = (1.0 - alpha) * bounds.exact;
        re.band_lo = 0.0;
        re.band_hi = 1.0;
        re.is_final = last;
        finish_row(re);
        rep.rows.push_back(std::move(re));
    }

    ReportRow fin = base_row(cfg, dist.to_string());
    fin.param_name = "alpha";
    fin.param_value = cfg.alpha_grid.back();
    fin.replicas = 0;
    fin.check_name = "oscil-final-band";
    fin.check_value = final_metric;
    fin.band_lo = 0.6;
    fin.band_hi = 1.1;
    fin.is_final = 1;
    finish_row(fin);
    rep.rows.push_back(std::move(fin));

    if (cfg.replicas > 0) {
        const SeriesResult ra =
            mean_R_alpha(dist, cfg.mc_alpha, cfg.inner_replicas, cfg.eps,
                         inner_seed, cfg.tol, cfg.node_budget);
        const DepthBiasedMcSummary mc =
            mc_depth_biased(dist, cfg.mc_alpha, cfg.eps, mc_options(cfg, false));
        ReportRow r = base_row(cfg, dist.to_string());
        r.param_name = "alpha";
        r.param_value = cfg.mc_alpha;
        r.n_or_d = mc.depth_used;
        r.replicas = static_cast<std::int64_t>(cfg.replicas);
        r.check_name = "mc-crosscheck-band";
        r.sim_value = mc.mean_R;
        r.sim_se = mc.se_R;
        r.analytic_value = ra.value;
        r.analytic_tail = ra.tail_bound;
        r.check_value = std::abs(mc.mean_R - ra.value);
        r.band_hi = 3.0 * mc.se_R;
        r.is_final = 1;
        finish_row(r);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

ExperimentReport run_kesten_stigum(const ExperimentConfig& cfg) {
    const OffspringDist dist = parse_offspring_spec(cfg.offspring);
    const double m = dist.mean();
    const double disp_target = dist.variance() / (m * (m - 1.0));

    ExperimentReport rep;
    if (cfg.replicas == 0) {
        rep.criteria.push_back(
            "normalization-analytic: limit mean 1 and dispersion target "
            "echoed (no simulation)");
        ReportRow r = base_row(cfg, dist.to_string());
        r.param_name = "horizon";
        r.param_value = cfg.horizon;
        r.n_or_d = cfg.horizon;
        r.replicas = 0;
        r.check_name = "normalization-analytic";
        r.analytic_value = disp_target;
        r.check_value = disp_target;
        r.is_final = 1;
        finish_row(r);
        rep.rows.push_back(std::move(r));
        return rep;
    }

    rep.criteria.push_back(
        "mean-w-band: |mean(Z_K/m^K) - 1| <= 3 SE");
    rep.criteria.push_back(
        "dispersion-band: |mean((1-W)^2) - Var(G)/(m(m-1))| <= 3 SE + 0.01");

    const std::vector<WSample> ws =
        estimate_W_samples(dist, cfg.horizon, cfg.replicas, cfg.seed,
                           cfg.workers, cfg.node_budget);
    const double B = static_cast<double>(ws.size());
    double mean_w = 0.0, mean_d = 0.0;
    for (const WSample& w : ws) {
        mean_w += w.value;
        mean_d += (1.0 - w.value) * (1.0 - w.value);
    }
    mean_w /= B;
    mean_d /= B;
    double ss_w = 0.0, ss_d = 0.0;
    for (const WSample& w : ws) {
        ss_w += (w.value - mean_w) * (w.value - mean_w);
        const double d = (1.0 - w.value) * (1.0 - w.value);
        ss_d += (d - mean_d) * (d - mean_d);
    }
    const double se_w = std::sqrt(ss_w / (B * (B - 1.0)));
    const double se_d = std::sqrt(ss_d / (B * (B - 1.0)));

    ReportRow rw = base_row(cfg, dist.to_string());
    rw.param_name = "horizon";
    rw.param_value = cfg.horizon;
    rw.n_or_d = cfg.horizon;
    rw.replicas = static_cast<std::int64_t>(cfg.replicas);
    rw.check_name = "mean-w-band";
    rw.sim_value = mean_w;
    rw.sim_se = se_w;
    rw.analytic_value = 1.0;
    rw.check_value = std::abs(mean_w - 1.0);
    rw.band_hi = 3.0 * se_w;
    finish_row(rw);
    rep.rows.push_back(std::move(rw));

    ReportRow rd = base_row(cfg, dist.to_string());
    rd.param_name = "horizon";
    rd.param_value = cfg.horizon;
    rd.n_or_d = cfg.horizon;
    rd.replicas = static_cast<std::int64_t>(cfg.replicas);
    rd.check_name = "dispersion-band";
    rd.sim_value = mean_d;
    rd.sim_se = se_d;
    rd.analytic_value = disp_target;
    rd.check_value = std::abs(mean_d - disp_target);
    rd.band_hi = 3.0 * se_d + 0.01;
    rd.is_final = 1;
    finish_row(rd);
    rep.rows.push_back(std::move(rd));
    return rep;
}

ExperimentReport run_psi_check(const ExperimentConfig& cfg) {
    const ParsedVSpec v = parse_v_string(cfg.v_spec);
    const HarmonicKernel kernel = one_minus_exp_kernel();
    const double target = v.mean * kernel.deriv0;
    const double m = cfg.psi_m;
    const std::uint64_t inner_seed = derive_seed(cfg.seed, 1);

    ExperimentReport rep;
    rep.criteria.push_back(
        "psi-trend: |Psi(h)(x)/(x log_m(1/x)) - E(V) h'(0)| strictly "
        "decreasing along the x grid");
    rep.criteria.push_back(
        "psi-final-band: the ratio at the last x lies within 15% of "
        "E(V) h'(0)");

    double prev_gap = kNaN;
    double final_ratio = kNaN;
    for (std::size_t i = 0; i < cfg.x_grid.size(); ++i) {
        const double x = cfg.x_grid[i];
        const SeriesResult psi = psi_harmonic_sum(
            kernel, v.spec, x, m, cfg.inner_replicas, cfg.tol, inner_seed);
        const double denom = x * (-std::log(x) / std::log(m));
        const double ratio = psi.value / denom;
        final_ratio = ratio;

        ReportRow r = base_row(cfg, "none");
        r.param_name = "x";
        r.param_value = x;
        r.n_or_d = psi.terms_used;
        r.replicas = 0;
        r.check_name = "psi-trend";
        r.sim_value = ratio;
        r.sim_se = psi.se / denom;
        r.analytic_value = target;
        r.analytic_tail = psi.tail_bound / denom;
        r.check_value = std::abs(ratio - target);
        r.band_hi = strict_below(prev_gap);
        r.trend_prev_gap = prev_gap;
        r.is_final = i + 1 == cfg.x_grid.size();
        prev_gap = r.check_value;
        finish_row(r);
        rep.rows.push_back(std::move(r));
    }

    ReportRow fin = base_row(cfg, "none");
    fin.param_name = "x";
    fin.param_value = cfg.x_grid.back();
    fin.replicas = 0;
    fin.check_name = "psi-final-band";
    fin.analytic_value = target;
    fin.check_value = final_ratio;
    fin.band_lo = 0.85 * target;
    fin.band_hi = 1.15 * target;
    fin.is_final = 1;
    finish_row(fin);
    rep.rows.push_back(std::move(fin));
    return rep;
}

}  // namespace

bool row_passes(const ReportRow& row) {
    if (std::isnan(row.check_value)) return false;
    if (!std::isnan(row.band_lo) && !(row.check_value >= row.band_lo))
        return false;
    if (!std::isnan(row.band_hi) && !(row.check_value <= row.band_hi))
        return false;
    return true;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": empty key");
        if (cfg.raw.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": duplicate key '" + key + "'");
        apply_override(cfg, key, value);
    }
    validate_config(cfg);
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    ExperimentReport rep;
    switch (cfg.kind) {
        case ExperimentKind::UniformConvergence:
            rep = run_uniform_convergence(cfg);
            break;
        case ExperimentKind::UniformRate:
            rep = run_uniform_rate(cfg);
            break;
        case ExperimentKind::VarianceScaling:
            rep = run_variance_scaling(cfg);
            break;
        case ExperimentKind::DepthBiasedRatio:
            rep = run_depth_biased_ratio(cfg);
            break;
        case ExperimentKind::KestenStigum:
            rep = run_kesten_stigum(cfg);
            break;
        case ExperimentKind::PsiCheck:
            rep = run_psi_check(cfg);
            break;
    }
    rep.all_pass = true;
    for (const ReportRow& r : rep.rows) rep.all_pass = rep.all_pass && r.pass;
    return rep;
}

namespace {

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

}  // namespace

std::string csv_text(const ExperimentReport& report,
                     const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "# tool: " << kToolName << ' ' << kToolVersion << '\n';
    out << "# experiment: " << cfg.experiment << '\n';
    out << "# config:";
    for (const auto& [k, v] : cfg.raw) out << ' ' << k << '=' << v;
    out << '\n';
    out << "# seed: " << cfg.seed << '\n';
    for (const std::string& c : report.criteria) out << "# criterion: " << c << '\n';
    if (cfg.timestamp) {
        std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        out << "# timestamp: " << buf << '\n';
    }
    out << "experiment,dist,param_name,param_value,n_or_d,replicas,"
           "check_name,sim_value,sim_se,analytic_value,analytic_tail,"
           "check_value,band_lo,band_hi,trend_prev_gap,is_final,pass\n";
    for (const ReportRow& r : report.rows) {
        out << r.experiment << ',' << r.dist << ',' << r.param_name << ','
            << fmt_double(r.param_value) << ',' << r.n_or_d << ','
            << r.replicas << ',' << r.check_name << ','
            << fmt_double(r.sim_value) << ',' << fmt_double(r.sim_se) << ','
            << fmt_double(r.analytic_value) << ','
            << fmt_double(r.analytic_tail) << ','
            << fmt_double(r.check_value) << ',' << fmt_double(r.band_lo)
            << ',' << fmt_double(r.band_hi) << ','
            << fmt_double(r.trend_prev_gap) << ',' << r.is_final << ','
            << (r.pass ? 1 : 0) << '\n';
    }
    return out.str();
}

void emit_csv(const ExperimentReport& report, const ExperimentConfig& cfg,
              const std::string& path) {
    if (report.rows.empty())
        throw DomainError("refusing to write a report with no rows");
    const std::string text = csv_text(report, cfg);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace gwtrace
