#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gwtrace/analytics.hpp"
#include "gwtrace/discovery.hpp"

namespace gwtrace {

enum class ExperimentKind {
    UniformConvergence,  // rho_hat_N vs rho(lambda) over an N grid
    UniformRate,         // rho(lambda)/(lambda log_m(1/lambda)) -> 1
    VarianceScaling,     // Var(R_N)/T_N (degenerate) or /E(T_N)^2 trend
    DepthBiasedRatio,    // E(R(alpha)) (1-alpha)^2 -> 1, bracket, MC check
    KestenStigum,        // mean and dispersion of Z_K / m^K
    PsiCheck,            // Psi(h)(x)/(x log_m(1/x)) -> E(V) h'(0)
};

const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::UniformConvergence;
    std::string experiment;  // canonical name
    std::string offspring = "det:2";
    std::vector<double> lambda_grid;  // strictly decreasing where a trend runs
    std::vector<double> alpha_grid;   // strictly increasing
    std::vector<int> n_grid;          // strictly increasing
    std::vector<double> x_grid;       // strictly decreasing
    std::uint64_t replicas = 10000;
    std::uint64_t inner_replicas = 4000;
    int horizon = 20;
    double tol = 1e-10;
    double eps = 1e-3;      // depth-biased truncation mass
    double mc_alpha = 0.8;  // alpha at which the MC cross-check runs
    double psi_m = 2.0;
    std::string v_spec = "point:1";
    std::uint64_t seed = 1;
    std::string out = "report.csv";
    int workers = 0;
    std::uint64_t node_budget = kDefaultNodeBudget;
    bool root_selected = false;
    bool timestamp = true;
    // every key=value as given, echoed into the report header
    std::map<std::string, std::string> raw;
};

// Parses "point:C" or "uniform:a,b" into a V law and its mean.
struct ParsedVSpec {
    VSpec spec;
    double mean = 1;
};
ParsedVSpec parse_v_string(const std::string& text);

// Flat key=value lines; '#' starts a comment.  Unknown keys, out-of-order
// grids, and missing required fields raise ConfigError.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin);

// Applies one key=value override (used by --seed/--out/--workers/--set).
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// One check evaluated at one grid point.  `pass` is a pure function of the
// other fields of the same row: it holds iff check_value lies in
// [band_lo, band_hi], with a NaN bound meaning that side is unconstrained.
// Trend rows encode "strictly below the previous gap" by setting band_hi
// to the previous gap nudged one ulp toward zero; the raw previous gap is
// echoed in trend_prev_gap.
struct ReportRow {
    std::string experiment;
    std::string dist;
    std::string param_name;
    double param_value = 0;
    std::int64_t n_or_d = 0;
    std::int64_t replicas = 0;
    std::string check_name;
    double sim_value = 0, sim_se = 0;
    double analytic_value = 0, analytic_tail = 0;
    double check_value = 0;
    double band_lo = 0, band_hi = 0;
    double trend_prev_gap = 0;
    int is_final = 0;
    bool pass = false;
};

// Evaluates the pass rule from the row's own numbers.
bool row_passes(const ReportRow& row);

struct ExperimentReport {
    std::vector<ReportRow> rows;
    // one human-readable line per named check, echoed as header comments
    std::vector<std::string> criteria;
    bool all_pass = false;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Full report file content: '#' header (tool version, experiment, config
// echo, seed, criteria, optional timestamp), column header, one line per
// row with doubles in full-precision scientific notation.  Identical
// configs and seeds yield byte-identical text apart from the timestamp
// line, which cfg.timestamp == false suppresses.
std::string csv_text(const ExperimentReport& report,
                     const ExperimentConfig& cfg);

// Writes csv_text to `path`.  Refuses to write a report with no rows.
void emit_csv(const ExperimentReport& report, const ExperimentConfig& cfg,
              const std::string& path);

}  // namespace gwtrace
