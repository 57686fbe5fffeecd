#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gwtrace/analytics.hpp"
#include "gwtrace/discovery.hpp"
#include "gwtrace/experiments.hpp"
#include "gwtrace/gw_core.hpp"
#include "gwtrace/version.hpp"

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

constexpr const char* kSimHeader =
    "model,dist,param,N_or_D,replicas,mean_R,se_R,var_R,mean_T,mean_marks,"
    "rho_or_ratio,se";

// Appends one row to `path`, writing the header first when the file is new
// or empty.
void append_sim_row(const std::string& path, const std::string& row) {
    bool need_header = true;
    {
        std::ifstream probe(path);
        if (probe && probe.peek() != std::ifstream::traits_type::eof())
            need_header = false;
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw gwtrace::IoError("cannot open '" + path + "' for writing");
    if (need_header) out << kSimHeader << '\n';
    out << row << '\n';
    if (!out) throw gwtrace::IoError("failed while writing '" + path + "'");
}

void emit_sim_row(const std::string& row, const std::string& out_path) {
    std::cout << kSimHeader << '\n' << row << '\n';
    if (!out_path.empty()) append_sim_row(out_path, row);
}

void print_series(const gwtrace::SeriesResult& r) {
    std::cout << "value,terms_used,tail_bound,method,se\n"
              << fmt(r.value) << ',' << r.terms_used << ','
              << fmt(r.tail_bound) << ',' << gwtrace::to_string(r.method)
              << ',' << fmt(r.se) << '\n';
}

void dump_profile(const gwtrace::TreeArena& tree, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw gwtrace::IoError("cannot open '" + path + "' for writing");
    out << "level,count\n";
    for (int n = 0; n <= tree.depth(); ++n)
        out << n << ',' << tree.level_offsets[n + 1] - tree.level_offsets[n]
            << '\n';
}

void dump_tree(const gwtrace::TreeArena& tree, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw gwtrace::IoError("cannot open '" + path + "' for writing");
    out << "node,parent,level\n";
    for (std::uint64_t i = 0; i < tree.size(); ++i) {
        out << i << ',';
        if (tree.parent[i] == gwtrace::TreeArena::kNoParent)
            out << -1;
        else
            out << tree.parent[i];
        out << ',' << tree.level_of(i) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree discovery simulator and analytics"};
    app.set_version_flag("--version",
                         std::string(gwtrace::kToolName) + " " +
                             gwtrace::kToolVersion);
    app.require_subcommand(1);
    int exit_code = 0;

    // ---- sim ----
    auto* sim = app.add_subcommand("sim", "replicated tree simulations");
    sim->require_subcommand(1);

    struct {
        std::string dist = "det:2";
        int depth = 10;
        double lambda = 0.1;
        std::uint64_t replicas = 10000;
        std::uint64_t seed = 1;
        int workers = 0;
        std::uint64_t node_budget = gwtrace::kDefaultNodeBudget;
        bool root_selected = false;
        std::string out;
        std::string dump_profile_path;
        std::string dump_tree_path;
    } su;
    auto* sim_uniform =
        sim->add_subcommand("uniform", "uniform marking at rate lambda");
    sim_uniform->add_option("--dist", su.dist, "offspring law (k:p,... or det:m)");
    sim_uniform->add_option("--N", su.depth, "tree depth")->required();
    sim_uniform->add_option("--lambda", su.lambda, "marking rate")->required();
    sim_uniform->add_option("--replicas", su.replicas, "replica count");
    sim_uniform->add_option("--seed", su.seed, "RNG seed");
    sim_uniform->add_option("--workers", su.workers,
                            "worker threads (0 = hardware)");
    sim_uniform->add_option("--node-budget", su.node_budget,
                            "max nodes per simulation call");
    sim_uniform->add_flag("--root-selected", su.root_selected,
                          "force a mark at the root of every replica");
    sim_uniform->add_option("--out", su.out, "append the row to this CSV file");
    sim_uniform->add_option("--dump-profile", su.dump_profile_path,
                            "write replica 0 level counts (level,count)");
    sim_uniform->add_option("--dump-tree", su.dump_tree_path,
                            "write replica 0 arena (node,parent,level)");
    sim_uniform->callback([&] {
        const gwtrace::OffspringDist dist = gwtrace::parse_offspring_spec(su.dist);
        if (!su.dump_profile_path.empty() || !su.dump_tree_path.empty()) {
            gwtrace::RngStream rng(su.seed, 0);
            const gwtrace::TreeArena tree =
                gwtrace::build_tree(dist, su.depth, rng, su.node_budget);
            if (!su.dump_profile_path.empty())
                dump_profile(tree, su.dump_profile_path);
            if (!su.dump_tree_path.empty()) dump_tree(tree, su.dump_tree_path);
        }
        gwtrace::McOptions opt;
        opt.replicas = su.replicas;
        opt.seed = su.seed;
        opt.workers = su.workers;
        opt.node_budget = su.node_budget;
        opt.root_selected = su.root_selected;
        const gwtrace::UniformMcSummary s =
            gwtrace::mc_uniform(dist, su.depth, su.lambda, opt);
        std::string row = "uniform," + dist.to_string() + ',' + fmt(su.lambda) +
                          ',' + std::to_string(su.depth) + ',' +
                          std::to_string(su.replicas) + ',' + fmt(s.mean_R) +
                          ',' + fmt(s.se_R) + ',' + fmt(s.var_R) + ',' +
                          fmt(s.mean_T) + ',' + fmt(s.mean_marks) + ',' +
                          fmt(s.rho_hat) + ',' + fmt(s.se_rho);
        emit_sim_row(row, su.out);
    });

    struct {
        std::string dist = "det:2";
        double alpha = 0.8;
        double eps = 1e-3;
        std::uint64_t replicas = 10000;
        std::uint64_t seed = 1;
        int workers = 0;
        std::uint64_t node_budget = gwtrace::kDefaultNodeBudget;
        bool root_selected = false;
        std::string out;
    } sd;
    auto* sim_db = sim->add_subcommand(
        "depth-biased", "depth-biased marking truncated by tail mass eps");
    sim_db->add_option("--dist", sd.dist, "offspring law (k:p,... or det:m)");
    sim_db->add_option("--alpha", sd.alpha, "depth bias in (0,1)")->required();
    sim_db->add_option("--eps", sd.eps, "expected marks allowed below cutoff");
    sim_db->add_option("--replicas", sd.replicas, "replica count");
    sim_db->add_option("--seed", sd.seed, "RNG seed");
    sim_db->add_option("--workers", sd.workers, "worker threads (0 = hardware)");
    sim_db->add_option("--node-budget", sd.node_budget,
                       "max discovered nodes per replica");
    sim_db->add_flag("--root-selected", sd.root_selected,
                     "force a mark at the root of every replica");
    sim_db->add_option("--out", sd.out, "append the row to this CSV file");
    sim_db->callback([&] {
        const gwtrace::OffspringDist dist = gwtrace::parse_offspring_spec(sd.dist);
        gwtrace::McOptions opt;
        opt.replicas = sd.replicas;
        opt.seed = sd.seed;
        opt.workers = sd.workers;
        opt.node_budget = sd.node_budget;
        opt.root_selected = sd.root_selected;
        const gwtrace::DepthBiasedMcSummary s =
            gwtrace::mc_depth_biased(dist, sd.alpha, sd.eps, opt);
        const double var_R =
            s.se_R * s.se_R * static_cast<double>(s.replicas);
        std::string row = "depth-biased," + dist.to_string() + ',' +
                          fmt(sd.alpha) + ',' + std::to_string(s.depth_used) +
                          ',' + std::to_string(sd.replicas) + ',' +
                          fmt(s.mean_R) + ',' + fmt(s.se_R) + ',' + fmt(var_R) +
                          ',' + "nan" + ',' + fmt(s.mean_marks) + ',' +
                          fmt(s.ratio_hat) + ',' + fmt(s.se_ratio);
        emit_sim_row(row, sd.out);
    });

    // ---- analytics ----
    auto* an = app.add_subcommand("analytics", "series and bounds");
    an->require_subcommand(1);

    struct {
        std::string dist = "det:2";
        double lambda = 0.1;
        double tol = 1e-10;
    } ar;
    auto* an_rho = an->add_subcommand("rho", "limit discovered fraction");
    an_rho->add_option("--dist", ar.dist, "offspring law");
    an_rho->add_option("--lambda", ar.lambda, "marking rate")->required();
    an_rho->add_option("--tol", ar.tol, "certified tail tolerance");
    an_rho->callback([&] {
        print_series(gwtrace::rho_series(gwtrace::parse_offspring_spec(ar.dist),
                                         ar.lambda, ar.tol));
    });

    struct {
        std::string dist = "det:2";
        double lambda = 0.1;
        double tol = 1e-9;
    } ar2;
    auto* an_rho2 = an->add_subcommand(
        "rho2", "variance coefficient of the discovered count");
    an_rho2->add_option("--dist", ar2.dist, "offspring law");
    an_rho2->add_option("--lambda", ar2.lambda, "marking rate")->required();
    an_rho2->add_option("--tol", ar2.tol, "certified tail tolerance");
    an_rho2->callback([&] {
        const gwtrace::OffspringDist dist = gwtrace::parse_offspring_spec(ar2.dist);
        if (dist.is_deterministic())
            print_series(gwtrace::rho2_deterministic_series(
                static_cast<int>(dist.min_support()), ar2.lambda, ar2.tol));
        else
            print_series(
                gwtrace::rho2_nondeterministic(dist, ar2.lambda, ar2.tol));
    });

    struct {
        std::string dist = "det:2";
        double alpha = 0.8;
        std::uint64_t inner_replicas = 4000;
        double depth_eps = 1e-3;
        std::uint64_t seed = 1;
        double tol = 1e-10;
    } ara;
    auto* an_ra = an->add_subcommand(
        "ralpha", "mean discovered count under depth-biased marking");
    an_ra->add_option("--dist", ara.dist, "offspring law");
    an_ra->add_option("--alpha", ara.alpha, "depth bias in [0,1)")->required();
    an_ra->add_option("--inner-replicas", ara.inner_replicas,
                      "profiles for the inner expectation (random laws)");
    an_ra->add_option("--depth-eps", ara.depth_eps,
                      "profile truncation tail mass (random laws)");
    an_ra->add_option("--seed", ara.seed, "RNG seed for the inner sampling");
    an_ra->add_option("--tol", ara.tol, "certified tail tolerance");
    an_ra->callback([&] {
        print_series(gwtrace::mean_R_alpha(
            gwtrace::parse_offspring_spec(ara.dist), ara.alpha,
            ara.inner_replicas, ara.depth_eps, ara.seed, ara.tol));
    });

    struct {
        double x = 1e-3;
        double m = 2.0;
        std::string v = "point:1";
        std::uint64_t inner_replicas = 4000;
        double tol = 1e-12;
        std::uint64_t seed = 1;
    } ap;
    auto* an_psi = an->add_subcommand("psi", "harmonic kernel sum");
    an_psi->add_option("--x", ap.x, "evaluation point > 0")->required();
    an_psi->add_option("--m", ap.m, "growth factor > 1");
    an_psi->add_option("--v", ap.v, "V law: point:C or uniform:a,b");
    an_psi->add_option("--inner-replicas", ap.inner_replicas,
                       "V draws when sampled");
    an_psi->add_option("--tol", ap.tol, "certified tail tolerance");
    an_psi->add_option("--seed", ap.seed, "RNG seed for sampled V");
    an_psi->callback([&] {
        const gwtrace::ParsedVSpec v = gwtrace::parse_v_string(ap.v);
        print_series(gwtrace::psi_harmonic_sum(gwtrace::one_minus_exp_kernel(),
                                               v.spec, ap.x, ap.m,
                                               ap.inner_replicas, ap.tol,
                                               ap.seed));
    });

    struct {
        double alpha = 0.5;
        double m = 2.0;
        double tol = 1e-12;
    } ab;
    auto* an_bounds =
        an->add_subcommand("bounds", "mean selected-count bracket");
    an_bounds->add_option("--alpha", ab.alpha, "depth bias in (0,1)")->required();
    an_bounds->add_option("--m", ab.m, "mean offspring > 1");
    an_bounds->add_option("--tol", ab.tol, "series tolerance");
    an_bounds->callback([&] {
        const gwtrace::SelectedCountBounds b =
            gwtrace::selected_count_bounds(ab.alpha, ab.m, ab.tol);
        std::cout << "lower,upper,exact\n"
                  << fmt(b.lower) << ',' << fmt(b.upper) << ',' << fmt(b.exact)
                  << '\n';
    });

    // ---- experiment ----
    auto* ex = app.add_subcommand("experiment", "named report runners");
    ex->require_subcommand(1);

    struct {
        std::string config;
        std::string seed;
        std::string out;
        std::string workers;
        bool no_timestamp = false;
        std::vector<std::string> sets;
    } er;
    auto* ex_run = ex->add_subcommand("run", "run one experiment config");
    ex_run->add_option("--config", er.config, "key=value config file")
        ->required();
    ex_run->add_option("--seed", er.seed, "override the config seed");
    ex_run->add_option("--out", er.out, "override the report path");
    ex_run->add_option("--workers", er.workers, "override the worker count");
    ex_run->add_flag("--no-timestamp", er.no_timestamp,
                     "omit the timestamp header line");
    ex_run->add_option("--set", er.sets,
                       "extra key=value overrides (repeatable)");
    ex_run->callback([&] {
        gwtrace::ExperimentConfig cfg = gwtrace::parse_config_file(er.config);
        if (!er.seed.empty()) gwtrace::apply_override(cfg, "seed", er.seed);
        if (!er.out.empty()) gwtrace::apply_override(cfg, "out", er.out);
        if (!er.workers.empty())
            gwtrace::apply_override(cfg, "workers", er.workers);
        if (er.no_timestamp) gwtrace::apply_override(cfg, "timestamp", "0");
        for (const std::string& kv : er.sets) {
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw gwtrace::ConfigError("--set expects key=value, got '" +
                                           kv + "'");
            gwtrace::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        const gwtrace::ExperimentReport rep = gwtrace::run_experiment(cfg);
        gwtrace::emit_csv(rep, cfg, cfg.out);
        std::size_t passed = 0;
        for (const gwtrace::ReportRow& r : rep.rows)
            if (r.pass) ++passed;
        std::cout << cfg.experiment << ": " << passed << '/' << rep.rows.size()
                  << " checks passed, report written to " << cfg.out << '\n';
        for (const gwtrace::ReportRow& r : rep.rows)
            if (!r.pass)
                std::cout << "  FAIL " << r.check_name << " at " << r.param_name
                          << '=' << fmt(r.param_value) << ": check="
                          << fmt(r.check_value) << " band=[" << fmt(r.band_lo)
                          << ',' << fmt(r.band_hi) << "]\n";
        if (!rep.all_pass) exit_code = 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const gwtrace::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return exit_code;
}
