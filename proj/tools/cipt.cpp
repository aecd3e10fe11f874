#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cipt/csv.hpp"
#include "cipt/experiment.hpp"
#include "cipt/permutation.hpp"

namespace {

cipt::AxisKind axis_kind(const std::string& token) {
    if (token == "cat") return cipt::AxisKind::categorical;
    if (token == "real") return cipt::AxisKind::real;
    throw cipt::ConfigError("axis type must be cat or real");
}

int cmd_test(const std::string& input, const std::string& x_type, const std::string& y_type,
             const std::string& z_type, cipt::TestConfig config, const std::string& stat,
             const std::string& perm, const std::string& calibration,
             const std::string& poissonize) {
    config.stat = stat == "weighted" ? cipt::StatKind::weighted : cipt::StatKind::plain;
    if (stat != "ustat" && stat != "weighted") {
        throw cipt::ConfigError("statistic must be ustat or weighted");
    }
    if (perm == "full") {
        config.perm = cipt::PermKind::full;
    } else if (perm == "half") {
        config.perm = cipt::PermKind::half;
    } else if (perm == "cyclic") {
        config.perm = cipt::PermKind::cyclic;
    } else {
        throw cipt::ConfigError("permutation mode must be full, half or cyclic");
    }
    if (calibration == "exact") {
        config.calibration = cipt::CalibKind::exact;
    } else if (calibration != "mc") {
        throw cipt::ConfigError("calibration must be mc or exact");
    }
    if (poissonize == "half") {
        config.poisson = cipt::PoissonOption::half;
    } else if (poissonize == "full") {
        config.poisson = cipt::PoissonOption::full;
    } else if (!poissonize.empty()) {
        throw cipt::ConfigError("poissonize must be half or full");
    }

    cipt::ZKind zk = cipt::ZKind::real;
    if (z_type == "cat") {
        zk = cipt::ZKind::categorical;
    } else if (z_type != "real") {
        throw cipt::ConfigError("z type must be cat or real");
    }

    cipt::Dataset ds = cipt::load_dataset_csv(input, axis_kind(x_type), axis_kind(y_type), zk);
    cipt::TestOutcome out = cipt::run_test(ds, config);

    std::printf("statistic %.10g\n", out.statistic);
    std::printf("p_value %.10g\n", out.p_value);
    if (out.truncated) std::printf("truncated true\n");
    std::printf("decision %s\n", out.reject ? "reject" : "accept");
    return 0;
}

int cmd_experiment(cipt::ExperimentConfig cfg, const std::string& out_path, int workers) {
    std::vector<cipt::ResultRow> rows = cipt::run_experiment(cfg, workers);

    std::ostringstream csv;
    cipt::write_result_csv(csv, rows);
    if (out_path == "-") {
        std::cout << csv.str();
    } else {
        std::ofstream os(out_path);
        if (!os) throw cipt::DataError("cannot open output file: " + out_path);
        os << csv.str();
    }

    for (const cipt::ResultRow& row : rows) {
        std::fprintf(stderr,
                     "%s n=%zu M=%d b=%d theta=%g stat=%s perm=%s rate=%.4f se=%.4f "
                     "runtime=%.2fms\n",
                     row.experiment.c_str(), row.n, row.M, row.b, row.theta, row.stat.c_str(),
                     row.perm_mode.c_str(), row.rejection_rate, row.se, row.mean_runtime_ms);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"local permutation tests of conditional independence"};
    app.require_subcommand(1);

    // --- test ---
    auto* test = app.add_subcommand("test", "run one test on a CSV file with x,y,z columns");
    std::string input;
    std::string x_type = "cat";
    std::string y_type = "cat";
    std::string z_type = "real";
    std::string stat = "ustat";
    std::string perm = "full";
    std::string calibration = "mc";
    std::string poissonize;
    cipt::TestConfig tconfig;
    test->add_option("--input", input, "input CSV file")->required();
    test->add_option("--x-type", x_type, "x axis type: cat or real");
    test->add_option("--y-type", y_type, "y axis type: cat or real");
    test->add_option("--z-type", z_type, "z type: real or cat");
    test->add_option("--bins", tconfig.bins, "number of z bins M")->required();
    test->add_option("--sub-bins", tconfig.sub_bins, "fine sub-bins b per bin");
    test->add_option("--stat", stat, "statistic: ustat or weighted");
    test->add_option("--perm", perm, "permutation mode: full, half or cyclic");
    test->add_option("--B", tconfig.B, "Monte Carlo permutation count");
    test->add_option("--alpha", tconfig.alpha, "significance level");
    test->add_option("--seed", tconfig.seed, "rng seed");
    test->add_option("--poissonize", poissonize, "poissonized subsample: half or full rate");
    test->add_option("--holder-s", tconfig.holder_s, "smoothness s for discretizing real x/y");
    test->add_flag("--overflow", tconfig.overflow, "route z outside [0,1] to an overflow bin");
    test->add_option("--calibration", calibration, "calibration: mc or exact");
    test->add_flag("--randomized", tconfig.randomized, "use the randomized exact decision");

    // --- experiment ---
    auto* exp = app.add_subcommand("experiment", "run a simulation sweep, write a CSV table");
    std::string exp_tag;
    std::string out_path;
    std::string config_path;
    std::string m_rule;
    std::string exp_stat;
    std::string exp_poisson;
    std::vector<std::uint64_t> n_list;
    std::vector<int> m_list;
    std::vector<double> theta_list;
    int exp_b = 0;
    int exp_B = 0;
    double exp_alpha = 0.0;
    int reps = 0;
    std::uint64_t exp_seed = 0;
    int workers = 1;
    exp->add_option("tag", exp_tag, "exp1 | exp2 | exp3 | exp3-type1 | exp3-power | custom")
        ->required();
    auto* n_opt = exp->add_option("--n", n_list, "sample sizes")->delimiter(',');
    auto* m_opt = exp->add_option("--m", m_list, "bin counts M")->delimiter(',');
    auto* rule_opt =
        exp->add_option("--m-rule", m_rule, "M rule: n, sqrt, n14, n110 or n25");
    auto* b_opt = exp->add_option("--b", exp_b, "sub-bins for the double-binned method");
    auto* theta_opt = exp->add_option("--theta", theta_list, "theta values")->delimiter(',');
    auto* stat_opt = exp->add_option("--stat", exp_stat, "statistic: ustat or weighted");
    auto* B_opt = exp->add_option("--B", exp_B, "Monte Carlo permutation count");
    auto* alpha_opt = exp->add_option("--alpha", exp_alpha, "significance level");
    auto* reps_opt = exp->add_option("--reps", reps, "repetitions per cell");
    auto* poisson_opt =
        exp->add_option("--poisson", exp_poisson, "poisson option: none, half or full");
    auto* seed_opt = exp->add_option("--seed", exp_seed, "master seed");
    exp->add_option("--config", config_path, "JSON config file; flags override its fields");
    exp->add_option("--out", out_path, "output CSV file ('-' for stdout)")->required();
    exp->add_option("--workers", workers, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(test)) {
            return cmd_test(input, x_type, y_type, z_type, tconfig, stat, perm, calibration,
                            poissonize);
        }

        cipt::ExperimentConfig cfg;
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw cipt::DataError("cannot open config file: " + config_path);
            std::ostringstream buf;
            buf << is.rdbuf();
            cfg = cipt::experiment_config_from_json(buf.str());
        }
        cfg.tag = cipt::experiment_tag_from_string(exp_tag);
        if (n_opt->count() > 0) {
            cfg.n_list.assign(n_list.begin(), n_list.end());
        }
        if (m_opt->count() > 0) cfg.m_list = m_list;
        if (rule_opt->count() > 0) cfg.m_rule = cipt::m_rule_from_string(m_rule);
        if (b_opt->count() > 0) cfg.b = exp_b;
        if (theta_opt->count() > 0) cfg.theta_list = theta_list;
        if (stat_opt->count() > 0) {
            if (exp_stat == "weighted") {
                cfg.stat = cipt::StatKind::weighted;
            } else if (exp_stat == "ustat") {
                cfg.stat = cipt::StatKind::plain;
            } else {
                throw cipt::ConfigError("statistic must be ustat or weighted");
            }
        }
        if (B_opt->count() > 0) cfg.B = exp_B;
        if (alpha_opt->count() > 0) cfg.alpha = exp_alpha;
        if (reps_opt->count() > 0) cfg.reps = reps;
        if (poisson_opt->count() > 0) {
            if (exp_poisson == "none") {
                cfg.poisson = cipt::PoissonOption::none;
            } else if (exp_poisson == "half") {
                cfg.poisson = cipt::PoissonOption::half;
            } else if (exp_poisson == "full") {
                cfg.poisson = cipt::PoissonOption::full;
            } else {
                throw cipt::ConfigError("poisson option must be none, half or full");
            }
        } else if (config_path.empty() &&
                   (cfg.tag == cipt::ExperimentTag::exp3_type1 ||
                    cfg.tag == cipt::ExperimentTag::exp3_power)) {
            // Fresh Poisson(n) sizes are the reference protocol for exp3.
            cfg.poisson = cipt::PoissonOption::full;
        }
        if ((cfg.tag == cipt::ExperimentTag::exp3_type1 ||
             cfg.tag == cipt::ExperimentTag::exp3_power) &&
            cfg.m_rule == cipt::MRule::list && cfg.m_list.empty()) {
            cfg.m_rule = cipt::MRule::n25;  // M = b = ceil(n^{2/5}) unless told otherwise
        }
        if (seed_opt->count() > 0) cfg.seed = exp_seed;
        return cmd_experiment(cfg, out_path, workers);
    } catch (const cipt::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const cipt::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
