#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cipt/generators.hpp"
#include "cipt/permutation.hpp"

namespace cipt {

enum class ExperimentTag { exp1, exp2, exp3_type1, exp3_power, custom };

// Rule for deriving the bin count from n; `list` takes m_list as given.
enum class MRule { list, n, sqrt_n, n14, n110, n25 };

int resolve_m_rule(MRule rule, std::size_t n);

// A sweep over (n, M, theta) cells with R seeded repetitions per cell.
//
// The exp3 tags run two methods on shared per-repetition data: single
// binning with full permutations and double binning with cyclic ones, one
// result row each. With poisson == full they follow the fresh-size protocol:
// each repetition draws N ~ Poisson(n) observations instead of n (no
// truncation involved); other tags pass the poisson option through to the
// test, where it subsamples and truncates at n.
struct ExperimentConfig {
    ExperimentTag tag = ExperimentTag::exp1;
    std::vector<std::size_t> n_list;
    std::vector<int> m_list;
    MRule m_rule = MRule::list;
    int b = 0;  // sub-bins for the double method; 0 means b = M
    std::vector<double> theta_list;
    StatKind stat = StatKind::plain;
    WeightedNorm norm = WeightedNorm::pair_count;
    int B = 100;
    double alpha = 0.05;
    int reps = 1000;
    PoissonOption poisson = PoissonOption::none;
    std::uint64_t seed = 0;
    GeneratorSpec custom_generator;  // tag == custom only
    TestConfig custom_test;          // tag == custom only
};

struct ResultRow {
    std::string experiment;
    std::size_t n = 0;
    int M = 0;
    int b = 0;
    double theta = 0.0;
    std::string stat;
    std::string perm_mode;
    std::string poisson;
    int B = 0;
    double alpha = 0.0;
    int reps = 0;
    double rejection_rate = 0.0;
    double se = 0.0;              // sqrt(r(1-r)/R)
    double mean_runtime_ms = 0.0; // wall clock; reported on the console only
    std::uint64_t seed = 0;
};

// Deterministic for a fixed config regardless of worker count: every
// repetition derives its seeds from (cell index, repetition index) alone.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config, int workers = 1);

// Fixed schema:
// experiment,n,M,b,theta,stat,perm_mode,poisson,B,alpha,reps,rejection_rate,se,seed
void write_result_csv(std::ostream& os, std::span<const ResultRow> rows);

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text);

// Token parsers shared by the CLI and the config file ("exp3" is accepted as
// an alias for exp3-type1).
ExperimentTag experiment_tag_from_string(const std::string& token);
MRule m_rule_from_string(const std::string& token);

}  // namespace cipt
