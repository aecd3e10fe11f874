#include "cipt/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>
#include <utility>

#include <json.hpp>

namespace cipt {

namespace {

using nlohmann::json;

const char* tag_name(ExperimentTag tag) {
    switch (tag) {
        case ExperimentTag::exp1: return "exp1";
        case ExperimentTag::exp2: return "exp2";
        case ExperimentTag::exp3_type1: return "exp3-type1";
        case ExperimentTag::exp3_power: return "exp3-power";
        case ExperimentTag::custom: return "custom";
    }
    return "?";
}

const char* stat_name(StatKind stat) {
    return stat == StatKind::plain ? "ustat" : "weighted";
}

const char* perm_name(PermKind perm) {
    switch (perm) {
        case PermKind::full: return "full";
        case PermKind::half: return "half";
        case PermKind::cyclic: return "cyclic";
    }
    return "?";
}

const char* poisson_name(PoissonOption opt) {
    switch (opt) {
        case PoissonOption::none: return "none";
        case PoissonOption::half: return "half";
        case PoissonOption::full: return "full";
    }
    return "?";
}

bool exp3_tag(ExperimentTag tag) {
    return tag == ExperimentTag::exp3_type1 || tag == ExperimentTag::exp3_power;
}

// One test variant run inside a cell; exp3 cells carry two.
struct Method {
    TestConfig base;
    int column_b = 0;
};

struct Cell {
    std::size_t n = 0;
    int M = 0;
    double theta = 0.0;
    std::vector<Method> methods;
};

std::vector<int> m_values(const ExperimentConfig& cfg, std::size_t n) {
    if (cfg.m_rule != MRule::list) return {resolve_m_rule(cfg.m_rule, n)};
    if (cfg.m_list.empty()) throw ConfigError("an M list or M rule is required");
    return cfg.m_list;
}

std::vector<Cell> build_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (std::size_t n : cfg.n_list) {
        if (n == 0) throw ConfigError("n entries must be positive");

        std::vector<int> ms;
        if (cfg.tag == ExperimentTag::custom) {
            ms = {cfg.custom_test.bins};
        } else {
            ms = m_values(cfg, n);
        }

        for (int M : ms) {
            std::vector<double> thetas;
            switch (cfg.tag) {
                case ExperimentTag::exp3_type1:
                    if (cfg.theta_list.empty()) throw ConfigError("exp3-type1 needs a theta list");
                    thetas = cfg.theta_list;
                    break;
                case ExperimentTag::exp3_power:
                    thetas = {1.0};
                    break;
                default:
                    thetas = {0.0};
                    break;
            }

            for (double theta : thetas) {
                Cell cell;
                cell.n = n;
                cell.M = M;
                cell.theta = theta;

                TestConfig base;
                base.stat = cfg.stat;
                base.norm = cfg.norm;
                base.B = cfg.B;
                base.alpha = cfg.alpha;
                switch (cfg.tag) {
                    case ExperimentTag::exp1:
                        base.bins = 0;  // categorical z, binned by label
                        base.perm = PermKind::full;
                        base.poisson = cfg.poisson;
                        cell.methods.push_back({base, 0});
                        break;
                    case ExperimentTag::exp2:
                        base.bins = M;
                        base.perm = PermKind::full;
                        base.poisson = cfg.poisson;
                        cell.methods.push_back({base, 0});
                        break;
                    case ExperimentTag::exp3_type1:
                    case ExperimentTag::exp3_power: {
                        // Fresh Poisson sizes are handled at the data stage,
                        // so the tests themselves never subsample.
                        base.poisson =
                            cfg.poisson == PoissonOption::full ? PoissonOption::none : cfg.poisson;
                        TestConfig single = base;
                        single.bins = M;
                        single.perm = PermKind::full;
                        cell.methods.push_back({single, 0});
                        TestConfig dbl = base;
                        dbl.bins = M;
                        dbl.sub_bins = cfg.b > 0 ? cfg.b : M;
                        dbl.perm = PermKind::cyclic;
                        cell.methods.push_back({dbl, dbl.sub_bins});
                        break;
                    }
                    case ExperimentTag::custom:
                        base = cfg.custom_test;
                        cell.methods.push_back({base, base.sub_bins});
                        break;
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

Dataset cell_data(const ExperimentConfig& cfg, const Cell& cell, Rng& rng) {
    std::size_t size = cell.n;
    if (exp3_tag(cfg.tag) && cfg.poisson == PoissonOption::full) {
        size = static_cast<std::size_t>(rng.poisson(static_cast<double>(cell.n)));
    }
    switch (cfg.tag) {
        case ExperimentTag::exp1:
            return gen_exp1(size, cell.M, rng);
        case ExperimentTag::exp2:
            return gen_exp2_null(size, cell.M, rng);
        case ExperimentTag::exp3_type1:
            return gen_exp3(size, cell.theta, false, rng);
        case ExperimentTag::exp3_power:
            return gen_exp3(size, 1.0, true, rng);
        case ExperimentTag::custom: {
            GeneratorSpec spec = cfg.custom_generator;
            spec.n = size;
            return generate(spec, rng);
        }
    }
    throw ConfigError("unknown experiment tag");
}

}  // namespace

int resolve_m_rule(MRule rule, std::size_t n) {
    double nn = static_cast<double>(n);
    double raw;
    switch (rule) {
        case MRule::list:
            throw ConfigError("MRule::list has no closed form");
        case MRule::n:
            return static_cast<int>(n);
        case MRule::sqrt_n:
            raw = std::sqrt(nn);
            break;
        case MRule::n14:
            raw = std::pow(nn, 0.25);
            break;
        case MRule::n110:
            raw = std::pow(nn, 0.1);
            break;
        case MRule::n25:
            raw = std::pow(nn, 0.4);
            break;
        default:
            throw ConfigError("unknown M rule");
    }
    return static_cast<int>(std::ceil(raw - 1e-9));
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, int workers) {
    if (cfg.reps < 1) throw ConfigError("reps must be at least 1");
    if (cfg.n_list.empty()) throw ConfigError("n list must not be empty");
    if (workers < 1) workers = 1;

    SeedTree master(cfg.seed);
    std::vector<Cell> cells = build_cells(cfg);
    std::vector<ResultRow> rows;

    std::size_t reps = static_cast<std::size_t>(cfg.reps);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        SeedTree cell_tree = master.child(c);
        std::size_t n_methods = cell.methods.size();

        // rejected[k][r] for method k, repetition r; filled in any order,
        // summed in a fixed one.
        std::vector<std::vector<std::uint8_t>> rejected(
            n_methods, std::vector<std::uint8_t>(reps, 0));
        std::vector<std::vector<double>> elapsed(n_methods, std::vector<double>(reps, 0.0));

        auto run_rep = [&](std::size_t r) {
            SeedTree rep_tree = cell_tree.child(r);
            Rng data_rng(rep_tree.child(0));
            Dataset ds = cell_data(cfg, cell, data_rng);
            for (std::size_t k = 0; k < n_methods; ++k) {
                TestConfig tc = cell.methods[k].base;
                tc.seed = rep_tree.child(k + 1).state();
                auto start = std::chrono::steady_clock::now();
                TestOutcome out = run_test(ds, tc);
                auto stop = std::chrono::steady_clock::now();
                rejected[k][r] = out.reject ? 1 : 0;
                elapsed[k][r] =
                    std::chrono::duration<double, std::milli>(stop - start).count();
            }
        };

        if (workers == 1) {
            for (std::size_t r = 0; r < reps; ++r) run_rep(r);
        } else {
            std::atomic<std::size_t> next{0};
            std::exception_ptr error;
            std::mutex error_mutex;
            auto worker = [&] {
                while (true) {
                    std::size_t r = next.fetch_add(1);
                    if (r >= reps) return;
                    try {
                        run_rep(r);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                        return;
                    }
                }
            };
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
            if (error) std::rethrow_exception(error);
        }

        for (std::size_t k = 0; k < n_methods; ++k) {
            std::size_t hits = 0;
            double total_ms = 0.0;
            for (std::size_t r = 0; r < reps; ++r) {
                hits += rejected[k][r];
                total_ms += elapsed[k][r];
            }
            double rate = static_cast<double>(hits) / static_cast<double>(reps);

            ResultRow row;
            row.experiment = tag_name(cfg.tag);
            row.n = cell.n;
            row.M = cell.M;
            row.b = cell.methods[k].column_b;
            row.theta = cell.theta;
            row.stat = stat_name(cell.methods[k].base.stat);
            row.perm_mode = perm_name(cell.methods[k].base.perm);
            row.poisson = poisson_name(cfg.poisson);
            row.B = cell.methods[k].base.B;
            row.alpha = cell.methods[k].base.alpha;
            row.reps = cfg.reps;
            row.rejection_rate = rate;
            row.se = std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps));
            row.mean_runtime_ms = total_ms / static_cast<double>(reps);
            row.seed = cfg.seed;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_result_csv(std::ostream& os, std::span<const ResultRow> rows) {
    os << "experiment,n,M,b,theta,stat,perm_mode,poisson,B,alpha,reps,"
          "rejection_rate,se,seed\n";
    char buf[64];
    for (const ResultRow& row : rows) {
        os << row.experiment << ',' << row.n << ',' << row.M << ',' << row.b << ',';
        std::snprintf(buf, sizeof buf, "%g", row.theta);
        os << buf << ',' << row.stat << ',' << row.perm_mode << ',' << row.poisson << ','
           << row.B << ',';
        std::snprintf(buf, sizeof buf, "%g", row.alpha);
        os << buf << ',' << row.reps << ',';
        std::snprintf(buf, sizeof buf, "%.6f", row.rejection_rate);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.6f", row.se);
        os << buf << ',' << row.seed << '\n';
    }
}

namespace {

json generator_to_json(const GeneratorSpec& spec) {
    const char* tag = nullptr;
    switch (spec.tag) {
        case GeneratorSpec::Tag::exp1: tag = "exp1"; break;
        case GeneratorSpec::Tag::exp2_null: tag = "exp2-null"; break;
        case GeneratorSpec::Tag::exp3_null: tag = "exp3-null"; break;
        case GeneratorSpec::Tag::exp3_alt: tag = "exp3-alt"; break;
        case GeneratorSpec::Tag::generic_ci: tag = "generic-ci"; break;
    }
    json j{{"tag", tag}, {"n", spec.n}, {"seed", spec.seed}, {"M", spec.M},
           {"theta", spec.theta}};
    if (spec.tag == GeneratorSpec::Tag::generic_ci) {
        j["pmf_z"] = spec.generic.pmf_z;
        j["x_given_z"] = spec.generic.x_given_z;
        j["y_given_z"] = spec.generic.y_given_z;
    }
    return j;
}

GeneratorSpec generator_from_json(const json& j) {
    GeneratorSpec spec;
    std::string tag = j.at("tag").get<std::string>();
    if (tag == "exp1") spec.tag = GeneratorSpec::Tag::exp1;
    else if (tag == "exp2-null") spec.tag = GeneratorSpec::Tag::exp2_null;
    else if (tag == "exp3-null") spec.tag = GeneratorSpec::Tag::exp3_null;
    else if (tag == "exp3-alt") spec.tag = GeneratorSpec::Tag::exp3_alt;
    else if (tag == "generic-ci") spec.tag = GeneratorSpec::Tag::generic_ci;
    else throw ConfigError("unknown generator tag: " + tag);
    spec.n = j.value("n", std::size_t{0});
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.M = j.value("M", 0);
    spec.theta = j.value("theta", 0.0);
    if (spec.tag == GeneratorSpec::Tag::generic_ci) {
        spec.generic.pmf_z = j.at("pmf_z").get<std::vector<double>>();
        spec.generic.x_given_z = j.at("x_given_z").get<std::vector<std::vector<double>>>();
        spec.generic.y_given_z = j.at("y_given_z").get<std::vector<std::vector<double>>>();
    }
    return spec;
}

json test_to_json(const TestConfig& tc) {
    return json{{"bins", tc.bins},
                {"sub_bins", tc.sub_bins},
                {"overflow", tc.overflow},
                {"holder_s", tc.holder_s},
                {"stat", stat_name(tc.stat)},
                {"norm", tc.norm == WeightedNorm::pair_count ? "pair-count" : "mean4"},
                {"perm", perm_name(tc.perm)},
                {"calibration", tc.calibration == CalibKind::mc ? "mc" : "exact"},
                {"B", tc.B},
                {"alpha", tc.alpha},
                {"poisson", poisson_name(tc.poisson)},
                {"randomized", tc.randomized},
                {"seed", tc.seed}};
}

StatKind stat_from_string(const std::string& token) {
    if (token == "ustat") return StatKind::plain;
    if (token == "weighted") return StatKind::weighted;
    throw ConfigError("unknown statistic: " + token);
}

PermKind perm_from_string(const std::string& token) {
    if (token == "full") return PermKind::full;
    if (token == "half") return PermKind::half;
    if (token == "cyclic") return PermKind::cyclic;
    throw ConfigError("unknown permutation mode: " + token);
}

PoissonOption poisson_from_string(const std::string& token) {
    if (token == "none") return PoissonOption::none;
    if (token == "half") return PoissonOption::half;
    if (token == "full") return PoissonOption::full;
    throw ConfigError("unknown poisson option: " + token);
}

TestConfig test_from_json(const json& j) {
    TestConfig tc;
    tc.bins = j.value("bins", 0);
    tc.sub_bins = j.value("sub_bins", 0);
    tc.overflow = j.value("overflow", false);
    tc.holder_s = j.value("holder_s", 1.0);
    tc.stat = stat_from_string(j.value("stat", "ustat"));
    tc.norm = j.value("norm", "pair-count") == std::string("mean4") ? WeightedNorm::mean4
                                                                    : WeightedNorm::pair_count;
    tc.perm = perm_from_string(j.value("perm", "full"));
    tc.calibration = j.value("calibration", "mc") == std::string("exact") ? CalibKind::exact
                                                                          : CalibKind::mc;
    tc.B = j.value("B", 100);
    tc.alpha = j.value("alpha", 0.05);
    tc.poisson = poisson_from_string(j.value("poisson", "none"));
    tc.randomized = j.value("randomized", false);
    tc.seed = j.value("seed", std::uint64_t{0});
    return tc;
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    const char* rule = nullptr;
    switch (cfg.m_rule) {
        case MRule::list: rule = "list"; break;
        case MRule::n: rule = "n"; break;
        case MRule::sqrt_n: rule = "sqrt"; break;
        case MRule::n14: rule = "n14"; break;
        case MRule::n110: rule = "n110"; break;
        case MRule::n25: rule = "n25"; break;
    }
    json j{{"experiment", tag_name(cfg.tag)},
           {"n", cfg.n_list},
           {"m", cfg.m_list},
           {"m_rule", rule},
           {"b", cfg.b},
           {"theta", cfg.theta_list},
           {"stat", stat_name(cfg.stat)},
           {"norm", cfg.norm == WeightedNorm::pair_count ? "pair-count" : "mean4"},
           {"B", cfg.B},
           {"alpha", cfg.alpha},
           {"reps", cfg.reps},
           {"poisson", poisson_name(cfg.poisson)},
           {"seed", cfg.seed}};
    if (cfg.tag == ExperimentTag::custom) {
        j["generator"] = generator_to_json(cfg.custom_generator);
        j["test"] = test_to_json(cfg.custom_test);
    }
    return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.tag = experiment_tag_from_string(j.at("experiment").get<std::string>());
    cfg.n_list = j.value("n", std::vector<std::size_t>{});
    cfg.m_list = j.value("m", std::vector<int>{});
    cfg.m_rule = m_rule_from_string(j.value("m_rule", "list"));
    cfg.b = j.value("b", 0);
    cfg.theta_list = j.value("theta", std::vector<double>{});
    cfg.stat = stat_from_string(j.value("stat", "ustat"));
    cfg.norm = j.value("norm", "pair-count") == std::string("mean4") ? WeightedNorm::mean4
                                                                     : WeightedNorm::pair_count;
    cfg.B = j.value("B", 100);
    cfg.alpha = j.value("alpha", 0.05);
    cfg.reps = j.value("reps", 1000);
    cfg.poisson = poisson_from_string(j.value("poisson", "none"));
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (cfg.tag == ExperimentTag::custom) {
        cfg.custom_generator = generator_from_json(j.at("generator"));
        cfg.custom_test = test_from_json(j.at("test"));
    }
    return cfg;
}

ExperimentTag experiment_tag_from_string(const std::string& token) {
    if (token == "exp1") return ExperimentTag::exp1;
    if (token == "exp2") return ExperimentTag::exp2;
    if (token == "exp3" || token == "exp3-type1") return ExperimentTag::exp3_type1;
    if (token == "exp3-power") return ExperimentTag::exp3_power;
    if (token == "custom") return ExperimentTag::custom;
    throw ConfigError("unknown experiment: " + token);
}

MRule m_rule_from_string(const std::string& token) {
    if (token == "list") return MRule::list;
    if (token == "n") return MRule::n;
    if (token == "sqrt") return MRule::sqrt_n;
    if (token == "n14") return MRule::n14;
    if (token == "n110") return MRule::n110;
    if (token == "n25") return MRule::n25;
    throw ConfigError("unknown M rule: " + token);
}

}  // namespace cipt
