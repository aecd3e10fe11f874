#include "cipt/metrics.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace cipt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_support(const DiscreteDist& P, const DiscreteDist& Q) {
    if (P.size() != Q.size()) throw DataError("distributions have mismatched supports");
}

}  // namespace

DiscreteDist::DiscreteDist(std::vector<double> probs) : p(std::move(probs)) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw DataError("probabilities must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DataError("probabilities must sum to 1");
}

double tv_distance(const DiscreteDist& P, const DiscreteDist& Q) {
    check_support(P, Q);
    double total = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) total += std::abs(P.p[i] - Q.p[i]);
    return total / 2.0;
}

double gen_hellinger(const DiscreteDist& P, const DiscreteDist& Q, double gamma) {
    check_support(P, Q);
    if (gamma < 1.0) throw ConfigError("gen_hellinger needs gamma >= 1");
    double total = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        double diff = std::abs(std::pow(P.p[i], 1.0 / gamma) - std::pow(Q.p[i], 1.0 / gamma));
        total += std::pow(diff, gamma);
    }
    return std::pow(total / 2.0, 1.0 / gamma);
}

double renyi_div(const DiscreteDist& P, const DiscreteDist& Q, double gamma) {
    check_support(P, Q);
    if (!(gamma > 0.0)) throw ConfigError("renyi_div needs gamma > 0");
    if (gamma == 1.0) return kl_divergence(P, Q);

    double sum = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        double p = P.p[i];
        double q = Q.p[i];
        if (p == 0.0) continue;  // covers p = q = 0 as well
        if (q == 0.0) {
            if (gamma > 1.0) return kInf;
            continue;  // p^gamma q^{1-gamma} = 0 for gamma < 1
        }
        sum += std::pow(p, gamma) * std::pow(q, 1.0 - gamma);
    }
    if (sum <= 0.0) return kInf;  // disjoint supports under gamma < 1
    return std::log(sum) / (gamma - 1.0);
}

double kl_divergence(const DiscreteDist& P, const DiscreteDist& Q) {
    check_support(P, Q);
    double total = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        double p = P.p[i];
        if (p == 0.0) continue;
        if (Q.p[i] == 0.0) return kInf;
        total += p * std::log(p / Q.p[i]);
    }
    return total;
}

double chi_square_divergence(const DiscreteDist& P, const DiscreteDist& Q) {
    check_support(P, Q);
    double total = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        double p = P.p[i];
        double q = Q.p[i];
        if (q == 0.0) {
            if (p == 0.0) continue;
            return kInf;
        }
        total += (p - q) * (p - q) / q;
    }
    return total;
}

SmoothnessReport estimate_lipschitz(const std::function<DiscreteDist(double)>& family,
                                    std::span<const double> grid, SmoothnessMetric metric,
                                    double gamma) {
    if (grid.size() < 2) throw ConfigError("smoothness grid needs at least 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw ConfigError("smoothness grid must be strictly increasing");
    }

    std::vector<DiscreteDist> dists;
    dists.reserve(grid.size());
    for (double z : grid) dists.push_back(family(z));

    auto distance = [&](const DiscreteDist& a, const DiscreteDist& b) {
        switch (metric) {
            case SmoothnessMetric::tv:
                return tv_distance(a, b);
            case SmoothnessMetric::gen_hellinger:
                return gen_hellinger(a, b, gamma);
            case SmoothnessMetric::renyi:
                return std::sqrt(renyi_div(a, b, gamma));
        }
        return 0.0;
    };

    SmoothnessReport report;
    report.metric = metric;
    report.gamma = gamma;
    report.grid.assign(grid.begin(), grid.end());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = i + 1; j < grid.size(); ++j) {
            double ratio = distance(dists[i], dists[j]) / (grid[j] - grid[i]);
            if (ratio > report.lipschitz) report.lipschitz = ratio;
        }
    }
    return report;
}

}  // namespace cipt
