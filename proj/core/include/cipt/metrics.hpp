#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cipt/types.hpp"

namespace cipt {

// Finite discrete distribution. Entries must be nonnegative and sum to one
// within 1e-12.
struct DiscreteDist {
    std::vector<double> p;

    explicit DiscreteDist(std::vector<double> probs);
    [[nodiscard]] std::size_t size() const noexcept { return p.size(); }
};

// (1/2) sum |p - q|.
double tv_distance(const DiscreteDist& P, const DiscreteDist& Q);

// ((1/2) sum |p^{1/gamma} - q^{1/gamma}|^gamma)^{1/gamma} for gamma >= 1.
// gamma = 1 is total variation, gamma = 2 the Hellinger distance; values lie
// in [0, 1].
double gen_hellinger(const DiscreteDist& P, const DiscreteDist& Q, double gamma);

// Renyi divergence of order gamma > 0; the gamma = 1 branch is the KL limit.
// Cells with p = q = 0 contribute nothing; a cell with p > 0, q = 0 makes the
// divergence infinite when gamma >= 1.
double renyi_div(const DiscreteDist& P, const DiscreteDist& Q, double gamma);

double kl_divergence(const DiscreteDist& P, const DiscreteDist& Q);
double chi_square_divergence(const DiscreteDist& P, const DiscreteDist& Q);

enum class SmoothnessMetric { tv, gen_hellinger, renyi };

struct SmoothnessReport {
    SmoothnessMetric metric = SmoothnessMetric::tv;
    double gamma = 1.0;
    double lipschitz = 0.0;      // max over grid pairs of D(P_z, P_z') / |z - z'|
    std::vector<double> grid;
};

// Empirical smoothness constant of a conditional family over a strictly
// increasing grid of z values. In Renyi mode the ratio uses the square root
// of the divergence.
SmoothnessReport estimate_lipschitz(const std::function<DiscreteDist(double)>& family,
                                    std::span<const double> grid, SmoothnessMetric metric,
                                    double gamma = 1.0);

}  // namespace cipt
