#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cipt/binning.hpp"
#include "cipt/seed.hpp"
#include "cipt/types.hpp"

namespace cipt {

// Z uniform on labels 1..M, X uniform on {1,2}, Y = X. Independence of (X,Y)
// from Z makes this a pure power study for the local test.
Dataset gen_exp1(std::size_t n, int M, Rng& rng);

// Null family with a two-piece Z density: mass 1 - eps/M spread uniformly on
// [0, 1/M] and the rest uniform above, eps = 1/n. X and Y are conditionally
// independent with p(x=1|z) = 1/2 - 1/(2M) + z below 1/M and 1/2 + 1/(2M)
// above. Requires M >= 2 and eps < 1/2.
Dataset gen_exp2_null(std::size_t n, int M, Rng& rng);

// Z uniform on [0,1]. Null: X, Y independent Bernoulli(f(z)) with
// f(z) = e^{sin(theta z)}/4 (labels 1 and 2). Alternative: theta must be 1
// and the joint puts f^2 + f/5 on (1,1), 4f/5 - f^2 on the off-diagonal
// cells, and (1-f)^2 + f/5 on (2,2).
Dataset gen_exp3(std::size_t n, double theta, bool alternative, Rng& rng);

// Closed forms behind the experiment families, exposed for oracle checks and
// smoothness reports.
double exp2_px1(double z, int M);
double exp2_z_density(double z, std::size_t n, int M);
double exp3_f(double z, double theta);
std::array<double, 4> exp3_alt_joint(double z);  // cells (1,1),(1,2),(2,1),(2,2)

// Table-driven conditionally independent family over categorical Z: row m of
// each table is the conditional pmf given label m+1.
struct GenericCiSpec {
    std::vector<double> pmf_z;
    std::vector<std::vector<double>> x_given_z;
    std::vector<std::vector<double>> y_given_z;
};

Dataset gen_generic_ci(const GenericCiSpec& spec, std::size_t n, Rng& rng);

struct GeneratorSpec {
    enum class Tag { exp1, exp2_null, exp3_null, exp3_alt, generic_ci };
    Tag tag = Tag::exp1;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    int M = 0;          // exp1 and exp2_null
    double theta = 0.0; // exp3_null; the alternative fixes theta = 1
    GenericCiSpec generic;
};

Dataset generate(const GeneratorSpec& spec, Rng& rng);

// Exact smoothed moments of a generator family over z-bins.
struct BinnedMoments {
    int ell1 = 0;
    int ell2 = 0;
    std::vector<std::vector<double>> joint;       // per bin, row-major conditional pmf
    std::vector<std::vector<double>> x_marginal;  // per bin, length ell1
    std::vector<std::vector<double>> y_marginal;  // per bin, length ell2
    std::vector<double> mass;                     // bin masses, sum 1
    std::vector<double> sq_l2_gap;                // per bin: sum_xy (joint - prod)^2
};

// Real-z families integrate the conditional cells against the z density over
// each partition cell (adaptive quadrature, absolute tolerance 1e-10);
// categorical-z families report per-label moments and ignore the partition.
BinnedMoments binned_moments(const GeneratorSpec& spec, const Partition& partition);

}  // namespace cipt
