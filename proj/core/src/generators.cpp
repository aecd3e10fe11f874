#include "cipt/generators.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <utility>

#include "cipt/metrics.hpp"

namespace cipt {

namespace {

Dataset binary_real_z(std::size_t n) {
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    ds.z_kind = ZKind::real;
    ds.x.reserve(n);
    ds.y.reserve(n);
    ds.z.reserve(n);
    return ds;
}

void check_exp2_params(std::size_t n, int M) {
    if (M < 2) throw ConfigError("exp2 needs M >= 2");
    if (n == 0 || 1.0 / static_cast<double>(n) >= 0.5) {
        throw ConfigError("exp2 needs eps = 1/n below 1/2");
    }
}

// One smooth piece of a real-z family: z density and conditional joint cells
// are analytic on [lo, hi], so quadrature never straddles a kink.
struct Piece {
    double lo = 0.0;
    double hi = 1.0;
    std::function<double(double)> weight;
    std::function<void(double, std::vector<double>&)> cells;
};

struct Family {
    int ell1 = 0;
    int ell2 = 0;
    std::vector<Piece> pieces;
};

void product_cells(double p1, std::vector<double>& out) {
    out[0] = p1 * p1;
    out[1] = p1 * (1.0 - p1);
    out[2] = (1.0 - p1) * p1;
    out[3] = (1.0 - p1) * (1.0 - p1);
}

Family make_family(const GeneratorSpec& spec) {
    Family fam;
    fam.ell1 = 2;
    fam.ell2 = 2;
    switch (spec.tag) {
        case GeneratorSpec::Tag::exp2_null: {
            check_exp2_params(spec.n, spec.M);
            double eps = 1.0 / static_cast<double>(spec.n);
            int M = spec.M;
            double kink = 1.0 / M;
            fam.pieces.push_back(
                {0.0, kink, [eps, M](double) { return M - eps; },
                 [M](double z, std::vector<double>& out) { product_cells(exp2_px1(z, M), out); }});
            fam.pieces.push_back(
                {kink, 1.0, [eps, M](double) { return eps / (M - 1); },
                 [M](double z, std::vector<double>& out) { product_cells(exp2_px1(z, M), out); }});
            break;
        }
        case GeneratorSpec::Tag::exp3_null: {
            double theta = spec.theta;
            fam.pieces.push_back({0.0, 1.0, [](double) { return 1.0; },
                                  [theta](double z, std::vector<double>& out) {
                                      product_cells(exp3_f(z, theta), out);
                                  }});
            break;
        }
        case GeneratorSpec::Tag::exp3_alt:
            fam.pieces.push_back({0.0, 1.0, [](double) { return 1.0; },
                                  [](double z, std::vector<double>& out) {
                                      auto cells = exp3_alt_joint(z);
                                      out.assign(cells.begin(), cells.end());
                                  }});
            break;
        default:
            throw ConfigError("binned_moments needs a real-z family for a partition");
    }
    return fam;
}

double simpson_rule(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                     double fm, double fb, double whole, double eps, int depth) {
    if (depth <= 0) throw ConfigError("quadrature failed to converge");
    double m = (a + b) / 2.0;
    double lm = (a + m) / 2.0;
    double rm = (m + b) / 2.0;
    double flm = f(lm);
    double frm = f(rm);
    double left = simpson_rule(a, m, fa, flm, fm);
    double right = simpson_rule(m, b, fm, frm, fb);
    double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
    if (b <= a) return 0.0;
    double fa = f(a);
    double fb = f(b);
    double fm = f((a + b) / 2.0);
    return adaptive_step(f, a, b, fa, fm, fb, simpson_rule(a, b, fa, fm, fb), eps, 60);
}

BinnedMoments categorical_moments(int ell1, int ell2, const std::vector<double>& mass,
                                  const std::vector<std::vector<double>>& joints) {
    BinnedMoments bm;
    bm.ell1 = ell1;
    bm.ell2 = ell2;
    bm.mass = mass;
    bm.joint = joints;
    for (const auto& joint : joints) {
        std::vector<double> xm(static_cast<std::size_t>(ell1), 0.0);
        std::vector<double> ym(static_cast<std::size_t>(ell2), 0.0);
        for (int i = 0; i < ell1; ++i) {
            for (int j = 0; j < ell2; ++j) {
                xm[static_cast<std::size_t>(i)] += joint[static_cast<std::size_t>(i) * ell2 + j];
                ym[static_cast<std::size_t>(j)] += joint[static_cast<std::size_t>(i) * ell2 + j];
            }
        }
        double gap = 0.0;
        for (int i = 0; i < ell1; ++i) {
            for (int j = 0; j < ell2; ++j) {
                double d = joint[static_cast<std::size_t>(i) * ell2 + j] -
                           xm[static_cast<std::size_t>(i)] * ym[static_cast<std::size_t>(j)];
                gap += d * d;
            }
        }
        bm.x_marginal.push_back(std::move(xm));
        bm.y_marginal.push_back(std::move(ym));
        bm.sq_l2_gap.push_back(gap);
    }
    return bm;
}

}  // namespace

Dataset gen_exp1(std::size_t n, int M, Rng& rng) {
    if (M < 1) throw ConfigError("exp1 needs M >= 1");
    Dataset ds;
    ds.x_spec = AxisSpec::categorical(2);
    ds.y_spec = AxisSpec::categorical(2);
    ds.z_kind = ZKind::categorical;
    ds.x.reserve(n);
    ds.y.reserve(n);
    ds.z.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(rng.uniform_below(2) + 1);
        ds.x.push_back(x);
        ds.y.push_back(x);
        ds.z.push_back(static_cast<double>(rng.uniform_below(static_cast<std::uint64_t>(M)) + 1));
    }
    return ds;
}

double exp2_px1(double z, int M) {
    double h = 1.0 / M;
    if (z <= h) return 0.5 - h / 2.0 + z;
    return 0.5 + h / 2.0;
}

double exp2_z_density(double z, std::size_t n, int M) {
    check_exp2_params(n, M);
    double eps = 1.0 / static_cast<double>(n);
    if (z < 0.0 || z > 1.0) return 0.0;
    if (z <= 1.0 / M) return M - eps;
    return eps / (M - 1);
}

Dataset gen_exp2_null(std::size_t n, int M, Rng& rng) {
    check_exp2_params(n, M);
    double eps = 1.0 / static_cast<double>(n);
    double low_mass = 1.0 - eps / M;
    Dataset ds = binary_real_z(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform01();
        double z;
        if (u <= low_mass) {
            z = u / (M - eps);
        } else {
            z = 1.0 / M + (u - low_mass) * (M - 1) / eps;
        }
        double p1 = exp2_px1(z, M);
        ds.x.push_back(rng.bernoulli(p1) ? 1.0 : 2.0);
        ds.y.push_back(rng.bernoulli(p1) ? 1.0 : 2.0);
        ds.z.push_back(z);
    }
    return ds;
}

double exp3_f(double z, double theta) { return std::exp(std::sin(theta * z)) / 4.0; }

std::array<double, 4> exp3_alt_joint(double z) {
    double f = exp3_f(z, 1.0);
    return {f * f + f / 5.0, 0.8 * f - f * f, 0.8 * f - f * f,
            (1.0 - f) * (1.0 - f) + f / 5.0};
}

Dataset gen_exp3(std::size_t n, double theta, bool alternative, Rng& rng) {
    if (alternative && theta != 1.0) {
        throw ConfigError("the exp3 alternative is defined for theta = 1");
    }
    Dataset ds = binary_real_z(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = rng.uniform01();
        ds.z.push_back(z);
        if (alternative) {
            auto joint = exp3_alt_joint(z);
            std::size_t cell = rng.categorical(std::span<const double>(joint));
            ds.x.push_back(static_cast<double>(cell / 2 + 1));
            ds.y.push_back(static_cast<double>(cell % 2 + 1));
        } else {
            double f = exp3_f(z, theta);
            ds.x.push_back(rng.bernoulli(f) ? 1.0 : 2.0);
            ds.y.push_back(rng.bernoulli(f) ? 1.0 : 2.0);
        }
    }
    return ds;
}

Dataset gen_generic_ci(const GenericCiSpec& spec, std::size_t n, Rng& rng) {
    DiscreteDist pz(spec.pmf_z);
    if (spec.x_given_z.size() != pz.size() || spec.y_given_z.size() != pz.size()) {
        throw DataError("conditional tables must have one row per z label");
    }
    std::vector<DiscreteDist> px;
    std::vector<DiscreteDist> py;
    for (std::size_t m = 0; m < pz.size(); ++m) {
        px.emplace_back(spec.x_given_z[m]);
        py.emplace_back(spec.y_given_z[m]);
        if (px[m].size() != px[0].size() || py[m].size() != py[0].size()) {
            throw DataError("conditional rows must share a support size");
        }
    }
    if (px[0].size() < 2 || py[0].size() < 2) {
        throw DataError("conditional supports need at least 2 categories");
    }

    Dataset ds;
    ds.x_spec = AxisSpec::categorical(static_cast<int>(px[0].size()));
    ds.y_spec = AxisSpec::categorical(static_cast<int>(py[0].size()));
    ds.z_kind = ZKind::categorical;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = rng.categorical(std::span<const double>(pz.p));
        ds.z.push_back(static_cast<double>(m + 1));
        ds.x.push_back(static_cast<double>(rng.categorical(std::span<const double>(px[m].p)) + 1));
        ds.y.push_back(static_cast<double>(rng.categorical(std::span<const double>(py[m].p)) + 1));
    }
    return ds;
}

Dataset generate(const GeneratorSpec& spec, Rng& rng) {
    switch (spec.tag) {
        case GeneratorSpec::Tag::exp1:
            return gen_exp1(spec.n, spec.M, rng);
        case GeneratorSpec::Tag::exp2_null:
            return gen_exp2_null(spec.n, spec.M, rng);
        case GeneratorSpec::Tag::exp3_null:
            return gen_exp3(spec.n, spec.theta, false, rng);
        case GeneratorSpec::Tag::exp3_alt:
            return gen_exp3(spec.n, 1.0, true, rng);
        case GeneratorSpec::Tag::generic_ci:
            return gen_generic_ci(spec.generic, spec.n, rng);
    }
    throw ConfigError("unknown generator tag");
}

BinnedMoments binned_moments(const GeneratorSpec& spec, const Partition& partition) {
    if (spec.tag == GeneratorSpec::Tag::exp1) {
        if (spec.M < 1) throw ConfigError("exp1 needs M >= 1");
        std::vector<double> mass(static_cast<std::size_t>(spec.M),
                                 1.0 / static_cast<double>(spec.M));
        std::vector<std::vector<double>> joints(static_cast<std::size_t>(spec.M),
                                                {0.5, 0.0, 0.0, 0.5});
        return categorical_moments(2, 2, mass, joints);
    }
    if (spec.tag == GeneratorSpec::Tag::generic_ci) {
        DiscreteDist pz(spec.generic.pmf_z);
        std::vector<std::vector<double>> joints;
        for (std::size_t m = 0; m < pz.size(); ++m) {
            DiscreteDist px(spec.generic.x_given_z[m]);
            DiscreteDist py(spec.generic.y_given_z[m]);
            std::vector<double> joint;
            joint.reserve(px.size() * py.size());
            for (double a : px.p) {
                for (double b : py.p) joint.push_back(a * b);
            }
            joints.push_back(std::move(joint));
        }
        return categorical_moments(static_cast<int>(spec.generic.x_given_z[0].size()),
                                   static_cast<int>(spec.generic.y_given_z[0].size()), pz.p,
                                   joints);
    }

    Family fam = make_family(spec);
    std::size_t cell_count = static_cast<std::size_t>(fam.ell1) * fam.ell2;
    constexpr double kTol = 1e-12;

    std::vector<double> scratch(cell_count);
    std::vector<std::vector<double>> joints;
    std::vector<double> masses;
    for (int m = 0; m < partition.cells; ++m) {
        double a = partition.boundaries[static_cast<std::size_t>(m)];
        double b = partition.boundaries[static_cast<std::size_t>(m) + 1];
        double mass = 0.0;
        std::vector<double> cells(cell_count, 0.0);
        for (const Piece& piece : fam.pieces) {
            double lo = std::max(a, piece.lo);
            double hi = std::min(b, piece.hi);
            if (hi <= lo) continue;
            mass += integrate(piece.weight, lo, hi, kTol);
            for (std::size_t k = 0; k < cell_count; ++k) {
                auto f = [&](double z) {
                    piece.cells(z, scratch);
                    return scratch[k] * piece.weight(z);
                };
                cells[k] += integrate(f, lo, hi, kTol);
            }
        }
        if (mass <= 0.0) throw ConfigError("partition cell carries no z mass");
        for (double& c : cells) c /= mass;
        masses.push_back(mass);
        joints.push_back(std::move(cells));
    }
    return categorical_moments(fam.ell1, fam.ell2, masses, joints);
}

}  // namespace cipt
