#pragma once

// Jump law of the continuous-time walk, transient laws by uniformization,
// heat-kernel densities against m_k, and the Dirichlet form in two forms
// (edge sum and road-map integral) that must agree identically.

#include <cstdint>
#include <gmpxx.h>
#include <span>
#include <utility>
#include <vector>

#include "vdwalk/errors.hpp"
#include "vdwalk/lattice.hpp"

namespace vdwalk {

/// Exact jump probability numerator / denominator.
struct Ratio {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// j_k(x, y) for the neighbour stored at absolute adjacency slot `slot` of x.
Ratio jump_ratio(const VdLattice& lat, VertexIndex x, std::size_t slot);

/// Road map J_k plus the constant speed lambda_k = 2^(2k).
struct JumpKernel {
    double speed = 0.0;
    std::vector<double> prob;     // aligned with the lattice adjacency slots
    std::vector<double> in_prob;  // in_prob[s] = j(adjacency[s], owner of s)

    /// Probability mass killed when leaving the window (absorbing mode only).
    std::vector<double> exit_prob;
};

JumpKernel build_jump_kernel(const VdLattice& lat);

/// The row j_k(x, .) as (neighbour, probability) pairs.
std::vector<std::pair<VertexIndex, double>> jump_distribution(const VdLattice& lat, VertexIndex x);

/// Exact j(x,y) m(x) = j(y,x) m(y) on every edge.
bool detailed_balance_exact(const VdLattice& lat);

struct KernelDistribution {
    VertexIndex start = VdLattice::kDarning;
    double time = 0.0;
    std::vector<double> probs;
    double truncation_error = 0.0;
    double leaked_mass = 0.0;
    std::size_t terms = 0;  // N + 1 Poisson terms used
    double tol = 0.0;
};

/// Poisson(mean) weights w_0..w_N with N the smallest index whose right tail
/// is <= tol.
struct PoissonTruncation {
    std::vector<double> weights;
    double tail = 0.0;
};

PoissonTruncation poisson_truncation(double mean, double tol);

struct UniformizationOptions {
    double budget = 1e5;  // max lambda_k * t
};

/// P^{x0}[X_t = .] = sum_n Poisson(lambda t; n) (J^n)(x0, .), truncated at
/// tail <= tol.
KernelDistribution transition_distribution(const VdLattice& lat, VertexIndex x0, double t, double tol,
                                           const UniformizationOptions& opts = {});

/// Same series evaluated at several times with shared powers of J.
std::vector<KernelDistribution> transition_distributions(const VdLattice& lat, VertexIndex x0,
                                                         std::span<const double> times, double tol,
                                                         const UniformizationOptions& opts = {});

/// p_k(t, x0, y) = P^{x0}[X_t = y] / m_k(y).
std::vector<double> heat_kernel_density(const VdLattice& lat, const KernelDistribution& dist);
std::vector<double> heat_kernel_density(const VdLattice& lat, VertexIndex x0, double t, double tol,
                                        const UniformizationOptions& opts = {});

template <typename T>
T make_ratio(std::int64_t num, std::int64_t den);

template <>
inline double make_ratio<double>(std::int64_t num, std::int64_t den) {
    return static_cast<double>(num) / static_cast<double>(den);
}

template <>
inline mpq_class make_ratio<mpq_class>(std::int64_t num, std::int64_t den) {
    mpq_class q{mpz_class(static_cast<long>(num)), mpz_class(static_cast<long>(den))};
    q.canonicalize();
    return q;
}

namespace detail {
inline void check_sizes(const VdLattice& lat, std::size_t nf, std::size_t ng) {
    if (nf != lat.size() || ng != lat.size())
        throw ContractViolation("Dirichlet form: function length does not match vertex count");
}
}  // namespace detail

/// (1/8) sum over oriented plane edges + (2^k/4) sum over oriented ray edges
/// of (f(x)-f(y))(g(x)-g(y)). An edge at a* belongs to the part of its other
/// endpoint.
template <typename T>
T dirichlet_form(const VdLattice& lat, std::span<const T> f, std::span<const T> g) {
    detail::check_sizes(lat, f.size(), g.size());
    T plane_sum = 0;
    T ray_sum = 0;
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        const bool x_ray = lat.vertex(x).is_ray();
        for (VertexIndex y : lat.neighbors(x)) {
            const T term = (f[x] - f[y]) * (g[x] - g[y]);
            if (x_ray || lat.vertex(y).is_ray())
                ray_sum += term;
            else
                plane_sum += term;
        }
    }
    return make_ratio<T>(1, 8) * plane_sum + make_ratio<T>(std::int64_t{1} << lat.k(), 4) * ray_sum;
}

/// (1/2) sum_x sum_{y~x} (f(x)-f(y))(g(x)-g(y)) j_k(x,y) lambda_k m_k(x).
template <typename T>
T dirichlet_form_jump(const VdLattice& lat, std::span<const T> f, std::span<const T> g) {
    detail::check_sizes(lat, f.size(), g.size());
    // lambda_k m_k(x) = mass_units(x) * 2^(2k) / 2^(2k+2) = mass_units(x) / 4.
    T total = 0;
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        const auto row = lat.neighbors(x);
        const std::size_t base = lat.neighbor_offset(x);
        T row_sum = 0;
        for (std::size_t s = 0; s < row.size(); ++s) {
            const VertexIndex y = row[s];
            const Ratio j = jump_ratio(lat, x, base + s);
            row_sum += (f[x] - f[y]) * (g[x] - g[y]) * make_ratio<T>(j.num, j.den);
        }
        total += row_sum * make_ratio<T>(lat.mass_units(x), 8);
    }
    return total;
}

}  // namespace vdwalk
