#pragma once

// Test functions of the class G (C^3, constant on the disc with the matching
// ray value at 0, compactly supported), the discrete generator L_k, the limit
// generator 1/2 d^2/ds^2 on the ray plus 1/4 Laplacian on the plane, and the
// occupation of the darning neighbourhood.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdwalk/kernel.hpp"
#include "vdwalk/lattice.hpp"
#include "vdwalk/montecarlo.hpp"

namespace vdwalk {

/// Value and first two derivatives of a one-variable function.
struct Jet1 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// C^3 smootherstep 35u^4 - 84u^5 + 70u^6 - 20u^7, clamped to [0, 1].
Jet1 smootherstep(double u);

struct PlaneJet {
    double value = 0.0;
    double gx = 0.0;
    double gy = 0.0;
    double laplacian = 0.0;
};

/// A radial profile is called with (r, r^2); r^2 comes straight from the
/// coordinates so that quadratic pieces stay exact on dyadic points.
using RadialProfile = std::function<Jet1(double r, double r2)>;

enum class ProfileKind : std::uint8_t { Bump, QuadraticWindow, RadialPoly };

std::string to_string(ProfileKind kind);
ProfileKind parse_profile_kind(std::string_view text);

/// A|u|^{3+gamma} (1 - (|u|/half_width)^2)^4 around a centre: C^3 but not
/// C^4 at the centre, where discrete second differences converge at rate
/// h^{1+gamma}.
struct CuspSpec {
    enum class Where : std::uint8_t { Plane, Ray } where = Where::Ray;
    double cx = 0.375;  // ray coordinate, or plane x
    double cy = 0.0;
    double amplitude = 200.0;
    double gamma = 0.1;
    double half_width = 0.3;
};

struct TestFunctionSpec {
    ProfileKind profile = ProfileKind::Bump;
    double disc_constant = 1.0;
    double support_radius = 0.4;
    /// Radius where the profile leaves the disc constant; <= 0 means epsilon.
    double inner_radius = 0.0;
    /// QuadraticWindow: |x|^2 exactly on [flat_inner, flat_outer]; <= 0 picks
    /// the middle half of [inner_radius, support_radius].
    double flat_inner = 0.0;
    double flat_outer = 0.0;
    /// RadialPoly: c + a (r - inner)^4 before the outer cutoff.
    double poly_coefficient = 1.0;
    std::optional<CuspSpec> cusp;
};

class TestFunction {
public:
    const TestFunctionSpec& spec() const { return spec_; }
    double epsilon() const { return eps_; }
    double disc_constant() const { return spec_.disc_constant; }
    double support_radius() const { return support_; }
    double flat_inner() const { return flat_inner_; }
    double flat_outer() const { return flat_outer_; }

    PlaneJet plane_jet(double x, double y) const;
    Jet1 ray_jet(double s) const;

    double value(const Point& p) const;
    double value(const VdLattice& lat, VertexIndex v) const;

    friend TestFunction make_test_function(const TestFunctionSpec& spec, double epsilon);

private:
    TestFunctionSpec spec_;
    double eps_ = 0.0;
    double support_ = 0.0;
    double flat_inner_ = 0.0;
    double flat_outer_ = 0.0;
    RadialProfile plane_;
    RadialProfile ray_;
    RadialProfile cusp_;  // empty unless spec_.cusp
};

/// Throws ParameterError if the pieces cannot be constant on the closed disc
/// or fail to match at the ray origin.
TestFunction make_test_function(const TestFunctionSpec& spec, double epsilon);

/// L_k f(x) = 2^{2k} sum_y (f(y) - f(x)) j_k(x, y).
double apply_discrete_generator(const VdLattice& lat, const TestFunction& f, VertexIndex x);

/// 1/4 Laplacian on the plane part, 1/2 f'' on the ray. DomainError at a* or
/// inside the closed disc.
double apply_limit_generator(const TestFunction& f, const Point& p);

/// Member of S^k: a ray vertex, or a plane vertex of degree 4; in both cases
/// outside the window margin.
bool in_s_set(const VdLattice& lat, VertexIndex v);

struct ConvergenceRow {
    int k = 0;
    double sup_error = 0.0;
    Vertex argmax;
    double max_abs_generator = 0.0;
    std::size_t points = 0;
};

struct ConvergenceReport {
    int k0 = 0;
    std::vector<ConvergenceRow> rows;
    std::vector<double> ratios;  // sup_error(k+1) / sup_error(k)
};

/// Sup-error of L_k f against L f over the S^{k0} points (k0 = first lattice's
/// level), for each lattice of the ladder.
ConvergenceReport convergence_report(std::span<const VdLattice* const> ladder, const TestFunction& f);

struct OccupationReport {
    double delta = 0.0;
    double horizon = 0.0;
    std::vector<double> times;
    std::vector<EstimateWithCI> mc;
    std::vector<double> exact;  // empty when not requested or over budget
    double killed_fraction = 0.0;
};

/// Time grid of n_times points spanning [2^-k / delta, T].
std::vector<double> occupation_times(int k, double T, double delta, std::size_t n_times);

/// Monte Carlo P^{a*}[X_t not in S^k] on the grid; optional exact values by
/// uniformization. Throws ParameterError unless 0 < delta < min(1, T)/4.
OccupationReport darning_occupation(const VdLattice& lat, double T, double delta, std::size_t n, std::uint64_t seed,
                                    std::size_t n_times = 9, bool exact = false, double tol = 1e-10);

std::vector<double> darning_occupation_exact(const VdLattice& lat, std::span<const double> times, double tol);

}  // namespace vdwalk
