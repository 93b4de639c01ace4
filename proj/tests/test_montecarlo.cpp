#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vdwalk/errors.hpp"
#include "vdwalk/kernel.hpp"
#include "vdwalk/montecarlo.hpp"
#include "vdwalk/parallel.hpp"

using namespace vdwalk;

namespace {

VdLattice lattice(int k, Dyadic window = Dyadic(9, 4), BoundaryMode mode = BoundaryMode::Induced) {
    LatticeParams p;
    p.k = k;
    p.epsilon = Dyadic(1, 3);
    p.window_radius = window;
    p.boundary = mode;
    return build_lattice(p);
}

// Brute-force sup_x |F(x) - G(x)| evaluated at every sample point.
double ks_brute(const std::vector<double>& a, const std::vector<double>& b) {
    auto cdf = [](const std::vector<double>& s, double x) {
        return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= x; })) / s.size();
    };
    double d = 0.0;
    for (const auto* s : {&a, &b})
        for (double x : *s) d = std::max(d, std::abs(cdf(a, x) - cdf(b, x)));
    return d;
}

}  // namespace

TEST_CASE("path structure") {
    const VdLattice lat = lattice(4);
    CHECK(sample_path(lat, 0, 0.0, 1).events.empty());
    const PathSample p = sample_path(lat, 0, 0.1, 42, 3);
    double prev = 0.0;
    VertexIndex cur = p.start;
    for (const auto& e : p.events) {
        CHECK(e.time > prev);
        CHECK(e.time <= 0.1);
        const auto row = lat.neighbors(cur);
        CHECK(std::find(row.begin(), row.end(), e.vertex) != row.end());
        prev = e.time;
        cur = e.vertex;
    }
    CHECK(p.state_at(0.0) == p.start);
    CHECK(p.state_at(0.1) == cur);
}

TEST_CASE("one path is a pure function of (seed, index)") {
    const VdLattice lat = lattice(4);
    const PathSample a = sample_path(lat, 0, 0.2, 99, 17);
    const PathSample b = sample_path(lat, 0, 0.2, 99, 17);
    CHECK(a.events == b.events);
    const PathSample c = sample_path(lat, 0, 0.2, 99, 18);
    CHECK_FALSE(a.events == c.events);
    const auto many = sample_paths(lat, 0, 0.2, 20, 99);
    CHECK(many[17].events == a.events);
}

TEST_CASE("mean number of events matches lambda T") {
    const VdLattice lat = lattice(3);
    const double T = 0.05, lambda = 64.0;
    const std::size_t n = 100000;
    const HoldingTimeReport r = holding_time_statistics(lat, 0, T, n, 5);
    CHECK(std::abs(r.mean_count - lambda * T) <= 4.0 * std::sqrt(lambda * T / n));
}

TEST_CASE("holding times and Poisson counts") {
    const VdLattice lat = lattice(4);
    const double T = 0.02;
    const HoldingTimeReport r = holding_time_statistics(lat, 0, T, 50000, 11);
    CHECK(r.expected_mean == std::ldexp(1.0, -8));
    CHECK(std::abs(r.mean_hold - r.expected_mean) <= 4.0 * r.expected_mean / std::sqrt(double(r.n_holds)));
    CHECK(std::abs(r.dispersion - 1.0) < 0.05);
    CHECK(r.p_value > 1e-3);
}

TEST_CASE("an injected rate defect is detected") {
    const VdLattice lat = lattice(4);
    SamplerOptions bug;
    bug.speed_override = 256.0 * 1.1;
    const HoldingTimeReport r = holding_time_statistics(lat, 0, 0.02, 50000, 11, bug);
    CHECK(r.p_value < 1e-6);
}

TEST_CASE("holding time statistics require enough paths") {
    const VdLattice lat = lattice(3);
    CHECK_THROWS_AS(holding_time_statistics(lat, 0, 0.1, 999, 1), ParameterError);
}

TEST_CASE("results do not depend on the thread count") {
    const VdLattice lat = lattice(4);
    set_thread_count(1);
    const auto a = empirical_law(lat, 0, 0.1, 5000, 3);
    const auto ha = holding_time_statistics(lat, 0, 0.1, 9000, 3);
    set_thread_count(4);
    const auto b = empirical_law(lat, 0, 0.1, 5000, 3);
    const auto hb = holding_time_statistics(lat, 0, 0.1, 9000, 3);
    CHECK(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin(), b.samples().end()));
    CHECK(ha.mean_hold == hb.mean_hold);
    CHECK(ha.chi_square == hb.chi_square);
}

TEST_CASE("empirical law of X_t matches the exact kernel") {
    const VdLattice lat = lattice(3);
    const double t = 0.05;
    const std::size_t n = 200000;
    const auto exact = transition_distribution(lat, 0, t, 1e-12);
    const auto emp = empirical_distribution(lat, 0, t, n, 21);
    std::size_t cells = 0, outside = 0;
    for (VertexIndex v = 0; v < lat.size(); ++v) {
        const double p = exact.probs[v];
        if (p < 1e-3) continue;
        ++cells;
        outside += std::abs(emp[v] - p) > 4.0 * std::sqrt(p * (1 - p) / n);
    }
    CHECK(cells > 10);
    CHECK(outside == 0);
}

TEST_CASE("exceedance: censoring and monotonicity in M") {
    const VdLattice lat = lattice(4);
    const std::vector<double> levels = {0.1, 0.2, 0.3, 1.0};
    const ExceedanceTable e = estimate_sup_exceedance(lat, 0, 0.05, levels, 4000, 8);
    for (std::size_t i = 1; i < levels.size(); ++i) CHECK(e.estimates[i].value <= e.estimates[i - 1].value);
    CHECK(e.estimates.back().value == 0.0);
    CHECK_FALSE(e.warnings.empty());  // M = 1 beyond the 9/16 window
}

TEST_CASE("exceedance is nondecreasing in T on common paths") {
    const VdLattice lat = lattice(4);
    const std::vector<double> levels = {0.15};
    const auto a = estimate_sup_exceedance(lat, 0, 0.02, levels, 4000, 8);
    const auto b = estimate_sup_exceedance(lat, 0, 0.04, levels, 4000, 8);
    CHECK(b.estimates[0].value >= a.estimates[0].value);
}

TEST_CASE("block modulus") {
    const VdLattice lat = lattice(4);
    const PathSample p = sample_path(lat, 0, 0.05, 77);
    // One block: the rho-diameter of everything visited.
    double diam = 0.0;
    std::vector<VertexIndex> seen = {p.start};
    for (const auto& e : p.events) seen.push_back(e.vertex);
    for (VertexIndex a : seen)
        for (VertexIndex b : seen)
            diam = std::max(diam, geodesic_distance(lat.embed(a), lat.embed(b), lat.epsilon()));
    CHECK(block_modulus(lat, p, 1.0) == doctest::Approx(diam));
    CHECK(block_modulus(lat, p, 0.01) <= diam + 1e-15);

    const std::vector<double> th = {0.05, 0.1, 0.2};
    const ModulusTable m = estimate_modulus(lat, 0, 0.05, 0.01, th, 2000, 4);
    CHECK(m.estimates[0].value >= m.estimates[1].value);
    CHECK(m.estimates[1].value >= m.estimates[2].value);
}

TEST_CASE("Kolmogorov-Smirnov distance") {
    const std::vector<double> a = {0.1, 0.4, 0.4, 0.9, 1.3};
    const std::vector<double> b = {0.2, 0.4, 1.0, 1.1};
    CHECK(ks_distance(EmpiricalCdf(a), EmpiricalCdf(a)) == 0.0);
    CHECK(ks_distance(EmpiricalCdf(a), EmpiricalCdf(b)) == doctest::Approx(ks_brute(a, b)));
    const VdLattice lat = lattice(4);
    const auto f = empirical_law(lat, 0, 0.1, 1000, 5);
    const auto g = empirical_law(lat, 0, 0.1, 1200, 6);
    std::vector<double> fa(f.samples().begin(), f.samples().end()), ga(g.samples().begin(), g.samples().end());
    CHECK(ks_distance(f, g) == doctest::Approx(ks_brute(fa, ga)));
    CHECK(f(INFINITY) == 1.0);
    CHECK(ks_noise_floor(1000, 1000) == doctest::Approx(1.358 * std::sqrt(2000.0 / 1e6)));
}

TEST_CASE("absorbing walks are killed at the window edge") {
    const VdLattice lat = lattice(3, Dyadic(9, 4), BoundaryMode::Absorbing);
    double killed = 0.0;
    const auto emp = empirical_distribution(lat, lat.at(Vertex::plane(4, 0)), 0.05, 5000, 2, &killed);
    double s = killed;
    for (double q : emp) s += q;
    CHECK(killed > 0.0);
    CHECK(s == doctest::Approx(1.0));
}
