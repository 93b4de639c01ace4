#include <doctest.h>

#include <cmath>
#include <set>

#include "vdwalk/errors.hpp"
#include "vdwalk/lattice.hpp"

using namespace vdwalk;

namespace {

LatticeParams params(int k, Dyadic eps, Dyadic window) {
    LatticeParams p;
    p.k = k;
    p.epsilon = eps;
    p.window_radius = window;
    return p;
}

// Distance from the origin to an axis-aligned unit segment, sampled densely.
double sampled_clearance(int i, int j, int di, int dj, int k) {
    const double h = std::ldexp(1.0, -k);
    double best = INFINITY;
    for (int s = 0; s <= 4000; ++s) {
        const double u = s / 4000.0;
        best = std::min(best, std::hypot((i + u * di) * h, (j + u * dj) * h));
    }
    return best;
}

}  // namespace

TEST_CASE("embedding of vertices") {
    const Point p = embed(Vertex::plane(3, -4), 3);
    CHECK(p.kind == VertexKind::Plane);
    CHECK(p.x == 0.375);
    CHECK(p.y == -0.5);
    CHECK(embed(Vertex::ray(5), 2).x == 1.25);
    CHECK(embed(Vertex::darning(), 7) == Point::darning());
}

TEST_CASE("closed disc membership is exact at the boundary") {
    // eps = 1/8 at k = 3: the point (1, 0) lies exactly on the circle.
    CHECK(in_closed_disc(1, 0, 3, Dyadic(1, 3)));
    CHECK_FALSE(in_closed_disc(1, 1, 3, Dyadic(1, 3)));
    // 3-4-5 triangle: (3, 4) at k = 5 has |x| = 5/32.
    CHECK(in_closed_disc(3, 4, 5, Dyadic(5, 5)));
    CHECK_FALSE(in_closed_disc(3, 4, 5, Dyadic(9, 6)));
}

TEST_CASE("segment clearance agrees with dense sampling away from ties") {
    const int k = 4;
    const Dyadic eps(3, 4);
    const double e = eps.to_double();
    for (int i = -6; i <= 6; ++i)
        for (int j = -6; j <= 6; ++j)
            for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
                const double d = sampled_clearance(i, j, di, dj, k);
                if (std::abs(d - e) < 1e-6) continue;
                CHECK(segment_clears_disc(Vertex::plane(i, j), Vertex::plane(i + di, j + dj), k, eps) == (d > e));
            }
}

TEST_CASE("segment tangent to the disc is excluded") {
    // eps = 1/8, k = 3: segment from (-1, 1) to (0, 1) passes at distance exactly 1/8.
    CHECK_FALSE(segment_clears_disc(Vertex::plane(-1, 1), Vertex::plane(0, 1), 3, Dyadic(1, 3)));
}

TEST_CASE("built lattice satisfies its structural invariants") {
    for (int k : {3, 4, 5}) {
        const VdLattice lat = build_lattice(params(k, Dyadic(1, 3), Dyadic(9, 4)));
        for (const auto& c : check_lattice_invariants(lat)) {
            INFO(c.name << ": " << c.detail);
            CHECK(c.passed);
        }
        CHECK(lat.vertex(0).is_darning());
        CHECK(lat.neighbors(0).front() == 1);
        CHECK(lat.vertex(1) == Vertex::ray(1));
    }
}

TEST_CASE("ray degrees and the darning row") {
    const VdLattice lat = build_lattice(params(4, Dyadic(1, 3), Dyadic(3, 2)));
    const VertexIndex r3 = lat.at(Vertex::ray(3));
    CHECK(lat.degree(r3) == 2);
    // Darning neighbours: Ray(1) plus every plane vertex with a lattice neighbour in the disc.
    std::size_t expected = 1;
    for (VertexIndex v = 0; v < lat.size(); ++v) {
        const Vertex& x = lat.vertex(v);
        if (!x.is_plane()) continue;
        bool touches = false;
        for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
            touches = touches || in_closed_disc(x.i + di, x.j + dj, 4, Dyadic(1, 3));
        expected += touches;
    }
    CHECK(lat.degree(0) == expected);
}

TEST_CASE("masses: plane deg/4 * 4^-k, ray deg/2 * 2^-k, darning formula") {
    const int k = 4;
    const VdLattice lat = build_lattice(params(k, Dyadic(1, 3), Dyadic(3, 2)));
    const double h = std::ldexp(1.0, -k);
    for (VertexIndex v = 0; v < lat.size(); ++v) {
        const Vertex& x = lat.vertex(v);
        double m = 0.0;
        if (x.is_plane()) m = lat.degree(v) * h * h / 4.0;
        if (x.is_ray()) m = lat.degree(v) * h / 2.0;
        if (x.is_darning()) m = h / 2.0 + (lat.degree(v) - 1) * h * h / 4.0;
        CHECK(lat.mass(v) == doctest::Approx(m).epsilon(1e-15));
    }
}

TEST_CASE("theory regime bounds at the darning vertex") {
    const VdLattice lat = build_lattice(params(10, Dyadic(1, 7), Dyadic(1, 4)));
    CHECK_FALSE(lat.params().outside_theory_regime());
    const double eps = 1.0 / 128.0;
    CHECK(lat.degree(0) <= 56.0 * eps * 1024 + 28);
    CHECK(lat.mass(0) < 1.0 / 1024);
    for (const auto& c : check_lattice_invariants(lat, 0)) CHECK(c.passed);
}

TEST_CASE("graph distance dominates the geodesic metric on a small window") {
    const VdLattice lat = build_lattice(params(3, Dyadic(1, 3), Dyadic(9, 4)));
    for (VertexIndex x = 0; x < lat.size(); ++x)
        for (VertexIndex y = 0; y < lat.size(); ++y)
            CHECK(graph_distance(lat, x, y) >= geodesic_distance(lat.embed(x), lat.embed(y), lat.epsilon()) - 1e-12);
}

TEST_CASE("geodesic metric takes the route through the darning point when shorter") {
    const double eps = 0.25;
    // Opposite points at radius 0.5: chord 1.0 versus 0.25 + 0.25 through a*.
    CHECK(geodesic_distance(Point::plane(0.5, 0), Point::plane(-0.5, 0), eps) == doctest::Approx(0.5));
    CHECK(geodesic_distance(Point::plane(0.5, 0), Point::plane(0.5, 0.1), eps) == doctest::Approx(0.1));
    CHECK(geodesic_distance(Point::ray(0.3), Point::plane(0.5, 0), eps) == doctest::Approx(0.55));
    CHECK(rho_norm(Point::ray(0.3), eps) == doctest::Approx(0.3));
    CHECK(rho_norm(Point::plane(0.3, 0.4), eps) == doctest::Approx(0.25));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(build_lattice(params(5, Dyadic(3, 2), Dyadic(4, 0))), ParameterError);   // eps >= 1/2
    CHECK_THROWS_AS(build_lattice(params(5, Dyadic(1, 3), Dyadic(1, 1))), ParameterError);   // window = 4 eps
    CHECK_THROWS_AS(build_lattice(params(0, Dyadic(1, 3), Dyadic(3, 2))), ParameterError);
    CHECK_THROWS_AS(parse_boundary_mode("open"), ParameterError);
}

TEST_CASE("absorbing mode keeps infinite-lattice degrees at the window edge") {
    LatticeParams p = params(3, Dyadic(1, 3), Dyadic(3, 2));
    p.boundary = BoundaryMode::Absorbing;
    const VdLattice lat = build_lattice(p);
    const VertexIndex corner = lat.at(Vertex::plane(6, 6));
    CHECK(lat.degree(corner) == 4);
    CHECK(lat.exits(corner) == 2);
    CHECK(lat.in_boundary_margin(corner));
}
