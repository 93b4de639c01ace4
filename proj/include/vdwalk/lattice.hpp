#pragma once

// The darned varying-dimension lattice: the plane lattice 2^-k Z^2 with the
// closed disc B_eps shorted to a single darning vertex, joined to the half-line
// lattice 2^-k Z_+ at that vertex. Built on a finite max-norm window.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdwalk/dyadic.hpp"

namespace vdwalk {

using VertexIndex = std::uint32_t;

enum class VertexKind : std::uint8_t { Darning, Plane, Ray };

/// Lattice point in integer coordinates at scale 2^-k.
struct Vertex {
    VertexKind kind = VertexKind::Darning;
    std::int32_t i = 0;  // plane x-index, or ray index n
    std::int32_t j = 0;  // plane y-index

    static constexpr Vertex darning() { return {VertexKind::Darning, 0, 0}; }
    static constexpr Vertex plane(std::int32_t i, std::int32_t j) { return {VertexKind::Plane, i, j}; }
    static constexpr Vertex ray(std::int32_t n) { return {VertexKind::Ray, n, 0}; }

    bool is_darning() const { return kind == VertexKind::Darning; }
    bool is_plane() const { return kind == VertexKind::Plane; }
    bool is_ray() const { return kind == VertexKind::Ray; }

    friend bool operator==(const Vertex&, const Vertex&) = default;
};

std::string to_string(const Vertex& v);

/// Point of the continuous state space E: the darning point a*, a plane point
/// outside the disc, or a point on the half-line.
struct Point {
    VertexKind kind = VertexKind::Darning;
    double x = 0.0;  // plane x, or ray coordinate
    double y = 0.0;

    static constexpr Point darning() { return {VertexKind::Darning, 0.0, 0.0}; }
    static constexpr Point plane(double x, double y) { return {VertexKind::Plane, x, y}; }
    static constexpr Point ray(double r) { return {VertexKind::Ray, r, 0.0}; }

    friend bool operator==(const Point&, const Point&) = default;
};

enum class BoundaryMode : std::uint8_t { Induced, Absorbing };

std::string to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(std::string_view text);

struct LatticeParams {
    int k = 5;
    Dyadic epsilon{1, 3};
    Dyadic window_radius{1, 1};
    BoundaryMode boundary = BoundaryMode::Induced;

    /// Throws ParameterError unless 0 < eps < 1/2, window > 4 eps and 1 <= k <= 20.
    void validate() const;

    /// eps >= 1/64 or 2^-k >= eps/4: outside the regime where the mass and
    /// degree bounds at the darning vertex are guaranteed.
    bool outside_theory_regime() const;

    double mesh() const;
};

/// Immutable finite section of the lattice graph G^k with degrees v_k and the
/// reference measure m_k. Vertex 0 is always the darning vertex; ray vertices
/// follow in order n = 1..N, then plane vertices.
class VdLattice {
public:
    static constexpr VertexIndex kDarning = 0;

    const LatticeParams& params() const { return params_; }
    int k() const { return params_.k; }
    double mesh() const { return mesh_; }
    double epsilon() const { return eps_; }

    std::size_t size() const { return vertices_.size(); }
    std::size_t edge_count() const { return adjacency_.size() / 2; }
    std::size_t ray_count() const { return ray_count_; }
    std::size_t plane_count() const { return size() - 1 - ray_count_; }
    std::int32_t window_steps() const { return window_steps_; }

    const Vertex& vertex(VertexIndex v) const { return vertices_[v]; }
    std::optional<VertexIndex> index_of(const Vertex& v) const;
    VertexIndex at(const Vertex& v) const;  // throws ContractViolation if absent

    std::span<const VertexIndex> neighbors(VertexIndex v) const {
        return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
    }
    std::size_t neighbor_offset(VertexIndex v) const { return offsets_[v]; }
    std::span<const VertexIndex> reverse_slots() const { return reverse_slot_; }

    /// v_k(x). In absorbing mode this counts neighbours outside the window too.
    std::uint32_t degree(VertexIndex v) const { return degree_[v]; }
    /// Neighbours of v in the infinite graph that fall outside the window.
    std::uint32_t exits(VertexIndex v) const { return degree_[v] - (offsets_[v + 1] - offsets_[v]); }

    /// m_k(x) = mass_units(x) / 2^(2k+2), exactly.
    std::int64_t mass_units(VertexIndex v) const;
    int mass_shift() const { return 2 * params_.k + 2; }
    double mass(VertexIndex v) const { return mass_[v]; }
    std::span<const double> masses() const { return mass_; }

    /// Within two lattice steps (max-norm) of the window edge; truncation
    /// changes the local graph structure there.
    bool in_boundary_margin(VertexIndex v) const;

    Point embed(VertexIndex v) const;
    /// |x|_rho: distance to the darning point through the state space.
    double rho_norm(VertexIndex v) const { return rho_norm_[v]; }

    bool adjacent_to_darning(VertexIndex v) const;

    /// Breadth-first hop counts from src; unreachable vertices get UINT32_MAX.
    std::vector<std::uint32_t> hop_distances(VertexIndex src) const;

    std::vector<std::string> warnings() const;

    friend VdLattice build_lattice(const LatticeParams& params);

private:
    LatticeParams params_;
    double mesh_ = 0.0;
    double eps_ = 0.0;
    std::int32_t window_steps_ = 0;
    std::size_t ray_count_ = 0;
    std::vector<Vertex> vertices_;
    std::vector<std::size_t> offsets_;
    std::vector<VertexIndex> adjacency_;
    std::vector<VertexIndex> reverse_slot_;  // slot of u inside neighbors(adjacency_[s])
    std::vector<std::uint32_t> degree_;
    std::vector<double> mass_;
    std::vector<double> rho_norm_;
    std::vector<std::int32_t> plane_lookup_;  // (2W+1)^2 grid, -1 when absent
};

/// Builds the induced subgraph of G^k on the window. All disc and segment
/// decisions use exact integer arithmetic.
VdLattice build_lattice(const LatticeParams& params);

/// Closed lattice point (i, j) at scale 2^-k lies in the closed disc B_eps.
bool in_closed_disc(std::int64_t i, std::int64_t j, int k, const Dyadic& eps);

/// The closed segment between 2^-k-adjacent lattice points a, b stays at
/// Euclidean distance > eps from the origin.
bool segment_clears_disc(const Vertex& a, const Vertex& b, int k, const Dyadic& eps);

/// Shortest-path length in G^k times the mesh.
double graph_distance(const VdLattice& lat, VertexIndex x, VertexIndex y);

/// Geodesic metric rho on E.
double geodesic_distance(const Point& p, const Point& q, double eps);

/// |p|_rho = rho(p, a*).
double rho_norm(const Point& p, double eps);

Point embed(const Vertex& v, int k);

struct InvariantCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

/// Structural invariants of a built lattice: symmetric adjacency, handshake
/// count, interior degrees, single edge at the ray origin, the darning mass
/// and degree bounds in the theory regime, and d_k >= rho (all pairs when the
/// lattice has at most `metric_pairs_limit` vertices, else from a* only).
std::vector<InvariantCheck> check_lattice_invariants(const VdLattice& lat, std::size_t metric_pairs_limit = 2000);

}  // namespace vdwalk
