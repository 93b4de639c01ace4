#pragma once

// Numerical checks of the inequality chain behind the heat-kernel bound:
// isoperimetry of the two weighted parts, the Nash-type inequality, the
// Davies weight energy and the two-regime Gaussian/exponential bound.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vdwalk/kernel.hpp"
#include "vdwalk/lattice.hpp"

namespace vdwalk {

/// Plane: D^k_eps plus a*, edge weight 2^-2k/4, exponent alpha = 2.
/// Ray:   2^-k Z_+ plus a*, edge weight 2^-k/2,  exponent alpha = 1.
enum class WeightedPart : std::uint8_t { Plane, Ray };

std::string to_string(WeightedPart part);
WeightedPart parse_weighted_part(std::string_view text);

bool in_part(const VdLattice& lat, VertexIndex v, WeightedPart part);

/// Edge weight mu_xy of the part (0 for edges outside it).
double part_edge_weight(const VdLattice& lat, WeightedPart part);

/// nu(x) = sum over part-neighbours of mu_xy.
double part_measure(const VdLattice& lat, VertexIndex v, WeightedPart part);

struct IsoReport {
    WeightedPart part = WeightedPart::Plane;
    std::vector<VertexIndex> set;
    std::uint64_t boundary_edges = 0;
    double boundary_weight = 0.0;  // mu(A, A^c)
    double mass = 0.0;             // nu(A)
    double normalized_constant = 0.0;
    bool touches_margin = false;
};

IsoReport iso_ratio(const VdLattice& lat, std::span<const VertexIndex> set, WeightedPart part);

struct IsoScanOptions {
    int exhaustive_max_size = 4;
    std::size_t n_random = 1000;
    std::size_t random_max_size = 1000;
    std::uint64_t seed = 1;
};

struct IsoScanReport {
    WeightedPart part = WeightedPart::Plane;
    double minimum = 0.0;
    IsoReport witness;
    double exhaustive_minimum = 0.0;
    double random_minimum = 0.0;
    std::uint64_t sets_enumerated = 0;
    std::uint64_t sets_random = 0;
    std::vector<std::string> notes;
};

/// Visits every connected vertex set of size <= max_size inside `allowed`
/// exactly once (ESU enumeration). The callback sees the set in no fixed order.
template <typename Visit>
void for_each_connected_subset(const VdLattice& lat, WeightedPart part, const std::vector<std::uint8_t>& allowed,
                               int max_size, Visit&& visit);

IsoScanReport iso_scan(const VdLattice& lat, WeightedPart part, const IsoScanOptions& opts = {});

struct NashPartReport {
    double energy = 0.0;  // (1/2) sum_x sum_y (f(x)-f(y))^2 mu_xy
    double l1 = 0.0;
    double l2 = 0.0;
    double implied_constant = 0.0;     // energy * l1^(4/alpha) / l2^(2+4/alpha)
    double normalized_constant = 0.0;  // implied_constant / 2^-2k
};

struct NashReport {
    NashPartReport plane;
    NashPartReport ray;
    double energy = 0.0;  // E^k(f, f)
    double l1 = 0.0;      // ||f||_{L^1(m_k)}
    double l2 = 0.0;      // ||f||_{L^2(m_k)}
    /// (E^{1/3} ||f||_1^{4/3} + E^{1/2} ||f||_1) / ||f||_2^2
    double combined_constant = 0.0;
    bool touches_margin = false;
};

NashReport nash_check(const VdLattice& lat, std::span<const double> f);

struct DaviesReport {
    double alpha = 0.0;
    double cap = 0.0;  // n; +inf means uncapped
    /// Exact Radon-Nikodym sup-norms of e^{-2psi} Gamma(e^psi) and e^{2psi} Gamma(e^-psi).
    double rn_plus = 0.0;
    double rn_minus = 0.0;
    double gamma = 0.0;  // sqrt(max(rn_plus, rn_minus))
    VertexIndex argmax = 0;
    double bound = 0.0;  // sqrt(2) alpha
    bool holds = false;
    /// The three sup terms of the proof's upper estimate, for comparison.
    double display_plane = 0.0;
    double display_ray = 0.0;
    double display_darning = 0.0;
};

/// psi = alpha * min(d_k(., a*), n). Throws ParameterError unless
/// 0 < alpha <= 2^{k-1} and n >= 1.
DaviesReport davies_weight_check(const VdLattice& lat, double alpha, double cap);

struct HkWitness {
    double ratio = 0.0;  // max ratio (log-space), 0 when no cell was checked
    VertexIndex x = 0;
    VertexIndex y = 0;
    double distance = 0.0;
};

struct HkTimeReport {
    double t = 0.0;
    HkWitness near;
    HkWitness far;
    std::uint64_t cells_near = 0;
    std::uint64_t cells_far = 0;
    std::uint64_t cells_skipped = 0;
    /// sup p_k(t, x, y) / (1/t + 1/sqrt t) over checked cells.
    double diagonal_constant = 0.0;
    double truncation_error = 0.0;
};

struct HkReport {
    std::vector<HkTimeReport> times;
    std::vector<VertexIndex> sources;
    double tol = 0.0;
    std::vector<std::string> notes;
};

struct HkOptions {
    /// Empty: every vertex is a source.
    std::vector<VertexIndex> sources;
    double density_floor = 1e-12;
    UniformizationOptions uniformization;
};

/// Deterministic source set for pairwise scans: a*, fixed physical points on
/// the ray and in the plane, and the plane vertex next to the disc on the
/// positive axis. Points missing from the lattice are dropped.
std::vector<VertexIndex> default_hk_sources(const VdLattice& lat);

HkReport hk_bound_constant(const VdLattice& lat, std::span<const double> times, double tol,
                           const HkOptions& opts = {});

// ---------------------------------------------------------------------------

namespace detail {

template <typename Visit>
void esu_extend(const VdLattice& lat, WeightedPart part, const std::vector<std::uint8_t>& allowed, int max_size,
                VertexIndex root, std::vector<VertexIndex>& sub, std::vector<VertexIndex> ext,
                std::vector<std::uint32_t>& mark, Visit& visit) {
    visit(std::span<const VertexIndex>(sub));
    if (static_cast<int>(sub.size()) == max_size) return;
    while (!ext.empty()) {
        const VertexIndex w = ext.back();
        ext.pop_back();
        // New extension: ext plus exclusive neighbours of w with index > root.
        std::vector<VertexIndex> next = ext;
        std::vector<VertexIndex> marked;
        for (VertexIndex u : lat.neighbors(w)) {
            if (u <= root || !allowed[u] || !in_part(lat, u, part) || mark[u]) continue;
            bool adjacent_to_sub = false;
            for (VertexIndex s : sub)
                for (VertexIndex z : lat.neighbors(s))
                    if (z == u) adjacent_to_sub = true;
            if (adjacent_to_sub) continue;
            mark[u] = 1;
            marked.push_back(u);
            next.push_back(u);
        }
        for (VertexIndex u : marked) mark[u] = 0;
        sub.push_back(w);
        mark[w] = 1;
        esu_extend(lat, part, allowed, max_size, root, sub, std::move(next), mark, visit);
        mark[w] = 0;
        sub.pop_back();
    }
}

}  // namespace detail

template <typename Visit>
void for_each_connected_subset(const VdLattice& lat, WeightedPart part, const std::vector<std::uint8_t>& allowed,
                               int max_size, Visit&& visit) {
    if (max_size < 1) return;
    std::vector<std::uint32_t> mark(lat.size(), 0);
    std::vector<VertexIndex> sub;
    for (VertexIndex v = 0; v < lat.size(); ++v) {
        if (!allowed[v] || !in_part(lat, v, part)) continue;
        std::vector<VertexIndex> ext;
        for (VertexIndex u : lat.neighbors(v))
            if (u > v && allowed[u] && in_part(lat, u, part)) ext.push_back(u);
        sub.assign(1, v);
        mark[v] = 1;
        detail::esu_extend(lat, part, allowed, max_size, v, sub, std::move(ext), mark, visit);
        mark[v] = 0;
    }
}

}  // namespace vdwalk
