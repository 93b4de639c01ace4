#include "vdwalk/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "vdwalk/errors.hpp"

namespace vdwalk {

std::string to_string(const Vertex& v) {
    switch (v.kind) {
        case VertexKind::Darning: return "darning";
        case VertexKind::Ray: return "ray(" + std::to_string(v.i) + ")";
        case VertexKind::Plane: return "plane(" + std::to_string(v.i) + "," + std::to_string(v.j) + ")";
    }
    return "?";
}

std::string to_string(BoundaryMode mode) { return mode == BoundaryMode::Induced ? "induced" : "absorbing"; }

BoundaryMode parse_boundary_mode(std::string_view text) {
    if (text == "induced") return BoundaryMode::Induced;
    if (text == "absorbing") return BoundaryMode::Absorbing;
    throw ParameterError("boundary mode must be 'induced' or 'absorbing', got '" + std::string(text) + "'");
}

void LatticeParams::validate() const {
    if (k < 1 || k > 20) throw ParameterError("k must lie in [1, 20], got " + std::to_string(k));
    if (!(Dyadic(0, 0) < epsilon) || !(epsilon < Dyadic(1, 1)))
        throw ParameterError("epsilon must satisfy 0 < epsilon < 1/2, got " + epsilon.str());
    if (!(epsilon * 4 < window_radius))
        throw ParameterError("window_radius must exceed 4*epsilon, got " + window_radius.str());
    if (window_radius.floor_scaled(k) > (1 << 14))
        throw ParameterError("window_radius * 2^k exceeds 16384 lattice steps");
}

bool LatticeParams::outside_theory_regime() const {
    // eps >= 1/64, or 2^-k >= eps/4  <=>  eps * 2^k <= 4
    return !(epsilon < Dyadic(1, 6)) || compare(epsilon, Dyadic(4, k)) <= 0;
}

double LatticeParams::mesh() const { return std::ldexp(1.0, -k); }

bool in_closed_disc(std::int64_t i, std::int64_t j, int k, const Dyadic& eps) {
    // (i^2 + j^2) / 2^(2k) <= p^2 / 2^(2q), cross-multiplied to a common scale.
    const int s = std::max(k, eps.shift());
    const __int128 a = static_cast<__int128>(i) << (s - k);
    const __int128 b = static_cast<__int128>(j) << (s - k);
    const __int128 p = static_cast<__int128>(eps.numerator()) << (s - eps.shift());
    return a * a + b * b <= p * p;
}

bool segment_clears_disc(const Vertex& a, const Vertex& b, int k, const Dyadic& eps) {
    if (!a.is_plane() || !b.is_plane()) throw ContractViolation("segment_clears_disc needs two plane vertices");
    const std::int64_t di = std::int64_t{b.i} - a.i;
    const std::int64_t dj = std::int64_t{b.j} - a.j;
    if (std::abs(di) + std::abs(dj) != 1) throw ContractViolation("segment_clears_disc needs 2^-k-adjacent vertices");
    // Closest point of an axis-aligned segment to the origin: clamp the free
    // coordinate to the segment's range, keep the fixed one.
    std::int64_t ci = a.i, cj = a.j;
    if (di != 0) {
        const std::int64_t lo = std::min(a.i, b.i), hi = std::max(a.i, b.i);
        ci = std::clamp<std::int64_t>(0, lo, hi);
    } else {
        const std::int64_t lo = std::min(a.j, b.j), hi = std::max(a.j, b.j);
        cj = std::clamp<std::int64_t>(0, lo, hi);
    }
    // Closest point is a lattice point since 0 is an integer coordinate.
    return !in_closed_disc(ci, cj, k, eps);
}

Point embed(const Vertex& v, int k) {
    const double h = std::ldexp(1.0, -k);
    switch (v.kind) {
        case VertexKind::Darning: return Point::darning();
        case VertexKind::Ray: return Point::ray(v.i * h);
        case VertexKind::Plane: return Point::plane(v.i * h, v.j * h);
    }
    return Point::darning();
}

double rho_norm(const Point& p, double eps) {
    switch (p.kind) {
        case VertexKind::Darning: return 0.0;
        case VertexKind::Ray:
            if (p.x < 0.0) throw DomainError("ray coordinate must be nonnegative");
            return p.x;
        case VertexKind::Plane: {
            const double r = std::hypot(p.x, p.y);
            if (r < eps) throw DomainError("plane point lies inside the open disc");
            return r - eps;
        }
    }
    return 0.0;
}

double geodesic_distance(const Point& p, const Point& q, double eps) {
    const double np = rho_norm(p, eps);
    const double nq = rho_norm(q, eps);
    if (p.kind == VertexKind::Plane && q.kind == VertexKind::Plane)
        return std::min(std::hypot(p.x - q.x, p.y - q.y), np + nq);
    if (p.kind == VertexKind::Ray && q.kind == VertexKind::Ray) return std::abs(p.x - q.x);
    // Any path between different parts, or to a*, passes through a*.
    return np + nq;
}

VdLattice build_lattice(const LatticeParams& params) {
    params.validate();
    VdLattice lat;
    lat.params_ = params;
    const int k = params.k;
    lat.mesh_ = params.mesh();
    lat.eps_ = params.epsilon.to_double();
    const std::int32_t W = static_cast<std::int32_t>(params.window_radius.floor_scaled(k));
    lat.window_steps_ = W;
    lat.ray_count_ = static_cast<std::size_t>(W);

    lat.vertices_.push_back(Vertex::darning());
    for (std::int32_t n = 1; n <= W; ++n) lat.vertices_.push_back(Vertex::ray(n));

    const std::int32_t side = 2 * W + 1;
    lat.plane_lookup_.assign(static_cast<std::size_t>(side) * side, -1);
    for (std::int32_t j = -W; j <= W; ++j) {
        for (std::int32_t i = -W; i <= W; ++i) {
            if (in_closed_disc(i, j, k, params.epsilon)) continue;
            lat.plane_lookup_[static_cast<std::size_t>(j + W) * side + (i + W)] =
                static_cast<std::int32_t>(lat.vertices_.size());
            lat.vertices_.push_back(Vertex::plane(i, j));
        }
    }
    if (lat.plane_count() == 0)
        throw DegenerateGeometryError("no plane vertex survives outside the disc inside the window");

    const std::size_t n = lat.vertices_.size();
    std::vector<std::vector<VertexIndex>> adj(n);
    std::vector<std::uint32_t> exits(n, 0);

    auto link = [&](VertexIndex a, VertexIndex b) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    };

    // Ray: a* -- 1 -- 2 -- ... -- W, with W+1 outside the window.
    if (W >= 1) link(VdLattice::kDarning, 1);
    for (std::int32_t r = 1; r < W; ++r) link(static_cast<VertexIndex>(r), static_cast<VertexIndex>(r + 1));
    if (W >= 1) exits[static_cast<VertexIndex>(W)] += 1;

    constexpr std::int32_t dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (VertexIndex v = static_cast<VertexIndex>(1 + W); v < n; ++v) {
        const Vertex& x = lat.vertices_[v];
        bool darning_linked = false;
        for (const auto& d : dirs) {
            const std::int32_t ni = x.i + d[0], nj = x.j + d[1];
            if (in_closed_disc(ni, nj, k, params.epsilon)) {
                // Several disc neighbours still produce a single edge to a*.
                if (!darning_linked) {
                    link(VdLattice::kDarning, v);
                    darning_linked = true;
                }
                continue;
            }
            if (std::max(std::abs(ni), std::abs(nj)) > W) {
                exits[v] += 1;
                continue;
            }
            const VertexIndex u = static_cast<VertexIndex>(
                lat.plane_lookup_[static_cast<std::size_t>(nj + W) * side + (ni + W)]);
            if (u < v) continue;  // each plane edge is linked once, from its lower index
            if (segment_clears_disc(x, Vertex::plane(ni, nj), k, params.epsilon)) link(v, u);
        }
    }

    lat.offsets_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        std::sort(adj[v].begin(), adj[v].end());
        lat.offsets_[v + 1] = lat.offsets_[v] + adj[v].size();
    }
    lat.adjacency_.reserve(lat.offsets_[n]);
    for (auto& row : adj) lat.adjacency_.insert(lat.adjacency_.end(), row.begin(), row.end());

    lat.reverse_slot_.resize(lat.adjacency_.size());
    for (VertexIndex u = 0; u < n; ++u) {
        for (std::size_t s = lat.offsets_[u]; s < lat.offsets_[u + 1]; ++s) {
            const VertexIndex v = lat.adjacency_[s];
            auto row = lat.neighbors(v);
            const auto it = std::lower_bound(row.begin(), row.end(), u);
            lat.reverse_slot_[s] = static_cast<VertexIndex>(lat.offsets_[v] + (it - row.begin()));
        }
    }

    lat.degree_.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto in_window = static_cast<std::uint32_t>(lat.offsets_[v + 1] - lat.offsets_[v]);
        lat.degree_[v] = in_window + (params.boundary == BoundaryMode::Absorbing ? exits[v] : 0);
    }

    lat.mass_.resize(n);
    lat.rho_norm_.resize(n);
    for (VertexIndex v = 0; v < n; ++v) {
        lat.mass_[v] = std::ldexp(static_cast<double>(lat.mass_units(v)), -lat.mass_shift());
        lat.rho_norm_[v] = rho_norm(lat.embed(v), lat.eps_);
    }

    const auto hops = lat.hop_distances(VdLattice::kDarning);
    if (std::any_of(hops.begin(), hops.end(), [](std::uint32_t h) { return h == UINT32_MAX; }))
        throw InternalError("lattice graph is not connected");
    return lat;
}

std::optional<VertexIndex> VdLattice::index_of(const Vertex& v) const {
    switch (v.kind) {
        case VertexKind::Darning: return kDarning;
        case VertexKind::Ray:
            if (v.i >= 1 && static_cast<std::size_t>(v.i) <= ray_count_) return static_cast<VertexIndex>(v.i);
            return std::nullopt;
        case VertexKind::Plane: {
            const std::int32_t W = window_steps_;
            if (std::max(std::abs(v.i), std::abs(v.j)) > W) return std::nullopt;
            const std::int32_t id =
                plane_lookup_[static_cast<std::size_t>(v.j + W) * (2 * W + 1) + (v.i + W)];
            if (id < 0) return std::nullopt;
            return static_cast<VertexIndex>(id);
        }
    }
    return std::nullopt;
}

VertexIndex VdLattice::at(const Vertex& v) const {
    if (auto id = index_of(v)) return *id;
    throw ContractViolation("vertex " + to_string(v) + " is not in the lattice");
}

std::int64_t VdLattice::mass_units(VertexIndex v) const {
    const std::int64_t deg = degree_[v];
    const std::int64_t ray_unit = std::int64_t{1} << (params_.k + 1);  // 2^-k/2 in units of 2^-(2k+2)
    switch (vertices_[v].kind) {
        case VertexKind::Plane: return deg;
        case VertexKind::Ray: return deg * ray_unit;
        case VertexKind::Darning: return ray_unit + deg - 1;
    }
    return 0;
}

bool VdLattice::in_boundary_margin(VertexIndex v) const {
    const Vertex& x = vertices_[v];
    switch (x.kind) {
        case VertexKind::Darning: return false;
        case VertexKind::Ray: return window_steps_ - x.i < 2;
        case VertexKind::Plane: return window_steps_ - std::max(std::abs(x.i), std::abs(x.j)) < 2;
    }
    return false;
}

Point VdLattice::embed(VertexIndex v) const { return vdwalk::embed(vertices_[v], params_.k); }

bool VdLattice::adjacent_to_darning(VertexIndex v) const {
    const auto row = neighbors(v);
    return !row.empty() && row.front() == kDarning;
}

std::vector<std::uint32_t> VdLattice::hop_distances(VertexIndex src) const {
    std::vector<std::uint32_t> dist(size(), UINT32_MAX);
    std::vector<VertexIndex> queue;
    queue.reserve(size());
    dist[src] = 0;
    queue.push_back(src);
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const VertexIndex u = queue[head];
        for (VertexIndex w : neighbors(u)) {
            if (dist[w] != UINT32_MAX) continue;
            dist[w] = dist[u] + 1;
            queue.push_back(w);
        }
    }
    return dist;
}

std::vector<std::string> VdLattice::warnings() const {
    std::vector<std::string> out;
    if (params_.outside_theory_regime()) out.emplace_back("outside_theory_regime");
    return out;
}

double graph_distance(const VdLattice& lat, VertexIndex x, VertexIndex y) {
    if (x >= lat.size() || y >= lat.size()) throw ContractViolation("graph_distance: vertex index out of range");
    if (x == y) return 0.0;
    const auto dist = lat.hop_distances(x);
    if (dist[y] == UINT32_MAX) throw InternalError("graph_distance: vertices in different components");
    return dist[y] * lat.mesh();
}

}  // namespace vdwalk

namespace vdwalk {

std::vector<InvariantCheck> check_lattice_invariants(const VdLattice& lat, std::size_t metric_pairs_limit) {
    std::vector<InvariantCheck> out;
    const int k = lat.k();
    const double eps = lat.epsilon();
    const double h = lat.mesh();

    InvariantCheck sym{"adjacency_symmetric", true, ""};
    std::size_t endpoint_count = 0;
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        const auto row = lat.neighbors(x);
        endpoint_count += row.size();
        for (VertexIndex y : row) {
            const auto back = lat.neighbors(y);
            if (!std::binary_search(back.begin(), back.end(), x)) {
                sym.passed = false;
                sym.detail = to_string(lat.vertex(x)) + " -> " + to_string(lat.vertex(y)) + " has no reverse edge";
                break;
            }
        }
        if (!sym.passed) break;
    }
    out.push_back(sym);
    out.push_back({"handshake", endpoint_count == 2 * lat.edge_count(),
                   std::to_string(endpoint_count) + " endpoints, " + std::to_string(lat.edge_count()) + " edges"});

    InvariantCheck interior{"interior_degree", true, ""};
    for (VertexIndex v = 1; v < lat.size(); ++v) {
        const Vertex& x = lat.vertex(v);
        const Point p = lat.embed(v);
        std::uint32_t expected = 0;
        if (x.is_ray()) {
            if (lat.window_steps() - x.i < 2) continue;
            expected = 2;
        } else {
            if (lat.window_steps() - std::max(std::abs(x.i), std::abs(x.j)) < 2) continue;
            if (std::hypot(p.x, p.y) <= eps + 2.0 * h) continue;
            expected = 4;
        }
        if (lat.degree(v) != expected) {
            interior.passed = false;
            interior.detail = to_string(x) + " has degree " + std::to_string(lat.degree(v));
            break;
        }
    }
    out.push_back(interior);

    const auto row0 = lat.neighbors(VdLattice::kDarning);
    std::size_t ray_links = 0;
    for (VertexIndex y : row0)
        if (lat.vertex(y).is_ray()) ++ray_links;
    out.push_back({"single_ray_edge_at_darning", ray_links == 1 && lat.vertex(row0.front()) == Vertex::ray(1),
                   std::to_string(ray_links) + " ray neighbours"});

    if (!lat.params().outside_theory_regime()) {
        // m_k(a*) < 2^-k  <=>  mass_units < 2^(k+2)
        const std::int64_t units = lat.mass_units(VdLattice::kDarning);
        out.push_back({"darning_mass_bound", units < (std::int64_t{1} << (k + 2)),
                       "m_k(a*) = " + std::to_string(units) + "/2^" + std::to_string(lat.mass_shift())});
        // v_k(a*) <= 56 eps 2^k + 28, compared exactly on the dyadic eps.
        const Dyadic& e = lat.params().epsilon;
        const int s = std::max(k, e.shift());
        const __int128 lhs = static_cast<__int128>(lat.degree(VdLattice::kDarning)) << s;
        const __int128 rhs = (static_cast<__int128>(56) * e.numerator() << (s - e.shift() + k)) +
                             (static_cast<__int128>(28) << s);
        out.push_back({"darning_degree_bound", lhs <= rhs,
                       "v_k(a*) = " + std::to_string(lat.degree(VdLattice::kDarning))});
    }

    InvariantCheck metric{"graph_metric_dominates_rho", true, ""};
    const bool all_pairs = lat.size() <= metric_pairs_limit;
    metric.detail = all_pairs ? "all pairs" : "pairs through a*";
    const std::size_t n_src = all_pairs ? lat.size() : 1;
    for (VertexIndex x = 0; x < n_src && metric.passed; ++x) {
        const auto hops = lat.hop_distances(x);
        const Point px = lat.embed(x);
        for (VertexIndex y = 0; y < lat.size(); ++y) {
            const double rho = geodesic_distance(px, lat.embed(y), eps);
            if (hops[y] * h < rho * (1.0 - 1e-12) - 1e-15) {
                metric.passed = false;
                metric.detail = to_string(lat.vertex(x)) + " to " + to_string(lat.vertex(y));
                break;
            }
        }
    }
    out.push_back(metric);
    return out;
}

}  // namespace vdwalk
