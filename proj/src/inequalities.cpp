#include "vdwalk/inequalities.hpp"

#include <cmath>
#include <limits>

#include "vdwalk/errors.hpp"
#include "vdwalk/parallel.hpp"
#include "vdwalk/rng.hpp"

namespace vdwalk {

std::string to_string(WeightedPart part) { return part == WeightedPart::Plane ? "plane" : "ray"; }

WeightedPart parse_weighted_part(std::string_view text) {
    if (text == "plane") return WeightedPart::Plane;
    if (text == "ray") return WeightedPart::Ray;
    throw ParameterError("part must be 'plane' or 'ray', got '" + std::string(text) + "'");
}

bool in_part(const VdLattice& lat, VertexIndex v, WeightedPart part) {
    const Vertex& x = lat.vertex(v);
    if (x.is_darning()) return true;
    return part == WeightedPart::Plane ? x.is_plane() : x.is_ray();
}

double part_edge_weight(const VdLattice& lat, WeightedPart part) {
    return part == WeightedPart::Plane ? std::ldexp(0.25, -2 * lat.k()) : std::ldexp(0.5, -lat.k());
}

namespace {

std::uint32_t part_degree(const VdLattice& lat, VertexIndex v, WeightedPart part) {
    std::uint32_t d = 0;
    for (VertexIndex y : lat.neighbors(v)) d += in_part(lat, y, part);
    return d;
}

bool adjacent(const VdLattice& lat, VertexIndex a, VertexIndex b) {
    const auto row = lat.neighbors(a);
    return std::binary_search(row.begin(), row.end(), b);
}

double alpha_of(WeightedPart part) { return part == WeightedPart::Plane ? 2.0 : 1.0; }

double normalized(const VdLattice& lat, WeightedPart part, double boundary_weight, double mass) {
    const double scale = std::ldexp(1.0, -lat.k());
    return boundary_weight / (scale * std::pow(mass, 1.0 - 1.0 / alpha_of(part)));
}

struct SetScore {
    std::uint64_t boundary_edges = 0;
    std::uint64_t degree_sum = 0;
};

}  // namespace

double part_measure(const VdLattice& lat, VertexIndex v, WeightedPart part) {
    return part_edge_weight(lat, part) * part_degree(lat, v, part);
}

IsoReport iso_ratio(const VdLattice& lat, std::span<const VertexIndex> set, WeightedPart part) {
    if (set.empty()) throw ParameterError("iso_ratio: set A must be nonempty");
    IsoReport r;
    r.part = part;
    r.set.assign(set.begin(), set.end());
    std::sort(r.set.begin(), r.set.end());
    r.set.erase(std::unique(r.set.begin(), r.set.end()), r.set.end());
    std::uint64_t degree_sum = 0;
    for (VertexIndex x : r.set) {
        if (x >= lat.size()) throw ContractViolation("iso_ratio: vertex index out of range");
        if (!in_part(lat, x, part)) throw ContractViolation("iso_ratio: vertex outside the chosen part");
        r.touches_margin = r.touches_margin || lat.in_boundary_margin(x);
        for (VertexIndex y : lat.neighbors(x)) {
            if (!in_part(lat, y, part)) continue;
            ++degree_sum;
            if (!std::binary_search(r.set.begin(), r.set.end(), y)) ++r.boundary_edges;
        }
    }
    const double w = part_edge_weight(lat, part);
    r.boundary_weight = w * static_cast<double>(r.boundary_edges);
    r.mass = w * static_cast<double>(degree_sum);
    r.normalized_constant = normalized(lat, part, r.boundary_weight, r.mass);
    return r;
}

IsoScanReport iso_scan(const VdLattice& lat, WeightedPart part, const IsoScanOptions& opts) {
    if (opts.exhaustive_max_size < 1 || opts.exhaustive_max_size > 8)
        throw ParameterError("exhaustive_max_size must lie in [1, 8]");
    if (opts.random_max_size < 1 || opts.random_max_size > 1000)
        throw ParameterError("random_max_size must lie in [1, 1000]");

    const std::size_t n = lat.size();
    std::vector<std::uint32_t> pdeg(n);
    std::vector<std::uint8_t> allowed(n);
    std::vector<VertexIndex> pool;
    for (VertexIndex v = 0; v < n; ++v) {
        pdeg[v] = part_degree(lat, v, part);
        allowed[v] = in_part(lat, v, part) && !lat.in_boundary_margin(v);
        if (allowed[v]) pool.push_back(v);
    }
    const double w = part_edge_weight(lat, part);
    auto score = [&](const SetScore& s) {
        return normalized(lat, part, w * static_cast<double>(s.boundary_edges), w * static_cast<double>(s.degree_sum));
    };

    IsoScanReport rep;
    rep.part = part;
    rep.notes.emplace_back("connected sets only; sets touching the window margin are excluded");

    double best = std::numeric_limits<double>::infinity();
    std::vector<VertexIndex> best_set;
    for_each_connected_subset(lat, part, allowed, opts.exhaustive_max_size, [&](std::span<const VertexIndex> sub) {
        SetScore s;
        std::uint64_t internal = 0;
        for (std::size_t a = 0; a < sub.size(); ++a) {
            s.degree_sum += pdeg[sub[a]];
            for (std::size_t b = a + 1; b < sub.size(); ++b) internal += adjacent(lat, sub[a], sub[b]);
        }
        s.boundary_edges = s.degree_sum - 2 * internal;
        ++rep.sets_enumerated;
        const double c = score(s);
        if (c < best) {
            best = c;
            best_set.assign(sub.begin(), sub.end());
        }
    });
    rep.exhaustive_minimum = best;

    std::vector<double> rnd_score(opts.n_random, std::numeric_limits<double>::infinity());
    std::vector<std::vector<VertexIndex>> rnd_sets(opts.n_random);
    if (!pool.empty()) {
        parallel_for(opts.n_random, [&](std::size_t idx) {
            StreamRng rng(opts.seed, idx);
            const std::size_t target = 1 + rng.below(opts.random_max_size);
            std::vector<std::uint8_t> member(n, 0);
            std::vector<VertexIndex> set{pool[rng.below(pool.size())]};
            member[set[0]] = 1;
            std::vector<VertexIndex> frontier;
            for (VertexIndex y : lat.neighbors(set[0]))
                if (allowed[y]) frontier.push_back(y);
            while (set.size() < target && !frontier.empty()) {
                const std::size_t pick = rng.below(frontier.size());
                const VertexIndex v = frontier[pick];
                frontier[pick] = frontier.back();
                frontier.pop_back();
                if (member[v]) continue;
                member[v] = 1;
                set.push_back(v);
                for (VertexIndex y : lat.neighbors(v))
                    if (allowed[y] && !member[y]) frontier.push_back(y);
            }
            SetScore s;
            std::uint64_t internal_oriented = 0;
            for (VertexIndex x : set) {
                s.degree_sum += pdeg[x];
                for (VertexIndex y : lat.neighbors(x)) internal_oriented += member[y];
            }
            s.boundary_edges = s.degree_sum - internal_oriented;
            rnd_score[idx] = score(s);
            rnd_sets[idx] = std::move(set);
        });
    }
    rep.sets_random = pool.empty() ? 0 : opts.n_random;
    rep.random_minimum = std::numeric_limits<double>::infinity();
    std::size_t rnd_best = 0;
    for (std::size_t i = 0; i < rnd_score.size(); ++i) {
        if (rnd_score[i] < rep.random_minimum) {
            rep.random_minimum = rnd_score[i];
            rnd_best = i;
        }
    }
    if (rep.random_minimum < best) {
        best = rep.random_minimum;
        best_set = rnd_sets[rnd_best];
    }
    if (best_set.empty()) throw DegenerateGeometryError("iso_scan: no admissible vertex outside the window margin");
    rep.minimum = best;
    rep.witness = iso_ratio(lat, best_set, part);
    return rep;
}

namespace {

NashPartReport nash_part(const VdLattice& lat, std::span<const double> f, WeightedPart part) {
    NashPartReport r;
    const double w = part_edge_weight(lat, part);
    double sum_sq = 0.0, l1 = 0.0, l2sq = 0.0;
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        if (!in_part(lat, x, part)) continue;
        const double nu = part_measure(lat, x, part);
        l1 += std::abs(f[x]) * nu;
        l2sq += f[x] * f[x] * nu;
        for (VertexIndex y : lat.neighbors(x))
            if (in_part(lat, y, part)) sum_sq += (f[x] - f[y]) * (f[x] - f[y]);
    }
    r.energy = 0.5 * w * sum_sq;
    r.l1 = l1;
    r.l2 = std::sqrt(l2sq);
    const double a = alpha_of(part);
    if (l1 > 0.0) {
        r.implied_constant = r.energy * std::pow(r.l1, 4.0 / a) / std::pow(r.l2, 2.0 + 4.0 / a);
        r.normalized_constant = r.implied_constant / std::ldexp(1.0, -2 * lat.k());
    } else {
        r.implied_constant = std::numeric_limits<double>::quiet_NaN();
        r.normalized_constant = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

}  // namespace

NashReport nash_check(const VdLattice& lat, std::span<const double> f) {
    if (f.size() != lat.size()) throw ContractViolation("nash_check: function length does not match vertex count");
    bool nonzero = false;
    NashReport r;
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        if (f[x] == 0.0) continue;
        if (!std::isfinite(f[x])) throw ParameterError("nash_check: f must be finite");
        nonzero = true;
        r.touches_margin = r.touches_margin || lat.in_boundary_margin(x);
        r.l1 += std::abs(f[x]) * lat.mass(x);
        r.l2 += f[x] * f[x] * lat.mass(x);
    }
    if (!nonzero) throw ParameterError("nash_check: f is identically zero, the ratio is undefined");
    r.l2 = std::sqrt(r.l2);
    r.plane = nash_part(lat, f, WeightedPart::Plane);
    r.ray = nash_part(lat, f, WeightedPart::Ray);
    r.energy = dirichlet_form<double>(lat, f, f);
    r.combined_constant =
        (std::cbrt(r.energy) * std::pow(r.l1, 4.0 / 3.0) + std::sqrt(r.energy) * r.l1) / (r.l2 * r.l2);
    return r;
}

DaviesReport davies_weight_check(const VdLattice& lat, double alpha, double cap) {
    const double alpha_max = std::ldexp(1.0, lat.k() - 1);
    if (!(alpha > 0.0 && alpha <= alpha_max))
        throw ParameterError("alpha must lie in (0, 2^(k-1)] = (0, " + std::to_string(alpha_max) + "]");
    if (!(cap >= 1.0)) throw ParameterError("cap n must be >= 1");

    DaviesReport r;
    r.alpha = alpha;
    r.cap = cap;
    r.bound = std::sqrt(2.0) * alpha;
    const double h = lat.mesh();
    const auto hops = lat.hop_distances(VdLattice::kDarning);
    std::vector<double> psi(lat.size());
    for (VertexIndex v = 0; v < lat.size(); ++v) psi[v] = alpha * std::min(hops[v] * h, cap);

    const double speed = std::ldexp(1.0, 2 * lat.k());
    const double half_speed = 0.5 * speed;
    double best = -1.0;
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        const auto row = lat.neighbors(x);
        const std::size_t base = lat.neighbor_offset(x);
        double plus = 0.0, minus = 0.0, display = 0.0;
        for (std::size_t s = 0; s < row.size(); ++s) {
            const double j = jump_ratio(lat, x, base + s).value();
            const double d = psi[row[s]] - psi[x];
            plus += j * std::pow(std::expm1(d), 2);
            minus += j * std::pow(std::expm1(-d), 2);
            display += std::pow(std::expm1(std::abs(d)), 2);
        }
        plus *= half_speed;
        minus *= half_speed;
        r.rn_plus = std::max(r.rn_plus, plus);
        r.rn_minus = std::max(r.rn_minus, minus);
        if (std::max(plus, minus) > best) {
            best = std::max(plus, minus);
            r.argmax = x;
        }
        const Vertex& vx = lat.vertex(x);
        if (vx.is_plane()) r.display_plane = std::max(r.display_plane, std::sqrt(half_speed * display));
        if (vx.is_ray()) r.display_ray = std::max(r.display_ray, std::sqrt(half_speed * display));
        if (vx.is_darning()) {
            double plane_sum = 0.0, ray_sum = 0.0;
            for (VertexIndex y : row) {
                const double e = std::pow(std::expm1(psi[y]), 2);
                (lat.vertex(y).is_ray() ? ray_sum : plane_sum) += e;
            }
            r.display_darning =
                std::sqrt(std::ldexp(plane_sum, lat.k()) / 16.0 + std::ldexp(ray_sum, 2 * lat.k()) / 4.0);
        }
    }
    r.gamma = std::sqrt(std::max(r.rn_plus, r.rn_minus));
    r.holds = r.gamma <= r.bound;
    return r;
}

std::vector<VertexIndex> default_hk_sources(const VdLattice& lat) {
    std::vector<VertexIndex> out{VdLattice::kDarning};
    const int k = lat.k();
    auto add = [&](const Vertex& v) {
        const auto id = lat.index_of(v);
        if (!id || lat.in_boundary_margin(*id)) return;
        if (std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
    };
    // Physical points given in units of 1/32, so they are lattice points for k >= 5.
    auto units = [&](int u) { return k >= 5 ? u << (k - 5) : u >> (5 - k); };
    for (int s : {1, 4, 8, 12}) add(Vertex::ray(units(s)));
    const std::pair<int, int> plane_pts[] = {{6, 0}, {8, 8}, {0, -12}, {-12, 6}, {-8, -8}, {16, 4}, {4, 16}};
    for (auto [a, b] : plane_pts) add(Vertex::plane(units(a), units(b)));
    const auto disc_steps = static_cast<std::int32_t>(lat.params().epsilon.floor_scaled(k));
    add(Vertex::plane(disc_steps + 1, 0));
    add(Vertex::plane(0, -(disc_steps + 1)));
    return out;
}

HkReport hk_bound_constant(const VdLattice& lat, std::span<const double> times, double tol, const HkOptions& opts) {
    for (double t : times)
        if (!(t > 0.0)) throw ParameterError("hk_bound_constant: times must be > 0");
    HkReport rep;
    rep.tol = tol;
    if (opts.sources.empty()) {
        rep.sources.resize(lat.size());
        for (VertexIndex v = 0; v < lat.size(); ++v) rep.sources[v] = v;
    } else {
        rep.sources = opts.sources;
    }
    const double floor = std::max(opts.density_floor, 0.0);
    const double scale = std::ldexp(1.0, lat.k());

    struct Partial {
        std::vector<HkTimeReport> per_time;
    };
    // Budget and tolerance errors must surface before the parallel section.
    {
        const double speed = std::ldexp(1.0, 2 * lat.k());
        for (double t : times)
            if (speed * t > opts.uniformization.budget)
                throw ResourceError("lambda_k * t exceeds the uniformization budget");
        if (!(tol > 0.0 && tol <= 1e-3)) throw ParameterError("tol must lie in (0, 1e-3]");
    }
    std::vector<Partial> parts(rep.sources.size());
    parallel_for(rep.sources.size(), [&](std::size_t si) {
        const VertexIndex x = rep.sources[si];
        const auto dists = transition_distributions(lat, x, times, tol, opts.uniformization);
        const auto hops = lat.hop_distances(x);
        Partial& out = parts[si];
        out.per_time.resize(times.size());
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const double t = times[ti];
            HkTimeReport& tr = out.per_time[ti];
            tr.t = t;
            tr.truncation_error = dists[ti].truncation_error;
            tr.near.ratio = tr.far.ratio = -std::numeric_limits<double>::infinity();
            const double log_pref = std::log(std::max(1.0 / t, 1.0 / std::sqrt(t)));
            const double diag_pref = 1.0 / t + 1.0 / std::sqrt(t);
            for (VertexIndex y = 0; y < lat.size(); ++y) {
                const double p = dists[ti].probs[y];
                const double dens = p / lat.mass(y);
                if (p < tol || dens < floor) {
                    ++tr.cells_skipped;
                    continue;
                }
                const double d = hops[y] * lat.mesh();
                const bool near = d <= 16.0 * scale * t;
                const double log_ratio =
                    std::log(dens) - log_pref + (near ? d * d / (32.0 * t) : 0.5 * scale * d);
                HkWitness& wit = near ? tr.near : tr.far;
                (near ? tr.cells_near : tr.cells_far) += 1;
                if (log_ratio > wit.ratio) wit = {log_ratio, x, y, d};
                tr.diagonal_constant = std::max(tr.diagonal_constant, dens / diag_pref);
            }
        }
    }, 1);

    rep.times.resize(times.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        HkTimeReport& agg = rep.times[ti];
        agg.t = times[ti];
        agg.near.ratio = agg.far.ratio = -std::numeric_limits<double>::infinity();
        for (const auto& part : parts) {
            const HkTimeReport& tr = part.per_time[ti];
            if (tr.near.ratio > agg.near.ratio) agg.near = tr.near;
            if (tr.far.ratio > agg.far.ratio) agg.far = tr.far;
            agg.cells_near += tr.cells_near;
            agg.cells_far += tr.cells_far;
            agg.cells_skipped += tr.cells_skipped;
            agg.diagonal_constant = std::max(agg.diagonal_constant, tr.diagonal_constant);
            agg.truncation_error = std::max(agg.truncation_error, tr.truncation_error);
        }
        for (HkWitness* w : {&agg.near, &agg.far}) w->ratio = std::isfinite(w->ratio) ? std::exp(w->ratio) : 0.0;
    }
    if (lat.params().boundary == BoundaryMode::Induced)
        rep.notes.emplace_back("induced boundary: densities near the window edge include reflection effects");
    return rep;
}

}  // namespace vdwalk
