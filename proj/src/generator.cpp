#include "vdwalk/generator.hpp"

#include <algorithm>
#include <cmath>

#include "vdwalk/errors.hpp"
#include "vdwalk/parallel.hpp"

namespace vdwalk {

Jet1 smootherstep(double u) {
    if (u <= 0.0) return {0.0, 0.0, 0.0};
    if (u >= 1.0) return {1.0, 0.0, 0.0};
    const double w = 1.0 - u;
    const double u2 = u * u;
    return {u2 * u2 * (35.0 - 84.0 * u + 70.0 * u2 - 20.0 * u2 * u), 140.0 * u2 * u * w * w * w,
            420.0 * u2 * w * w * (1.0 - 2.0 * u)};
}

std::string to_string(ProfileKind kind) {
    switch (kind) {
        case ProfileKind::Bump: return "bump";
        case ProfileKind::QuadraticWindow: return "quadratic_window";
        case ProfileKind::RadialPoly: return "radial_poly";
    }
    return "?";
}

ProfileKind parse_profile_kind(std::string_view text) {
    if (text == "bump") return ProfileKind::Bump;
    if (text == "quadratic_window") return ProfileKind::QuadraticWindow;
    if (text == "radial_poly") return ProfileKind::RadialPoly;
    throw ParameterError("unknown profile '" + std::string(text) + "' (bump, quadratic_window, radial_poly)");
}

namespace {

// S((r - a) / len) and its r-derivatives.
Jet1 step(double r, double a, double len) {
    Jet1 s = smootherstep((r - a) / len);
    return {s.v, s.d1 / len, s.d2 / (len * len)};
}

Jet1 product(const Jet1& f, const Jet1& g) {
    return {f.v * g.v, f.d1 * g.v + f.v * g.d1, f.d2 * g.v + 2.0 * f.d1 * g.d1 + f.v * g.d2};
}

RadialProfile bump_profile(double c0, double r_in, double R) {
    return [=](double r, double) -> Jet1 {
        if (r <= r_in) return {c0, 0.0, 0.0};
        if (r >= R) return {};
        const Jet1 s = step(r, r_in, R - r_in);
        return {c0 * (1.0 - s.v), -c0 * s.d1, -c0 * s.d2};
    };
}

RadialProfile quadratic_profile(double c0, double r1, double r2, double r3, double r4) {
    return [=](double r, double q) -> Jet1 {
        if (r <= r1) return {c0, 0.0, 0.0};
        if (r >= r4) return {};
        if (r >= r2 && r <= r3) return {q, 2.0 * r, 2.0};
        if (r < r2) {
            const Jet1 s = step(r, r1, r2 - r1);
            return {c0 + (q - c0) * s.v, 2.0 * r * s.v + (q - c0) * s.d1,
                    2.0 * s.v + 4.0 * r * s.d1 + (q - c0) * s.d2};
        }
        const Jet1 s = step(r, r3, r4 - r3);
        return {q * (1.0 - s.v), 2.0 * r * (1.0 - s.v) - q * s.d1, 2.0 * (1.0 - s.v) - 4.0 * r * s.d1 - q * s.d2};
    };
}

RadialProfile poly_profile(double c0, double a, double r1, double R) {
    const double r3 = 0.5 * (r1 + R);
    return [=](double r, double) -> Jet1 {
        if (r <= r1) return {c0, 0.0, 0.0};
        if (r >= R) return {};
        const double u = r - r1;
        const Jet1 p{c0 + a * u * u * u * u, 4.0 * a * u * u * u, 12.0 * a * u * u};
        const Jet1 s = step(r, r3, R - r3);
        return product(p, {1.0 - s.v, -s.d1, -s.d2});
    };
}

RadialProfile cusp_profile(double A, double gamma, double w) {
    const double p = 3.0 + gamma;
    return [=](double r, double) -> Jet1 {
        if (r <= 0.0 || r >= w) return {};
        const Jet1 c{A * std::pow(r, p), A * p * std::pow(r, p - 1.0), A * p * (p - 1.0) * std::pow(r, p - 2.0)};
        const double v = r / w;
        const double q = 1.0 - v * v;
        const Jet1 env{q * q * q * q, -8.0 * v * q * q * q / w, (-8.0 * q * q * q + 48.0 * v * v * q * q) / (w * w)};
        return product(c, env);
    };
}

void add_radial(PlaneJet& out, const RadialProfile& g, double dx, double dy) {
    const double r2 = dx * dx + dy * dy;
    const double r = std::sqrt(r2);
    const Jet1 j = g(r, r2);
    out.value += j.v;
    if (r > 0.0) {
        out.gx += j.d1 * dx / r;
        out.gy += j.d1 * dy / r;
        out.laplacian += j.d2 + j.d1 / r;
    } else {
        out.laplacian += 2.0 * j.d2;
    }
}

}  // namespace

PlaneJet TestFunction::plane_jet(double x, double y) const {
    PlaneJet out;
    add_radial(out, plane_, x, y);
    if (cusp_ && spec_.cusp->where == CuspSpec::Where::Plane) add_radial(out, cusp_, x - spec_.cusp->cx, y - spec_.cusp->cy);
    return out;
}

Jet1 TestFunction::ray_jet(double s) const {
    Jet1 out = ray_(s, s * s);
    if (cusp_ && spec_.cusp->where == CuspSpec::Where::Ray) {
        const double u = s - spec_.cusp->cx;
        const Jet1 c = cusp_(std::abs(u), u * u);
        out.v += c.v;
        out.d1 += (u < 0.0 ? -c.d1 : c.d1);
        out.d2 += c.d2;
    }
    return out;
}

double TestFunction::value(const Point& p) const {
    switch (p.kind) {
        case VertexKind::Darning: return spec_.disc_constant;
        case VertexKind::Plane: return plane_jet(p.x, p.y).value;
        case VertexKind::Ray: return ray_jet(p.x).v;
    }
    return 0.0;
}

double TestFunction::value(const VdLattice& lat, VertexIndex v) const { return value(lat.embed(v)); }

TestFunction make_test_function(const TestFunctionSpec& spec, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ParameterError("test function: epsilon must lie in (0, 1/2)");
    TestFunction f;
    f.spec_ = spec;
    f.eps_ = epsilon;
    const double c0 = spec.disc_constant;
    const double r_in = spec.inner_radius > 0.0 ? spec.inner_radius : epsilon;
    const double R = spec.support_radius;
    if (!std::isfinite(c0)) throw ParameterError("test function: disc_constant must be finite");
    if (r_in < epsilon)
        throw ParameterError("test function: inner_radius " + std::to_string(r_in) +
                             " is inside the disc, so the plane part cannot equal the disc constant there");
    if (!(R > r_in)) throw ParameterError("test function: support_radius must exceed inner_radius");
    f.support_ = R;
    f.spec_.inner_radius = r_in;

    switch (spec.profile) {
        case ProfileKind::Bump:
            f.plane_ = f.ray_ = bump_profile(c0, r_in, R);
            break;
        case ProfileKind::QuadraticWindow: {
            const double a = spec.flat_inner > 0.0 ? spec.flat_inner : r_in + 0.25 * (R - r_in);
            const double b = spec.flat_outer > 0.0 ? spec.flat_outer : r_in + 0.75 * (R - r_in);
            if (!(r_in < a && a <= b && b < R))
                throw ParameterError("quadratic_window needs inner_radius < flat_inner <= flat_outer < support_radius");
            f.flat_inner_ = a;
            f.flat_outer_ = b;
            f.plane_ = f.ray_ = quadratic_profile(c0, r_in, a, b, R);
            f.spec_.flat_inner = a;
            f.spec_.flat_outer = b;
            break;
        }
        case ProfileKind::RadialPoly:
            f.plane_ = f.ray_ = poly_profile(c0, spec.poly_coefficient, r_in, R);
            break;
    }

    if (spec.cusp) {
        const CuspSpec& c = *spec.cusp;
        if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ParameterError("cusp gamma must lie in (0, 1)");
        if (!(c.half_width > 0.0) || !std::isfinite(c.amplitude)) throw ParameterError("cusp: bad width or amplitude");
        if (c.where == CuspSpec::Where::Ray) {
            if (!(c.cx - c.half_width > 0.0))
                throw ParameterError("ray cusp must vanish near the ray origin (centre - half_width > 0)");
            f.support_ = std::max(f.support_, c.cx + c.half_width);
        } else {
            const double dist = std::hypot(c.cx, c.cy);
            if (!(dist - c.half_width > epsilon))
                throw ParameterError("plane cusp overlaps the disc; the disc constant would be broken");
            f.support_ = std::max(f.support_, dist + c.half_width);
        }
        f.cusp_ = cusp_profile(c.amplitude, c.gamma, c.half_width);
    }
    return f;
}

double apply_discrete_generator(const VdLattice& lat, const TestFunction& f, VertexIndex x) {
    if (x >= lat.size()) throw ContractViolation("apply_discrete_generator: vertex index out of range");
    const double fx = f.value(lat, x);
    const auto row = lat.neighbors(x);
    const std::size_t base = lat.neighbor_offset(x);
    double acc = 0.0;
    for (std::size_t s = 0; s < row.size(); ++s) acc += (f.value(lat, row[s]) - fx) * jump_ratio(lat, x, base + s).value();
    return std::ldexp(acc, 2 * lat.k());
}

double apply_limit_generator(const TestFunction& f, const Point& p) {
    switch (p.kind) {
        case VertexKind::Darning:
            throw DomainError("the limit generator is not defined at the darning point");
        case VertexKind::Plane: {
            const double eps = f.epsilon();
            if (p.x * p.x + p.y * p.y <= eps * eps) throw DomainError("point lies in the closed disc");
            return 0.25 * f.plane_jet(p.x, p.y).laplacian;
        }
        case VertexKind::Ray:
            if (!(p.x > 0.0)) throw DomainError("ray point must be > 0");
            return 0.5 * f.ray_jet(p.x).d2;
    }
    return 0.0;
}

bool in_s_set(const VdLattice& lat, VertexIndex v) {
    const Vertex& x = lat.vertex(v);
    if (x.is_darning() || lat.in_boundary_margin(v)) return false;
    return x.is_ray() || lat.degree(v) == 4;
}

ConvergenceReport convergence_report(std::span<const VdLattice* const> ladder, const TestFunction& f) {
    if (ladder.empty()) throw ParameterError("convergence_report: empty ladder");
    const VdLattice& base = *ladder.front();
    for (const VdLattice* lat : ladder) {
        if (!(lat->params().epsilon == base.params().epsilon))
            throw ParameterError("convergence_report: lattices must share epsilon");
        if (!(lat->params().window_radius == base.params().window_radius))
            throw ParameterError("convergence_report: lattices must share the window");
        if (lat->k() < base.k()) throw ParameterError("convergence_report: ladder must start at its coarsest level");
    }
    if (std::abs(f.epsilon() - base.epsilon()) > 0.0)
        throw ParameterError("convergence_report: test function epsilon differs from the lattice epsilon");

    ConvergenceReport rep;
    rep.k0 = base.k();
    std::vector<Vertex> points;
    for (VertexIndex v = 0; v < base.size(); ++v)
        if (in_s_set(base, v)) points.push_back(base.vertex(v));

    for (const VdLattice* lat : ladder) {
        const std::int32_t factor = std::int32_t{1} << (lat->k() - rep.k0);
        ConvergenceRow row;
        row.k = lat->k();
        std::vector<double> err(points.size(), -1.0);
        parallel_for(points.size(), [&](std::size_t i) {
            Vertex v = points[i];
            v.i *= factor;
            v.j *= factor;
            const auto id = lat->index_of(v);
            if (!id) return;
            err[i] = std::abs(apply_discrete_generator(*lat, f, *id) - apply_limit_generator(f, lat->embed(*id)));
        });
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (err[i] < 0.0) continue;
            ++row.points;
            if (err[i] > row.sup_error) {
                row.sup_error = err[i];
                row.argmax = points[i];
                row.argmax.i *= factor;
                row.argmax.j *= factor;
            }
        }
        std::vector<double> gen(lat->size(), 0.0);
        parallel_for(lat->size(), [&](std::size_t v) {
            const auto id = static_cast<VertexIndex>(v);
            if (!lat->in_boundary_margin(id)) gen[v] = std::abs(apply_discrete_generator(*lat, f, id));
        });
        for (double g : gen) row.max_abs_generator = std::max(row.max_abs_generator, g);
        rep.rows.push_back(row);
    }
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        rep.ratios.push_back(rep.rows[i].sup_error / rep.rows[i - 1].sup_error);
    return rep;
}

std::vector<double> occupation_times(int k, double T, double delta, std::size_t n_times) {
    if (!(delta > 0.0 && delta < std::min(1.0, T) / 4.0))
        throw ParameterError("delta must lie in (0, min(1, T)/4)");
    const double t0 = std::ldexp(1.0, -k) / delta;
    if (t0 > T) throw ParameterError("time grid is empty: 2^-k/delta exceeds T");
    if (n_times == 0) throw ParameterError("n_times must be >= 1");
    std::vector<double> out(n_times);
    for (std::size_t i = 0; i < n_times; ++i)
        out[i] = n_times == 1 ? T : t0 + (T - t0) * static_cast<double>(i) / static_cast<double>(n_times - 1);
    return out;
}

std::vector<double> darning_occupation_exact(const VdLattice& lat, std::span<const double> times, double tol) {
    const auto dists = transition_distributions(lat, VdLattice::kDarning, times, tol);
    std::vector<double> out;
    for (const auto& d : dists) {
        double s = 0.0;
        for (VertexIndex v = 0; v < lat.size(); ++v)
            if (!in_s_set(lat, v)) s += d.probs[v];
        out.push_back(s);
    }
    return out;
}

OccupationReport darning_occupation(const VdLattice& lat, double T, double delta, std::size_t n, std::uint64_t seed,
                                    std::size_t n_times, bool exact, double tol) {
    if (n < 1000) throw ParameterError("darning_occupation needs n >= 1000 paths");
    if (n_times > 64) throw ParameterError("n_times must be <= 64");
    OccupationReport rep;
    rep.delta = delta;
    rep.horizon = T;
    rep.times = occupation_times(lat.k(), T, delta, n_times);

    std::vector<std::uint8_t> outside(lat.size());
    for (VertexIndex v = 0; v < lat.size(); ++v) outside[v] = !in_s_set(lat, v);

    const auto& times = rep.times;
    std::vector<std::uint64_t> mask(n, 0);
    std::vector<std::uint8_t> killed(n, 0);
    parallel_for(n, [&](std::size_t i) {
        StreamRng rng(seed, i);
        VertexIndex cur = VdLattice::kDarning;
        std::size_t g = 0;
        std::uint64_t m = 0;
        const double tail = simulate_path(lat, VdLattice::kDarning, times.back(), rng, [&](double t, VertexIndex v) {
            while (g < times.size() && times[g] < t) {
                if (outside[cur]) m |= std::uint64_t{1} << g;
                ++g;
            }
            cur = v;
        });
        for (; g < times.size(); ++g)
            if (tail < 0.0 || outside[cur]) m |= std::uint64_t{1} << g;
        mask[i] = m;
        killed[i] = tail < 0.0;
    });
    for (std::size_t g = 0; g < times.size(); ++g) {
        std::size_t hits = 0;
        for (std::uint64_t m : mask) hits += (m >> g) & 1u;
        rep.mc.push_back(proportion_estimate(hits, n));
    }
    std::size_t nk = 0;
    for (auto k : killed) nk += k;
    rep.killed_fraction = static_cast<double>(nk) / static_cast<double>(n);
    if (exact) rep.exact = darning_occupation_exact(lat, times, tol);
    return rep;
}

}  // namespace vdwalk
