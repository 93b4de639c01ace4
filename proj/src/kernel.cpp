#include "vdwalk/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vdwalk {

Ratio jump_ratio(const VdLattice& lat, VertexIndex x, std::size_t slot) {
    const std::int64_t deg = lat.degree(x);
    if (x != VdLattice::kDarning) return {1, deg};
    const std::int64_t ray_weight = std::int64_t{1} << (lat.k() + 1);
    const std::int64_t den = deg + ray_weight - 1;
    const VertexIndex y = lat.neighbors(x)[slot - lat.neighbor_offset(x)];
    return lat.vertex(y).is_ray() ? Ratio{ray_weight, den} : Ratio{1, den};
}

JumpKernel build_jump_kernel(const VdLattice& lat) {
    JumpKernel kern;
    kern.speed = std::ldexp(1.0, 2 * lat.k());
    const std::size_t slots = lat.neighbor_offset(static_cast<VertexIndex>(lat.size()));
    kern.prob.resize(slots);
    kern.exit_prob.resize(lat.size());
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        const std::size_t base = lat.neighbor_offset(x);
        const std::size_t row = lat.neighbors(x).size();
        for (std::size_t s = base; s < base + row; ++s) kern.prob[s] = jump_ratio(lat, x, s).value();
        kern.exit_prob[x] = static_cast<double>(lat.exits(x)) / lat.degree(x);
        if (lat.params().boundary == BoundaryMode::Induced) kern.exit_prob[x] = 0.0;
    }
    const auto rev = lat.reverse_slots();
    kern.in_prob.resize(slots);
    for (std::size_t s = 0; s < slots; ++s) kern.in_prob[s] = kern.prob[rev[s]];
    return kern;
}

std::vector<std::pair<VertexIndex, double>> jump_distribution(const VdLattice& lat, VertexIndex x) {
    if (x >= lat.size()) throw ContractViolation("jump_distribution: vertex index out of range");
    std::vector<std::pair<VertexIndex, double>> row;
    const std::size_t base = lat.neighbor_offset(x);
    const auto nbrs = lat.neighbors(x);
    row.reserve(nbrs.size());
    for (std::size_t s = 0; s < nbrs.size(); ++s) row.emplace_back(nbrs[s], jump_ratio(lat, x, base + s).value());
    return row;
}

bool detailed_balance_exact(const VdLattice& lat) {
    const auto rev = lat.reverse_slots();
    for (VertexIndex x = 0; x < lat.size(); ++x) {
        const std::size_t base = lat.neighbor_offset(x);
        const auto nbrs = lat.neighbors(x);
        for (std::size_t s = 0; s < nbrs.size(); ++s) {
            const VertexIndex y = nbrs[s];
            const Ratio a = jump_ratio(lat, x, base + s);
            const Ratio b = jump_ratio(lat, y, rev[base + s]);
            // m(x) a.num / a.den == m(y) b.num / b.den, masses share the 2^-(2k+2) unit.
            const __int128 lhs = static_cast<__int128>(lat.mass_units(x)) * a.num * b.den;
            const __int128 rhs = static_cast<__int128>(lat.mass_units(y)) * b.num * a.den;
            if (lhs != rhs) return false;
        }
    }
    return true;
}

PoissonTruncation poisson_truncation(double mean, double tol) {
    PoissonTruncation out;
    if (mean <= 0.0) {
        out.weights = {1.0};
        return out;
    }
    const auto mode = static_cast<std::size_t>(std::floor(mean));
    const double log_w_mode = -mean + static_cast<double>(mode) * std::log(mean) - std::lgamma(mode + 1.0);

    // Recurrences outward from the mode keep relative error small for large means.
    std::vector<double> w(mode + 1);
    w[mode] = std::exp(log_w_mode);
    for (std::size_t n = mode; n > 0; --n) w[n - 1] = w[n] * static_cast<double>(n) / mean;
    const double cutoff = std::min(tol, 1.0) * 1e-25;
    for (std::size_t n = mode;; ++n) {
        const double next = w[n] * mean / static_cast<double>(n + 1);
        w.push_back(next);
        if (n + 1 > mode && next < cutoff) break;
    }
    double total = 0.0;
    for (double v : w) total += v;
    for (double& v : w) v /= total;

    // suffix[n] = sum_{m >= n} w_m
    std::vector<double> suffix(w.size() + 1, 0.0);
    for (std::size_t n = w.size(); n > 0; --n) suffix[n - 1] = suffix[n] + w[n - 1];
    std::size_t last = 0;
    while (last + 1 < w.size() && suffix[last + 1] > tol) ++last;
    out.tail = suffix[last + 1];
    w.resize(last + 1);
    out.weights = std::move(w);
    return out;
}

namespace {

void validate_request(const VdLattice& lat, VertexIndex x0, std::span<const double> times, double tol,
                      const UniformizationOptions& opts) {
    if (x0 >= lat.size()) throw ContractViolation("start vertex index out of range");
    if (!(tol > 0.0 && tol <= 1e-3)) throw ParameterError("tol must lie in (0, 1e-3], got " + std::to_string(tol));
    const double speed = std::ldexp(1.0, 2 * lat.k());
    for (double t : times) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("time must be finite and >= 0");
        if (speed * t > opts.budget)
            throw ResourceError("lambda_k * t = " + std::to_string(speed * t) + " exceeds the uniformization budget " +
                                std::to_string(opts.budget) + "; use Monte Carlo for this time");
    }
}

}  // namespace

std::vector<KernelDistribution> transition_distributions(const VdLattice& lat, VertexIndex x0,
                                                         std::span<const double> times, double tol,
                                                         const UniformizationOptions& opts) {
    validate_request(lat, x0, times, tol, opts);
    const JumpKernel kern = build_jump_kernel(lat);
    const std::size_t n = lat.size();
    const bool absorbing = lat.params().boundary == BoundaryMode::Absorbing;

    std::vector<PoissonTruncation> trunc;
    std::vector<KernelDistribution> out(times.size());
    std::size_t max_terms = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        trunc.push_back(poisson_truncation(kern.speed * times[i], tol));
        out[i].start = x0;
        out[i].time = times[i];
        out[i].tol = tol;
        out[i].probs.assign(n, 0.0);
        out[i].truncation_error = trunc[i].tail;
        out[i].terms = trunc[i].weights.size();
        max_terms = std::max(max_terms, trunc[i].weights.size());
    }

    std::vector<double> cur(n, 0.0), next(n, 0.0);
    cur[x0] = 1.0;
    double alive = 1.0;
    const auto adj_begin = lat.neighbors(0).data();
    for (std::size_t term = 0; term < max_terms; ++term) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (term >= trunc[i].weights.size()) continue;
            const double w = trunc[i].weights[term];
            if (w == 0.0) continue;
            double* p = out[i].probs.data();
            for (std::size_t v = 0; v < n; ++v) p[v] += w * cur[v];
            if (absorbing) out[i].leaked_mass += w * (1.0 - alive);
        }
        if (term + 1 == max_terms) break;

        // Pull form: each output entry is an independent fixed-order sum, so the
        // result does not depend on the thread count.
#pragma omp parallel for schedule(static)
        for (std::size_t v = 0; v < n; ++v) {
            const std::size_t lo = lat.neighbor_offset(static_cast<VertexIndex>(v));
            const std::size_t hi = lat.neighbor_offset(static_cast<VertexIndex>(v + 1));
            double acc = 0.0;
            for (std::size_t s = lo; s < hi; ++s) acc += cur[adj_begin[s]] * kern.in_prob[s];
            next[v] = acc;
        }
        cur.swap(next);
        if (absorbing) {
            alive = 0.0;
            for (double c : cur) alive += c;
        }
    }
    for (auto& d : out) {
        if (!absorbing) d.leaked_mass = 0.0;
    }
    return out;
}

KernelDistribution transition_distribution(const VdLattice& lat, VertexIndex x0, double t, double tol,
                                           const UniformizationOptions& opts) {
    const double times[1] = {t};
    auto out = transition_distributions(lat, x0, times, tol, opts);
    return std::move(out.front());
}

std::vector<double> heat_kernel_density(const VdLattice& lat, const KernelDistribution& dist) {
    if (dist.probs.size() != lat.size()) throw ContractViolation("distribution does not match lattice");
    std::vector<double> dens(lat.size());
    for (VertexIndex y = 0; y < lat.size(); ++y) dens[y] = dist.probs[y] / lat.mass(y);
    return dens;
}

std::vector<double> heat_kernel_density(const VdLattice& lat, VertexIndex x0, double t, double tol,
                                        const UniformizationOptions& opts) {
    return heat_kernel_density(lat, transition_distribution(lat, x0, t, tol, opts));
}

}  // namespace vdwalk
