#include "vdwalk/montecarlo.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "vdwalk/errors.hpp"
#include "vdwalk/parallel.hpp"

namespace vdwalk {

namespace {

double rho_between(const VdLattice& lat, VertexIndex a, VertexIndex b) {
    if (a == b) return 0.0;
    const Vertex& va = lat.vertex(a);
    const Vertex& vb = lat.vertex(b);
    const double na = lat.rho_norm(a), nb = lat.rho_norm(b);
    if (va.is_plane() && vb.is_plane()) {
        const double h = lat.mesh();
        const double chord = h * std::hypot(static_cast<double>(va.i - vb.i), static_cast<double>(va.j - vb.j));
        return std::min(chord, na + nb);
    }
    if (va.is_ray() && vb.is_ray()) return lat.mesh() * std::abs(va.i - vb.i);
    return na + nb;
}

void check_paths(std::size_t n, std::size_t minimum, const char* what) {
    if (n < minimum)
        throw ParameterError(std::string(what) + " needs at least " + std::to_string(minimum) + " paths, got " +
                             std::to_string(n));
}

void check_horizon(double T) {
    if (!(T >= 0.0) || !std::isfinite(T)) throw ParameterError("horizon T must be finite and >= 0");
}

}  // namespace

VertexIndex PathSample::state_at(double t) const {
    VertexIndex cur = start;
    for (const auto& ev : events) {
        if (ev.time > t) break;
        cur = ev.vertex;
    }
    return cur;
}

EstimateWithCI proportion_estimate(std::size_t hits, std::size_t n) {
    EstimateWithCI e;
    e.n_samples = n;
    if (n == 0) return e;
    e.value = static_cast<double>(hits) / static_cast<double>(n);
    e.half_width = 1.959964 * std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
    return e;
}

PathSample sample_path(const VdLattice& lat, VertexIndex x0, double T, std::uint64_t seed, std::uint64_t path_index,
                       const SamplerOptions& opts) {
    check_horizon(T);
    if (x0 >= lat.size()) throw ContractViolation("start vertex index out of range");
    PathSample path;
    path.start = x0;
    path.horizon = T;
    path.seed = seed;
    path.path_index = path_index;
    StreamRng rng(seed, path_index);
    const double last = simulate_path(
        lat, x0, T, rng,
        [&](double t, VertexIndex v) {
            if (t > 0.0) path.events.push_back({t, v});
        },
        opts);
    if (last < 0.0) {
        path.truncated = true;
    } else {
        path.final_holding = last;
    }
    return path;
}

std::vector<PathSample> sample_paths(const VdLattice& lat, VertexIndex x0, double T, std::size_t n,
                                     std::uint64_t seed, const SamplerOptions& opts) {
    std::vector<PathSample> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = sample_path(lat, x0, T, seed, i, opts); });
    return out;
}

ExceedanceTable estimate_sup_exceedance(const VdLattice& lat, VertexIndex x0, double T,
                                        std::span<const double> levels, std::size_t n, std::uint64_t seed) {
    check_horizon(T);
    check_paths(n, 1000, "estimate_sup_exceedance");
    if (x0 >= lat.size()) throw ContractViolation("start vertex index out of range");
    for (double m : levels)
        if (!(m > 0.0)) throw ParameterError("exceedance levels must be > 0");

    std::vector<double> sup(n, 0.0);
    std::vector<std::uint8_t> killed(n, 0);
    parallel_for(n, [&](std::size_t i) {
        StreamRng rng(seed, i);
        double s = 0.0;
        const double last = simulate_path(lat, x0, T, rng, [&](double, VertexIndex v) { s = std::max(s, lat.rho_norm(v)); });
        sup[i] = s;
        killed[i] = last < 0.0;
    });

    ExceedanceTable table;
    table.levels.assign(levels.begin(), levels.end());
    for (std::uint8_t k : killed) table.truncated_paths += k;
    const double window = lat.params().window_radius.to_double();
    for (double m : levels) {
        std::size_t hits = 0;
        for (double s : sup) hits += s > m;
        table.estimates.push_back(proportion_estimate(hits, n));
        if (!(window > m + 4.0 * std::sqrt(T)))
            table.warnings.push_back("censored: window_radius " + lat.params().window_radius.str() +
                                     " <= M + 4 sqrt(T) at M = " + std::to_string(m));
    }
    if (table.truncated_paths > 0)
        table.warnings.push_back(std::to_string(table.truncated_paths) + " paths absorbed at the window edge");
    return table;
}

double block_modulus(const VdLattice& lat, const PathSample& path, double delta) {
    if (!(delta > 0.0)) throw ParameterError("block width delta must be > 0");
    double worst = 0.0;
    std::vector<VertexIndex> block{path.start};
    double block_end = delta;
    VertexIndex cur = path.start;

    auto close_block = [&]() {
        std::sort(block.begin(), block.end());
        block.erase(std::unique(block.begin(), block.end()), block.end());
        for (std::size_t a = 0; a < block.size(); ++a)
            for (std::size_t b = a + 1; b < block.size(); ++b) worst = std::max(worst, rho_between(lat, block[a], block[b]));
    };

    for (const auto& ev : path.events) {
        while (ev.time > block_end) {
            close_block();
            block.assign(1, cur);
            block_end += delta;
        }
        block.push_back(ev.vertex);
        cur = ev.vertex;
    }
    close_block();
    return worst;
}

ModulusTable estimate_modulus(const VdLattice& lat, VertexIndex x0, double T, double delta,
                              std::span<const double> thresholds, std::size_t n, std::uint64_t seed) {
    check_horizon(T);
    if (!(delta > 0.0 && delta < T)) throw ParameterError("estimate_modulus requires 0 < delta < T");
    check_paths(n, 1, "estimate_modulus");
    std::vector<double> mod(n);
    parallel_for(n, [&](std::size_t i) { mod[i] = block_modulus(lat, sample_path(lat, x0, T, seed, i), delta); });

    ModulusTable table;
    table.delta = delta;
    table.thresholds.assign(thresholds.begin(), thresholds.end());
    for (double thr : thresholds) {
        std::size_t hits = 0;
        for (double m : mod) hits += m > thr;
        table.estimates.push_back(proportion_estimate(hits, n));
    }
    double sum = 0.0;
    for (double m : mod) sum += m;
    table.mean = sum / static_cast<double>(n);
    std::vector<double> sorted = mod;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n))) - 1;
        return sorted[std::min(idx, n - 1)];
    };
    table.median = quantile(0.5);
    table.q90 = quantile(0.9);
    table.q99 = quantile(0.99);
    table.max = sorted.back();
    return table;
}

void HoldingTimeAccumulator::add(std::span<const double> holds, std::size_t jumps) {
    for (double h : holds) {
        sum_ += h;
        sum_sq_ += h * h;
    }
    n_holds_ += holds.size();
    counts_.push_back(jumps);
}

void HoldingTimeAccumulator::add(const PathSample& path) {
    std::vector<double> holds;
    holds.reserve(path.events.size() + 1);
    double prev = 0.0;
    for (const auto& ev : path.events) {
        holds.push_back(ev.time - prev);
        prev = ev.time;
    }
    if (!path.truncated) holds.push_back(path.final_holding);
    add(holds, path.events.size());
}

void HoldingTimeAccumulator::merge(const HoldingTimeAccumulator& other) {
    n_holds_ += other.n_holds_;
    sum_ += other.sum_;
    sum_sq_ += other.sum_sq_;
    counts_.insert(counts_.end(), other.counts_.begin(), other.counts_.end());
}

HoldingTimeReport HoldingTimeAccumulator::report(double speed, double T) const {
    check_paths(counts_.size(), 1000, "holding_time_report");
    HoldingTimeReport r = poisson_count_test(counts_, speed * T);
    r.n_holds = n_holds_;
    r.expected_mean = 1.0 / speed;
    const double nh = static_cast<double>(n_holds_);
    r.mean_hold = sum_ / nh;
    r.var_hold = (sum_sq_ - nh * r.mean_hold * r.mean_hold) / (nh - 1.0);
    return r;
}

HoldingTimeReport holding_time_report(std::span<const PathSample> paths, double speed, double T) {
    HoldingTimeAccumulator acc;
    for (const auto& p : paths) acc.add(p);
    return acc.report(speed, T);
}

HoldingTimeReport holding_time_statistics(const VdLattice& lat, VertexIndex x0, double T, std::size_t n,
                                          std::uint64_t seed, const SamplerOptions& opts) {
    check_horizon(T);
    check_paths(n, 1000, "holding_time_statistics");
    // Fixed-size chunks are reduced in chunk order.
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<HoldingTimeAccumulator> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        std::vector<double> holds;
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            holds.clear();
            double prev = 0.0;
            std::size_t jumps = 0;
            StreamRng rng(seed, i);
            const double last = simulate_path(
                lat, x0, T, rng,
                [&](double t, VertexIndex) {
                    if (t > 0.0) {
                        holds.push_back(t - prev);
                        prev = t;
                        ++jumps;
                    }
                },
                opts);
            if (last >= 0.0) holds.push_back(last);
            parts[c].add(holds, jumps);
        }
    });
    HoldingTimeAccumulator all;
    for (const auto& p : parts) all.merge(p);
    return all.report(std::ldexp(1.0, 2 * lat.k()), T);
}

HoldingTimeReport poisson_count_test(std::span<const std::uint64_t> counts, double mean) {
    HoldingTimeReport r;
    r.n_paths = counts.size();
    if (counts.empty() || !(mean > 0.0)) throw ParameterError("poisson_count_test needs counts and a positive mean");
    const double n = static_cast<double>(counts.size());

    std::uint64_t max_count = 0;
    double s = 0.0, s2 = 0.0;
    for (auto c : counts) {
        max_count = std::max(max_count, c);
        s += static_cast<double>(c);
        s2 += static_cast<double>(c) * static_cast<double>(c);
    }
    r.mean_count = s / n;
    r.var_count = (s2 - n * r.mean_count * r.mean_count) / (n - 1.0);
    r.dispersion = r.var_count / r.mean_count;

    std::vector<double> observed(max_count + 1, 0.0);
    for (auto c : counts) observed[c] += 1.0;
    auto pmf = [&](std::uint64_t i) {
        return std::exp(-mean + static_cast<double>(i) * std::log(mean) - std::lgamma(static_cast<double>(i) + 1.0));
    };

    // Greedy left-to-right binning; the final bin is the open upper tail.
    struct Bin {
        double expected = 0.0;
        double observed = 0.0;
    };
    std::vector<Bin> bins;
    Bin open;
    double cdf = 0.0;
    std::uint64_t i = 0;
    for (;; ++i) {
        const double p = pmf(i);
        const double upper_tail = std::max(0.0, 1.0 - cdf - p);
        open.expected += n * p;
        open.observed += i < observed.size() ? observed[i] : 0.0;
        cdf += p;
        if (open.expected >= 5.0 && n * upper_tail >= 5.0) {
            bins.push_back(open);
            open = Bin{};
        }
        if (n * upper_tail < 5.0 && i >= static_cast<std::uint64_t>(mean)) break;
    }
    // Remaining tail mass and observations above i join the open bin.
    open.expected += n * std::max(0.0, 1.0 - cdf);
    for (std::uint64_t c = i + 1; c < observed.size(); ++c) open.observed += observed[c];
    if (open.expected >= 5.0 || bins.empty()) {
        bins.push_back(open);
    } else {
        bins.back().expected += open.expected;
        bins.back().observed += open.observed;
    }

    double chi = 0.0;
    for (const auto& b : bins) chi += (b.observed - b.expected) * (b.observed - b.expected) / b.expected;
    r.chi_square = chi;
    r.dof = static_cast<int>(bins.size()) - 1;
    r.p_value = r.dof > 0 ? boost::math::gamma_q(0.5 * r.dof, 0.5 * chi) : 1.0;
    return r;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
    if (sorted_.empty()) return 0.0;
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b) {
    const auto xa = a.samples();
    const auto xb = b.samples();
    if (xa.empty() || xb.empty()) throw ParameterError("ks_distance needs two nonempty samples");
    const double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < xa.size() && j < xb.size()) {
        const double x = std::min(xa[i], xb[j]);
        while (i < xa.size() && xa[i] <= x) ++i;
        while (j < xb.size() && xb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_noise_floor(std::size_t n, std::size_t m) {
    const double a = static_cast<double>(n), b = static_cast<double>(m);
    return 1.358 * std::sqrt((a + b) / (a * b));
}

EmpiricalCdf empirical_law(const VdLattice& lat, VertexIndex x0, double T, std::size_t n, std::uint64_t seed) {
    check_horizon(T);
    check_paths(n, 1000, "empirical_law");
    std::vector<double> stat(n);
    parallel_for(n, [&](std::size_t i) {
        StreamRng rng(seed, i);
        VertexIndex last = x0;
        simulate_path(lat, x0, T, rng, [&](double, VertexIndex v) { last = v; });
        stat[i] = lat.rho_norm(last);
    });
    return EmpiricalCdf(std::move(stat));
}

std::vector<double> empirical_distribution(const VdLattice& lat, VertexIndex x0, double t, std::size_t n,
                                           std::uint64_t seed, double* killed_fraction) {
    check_horizon(t);
    check_paths(n, 1, "empirical_distribution");
    constexpr VertexIndex kKilled = UINT32_MAX;
    std::vector<VertexIndex> final_state(n);
    parallel_for(n, [&](std::size_t i) {
        StreamRng rng(seed, i);
        VertexIndex last = x0;
        const double tail = simulate_path(lat, x0, t, rng, [&](double, VertexIndex v) { last = v; });
        final_state[i] = tail < 0.0 ? kKilled : last;
    });
    std::vector<double> freq(lat.size(), 0.0);
    std::size_t killed = 0;
    for (VertexIndex v : final_state) {
        if (v == kKilled)
            ++killed;
        else
            freq[v] += 1.0;
    }
    for (double& f : freq) f /= static_cast<double>(n);
    if (killed_fraction) *killed_fraction = static_cast<double>(killed) / static_cast<double>(n);
    return freq;
}

}  // namespace vdwalk
