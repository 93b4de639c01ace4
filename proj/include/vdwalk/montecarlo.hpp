#pragma once

// Seeded path sampling of the walk and the tightness statistics computed
// from it: sup-exceedance, the block modulus of continuity, holding-time
// goodness of fit, and empirical laws compared by Kolmogorov-Smirnov distance.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdwalk/lattice.hpp"
#include "vdwalk/rng.hpp"

namespace vdwalk {

struct PathEvent {
    double time = 0.0;
    VertexIndex vertex = 0;
    friend bool operator==(const PathEvent&, const PathEvent&) = default;
};

struct PathSample {
    VertexIndex start = VdLattice::kDarning;
    std::vector<PathEvent> events;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    /// Holding time drawn for the last state; it runs past the horizon.
    double final_holding = 0.0;
    /// Walk left the window (absorbing mode) before the horizon.
    bool truncated = false;

    VertexIndex state_at(double t) const;
};

struct EstimateWithCI {
    double value = 0.0;
    double half_width = 0.0;  // 95% normal approximation
    std::size_t n_samples = 0;
};

EstimateWithCI proportion_estimate(std::size_t hits, std::size_t n);

struct SamplerOptions {
    /// Replaces lambda_k; used to inject a rate defect in tests.
    std::optional<double> speed_override;
};

/// Streams one trajectory of the walk on [0, T] to `visit`, called as
/// visit(time, vertex) for the start (time 0) and every jump. Returns the
/// drawn holding time that overshoots T, or a negative value if the walk was
/// killed at the window edge.
template <typename Visit>
double simulate_path(const VdLattice& lat, VertexIndex x0, double T, StreamRng& rng, Visit&& visit,
                     const SamplerOptions& opts = {}) {
    const double speed = opts.speed_override.value_or(std::ldexp(1.0, 2 * lat.k()));
    const std::uint64_t ray_weight = std::uint64_t{1} << (lat.k() + 1);
    VertexIndex cur = x0;
    double t = 0.0;
    visit(0.0, cur);
    for (;;) {
        const double hold = rng.exponential(speed);
        if (t + hold > T) return hold;
        t += hold;
        const auto row = lat.neighbors(cur);
        const std::uint64_t deg = lat.degree(cur);
        if (cur == VdLattice::kDarning) {
            const std::uint64_t r = rng.below(deg + ray_weight - 1);
            cur = r < ray_weight ? row[0] : row[1 + (r - ray_weight)];
        } else {
            const std::uint64_t r = rng.below(deg);
            if (r >= row.size()) return -1.0;  // stepped out of the window
            cur = row[r];
        }
        visit(t, cur);
    }
}

/// Seed pair (seed, path_index) fully determines the trajectory.
PathSample sample_path(const VdLattice& lat, VertexIndex x0, double T, std::uint64_t seed,
                       std::uint64_t path_index = 0, const SamplerOptions& opts = {});

std::vector<PathSample> sample_paths(const VdLattice& lat, VertexIndex x0, double T, std::size_t n,
                                     std::uint64_t seed, const SamplerOptions& opts = {});

struct ExceedanceTable {
    std::vector<double> levels;
    std::vector<EstimateWithCI> estimates;
    std::vector<std::string> warnings;
    std::size_t truncated_paths = 0;
};

/// P^{x0}[ sup_{t<=T} |X_t|_rho > M ] for each M, all levels on common paths.
ExceedanceTable estimate_sup_exceedance(const VdLattice& lat, VertexIndex x0, double T,
                                        std::span<const double> levels, std::size_t n, std::uint64_t seed);

struct ModulusTable {
    double delta = 0.0;
    std::vector<double> thresholds;
    std::vector<EstimateWithCI> estimates;  // P[m(delta) > threshold]
    double mean = 0.0;
    double median = 0.0;
    double q90 = 0.0;
    double q99 = 0.0;
    double max = 0.0;
};

/// Fixed-partition block modulus m(delta) of a path: max over blocks
/// [i delta, (i+1) delta] of the rho-diameter of the states visited. Upper
/// bound for the partition-infimum modulus w_rho(X, delta, T).
double block_modulus(const VdLattice& lat, const PathSample& path, double delta);

ModulusTable estimate_modulus(const VdLattice& lat, VertexIndex x0, double T, double delta,
                              std::span<const double> thresholds, std::size_t n, std::uint64_t seed);

struct HoldingTimeReport {
    std::size_t n_paths = 0;
    std::size_t n_holds = 0;
    double expected_mean = 0.0;  // 1 / lambda
    double mean_hold = 0.0;
    double var_hold = 0.0;
    double mean_count = 0.0;
    double var_count = 0.0;
    double dispersion = 0.0;  // var / mean of jump counts
    double chi_square = 0.0;
    int dof = 0;
    double p_value = 0.0;
};

/// Streams per-path holding times and jump counts. Holding times include the
/// final overshooting one, which keeps pooled moments unbiased (Wald).
class HoldingTimeAccumulator {
public:
    void add(const PathSample& path);
    void add(std::span<const double> holds, std::size_t jumps);
    void merge(const HoldingTimeAccumulator& other);
    std::size_t paths() const { return counts_.size(); }
    HoldingTimeReport report(double speed, double T) const;

private:
    std::size_t n_holds_ = 0;
    double sum_ = 0.0;
    double sum_sq_ = 0.0;
    std::vector<std::uint64_t> counts_;
};

HoldingTimeReport holding_time_report(std::span<const PathSample> paths, double speed, double T);

/// Streaming variant for large path counts: paths are simulated and
/// discarded, only holding times and jump counts are kept.
HoldingTimeReport holding_time_statistics(const VdLattice& lat, VertexIndex x0, double T, std::size_t n,
                                          std::uint64_t seed, const SamplerOptions& opts = {});

/// Chi-square goodness of fit of integer counts against Poisson(mean), tails
/// pooled so every bin expects at least five observations.
HoldingTimeReport poisson_count_test(std::span<const std::uint64_t> counts, double mean);

class EmpiricalCdf {
public:
    EmpiricalCdf() = default;
    explicit EmpiricalCdf(std::vector<double> samples);

    std::size_t size() const { return sorted_.size(); }
    std::span<const double> samples() const { return sorted_; }
    double operator()(double x) const;  // fraction of samples <= x

private:
    std::vector<double> sorted_;
};

/// sup_x |F(x) - G(x)| over the pooled sample points.
double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b);

/// Two-sample KS critical value at 5%: 1.358 sqrt((n+m)/(n m)).
double ks_noise_floor(std::size_t n, std::size_t m);

/// Sample of rho(X_T, a*) = |X_T|_rho over n paths.
EmpiricalCdf empirical_law(const VdLattice& lat, VertexIndex x0, double T, std::size_t n, std::uint64_t seed);

/// Empirical law of X_t: fraction of n paths sitting at each vertex at time t.
std::vector<double> empirical_distribution(const VdLattice& lat, VertexIndex x0, double t, std::size_t n,
                                           std::uint64_t seed, double* killed_fraction = nullptr);

}  // namespace vdwalk
