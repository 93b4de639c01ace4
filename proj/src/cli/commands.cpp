#include "vdwalk/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "vdwalk/errors.hpp"
#include "vdwalk/generator.hpp"
#include "vdwalk/inequalities.hpp"
#include "vdwalk/kernel.hpp"
#include "vdwalk/lattice.hpp"
#include "vdwalk/montecarlo.hpp"
#include "vdwalk/parallel.hpp"
#include "vdwalk/report_io.hpp"
#include "vdwalk/rng.hpp"

namespace vdwalk::cli {

using json = nlohmann::ordered_json;

namespace {

struct Context {
    const RunConfig& cfg;
    RunDirectory& dir;
    std::ostream& log;
    std::vector<std::string> warnings;
    std::vector<std::string> failures;

    void warn(const std::string& w) {
        if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
    }
    void fail(const std::string& f) { failures.push_back(f); }
    void write_json(const std::string& name, const json& j) { dir.write(name, j.dump(2) + "\n"); }
};

json num(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

LatticeParams lattice_params(const RunConfig& cfg, int k) {
    LatticeParams p;
    p.k = k;
    p.epsilon = cfg.get_dyadic("lattice.epsilon");
    p.window_radius = cfg.get_dyadic("lattice.window");
    p.boundary = parse_boundary_mode(cfg.get_text("lattice.boundary"));
    return p;
}

std::vector<int> ladder(const RunConfig& cfg) {
    std::vector<int> ks;
    for (auto k : cfg.get_ints("lattice.ladder")) ks.push_back(static_cast<int>(k));
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1]) throw ParameterError("lattice.ladder must be strictly increasing");
    return ks;
}

/// Independent stream per level so successive laws are independent samples.
std::uint64_t level_seed(std::uint64_t seed, int k) { return mix64(seed ^ (0xA0761D6478BD642FULL * (k + 1))); }

VdLattice build_logged(Context& ctx, const LatticeParams& p) {
    VdLattice lat = build_lattice(p);
    for (const auto& w : lat.warnings()) ctx.warn(w + " (k=" + std::to_string(p.k) + ")");
    ctx.log << "lattice k=" << p.k << ": " << lat.size() << " vertices, " << lat.edge_count() << " edges\n";
    return lat;
}

/// "darning", "ray:<s>" or "plane:<x>:<y>" with dyadic physical coordinates.
VertexIndex parse_start(const VdLattice& lat, const std::string& spec) {
    if (spec == "darning") return VdLattice::kDarning;
    auto to_index = [&](std::string_view text) {
        const Dyadic d = Dyadic::parse(text);
        const std::int64_t n = d.floor_scaled(lat.k());
        if (!(Dyadic(n, lat.k()) == d))
            throw ParameterError("start coordinate " + std::string(text) + " is not a lattice point at k=" +
                                 std::to_string(lat.k()));
        return static_cast<std::int32_t>(n);
    };
    std::optional<VertexIndex> id;
    if (spec.rfind("ray:", 0) == 0) {
        id = lat.index_of(Vertex::ray(to_index(std::string_view(spec).substr(4))));
    } else if (spec.rfind("plane:", 0) == 0) {
        const std::string rest = spec.substr(6);
        const auto colon = rest.find(':');
        if (colon == std::string::npos) throw ParameterError("plane start must read plane:<x>:<y>");
        id = lat.index_of(Vertex::plane(to_index(rest.substr(0, colon)), to_index(rest.substr(colon + 1))));
    } else {
        throw ParameterError("start vertex must be darning, ray:<s> or plane:<x>:<y>, got '" + spec + "'");
    }
    if (!id) throw ParameterError("start vertex " + spec + " is not in the lattice (inside the disc or the window)");
    return *id;
}

std::vector<std::string> vertex_cells(const VdLattice& lat, VertexIndex v) {
    const Vertex& x = lat.vertex(v);
    const Point p = lat.embed(v);
    const char* tag = x.is_darning() ? "darning" : x.is_ray() ? "ray" : "plane";
    return {std::to_string(v), tag, std::to_string(x.i), std::to_string(x.j), format_double(p.x), format_double(p.y)};
}

std::size_t count_arg(const RunConfig& cfg, const std::string& key, std::size_t min) {
    const std::uint64_t n = cfg.get_uint(key);
    if (n < min) throw ParameterError(key + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(n);
}

// ---------------------------------------------------------------------------

void cmd_lattice_info(Context& ctx) {
    const VdLattice lat = build_logged(ctx, lattice_params(ctx.cfg, static_cast<int>(ctx.cfg.get_int("lattice.k"))));
    json j;
    j["k"] = lat.k();
    j["epsilon"] = lat.params().epsilon.str();
    j["window_radius"] = lat.params().window_radius.str();
    j["boundary"] = to_string(lat.params().boundary);
    j["vertices"] = lat.size();
    j["edges"] = lat.edge_count();
    j["ray_vertices"] = lat.ray_count();
    j["plane_vertices"] = lat.plane_count();
    j["darning_degree"] = lat.degree(VdLattice::kDarning);
    j["darning_mass"] = lat.mass(VdLattice::kDarning);
    j["darning_mass_exact"] =
        std::to_string(lat.mass_units(VdLattice::kDarning)) + "/2^" + std::to_string(lat.mass_shift());
    j["warnings"] = lat.warnings();
    json inv = json::array();
    for (const auto& c : check_lattice_invariants(lat)) {
        inv.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        if (!c.passed) ctx.fail("lattice invariant " + c.name + ": " + c.detail);
    }
    j["invariants"] = inv;
    ctx.write_json("lattice.json", j);

    if (ctx.cfg.get_bool("lattice.edges_csv")) {
        CsvTable t({"index", "tag", "i", "j", "x", "y", "degree", "mass", "neighbors"});
        for (VertexIndex v = 0; v < lat.size(); ++v) {
            auto cells = vertex_cells(lat, v);
            cells.push_back(std::to_string(lat.degree(v)));
            cells.push_back(format_double(lat.mass(v)));
            std::string nb;
            for (VertexIndex u : lat.neighbors(v)) nb += (nb.empty() ? "" : " ") + std::to_string(u);
            cells.push_back(nb);
            t.add(std::move(cells));
        }
        ctx.dir.write("edges.csv", t.str());
    }
}

void cmd_kernel(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const VdLattice lat = build_logged(ctx, lattice_params(cfg, static_cast<int>(cfg.get_int("lattice.k"))));
    const VertexIndex x0 = parse_start(lat, cfg.get_text("kernel.x0"));
    const double tol = cfg.get_real("kernel.tol");
    UniformizationOptions uo;
    uo.budget = cfg.get_real("kernel.budget");
    const double speed = std::ldexp(1.0, 2 * lat.k());
    const auto times = cfg.get_reals("kernel.times");
    if (!(tol > 0.0 && tol <= 1e-3)) throw ParameterError("kernel.tol must lie in (0, 1e-3]");
    for (double t : times)
        if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("kernel.times must be finite and >= 0");

    json header = json::array();
    for (std::size_t idx = 0; idx < times.size(); ++idx) {
        const double t = times[idx];
        std::vector<double> probs;
        json h{{"k", lat.k()}, {"epsilon", lat.params().epsilon.str()}, {"t", t}, {"tol", tol}};
        if (speed * t <= uo.budget) {
            const KernelDistribution d = transition_distribution(lat, x0, t, tol, uo);
            probs = d.probs;
            double total = d.leaked_mass;
            for (double p : probs) total += p;
            h["method"] = "uniformization";
            h["N"] = d.terms == 0 ? 0 : d.terms - 1;
            h["truncation_error"] = d.truncation_error;
            h["leaked_mass"] = d.leaked_mass;
            h["total_mass"] = total;
            if (!(total >= 1.0 - tol - 1e-12 && total <= 1.0 + 1e-12))
                ctx.fail("conservation at t=" + format_double(t) + ": total mass " + format_double(total));
        } else {
            // Over budget: Monte Carlo estimate of the same law.
            const std::size_t n = count_arg(cfg, "kernel.mc_paths", 1000);
            double killed = 0.0;
            probs = empirical_distribution(lat, x0, t, n, cfg.get_uint("run.seed"), &killed);
            ctx.warn("budget: t=" + format_double(t) + " routed to Monte Carlo");
            h["method"] = "monte_carlo";
            h["paths"] = n;
            h["leaked_mass"] = killed;
        }
        header.push_back(h);

        CsvTable table({"vertex", "tag", "i", "j", "x", "y", "probability", "density"});
        for (VertexIndex v = 0; v < lat.size(); ++v) {
            auto cells = vertex_cells(lat, v);
            cells.push_back(format_double(probs[v]));
            cells.push_back(format_double(probs[v] / lat.mass(v)));
            table.add(std::move(cells));
        }
        ctx.dir.write("kernel_" + std::to_string(idx) + ".csv", table.str());
    }
    ctx.write_json("kernel.json", {{"x0", cfg.get_text("kernel.x0")}, {"times", header}});
}

void cmd_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const VdLattice lat = build_logged(ctx, lattice_params(cfg, static_cast<int>(cfg.get_int("lattice.k"))));
    const VertexIndex x0 = parse_start(lat, cfg.get_text("simulate.x0"));
    const double T = cfg.get_real("simulate.T");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("simulate.T must be > 0");
    const std::size_t n = count_arg(cfg, "simulate.paths", 1000);
    const std::uint64_t seed = cfg.get_uint("run.seed");
    const double speed = std::ldexp(1.0, 2 * lat.k());
    const std::string params = "k=" + std::to_string(lat.k()) + ";T=" + format_double(T) + ";x0=" +
                               cfg.get_text("simulate.x0");

    const HoldingTimeReport h = holding_time_statistics(lat, x0, T, n, seed);
    CsvTable stats({"statistic", "value", "ci", "n", "seed", "params"});
    const double hold_se = h.expected_mean / std::sqrt(static_cast<double>(std::max<std::size_t>(h.n_holds, 1)));
    stats.row("mean_holding_time", h.mean_hold, 1.959964 * hold_se, h.n_holds, seed, params);
    stats.row("expected_holding_time", h.expected_mean, 0.0, h.n_holds, seed, params);
    stats.row("holding_time_variance", h.var_hold, 0.0, h.n_holds, seed, params);
    stats.row("mean_jump_count", h.mean_count, 1.959964 * std::sqrt(h.var_count / n), n, seed, params);
    stats.row("expected_jump_count", speed * T, 0.0, n, seed, params);
    stats.row("jump_count_dispersion", h.dispersion, 0.0, n, seed, params);
    stats.row("poisson_chi_square", h.chi_square, 0.0, n, seed, params);
    stats.row("poisson_dof", h.dof, 0.0, n, seed, params);
    stats.row("poisson_p_value", h.p_value, 0.0, n, seed, params);
    if (h.p_value <= 1e-3) ctx.warn("poisson_fit: chi-square p-value " + format_double(h.p_value));
    if (std::abs(h.mean_hold - h.expected_mean) > 4.0 * hold_se)
        ctx.warn("holding_mean: outside 4 standard errors of 2^-2k");

    double killed = 0.0;
    const auto emp = empirical_distribution(lat, x0, T, n, seed, &killed);
    stats.row("killed_fraction", killed, 0.0, n, seed, params);
    ctx.dir.write("statistics.csv", stats.str());

    std::vector<double> exact;
    const double tol = cfg.get_real("simulate.tol");
    if (cfg.get_bool("simulate.compare_exact")) {
        if (speed * T <= 1e5)
            exact = transition_distribution(lat, x0, T, tol).probs;
        else
            ctx.warn("budget: exact comparison skipped, lambda_k T over 1e5");
    }
    CsvTable dist({"vertex", "tag", "i", "j", "x", "y", "empirical", "exact", "std_error", "z", "within_3se"});
    std::size_t cells = 0, outside = 0;
    for (VertexIndex v = 0; v < lat.size(); ++v) {
        const bool has_exact = !exact.empty();
        if (emp[v] == 0.0 && (!has_exact || exact[v] < 1e-3)) continue;
        auto row = vertex_cells(lat, v);
        row.push_back(format_double(emp[v]));
        if (has_exact) {
            const double p = exact[v];
            const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
            const double z = se > 0.0 ? (emp[v] - p) / se : 0.0;
            const bool ok = std::abs(emp[v] - p) <= 3.0 * se;
            if (p >= 1e-3) {
                ++cells;
                if (!ok) ++outside;
            }
            row.push_back(format_double(p));
            row.push_back(format_double(se));
            row.push_back(format_double(z));
            row.push_back(p >= 1e-3 ? (ok ? "true" : "false") : "");
        } else {
            row.insert(row.end(), {"", "", "", ""});
        }
        dist.add(std::move(row));
    }
    ctx.dir.write("distribution.csv", dist.str());
    if (!exact.empty() && outside > 0)
        ctx.warn("mc_vs_exact: " + std::to_string(outside) + " of " + std::to_string(cells) +
                 " cells with p >= 1e-3 outside 3 standard errors");

    const std::size_t dump = std::min<std::size_t>(cfg.get_uint("simulate.dump_paths"), n);
    if (dump > 0) {
        CsvTable paths({"path", "event", "time", "vertex", "tag", "i", "j"});
        for (std::size_t p = 0; p < dump; ++p) {
            const PathSample s = sample_path(lat, x0, T, seed, p);
            auto emit = [&](std::size_t e, double t, VertexIndex v) {
                const auto c = vertex_cells(lat, v);
                paths.add({std::to_string(p), std::to_string(e), format_double(t), c[0], c[1], c[2], c[3]});
            };
            emit(0, 0.0, s.start);
            for (std::size_t e = 0; e < s.events.size(); ++e) emit(e + 1, s.events[e].time, s.events[e].vertex);
        }
        ctx.dir.write("paths.csv", paths.str());
    }
}

void cmd_tightness(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const double T = cfg.get_real("tightness.T");
    const double delta = cfg.get_real("tightness.delta");
    const auto levels = cfg.get_reals("tightness.levels");
    const auto thresholds = cfg.get_reals("tightness.thresholds");
    const std::size_t n = count_arg(cfg, "tightness.paths", 1000);
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("tightness.T must be > 0");
    if (!(delta > 0.0 && delta < T)) throw ParameterError("tightness.delta must lie in (0, T)");
    for (double m : levels)
        if (!(m > 0.0)) throw ParameterError("tightness.levels must be > 0");
    const std::uint64_t seed = cfg.get_uint("run.seed");

    CsvTable ex({"k", "M", "value", "ci", "n", "seed", "truncated_paths"});
    CsvTable mod({"k", "delta", "threshold", "value", "ci", "n", "seed"});
    CsvTable summary({"k", "delta", "mean", "median", "q90", "q99", "max"});
    for (int k : ladder(cfg)) {
        const VdLattice lat = build_logged(ctx, lattice_params(cfg, k));
        const VertexIndex x0 = parse_start(lat, cfg.get_text("tightness.x0"));
        const std::uint64_t s = level_seed(seed, k);
        const ExceedanceTable e = estimate_sup_exceedance(lat, x0, T, levels, n, s);
        for (const auto& w : e.warnings) ctx.warn("censoring: " + w + " (k=" + std::to_string(k) + ")");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            ex.row(k, levels[i], e.estimates[i].value, e.estimates[i].half_width, n, s, e.truncated_paths);
            for (std::size_t j = 0; j < levels.size(); ++j)
                if (levels[i] < levels[j] && e.estimates[i].value < e.estimates[j].value)
                    ctx.fail("exceedance not antitone in M at k=" + std::to_string(k));
        }
        const ModulusTable m = estimate_modulus(lat, x0, T, delta, thresholds, n, s);
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            mod.row(k, delta, thresholds[i], m.estimates[i].value, m.estimates[i].half_width, n, s);
            for (std::size_t j = 0; j < thresholds.size(); ++j)
                if (thresholds[i] < thresholds[j] && m.estimates[i].value < m.estimates[j].value)
                    ctx.fail("modulus exceedance not antitone in the threshold at k=" + std::to_string(k));
        }
        summary.row(k, delta, m.mean, m.median, m.q90, m.q99, m.max);
    }
    ctx.dir.write("exceedance.csv", ex.str());
    ctx.dir.write("modulus.csv", mod.str());
    ctx.dir.write("modulus_summary.csv", summary.str());
}

void cmd_converge(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const double T = cfg.get_real("converge.T");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("converge.T must be > 0");
    const std::size_t n = count_arg(cfg, "converge.paths", 1000);
    const std::uint64_t seed = cfg.get_uint("run.seed");
    const auto ks = ladder(cfg);
    if (ks.size() < 2) throw ParameterError("converge needs at least two ladder levels");

    std::vector<EmpiricalCdf> laws;
    CsvTable summary({"k", "n", "seed", "mean", "median", "q90"});
    for (int k : ks) {
        const VdLattice lat = build_logged(ctx, lattice_params(cfg, k));
        const VertexIndex x0 = parse_start(lat, cfg.get_text("converge.x0"));
        const std::uint64_t s = level_seed(seed, k);
        laws.push_back(empirical_law(lat, x0, T, n, s));
        const auto xs = laws.back().samples();
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        summary.row(k, n, s, mean, xs[(xs.size() - 1) / 2], xs[static_cast<std::size_t>(std::ceil(0.9 * xs.size())) - 1]);
    }
    CsvTable t({"k", "k_next", "ks_distance", "noise_floor", "n", "not_above_previous_within_2_floor"});
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < laws.size(); ++i) {
        const double d = ks_distance(laws[i], laws[i + 1]);
        const double floor = ks_noise_floor(laws[i].size(), laws[i + 1].size());
        t.row(ks[i], ks[i + 1], d, floor, n, d <= std::max(prev, 2.0 * floor));
        prev = d;
    }
    ctx.dir.write("ks.csv", t.str());
    ctx.dir.write("laws.csv", summary.str());
}

void cmd_check_iso(Context& ctx) {
    const auto& cfg = ctx.cfg;
    IsoScanOptions opts;
    opts.exhaustive_max_size = static_cast<int>(cfg.get_int("iso.exhaustive_max_size"));
    opts.n_random = cfg.get_uint("iso.random_sets");
    opts.random_max_size = cfg.get_uint("iso.random_max_size");
    opts.seed = cfg.get_uint("run.seed");
    if (opts.exhaustive_max_size < 1 || opts.exhaustive_max_size > 8)
        throw ParameterError("iso.exhaustive_max_size must lie in [1, 8]");
    std::vector<WeightedPart> parts;
    for (const auto& p : cfg.get_texts("iso.parts")) parts.push_back(parse_weighted_part(p));

    CsvTable t({"part", "k", "minimum", "exhaustive_minimum", "random_minimum", "sets_enumerated", "sets_random",
                "witness_size", "boundary_weight", "mass", "witness"});
    json reports = json::array();
    std::map<WeightedPart, std::vector<double>> minima;
    for (int k : ladder(cfg)) {
        const VdLattice lat = build_logged(ctx, lattice_params(cfg, k));
        for (WeightedPart part : parts) {
            const IsoScanReport r = iso_scan(lat, part, opts);
            std::string witness;
            json wj = json::array();
            for (VertexIndex v : r.witness.set) {
                witness += (witness.empty() ? "" : " ") + to_string(lat.vertex(v));
                wj.push_back(to_string(lat.vertex(v)));
            }
            t.row(to_string(part), k, r.minimum, r.exhaustive_minimum, r.random_minimum, r.sets_enumerated,
                  r.sets_random, r.witness.set.size(), r.witness.boundary_weight, r.witness.mass, witness);
            reports.push_back({{"part", to_string(part)},
                               {"k", k},
                               {"epsilon", lat.params().epsilon.str()},
                               {"minimum_normalized_constant", num(r.minimum)},
                               {"exhaustive_max_size", opts.exhaustive_max_size},
                               {"exhaustive_minimum", num(r.exhaustive_minimum)},
                               {"random_minimum", num(r.random_minimum)},
                               {"sets_enumerated", r.sets_enumerated},
                               {"sets_random", r.sets_random},
                               {"witness", wj},
                               {"notes", r.notes}});
            minima[part].push_back(r.minimum);
            if (!(r.minimum > 0.0) || !std::isfinite(r.minimum))
                ctx.fail("isoperimetric minimum not positive for " + to_string(part) + " at k=" + std::to_string(k));
        }
    }
    json ladder_j = json::array();
    for (const auto& [part, v] : minima) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        ladder_j.push_back({{"part", to_string(part)}, {"min", *lo}, {"max", *hi}, {"variation", *hi / *lo - 1.0}});
    }
    ctx.dir.write("iso.csv", t.str());
    ctx.write_json("iso.json", {{"scans", reports}, {"ladder", ladder_j}});
}

void cmd_check_nash(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const std::size_t count = count_arg(cfg, "nash.functions", 1);
    const double max_radius = cfg.get_real("nash.max_radius");
    const std::uint64_t seed = cfg.get_uint("run.seed");
    if (!(max_radius > 0.0)) throw ParameterError("nash.max_radius must be > 0");

    CsvTable t({"k", "function", "centre", "radius", "support_size", "plane_constant", "ray_constant",
                "combined_constant", "energy", "l1", "l2"});
    CsvTable summary({"k", "min_plane_constant", "min_ray_constant", "min_combined_constant"});
    for (int k : ladder(cfg)) {
        const VdLattice lat = build_logged(ctx, lattice_params(cfg, k));
        std::vector<VertexIndex> centres;
        for (VertexIndex v = 0; v < lat.size(); ++v)
            if (!lat.in_boundary_margin(v)) centres.push_back(v);
        double min_plane = INFINITY, min_ray = INFINITY, min_comb = INFINITY;
        std::size_t made = 0;
        for (std::size_t idx = 0; made < count && idx < 50 * count; ++idx) {
            StreamRng rng(level_seed(seed, k), idx);
            const VertexIndex c = centres[rng.below(centres.size())];
            const double r = 2.0 * lat.mesh() + (max_radius - 2.0 * lat.mesh()) * (rng.uniform_open0());
            const Point pc = lat.embed(c);
            std::vector<double> f(lat.size(), 0.0);
            std::size_t support = 0;
            bool margin = false;
            for (VertexIndex v = 0; v < lat.size(); ++v) {
                const double d = geodesic_distance(pc, lat.embed(v), lat.epsilon()) / r;
                if (d >= 1.0) continue;
                f[v] = (1.0 - d * d) * (1.0 - d * d);
                ++support;
                margin = margin || lat.in_boundary_margin(v);
            }
            if (margin) continue;  // redraw: support must stay off the truncation margin
            const NashReport rep = nash_check(lat, f);
            t.row(k, made, to_string(lat.vertex(c)), r, support, rep.plane.normalized_constant,
                  rep.ray.normalized_constant, rep.combined_constant, rep.energy, rep.l1, rep.l2);
            if (std::isfinite(rep.plane.normalized_constant)) min_plane = std::min(min_plane, rep.plane.normalized_constant);
            if (std::isfinite(rep.ray.normalized_constant)) min_ray = std::min(min_ray, rep.ray.normalized_constant);
            min_comb = std::min(min_comb, rep.combined_constant);
            if (!(rep.combined_constant > 0.0) || !std::isfinite(rep.combined_constant))
                ctx.fail("combined Nash constant not positive at k=" + std::to_string(k));
            ++made;
        }
        if (made < count) ctx.warn("nash: only " + std::to_string(made) + " functions avoided the margin at k=" + std::to_string(k));
        summary.row(k, min_plane, min_ray, min_comb);
    }
    ctx.dir.write("nash.csv", t.str());
    ctx.dir.write("nash_summary.csv", summary.str());
}

void cmd_check_davies(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto shifts = cfg.get_ints("davies.alpha_shifts");
    const auto caps = cfg.get_reals("davies.caps");
    CsvTable t({"k", "alpha", "cap", "gamma", "bound", "holds", "rn_plus", "rn_minus", "argmax", "display_plane",
                "display_ray", "display_darning"});
    for (int k : ladder(cfg)) {
        const VdLattice lat = build_logged(ctx, lattice_params(cfg, k));
        for (auto s : shifts) {
            const double alpha = std::ldexp(1.0, k - static_cast<int>(s));
            for (double cap : caps) {
                const DaviesReport r = davies_weight_check(lat, alpha, cap);
                t.row(k, alpha, cap, r.gamma, r.bound, r.holds, r.rn_plus, r.rn_minus, to_string(lat.vertex(r.argmax)),
                      r.display_plane, r.display_ray, r.display_darning);
                if (!r.holds)
                    ctx.fail("energy bound Gamma <= sqrt(2) alpha fails at k=" + std::to_string(k) + ", alpha=" +
                             format_double(alpha) + ", n=" + format_double(cap));
            }
        }
    }
    ctx.dir.write("davies.csv", t.str());
}

void cmd_check_hk(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto times = cfg.get_reals("hk.times");
    const double tol = cfg.get_real("hk.tol");
    const std::string src = cfg.get_text("hk.sources");
    if (src != "default" && src != "all") throw ParameterError("hk.sources must be 'default' or 'all'");
    CsvTable t({"k", "t", "regime", "empirical_constant", "witness_x", "witness_y", "distance", "cells_checked",
                "cells_skipped", "diagonal_constant", "truncation_error"});
    json out = json::array();
    for (int k : ladder(cfg)) {
        const VdLattice lat = build_logged(ctx, lattice_params(cfg, k));
        HkOptions opts;
        opts.uniformization.budget = cfg.get_real("hk.budget");
        if (src == "default") opts.sources = default_hk_sources(lat);
        const HkReport r = hk_bound_constant(lat, times, tol, opts);
        for (const auto& tr : r.times) {
            for (int regime = 0; regime < 2; ++regime) {
                const HkWitness& w = regime == 0 ? tr.near : tr.far;
                const std::uint64_t cells = regime == 0 ? tr.cells_near : tr.cells_far;
                const char* name = regime == 0 ? "near" : "far";
                const std::string wx = cells ? to_string(lat.vertex(w.x)) : "";
                const std::string wy = cells ? to_string(lat.vertex(w.y)) : "";
                t.row(k, tr.t, name, w.ratio, wx, wy, w.distance, cells, tr.cells_skipped, tr.diagonal_constant,
                      tr.truncation_error);
                out.push_back({{"regime", name},
                               {"empirical_constant", num(w.ratio)},
                               {"witness_pair", cells ? json::array({wx, wy}) : json::array()},
                               {"t", tr.t},
                               {"k", k},
                               {"epsilon", lat.params().epsilon.str()},
                               {"cells_checked", cells},
                               {"cells_skipped", tr.cells_skipped}});
                if (!std::isfinite(w.ratio))
                    ctx.fail(std::string("heat-kernel constant not finite (") + name + ", k=" + std::to_string(k) + ")");
            }
        }
    }
    ctx.dir.write("hk.csv", t.str());
    ctx.write_json("hk.json", out);
}

TestFunctionSpec generator_spec(const RunConfig& cfg) {
    TestFunctionSpec s;
    s.profile = parse_profile_kind(cfg.get_text("generator.profile"));
    s.disc_constant = cfg.get_real("generator.disc_constant");
    s.support_radius = cfg.get_real("generator.support");
    s.inner_radius = cfg.get_real("generator.inner_radius");
    s.poly_coefficient = cfg.get_real("generator.poly_coefficient");
    const std::string cusp = cfg.get_text("generator.cusp");
    if (cusp != "none") {
        CuspSpec c;
        if (cusp == "ray") c.where = CuspSpec::Where::Ray;
        else if (cusp == "plane") c.where = CuspSpec::Where::Plane;
        else throw ParameterError("generator.cusp must be none, ray or plane");
        c.cx = cfg.get_real("generator.cusp_x");
        c.cy = cfg.get_real("generator.cusp_y");
        c.amplitude = cfg.get_real("generator.cusp_amplitude");
        c.gamma = cfg.get_real("generator.cusp_gamma");
        c.half_width = cfg.get_real("generator.cusp_width");
        s.cusp = c;
    }
    return s;
}

/// max |L_k f - 1| over vertices whose whole stencil lies where f = |x|^2.
double quadratic_exactness_error(const VdLattice& lat, const TestFunction& f, std::size_t& checked) {
    auto flat = [&](VertexIndex v) {
        const Point p = lat.embed(v);
        if (p.kind == VertexKind::Darning) return false;
        const double r = p.kind == VertexKind::Ray ? p.x : std::hypot(p.x, p.y);
        return r >= f.flat_inner() && r <= f.flat_outer();
    };
    double err = 0.0;
    checked = 0;
    for (VertexIndex v = 1; v < lat.size(); ++v) {
        if (lat.in_boundary_margin(v) || !flat(v)) continue;
        const auto row = lat.neighbors(v);
        if (!std::all_of(row.begin(), row.end(), flat) || row.size() != lat.degree(v)) continue;
        err = std::max(err, std::abs(apply_discrete_generator(lat, f, v) - apply_limit_generator(f, lat.embed(v))));
        ++checked;
    }
    return err;
}

void cmd_check_generator(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const TestFunctionSpec spec = generator_spec(cfg);
    const auto ks = ladder(cfg);
    std::vector<std::unique_ptr<VdLattice>> lats;
    std::vector<const VdLattice*> ptrs;
    for (int k : ks) {
        lats.push_back(std::make_unique<VdLattice>(build_logged(ctx, lattice_params(cfg, k))));
        ptrs.push_back(lats.back().get());
    }
    const TestFunction f = make_test_function(spec, lats.front()->epsilon());
    const ConvergenceReport rep = convergence_report(ptrs, f);
    const std::string window = lats.front()->params().window_radius.str();
    const std::string profile = to_string(spec.profile) + (spec.cusp ? "+cusp" : "");

    CsvTable t({"k", "sup_error", "max_abs_generator", "profile", "window", "argmax", "points", "ratio"});
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& row = rep.rows[i];
        t.row(row.k, row.sup_error, row.max_abs_generator, profile, window, to_string(row.argmax), row.points,
              i == 0 ? std::string() : format_double(rep.ratios[i - 1]));
        if (!std::isfinite(row.sup_error)) ctx.fail("generator error not finite at k=" + std::to_string(row.k));
        if (i > 0 && row.sup_error > 1.1 * rep.rows[i - 1].sup_error)
            ctx.fail("generator error grows from k=" + std::to_string(rep.rows[i - 1].k) + " to k=" +
                     std::to_string(row.k));
    }
    ctx.dir.write("generator.csv", t.str());

    if (spec.profile == ProfileKind::QuadraticWindow && !spec.cusp) {
        CsvTable q({"k", "flat_inner", "flat_outer", "vertices_checked", "max_error"});
        for (const auto& lat : lats) {
            std::size_t checked = 0;
            const double err = quadratic_exactness_error(*lat, f, checked);
            q.row(lat->k(), f.flat_inner(), f.flat_outer(), checked, err);
            if (err != 0.0) ctx.fail("quadratic exactness error " + format_double(err) + " at k=" + std::to_string(lat->k()));
        }
        ctx.dir.write("quadratic_exactness.csv", q.str());
    }

    if (cfg.get_bool("generator.occupation")) {
        const double T = cfg.get_real("generator.T");
        const double delta = cfg.get_real("generator.delta");
        const std::size_t n = count_arg(cfg, "generator.paths", 1000);
        CsvTable o({"k", "t", "estimate", "ci", "exact", "n", "seed"});
        for (const auto& lat : lats) {
            const std::uint64_t s = level_seed(cfg.get_uint("run.seed"), lat->k());
            const bool exact = std::ldexp(T, 2 * lat->k()) <= 1e5;
            const OccupationReport r = darning_occupation(*lat, T, delta, n, s, 9, exact);
            for (std::size_t i = 0; i < r.times.size(); ++i)
                o.row(lat->k(), r.times[i], r.mc[i].value, r.mc[i].half_width,
                      r.exact.empty() ? std::string() : format_double(r.exact[i]), n, s);
        }
        ctx.dir.write("occupation.csv", o.str());
    }
}

using Handler = void (*)(Context&);

Handler find_handler(const std::string& name) {
    static const std::map<std::string, Handler> table = {
        {"lattice-info", cmd_lattice_info}, {"kernel", cmd_kernel},
        {"simulate", cmd_simulate},         {"tightness", cmd_tightness},
        {"converge", cmd_converge},         {"check-iso", cmd_check_iso},
        {"check-nash", cmd_check_nash},     {"check-davies", cmd_check_davies},
        {"check-hk", cmd_check_hk},         {"check-generator", cmd_check_generator},
    };
    const auto it = table.find(name);
    return it == table.end() ? nullptr : it->second;
}

/// Lattice parameters of every level the command will build, checked before
/// any work starts.
void prevalidate(const std::string& subcommand, const RunConfig& cfg) {
    try {
        (void)parse_boundary_mode(cfg.get_text("lattice.boundary"));
        const bool single = subcommand == "lattice-info" || subcommand == "kernel" || subcommand == "simulate";
        if (single) {
            lattice_params(cfg, static_cast<int>(cfg.get_int("lattice.k"))).validate();
        } else {
            const auto ks = ladder(cfg);
            if (ks.empty()) throw ParameterError("lattice.ladder is empty");
            for (int k : ks) lattice_params(cfg, k).validate();
        }
    } catch (const ParameterError& e) {
        throw UsageError(std::string("invalid lattice configuration: ") + e.what());
    }
    if (cfg.get_int("run.threads") < 0) throw UsageError("run.threads must be >= 0");
}

}  // namespace

RunResult run_command(const std::string& subcommand, const RunConfig& cfg, const std::filesystem::path& out_dir,
                      std::ostream& log) {
    RunResult result;
    const Handler handler = find_handler(subcommand);
    if (!handler) {
        result.exit_code = kExitUsage;
        result.error = "unknown subcommand '" + subcommand + "'";
        return result;
    }
    const auto start = std::chrono::steady_clock::now();
    std::unique_ptr<RunDirectory> dir;
    try {
        prevalidate(subcommand, cfg);
        set_thread_count(static_cast<int>(cfg.get_int("run.threads")));
        dir = std::make_unique<RunDirectory>(out_dir);
        const auto sections = command_sections(subcommand);
        // The worker cap never changes results, so it stays out of the recorded config.
        auto recorded = cfg.subset(sections);
        recorded.erase("run.threads");
        std::string config_text = "# subcommand: " + subcommand + "\n";
        for (const auto& [k, v] : recorded) config_text += k + " = " + v + "\n";
        dir->write("config.txt", config_text);
        Context ctx{cfg, *dir, log, {}, {}};
        handler(ctx);
        result.warnings = ctx.warnings;
        result.failures = ctx.failures;
        result.exit_code = ctx.failures.empty() ? kExitOk : kExitAssertion;

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json m;
        m["schema_version"] = kSchemaVersion;
        m["tool"] = "vdwalk";
        m["version"] = kToolVersion;
        m["subcommand"] = subcommand;
        m["status"] = result.exit_code == kExitOk ? "ok" : "assertion_failed";
        m["exit_code"] = result.exit_code;
        m["master_seed"] = cfg.get_uint("run.seed");
        m["threads"] = thread_count();
        m["wall_time_seconds"] = wall;
        m["config"] = recorded;
        m["warnings"] = result.warnings;
        m["failures"] = result.failures;
        json outputs = json::array();
        for (const auto& e : dir->entries())
            outputs.push_back({{"file", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        m["outputs"] = outputs;
        write_file_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
    } catch (const std::exception& e) {
        if (dir) dir->discard();
        result.exit_code = kExitUsage;
        result.error = e.what();
        result.failures.clear();
    }
    return result;
}

RunResult replay_manifest(const std::filesystem::path& manifest, const std::filesystem::path& out_dir, int threads,
                          std::ostream& log) {
    RunResult bad;
    bad.exit_code = kExitUsage;
    json m;
    try {
        m = json::parse(read_file(manifest));
    } catch (const std::exception& e) {
        bad.error = "cannot read manifest " + manifest.string() + ": " + e.what();
        return bad;
    }
    if (!m.contains("subcommand") || !m.contains("config") || !m["config"].is_object()) {
        bad.error = "manifest " + manifest.string() + " lacks subcommand or config";
        return bad;
    }
    RunConfig cfg;
    try {
        for (const auto& [k, v] : m["config"].items()) cfg.set(k, v.get<std::string>());
        if (threads > 0) cfg.set("run.threads", std::to_string(threads));
    } catch (const std::exception& e) {
        bad.error = e.what();
        return bad;
    }
    return run_command(m["subcommand"].get<std::string>(), cfg, out_dir, log);
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Random walks on the darned varying-dimension lattice: exact kernels, Monte Carlo, inequality checks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    struct Options {
        std::string config_path;
        std::string out;
        std::vector<std::string> sets;
        std::map<std::string, std::string> flags;
    };
    std::map<std::string, Options> opts;

    const std::map<std::string, std::string> about = {
        {"lattice-info", "build one lattice, report sizes and invariant checks"},
        {"kernel", "exact transition law from x0 by uniformization"},
        {"simulate", "Monte Carlo paths: holding times, jump counts, law of X_T"},
        {"tightness", "sup-exceedance and modulus of continuity across the ladder"},
        {"check-iso", "isoperimetric scan of both weighted parts"},
        {"check-nash", "Nash-type constants of random bump functions"},
        {"check-davies", "energy-measure bound of the exponential weights"},
        {"check-hk", "empirical heat-kernel constants per regime"},
        {"check-generator", "discrete vs limit generator on test functions"},
        {"converge", "KS distances between laws of |X_T| on successive levels"},
    };
    for (const auto& name : subcommands()) {
        const auto d = about.find(name);
        auto* sub = app.add_subcommand(name, d == about.end() ? std::string() : d->second);
        Options& o = opts[name];
        sub->add_option("--config", o.config_path, "config file (key = value)");
        sub->add_option("--out", o.out, "run directory")->required();
        sub->add_option("--set", o.sets, "override any config key: key=value");
        for (const auto& section : command_sections(name)) {
            for (const auto& spec : schema()) {
                const auto dot = spec.key.find('.');
                if (dot == std::string::npos || spec.key.substr(0, dot) != section) continue;
                std::string flag = spec.key.substr(dot + 1);
                std::string dashed = flag;
                std::replace(dashed.begin(), dashed.end(), '_', '-');
                std::string names = "--" + flag + (dashed != flag ? ",--" + dashed : "");
                sub->add_option_function<std::string>(
                    names, [&o, key = spec.key](const std::string& v) { o.flags[key] = v; }, spec.help);
            }
        }
    }
    std::string manifest_path, replay_out;
    int replay_threads = 0;
    auto* replay = app.add_subcommand("replay", "re-run the configuration recorded in a manifest");
    replay->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
    replay->add_option("--out", replay_out, "run directory")->required();
    replay->add_option("--threads", replay_threads, "worker cap for the re-run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    RunResult r;
    std::string out;
    if (replay->parsed()) {
        out = replay_out;
        r = replay_manifest(manifest_path, replay_out, replay_threads, std::cerr);
    } else {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        const Options& o = opts[name];
        out = o.out;
        RunConfig cfg;
        try {
            if (!o.config_path.empty()) cfg.merge_text(read_file(o.config_path), o.config_path);
            for (const auto& [k, v] : o.flags) cfg.set(k, v);
            for (const auto& s : o.sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
                cfg.set(s.substr(0, eq), s.substr(eq + 1));
            }
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitUsage;
        }
        r = run_command(name, cfg, o.out, std::cerr);
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& f : r.failures) std::cerr << "check failed: " << f << "\n";
    if (r.exit_code == kExitUsage) std::cerr << "error: " << r.error << "\n";
    else std::cerr << "wrote " << out << "/manifest.json\n";
    return r.exit_code;
}

}  // namespace vdwalk::cli
