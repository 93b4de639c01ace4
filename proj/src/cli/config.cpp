#include "vdwalk/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace vdwalk::cli {

namespace {

using VT = ValueType;

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(',', start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    s = trim(s);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

bool parse_uint(std::string_view s, std::uint64_t& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '-') return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

bool parse_real(std::string_view s, double& out) {
    const std::string t(trim(s));
    if (t.empty()) return false;
    if (t == "inf" || t == "+inf") {
        out = INFINITY;
        return true;
    }
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && !std::isnan(out);
}

bool parse_bool(std::string_view s, bool& out) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
    return false;
}

std::string type_name(VT t) {
    switch (t) {
        case VT::Int: return "integer";
        case VT::UInt: return "non-negative integer";
        case VT::Real: return "real";
        case VT::Dyadic: return "dyadic rational (p/2^q)";
        case VT::Text: return "text";
        case VT::Bool: return "boolean";
        case VT::RealList: return "comma-separated reals";
        case VT::IntList: return "comma-separated integers";
        case VT::TextList: return "comma-separated names";
    }
    return "?";
}

void check_value(const KeySpec& spec, const std::string& value) {
    bool ok = true;
    std::int64_t i = 0;
    std::uint64_t u = 0;
    double d = 0.0;
    bool b = false;
    switch (spec.type) {
        case VT::Int: ok = parse_int(value, i); break;
        case VT::UInt: ok = parse_uint(value, u); break;
        case VT::Real: ok = parse_real(value, d); break;
        case VT::Bool: ok = parse_bool(value, b); break;
        case VT::Text: ok = !trim(value).empty(); break;
        case VT::Dyadic:
            try {
                (void)Dyadic::parse(trim(value));
            } catch (const std::exception&) {
                ok = false;
            }
            break;
        case VT::RealList: {
            const auto items = split_list(value);
            ok = !items.empty() && std::all_of(items.begin(), items.end(), [&](const std::string& x) { return parse_real(x, d); });
            break;
        }
        case VT::IntList: {
            const auto items = split_list(value);
            ok = !items.empty() && std::all_of(items.begin(), items.end(), [&](const std::string& x) { return parse_int(x, i); });
            break;
        }
        case VT::TextList: {
            const auto items = split_list(value);
            ok = !items.empty() && std::none_of(items.begin(), items.end(), [](const std::string& x) { return x.empty(); });
            break;
        }
    }
    if (!ok) throw UsageError("config key '" + spec.key + "': expected " + type_name(spec.type) + ", got '" + value + "'");
}

std::string section_of(const std::string& key) {
    const auto dot = key.find('.');
    return dot == std::string::npos ? std::string() : key.substr(0, dot);
}

}  // namespace

const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> keys = {
        {"schema_version", VT::Int, "1", "config schema version"},
        {"run.seed", VT::UInt, "20261016", "master seed of every random stream"},
        {"run.threads", VT::Int, "0", "worker cap (0 = runtime default); never changes results"},

        {"lattice.k", VT::Int, "5", "scale 2^-k of single-lattice commands"},
        {"lattice.ladder", VT::IntList, "5,6,7", "levels of ladder commands"},
        {"lattice.epsilon", VT::Dyadic, "1/8", "disc radius"},
        {"lattice.window", VT::Dyadic, "3/4", "max-norm window radius; must exceed 4 epsilon"},
        {"lattice.boundary", VT::Text, "induced", "induced or absorbing"},
        {"lattice.edges_csv", VT::Bool, "false", "lattice-info: also write the edge list"},

        {"kernel.x0", VT::Text, "darning", "start vertex: darning, ray:N or plane:I:J"},
        {"kernel.times", VT::RealList, "0.01", "times of the transient law"},
        {"kernel.tol", VT::Real, "1e-10", "Poisson truncation tolerance"},
        {"kernel.budget", VT::Real, "100000", "largest lambda_k t solved exactly"},
        {"kernel.mc_paths", VT::UInt, "100000", "paths used when a time is over budget"},

        {"simulate.x0", VT::Text, "darning", "start vertex"},
        {"simulate.T", VT::Real, "0.01", "horizon"},
        {"simulate.paths", VT::UInt, "100000", "number of paths"},
        {"simulate.compare_exact", VT::Bool, "true", "compare the law of X_T with the exact kernel"},
        {"simulate.tol", VT::Real, "1e-10", "exact kernel tolerance"},
        {"simulate.dump_paths", VT::UInt, "0", "write the first N full trajectories"},

        {"tightness.x0", VT::Text, "darning", "start vertex"},
        {"tightness.T", VT::Real, "0.25", "horizon"},
        {"tightness.levels", VT::RealList, "0.25,0.5,0.75,1", "exceedance levels M"},
        {"tightness.delta", VT::Real, "0.01", "block length of the modulus"},
        {"tightness.thresholds", VT::RealList, "0.1,0.2,0.3,0.4", "modulus thresholds delta_1"},
        {"tightness.paths", VT::UInt, "20000", "paths per level"},

        {"converge.x0", VT::Text, "darning", "start vertex"},
        {"converge.T", VT::Real, "0.25", "horizon of the compared laws"},
        {"converge.paths", VT::UInt, "20000", "paths per level"},

        {"iso.parts", VT::TextList, "plane,ray", "weighted parts to scan"},
        {"iso.exhaustive_max_size", VT::Int, "4", "largest exhaustively enumerated set"},
        {"iso.random_sets", VT::UInt, "1000", "random connected sets"},
        {"iso.random_max_size", VT::UInt, "1000", "largest random set"},

        {"nash.functions", VT::UInt, "100", "random bump functions per level"},
        {"nash.max_radius", VT::Real, "0.25", "largest bump radius"},

        {"davies.alpha_shifts", VT::IntList, "3,2,1", "alpha = 2^(k-s) for each s"},
        {"davies.caps", VT::RealList, "2,10,inf", "caps n of the weight (inf = uncapped)"},

        {"hk.times", VT::RealList, "0.01,0.05,0.1", "times"},
        {"hk.tol", VT::Real, "1e-10", "kernel tolerance"},
        {"hk.sources", VT::Text, "default", "default or all"},
        {"hk.budget", VT::Real, "100000", "largest lambda_k t solved exactly"},

        {"generator.profile", VT::Text, "bump", "bump, quadratic_window or radial_poly"},
        {"generator.disc_constant", VT::Real, "1", "value on the disc"},
        {"generator.support", VT::Real, "0.6", "support radius"},
        {"generator.inner_radius", VT::Real, "0", "where the profile leaves the disc value (0 = epsilon)"},
        {"generator.poly_coefficient", VT::Real, "1", "radial_poly coefficient"},
        {"generator.cusp", VT::Text, "none", "none, ray or plane"},
        {"generator.cusp_x", VT::Real, "0.375", "cusp centre (ray coordinate or plane x)"},
        {"generator.cusp_y", VT::Real, "0", "cusp centre plane y"},
        {"generator.cusp_amplitude", VT::Real, "200", "cusp amplitude"},
        {"generator.cusp_gamma", VT::Real, "0.1", "cusp exponent offset in (0, 1)"},
        {"generator.cusp_width", VT::Real, "0.3", "cusp half width"},
        {"generator.occupation", VT::Bool, "false", "also estimate the darning occupation"},
        {"generator.T", VT::Real, "0.25", "occupation horizon"},
        {"generator.delta", VT::Real, "0.05", "occupation delta"},
        {"generator.paths", VT::UInt, "20000", "occupation paths"},
    };
    return keys;
}

const KeySpec* find_key(std::string_view key) {
    for (const auto& k : schema())
        if (k.key == key) return &k;
    return nullptr;
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"lattice-info", "kernel",      "simulate",     "tightness",
                                                   "check-iso",    "check-nash",  "check-davies", "check-hk",
                                                   "check-generator", "converge"};
    return names;
}

std::vector<std::string> command_sections(std::string_view subcommand) {
    std::vector<std::string> s = {"", "run", "lattice"};
    if (subcommand == "kernel") s.push_back("kernel");
    else if (subcommand == "simulate") s.push_back("simulate");
    else if (subcommand == "tightness") s.push_back("tightness");
    else if (subcommand == "converge") s.push_back("converge");
    else if (subcommand == "check-iso") s.push_back("iso");
    else if (subcommand == "check-nash") s.push_back("nash");
    else if (subcommand == "check-davies") s.push_back("davies");
    else if (subcommand == "check-hk") s.push_back("hk");
    else if (subcommand == "check-generator") s.push_back("generator");
    return s;
}

RunConfig::RunConfig() {
    for (const auto& k : schema()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw UsageError("unknown config key '" + key + "'");
    const std::string v(trim(value));
    check_value(*spec, v);
    if (key == "schema_version" && std::stoll(v) != kSchemaVersion)
        throw UsageError("unsupported schema_version " + v + " (this build reads " + std::to_string(kSchemaVersion) + ")");
    values_[key] = v;
}

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = std::string(origin) + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw UsageError(where + ": unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw UsageError(where + ": expected 'key = value'");
        std::string key(trim(line.substr(0, eq)));
        if (!section.empty()) key = section + "." + key;
        try {
            set(key, std::string(trim(line.substr(eq + 1))));
        } catch (const UsageError& e) {
            throw UsageError(where + ": " + e.what());
        }
    }
}

const std::string& RunConfig::raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    std::int64_t v = 0;
    parse_int(raw(key), v);
    return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
    std::uint64_t v = 0;
    parse_uint(raw(key), v);
    return v;
}

double RunConfig::get_real(const std::string& key) const {
    double v = 0.0;
    parse_real(raw(key), v);
    return v;
}

Dyadic RunConfig::get_dyadic(const std::string& key) const { return Dyadic::parse(raw(key)); }

bool RunConfig::get_bool(const std::string& key) const {
    bool v = false;
    parse_bool(raw(key), v);
    return v;
}

std::vector<double> RunConfig::get_reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : split_list(raw(key))) {
        double d = 0.0;
        parse_real(s, d);
        out.push_back(d);
    }
    return out;
}

std::vector<std::int64_t> RunConfig::get_ints(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& s : split_list(raw(key))) {
        std::int64_t v = 0;
        parse_int(s, v);
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> RunConfig::get_texts(const std::string& key) const { return split_list(raw(key)); }

std::map<std::string, std::string> RunConfig::subset(const std::vector<std::string>& sections) const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : values_)
        if (sections.empty() || std::find(sections.begin(), sections.end(), section_of(k)) != sections.end())
            out[k] = v;
    return out;
}

std::string RunConfig::to_text(const std::vector<std::string>& sections) const {
    std::ostringstream out;
    for (const auto& [k, v] : subset(sections)) out << k << " = " << v << "\n";
    return out.str();
}

}  // namespace vdwalk::cli
