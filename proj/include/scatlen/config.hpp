#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "scatlen/capacitory.hpp"
#include "scatlen/error.hpp"
#include "scatlen/grid.hpp"
#include "scatlen/stable_mc.hpp"

namespace scatlen {

using Json = nlohmann::json;

struct ProblemConfig {
    int dim = 1;
    double alpha = 0.6;
    Box box{{-4.0}, {4.0}};
    std::size_t n = 256;

    GridSpec grid() const { return GridSpec(dim, alpha, box, n); }
};

struct McBlock {
    double step = 0.01;
    double horizon = 50.0;
    double halt_radius = 200.0;
    std::size_t paths = 100000;
    std::optional<std::vector<double>> start;
};

struct SpectralBlock {
    Box omega{{-1.0}, {1.0}};
    std::size_t n = 256;
};

struct CapacityBlock {
    std::optional<PotentialSpec> set;  // defaults to the support of the potential
    std::vector<double> multipliers{10.0, 100.0, 1000.0, 10000.0};
};

struct OutputBlock {
    std::string dir;        // empty: CSV to standard output
    std::string cache_dir;  // empty: no kernel cache
};

struct RunConfig {
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    ProblemConfig problem;
    PotentialSpec potential = PotentialSpec::gaussian({0.0}, 0.5, 1.0);
    SolverOptions solver;
    McBlock mc;
    SpectralBlock spectral;
    CapacityBlock capacity;
    double scaling_r = 2.0;
    OutputBlock output;

    McConfig mc_config() const {
        McConfig c;
        c.alpha = problem.alpha;
        c.dim = problem.dim;
        c.step = mc.step;
        c.horizon = mc.horizon;
        c.halt_radius = mc.halt_radius;
        c.paths = mc.paths;
        c.seed = seed;
        c.start = mc.start;
        c.threads = threads;
        return c;
    }
};

namespace config_detail {

/// Reads members of one JSON object, remembering which were used so the
/// rest can be rejected.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

    bool has(const std::string& name) const { return j_.contains(name); }

    const Json& at(const std::string& name) {
        seen_.insert(name);
        if (!j_.contains(name)) throw ConfigError(key(name), "missing required key");
        return j_.at(name);
    }

    const Json* find(const std::string& name) {
        seen_.insert(name);
        auto it = j_.find(name);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline double number(const Json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError(key, "expected a number");
    return j.get<double>();
}

inline std::uint64_t unsigned_int(const Json& j, const std::string& key) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw ConfigError(key, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline std::vector<double> numbers(const Json& j, const std::string& key) {
    if (!j.is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], key + "[" + std::to_string(i) + "]"));
    return out;
}

inline Box box(const Json& j, const std::string& key) {
    Reader r(j, key);
    Box b{numbers(r.at("lower"), r.key("lower")), numbers(r.at("upper"), r.key("upper"))};
    r.finish();
    if (b.lower.size() != b.upper.size() || b.lower.empty()) throw ConfigError(key, "corner dimensions differ");
    return b;
}

template <typename Fn>
void guarded(const std::string& key, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace config_detail

/// Potential shapes:
///   {"type": "gaussian", "center": [..], "width": w, "amplitude": a}
///   {"type": "box", "lower": [..], "upper": [..], "amplitude": a}
///   {"type": "ball", "center": [..], "radius": r, "amplitude": a}
///   {"type": "sum", "terms": [ ... ]}
///   {"type": "scale", "factor": f, "of": { ... }}
inline PotentialSpec parse_potential(const Json& j, const std::string& key) {
    using namespace config_detail;
    Reader r(j, key);
    const Json& type = r.at("type");
    if (!type.is_string()) throw ConfigError(r.key("type"), "expected a string");
    const std::string t = type.get<std::string>();
    auto amp = [&] { return r.find("amplitude") ? number(j.at("amplitude"), r.key("amplitude")) : 1.0; };
    std::optional<PotentialSpec> out;
    if (t == "gaussian") {
        out = PotentialSpec::gaussian(numbers(r.at("center"), r.key("center")), number(r.at("width"), r.key("width")), amp());
    } else if (t == "box") {
        Box b{numbers(r.at("lower"), r.key("lower")), numbers(r.at("upper"), r.key("upper"))};
        out = PotentialSpec::box_indicator(std::move(b), amp());
    } else if (t == "ball") {
        out = PotentialSpec::ball_indicator(numbers(r.at("center"), r.key("center")), number(r.at("radius"), r.key("radius")),
                                            amp());
    } else if (t == "sum") {
        const Json& terms = r.at("terms");
        if (!terms.is_array() || terms.empty()) throw ConfigError(r.key("terms"), "expected a nonempty array");
        std::vector<PotentialSpec> parts;
        for (std::size_t i = 0; i < terms.size(); ++i)
            parts.push_back(parse_potential(terms[i], r.key("terms") + "[" + std::to_string(i) + "]"));
        out = PotentialSpec::sum(std::move(parts));
    } else if (t == "scale") {
        const double f = number(r.at("factor"), r.key("factor"));
        out = PotentialSpec::scaled(f, parse_potential(r.at("of"), r.key("of")));
    } else {
        throw ConfigError(r.key("type"), "unknown potential type '" + t + "'");
    }
    r.finish();
    return *out;
}

inline Json potential_to_json(const PotentialSpec& spec) {
    return std::visit(
        [](const auto& s) -> Json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GaussianShape>) {
                return {{"type", "gaussian"}, {"center", s.center}, {"width", s.width}, {"amplitude", s.amplitude}};
            } else if constexpr (std::is_same_v<T, BoxIndicatorShape>) {
                return {{"type", "box"}, {"lower", s.box.lower}, {"upper", s.box.upper}, {"amplitude", s.amplitude}};
            } else if constexpr (std::is_same_v<T, BallIndicatorShape>) {
                return {{"type", "ball"}, {"center", s.center}, {"radius", s.radius}, {"amplitude", s.amplitude}};
            } else if constexpr (std::is_same_v<T, SumShape>) {
                Json terms = Json::array();
                for (const auto& t : s.terms) terms.push_back(potential_to_json(t));
                return {{"type", "sum"}, {"terms", terms}};
            } else {
                return {{"type", "scale"}, {"factor", s.factor}, {"of", potential_to_json(s.inner.front())}};
            }
        },
        spec.node());
}

inline Json box_to_json(const Box& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

/// Parses and validates a run configuration. Only the problem block and the
/// potential are required; everything else has defaults.
inline RunConfig parse_config(const Json& j) {
    using namespace config_detail;
    RunConfig cfg;
    Reader root(j, "");
    if (auto* s = root.find("seed")) cfg.seed = unsigned_int(*s, "seed");
    if (auto* t = root.find("threads")) cfg.threads = static_cast<unsigned>(std::max<std::uint64_t>(1, unsigned_int(*t, "threads")));

    {
        Reader r(root.at("problem"), "problem");
        cfg.problem.dim = static_cast<int>(unsigned_int(r.at("dim"), r.key("dim")));
        cfg.problem.alpha = number(r.at("alpha"), r.key("alpha"));
        cfg.problem.box = box(r.at("box"), r.key("box"));
        cfg.problem.n = unsigned_int(r.at("n"), r.key("n"));
        r.finish();
        guarded("problem", [&] { (void)cfg.problem.grid(); });
        if (cfg.problem.box.dim() != cfg.problem.dim) throw ConfigError("problem.box", "dimension differs from problem.dim");
    }

    cfg.potential = parse_potential(root.at("potential"), "potential");
    guarded("potential", [&] { cfg.potential.validate(cfg.problem.dim); });

    if (auto* s = root.find("solver")) {
        Reader r(*s, "solver");
        if (auto* x = r.find("tolerance")) cfg.solver.tolerance = number(*x, r.key("tolerance"));
        if (auto* x = r.find("max_iterations"))
            cfg.solver.max_iterations = static_cast<int>(unsigned_int(*x, r.key("max_iterations")));
        if (auto* x = r.find("min_contraction")) cfg.solver.min_contraction = number(*x, r.key("min_contraction"));
        r.finish();
        guarded("solver", [&] { cfg.solver.validate(); });
    }

    if (auto* s = root.find("mc")) {
        Reader r(*s, "mc");
        if (auto* x = r.find("step")) cfg.mc.step = number(*x, r.key("step"));
        if (auto* x = r.find("horizon")) cfg.mc.horizon = number(*x, r.key("horizon"));
        if (auto* x = r.find("halt_radius")) cfg.mc.halt_radius = number(*x, r.key("halt_radius"));
        if (auto* x = r.find("paths")) cfg.mc.paths = unsigned_int(*x, r.key("paths"));
        if (auto* x = r.find("start"); x && !x->is_null()) cfg.mc.start = numbers(*x, r.key("start"));
        r.finish();
    }
    guarded("mc", [&] { cfg.mc_config().validate(); });

    if (auto* s = root.find("spectral")) {
        Reader r(*s, "spectral");
        if (auto* x = r.find("omega")) cfg.spectral.omega = box(*x, r.key("omega"));
        if (auto* x = r.find("n")) cfg.spectral.n = unsigned_int(*x, r.key("n"));
        r.finish();
    }
    if (cfg.spectral.omega.dim() != cfg.problem.dim) {
        if (root.has("spectral")) throw ConfigError("spectral.omega", "dimension differs from problem.dim");
        cfg.spectral.omega = cube(cfg.problem.dim, -1.0, 1.0);
    }
    guarded("spectral", [&] { (void)GridSpec(cfg.problem.dim, cfg.problem.alpha, cfg.spectral.omega, cfg.spectral.n); });

    if (auto* s = root.find("capacity")) {
        Reader r(*s, "capacity");
        if (auto* x = r.find("set")) {
            cfg.capacity.set = parse_potential(*x, r.key("set"));
            guarded(r.key("set"), [&] { cfg.capacity.set->validate(cfg.problem.dim); });
        }
        if (auto* x = r.find("multipliers")) cfg.capacity.multipliers = numbers(*x, r.key("multipliers"));
        r.finish();
        for (std::size_t i = 0; i < cfg.capacity.multipliers.size(); ++i)
            if (!(cfg.capacity.multipliers[i] > 0.0) || (i > 0 && !(cfg.capacity.multipliers[i] > cfg.capacity.multipliers[i - 1])))
                throw ConfigError("capacity.multipliers", "must be positive and increasing");
    }

    if (auto* s = root.find("scaling")) {
        Reader r(*s, "scaling");
        if (auto* x = r.find("r")) cfg.scaling_r = number(*x, r.key("r"));
        r.finish();
        if (!(cfg.scaling_r > 0.0)) throw ConfigError("scaling.r", "must be positive");
    }

    if (auto* s = root.find("output")) {
        Reader r(*s, "output");
        for (const char* name : {"dir", "cache_dir"}) {
            if (auto* x = r.find(name)) {
                if (!x->is_string()) throw ConfigError(r.key(name), "expected a string");
                (std::string(name) == "dir" ? cfg.output.dir : cfg.output.cache_dir) = x->get<std::string>();
            }
        }
        r.finish();
    }
    root.finish();
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot open config file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully resolved configuration, defaults included.
inline Json config_to_json(const RunConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["problem"] = {{"dim", c.problem.dim}, {"alpha", c.problem.alpha}, {"box", box_to_json(c.problem.box)}, {"n", c.problem.n}};
    j["potential"] = potential_to_json(c.potential);
    j["solver"] = {{"tolerance", c.solver.tolerance},
                   {"max_iterations", c.solver.max_iterations},
                   {"min_contraction", c.solver.min_contraction}};
    j["mc"] = {{"step", c.mc.step},
               {"horizon", c.mc.horizon},
               {"halt_radius", c.mc.halt_radius},
               {"paths", c.mc.paths},
               {"start", c.mc.start ? Json(*c.mc.start) : Json(nullptr)}};
    j["spectral"] = {{"omega", box_to_json(c.spectral.omega)}, {"n", c.spectral.n}};
    j["capacity"] = {{"multipliers", c.capacity.multipliers}};
    if (c.capacity.set) j["capacity"]["set"] = potential_to_json(*c.capacity.set);
    j["scaling"] = {{"r", c.scaling_r}};
    j["output"] = {{"dir", c.output.dir}, {"cache_dir", c.output.cache_dir}};
    return j;
}

/// Hash of the resolved configuration without the worker count and output
/// locations, which must not influence results.
inline std::string config_hash(const RunConfig& c) {
    Json j = config_to_json(c);
    j.erase("threads");
    j.erase("output");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
    return os.str();
}

}  // namespace scatlen
