#include "flowecon/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace flowecon {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
    throw ConfigError(origin + " line " + std::to_string(line) + ": " + what);
}

double parse_double(const IniValue& v, const std::string& origin, const char* key) {
    const char* begin = v.value.c_str();
    char* end = nullptr;
    const double x = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(x))
        fail(origin, v.line, std::string("bad number for ") + key + ": '" + v.value + "'");
    return x;
}

long long parse_int(const IniValue& v, const std::string& origin, const char* key) {
    const char* begin = v.value.c_str();
    char* end = nullptr;
    const long long x = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0')
        fail(origin, v.line, std::string("bad integer for ") + key + ": '" + v.value + "'");
    return x;
}

std::uint64_t parse_u64(const IniValue& v, const std::string& origin, const char* key) {
    const char* begin = v.value.c_str();
    char* end = nullptr;
    const unsigned long long x = std::strtoull(begin, &end, 0);  // accepts 0x...
    if (end == begin || *end != '\0' || v.value[0] == '-')
        fail(origin, v.line, std::string("bad seed for ") + key + ": '" + v.value + "'");
    return x;
}

bool parse_bool(const IniValue& v, const std::string& origin, const char* key) {
    if (v.value == "true" || v.value == "1" || v.value == "yes") return true;
    if (v.value == "false" || v.value == "0" || v.value == "no") return false;
    fail(origin, v.line, std::string("bad boolean for ") + key + ": '" + v.value +
                             "' (use true/false)");
}

/// Tracks which keys a section consumed so leftovers can be reported with
/// their own line numbers.
struct SectionReader {
    const std::string& origin;
    const std::map<std::string, IniValue>* keys;  // null when section absent
    std::map<std::string, bool> seen;

    const IniValue* get(const std::string& key) {
        if (!keys) return nullptr;
        auto it = keys->find(key);
        if (it == keys->end()) return nullptr;
        seen[key] = true;
        return &it->second;
    }
    void finish(const std::string& section) {
        if (!keys) return;
        for (const auto& [key, val] : *keys)
            if (!seen.count(key))
                fail(origin, val.line,
                     "unknown key '" + key + "' in section [" + section + "]");
    }
};

}  // namespace

IniFile parse_ini(const std::string& text, const std::string& origin) {
    IniFile ini;
    ini.origin = origin;
    std::istringstream stream(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(stream, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                fail(origin, lineno, "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty section name");
            ini.sections[section];  // a section may legitimately stay empty
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(origin, lineno, "expected key = value, got '" + line + "'");
        if (section.empty())
            fail(origin, lineno, "key outside any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, lineno, "empty key");
        auto& sec = ini.sections[section];
        if (sec.count(key))
            fail(origin, lineno, "duplicate key '" + key + "' in section [" + section +
                                     "] (first at line " + std::to_string(sec[key].line) + ")");
        sec[key] = IniValue{value, lineno};
    }
    return ini;
}

IniFile parse_ini_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config file " + path);
    std::ostringstream body;
    body << file.rdbuf();
    return parse_ini(body.str(), path);
}

FaultKind fault_from_string(const std::string& name) {
    if (name == "none") return FaultKind::none;
    if (name == "rate_shift") return FaultKind::rate_shift;
    if (name == "h_scale") return FaultKind::h_scale;
    if (name == "weight_perturb") return FaultKind::weight_perturb;
    if (name == "pref_d_perturb") return FaultKind::pref_d_perturb;
    throw ConfigError("unknown fault '" + name +
                      "' (known: none, rate_shift, h_scale, weight_perturb, pref_d_perturb)");
}

std::string to_string(FaultKind fault) {
    switch (fault) {
        case FaultKind::none: return "none";
        case FaultKind::rate_shift: return "rate_shift";
        case FaultKind::h_scale: return "h_scale";
        case FaultKind::weight_perturb: return "weight_perturb";
        case FaultKind::pref_d_perturb: return "pref_d_perturb";
    }
    return "none";
}

RunConfig config_from_ini(const IniFile& ini) {
    static const char* known_sections[] = {"scenario", "flow", "equilibrium",
                                           "verify", "output"};
    for (const auto& [name, keys] : ini.sections) {
        bool known = false;
        for (const char* s : known_sections) known |= name == s;
        if (!known) {
            const int line = keys.empty() ? 1 : keys.begin()->second.line;
            fail(ini.origin, line, "unknown section [" + name + "]");
        }
    }

    RunConfig cfg;
    auto section = [&](const char* name) {
        auto it = ini.sections.find(name);
        return SectionReader{ini.origin,
                             it == ini.sections.end() ? nullptr : &it->second};
    };

    {
        SectionReader s = section("scenario");
        if (const IniValue* v = s.get("name")) cfg.scenario = v->value;
        s.finish("scenario");
    }
    if (cfg.scenario.empty())
        throw ConfigError(ini.origin + ": missing required key 'name' in [scenario]");

    {
        SectionReader s = section("flow");
        if (const IniValue* v = s.get("t0")) cfg.t0 = parse_double(*v, ini.origin, "t0");
        if (const IniValue* v = s.get("horizon")) {
            cfg.horizon = parse_double(*v, ini.origin, "horizon");
            if (*cfg.horizon <= 0.0) fail(ini.origin, v->line, "horizon must be positive");
        }
        if (const IniValue* v = s.get("steps")) {
            const long long n = parse_int(*v, ini.origin, "steps");
            if (n < 1) fail(ini.origin, v->line, "steps must be >= 1");
            cfg.steps = int(n);
        }
        if (const IniValue* v = s.get("paths")) {
            const long long n = parse_int(*v, ini.origin, "paths");
            if (n < 1) fail(ini.origin, v->line, "paths must be >= 1");
            cfg.paths = int(n);
        }
        if (const IniValue* v = s.get("seed")) cfg.seed = parse_u64(*v, ini.origin, "seed");
        if (const IniValue* v = s.get("antithetic"))
            cfg.antithetic = parse_bool(*v, ini.origin, "antithetic");
        s.finish("flow");
    }

    {
        SectionReader s = section("equilibrium");
        if (const IniValue* v = s.get("gamma_lower")) {
            cfg.gamma_lower = parse_double(*v, ini.origin, "gamma_lower");
            if (*cfg.gamma_lower < 0.0)
                fail(ini.origin, v->line, "gamma_lower must be non-negative");
        }
        if (const IniValue* v = s.get("truncate_tol")) {
            cfg.truncate_tol = parse_double(*v, ini.origin, "truncate_tol");
            if (*cfg.truncate_tol <= 0.0)
                fail(ini.origin, v->line, "truncate_tol must be positive");
        }
        if (const IniValue* v = s.get("rescale_wealth"))
            cfg.rescale_wealth = parse_bool(*v, ini.origin, "rescale_wealth");
        s.finish("equilibrium");
    }

    {
        SectionReader s = section("verify");
        if (const IniValue* v = s.get("flow")) cfg.check_flow = parse_bool(*v, ini.origin, "flow");
        if (const IniValue* v = s.get("aggregation"))
            cfg.check_aggregation = parse_bool(*v, ini.origin, "aggregation");
        if (const IniValue* v = s.get("clearing"))
            cfg.check_clearing = parse_bool(*v, ini.origin, "clearing");
        if (const IniValue* v = s.get("invariants"))
            cfg.check_invariants = parse_bool(*v, ini.origin, "invariants");
        if (const IniValue* v = s.get("no_arbitrage"))
            cfg.check_no_arbitrage = parse_bool(*v, ini.origin, "no_arbitrage");
        if (const IniValue* v = s.get("wealth_volatility"))
            cfg.check_volatility = parse_bool(*v, ini.origin, "wealth_volatility");
        if (const IniValue* v = s.get("preferences"))
            cfg.check_preferences = parse_bool(*v, ini.origin, "preferences");
        if (const IniValue* v = s.get("fault")) {
            try {
                cfg.fault = fault_from_string(v->value);
            } catch (const ConfigError& e) {
                fail(ini.origin, v->line, e.what());
            }
        }
        s.finish("verify");
    }

    {
        SectionReader s = section("output");
        if (const IniValue* v = s.get("dir")) cfg.out_dir = v->value;
        s.finish("output");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    return config_from_ini(parse_ini_file(path));
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ResolvedRun resolve(const RunConfig& cfg) {
    ResolvedRun run;
    run.cfg = cfg;
    run.scenario = scenario_by_name(cfg.scenario);
    Scenario& sc = run.scenario;

    if (cfg.t0) sc.grid.t0 = *cfg.t0;
    if (cfg.horizon) sc.grid.horizon = *cfg.horizon;
    if (cfg.steps) sc.grid.steps = *cfg.steps;
    if (cfg.gamma_lower) {
        if (*cfg.gamma_lower > sc.impatience_inf + 1e-15)
            throw ConfigError("gamma_lower " + std::to_string(*cfg.gamma_lower) +
                              " is above the lowest impatience the scenario '" + sc.name +
                              "' can reach (" + std::to_string(sc.impatience_inf) + ")");
        sc.inputs.gamma_lower = *cfg.gamma_lower;
    }
    if (cfg.truncate_tol) sc.inputs.truncate_tol = *cfg.truncate_tol;
    if (cfg.rescale_wealth) sc.inputs.rescale_wealth = *cfg.rescale_wealth;

    run.n_paths = cfg.paths ? *cfg.paths : sc.n_paths;
    if (!cfg.seed)
        throw ConfigError("no seed given: set seed in [flow] or pass --seed "
                          "(runs are never seeded from the clock)");
    run.seed = *cfg.seed;
    run.antithetic = cfg.antithetic ? *cfg.antithetic : sc.antithetic;
    sc.antithetic = run.antithetic;
    sc.n_paths = run.n_paths;

    auto g17 = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream echo;
    echo << "equilibrium.gamma_lower=" << g17(sc.inputs.gamma_lower) << '\n'
         << "equilibrium.rescale_wealth=" << (sc.inputs.rescale_wealth ? "true" : "false")
         << '\n'
         << "equilibrium.truncate_tol=" << g17(sc.inputs.truncate_tol) << '\n'
         << "flow.antithetic=" << (run.antithetic ? "true" : "false") << '\n'
         << "flow.horizon=" << g17(sc.grid.horizon) << '\n'
         << "flow.paths=" << run.n_paths << '\n'
         << "flow.seed=" << run.seed << '\n'
         << "flow.steps=" << sc.grid.steps << '\n'
         << "flow.t0=" << g17(sc.grid.t0) << '\n'
         << "scenario.name=" << sc.name << '\n'
         << "verify.aggregation=" << (cfg.check_aggregation ? "true" : "false") << '\n'
         << "verify.clearing=" << (cfg.check_clearing ? "true" : "false") << '\n'
         << "verify.fault=" << to_string(cfg.fault) << '\n'
         << "verify.flow=" << (cfg.check_flow ? "true" : "false") << '\n'
         << "verify.invariants=" << (cfg.check_invariants ? "true" : "false") << '\n'
         << "verify.no_arbitrage=" << (cfg.check_no_arbitrage ? "true" : "false") << '\n'
         << "verify.preferences=" << (cfg.check_preferences ? "true" : "false") << '\n'
         << "verify.wealth_volatility=" << (cfg.check_volatility ? "true" : "false") << '\n';
    run.canonical = echo.str();
    run.config_hash = fnv1a(run.canonical);
    return run;
}

}  // namespace flowecon
