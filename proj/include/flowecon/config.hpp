#pragma once
// Run configuration: a strict INI reader (unknown keys are errors, every
// complaint carries a line number), the schema for one run, and resolution
// against the scenario catalogue.  The canonical echo of a resolved run is
// hashed (FNV-1a) and stamped into every output file.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowecon/scenarios.hpp"

namespace flowecon {

struct IniValue {
    std::string value;
    int line = 0;
};

/// section name -> key -> value.  parse_ini is strict about shape only;
/// schema checks live in config_from_ini.
struct IniFile {
    std::string origin;  // file name used in error messages
    std::map<std::string, std::map<std::string, IniValue>> sections;
};

IniFile parse_ini(const std::string& text, const std::string& origin);
IniFile parse_ini_file(const std::string& path);

enum class FaultKind { none, rate_shift, h_scale, weight_perturb, pref_d_perturb };
FaultKind fault_from_string(const std::string& name);  // throws ConfigError
std::string to_string(FaultKind fault);

/// One run: a scenario reference plus optional overrides.  Absent overrides
/// fall back to the preset; the seed must be stated somewhere (config file or
/// --seed flag), never the wall clock.
struct RunConfig {
    std::string scenario;
    std::string out_dir = "out";

    std::optional<double> t0, horizon;
    std::optional<int> steps;
    std::optional<int> paths;
    std::optional<std::uint64_t> seed;
    std::optional<bool> antithetic;

    std::optional<double> gamma_lower;
    std::optional<double> truncate_tol;
    std::optional<bool> rescale_wealth;

    bool check_flow = true;          // flow + weight cocycles
    bool check_aggregation = true;   // eta re-aggregation and drift residual
    bool check_clearing = true;
    bool check_invariants = true;
    bool check_no_arbitrage = true;
    bool check_volatility = true;
    bool check_preferences = true;   // duality + time consistency
    FaultKind fault = FaultKind::none;
};

RunConfig config_from_ini(const IniFile& ini);
RunConfig load_config(const std::string& path);

/// Scenario with every override applied, ready to simulate, plus the
/// canonical echo all outputs are stamped with.
struct ResolvedRun {
    Scenario scenario;  // grid and equilibrium inputs already patched
    int n_paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    RunConfig cfg;
    std::string canonical;         // sorted key=value lines of effective values
    std::uint64_t config_hash = 0; // fnv1a(canonical)
};

/// Throws ConfigError when the seed is missing, a size is non-positive, or a
/// gamma_lower override exceeds what the scenario's impatience field honours.
ResolvedRun resolve(const RunConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace flowecon
