#ifndef BIOAGE_CONFIG_HPP
#define BIOAGE_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioage/densities.hpp"
#include "bioage/errors.hpp"
#include "bioage/model.hpp"

namespace bioage {

enum class Scenario { Ibm, Pde, Moments, Compare, AnalyzeChi };

inline const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Ibm: return "ibm";
        case Scenario::Pde: return "pde";
        case Scenario::Moments: return "moments";
        case Scenario::Compare: return "compare";
        case Scenario::AnalyzeChi: return "analyze-chi";
    }
    return "?";
}

inline Scenario scenario_from_name(const std::string& name) {
    if (name == "ibm") return Scenario::Ibm;
    if (name == "pde") return Scenario::Pde;
    if (name == "moments") return Scenario::Moments;
    if (name == "compare") return Scenario::Compare;
    if (name == "analyze-chi") return Scenario::AnalyzeChi;
    throw ParseError("unknown scenario '" + name + "'");
}

struct Numerics {
    std::uint64_t n_individuals = 100000;
    int replicates = 1;
    std::uint64_t seed = 1;
    double b_max = 0.0;  // 0 = derive from the initial condition and t_end
    int n_cells = 4096;
    double dt = 0.0;     // 0 = scenario default
    int moment_order = 10;
    double t_end = 0.0;
    std::vector<double> output_times;  // defaults to {t_end}
    double bin_width = 1.0;
};

struct RunSpec {
    Scenario scenario = Scenario::Ibm;
    ModelParams model;
    std::optional<DemographyParams> demography;
    InitialCondition initial = DiracCohort{20.0};
    Numerics numerics;
    std::string out_dir = "out";
    bool quiet = false;

    ValidatedParams validated() const { return validate(model, demography); }

    // Domain truncation default: ten times the initial support (premature
    // aging pushes mass right multiplicatively), but at least the drifted
    // support with margin. Adequacy is checked post hoc via the outflow
    // ledger.
    double resolved_b_max() const {
        if (numerics.b_max > 0.0) return numerics.b_max;
        const double ref = std::max(initial_support_hi(initial), 1.0);
        return std::max(10.0 * ref, ref + 1.5 * numerics.t_end);
    }

    double resolved_ode_dt() const { return numerics.dt > 0.0 ? numerics.dt : 1e-3; }

    nlohmann::json echo() const;
};

// ---------------------------------------------------------------------------
// Key-value document: TOML-style sections/dotted keys, or JSON with the same
// nesting. Both flatten to dotted keys before RunSpec assembly.
// ---------------------------------------------------------------------------

namespace detail {

struct ConfigValue {
    enum class Kind { Scalar, List } kind = Kind::Scalar;
    std::string raw;                 // unquoted scalar token
    std::vector<std::string> list;   // raw tokens of a [..] array
    int line = 0;
};

using ConfigMap = std::map<std::string, ConfigValue>;

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

inline ConfigMap parse_toml_like(const std::string& text) {
    ConfigMap map;
    std::string section;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = trim(strip_comment(text.substr(pos, eol - pos)));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("line " + std::to_string(line_no) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError("line " + std::to_string(line_no) + ": empty key or value");
        if (!section.empty()) key = section + "." + key;
        ConfigValue cv;
        cv.line = line_no;
        if (value.front() == '[') {
            if (value.back() != ']')
                throw ParseError("line " + std::to_string(line_no) + ": unterminated array");
            cv.kind = ConfigValue::Kind::List;
            std::string body = value.substr(1, value.size() - 2);
            size_t start = 0;
            while (start <= body.size()) {
                size_t comma = body.find(',', start);
                if (comma == std::string::npos) comma = body.size();
                std::string item = trim(body.substr(start, comma - start));
                if (!item.empty()) cv.list.push_back(unquote(item));
                start = comma + 1;
            }
        } else {
            cv.raw = unquote(value);
        }
        if (!map.emplace(key, cv).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return map;
}

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, ConfigMap& map) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
            flatten_json(it.value(), key, map);
        }
        return;
    }
    ConfigValue cv;
    if (j.is_array()) {
        cv.kind = ConfigValue::Kind::List;
        for (const auto& item : j) cv.list.push_back(item.dump());
    } else if (j.is_string()) {
        cv.raw = j.get<std::string>();
    } else {
        cv.raw = j.dump();
    }
    map[prefix] = cv;
}

// Typed reads over the flattened document, tracking which keys were consumed.
class ConfigReader {
public:
    explicit ConfigReader(ConfigMap map) : map_(std::move(map)) {}

    bool has(const std::string& key) const { return map_.count(key) != 0; }

    double number(const std::string& key) {
        const ConfigValue& cv = fetch(key);
        return to_number(cv.raw, key);
    }

    double number_or(const std::string& key, double fallback) {
        return has(key) ? number(key) : fallback;
    }

    std::int64_t integer(const std::string& key) {
        const double v = number(key);
        const auto i = static_cast<std::int64_t>(v);
        if (static_cast<double>(i) != v)
            throw ParseError("key '" + key + "' must be an integer");
        return i;
    }

    std::uint64_t u64(const std::string& key) {
        const ConfigValue& cv = fetch(key);
        char* end = nullptr;
        const unsigned long long v = std::strtoull(cv.raw.c_str(), &end, 10);
        if (end == cv.raw.c_str() || *end != '\0')
            throw ParseError("key '" + key + "' must be a nonnegative integer");
        return v;
    }

    std::string str(const std::string& key) { return fetch(key).raw; }

    bool boolean(const std::string& key) {
        const std::string& r = fetch(key).raw;
        if (r == "true") return true;
        if (r == "false") return false;
        throw ParseError("key '" + key + "' must be true or false");
    }

    std::vector<double> number_list(const std::string& key) {
        const ConfigValue& cv = fetch(key);
        if (cv.kind != ConfigValue::Kind::List)
            throw ParseError("key '" + key + "' must be an array");
        std::vector<double> out;
        out.reserve(cv.list.size());
        for (const auto& item : cv.list) out.push_back(to_number(item, key));
        return out;
    }

    void reject_unconsumed() const {
        for (const auto& [key, cv] : map_) {
            if (!consumed_.count(key))
                throw ParseError("unknown key '" + key + "' (line " +
                                 std::to_string(cv.line) + ")");
        }
    }

private:
    const ConfigValue& fetch(const std::string& key) {
        auto it = map_.find(key);
        if (it == map_.end()) throw ParseError("missing required key '" + key + "'");
        consumed_.insert(key);
        return it->second;
    }

    static double to_number(const std::string& raw, const std::string& key) {
        char* end = nullptr;
        const double v = std::strtod(raw.c_str(), &end);
        if (end == raw.c_str() || *end != '\0')
            throw ParseError("key '" + key + "': '" + raw + "' is not a number");
        return v;
    }

    ConfigMap map_;
    std::set<std::string> consumed_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// RunSpec assembly
// ---------------------------------------------------------------------------

inline RunSpec parse_config(const std::string& text, Scenario scenario) {
    detail::ConfigMap map;
    const size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ParseError("invalid JSON configuration document");
        detail::flatten_json(j, "", map);
    } else {
        map = detail::parse_toml_like(text);
    }
    detail::ConfigReader r(std::move(map));

    RunSpec spec;
    spec.scenario = scenario;
    if (r.has("scenario")) {
        const Scenario from_doc = scenario_from_name(r.str("scenario"));
        if (from_doc != scenario)
            throw ParseError(std::string("config names scenario '") + scenario_name(from_doc) +
                             "' but the subcommand is '" + scenario_name(scenario) + "'");
    }

    // --- model: exactly one of (tau_plus, tau_minus) or (tau, p)
    const bool has_pair = r.has("model.tau_plus") || r.has("model.tau_minus");
    const bool has_prob = r.has("model.tau") || r.has("model.p");
    if (has_pair == has_prob)
        throw ParseError("model requires exactly one parameterization: either "
                         "model.tau_plus + model.tau_minus, or model.tau + model.p");
    double tau_plus = 0.0, tau_minus = 0.0;
    if (has_pair) {
        tau_plus = r.number("model.tau_plus");
        tau_minus = r.number("model.tau_minus");
    } else {
        const double tau = r.number("model.tau");
        const double p = r.number("model.p");
        if (!(tau > 0.0)) throw ParseError("model.tau must be > 0");
        if (!(p >= 0.0 && p <= 1.0)) throw ParseError("model.p must lie in [0, 1]");
        tau_plus = tau * p;
        tau_minus = tau * (1.0 - p);
    }
    const double delta_plus = r.number_or("model.delta_plus", 0.1);
    const double delta_minus = r.number_or("model.delta_minus", 0.1);

    JumpFamily jump_plus = LinearJump{1.0 + delta_plus};
    if (r.has("model.family_plus")) {
        const std::string fam = r.str("model.family_plus");
        if (fam == "polynomial") {
            jump_plus = PolynomialRejuvenation{delta_plus, r.number_or("model.m_plus", 1.0)};
        } else if (fam != "linear") {
            throw ParseError("model.family_plus must be linear or polynomial");
        }
    }
    JumpFamily jump_minus = LinearJump{1.0 - delta_minus};
    if (r.has("model.family_minus")) {
        const std::string fam = r.str("model.family_minus");
        if (fam == "saturating") {
            jump_minus = SaturatingAging{delta_minus, r.number_or("model.chi_sat", 0.0),
                                         r.number_or("model.m_minus", 1.0)};
        } else if (fam != "linear") {
            throw ParseError("model.family_minus must be linear or saturating");
        }
    }
    spec.model = ModelParams{tau_plus, tau_minus, jump_plus, jump_minus};

    // --- demography (present iff any demography.* key)
    if (r.has("demography.mu") || r.has("demography.beta") || r.has("demography.alpha") ||
        r.has("demography.gamma_rate")) {
        DemographyParams dem;
        dem.mu = r.number("demography.mu");
        dem.beta = r.number("demography.beta");
        dem.alpha = static_cast<int>(r.integer("demography.alpha"));
        dem.gamma_rate = r.number("demography.gamma_rate");
        spec.demography = dem;
    }

    // --- initial condition
    const std::string kind = r.has("initial.kind") ? r.str("initial.kind") : "dirac";
    if (kind == "dirac") {
        spec.initial = DiracCohort{r.number_or("initial.b0", 20.0)};
    } else if (kind == "parabolic") {
        spec.initial = parabolic_density();
    } else if (kind == "uniform") {
        spec.initial = uniform_density(r.number_or("initial.lo", 0.0), r.number("initial.hi"));
    } else if (kind == "gaussian") {
        spec.initial = truncated_gaussian_density(r.number("initial.mean"),
                                                  r.number("initial.sd"), r.number("initial.hi"));
    } else if (kind == "zero") {
        spec.initial = zero_density();
    } else {
        throw ParseError("initial.kind must be one of dirac, parabolic, uniform, gaussian, zero");
    }

    // --- numerics
    Numerics& num = spec.numerics;
    if (r.has("numerics.n_individuals")) num.n_individuals = r.u64("numerics.n_individuals");
    if (r.has("numerics.replicates")) num.replicates = static_cast<int>(r.integer("numerics.replicates"));
    if (r.has("numerics.seed")) num.seed = r.u64("numerics.seed");
    num.b_max = r.number_or("numerics.b_max", 0.0);
    if (r.has("numerics.n_cells")) num.n_cells = static_cast<int>(r.integer("numerics.n_cells"));
    num.dt = r.number_or("numerics.dt", 0.0);
    if (r.has("numerics.K"))
        num.moment_order = static_cast<int>(r.integer("numerics.K"));
    else if (scenario == Scenario::Moments || scenario == Scenario::AnalyzeChi)
        num.moment_order = 100;
    num.t_end = r.number_or("numerics.t_end", scenario == Scenario::AnalyzeChi ? 0.0 : -1.0);
    if (num.t_end < 0.0) throw ParseError("missing required key 'numerics.t_end'");
    num.bin_width = r.number_or("numerics.bin_width", 1.0);
    if (r.has("numerics.output_times")) {
        num.output_times = r.number_list("numerics.output_times");
    } else {
        num.output_times = {num.t_end};
    }
    if (!std::is_sorted(num.output_times.begin(), num.output_times.end()))
        throw ParseError("numerics.output_times must be sorted ascending");
    for (double t : num.output_times)
        if (t < 0.0 || t > num.t_end + 1e-12)
            throw ParseError("numerics.output_times must lie within [0, t_end]");

    if (num.replicates < 1) throw ParseError("numerics.replicates must be >= 1");
    if (num.dt < 0.0) throw ParseError("numerics.dt must be > 0 when given");
    if (num.moment_order < 0) throw ParseError("numerics.K must be >= 0");

    // --- output
    if (r.has("output.dir")) spec.out_dir = r.str("output.dir");
    if (r.has("output.quiet")) spec.quiet = r.boolean("output.quiet");

    r.reject_unconsumed();
    validate(spec.model, spec.demography);  // fail fast on range errors
    return spec;
}

// Every resolved value, defaults included, for the run manifest.
inline nlohmann::json RunSpec::echo() const {
    nlohmann::json j;
    j["scenario"] = scenario_name(scenario);
    j["model"]["tau_plus"] = model.tau_plus;
    j["model"]["tau_minus"] = model.tau_minus;
    auto family_json = [](const JumpFamily& fam) {
        nlohmann::json f;
        if (const auto* lin = std::get_if<LinearJump>(&fam)) {
            f["family"] = "linear";
            f["g"] = lin->g;
        } else if (const auto* poly = std::get_if<PolynomialRejuvenation>(&fam)) {
            f["family"] = "polynomial";
            f["delta"] = poly->delta;
            f["m"] = poly->m;
        } else {
            const auto& sat = std::get<SaturatingAging>(fam);
            f["family"] = "saturating";
            f["delta"] = sat.delta;
            f["chi_sat"] = sat.chi_sat;
            f["m"] = sat.m;
        }
        return f;
    };
    j["model"]["jump_plus"] = family_json(model.jump_plus);
    j["model"]["jump_minus"] = family_json(model.jump_minus);
    if (demography) {
        j["demography"]["mu"] = demography->mu;
        j["demography"]["beta"] = demography->beta;
        j["demography"]["alpha"] = demography->alpha;
        j["demography"]["gamma_rate"] = demography->gamma_rate;
    }
    if (const auto* dirac = std::get_if<DiracCohort>(&initial)) {
        j["initial"]["kind"] = "dirac";
        j["initial"]["b0"] = dirac->b0;
    } else {
        const auto& dens = std::get<InitialDensity>(initial);
        j["initial"]["kind"] = dens.name;
        j["initial"]["support_hi"] = dens.support_hi;
    }
    j["numerics"]["n_individuals"] = numerics.n_individuals;
    j["numerics"]["replicates"] = numerics.replicates;
    j["numerics"]["seed"] = numerics.seed;
    j["numerics"]["b_max"] = resolved_b_max();
    j["numerics"]["n_cells"] = numerics.n_cells;
    j["numerics"]["dt"] = numerics.dt;
    j["numerics"]["K"] = numerics.moment_order;
    j["numerics"]["t_end"] = numerics.t_end;
    j["numerics"]["output_times"] = numerics.output_times;
    j["numerics"]["bin_width"] = numerics.bin_width;
    j["output"]["dir"] = out_dir;
    return j;
}

}  // namespace bioage

#endif
