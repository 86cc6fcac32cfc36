#include "optolattice/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "optolattice/error.hpp"

namespace optolattice {

namespace {

struct Entry {
    ConfigKey key;
    std::function<void(SystemConfig&, const std::string&)> set;
    std::function<std::string(const SystemConfig&)> get;
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void mismatch(const std::string& key, const std::string& value, const char* want)
{
    throw Error(ErrorCode::TypeMismatch,
                "config key '" + key + "': expected " + want + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& value)
{
    const std::string v = trim(value);
    if (v.empty())
        mismatch(key, value, "a number");
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(d))
        mismatch(key, value, "a finite number");
    return d;
}

int to_int(const std::string& key, const std::string& value)
{
    const std::string v = trim(value);
    char* end = nullptr;
    errno = 0;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || n < -1000000000L ||
        n > 1000000000L)
        mismatch(key, value, "an integer");
    return static_cast<int>(n);
}

bool to_bool(const std::string& key, const std::string& value)
{
    std::string v = trim(value);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    mismatch(key, value, "a boolean");
}

bool is_auto(const std::string& value)
{
    std::string v = trim(value);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    return v == "auto";
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(trim(item));
    return out;
}

// Writes v / scale with the shortest nudge that parses back to exactly v.
std::string format_scaled(double v, double scale)
{
    double h = v / scale;
    for (int attempt = 0; attempt < 16; ++attempt) {
        const std::string s = format_double(h);
        if (std::strtod(s.c_str(), nullptr) * scale == v)
            return s;
        // Alternate below/above the first estimate.
        const double base = v / scale;
        double cand = base;
        const int steps = attempt / 2 + 1;
        for (int i = 0; i < steps; ++i)
            cand = std::nextafter(cand, attempt % 2 == 0 ? -INFINITY : INFINITY);
        h = cand;
    }
    return format_double(v / scale);
}

using DRef = std::function<double&(SystemConfig&)>;
using ODRef = std::function<std::optional<double>&(SystemConfig&)>;

Entry dbl(std::string name, std::string unit, std::string help,
          std::function<double&(SystemConfig&)> ref, double scale = 1.0)
{
    Entry e;
    e.key = {name, unit, help};
    e.set = [name, ref, scale](SystemConfig& c, const std::string& v) {
        ref(c) = to_double(name, v) * scale;
    };
    e.get = [ref, scale](const SystemConfig& c) {
        return format_scaled(ref(const_cast<SystemConfig&>(c)), scale);
    };
    return e;
}

Entry opt_dbl(std::string name, std::string unit, std::string help, ODRef ref,
              double scale = 1.0)
{
    Entry e;
    e.key = {name, unit, help};
    e.set = [name, ref, scale](SystemConfig& c, const std::string& v) {
        if (is_auto(v))
            ref(c).reset();
        else
            ref(c) = to_double(name, v) * scale;
    };
    e.get = [ref, scale](const SystemConfig& c) {
        const auto& o = ref(const_cast<SystemConfig&>(c));
        return o ? format_scaled(*o, scale) : std::string("auto");
    };
    return e;
}

Entry integer(std::string name, std::string help, std::function<int&(SystemConfig&)> ref)
{
    Entry e;
    e.key = {name, "", help};
    e.set = [name, ref](SystemConfig& c, const std::string& v) { ref(c) = to_int(name, v); };
    e.get = [ref](const SystemConfig& c) {
        return std::to_string(ref(const_cast<SystemConfig&>(c)));
    };
    return e;
}

Entry boolean(std::string name, std::string help, std::function<bool&(SystemConfig&)> ref)
{
    Entry e;
    e.key = {name, "", help};
    e.set = [name, ref](SystemConfig& c, const std::string& v) { ref(c) = to_bool(name, v); };
    e.get = [ref](const SystemConfig& c) {
        return std::string(ref(const_cast<SystemConfig&>(c)) ? "true" : "false");
    };
    return e;
}

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = [] {
        const double hz = kTwoPi;
        std::vector<Entry> t;
        // membrane
        t.push_back(dbl("membrane.mass_kg", "kg", "effective membrane mass",
                        [](SystemConfig& c) -> double& { return c.membrane.mass; }));
        t.push_back(dbl("membrane.omega_m_hz", "Hz", "membrane mode frequency",
                        [](SystemConfig& c) -> double& { return c.membrane.omega_m; }, hz));
        t.push_back(dbl("membrane.gamma_m_per_s", "1/s", "intrinsic energy damping rate",
                        [](SystemConfig& c) -> double& { return c.membrane.gamma_m; }));
        t.push_back(dbl("membrane.gamma_opt_per_s", "1/s", "cavity cooling rate",
                        [](SystemConfig& c) -> double& { return c.membrane.gamma_opt; }));
        t.push_back(dbl("membrane.reflectivity", "", "membrane amplitude reflectivity r_m",
                        [](SystemConfig& c) -> double& { return c.membrane.r_m; }));
        // cavity
        t.push_back(dbl("cavity.kappa_hz", "Hz", "cavity linewidth",
                        [](SystemConfig& c) -> double& { return c.membrane.kappa; }, hz));
        t.push_back(dbl("cavity.finesse", "", "cavity finesse",
                        [](SystemConfig& c) -> double& { return c.membrane.finesse; }));
        t.push_back(dbl("cavity.g0_per_s", "1/s", "single-photon coupling (consistency check)",
                        [](SystemConfig& c) -> double& { return c.membrane.g0; }));
        t.push_back(opt_dbl("cavity.omega_c_hz", "Hz", "laser frequency; auto = c/lambda",
                            [](SystemConfig& c) -> std::optional<double>& {
                                return c.membrane.omega_c;
                            },
                            hz));
        t.push_back(dbl("cavity.placement_factor", "", "coupling reduction from membrane placement",
                        [](SystemConfig& c) -> double& { return c.membrane.placement_factor; }));
        t.push_back(dbl("cavity.eta", "", "incoupling efficiency",
                        [](SystemConfig& c) -> double& { return c.membrane.eta; }));
        // lattice
        t.push_back(dbl("lattice.n_lat", "", "atoms in the lattice",
                        [](SystemConfig& c) -> double& { return c.lattice.n_lat; }));
        t.push_back(integer("lattice.n_bs", "number of atomic sheets",
                            [](SystemConfig& c) -> int& { return c.lattice.n_bs; }));
        t.push_back(dbl("lattice.wavelength_m", "m", "lattice wavelength",
                        [](SystemConfig& c) -> double& { return c.lattice.wavelength; }));
        t.push_back(dbl("lattice.waist_m", "m", "beam waist",
                        [](SystemConfig& c) -> double& { return c.lattice.waist; }));
        t.push_back(opt_dbl("lattice.sigma_l_m2", "m^2", "beam area; auto = pi w0^2 / 2",
                            [](SystemConfig& c) -> std::optional<double>& {
                                return c.lattice.sigma_l;
                            }));
        t.push_back(dbl("lattice.power_w", "W", "launched lattice power",
                        [](SystemConfig& c) -> double& { return c.lattice.power; }));
        t.push_back(dbl("lattice.t", "", "one-way amplitude transmission atoms <-> membrane",
                        [](SystemConfig& c) -> double& { return c.lattice.path_transmission; }));
        t.push_back(dbl("lattice.trapped_fraction", "", "alpha, resonant-atom scaling",
                        [](SystemConfig& c) -> double& { return c.lattice.trapped_fraction; }));
        t.push_back(dbl("lattice.sheet_fraction", "", "fraction of N_lat forming the sheets",
                        [](SystemConfig& c) -> double& { return c.lattice.sheet_fraction; }));
        {
            Entry e;
            e.key = {"lattice.coupled_atoms", "", "resonant | all"};
            e.set = [](SystemConfig& c, const std::string& v) {
                const std::string s = trim(v);
                if (s == "resonant")
                    c.lattice.coupled_atoms = CoupledAtoms::Resonant;
                else if (s == "all")
                    c.lattice.coupled_atoms = CoupledAtoms::All;
                else
                    mismatch("lattice.coupled_atoms", v, "'resonant' or 'all'");
            };
            e.get = [](const SystemConfig& c) {
                return std::string(c.lattice.coupled_atoms == CoupledAtoms::All ? "all"
                                                                                : "resonant");
            };
            t.push_back(e);
        }
        // atoms
        t.push_back(dbl("atoms.mass_kg", "kg", "atomic mass",
                        [](SystemConfig& c) -> double& { return c.lattice.atom_mass; }));
        t.push_back(dbl("atoms.gamma_a_per_s", "1/s", "atomic motional damping",
                        [](SystemConfig& c) -> double& { return c.lattice.gamma_a; }));
        t.push_back(dbl("atoms.delta_la_hz", "Hz", "lattice detuning (negative = red)",
                        [](SystemConfig& c) -> double& { return c.lattice.delta_la; }, hz));
        t.push_back(dbl("atoms.linewidth_hz", "Hz", "natural linewidth",
                        [](SystemConfig& c) -> double& { return c.lattice.natural_linewidth; },
                        hz));
        t.push_back(opt_dbl("atoms.omega_a_hz", "Hz", "trap frequency; auto = from fields",
                            [](SystemConfig& c) -> std::optional<double>& {
                                return c.lattice.omega_a;
                            },
                            hz));
        // sim
        t.push_back(boolean("sim.ramp", "linear power ramp at start",
                            [](SystemConfig& c) -> bool& { return c.sim.ramp; }));
        t.push_back(dbl("sim.ramp_duration_s", "s", "ramp length",
                        [](SystemConfig& c) -> double& { return c.sim.ramp_duration; }));
        t.push_back(dbl("sim.ramp_start_power_w", "W", "power at ramp start",
                        [](SystemConfig& c) -> double& { return c.sim.ramp_start_power; }));
        t.push_back(integer("sim.steps_per_period", "RK4 steps per membrane period",
                            [](SystemConfig& c) -> int& { return c.sim.steps_per_period; }));
        t.push_back(integer("sim.samples_per_period", "stored samples per membrane period",
                            [](SystemConfig& c) -> int& { return c.sim.samples_per_period; }));
        t.push_back(opt_dbl("sim.duration_s", "s", "trajectory length; auto = ramp + fit end + 5 ms",
                            [](SystemConfig& c) -> std::optional<double>& {
                                return c.sim.duration;
                            }));
        t.push_back(dbl("sim.initial_displacement_xth", "x_th", "initial membrane offset",
                        [](SystemConfig& c) -> double& {
                            return c.sim.initial_displacement_xth;
                        }));
        t.push_back(dbl("sim.temperature_k", "K", "reference temperature for x_th",
                        [](SystemConfig& c) -> double& { return c.sim.temperature; }));
        t.push_back(dbl("sim.fit_start_s", "s", "fit window start after the ramp",
                        [](SystemConfig& c) -> double& { return c.sim.fit_start; }));
        t.push_back(dbl("sim.fit_end_s", "s", "fit window end after the ramp",
                        [](SystemConfig& c) -> double& { return c.sim.fit_end; }));
        t.push_back(dbl("sim.envelope_periods", "periods", "sliding RMS window",
                        [](SystemConfig& c) -> double& { return c.sim.envelope_periods; }));
        t.push_back(dbl("sim.max_fit_efolds", "", "largest change of ln<x_m^2> inside a fit",
                        [](SystemConfig& c) -> double& { return c.sim.max_fit_efolds; }));
        // delay
        t.push_back(dbl("delay.tau_s", "s", "delay used by the retarded model",
                        [](SystemConfig& c) -> double& { return c.delay.tau; }));
        t.push_back(dbl("delay.tau_prop_s", "s", "measured propagation delay",
                        [](SystemConfig& c) -> double& { return c.delay.tau_prop; }));
        t.push_back(dbl("delay.tau_cav_s", "s", "cavity response delay",
                        [](SystemConfig& c) -> double& { return c.delay.tau_cav; }));
        // sweep
        t.push_back(dbl("sweep.n_lat_min", "", "first N_lat",
                        [](SystemConfig& c) -> double& { return c.sweep.n_lat_min; }));
        t.push_back(dbl("sweep.n_lat_max", "", "last N_lat",
                        [](SystemConfig& c) -> double& { return c.sweep.n_lat_max; }));
        t.push_back(integer("sweep.points", "log-spaced grid points",
                            [](SystemConfig& c) -> int& { return c.sweep.points; }));
        {
            Entry e;
            e.key = {"sweep.n_bs", "", "comma-separated BS counts"};
            e.set = [](SystemConfig& c, const std::string& v) {
                c.sweep.n_bs.clear();
                for (const auto& item : split_list(v))
                    c.sweep.n_bs.push_back(to_int("sweep.n_bs", item));
            };
            e.get = [](const SystemConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.sweep.n_bs.size(); ++i)
                    s += (i ? "," : "") + std::to_string(c.sweep.n_bs[i]);
                return s;
            };
            t.push_back(e);
        }
        // backaction
        t.push_back(dbl("backaction.f_min_hz", "Hz", "sweep start",
                        [](SystemConfig& c) -> double& { return c.backaction.f_min; }));
        t.push_back(dbl("backaction.f_max_hz", "Hz", "sweep end",
                        [](SystemConfig& c) -> double& { return c.backaction.f_max; }));
        t.push_back(integer("backaction.points", "sweep points",
                            [](SystemConfig& c) -> int& { return c.backaction.points; }));
        t.push_back(boolean("backaction.log_grid", "logarithmic frequency grid",
                            [](SystemConfig& c) -> bool& { return c.backaction.log_grid; }));
        t.push_back(dbl("backaction.phi_rms", "rad", "phase modulation depth",
                        [](SystemConfig& c) -> double& { return c.backaction.phi_rms; }));
        t.push_back(dbl("backaction.pickup", "", "pick-off power fraction",
                        [](SystemConfig& c) -> double& { return c.backaction.pickup; }));
        t.push_back(dbl("backaction.pd_conversion_v_per_w", "V/W", "photodiode gain",
                        [](SystemConfig& c) -> double& { return c.backaction.pd_conversion; }));
        t.push_back(dbl("backaction.impedance_ohm", "Ohm", "load impedance",
                        [](SystemConfig& c) -> double& { return c.backaction.impedance; }));
        t.push_back(dbl("backaction.bandwidth_hz", "Hz", "detection bandwidth",
                        [](SystemConfig& c) -> double& { return c.backaction.bandwidth; }));
        t.push_back(dbl("backaction.offset_db", "dB", "data-alignment offset",
                        [](SystemConfig& c) -> double& { return c.backaction.offset_db; }));
        t.push_back(boolean("backaction.apply_offset", "add offset_db to amplitudes",
                            [](SystemConfig& c) -> bool& { return c.backaction.apply_offset; }));
        // modes
        t.push_back(integer("modes.n_bs", "BS count for the phase profile",
                            [](SystemConfig& c) -> int& { return c.modes.n_bs; }));
        {
            Entry e;
            e.key = {"modes.n_lat", "", "comma-separated N_lat values"};
            e.set = [](SystemConfig& c, const std::string& v) {
                c.modes.n_lat.clear();
                for (const auto& item : split_list(v))
                    c.modes.n_lat.push_back(to_double("modes.n_lat", item));
            };
            e.get = [](const SystemConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.modes.n_lat.size(); ++i)
                    s += (i ? "," : "") + format_double(c.modes.n_lat[i]);
                return s;
            };
            t.push_back(e);
        }
        return t;
    }();
    return table;
}

const Entry* find_entry(const std::string& name)
{
    for (const auto& e : entries())
        if (e.key.name == name)
            return &e;
    return nullptr;
}

}  // namespace

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& e : entries())
            k.push_back(e.key);
        return k;
    }();
    return keys;
}

std::map<std::string, std::string> parse_pairs(const std::string& text)
{
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument,
                        "config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw Error(ErrorCode::InvalidArgument,
                        "config line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second)
            throw Error(ErrorCode::InvalidArgument,
                        "config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return out;
}

void apply_overrides(SystemConfig& config, const std::map<std::string, std::string>& values)
{
    std::vector<std::string> unknown;
    for (const auto& [k, v] : values)
        if (!find_entry(k))
            unknown.push_back(k);
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown)
            msg += " " + k;
        throw Error(ErrorCode::UnknownKey, msg);
    }
    for (const auto& [k, v] : values)
        find_entry(k)->set(config, v);
}

SystemConfig parse_config(const std::string& text, const SystemConfig& base)
{
    SystemConfig c = base;
    apply_overrides(c, parse_pairs(text));
    validate(c);
    return c;
}

SystemConfig parse_config(const std::string& text)
{
    return parse_config(text, SystemConfig{});
}

std::string serialize(const SystemConfig& config)
{
    std::string out;
    for (const auto& e : entries())
        out += e.key.name + " = " + e.get(config) + "\n";
    return out;
}

std::uint64_t config_hash(const SystemConfig& config)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : serialize(config)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t hash)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::map<std::string, std::string> environment_overrides(
    const std::function<const char*(const char*)>& getenv_fn)
{
    std::map<std::string, std::string> out;
    for (const auto& e : entries()) {
        const std::string& name = e.key.name;
        if (const char* v = getenv_fn(name.c_str())) {
            out[name] = v;
            continue;
        }
        std::string env = "OPTOLATTICE_";
        for (char c : name) {
            if (c == '.')
                env += "__";
            else
                env += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
        if (const char* v = getenv_fn(env.c_str()))
            out[name] = v;
    }
    return out;
}

std::vector<std::string> profile_names()
{
    return {"fig2", "backaction"};
}

SystemConfig profile(const std::string& name)
{
    SystemConfig c;
    if (name == "fig2")
        return c;
    if (name == "backaction") {
        c.lattice.n_lat = 3e8;
        c.lattice.n_bs = 2;
        c.lattice.coupled_atoms = CoupledAtoms::All;
        c.lattice.gamma_a = kTwoPi * 150e3;
        c.lattice.delta_la = -kTwoPi * 1e9;
        c.lattice.omega_a = kTwoPi * 275e3;
        c.lattice.path_transmission = std::sqrt(0.06);
        c.lattice.power = 9.12e-3;
        c.membrane.eta = 1.0;
        return c;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown scenario profile '" + name + "'");
}

}  // namespace optolattice
