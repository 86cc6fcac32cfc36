// Scenario runner: reads a config, runs one analysis and writes CSV plus a
// JSON summary into the output directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "optolattice/backaction.hpp"
#include "optolattice/config.hpp"
#include "optolattice/dynamics.hpp"
#include "optolattice/error.hpp"
#include "optolattice/linear.hpp"
#include "optolattice/steadystate.hpp"
#include "optolattice/sweep.hpp"
#include "optolattice/tmm.hpp"

#ifndef OPTOLATTICE_VERSION
#define OPTOLATTICE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace optolattice;

namespace {

struct Common {
    std::string config_path;
    std::string scenario = "fig2";
    std::string out_dir = "out";
    int workers = 0;
    bool seedless = false;
    std::vector<std::string> sets;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SystemConfig load_config(const Common& opt)
{
    SystemConfig c = profile(opt.scenario);
    if (!opt.config_path.empty())
        apply_overrides(c, parse_pairs(read_file(opt.config_path)));
    apply_overrides(c, environment_overrides([](const char* k) { return std::getenv(k); }));
    std::map<std::string, std::string> sets;
    for (const auto& s : opt.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "--set expects key=value, got '" + s + "'");
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t");
            const auto e = v.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
        };
        sets[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
    apply_overrides(c, sets);
    validate(c);
    return c;
}

std::string timestamp()
{
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// Writes a CSV whose body depends only on the rows; provenance goes into
// '#' comment lines.
class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& command, const SystemConfig& config,
              const std::vector<std::pair<std::string, std::string>>& columns)
        : out_(path), hash_(hash_hex(config_hash(config)))
    {
        if (!out_)
            throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
        out_ << "# optolattice " << OPTOLATTICE_VERSION << " " << command << "\n";
        out_ << "# config_hash " << hash_ << "\n";
        out_ << "# generated " << timestamp() << "\n";
        for (const auto& [name, unit] : columns)
            out_ << "# column " << name << (unit.empty() ? "" : " [" + unit + "]") << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i].first;
        out_ << ",config_hash\n";
    }

    CsvWriter& operator<<(double v)
    {
        sep();
        out_ << format_double(v);
        return *this;
    }
    CsvWriter& operator<<(int v)
    {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& operator<<(std::size_t v)
    {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& operator<<(const std::string& v)
    {
        sep();
        out_ << v;
        return *this;
    }
    void end_row()
    {
        out_ << "," << hash_ << "\n";
        first_ = true;
    }

private:
    void sep()
    {
        if (!first_)
            out_ << ",";
        first_ = false;
    }
    std::ofstream out_;
    std::string hash_;
    bool first_ = true;
};

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

json provenance(const std::string& command, const SystemConfig& c, const Common& opt)
{
    json j;
    j["tool"] = "optolattice";
    j["version"] = OPTOLATTICE_VERSION;
    j["command"] = command;
    j["scenario"] = opt.scenario;
    j["config_hash"] = hash_hex(config_hash(c));
    j["generated"] = timestamp();
    return j;
}

json derived_json(const DerivedParams& d)
{
    json j;
    j["reflectivity"] = d.reflectivity;
    j["asymmetry"] = d.asymmetry;
    j["cavity_factor"] = d.cavity_factor;
    j["coupling_factor"] = d.coupling_factor;
    j["G_rad_per_s_m"] = d.G;
    j["n_coupled"] = d.n_coupled;
    j["n_per_bs"] = d.n_per_bs;
    j["zeta"] = d.zeta;
    j["nu"] = d.nu;
    j["omega_a_hz"] = d.omega_a / kTwoPi;
    j["omega_a_from_fields_hz"] = d.omega_a_from_fields / kTwoPi;
    j["intensity_w_per_m2"] = d.intensity_in;
    j["g_n_per_s"] = d.g_n;
    j["gamma_sym_per_s"] = d.gamma_sym;
    j["gamma_m_total_per_s"] = d.gamma_m_total;
    j["x_thermal_m"] = d.x_thermal;
    j["warnings"] = d.warnings;
    return j;
}

void log_line(const std::string& s)
{
    std::cerr << s << std::endl;
}

std::vector<double> sweep_grid(const SystemConfig& c)
{
    return log_grid(c.sweep.n_lat_min, c.sweep.n_lat_max, c.sweep.points);
}

int cmd_simulate(const Common& opt, bool dump_trajectory)
{
    const SystemConfig c = load_config(opt);
    SimulateOptions so;
    so.stop_when_fitted = false;
    const SimulationResult r = simulate(c, so);
    const Trajectory& tr = r.trajectory;
    const double th2 = r.derived.x_thermal * r.derived.x_thermal;

    fs::create_directories(opt.out_dir);
    {
        CsvWriter w(fs::path(opt.out_dir) / "simulate_envelope.csv", "simulate", c,
                    {{"t", "s"}, {"mean_sq_x_m", "m^2"}, {"ratio_to_thermal", ""}});
        const Envelope env = envelope(tr, c.sim.envelope_periods);
        for (std::size_t i = 0; i < env.t.size(); ++i) {
            w << env.t[i] << env.mean_sq[i] << env.mean_sq[i] / th2;
            w.end_row();
        }
    }
    if (dump_trajectory) {
        CsvWriter w(fs::path(opt.out_dir) / "simulate_trajectory.csv", "simulate", c,
                    {{"t", "s"}, {"x_m", "m"}, {"v_m", "m/s"}, {"excursion", "rad"}});
        for (std::size_t i = 0; i < tr.size(); ++i) {
            w << tr.time(i) << tr.x_m[i] << tr.v_m[i] << tr.excursion[i];
            w.end_row();
        }
    }
    const LimitCycle lc = limit_cycle_metrics(tr, th2, c.sim.envelope_periods);
    json j = provenance("simulate", c, opt);
    j["derived"] = derived_json(r.derived);
    j["dt_s"] = tr.dt;
    j["sample_dt_s"] = tr.sample_dt;
    j["duration_s"] = tr.duration();
    j["fit"] = {{"gamma_tot_per_s", r.fit.gamma_tot},
                {"window_start_s", r.fit.window_start},
                {"window_end_s", r.fit.window_end},
                {"r_squared", r.fit.r_squared},
                {"method", r.fit.method},
                {"low_confidence", r.fit.low_confidence}};
    j["limit_cycle"] = {{"saturated", lc.saturated},
                        {"bounded", lc.bounded},
                        {"ratio_to_thermal", lc.ratio},
                        {"onset_time_s", lc.onset_time},
                        {"growth_rate_per_s", lc.growth_rate},
                        {"note", lc.note}};
    j["flags"] = {{"well_hopping", tr.well_hopping},
                  {"well_hopping_time_s", tr.well_hopping_time},
                  {"blowup", tr.blowup}};
    j["wall_seconds"] = r.wall_seconds;
    write_json(fs::path(opt.out_dir) / "simulate_summary.json", j);
    std::printf("gamma_tot = %.6g 1/s (r^2 %.4f, window %.4g-%.4g s)\n", r.fit.gamma_tot,
                r.fit.r_squared, r.fit.window_start, r.fit.window_end);
    return 0;
}

int cmd_sweep(const Common& opt)
{
    const SystemConfig c = load_config(opt);
    const auto grid = sweep_grid(c);
    std::vector<int> counts = c.sweep.n_bs;
    std::sort(counts.begin(), counts.end());
    counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

    fs::create_directories(opt.out_dir);
    CsvWriter w(fs::path(opt.out_dir) / "sweep_atoms.csv", "sweep-atoms", c,
                {{"n_bs", ""},
                 {"n_lat", ""},
                 {"n_coupled", ""},
                 {"zeta", ""},
                 {"nu", ""},
                 {"gamma_tot", "1/s"},
                 {"r_squared", ""},
                 {"window_start", "s"},
                 {"window_end", "s"},
                 {"method", ""},
                 {"low_confidence", ""},
                 {"error", ""}});
    json j = provenance("sweep-atoms", c, opt);
    json curves = json::object();
    for (int n : counts) {
        const auto pts = damping_sweep(c, grid, n, opt.workers, log_line);
        std::vector<double> g;
        for (const auto& p : pts) {
            w << p.n_bs << p.n_lat << p.n_coupled << p.zeta << p.nu << p.gamma_tot << p.r_squared
              << p.window_start << p.window_end << p.method
              << std::string(p.low_confidence ? "1" : "0") << p.error;
            w.end_row();
            g.push_back(p.gamma_tot);
        }
        const auto th = crossing(grid, g);
        bool any_negative = false;
        for (double v : g)
            any_negative = any_negative || v < 0.0;
        curves[std::to_string(n)] = {{"threshold_n_lat", th ? json(*th) : json(nullptr)},
                                     {"any_negative", any_negative},
                                     {"gamma_tot_per_s", g}};
    }
    j["n_lat"] = grid;
    j["curves"] = curves;
    write_json(fs::path(opt.out_dir) / "sweep_atoms_summary.json", j);
    return 0;
}

int cmd_stability(const Common& opt, bool use_delay)
{
    const SystemConfig c = load_config(opt);
    const auto grid = sweep_grid(c);
    const auto pts = stability_sweep(c, grid, use_delay);
    fs::create_directories(opt.out_dir);
    CsvWriter w(fs::path(opt.out_dir) / "stability.csv", "stability", c,
                {{"n_lat", ""},
                 {"n_coupled", ""},
                 {"nu", ""},
                 {"tau", "s"},
                 {"gamma_tot", "1/s"},
                 {"re_lambda", "1/s"},
                 {"im_lambda", "rad/s"},
                 {"condition", ""}});
    std::vector<double> g;
    for (const auto& p : pts) {
        w << p.n_lat << p.n_coupled << p.nu << (use_delay ? c.delay.tau : 0.0) << p.gamma_tot
          << p.re << p.im << p.condition;
        w.end_row();
        g.push_back(p.gamma_tot);
    }
    json j = provenance("stability", c, opt);
    const auto th = crossing(grid, g);
    j["tau_s"] = use_delay ? c.delay.tau : 0.0;
    j["threshold_n_lat_grid"] = th ? json(*th) : json(nullptr);
    if (th) {
        const double lo = grid.front(), hi = grid.back();
        j["threshold_n_lat"] = find_threshold(
            [&](double n) { return stability_point(c, n, use_delay).gamma_tot; }, lo, hi);
    }
    write_json(fs::path(opt.out_dir) / "stability_summary.json", j);
    return 0;
}

int cmd_backaction(const Common& opt)
{
    const SystemConfig c = load_config(opt);
    const DerivedParams d = derive(c);
    const BackactionParams bp = backaction_params(c, d);
    const auto& ba = c.backaction;
    const CalibrationChain chain = calibration_chain(ba);
    const double offset = ba.apply_offset ? ba.offset_db : 0.0;

    fs::create_directories(opt.out_dir);
    CsvWriter w(fs::path(opt.out_dir) / "backaction.csv", "backaction", c,
                {{"model", ""},
                 {"omega_hz", "Hz"},
                 {"re_response", "W/rad"},
                 {"im_response", "W/rad"},
                 {"amplitude_dbm", "dBm"},
                 {"phase_deg", "deg delay"}});
    json j = provenance("backaction", c, opt);
    j["derived"] = derived_json(d);
    j["offset_applied_db"] = offset;
    for (TfModel m : {TfModel::OneBs, TfModel::TwoBs}) {
        const std::string name = m == TfModel::OneBs ? "one_bs" : "two_bs";
        const TfSweep s =
            sweep_tf(m, kTwoPi * ba.f_min, kTwoPi * ba.f_max, ba.points, ba.log_grid, bp);
        for (const auto& p : s.points) {
            w << name << p.omega / kTwoPi;
            if (p.skipped) {
                w << std::string("nan") << std::string("nan") << std::string("nan")
                  << std::string("nan");
            }
            else {
                w << p.response.real() << p.response.imag()
                  << electrical_calibration(p.response, chain, offset) << p.phase_delay_deg;
            }
            w.end_row();
        }
        j[name] = {{"max_phase_delay_deg", s.max_phase_delay_deg}, {"skipped", s.skipped}};
    }
    write_json(fs::path(opt.out_dir) / "backaction_summary.json", j);
    std::printf("max phase delay: one-BS %.2f deg, two-BS %.2f deg (nu = %.4g)\n",
                j["one_bs"]["max_phase_delay_deg"].get<double>(),
                j["two_bs"]["max_phase_delay_deg"].get<double>(), d.nu);
    return 0;
}

int cmd_modes(const Common& opt, double duration, double segment)
{
    const SystemConfig base = load_config(opt);
    fs::create_directories(opt.out_dir);
    CsvWriter w(fs::path(opt.out_dir) / "modes.csv", "modes", base,
                {{"n_lat", ""}, {"bs_index", ""}, {"lag_deg", "deg"}, {"frequency_hz", "Hz"}});
    json j = provenance("modes", base, opt);
    json runs = json::array();
    for (double n : base.modes.n_lat) {
        SystemConfig c = base;
        c.lattice.n_lat = n;
        c.lattice.n_bs = base.modes.n_bs;
        SimulateOptions so;
        so.stop_when_fitted = false;
        so.duration = (c.sim.ramp ? c.sim.ramp_duration : 0.0) + duration;
        so.record_atoms_from = *so.duration - segment;
        const auto r = simulate(c, so);
        const auto pp = mode_phase_profile(r.trajectory, *so.record_atoms_from, *so.duration);
        std::vector<double> lag_deg;
        for (std::size_t b = 0; b < pp.lag_rad.size(); ++b) {
            lag_deg.push_back(pp.lag_rad[b] * 180.0 / kPi);
            w << n << b << lag_deg.back() << pp.frequency / kTwoPi;
            w.end_row();
        }
        runs.push_back({{"n_lat", n},
                        {"gamma_tot_per_s", r.fit.gamma_tot},
                        {"frequency_hz", pp.frequency / kTwoPi},
                        {"peak_to_mean", pp.peak_to_mean},
                        {"lag_deg", lag_deg}});
        log_line("modes n_lat=" + format_double(n) + " end-to-end lag " +
                 format_double(lag_deg.back()) + " deg");
    }
    j["runs"] = runs;
    write_json(fs::path(opt.out_dir) / "modes_summary.json", j);
    return 0;
}

int cmd_steady(const Common& opt)
{
    const SystemConfig c = load_config(opt);
    const DerivedParams d = derive(c);
    const NonlinearModel m = make_nonlinear_model(c, d);
    fs::create_directories(opt.out_dir);
    CsvWriter w(fs::path(opt.out_dir) / "steady.csv", "steady", c,
                {{"bs_index", ""},
                 {"position", "m"},
                 {"spacing", "m"},
                 {"residual", "sigma_L I0/c"},
                 {"stiffness", "sigma_L I0/(c m)"}});
    json j = provenance("steady", c, opt);
    j["derived"] = derived_json(d);
    j["x_m_st_m"] = m.x_m_st;
    j["phi_st_rad"] = m.phi_st;
    j["membrane_force_n"] = m.membrane_force_st;
    if (m.atoms_present) {
        const auto st = steady_positions(c.lattice.n_bs, d.zeta, d.reflectivity, m.phi_st,
                                         c.lattice.wavelength);
        for (std::size_t i = 0; i < st.positions.size(); ++i) {
            w << i << st.positions[i] << (i ? st.positions[i] - st.positions[i - 1] : 0.0)
              << st.residuals[i] << st.stiffness[i];
            w.end_row();
        }
        j["lattice_constant_m"] = st.lattice_constant;
        j["newton_iterations"] = st.iterations;
    }
    write_json(fs::path(opt.out_dir) / "steady_summary.json", j);
    return 0;
}

int cmd_delay(const Common& opt)
{
    const SystemConfig c = load_config(opt);
    const auto grid = sweep_grid(c);
    std::vector<double> g;
    for (const auto& p : stability_sweep(c, grid, false))
        g.push_back(p.gamma_tot);
    const auto th0 = crossing(grid, g);
    if (!th0)
        throw Error(ErrorCode::NoConvergence, "no instability threshold on the sweep grid");
    const double lo = *th0 * 0.8, hi = *th0 * 1.25;

    fs::create_directories(opt.out_dir);
    CsvWriter w(fs::path(opt.out_dir) / "delay.csv", "delay", c,
                {{"tau", "s"}, {"threshold_dde", ""}, {"threshold_roots", ""}, {"shift_dde", ""}});
    json j = provenance("delay", c, opt);
    json rows = json::array();
    double base = 0.0;
    for (double tau : {0.0, c.delay.tau_prop + c.delay.tau_cav, c.delay.tau}) {
        SystemConfig ct = c;
        ct.delay.tau = tau;
        const double th_dde = find_threshold(
            [&](double n) {
                const double gam = dde_damping(ct, n, tau).gamma_tot;
                log_line("delay tau=" + format_double(tau) + " n_lat=" + format_double(n) +
                         " gamma_tot=" + format_double(gam));
                return gam;
            },
            lo, hi, 2e-3, 16);
        const double th_roots = find_threshold(
            [&](double n) { return stability_point(ct, n, true).gamma_tot; }, lo, hi);
        if (tau == 0.0)
            base = th_dde;
        const double shift = (th_dde - base) / base;
        w << tau << th_dde << th_roots << shift;
        w.end_row();
        rows.push_back({{"tau_s", tau},
                        {"threshold_dde", th_dde},
                        {"threshold_roots", th_roots},
                        {"relative_shift", shift}});
    }
    j["rows"] = rows;
    write_json(fs::path(opt.out_dir) / "delay_summary.json", j);
    return 0;
}

int exit_code(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownKey:
    case ErrorCode::TypeMismatch:
    case ErrorCode::RangeError:
    case ErrorCode::Resonance:
        return 2;
    case ErrorCode::Io:
        return 4;
    default:
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Atomic-lattice / membrane-in-cavity simulation toolkit"};
    app.set_version_flag("--version", OPTOLATTICE_VERSION);
    app.require_subcommand(1);
    Common opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "config file (section.key = value)");
        sub->add_option("--scenario", opt.scenario, "scenario profile: fig2 | backaction");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--workers", opt.workers, "worker threads (0 = all cores)");
        sub->add_flag("--seedless", opt.seedless, "accepted for compatibility; runs are deterministic");
        sub->add_option("--set", opt.sets, "override key=value (repeatable)");
    };

    bool dump = false;
    auto* sim = app.add_subcommand("simulate", "one nonlinear trajectory and damping fit");
    add_common(sim);
    sim->add_flag("--trajectory", dump, "also write every stored sample");
    auto* sweep = app.add_subcommand("sweep-atoms", "nonlinear Gamma_tot versus N_lat");
    add_common(sweep);
    bool use_delay = false;
    auto* stab = app.add_subcommand("stability", "linear two-BS eigenvalue Gamma_tot versus N_lat");
    add_common(stab);
    stab->add_flag("--delay", use_delay, "include the retardation delay.tau_s");
    auto* ba = app.add_subcommand("backaction", "one- and two-BS back-action transfer functions");
    add_common(ba);
    double modes_duration = 0.1, modes_segment = 2e-3;
    auto* modes = app.add_subcommand("modes", "phase profile along the BS array");
    add_common(modes);
    modes->add_option("--duration", modes_duration, "simulated time after the ramp, s");
    modes->add_option("--segment", modes_segment, "analysed final segment, s");
    auto* steady = app.add_subcommand("steady", "equilibrium geometry");
    add_common(steady);
    auto* delay = app.add_subcommand("delay", "instability threshold with retardation");
    add_common(delay);

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed())
            return cmd_simulate(opt, dump);
        if (sweep->parsed())
            return cmd_sweep(opt);
        if (stab->parsed())
            return cmd_stability(opt, use_delay);
        if (ba->parsed())
            return cmd_backaction(opt);
        if (modes->parsed())
            return cmd_modes(opt, modes_duration, modes_segment);
        if (steady->parsed())
            return cmd_steady(opt);
        if (delay->parsed())
            return cmd_delay(opt);
    }
    catch (const Error& e) {
        json j = {{"error", to_string(e.code())}, {"message", e.what()}};
        std::cerr << j.dump() << std::endl;
        return exit_code(e.code());
    }
    catch (const std::exception& e) {
        json j = {{"error", "internal"}, {"message", e.what()}};
        std::cerr << j.dump() << std::endl;
        return 5;
    }
    return 1;
}
