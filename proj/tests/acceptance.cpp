// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "optolattice/backaction.hpp"
#include "optolattice/config.hpp"
#include "optolattice/dynamics.hpp"
#include "optolattice/error.hpp"
#include "optolattice/linear.hpp"
#include "optolattice/params.hpp"
#include "optolattice/steadystate.hpp"
#include "optolattice/sweep.hpp"
#include "optolattice/tmm.hpp"

using namespace optolattice;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail)
{
    std::printf("%s  %2d  %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass)
        ++failures;
}

std::string fmt(const char* f, double a)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void log(const std::string& s)
{
    std::fprintf(stderr, "  %s\n", s.c_str());
}

// Criterion tolerances.
constexpr double kBaselineTol = 0.05;
constexpr double kBaselineWall = 10.0;
constexpr double kSweepWall = 600.0;
constexpr double kBsConvergenceTol = 0.15;
constexpr double kLinearTol = 0.10;
constexpr double kInPhaseDeg = 10.0;
constexpr double kTravelingDeg = 90.0;
constexpr double kRatioMin = 10.0, kRatioMax = 1000.0;
constexpr double kIdentityTol = 1e-10;
constexpr double kDelayShiftMax = 0.10;

constexpr double kNLow = 0.3e7, kNHigh = 8e7;
constexpr int kGridPoints = 20;

struct Curve {
    std::vector<double> n;
    std::vector<double> gamma;
    std::vector<std::string> errors;
    double wall = 0.0;
};

Curve run_sweep(const SystemConfig& base, const std::vector<double>& grid, int n_bs)
{
    const auto t0 = Clock::now();
    const auto pts = damping_sweep(base, grid, n_bs, 0, [](const std::string& s) { log(s); });
    Curve c;
    for (const auto& p : pts) {
        c.n.push_back(p.n_lat);
        c.gamma.push_back(p.error.empty() ? p.gamma_tot : std::nan(""));
        c.errors.push_back(p.error);
    }
    c.wall = seconds_since(t0);
    return c;
}

bool all_finite(const Curve& c)
{
    return std::all_of(c.gamma.begin(), c.gamma.end(), [](double g) { return std::isfinite(g); });
}

// Grid points strictly below the two-BS threshold at which Gamma_tot still
// exceeds the bare membrane damping. Closer to the zero crossing a relative
// comparison has no meaningful scale.
std::vector<std::size_t> below_threshold(const Curve& ref, double floor)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ref.gamma.size(); ++i) {
        if (!(ref.gamma[i] > 0.0))
            break;
        if (ref.gamma[i] >= floor)
            idx.push_back(i);
    }
    return idx;
}

void criterion_baseline(const SystemConfig& base)
{
    SystemConfig c = base;
    c.lattice.n_lat = 0.0;
    const auto t0 = Clock::now();
    const SimulationResult r = simulate(c);
    const double wall = seconds_since(t0);
    const double span = r.fit.window_end - r.fit.window_start;
    const double rel = std::abs(r.fit.gamma_tot - 11.56) / 11.56;
    report(1, "baseline damping",
           rel <= kBaselineTol && span >= 0.2 && wall < kBaselineWall,
           "Gamma_tot=" + fmt("%.4f", r.fit.gamma_tot) + " 1/s (rel err " + fmt("%.2e", rel) +
               "), fit span " + fmt("%.3f", span) + " s, wall " + fmt("%.2f", wall) + " s");
}

void criterion_transition(const Curve& two)
{
    const double g_lo = two.gamma.front(), g_hi = two.gamma.back();
    const auto th = crossing(two.n, two.gamma);
    const bool pass = all_finite(two) && g_lo > 0.0 && g_hi < 0.0 && th.has_value() &&
                      *th > kNLow && *th < kNHigh && two.wall < kSweepWall;
    report(2, "instability transition", pass,
           "Gamma(0.3e7)=" + fmt("%.2f", g_lo) + ", Gamma(8e7)=" + fmt("%.2f", g_hi) +
               ", crossing N_lat=" + (th ? fmt("%.4g", *th) : std::string("none")) +
               ", 20-point wall " + fmt("%.0f", two.wall) + " s");
}

void criterion_one_bs(const Curve& one)
{
    const double mn = *std::min_element(one.gamma.begin(), one.gamma.end());
    report(3, "one-BS null result", all_finite(one) && mn > 0.0,
           "min Gamma_tot over grid = " + fmt("%.2f", mn) + " 1/s");
}

void criterion_convergence(const Curve& two, const Curve& four, double floor)
{
    const auto idx = below_threshold(two, floor);
    double worst = 0.0, worst_n = 0.0;
    for (std::size_t i : idx) {
        const double rel = std::abs(four.gamma[i] - two.gamma[i]) / std::abs(two.gamma[i]);
        if (!(rel <= worst)) {
            worst = rel;
            worst_n = two.n[i];
        }
    }
    const auto th2 = crossing(two.n, two.gamma);
    const auto th4 = crossing(four.n, four.gamma);
    report(4, "BS-count convergence", all_finite(four) && !idx.empty() && worst <= kBsConvergenceTol,
           "max |G4-G2|/|G2| = " + fmt("%.3f", worst) + " at N_lat=" + fmt("%.3g", worst_n) +
               " over " + std::to_string(idx.size()) + " points; crossings 2-BS " +
               (th2 ? fmt("%.4g", *th2) : std::string("none")) + ", 4-BS " +
               (th4 ? fmt("%.4g", *th4) : std::string("none")));
}

void criterion_linear(const SystemConfig& base, const Curve& two, double floor)
{
    const auto idx = below_threshold(two, floor);
    double worst = 0.0, worst_n = 0.0;
    for (std::size_t i : idx) {
        const double lin = stability_point(base, two.n[i], false).gamma_tot;
        const double rel = std::abs(lin - two.gamma[i]) / std::abs(two.gamma[i]);
        if (!(rel <= worst)) {
            worst = rel;
            worst_n = two.n[i];
        }
    }
    const auto th_nl = crossing(two.n, two.gamma);
    const double th_lin = find_threshold(
        [&](double n) { return stability_point(base, n, false).gamma_tot; }, two.n.front(),
        two.n.back());
    const double th_rel = th_nl ? std::abs(*th_nl - th_lin) / th_lin : INFINITY;
    report(5, "linear/nonlinear agreement",
           !idx.empty() && worst <= kLinearTol && th_rel <= kLinearTol,
           "max pointwise rel diff " + fmt("%.3f", worst) + " at N_lat=" + fmt("%.3g", worst_n) +
               "; threshold linear " + fmt("%.4g", th_lin) + " vs nonlinear " +
               (th_nl ? fmt("%.4g", *th_nl) : std::string("none")) + " (rel " +
               fmt("%.3f", th_rel) + ")");
}

PhaseProfile ten_bs_profile(const SystemConfig& base, double n_lat)
{
    SystemConfig c = base;
    c.lattice.n_lat = n_lat;
    c.lattice.n_bs = 10;
    SimulateOptions so;
    so.stop_when_fitted = false;
    so.duration = c.sim.ramp_duration + 0.1;
    so.record_atoms_from = *so.duration - 2e-3;
    const SimulationResult r = simulate(c, so);
    return mode_phase_profile(r.trajectory, *so.record_atoms_from, *so.duration);
}

void criterion_modes(const SystemConfig& base)
{
    const PhaseProfile lo = ten_bs_profile(base, kNLow);
    const PhaseProfile hi = ten_bs_profile(base, kNHigh);
    double max_lo = 0.0;
    for (double l : lo.lag_rad)
        max_lo = std::max(max_lo, std::abs(l) * 180.0 / kPi);
    bool monotone = true;
    for (std::size_t i = 1; i < hi.lag_rad.size(); ++i)
        monotone = monotone && hi.lag_rad[i] > hi.lag_rad[i - 1];
    const double end_to_end = (hi.lag_rad.back() - hi.lag_rad.front()) * 180.0 / kPi;
    report(6, "travelling wave", max_lo < kInPhaseDeg && monotone && end_to_end > kTravelingDeg,
           "0.3e7: max |lag| " + fmt("%.2f", max_lo) + " deg; 8e7: end-to-end " +
               fmt("%.1f", end_to_end) + " deg, monotone " + (monotone ? "yes" : "no"));
}

void criterion_limit_cycle(const SystemConfig& base)
{
    SystemConfig c = base;
    c.lattice.n_lat = kNHigh;
    c.lattice.n_bs = 2;
    SimulateOptions so;
    so.stop_when_fitted = false;
    const SimulationResult r = simulate(c, so);
    const double th2 = r.derived.x_thermal * r.derived.x_thermal;
    const LimitCycle lc = limit_cycle_metrics(r.trajectory, th2, c.sim.envelope_periods);
    const bool pass =
        lc.saturated && lc.bounded && lc.ratio >= kRatioMin && lc.ratio <= kRatioMax;
    report(7, "limit cycle", pass,
           std::string("saturated ") + (lc.saturated ? "yes" : "no") + ", bounded " +
               (lc.bounded ? "yes" : "no") + ", <x^2>/<x_th^2> = " + fmt("%.3g", lc.ratio) +
               " (" + lc.note + ")");
}

void criterion_backaction()
{
    const SystemConfig c = profile("backaction");
    const DerivedParams d = derive(c);
    const BackactionParams p = backaction_params(c, d);
    const int n = c.backaction.points;
    const TfSweep one = sweep_tf(TfModel::OneBs, kTwoPi * 100e3, kTwoPi * 600e3, n, false, p);
    const TfSweep two = sweep_tf(TfModel::TwoBs, kTwoPi * 100e3, kTwoPi * 600e3, n, false, p);
    report(8, "back-action phase",
           two.max_phase_delay_deg > 180.0 && one.max_phase_delay_deg <= 180.0,
           "max delay two-BS " + fmt("%.2f", two.max_phase_delay_deg) + " deg, one-BS " +
               fmt("%.2f", one.max_phase_delay_deg) + " deg (nu=" + fmt("%.4f", d.nu) + ")");
}

void criterion_identity()
{
    const SystemConfig c = profile("backaction");
    const DerivedParams d = derive(c);
    const BackactionParams p = backaction_params(c, d);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double w = kTwoPi * (100e3 + 500e3 * i / 999.0);
        const auto a = tf_one_bs(w, p.omega_a, p.gamma_a, p.n, p.atom_mass, p.k);
        const auto b = tf_two_bs(w, p.omega_a, p.gamma_a, p.n, p.atom_mass, p.k, 0.0);
        worst = std::max(worst, std::abs(a - b) / std::abs(a));
    }
    report(9, "nu=0 identity", worst <= kIdentityTol, "max rel diff " + fmt("%.2e", worst));
}

void criterion_delay(const SystemConfig& base)
{
    SystemConfig c = base;
    c.lattice.n_bs = 2;
    const double th_lin = find_threshold(
        [&](double n) { return stability_point(c, n, false).gamma_tot; }, 1e6, 1e8);
    const double lo = 0.8 * th_lin, hi = 1.25 * th_lin;
    auto threshold = [&](double tau) {
        return find_threshold([&](double n) { return dde_damping(c, n, tau).gamma_tot; }, lo, hi,
                              2e-4, 30);
    };
    const double th0 = threshold(0.0);
    const double thd = threshold(c.delay.tau);
    const double shift = (th0 - thd) / th0;
    report(10, "delay effect", shift > 0.0 && shift < kDelayShiftMax,
           "threshold tau=0: " + fmt("%.5g", th0) + ", tau=" + fmt("%.3g", c.delay.tau) +
               " s: " + fmt("%.5g", thd) + " (downward shift " + fmt("%.4f", shift) + ")");
}

void criterion_properties(const SystemConfig& base)
{
    std::vector<std::string> bad;
    std::mt19937_64 rng(1);
    const double lambda = 780e-9, k = kTwoPi / lambda;

    // TMM unimodularity and power conservation.
    std::uniform_real_distribution<double> zd(0.0, 0.5), gap(0.2 * lambda, 0.8 * lambda);
    double worst_det = 0.0, worst_flux = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double z = zd(rng);
        worst_det = std::max(worst_det, std::abs(bs_matrix(z).det() - 1.0));
        std::vector<double> x;
        double pos = 0.0;
        for (int i = 0; i < 1 + trial % 10; ++i)
            x.push_back(pos += gap(rng));
        const auto s = solve_fields(x, z, 0.3 * trial, MirrorBoundary{1.0, 0.71}, 1.0, k);
        const double net = std::norm(s.boundary.leftward) - std::norm(s.boundary.rightward);
        for (const auto& b : s.bs)
            worst_flux = std::max(
                worst_flux,
                std::abs(std::norm(b.right.leftward) - std::norm(b.right.rightward) - net));
    }
    if (worst_det > 1e-12) bad.push_back("unimodularity");
    if (worst_flux > 1e-12) bad.push_back("power");

    // Steady-state residuals.
    double worst_res = 0.0;
    for (int n : {1, 2, 4, 10})
        for (double z : {1e-3, 0.011, 0.05}) {
            const auto st = steady_positions(n, z, 0.5041, 0.0087, lambda);
            for (double r : st.residuals)
                worst_res = std::max(worst_res, std::abs(r));
        }
    if (worst_res > 1e-9) bad.push_back("steady residual");

    // d(zeta = 0) = lambda / 2.
    if (lattice_constant(0.0, 1.4796, lambda) != lambda / 2.0) bad.push_back("lattice constant");

    // Dual-route zeta.
    const auto& la = base.lattice;
    const double sig = effective_sigma_l(la);
    double worst_z = 0.0;
    for (double n : {1.0, 1e4, 1.5e7}) {
        const double a = derive_zeta(n, la.delta_la, la.natural_linewidth, la.wavelength, sig);
        const double b =
            zeta_from_polarizability(n, la.delta_la, la.natural_linewidth, la.wavelength, sig);
        worst_z = std::max(worst_z, std::abs(a - b) / a);
    }
    if (worst_z > 1e-12) bad.push_back("zeta routes");

    // Step halving.
    SystemConfig c = base;
    c.lattice.n_lat = 1e7;
    c.lattice.n_bs = 2;
    c.sim.ramp_duration = 2e-3;
    c.sim.fit_start = 10e-3;
    c.sim.fit_end = 60e-3;
    c.sim.max_fit_efolds = 4.0;
    SimulateOptions so;
    so.keep_trajectory = false;
    c.sim.steps_per_period = 100;
    const double g1 = simulate(c, so).fit.gamma_tot;
    c.sim.steps_per_period = 200;
    const double g2 = simulate(c, so).fit.gamma_tot;
    const double dt_rel = std::abs(g1 - g2) / std::abs(g2);
    if (dt_rel >= 0.01) bad.push_back("dt halving");

    std::string detail = "det " + fmt("%.1e", worst_det) + ", flux " + fmt("%.1e", worst_flux) +
                         ", residual " + fmt("%.1e", worst_res) + ", zeta " +
                         fmt("%.1e", worst_z) + ", dt-halving " + fmt("%.2e", dt_rel);
    for (const auto& b : bad)
        detail += " [" + b + " failed]";
    report(11, "property suites", bad.empty(), detail);
}

template <class F>
void guarded(int id, const std::string& name, F&& f)
{
    try {
        f();
    }
    catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

}  // namespace

int main()
{
    const auto t0 = Clock::now();
    const SystemConfig base = profile("fig2");
    const double floor = base.membrane.gamma_m + base.membrane.gamma_opt;
    const std::vector<double> grid = log_grid(kNLow, kNHigh, kGridPoints);

    guarded(1, "baseline damping", [&] { criterion_baseline(base); });

    Curve one, two, four;
    bool sweeps_ok = true;
    try {
        log("two-BS sweep");
        two = run_sweep(base, grid, 2);
        log("one-BS sweep");
        one = run_sweep(base, grid, 1);
        log("four-BS sweep");
        four = run_sweep(base, grid, 4);
    }
    catch (const std::exception& e) {
        sweeps_ok = false;
        for (int id : {2, 3, 4, 5})
            report(id, "sweep", false, std::string("exception: ") + e.what());
    }
    if (sweeps_ok) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            log("N_lat=" + fmt("%.4g", grid[i]) + "  G1=" + fmt("%.3f", one.gamma[i]) +
                "  G2=" + fmt("%.3f", two.gamma[i]) + "  G4=" + fmt("%.3f", four.gamma[i]) +
                "  lin=" + fmt("%.3f", stability_point(base, grid[i], false).gamma_tot));
        guarded(2, "instability transition", [&] { criterion_transition(two); });
        guarded(3, "one-BS null result", [&] { criterion_one_bs(one); });
        guarded(4, "BS-count convergence", [&] { criterion_convergence(two, four, floor); });
        guarded(5, "linear/nonlinear agreement", [&] { criterion_linear(base, two, floor); });
    }
    guarded(6, "travelling wave", [&] { criterion_modes(base); });
    guarded(7, "limit cycle", [&] { criterion_limit_cycle(base); });
    guarded(8, "back-action phase", [&] { criterion_backaction(); });
    guarded(9, "nu=0 identity", [&] { criterion_identity(); });
    guarded(10, "delay effect", [&] { criterion_delay(base); });
    guarded(11, "property suites", [&] { criterion_properties(base); });

    std::printf("%d of 11 criteria failed; total wall %.0f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
