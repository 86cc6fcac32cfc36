#include <doctest.h>

#include <cmath>
#include <vector>

#include "optolattice/dynamics.hpp"
#include "optolattice/error.hpp"

using namespace optolattice;

namespace {

constexpr double kOmega = kTwoPi * 276e3;

// Damped oscillation sampled like the integrator output.
Trajectory synthetic(double gamma, double duration, int samples_per_period,
                     const std::function<double(double)>& envelope_amp = {})
{
    Trajectory tr;
    tr.omega_m = kOmega;
    tr.sample_dt = kTwoPi / kOmega / samples_per_period;
    tr.dt = tr.sample_dt;
    const auto n = static_cast<std::size_t>(duration / tr.sample_dt) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = tr.time(i);
        const double a = envelope_amp ? envelope_amp(t) : std::exp(-0.5 * gamma * t);
        tr.x_m.push_back(a * std::cos(kOmega * t));
        tr.v_m.push_back(-a * kOmega * std::sin(kOmega * t));
        tr.excursion.push_back(0.0);
    }
    return tr;
}

SystemConfig quiet_config()
{
    SystemConfig c;
    c.lattice.n_lat = 0.0;
    return c;
}

}  // namespace

TEST_CASE("ramp schedule")
{
    SystemConfig c;
    const RampSchedule r = make_ramp(c);
    CHECK(r.enabled);
    CHECK(r.fraction(0.0) == doctest::Approx(0.1e-3 / 3.4e-3));
    CHECK(r.fraction(0.5 * r.duration) == doctest::Approx(0.5 * (1.0 + r.start_fraction)));
    CHECK(r.fraction(r.duration) == 1.0);
    CHECK(r.fraction(1.0) == 1.0);
    c.sim.ramp = false;
    CHECK(make_ramp(c).fraction(0.0) == 1.0);
    CHECK(make_ramp(c).end_time() == 0.0);
}

TEST_CASE("damping fit recovers a known decay rate")
{
    for (double g : {11.56, 90.0, -170.0}) {
        CAPTURE(g);
        const Trajectory tr = synthetic(g, 0.1, 20);
        FitOptions fo;
        fo.start = 0.01;
        fo.end = 0.09;
        fo.max_efolds = 1e9;
        const DampingFit f = extract_damping(tr, fo);
        CHECK(f.gamma_tot == doctest::Approx(g).epsilon(1e-3));
        CHECK(f.r_squared > 0.999);
        CHECK_FALSE(f.low_confidence);
    }
}

TEST_CASE("damping fit caps the number of e-folds")
{
    const Trajectory tr = synthetic(400.0, 0.1, 20);
    FitOptions fo;
    fo.start = 0.01;
    fo.end = 0.09;
    fo.max_efolds = 4.0;
    const DampingFit f = extract_damping(tr, fo);
    CHECK(f.method.find("efold-capped") != std::string::npos);
    CHECK(f.window_end - f.window_start < 4.1 / 400.0);
    CHECK(f.gamma_tot == doctest::Approx(400.0).epsilon(2e-3));
}

TEST_CASE("damping fit stops before the nonlinear range")
{
    Trajectory tr = synthetic(-200.0, 0.1, 20);
    for (std::size_t i = 0; i < tr.size(); ++i)
        tr.excursion[i] = tr.time(i) > 0.06 ? 0.2 : 0.0;
    FitOptions fo;
    fo.start = 0.01;
    fo.end = 0.09;
    fo.max_efolds = 1e9;
    const DampingFit f = extract_damping(tr, fo);
    CHECK(f.method.find("linear-range") != std::string::npos);
    CHECK(f.window_end < 0.06);
    CHECK(f.gamma_tot == doctest::Approx(-200.0).epsilon(1e-3));
}

TEST_CASE("limit cycle detection on a logistic envelope")
{
    const double rate = 300.0, t0 = 0.05, sat = 1e-6;
    auto amp = [&](double t) {
        const double e2 = sat / (1.0 + std::exp(-rate * (t - t0)));
        return std::sqrt(2.0 * e2);
    };
    const Trajectory tr = synthetic(0.0, 0.15, 10, amp);
    const LimitCycle lc = limit_cycle_metrics(tr, 1e-8);
    CHECK(lc.saturated);
    CHECK(lc.bounded);
    CHECK(lc.ratio == doctest::Approx(100.0).epsilon(0.05));
    CHECK(lc.growth_rate == doctest::Approx(rate).epsilon(0.05));

    const Trajectory decaying = synthetic(50.0, 0.15, 10);
    CHECK_FALSE(limit_cycle_metrics(decaying, 1.0).saturated);
}

TEST_CASE("phase profile of a synthetic travelling wave")
{
    Trajectory tr;
    tr.omega_m = kOmega;
    tr.n_bs = 5;
    tr.sample_dt = kTwoPi / kOmega / 20;
    tr.atoms_from = 0;
    const double lag = 0.3;
    for (std::size_t i = 0; i < 20 * 400; ++i) {
        const double t = tr.time(i);
        tr.x_m.push_back(0.0);
        tr.v_m.push_back(0.0);
        tr.excursion.push_back(0.0);
        for (int b = 0; b < 5; ++b)
            tr.atoms.push_back(1e-9 * std::cos(1.003 * kOmega * t - lag * b));
    }
    const PhaseProfile pp = mode_phase_profile(tr, 0.0, tr.duration());
    CHECK(pp.frequency == doctest::Approx(1.003 * kOmega).epsilon(1e-4));
    for (int b = 0; b < 5; ++b)
        CHECK(pp.lag_rad[static_cast<std::size_t>(b)] == doctest::Approx(lag * b).epsilon(1e-6));
}

TEST_CASE("phase profile rejects motion without a dominant line")
{
    Trajectory tr;
    tr.omega_m = kOmega;
    tr.n_bs = 2;
    tr.sample_dt = 1e-7;
    unsigned s = 1;
    for (int i = 0; i < 2000; ++i) {
        tr.x_m.push_back(0.0);
        tr.v_m.push_back(0.0);
        tr.excursion.push_back(0.0);
        for (int b = 0; b < 2; ++b) {
            s = s * 1103515245u + 12345u;
            tr.atoms.push_back(static_cast<double>(s % 10000) - 5000.0);
        }
    }
    try {
        mode_phase_profile(tr, 0.0, tr.duration());
        FAIL("expected throw");
    }
    catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoDominantPeak);
    }
}

TEST_CASE("bare membrane follows the damped oscillator")
{
    SystemConfig c = quiet_config();
    c.sim.ramp = false;
    const DerivedParams d = derive(c);
    const NonlinearModel m = make_nonlinear_model(c, d);
    CHECK(m.n_bs == 0);
    SystemState s0 = equilibrium_state(m, 1.0);
    s0.x_m = 1e-12;
    const double dt = kTwoPi / kOmega / 200;
    IntegrateOptions io;
    io.sample_stride = 10;
    const Trajectory tr = integrate(m, s0, 2e-3, dt, io);
    const double g = c.membrane.gamma_m + c.membrane.gamma_opt;
    const double wd = std::sqrt(kOmega * kOmega - 0.25 * g * g);
    for (std::size_t i = 0; i < tr.size(); i += 97) {
        const double t = tr.time(i);
        const double ref =
            1e-12 * std::exp(-0.5 * g * t) * (std::cos(wd * t) + 0.5 * g / wd * std::sin(wd * t));
        // RK4 phase error N (omega h)^5 / 120 is about 3e-5 here.
        CHECK(std::abs(tr.x_m[i] - ref) < 5e-5 * 1e-12);
    }
    CHECK_THROWS_AS(integrate(m, s0, 1e-3, kTwoPi / kOmega / 40, io), Error);
}

TEST_CASE("equilibrium is a fixed point")
{
    SystemConfig c;
    c.lattice.n_lat = 3e7;
    c.lattice.n_bs = 3;
    const DerivedParams d = derive(c);
    const NonlinearModel m = make_nonlinear_model(c, d);
    for (double p : {1.0, 0.04}) {
        const SystemState s = equilibrium_state(m, p);
        std::vector<double> y{s.x_m, s.v_m}, dy(2 + 2 * 3), scratch(7);
        y.insert(y.end(), s.x.begin(), s.x.end());
        y.insert(y.end(), s.v.begin(), s.v.end());
        NonlinearModel mp = m;
        mp.ramp.enabled = true;
        mp.ramp.duration = 1.0;
        mp.ramp.start_fraction = p;
        rhs(mp, 0.0, y.data(), dy.data(), scratch.data());
        const double acc_scale = m.force_scale / m.bs_mass;
        for (int i = 0; i < 3; ++i)
            CHECK(std::abs(dy[static_cast<std::size_t>(2 + 3 + i)]) < 1e-8 * acc_scale);
        CHECK(std::abs(dy[1]) < 1e-9 * m.omega_m * m.omega_m * std::abs(m.x_m_st));
    }
}

TEST_CASE("undamped single sheet conserves its oscillation amplitude")
{
    SystemConfig c;
    c.lattice.n_lat = 3e7;
    c.lattice.n_bs = 1;
    const DerivedParams d = derive(c);
    NonlinearModel m = make_nonlinear_model(c, d);
    m.freeze_membrane = true;
    m.gamma_a = 0.0;
    m.ramp.enabled = false;
    SystemState s = equilibrium_state(m, 1.0);
    s.x[0] = 1e-3 / m.k;
    const double dt = kTwoPi / kOmega / 200;
    IntegrateOptions io;
    io.sample_stride = 1;
    io.record_atoms_from = 0.0;
    const Trajectory tr = integrate(m, s, 2e-3, dt, io);
    // Conservative 1D motion: the upper turning points keep their height.
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
        const double a = tr.atom(i - 1, 0), x = tr.atom(i, 0), b = tr.atom(i + 1, 0);
        if (x >= a && x > b)
            peaks.push_back(m.k * (x - (a - b) * (a - b) / (8.0 * (a - 2.0 * x + b))));
    }
    REQUIRE(peaks.size() > 100);
    double lo = peaks[0], hi = peaks[0];
    for (double p : peaks) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    CHECK((hi - lo) / hi < 1e-4);
    CHECK(hi == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("membrane without atoms damps at Gamma_m + Gamma_opt")
{
    SystemConfig c = quiet_config();
    const SimulationResult r = simulate(c);
    CHECK(r.fit.gamma_tot == doctest::Approx(11.56).epsilon(0.01));
    CHECK(r.fit.window_end - r.fit.window_start >= 0.2);
    CHECK_FALSE(r.trajectory.well_hopping);
}

TEST_CASE("halving the step leaves Gamma_tot unchanged")
{
    SystemConfig c;
    c.lattice.n_lat = 1e7;
    c.lattice.n_bs = 2;
    c.sim.ramp_duration = 2e-3;
    c.sim.fit_start = 10e-3;
    c.sim.fit_end = 60e-3;
    c.sim.max_fit_efolds = 4.0;
    c.sim.steps_per_period = 100;
    SimulateOptions so;
    so.keep_trajectory = false;
    const double coarse = simulate(c, so).fit.gamma_tot;
    c.sim.steps_per_period = 200;
    const double fine = simulate(c, so).fit.gamma_tot;
    CHECK(coarse > 0.0);
    CHECK(std::abs(coarse - fine) / std::abs(fine) < 0.01);
}
