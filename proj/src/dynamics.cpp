#include "optolattice/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>

#include "optolattice/config.hpp"
#include "optolattice/error.hpp"
#include "optolattice/steadystate.hpp"
#include "optolattice/tmm.hpp"

namespace optolattice {

double RampSchedule::fraction(double t) const
{
    if (!enabled || t >= duration)
        return 1.0;
    if (t <= 0.0)
        return start_fraction;
    return start_fraction + (1.0 - start_fraction) * (t / duration);
}

RampSchedule make_ramp(const SystemConfig& config)
{
    RampSchedule r;
    r.enabled = config.sim.ramp && config.sim.ramp_duration > 0.0;
    r.duration = config.sim.ramp_duration;
    r.start_fraction = std::min(1.0, config.sim.ramp_start_power / config.lattice.power);
    return r;
}

NonlinearModel make_nonlinear_model(const SystemConfig& config, const DerivedParams& d)
{
    const auto& mc = config.membrane;
    const auto& la = config.lattice;
    NonlinearModel m;
    m.k = d.k;
    m.zeta = d.zeta;
    m.reflectivity = d.reflectivity;
    m.wavelength = la.wavelength;
    m.phi_slope = 4.0 * d.G / mc.kappa;
    m.force_scale = d.sigma_l * d.intensity_in / PhysicalConstants::speed_of_light;

    const double t2 = la.path_transmission * la.path_transmission;
    const double p_in_st = d.sigma_l * d.intensity_in * mc.eta * mc.eta * t2;
    m.x_m_st = membrane_steady(p_in_st, d.G, d.omega_c, mc.kappa, mc.mass, mc.omega_m);
    m.phi_st = m.phi_slope * m.x_m_st;
    m.membrane_force_gain = 4.0 * d.G / (d.omega_c * mc.kappa) * p_in_st;

    m.atoms_present = d.n_sheets > 0.0 && d.zeta > 0.0;
    double intensity = 1.0;
    if (m.atoms_present) {
        m.n_bs = la.n_bs;
        const auto st = steady_positions(la.n_bs, d.zeta, d.reflectivity, m.phi_st, la.wavelength);
        m.x_st = st.positions;
        std::vector<double> kern(st.positions.size());
        intensity = force_kernels(m.x_st, m.zeta, m.phi_st, m.reflectivity, m.k, kern)
                        .membrane_intensity;
    }
    m.membrane_force_st = m.membrane_force_gain * intensity;
    m.motion_weight = d.motion_weight;
    m.bs_mass = d.n_per_bs * la.atom_mass;
    m.membrane_mass = mc.mass;
    m.omega_m = mc.omega_m;
    m.gamma_membrane = mc.gamma_m + mc.gamma_opt;
    m.gamma_a = la.gamma_a;
    m.ramp = make_ramp(config);
    m.config_hash = config_hash(config);
    return m;
}

SystemState equilibrium_state(const NonlinearModel& m, double p)
{
    SystemState s;
    if (!m.freeze_membrane)
        s.x_m = (p - 1.0) * m.membrane_force_st /
                (m.membrane_mass * m.omega_m * m.omega_m);
    // The lattice translates rigidly with the membrane phase.
    const double shift = -m.phi_slope * s.x_m / (2.0 * m.k);
    s.x.assign(static_cast<std::size_t>(m.n_bs), shift);
    s.v.assign(static_cast<std::size_t>(m.n_bs), 0.0);
    return s;
}

void rhs(const NonlinearModel& m, double t, const double* y, double* dydt, double* scratch)
{
    const std::size_t n = static_cast<std::size_t>(m.n_bs);
    const double p = m.ramp.fraction(t);
    const double s = m.anharmonic_scale;
    const double x_m = y[0];
    const double v_m = y[1];
    const double* xa = y + 2;
    const double* va = y + 2 + n;

    double f_dev = (p - 1.0) * m.membrane_force_st;
    if (n > 0) {
        double* pos = scratch;
        double* kern = scratch + n;
        for (std::size_t i = 0; i < n; ++i)
            pos[i] = m.x_st[i] + s * xa[i];
        const double phi = m.phi_st + s * m.phi_slope * x_m;
        const auto fk = force_kernels({pos, n}, m.zeta, phi, m.reflectivity, m.k, {kern, n});
        const double acc = p * m.force_scale / (s * m.bs_mass);
        for (std::size_t i = 0; i < n; ++i) {
            dydt[2 + i] = va[i];
            dydt[2 + n + i] = acc * kern[i] - m.gamma_a * va[i];
        }
        f_dev += p * m.motion_weight *
                 (m.membrane_force_gain * fk.membrane_intensity - m.membrane_force_st) / s;
    }
    if (m.freeze_membrane) {
        dydt[0] = 0.0;
        dydt[1] = 0.0;
    }
    else {
        dydt[0] = v_m;
        dydt[1] = -m.omega_m * m.omega_m * x_m - m.gamma_membrane * v_m +
                  f_dev / m.membrane_mass;
    }
}

namespace {

std::vector<double> pack(const SystemState& s, std::size_t n)
{
    std::vector<double> y(2 + 2 * n, 0.0);
    y[0] = s.x_m;
    y[1] = s.v_m;
    for (std::size_t i = 0; i < n; ++i) {
        y[2 + i] = i < s.x.size() ? s.x[i] : 0.0;
        y[2 + n + i] = i < s.v.size() ? s.v[i] : 0.0;
    }
    return y;
}

SystemState unpack(const std::vector<double>& y, std::size_t n)
{
    SystemState s;
    s.x_m = y[0];
    s.v_m = y[1];
    s.x.assign(y.begin() + 2, y.begin() + 2 + static_cast<std::ptrdiff_t>(n));
    s.v.assign(y.begin() + 2 + static_cast<std::ptrdiff_t>(n), y.end());
    return s;
}

bool all_finite(const std::vector<double>& y)
{
    for (double e : y)
        if (!std::isfinite(e))
            return false;
    return true;
}

}  // namespace

Trajectory integrate(const NonlinearModel& m, const SystemState& initial, double duration,
                     double dt, const IntegrateOptions& options)
{
    if (!(dt > 0.0) || !(duration >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "integration step and duration must be positive");
    if (options.sample_stride < 1)
        throw Error(ErrorCode::InvalidArgument, "sample stride must be >= 1");
    const double dt_max = kTwoPi / (50.0 * m.omega_m);
    if (dt > dt_max * (1.0 + 1e-12))
        throw Error(ErrorCode::RangeError, "integration step exceeds period/50");

    const std::size_t n = static_cast<std::size_t>(m.n_bs);
    const std::size_t dim = 2 + 2 * n;
    Trajectory tr;
    tr.dt = dt;
    tr.sample_dt = dt * options.sample_stride;
    tr.n_bs = m.n_bs;
    tr.ramp = m.ramp;
    tr.omega_m = m.omega_m;
    tr.config_hash = m.config_hash;

    const auto n_steps = static_cast<std::size_t>(std::llround(duration / dt));
    const std::size_t n_samples = n_steps / static_cast<std::size_t>(options.sample_stride) + 1;
    tr.x_m.reserve(n_samples);
    tr.v_m.reserve(n_samples);
    tr.excursion.reserve(n_samples);
    std::size_t atoms_from = n_samples;
    if (options.record_atoms_from && n > 0) {
        atoms_from = static_cast<std::size_t>(
            std::max(0.0, std::ceil(*options.record_atoms_from / tr.sample_dt)));
        if (atoms_from < n_samples)
            tr.atoms.reserve((n_samples - atoms_from) * n);
    }
    tr.atoms_from = atoms_from;

    std::vector<double> y = pack(initial, n), last = y;
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim), scratch(2 * n + 1);
    const double quarter_wave = m.wavelength / 4.0;

    auto record = [&](std::size_t idx) {
        tr.x_m.push_back(y[0]);
        tr.v_m.push_back(y[1]);
        double ex = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            ex = std::max(ex, std::abs(y[2 + i]));
        tr.excursion.push_back(m.k * m.anharmonic_scale * ex);
        if (!tr.well_hopping && m.anharmonic_scale * ex > quarter_wave) {
            tr.well_hopping = true;
            tr.well_hopping_time = tr.time(idx);
        }
        if (idx >= atoms_from)
            for (std::size_t i = 0; i < n; ++i)
                tr.atoms.push_back(y[2 + i]);
    };

    record(0);
    std::size_t sample = 0;
    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t = static_cast<double>(step - 1) * dt;
        rhs(m, t, y.data(), k1.data(), scratch.data());
        for (std::size_t j = 0; j < dim; ++j)
            tmp[j] = y[j] + 0.5 * dt * k1[j];
        rhs(m, t + 0.5 * dt, tmp.data(), k2.data(), scratch.data());
        for (std::size_t j = 0; j < dim; ++j)
            tmp[j] = y[j] + 0.5 * dt * k2[j];
        rhs(m, t + 0.5 * dt, tmp.data(), k3.data(), scratch.data());
        for (std::size_t j = 0; j < dim; ++j)
            tmp[j] = y[j] + dt * k3[j];
        rhs(m, t + dt, tmp.data(), k4.data(), scratch.data());
        for (std::size_t j = 0; j < dim; ++j)
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

        if (step % static_cast<std::size_t>(options.sample_stride) != 0)
            continue;
        if (!all_finite(y)) {
            tr.blowup = true;
            y = last;
            break;
        }
        ++sample;
        record(sample);
        last = y;
        if (options.stop && options.stop(tr)) {
            tr.stopped_early = step < n_steps;
            break;
        }
    }
    tr.final_state = unpack(y, n);
    return tr;
}

FitOptions fit_options(const SystemConfig& config)
{
    FitOptions o;
    const double ramp_end = config.sim.ramp ? config.sim.ramp_duration : 0.0;
    o.start = ramp_end + config.sim.fit_start;
    o.end = ramp_end + config.sim.fit_end;
    o.envelope_periods = config.sim.envelope_periods;
    o.max_efolds = config.sim.max_fit_efolds;
    o.earliest = ramp_end;
    return o;
}

Envelope envelope(const Trajectory& tr, double window_periods, std::size_t step)
{
    const double period = kTwoPi / tr.omega_m;
    const auto window = static_cast<std::size_t>(
        std::max(1.0, std::round(window_periods * period / tr.sample_dt)));
    if (step == 0)
        step = static_cast<std::size_t>(std::max(1.0, std::round(period / tr.sample_dt)));
    Envelope e;
    const std::size_t n = tr.size();
    if (n < window)
        return e;
    for (std::size_t i = 0; i + window <= n; i += step) {
        double acc = 0.0;
        for (std::size_t j = i; j < i + window; ++j)
            acc += tr.x_m[j] * tr.x_m[j];
        e.t.push_back(tr.time(i) + 0.5 * static_cast<double>(window - 1) * tr.sample_dt);
        e.mean_sq.push_back(acc / static_cast<double>(window));
    }
    return e;
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::size_t b,
                 std::size_t e)
{
    const double n = static_cast<double>(e - b);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r_squared = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

}  // namespace

DampingFit extract_damping(const Trajectory& tr, const FitOptions& o)
{
    const double period = kTwoPi / tr.omega_m;
    const double ramp_end = tr.ramp.end_time();
    if (tr.duration() < ramp_end + 5.0 * period)
        throw Error(ErrorCode::InvalidArgument,
                    "trajectory must extend at least 5 membrane periods past the ramp");

    const Envelope env = envelope(tr, o.envelope_periods);
    const double half_window = 0.5 * o.envelope_periods * period;

    double t_nl = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tr.excursion.size(); ++i)
        if (tr.excursion[i] > o.nonlinear_excursion && tr.time(i) >= ramp_end) {
            t_nl = tr.time(i);
            break;
        }

    std::string method = "envelope-lsq";
    double t_end = std::min({o.end, t_nl - half_window, env.t.empty() ? 0.0 : env.t.back()});
    if (t_nl - half_window < o.end)
        method += "+linear-range";
    double t_start = o.start;
    bool shifted = false;
    if (t_end - t_start < o.min_periods * period) {
        shifted = true;
        t_start = std::max(o.earliest, t_end - (o.end - o.start));
        method += "+shifted";
    }

    std::vector<double> ts, ls;
    for (std::size_t i = 0; i < env.t.size(); ++i)
        if (env.t[i] >= t_start && env.t[i] <= t_end && env.mean_sq[i] > 0.0) {
            ts.push_back(env.t[i]);
            ls.push_back(std::log(env.mean_sq[i]));
        }
    if (ts.size() < 3)
        throw Error(ErrorCode::InvalidArgument, "fit window contains fewer than 3 envelope points");

    std::size_t b = 0, e = ts.size();
    if (!shifted) {
        for (std::size_t i = 1; i < ts.size(); ++i)
            if (std::abs(ls[i] - ls[0]) > o.max_efolds) {
                e = i;
                method += "+efold-capped";
                break;
            }
    }
    else {
        for (std::size_t i = ts.size() - 1; i-- > 0;)
            if (std::abs(ls[i] - ls.back()) > o.max_efolds) {
                b = i + 1;
                method += "+efold-capped";
                break;
            }
    }
    if (e - b < 3)
        throw Error(ErrorCode::InvalidArgument, "fit window contains fewer than 3 envelope points");

    const LineFit lf = fit_line(ts, ls, b, e);
    DampingFit f;
    f.gamma_tot = -lf.slope;
    f.window_start = ts[b];
    f.window_end = ts[e - 1];
    f.r_squared = lf.r_squared;
    f.points = e - b;
    f.low_confidence = lf.r_squared < 0.9 || tr.well_hopping;
    f.method = method;
    return f;
}

LimitCycle limit_cycle_metrics(const Trajectory& tr, double thermal_mean_sq,
                               double envelope_periods)
{
    LimitCycle lc;
    const Envelope env = envelope(tr, envelope_periods);
    const std::size_t n = env.t.size();
    const std::size_t span = 100;  // slope window, envelope points (one per period)
    if (n < 3 * span) {
        lc.note = "trajectory too short";
        return lc;
    }
    std::vector<double> ln(n);
    for (std::size_t i = 0; i < n; ++i)
        ln[i] = std::log(std::max(env.mean_sq[i], std::numeric_limits<double>::min()));
    const double ramp_end = tr.ramp.end_time();

    std::vector<double> slope(n, 0.0);
    std::vector<bool> valid(n, false);
    for (std::size_t i = 0; i + span <= n; ++i) {
        if (env.t[i] < ramp_end)
            continue;
        slope[i] = fit_line(env.t, ln, i, i + span).slope;
        valid[i] = true;
    }
    std::size_t ipk = n;
    for (std::size_t i = 0; i < n; ++i)
        if (valid[i] && (ipk == n || slope[i] > slope[ipk]))
            ipk = i;
    if (ipk == n || slope[ipk] <= 0.0) {
        lc.note = "no growth";
        return lc;
    }
    lc.growth_rate = slope[ipk];
    lc.growth_time = 1.0 / lc.growth_rate;

    std::size_t isat = n;
    for (std::size_t i = ipk; i < n; ++i)
        if (valid[i] && std::abs(slope[i]) < 0.01 * lc.growth_rate) {
            isat = i;
            break;
        }
    if (isat == n) {
        lc.note = "not saturated";
        return lc;
    }
    lc.saturated = true;
    lc.onset_time = env.t[isat];
    const double t_hold = lc.onset_time + 2.0 * lc.growth_time;
    if (env.t.back() < t_hold) {
        lc.note = "saturated but trajectory shorter than 2 growth times past onset";
        return lc;
    }
    double sum = 0.0, peak = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = isat; i < n && env.t[i] <= t_hold; ++i) {
        sum += env.mean_sq[i];
        peak = std::max(peak, env.mean_sq[i]);
        ++cnt;
    }
    const double ref = env.mean_sq[isat];
    lc.bounded = std::isfinite(peak) && peak <= 10.0 * ref && !tr.blowup;
    lc.ratio = sum / static_cast<double>(cnt) / thermal_mean_sq;
    lc.note = lc.bounded ? "bounded limit cycle" : "envelope not bounded after saturation";
    return lc;
}

PhaseProfile mode_phase_profile(const Trajectory& tr, double t_start, double t_end)
{
    if (tr.n_bs < 1)
        throw Error(ErrorCode::InvalidArgument, "trajectory has no BS motion");
    auto i0 = static_cast<std::size_t>(std::ceil(t_start / tr.sample_dt));
    auto i1 = static_cast<std::size_t>(std::floor(t_end / tr.sample_dt));
    i0 = std::max(i0, tr.atoms_from);
    i1 = std::min(i1, tr.size() - 1);
    if (i1 <= i0 || i1 - i0 < 64)
        throw Error(ErrorCode::InvalidArgument, "phase-profile segment has too few atom samples");
    const std::size_t len = i1 - i0 + 1;
    const std::size_t nb = static_cast<std::size_t>(tr.n_bs);

    std::vector<double> w(len);
    for (std::size_t j = 0; j < len; ++j)
        w[j] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(j) / static_cast<double>(len - 1));
    std::vector<double> ref(len);
    double mean = 0.0;
    for (std::size_t j = 0; j < len; ++j)
        mean += tr.atom(i0 + j, 0);
    mean /= static_cast<double>(len);
    for (std::size_t j = 0; j < len; ++j)
        ref[j] = (tr.atom(i0 + j, 0) - mean) * w[j];

    // Periodogram of the first BS.
    const std::size_t half = len / 2;
    std::vector<double> power(half + 1, 0.0);
    for (std::size_t kb = 1; kb <= half; ++kb) {
        const double dth = kTwoPi * static_cast<double>(kb) / static_cast<double>(len);
        const std::complex<double> rot{std::cos(dth), -std::sin(dth)};
        std::complex<double> ph{1.0, 0.0}, acc{0.0, 0.0};
        for (std::size_t j = 0; j < len; ++j) {
            acc += ref[j] * ph;
            ph *= rot;
        }
        power[kb] = std::norm(acc);
    }
    std::size_t kp = 1;
    double total = 0.0;
    for (std::size_t kb = 1; kb <= half; ++kb) {
        total += power[kb];
        if (power[kb] > power[kp])
            kp = kb;
    }
    PhaseProfile pp;
    pp.peak_to_mean = total > 0.0 ? power[kp] / (total / static_cast<double>(half)) : 0.0;
    if (!(pp.peak_to_mean > 20.0))
        throw Error(ErrorCode::NoDominantPeak, "no dominant spectral peak in the BS motion");
    double delta = 0.0;
    if (kp > 1 && kp < half) {
        const double a = std::log(power[kp - 1]), b = std::log(power[kp]),
                     c = std::log(power[kp + 1]);
        const double den = a - 2.0 * b + c;
        if (den < 0.0)
            delta = 0.5 * (a - c) / den;
    }
    const double cycles = (static_cast<double>(kp) + delta) / static_cast<double>(len);
    pp.frequency = kTwoPi * cycles / tr.sample_dt;

    std::vector<std::complex<double>> amp(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        double mb = 0.0;
        for (std::size_t j = 0; j < len; ++j)
            mb += tr.atom(i0 + j, static_cast<int>(b));
        mb /= static_cast<double>(len);
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < len; ++j)
            acc += (tr.atom(i0 + j, static_cast<int>(b)) - mb) * w[j] *
                   std::polar(1.0, -kTwoPi * cycles * static_cast<double>(j));
        amp[b] = acc;
    }
    pp.lag_rad.assign(nb, 0.0);
    for (std::size_t b = 1; b < nb; ++b) {
        double lag = -std::arg(amp[b] / amp[0]);
        const double prev = pp.lag_rad[b - 1];
        lag += kTwoPi * std::round((prev - lag) / kTwoPi);
        pp.lag_rad[b] = lag;
    }
    return pp;
}

double default_dt(const SystemConfig& config, const DerivedParams& d)
{
    const double period = kTwoPi / config.membrane.omega_m;
    double dt = period / config.sim.steps_per_period;
    const double fastest = std::max(config.membrane.omega_m, d.omega_a);
    return std::min(dt, kTwoPi / (50.0 * fastest));
}

SimulationResult simulate(const SystemConfig& config, const SimulateOptions& options)
{
    const auto t0 = std::chrono::steady_clock::now();
    SimulationResult res;
    res.derived = derive(config);
    NonlinearModel model = make_nonlinear_model(config, res.derived);
    model.anharmonic_scale = options.anharmonic_scale;

    SystemState init = equilibrium_state(model, model.ramp.fraction(0.0));
    init.x_m += config.sim.initial_displacement_xth * res.derived.x_thermal;

    const FitOptions fo = fit_options(config);
    double duration = options.duration ? *options.duration
                      : config.sim.duration ? *config.sim.duration
                                            : fo.end + 5e-3;
    const double dt = default_dt(config, res.derived);
    IntegrateOptions io;
    io.sample_stride = config.sim.steps_per_period / config.sim.samples_per_period;
    io.record_atoms_from = options.record_atoms_from;

    if (options.stop_when_fitted) {
        const double period = kTwoPi / config.membrane.omega_m;
        const double pad = (fo.envelope_periods + 2.0) * period;
        const double min_span = fo.min_periods * period + pad;
        const double omega2 = config.membrane.omega_m * config.membrane.omega_m;
        auto ref = std::make_shared<double>(0.0);
        auto t_nl = std::make_shared<double>(std::numeric_limits<double>::infinity());
        io.stop = [=](const Trajectory& tr) {
            const std::size_t i = tr.size() - 1;
            const double t = tr.time(i);
            if (t > fo.end + pad)
                return true;
            if (!std::isfinite(*t_nl) && t >= fo.earliest &&
                tr.excursion[i] > fo.nonlinear_excursion)
                *t_nl = t;
            if (t > *t_nl + pad)
                return true;
            const double energy = tr.x_m[i] * tr.x_m[i] + tr.v_m[i] * tr.v_m[i] / omega2;
            if (t < fo.start)
                return false;
            if (*ref == 0.0)
                *ref = energy;
            return t > fo.start + min_span && energy > 0.0 && *ref > 0.0 &&
                   std::abs(std::log(energy / *ref)) > fo.max_efolds + 1.0;
        };
    }
    res.trajectory = integrate(model, init, duration, dt, io);
    res.fit = extract_damping(res.trajectory, fo);
    if (!options.keep_trajectory)
        res.trajectory = Trajectory{};
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace optolattice
