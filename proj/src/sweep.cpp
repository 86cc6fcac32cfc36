#include "optolattice/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

#include "optolattice/error.hpp"

namespace optolattice {

std::vector<double> log_grid(double lo, double hi, int n)
{
    if (n < 1 || !(lo > 0.0) || hi < lo)
        throw Error(ErrorCode::RangeError, "log grid needs n >= 1 and 0 < lo <= hi");
    std::vector<double> g(static_cast<std::size_t>(n));
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task)
{
    std::size_t w = workers > 0 ? static_cast<std::size_t>(workers)
                                : std::max(1u, std::thread::hardware_concurrency());
    w = std::min(w, n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n)
                    return;
                try {
                    task(i);
                }
                catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first_error)
                        first_error = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

std::vector<DampingPoint> damping_sweep(const SystemConfig& config, const std::vector<double>& grid,
                                        int n_bs, int workers, const ProgressFn& progress)
{
    std::vector<DampingPoint> out(grid.size());
    std::mutex log_mu;
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        SystemConfig c = config;
        c.lattice.n_lat = grid[i];
        c.lattice.n_bs = n_bs;
        DampingPoint& p = out[i];
        p.n_lat = grid[i];
        p.n_bs = n_bs;
        try {
            SimulateOptions so;
            so.keep_trajectory = false;
            const auto r = simulate(c, so);
            p.n_coupled = r.derived.n_coupled;
            p.zeta = r.derived.zeta;
            p.nu = r.derived.nu;
            p.gamma_tot = r.fit.gamma_tot;
            p.r_squared = r.fit.r_squared;
            p.window_start = r.fit.window_start;
            p.window_end = r.fit.window_end;
            p.method = r.fit.method;
            p.low_confidence = r.fit.low_confidence;
            p.wall_seconds = r.wall_seconds;
        }
        catch (const std::exception& e) {
            p.error = e.what();
            p.gamma_tot = std::nan("");
        }
        if (progress) {
            std::lock_guard<std::mutex> lock(log_mu);
            char buf[200];
            std::snprintf(buf, sizeof buf, "n_bs=%d n_lat=%.4g gamma_tot=%.6g (%.2f s)%s%s", n_bs,
                          p.n_lat, p.gamma_tot, p.wall_seconds, p.error.empty() ? "" : " error: ",
                          p.error.c_str());
            progress(buf);
        }
    });
    return out;
}

StabilityPoint stability_point(const SystemConfig& config, double n_lat, bool use_delay)
{
    SystemConfig c = config;
    c.lattice.n_lat = n_lat;
    c.lattice.n_bs = 2;
    const DerivedParams d = derive(c);
    LinearModel lm = linear_model(c, d);
    if (!use_delay)
        lm.tau = 0.0;
    const StabilityResult r = use_delay ? delay_roots(lm) : stability_eigenvalues(lm);
    StabilityPoint p;
    p.n_lat = n_lat;
    p.n_coupled = d.n_coupled;
    p.nu = d.nu;
    p.gamma_tot = r.gamma_tot;
    p.re = r.selected.real();
    p.im = r.selected.imag();
    p.condition = r.condition;
    p.ill_conditioned = r.ill_conditioned;
    return p;
}

std::vector<StabilityPoint> stability_sweep(const SystemConfig& config,
                                            const std::vector<double>& grid, bool use_delay)
{
    std::vector<StabilityPoint> out;
    out.reserve(grid.size());
    for (double n : grid)
        out.push_back(stability_point(config, n, use_delay));
    return out;
}

std::optional<double> crossing(const std::vector<double>& n_lat, const std::vector<double>& gamma)
{
    for (std::size_t i = 1; i < n_lat.size() && i < gamma.size(); ++i) {
        if (gamma[i - 1] > 0.0 && gamma[i] <= 0.0) {
            const double a = std::log(n_lat[i - 1]), b = std::log(n_lat[i]);
            const double u = gamma[i - 1] / (gamma[i - 1] - gamma[i]);
            return std::exp(a + u * (b - a));
        }
    }
    return std::nullopt;
}

double find_threshold(const std::function<double(double)>& gamma_of_n, double lo, double hi,
                      double rel_tol, int max_evals)
{
    double a = std::log(lo), b = std::log(hi);
    double fa = gamma_of_n(lo), fb = gamma_of_n(hi);
    int evals = 2;
    if (!(fa > 0.0 && fb <= 0.0))
        throw Error(ErrorCode::NoConvergence, "threshold is not bracketed by the search interval");
    int side = 0;
    double prev = std::numeric_limits<double>::quiet_NaN();
    while (b - a > rel_tol && evals < max_evals) {
        // Illinois variant of regula falsi.
        const double c = b - fb * (b - a) / (fb - fa);
        const double fc = gamma_of_n(std::exp(c));
        ++evals;
        if (fc > 0.0) {
            a = c;
            fa = fc;
            if (side == -1)
                fb *= 0.5;
            side = -1;
        }
        else {
            b = c;
            fb = fc;
            if (side == 1)
                fa *= 0.5;
            side = 1;
        }
        if (std::abs(fc) == 0.0)
            return std::exp(c);
        if (std::abs(c - prev) < 0.25 * rel_tol)
            return std::exp(c);
        prev = c;
    }
    return std::exp(b - fb * (b - a) / (fb - fa));
}

DampingFit dde_damping(const SystemConfig& config, double n_lat, double tau)
{
    SystemConfig c = config;
    c.lattice.n_lat = n_lat;
    c.lattice.n_bs = 2;
    const DerivedParams d = derive(c);
    const LinearModel lm = linear_model(c, d);
    LinearState init;
    init.x[0] = c.sim.initial_displacement_xth * d.x_thermal;

    const double dt = dde_dt(lm, tau, c.sim.steps_per_period, c.sim.samples_per_period);
    const double period = kTwoPi / lm.omega_m;
    const int stride = static_cast<int>(std::lround(period / dt)) / c.sim.samples_per_period;
    FitOptions fo;
    fo.start = c.sim.fit_start;
    fo.end = c.sim.fit_end;
    fo.envelope_periods = c.sim.envelope_periods;
    fo.max_efolds = c.sim.max_fit_efolds;
    fo.nonlinear_excursion = INFINITY;
    fo.earliest = 0.0;
    IntegrateOptions io;
    io.sample_stride = stride;
    const double pad = (fo.envelope_periods + 2.0) * period;
    const double omega2 = lm.omega_m * lm.omega_m;
    auto ref = std::make_shared<double>(0.0);
    io.stop = [=](const Trajectory& tr) {
        const std::size_t i = tr.size() - 1;
        const double t = tr.time(i);
        if (t < fo.start)
            return false;
        const double e = tr.x_m[i] * tr.x_m[i] + tr.v_m[i] * tr.v_m[i] / omega2;
        if (*ref == 0.0)
            *ref = e;
        return t > fo.start + fo.min_periods * period + pad && e > 0.0 &&
               std::abs(std::log(e / *ref)) > fo.max_efolds + 1.0;
    };
    Trajectory tr = integrate_dde(lm, tau, init, fo.end + pad, dt, io);
    return extract_damping(tr, fo);
}

}  // namespace optolattice
