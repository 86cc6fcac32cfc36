#include "optolattice/linear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <limits>
#include <cmath>

#include "optolattice/error.hpp"

namespace optolattice {

namespace {

using Mat3c = Eigen::Matrix3cd;

Eigen::Matrix3d stiffness(const LinearModel& m)
{
    Eigen::Matrix3d K;
    K << -m.omega_m * m.omega_m + m.k_mm, m.k_m1, m.k_m2,  //
        m.k_1m, m.k_11, m.k_12,                            //
        m.k_2m, m.k_21, m.k_22;
    return K;
}

Eigen::Vector3d damping(const LinearModel& m)
{
    return {m.gamma_m_prime, m.gamma_a, m.gamma_a};
}

double participation(const LinearModel& m, const Eigen::Vector3cd& v)
{
    const double em = m.membrane_mass * std::norm(v[0]);
    const double ea = m.atom_mass * (std::norm(v[1]) + std::norm(v[2]));
    const double tot = em + ea;
    return tot > 0.0 ? em / tot : 0.0;
}

void select_mode(const LinearModel& m, StabilityResult& r)
{
    int best = -1;
    for (std::size_t i = 0; i < r.modes.size(); ++i) {
        if (r.modes[i].membrane_participation < kMembraneParticipation)
            continue;
        if (best < 0 || r.modes[i].value.real() > r.modes[static_cast<std::size_t>(best)].value.real())
            best = static_cast<int>(i);
    }
    if (best < 0) {
        // Fall back to the mode closest to the bare membrane frequency.
        for (std::size_t i = 0; i < r.modes.size(); ++i)
            if (best < 0 ||
                std::abs(std::abs(r.modes[i].value.imag()) - m.omega_m) <
                    std::abs(std::abs(r.modes[static_cast<std::size_t>(best)].value.imag()) -
                             m.omega_m))
                best = static_cast<int>(i);
    }
    if (best < 0)
        throw Error(ErrorCode::IllConditioned, "no oscillatory mode found");
    r.selected = r.modes[static_cast<std::size_t>(best)].value;
    r.gamma_tot = -2.0 * r.selected.real();
}

// The raw problem mixes entries of order Omega^2 with couplings that differ
// by many orders of magnitude between the two directions. Both solvers work
// in time units of 1/Omega_m and with a diagonal similarity that balances
// each membrane-atom pair; eigenvalues are unchanged. A one-way coupling
// leaves the system block triangular and is dropped.
struct Scaled {
    Eigen::Matrix3d K;
    Eigen::Vector3d D;
    Eigen::Vector3d s;
    double w = 1.0;
};

Scaled scaled(const LinearModel& m)
{
    Scaled r;
    const Eigen::Matrix3d K = stiffness(m);
    r.s = Eigen::Vector3d::Ones();
    r.w = m.omega_m;
    bool one_way[3] = {false, false, false};
    for (int j = 1; j < 3; ++j) {
        if (K(0, j) != 0.0 && K(j, 0) != 0.0)
            r.s[j] = std::sqrt(std::abs(K(0, j) / K(j, 0)));
        else
            one_way[j] = true;
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const bool drop = (i == 0 && one_way[j]) || (j == 0 && one_way[i]);
            r.K(i, j) = drop ? 0.0 : r.s[i] * K(i, j) / r.s[j] / (r.w * r.w);
        }
    r.D = damping(m) / r.w;
    return r;
}

// lam in units of Omega_m.
Mat3c characteristic(const Scaled& sc, double tau, std::complex<double> lam)
{
    const std::complex<double> ed = std::exp(-lam * sc.w * tau);
    Mat3c C;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const bool delayed = (i == 0) != (j == 0);
            C(i, j) = -sc.K(i, j) * (delayed ? ed : std::complex<double>(1.0, 0.0));
        }
    for (int i = 0; i < 3; ++i)
        C(i, i) += lam * lam + lam * sc.D[i];
    return C;
}

}  // namespace

LinearModel linear_coefficients(double n, double atom_mass, double membrane_mass,
                                double omega_a, double reflectivity, double f, double nu)
{
    LinearModel lm;
    const double wa2 = omega_a * omega_a;
    const double c = n * atom_mass / (2.0 * membrane_mass) * wa2;
    lm.k_mm = c * reflectivity * (-2.0 + 10.0 * nu) * f * f;
    lm.k_m1 = c * reflectivity * (1.0 - 9.0 * nu) * f;
    lm.k_m2 = c * reflectivity * (1.0 - nu) * f;
    lm.k_1m = wa2 * (1.0 - nu) * f;
    lm.k_2m = wa2 * (1.0 - 9.0 * nu) * f;
    lm.k_11 = wa2 * (-1.0 + nu);
    lm.k_22 = lm.k_11;
    lm.k_12 = 0.0;
    lm.k_21 = wa2 * 8.0 * nu;
    lm.membrane_mass = membrane_mass;
    lm.atom_mass = 0.5 * n * atom_mass;
    return lm;
}

LinearModel linear_model(const SystemConfig& config, const DerivedParams& d)
{
    LinearModel lm = linear_coefficients(d.n_coupled, config.lattice.atom_mass,
                                         config.membrane.mass, d.omega_a, d.reflectivity,
                                         d.coupling_factor, d.nu);
    lm.gamma_m_prime = config.membrane.gamma_m + config.membrane.gamma_opt;
    lm.gamma_a = config.lattice.gamma_a;
    lm.omega_m = config.membrane.omega_m;
    lm.tau = config.delay.tau;
    return lm;
}

StabilityResult stability_eigenvalues(const LinearModel& m)
{
    const Scaled sc = scaled(m);
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
    A.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
    A.block<3, 3>(3, 0) = sc.K;
    A.block<3, 3>(3, 3) = (-sc.D).asDiagonal();
    Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(A, true);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::IllConditioned, "eigenvalue iteration failed");

    StabilityResult r;
    const auto ev = es.eigenvalues();
    const auto V = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::Matrix<std::complex<double>, 6, 6>> svd(V);
    const auto sv = svd.singularValues();
    r.condition = sv[5] > 0.0 ? sv[0] / sv[5] : std::numeric_limits<double>::infinity();
    r.ill_conditioned = !(r.condition < 1e12);
    for (int i = 0; i < 6; ++i) {
        const std::complex<double> lam = ev[i] * sc.w;
        r.eigenvalues.push_back(lam);
        if (lam.imag() <= 0.0)
            continue;
        Eigen::Vector3cd v = V.col(i).head<3>();
        for (int j = 0; j < 3; ++j)
            v[j] /= sc.s[j];
        r.modes.push_back({lam, participation(m, v)});
    }
    select_mode(m, r);
    return r;
}

StabilityResult delay_roots(const LinearModel& m)
{
    LinearModel undelayed = m;
    undelayed.tau = 0.0;
    const StabilityResult base = stability_eigenvalues(undelayed);
    const Scaled sc = scaled(m);
    StabilityResult r;
    r.condition = base.condition;
    r.ill_conditioned = base.ill_conditioned;
    for (const auto& mode : base.modes) {
        std::complex<double> lam = mode.value / sc.w;
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            const std::complex<double> g = characteristic(sc, m.tau, lam).determinant();
            if (g == std::complex<double>(0.0, 0.0)) {
                converged = true;
                break;
            }
            const double h = 1e-6;
            const std::complex<double> dg = (characteristic(sc, m.tau, lam + h).determinant() -
                                             characteristic(sc, m.tau, lam - h).determinant()) /
                                            (2.0 * h);
            if (dg == std::complex<double>(0.0, 0.0))
                break;
            const std::complex<double> step = g / dg;
            lam -= step;
            if (std::abs(step) < 1e-14) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw Error(ErrorCode::NoConvergence, "delay characteristic root did not converge");
        Eigen::JacobiSVD<Mat3c> svd(characteristic(sc, m.tau, lam), Eigen::ComputeFullV);
        Eigen::Vector3cd v = svd.matrixV().col(2);
        for (int j = 0; j < 3; ++j)
            v[j] /= sc.s[j];
        lam *= sc.w;
        r.modes.push_back({lam, participation(m, v)});
        r.eigenvalues.push_back(lam);
        r.eigenvalues.push_back(std::conj(lam));
    }
    select_mode(m, r);
    return r;
}

double dde_dt(const LinearModel& m, double tau, int steps_per_period, int samples_per_period)
{
    const double period = kTwoPi / m.omega_m;
    double n = steps_per_period;
    if (tau > 0.0)
        n = std::max(n, std::ceil(4.0 * period / tau));
    const double q = std::max(1, samples_per_period);
    n = q * std::ceil(n / q);
    return period / n;
}

Trajectory integrate_dde(const LinearModel& m, double tau, const LinearState& initial,
                         double duration, double dt, const IntegrateOptions& options)
{
    if (tau < 0.0)
        throw Error(ErrorCode::RangeError, "delay must be non-negative");
    if (!(dt > 0.0) || !(duration >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "integration step and duration must be positive");
    if (tau > 0.0 && dt > tau / 4.0 * (1.0 + 1e-12))
        throw Error(ErrorCode::RangeError, "dt must not exceed tau/4 for the history buffer");
    if (options.sample_stride < 1)
        throw Error(ErrorCode::InvalidArgument, "sample stride must be >= 1");

    const Eigen::Matrix3d K = stiffness(m);
    const double km0 = K(0, 0), km1 = K(0, 1), km2 = K(0, 2);
    const double k1m = K(1, 0), k11 = K(1, 1), k12 = K(1, 2);
    const double k2m = K(2, 0), k21 = K(2, 1), k22 = K(2, 2);
    const double gm = m.gamma_m_prime, ga = m.gamma_a;

    // Ring buffer of past step states for the retarded positions.
    const std::size_t lag_steps = tau > 0.0 ? static_cast<std::size_t>(std::ceil(tau / dt)) + 3 : 1;
    std::vector<std::array<double, 6>> ring(lag_steps);
    std::size_t newest = 0;  // step index of the newest ring entry

    using S = std::array<double, 6>;
    S y{initial.x[0], initial.x[1], initial.x[2], initial.v[0], initial.v[1], initial.v[2]};
    ring[0] = y;

    auto delayed = [&](double t_query, const S& stage, double out[3]) {
        if (tau == 0.0) {
            out[0] = stage[0];
            out[1] = stage[1];
            out[2] = stage[2];
            return;
        }
        if (t_query <= 0.0) {
            out[0] = initial.x[0];
            out[1] = initial.x[1];
            out[2] = initial.x[2];
            return;
        }
        const double u = t_query / dt;
        auto j = static_cast<std::size_t>(std::floor(u));
        if (j >= newest)
            j = newest - 1;
        const double s = u - static_cast<double>(j);
        const S& a = ring[j % lag_steps];
        const S& b = ring[(j + 1) % lag_steps];
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        for (int c = 0; c < 3; ++c)
            out[c] = h00 * a[c] + h10 * dt * a[c + 3] + h01 * b[c] + h11 * dt * b[c + 3];
    };

    auto deriv = [&](double t, const S& s, S& d) {
        double xd[3];
        delayed(t - tau, s, xd);
        d[0] = s[3];
        d[1] = s[4];
        d[2] = s[5];
        d[3] = km0 * s[0] + km1 * xd[1] + km2 * xd[2] - gm * s[3];
        d[4] = k1m * xd[0] + k11 * s[1] + k12 * s[2] - ga * s[4];
        d[5] = k2m * xd[0] + k21 * s[1] + k22 * s[2] - ga * s[5];
    };

    Trajectory tr;
    tr.dt = dt;
    tr.sample_dt = dt * options.sample_stride;
    tr.n_bs = 2;
    tr.omega_m = m.omega_m;
    const auto n_steps = static_cast<std::size_t>(std::llround(duration / dt));
    const std::size_t n_samples = n_steps / static_cast<std::size_t>(options.sample_stride) + 1;
    tr.x_m.reserve(n_samples);
    tr.v_m.reserve(n_samples);
    tr.excursion.reserve(n_samples);
    std::size_t atoms_from = n_samples;
    if (options.record_atoms_from)
        atoms_from = static_cast<std::size_t>(
            std::max(0.0, std::ceil(*options.record_atoms_from / tr.sample_dt)));
    tr.atoms_from = atoms_from;

    std::size_t sample = 0;
    auto record = [&]() {
        tr.x_m.push_back(y[0]);
        tr.v_m.push_back(y[3]);
        tr.excursion.push_back(0.0);
        if (sample >= atoms_from) {
            tr.atoms.push_back(y[1]);
            tr.atoms.push_back(y[2]);
        }
    };
    record();

    S k1, k2, k3, k4, tmp, last = y;
    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t = static_cast<double>(step - 1) * dt;
        deriv(t, y, k1);
        for (int c = 0; c < 6; ++c)
            tmp[c] = y[c] + 0.5 * dt * k1[c];
        deriv(t + 0.5 * dt, tmp, k2);
        for (int c = 0; c < 6; ++c)
            tmp[c] = y[c] + 0.5 * dt * k2[c];
        deriv(t + 0.5 * dt, tmp, k3);
        for (int c = 0; c < 6; ++c)
            tmp[c] = y[c] + dt * k3[c];
        deriv(t + dt, tmp, k4);
        for (int c = 0; c < 6; ++c)
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        newest = step;
        ring[step % lag_steps] = y;

        if (step % static_cast<std::size_t>(options.sample_stride) != 0)
            continue;
        bool finite = true;
        for (double e : y)
            finite = finite && std::isfinite(e);
        if (!finite) {
            tr.blowup = true;
            y = last;
            break;
        }
        ++sample;
        record();
        last = y;
        if (options.stop && options.stop(tr)) {
            tr.stopped_early = step < n_steps;
            break;
        }
    }
    tr.final_state.x_m = y[0];
    tr.final_state.v_m = y[3];
    tr.final_state.x = {y[1], y[2]};
    tr.final_state.v = {y[4], y[5]};
    return tr;
}

}  // namespace optolattice
