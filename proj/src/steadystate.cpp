#include "optolattice/steadystate.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "optolattice/error.hpp"
#include "optolattice/params.hpp"
#include "optolattice/tmm.hpp"

namespace optolattice {

double lattice_constant(double zeta, double asymmetry, double wavelength)
{
    const double za2 = zeta * zeta * asymmetry * asymmetry;
    if (za2 > 4.0)
        throw Error(ErrorCode::LatticeOverdriven,
                    "lattice overdriven: zeta^2 A^2 exceeds 4, no equilibrium spacing");
    const double arg = (zeta * std::sqrt(4.0 + asymmetry * asymmetry) +
                        zeta * std::sqrt(4.0 - za2)) /
                       (2.0 * (1.0 + zeta * zeta));
    if (arg > 1.0)
        throw Error(ErrorCode::LatticeOverdriven,
                    "lattice overdriven: arcsin argument exceeds 1");
    const double chi = std::asin(arg);
    return 0.5 * wavelength * (1.0 - chi / kPi);
}

double membrane_steady(double p_in, double G, double omega_c, double kappa, double mass,
                       double omega_m)
{
    return 4.0 * G / (omega_c * kappa) * p_in / (mass * omega_m * omega_m);
}

SteadyPositions steady_positions(int n_bs, double zeta, double reflectivity, double phi_st,
                                 double wavelength, const SteadyOptions& options)
{
    if (n_bs < 1)
        throw Error(ErrorCode::RangeError, "n_bs must be >= 1");
    const double k = kTwoPi / wavelength;
    const double asym = (1.0 - reflectivity * reflectivity) / reflectivity;

    SteadyPositions out;
    out.lattice_constant = lattice_constant(zeta, asym, wavelength);
    const std::size_t n = static_cast<std::size_t>(n_bs);
    std::vector<double> x(n);
    // Nominal well: reduce lambda/2 - phi/2k into (0, lambda].
    double x1 = 0.5 * wavelength - phi_st / (2.0 * k);
    x1 -= wavelength * std::floor(x1 / wavelength);
    if (x1 <= 0.0)
        x1 += 0.5 * wavelength;
    for (std::size_t i = 0; i < n; ++i)
        x[i] = x1 + static_cast<double>(i) * out.lattice_constant;

    std::vector<double> f(n), fp(n), fm(n), trial(n);
    auto eval = [&](const std::vector<double>& pos, std::vector<double>& res) {
        force_kernels(pos, zeta, phi_st, reflectivity, k, res);
    };
    auto max_abs = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double e : v)
            m = std::max(m, std::abs(e));
        return m;
    };

    Eigen::MatrixXd J(n, n);
    const double h = wavelength * 1e-7;
    auto jacobian = [&](const std::vector<double>& pos) {
        std::vector<double> p = pos;
        for (std::size_t j = 0; j < n; ++j) {
            p[j] = pos[j] + h;
            eval(p, fp);
            p[j] = pos[j] - h;
            eval(p, fm);
            p[j] = pos[j];
            for (std::size_t i = 0; i < n; ++i)
                J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (fp[i] - fm[i]) / (2.0 * h);
        }
    };

    eval(x, f);
    double res = max_abs(f);
    int it = 0;
    // Forces are O(zeta); a zero-zeta lattice is force free everywhere.
    while (res > options.tolerance && it < options.max_iterations) {
        ++it;
        jacobian(x);
        Eigen::VectorXd rhs(n);
        for (std::size_t i = 0; i < n; ++i)
            rhs[static_cast<Eigen::Index>(i)] = -f[i];
        Eigen::VectorXd dx = J.colPivHouseholderQr().solve(rhs);
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            for (std::size_t i = 0; i < n; ++i)
                trial[i] = x[i] + lambda * dx[static_cast<Eigen::Index>(i)];
            bool ordered = trial[0] > 0.0;
            for (std::size_t i = 1; i < n && ordered; ++i)
                ordered = trial[i] > trial[i - 1];
            if (ordered) {
                eval(trial, fp);
                if (max_abs(fp) < res || ls == 29) {
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted)
            break;
        x = trial;
        f = fp;
        res = max_abs(f);
    }
    if (res > options.tolerance) {
        std::ostringstream os;
        os << "steady-state force refinement did not converge after " << it
           << " iterations; max residual " << res << " of sigma_L I0 / c";
        throw Error(ErrorCode::NoConvergence, os.str());
    }
    jacobian(x);
    out.positions = x;
    out.residuals = f;
    out.stiffness.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.stiffness[i] = J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    out.iterations = it;
    return out;
}

}  // namespace optolattice
