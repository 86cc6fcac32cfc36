#include "optolattice/backaction.hpp"

#include <cmath>

#include "optolattice/error.hpp"

namespace optolattice {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

double prefactor(double omega_a, double n, double atom_mass, double k)
{
    return 0.5 * PhysicalConstants::speed_of_light * n * atom_mass * omega_a * omega_a /
           (2.0 * k);
}

}  // namespace

BackactionParams backaction_params(const SystemConfig& config, const DerivedParams& d)
{
    BackactionParams p;
    p.omega_a = d.omega_a;
    p.gamma_a = config.lattice.gamma_a;
    p.n = d.n_coupled;
    p.atom_mass = config.lattice.atom_mass;
    p.k = d.k;
    p.nu = d.nu;
    return p;
}

std::complex<double> tf_one_bs(double omega, double omega_a, double gamma_a, double n,
                               double atom_mass, double k)
{
    const std::complex<double> den = omega_a * omega_a - omega * omega + kI * gamma_a * omega;
    if (den == std::complex<double>(0.0, 0.0))
        throw Error(ErrorCode::Resonance, "one-BS response has a pole at Omega = Omega_a");
    return -prefactor(omega_a, n, atom_mass, k) * (1.0 - omega_a * omega_a / den);
}

std::complex<double> tf_two_bs(double omega, double omega_a, double gamma_a, double n,
                               double atom_mass, double k, double nu)
{
    const std::complex<double> s = omega * (-kI * gamma_a + omega);
    const double wa2 = omega_a * omega_a;
    const std::complex<double> den_root = gamma_a * omega + kI * (omega * omega + (-1.0 + nu) * wa2);
    const std::complex<double> den = den_root * den_root;
    if (den == std::complex<double>(0.0, 0.0))
        throw Error(ErrorCode::Resonance, "two-BS response has an undamped resonance");
    const std::complex<double> num = s * ((1.0 - 5.0 * nu) * s - (-1.0 + nu) * (-1.0 + nu) * wa2);
    return prefactor(omega_a, n, atom_mass, k) * num / den;
}

TfSweep sweep_tf(TfModel model, double omega_min, double omega_max, int n_points, bool log_grid,
                 const BackactionParams& p)
{
    if (!(omega_min > 0.0 && omega_max > omega_min))
        throw Error(ErrorCode::RangeError, "frequency range must be positive and increasing");
    if (n_points < 2)
        throw Error(ErrorCode::RangeError, "sweep needs at least 2 points");
    TfSweep out;
    out.model = model;
    out.points.reserve(static_cast<std::size_t>(n_points));
    bool have_phase = false;
    double prev = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const double u = static_cast<double>(i) / (n_points - 1);
        const double w = log_grid ? omega_min * std::pow(omega_max / omega_min, u)
                                  : omega_min + (omega_max - omega_min) * u;
        TransferFunctionPoint pt;
        pt.omega = w;
        try {
            pt.response = model == TfModel::OneBs
                              ? tf_one_bs(w, p.omega_a, p.gamma_a, p.n, p.atom_mass, p.k)
                              : tf_two_bs(w, p.omega_a, p.gamma_a, p.n, p.atom_mass, p.k, p.nu);
        }
        catch (const Error&) {
            pt.skipped = true;
            ++out.skipped;
            out.points.push_back(pt);
            continue;
        }
        // Delay = -arg; the first point is placed in [0, 360).
        double delay = -std::arg(pt.response);
        if (!have_phase) {
            if (delay < 0.0)
                delay += kTwoPi;
            have_phase = true;
        }
        else {
            delay += kTwoPi * std::round((prev - delay) / kTwoPi);
        }
        prev = delay;
        pt.phase_delay_deg = delay * 180.0 / kPi;
        out.max_phase_delay_deg =
            out.points.size() == out.skipped ? pt.phase_delay_deg
                                             : std::max(out.max_phase_delay_deg, pt.phase_delay_deg);
        out.points.push_back(pt);
    }
    return out;
}

CalibrationChain calibration_chain(const BackactionConfig& c)
{
    return {c.phi_rms, c.pickup, c.pd_conversion, c.impedance, c.bandwidth};
}

double electrical_calibration(std::complex<double> response, const CalibrationChain& chain,
                              double offset_db)
{
    const double v = std::abs(response) * chain.phi_rms * chain.pickup * chain.pd_conversion;
    const double p_elec = v * v / chain.impedance;
    if (!(p_elec > 0.0))
        return kZeroPowerDbm;
    return 10.0 * std::log10(p_elec / 1e-3) + offset_db;
}

}  // namespace optolattice
