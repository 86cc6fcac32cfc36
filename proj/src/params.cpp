#include "optolattice/params.hpp"

#include <cmath>
#include <sstream>

#include "optolattice/error.hpp"

namespace optolattice {

const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::UnknownKey: return "unknown_key";
    case ErrorCode::TypeMismatch: return "type_mismatch";
    case ErrorCode::RangeError: return "range_error";
    case ErrorCode::Resonance: return "resonance";
    case ErrorCode::LatticeOverdriven: return "lattice_overdriven";
    case ErrorCode::NoConvergence: return "no_convergence";
    case ErrorCode::NumericalBlowup: return "numerical_blowup";
    case ErrorCode::IllConditioned: return "ill_conditioned";
    case ErrorCode::NoDominantPeak: return "no_dominant_peak";
    case ErrorCode::Io: return "io";
    }
    return "unknown";
}

namespace {

using C = PhysicalConstants;

[[noreturn]] void range_error(const std::string& what)
{
    throw Error(ErrorCode::RangeError, what);
}

}  // namespace

OpticsCoefficients derive_optics(double eta, double t, double r_m, double finesse)
{
    if (!(eta > 0.0 && eta <= 1.0))
        range_error("incoupling efficiency eta must lie in (0, 1]");
    if (!(t > 0.0 && t <= 1.0))
        range_error("path transmission t must lie in (0, 1]");
    const double R = eta * t * t;
    const double A = (1.0 - R * R) / R;
    const double f = 2.0 * std::abs(r_m) * (2.0 * finesse / kPi);
    return {R, A, f};
}

double derive_zeta(double n_bs_atoms, double delta_la, double linewidth, double wavelength,
                   double sigma_l)
{
    if (delta_la == 0.0)
        throw Error(ErrorCode::Resonance, "atom-light detuning is zero (resonant lattice)");
    if (delta_la > 0.0)
        range_error("atom-light detuning must be negative (red lattice)");
    if (!(sigma_l > 0.0))
        range_error("beam area sigma_L must be positive");
    return (linewidth / -delta_la) * n_bs_atoms * wavelength * wavelength / (4.0 * kPi * sigma_l);
}

double atomic_polarizability(double delta_la, double linewidth, double wavelength)
{
    if (delta_la == 0.0)
        throw Error(ErrorCode::Resonance, "atom-light detuning is zero (resonant lattice)");
    return (linewidth / -delta_la) / (4.0 * kPi * kPi) * C::vacuum_permittivity * wavelength *
           wavelength * wavelength;
}

double zeta_from_polarizability(double n_bs_atoms, double delta_la, double linewidth,
                                double wavelength, double sigma_l)
{
    if (!(sigma_l > 0.0))
        range_error("beam area sigma_L must be positive");
    const double alpha = atomic_polarizability(delta_la, linewidth, wavelength);
    const double density = n_bs_atoms / sigma_l;
    const double k = kTwoPi / wavelength;
    return k * density * alpha / (2.0 * C::vacuum_permittivity);
}

double derive_nu(double zeta, double asymmetry)
{
    return asymmetry * asymmetry * zeta * zeta / 8.0;
}

double resonant_atom_number(double n_lat, double gamma_a, double omega_m, double alpha)
{
    if (!(omega_m > 0.0))
        range_error("membrane frequency must be positive");
    return alpha * (kPi * gamma_a / (2.0 * omega_m)) * n_lat;
}

double resonant_atom_number(double n_lat, double gamma_a, double omega_m, double alpha,
                            CoupledAtoms mode)
{
    if (mode == CoupledAtoms::All)
        return n_lat;
    return resonant_atom_number(n_lat, gamma_a, omega_m, alpha);
}

CouplingRates coupling_rates(double n, double atom_mass, double membrane_mass, double omega_a,
                             double omega_m, double r_m, double finesse, double eta, double t,
                             double gamma_a)
{
    if (gamma_a == 0.0)
        throw Error(ErrorCode::InvalidArgument,
                    "atomic damping Gamma_a is zero: sympathetic cooling rate undefined");
    if (n < 0.0)
        range_error("atom number must be non-negative");
    const double g_n = std::abs(r_m) * omega_a *
                       std::sqrt(n * atom_mass * omega_a / (membrane_mass * omega_m)) *
                       (2.0 * finesse / kPi);
    const double gamma_sym = 4.0 * eta * eta * t * t * g_n * g_n / gamma_a;
    return {g_n, gamma_sym};
}

double omega_a_from_fields(double zeta, double n_atoms, double atom_mass, double k,
                           double sigma_l, double i0, double i1)
{
    if (n_atoms == 0.0)
        throw Error(ErrorCode::InvalidArgument, "trap frequency undefined for an empty sheet");
    if (i0 < 0.0 || i1 < 0.0)
        range_error("beam intensities must be non-negative");
    const double stiffness = 8.0 * k * sigma_l * zeta * std::sqrt(i0 * i1) / C::speed_of_light;
    return std::sqrt(stiffness / (n_atoms * atom_mass));
}

double gamma_opt_from_cooling(double mean_sq_displacement, double thermal_mean_sq, double gamma_m)
{
    if (!(mean_sq_displacement > 0.0))
        range_error("measured mean-square displacement must be positive");
    if (mean_sq_displacement > thermal_mean_sq * (1.0 + 1e-12))
        range_error("measured mean-square displacement exceeds the thermal value");
    return gamma_m * (thermal_mean_sq / mean_sq_displacement - 1.0);
}

double effective_sigma_l(const LatticeAtomConfig& lattice)
{
    if (lattice.sigma_l)
        return *lattice.sigma_l;
    return kPi * lattice.waist * lattice.waist / 2.0;
}

void validate(const SystemConfig& config)
{
    const auto& mc = config.membrane;
    const auto& la = config.lattice;
    const auto& sim = config.sim;
    if (!(mc.mass > 0.0)) range_error("membrane.mass_kg must be positive");
    if (!(mc.omega_m > 0.0)) range_error("membrane.omega_m_hz must be positive");
    if (!(mc.gamma_m >= 0.0)) range_error("membrane.gamma_m_per_s must be >= 0");
    if (!(mc.gamma_opt >= 0.0)) range_error("membrane.gamma_opt_per_s must be >= 0");
    if (!(mc.r_m >= 0.0 && mc.r_m <= 1.0)) range_error("membrane.reflectivity must lie in [0, 1]");
    if (!(mc.eta > 0.0 && mc.eta <= 1.0)) range_error("cavity.eta must lie in (0, 1]");
    if (!(mc.placement_factor > 0.0 && mc.placement_factor <= 1.0))
        range_error("cavity.placement_factor must lie in (0, 1]");
    if (!(mc.kappa > 0.0)) range_error("cavity.kappa_hz must be positive");
    if (!(mc.finesse > 0.0)) range_error("cavity.finesse must be positive");
    if (mc.omega_c && !(*mc.omega_c > 0.0)) range_error("cavity.omega_c_hz must be positive");

    if (!(la.n_lat >= 0.0)) range_error("lattice.n_lat must be >= 0");
    if (la.n_bs < 1) range_error("lattice.n_bs must be >= 1");
    if (!(la.atom_mass > 0.0)) range_error("atoms.mass_kg must be positive");
    if (!(la.gamma_a > 0.0)) range_error("atoms.gamma_a_per_s must be positive");
    if (la.delta_la == 0.0)
        throw Error(ErrorCode::Resonance, "atoms.delta_la_hz is zero (resonant lattice)");
    if (!(la.delta_la < 0.0)) range_error("atoms.delta_la_hz must be negative (red detuning)");
    if (!(la.natural_linewidth > 0.0)) range_error("atoms.linewidth_hz must be positive");
    if (!(la.wavelength > 0.0)) range_error("lattice.wavelength_m must be positive");
    if (!(la.waist > 0.0)) range_error("lattice.waist_m must be positive");
    if (la.sigma_l && !(*la.sigma_l > 0.0)) range_error("lattice.sigma_l_m2 must be positive");
    if (!(la.power > 0.0)) range_error("lattice.power_w must be positive");
    if (!(la.path_transmission > 0.0 && la.path_transmission <= 1.0))
        range_error("lattice.t must lie in (0, 1]");
    if (!(la.trapped_fraction > 0.0 && la.trapped_fraction <= 1.0))
        range_error("lattice.trapped_fraction must lie in (0, 1]");
    if (!(la.sheet_fraction > 0.0 && la.sheet_fraction <= 1.0))
        range_error("lattice.sheet_fraction must lie in (0, 1]");
    if (la.omega_a && !(*la.omega_a > 0.0)) range_error("atoms.omega_a_hz must be positive");

    if (sim.steps_per_period < 50) range_error("sim.steps_per_period must be >= 50");
    if (sim.samples_per_period < 4 || sim.steps_per_period % sim.samples_per_period != 0)
        range_error("sim.samples_per_period must be >= 4 and divide sim.steps_per_period");
    if (!(sim.ramp_duration >= 0.0)) range_error("sim.ramp_duration_s must be >= 0");
    if (!(sim.ramp_start_power > 0.0)) range_error("sim.ramp_start_power_w must be positive");
    if (sim.duration && !(*sim.duration > 0.0)) range_error("sim.duration_s must be positive");
    if (!(sim.temperature > 0.0)) range_error("sim.temperature_k must be positive");
    if (!(sim.fit_end > sim.fit_start && sim.fit_start >= 0.0))
        range_error("sim.fit_start_s / sim.fit_end_s must satisfy 0 <= start < end");
    if (!(sim.envelope_periods > 0.0)) range_error("sim.envelope_periods must be positive");
    if (!(sim.max_fit_efolds > 0.0)) range_error("sim.max_fit_efolds must be positive");

    if (!(config.delay.tau >= 0.0)) range_error("delay.tau_s must be >= 0");

    const auto& sw = config.sweep;
    if (sw.points < 1) range_error("sweep.points must be >= 1");
    if (!(sw.n_lat_min > 0.0 && sw.n_lat_max >= sw.n_lat_min))
        range_error("sweep grid must be positive and monotone");
    if (sw.n_bs.empty()) range_error("sweep.n_bs must not be empty");
    for (int n : sw.n_bs)
        if (n < 1) range_error("sweep.n_bs entries must be >= 1");

    const auto& ba = config.backaction;
    if (!(ba.f_min > 0.0 && ba.f_max > ba.f_min)) range_error("backaction frequency range invalid");
    if (ba.points < 2) range_error("backaction.points must be >= 2");
    if (!(ba.phi_rms > 0.0 && ba.pd_conversion > 0.0 && ba.impedance > 0.0 &&
          ba.bandwidth > 0.0))
        range_error("backaction calibration values must be positive");
    if (!(ba.pickup > 0.0 && ba.pickup <= 1.0)) range_error("backaction.pickup must lie in (0, 1]");

    if (config.modes.n_bs < 1) range_error("modes.n_bs must be >= 1");
    if (config.modes.n_lat.empty()) range_error("modes.n_lat must not be empty");
}

DerivedParams derive(const SystemConfig& config)
{
    validate(config);
    const auto& mc = config.membrane;
    const auto& la = config.lattice;

    DerivedParams d;
    d.k = kTwoPi / la.wavelength;
    d.sigma_l = effective_sigma_l(la);
    d.omega_c = mc.omega_c ? *mc.omega_c : kTwoPi * C::speed_of_light / la.wavelength;

    const auto optics = derive_optics(mc.eta, la.path_transmission, mc.r_m, mc.finesse);
    d.reflectivity = optics.R;
    d.asymmetry = optics.A;
    d.cavity_factor = optics.f;
    d.coupling_factor = mc.placement_factor * optics.f;

    // Membrane phase 4 G x / kappa = 2 k f_eff x, with f_eff = placement * f.
    d.x_zpf = std::sqrt(C::reduced_planck / (2.0 * mc.mass * mc.omega_m));
    d.G = d.coupling_factor * d.k * mc.kappa / 2.0;
    const double g_from_g0 = mc.g0 / d.x_zpf;
    if (std::abs(g_from_g0 - d.G) > 0.05 * d.G) {
        std::ostringstream os;
        os << "g0/x_zpf = " << g_from_g0 << " differs from placement*G_max = " << d.G
           << " by more than 5%";
        d.warnings.push_back(os.str());
    }

    d.n_coupled = resonant_atom_number(la.n_lat, la.gamma_a, mc.omega_m, la.trapped_fraction,
                                       la.coupled_atoms);
    d.n_sheets = la.sheet_fraction * la.n_lat;
    d.n_per_bs = d.n_sheets / la.n_bs;
    d.zeta_per_atom =
        derive_zeta(1.0, la.delta_la, la.natural_linewidth, la.wavelength, d.sigma_l);
    d.zeta = derive_zeta(d.n_per_bs, la.delta_la, la.natural_linewidth, la.wavelength, d.sigma_l);
    d.nu = derive_nu(d.zeta, d.asymmetry);
    d.motion_weight = d.n_sheets > 0.0 ? d.n_coupled / d.n_sheets : 0.0;

    const double t2 = la.path_transmission * la.path_transmission;
    const double i0_launched = la.power * t2 / d.sigma_l;
    const double i1_launched = d.reflectivity * d.reflectivity * i0_launched;
    d.omega_a_from_fields = omega_a_from_fields(d.zeta_per_atom, 1.0, la.atom_mass, d.k,
                                                d.sigma_l, i0_launched, i1_launched);
    if (la.omega_a) {
        d.omega_a = *la.omega_a;
        d.intensity_in = d.omega_a * d.omega_a * C::speed_of_light * la.atom_mass /
                         (8.0 * d.k * d.sigma_l * d.zeta_per_atom * d.reflectivity);
        if (std::abs(d.omega_a_from_fields - d.omega_a) > 0.05 * d.omega_a) {
            std::ostringstream os;
            os << "supplied Omega_a/2pi = " << d.omega_a / kTwoPi
               << " Hz disagrees with the field-derived value " << d.omega_a_from_fields / kTwoPi
               << " Hz by more than 5%; using the supplied value";
            d.warnings.push_back(os.str());
        }
    }
    else {
        d.omega_a = d.omega_a_from_fields;
        d.intensity_in = i0_launched;
    }
    d.power_effective = d.intensity_in * d.sigma_l / t2;

    const auto rates = coupling_rates(d.n_coupled, la.atom_mass, mc.mass, d.omega_a, mc.omega_m,
                                      mc.placement_factor * mc.r_m, mc.finesse, mc.eta,
                                      la.path_transmission, la.gamma_a);
    d.g_n = rates.g_n;
    d.gamma_sym = rates.gamma_sym;
    d.gamma_m_total = mc.gamma_m + mc.gamma_opt;
    d.x_thermal = std::sqrt(C::boltzmann * config.sim.temperature /
                            (mc.mass * mc.omega_m * mc.omega_m));
    return d;
}

}  // namespace optolattice
