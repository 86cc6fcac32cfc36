#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace optolattice {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// CODATA 2018 exact / recommended values.
struct PhysicalConstants {
    static constexpr double speed_of_light = 299792458.0;          // m/s
    static constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
    static constexpr double boltzmann = 1.380649e-23;               // J/K
    static constexpr double reduced_planck = 1.054571817e-34;       // J s
    static constexpr double atomic_mass_unit = 1.66053906660e-27;   // kg
};

struct MembraneCavityConfig {
    double mass = 117e-12;                      // kg
    double omega_m = kTwoPi * 276e3;            // rad/s
    double gamma_m = 0.96;                      // 1/s
    double gamma_opt = 10.6;                    // 1/s
    double kappa = kTwoPi * 290e6;              // rad/s
    double finesse = 570.0;
    double r_m = 0.41;                          // membrane amplitude reflectivity
    double g0 = 690.0;                          // 1/s
    std::optional<double> omega_c;              // rad/s, defaults to the laser frequency
    double placement_factor = 0.63;
    double eta = 1.0;                           // incoupling efficiency
};

enum class CoupledAtoms {
    Resonant,  // N = alpha * (pi Gamma_a / 2 Omega_m) * N_lat
    All,       // N = N_lat
};

struct LatticeAtomConfig {
    double n_lat = 0.0;
    int n_bs = 2;
    double atom_mass = 86.909180527 * PhysicalConstants::atomic_mass_unit;  // 87Rb
    double gamma_a = 233.0;                         // 1/s
    double delta_la = -kTwoPi * 960e6;              // rad/s
    double natural_linewidth = kTwoPi * 6.066e6;    // rad/s, Rb D2
    double wavelength = 780e-9;                     // m
    double waist = 280e-6;                          // m
    std::optional<double> sigma_l;                  // m^2, defaults to pi w0^2 / 2
    double power = 3.4e-3;                          // W launched
    double path_transmission = 0.71;
    double trapped_fraction = 0.11;                 // alpha
    // Fraction of N_lat that forms the polarizable sheets (sets zeta).
    double sheet_fraction = 0.3;
    CoupledAtoms coupled_atoms = CoupledAtoms::Resonant;
    std::optional<double> omega_a = kTwoPi * 276e3; // rad/s; unset -> derived from fields
};

struct SimulationConfig {
    bool ramp = true;
    double ramp_duration = 10e-3;           // s
    double ramp_start_power = 0.1e-3;       // W
    int steps_per_period = 200;
    int samples_per_period = 20;
    std::optional<double> duration;         // s; default ramp + fit_end + 5 ms
    double initial_displacement_xth = 1e-6; // membrane offset in units of x_th
    double temperature = 300.0;             // K
    double fit_start = 50e-3;               // s after ramp end
    double fit_end = 300e-3;                // s after ramp end
    double envelope_periods = 3.0;
    double max_fit_efolds = 10.0;
};

struct DelayConfig {
    double tau = 36e-9;
    double tau_prop = 30e-9;
    double tau_cav = 0.6e-9;
};

struct SweepConfig {
    double n_lat_min = 1e6;
    double n_lat_max = 1e8;
    int points = 20;
    std::vector<int> n_bs = {1, 2, 4};
};

struct BackactionConfig {
    double f_min = 100e3;   // Hz
    double f_max = 600e3;   // Hz
    int points = 501;
    bool log_grid = false;
    double phi_rms = 0.116;
    double pickup = 0.03;
    double pd_conversion = 350.0;  // V/W
    double impedance = 50.0;       // Ohm
    double bandwidth = 18.0;       // Hz
    double offset_db = -43.0;
    bool apply_offset = false;
};

struct ModesConfig {
    int n_bs = 10;
    std::vector<double> n_lat = {0.3e7, 8e7};
};

struct SystemConfig {
    MembraneCavityConfig membrane;
    LatticeAtomConfig lattice;
    SimulationConfig sim;
    DelayConfig delay;
    SweepConfig sweep;
    BackactionConfig backaction;
    ModesConfig modes;
};

// Quantities computed from a SystemConfig. Everything is a pure function of
// the configuration.
struct DerivedParams {
    double k = 0.0;             // 1/m
    double sigma_l = 0.0;       // m^2
    double omega_c = 0.0;       // rad/s
    double reflectivity = 0.0;  // R = eta t^2
    double asymmetry = 0.0;     // A = (1 - R^2) / R
    double cavity_factor = 0.0;   // f = 2 |r_m| 2F/pi
    double coupling_factor = 0.0; // placement_factor * f, used by all dynamics
    double x_zpf = 0.0;
    double G = 0.0;             // optomechanical coupling, rad/(s m)
    double n_coupled = 0.0;     // N
    double n_sheets = 0.0;      // atoms forming the sheets
    double n_per_bs = 0.0;      // sheet atoms per BS
    double zeta_per_atom = 0.0;
    double zeta = 0.0;          // per BS
    double nu = 0.0;
    double motion_weight = 0.0; // N / n_sheets, share of sheet motion felt by the membrane
    double omega_a = 0.0;       // rad/s
    double omega_a_from_fields = 0.0;
    double intensity_in = 0.0;  // W/m^2 at the atoms, rightmost plane
    double power_effective = 0.0;  // launched power consistent with omega_a
    double g_n = 0.0;
    double gamma_sym = 0.0;
    double gamma_m_total = 0.0;    // Gamma_m + Gamma_opt
    double x_thermal = 0.0;        // sqrt(kB T / M Omega_m^2)
    std::vector<std::string> warnings;
};

struct OpticsCoefficients {
    double R;
    double A;
    double f;
};

OpticsCoefficients derive_optics(double eta, double t, double r_m, double finesse);

// zeta = (Gamma / -Delta) N_BS lambda^2 / (4 pi sigma_L)
double derive_zeta(double n_bs_atoms, double delta_la, double linewidth, double wavelength,
                   double sigma_l);

// Same quantity through the sheet polarizability: zeta = k eta alpha / 2 eps0,
// alpha = (Gamma / -Delta) eps0 lambda^3 / (4 pi^2), eta = N_BS / sigma_L.
double atomic_polarizability(double delta_la, double linewidth, double wavelength);
double zeta_from_polarizability(double n_bs_atoms, double delta_la, double linewidth,
                                double wavelength, double sigma_l);

double derive_nu(double zeta, double asymmetry);

double resonant_atom_number(double n_lat, double gamma_a, double omega_m, double alpha);
double resonant_atom_number(double n_lat, double gamma_a, double omega_m, double alpha,
                            CoupledAtoms mode);

struct CouplingRates {
    double g_n;
    double gamma_sym;
};

CouplingRates coupling_rates(double n, double atom_mass, double membrane_mass, double omega_a,
                             double omega_m, double r_m, double finesse, double eta, double t,
                             double gamma_a);

// Omega_a = sqrt(8 k sigma_L zeta sqrt(I0 I1) / (c N m)), zeta the sheet value for N atoms.
double omega_a_from_fields(double zeta, double n_atoms, double atom_mass, double k,
                           double sigma_l, double i0, double i1);

double gamma_opt_from_cooling(double mean_sq_displacement, double thermal_mean_sq,
                              double gamma_m);

double effective_sigma_l(const LatticeAtomConfig& lattice);

void validate(const SystemConfig& config);

DerivedParams derive(const SystemConfig& config);

}  // namespace optolattice
