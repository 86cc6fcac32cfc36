#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optolattice/params.hpp"

namespace optolattice {

// Membrane displacement from its steady position plus per-BS displacements
// from their steady positions.
struct SystemState {
    double x_m = 0.0;
    double v_m = 0.0;
    std::vector<double> x;
    std::vector<double> v;
};

// Lattice power expressed as a fraction of the final power. Omega_a^2 scales
// with power, so this is a linear Omega_a^2 ramp.
struct RampSchedule {
    bool enabled = false;
    double duration = 0.0;
    double start_fraction = 1.0;

    double fraction(double t) const;
    double end_time() const { return enabled ? duration : 0.0; }
};

RampSchedule make_ramp(const SystemConfig& config);

// Everything the right-hand side needs, precomputed from a configuration.
struct NonlinearModel {
    int n_bs = 0;
    bool atoms_present = false;
    double k = 0.0;
    double zeta = 0.0;
    double reflectivity = 0.0;
    double phi_st = 0.0;
    double phi_slope = 0.0;          // dPhi/dx_m = 4 G / kappa
    std::vector<double> x_st;        // steady BS positions
    double force_scale = 0.0;        // sigma_L I0 / c, N
    double membrane_force_gain = 0.0;  // F_m per unit normalised intensity at the reference plane
    double membrane_force_st = 0.0;  // F_m at the final-power equilibrium
    double x_m_st = 0.0;
    double motion_weight = 0.0;      // N / N_sheets
    double bs_mass = 0.0;            // sheet atoms per BS times atom mass
    double membrane_mass = 0.0;
    double omega_m = 0.0;
    double gamma_membrane = 0.0;     // Gamma_m + Gamma_opt
    double gamma_a = 0.0;
    double wavelength = 0.0;
    // Deviations fed to the field solve are multiplied by this factor and the
    // resulting force deviations divided by it: the linearisation is
    // unchanged while the anharmonicity at a given amplitude grows.
    double anharmonic_scale = 1.0;
    bool freeze_membrane = false;
    RampSchedule ramp;
    std::uint64_t config_hash = 0;
};

NonlinearModel make_nonlinear_model(const SystemConfig& config, const DerivedParams& derived);

// Equilibrium of the model at lattice power fraction p.
SystemState equilibrium_state(const NonlinearModel& model, double p);

// Time derivative of the packed state [x_m, v_m, x_1..x_n, v_1..v_n].
void rhs(const NonlinearModel& model, double t, const double* y, double* dydt, double* scratch);

struct Trajectory {
    double dt = 0.0;          // integration step
    double sample_dt = 0.0;   // spacing of stored samples
    int n_bs = 0;
    std::vector<double> x_m;
    std::vector<double> v_m;
    std::vector<double> excursion;  // k max_i |x_i| per sample, rad
    // Atom displacements, n_bs per sample, from sample index atoms_from on.
    std::size_t atoms_from = 0;
    std::vector<double> atoms;
    RampSchedule ramp;
    double omega_m = 0.0;
    std::uint64_t config_hash = 0;
    bool well_hopping = false;
    double well_hopping_time = 0.0;
    bool blowup = false;
    bool stopped_early = false;
    SystemState final_state;

    std::size_t size() const { return x_m.size(); }
    double time(std::size_t i) const { return static_cast<double>(i) * sample_dt; }
    double duration() const { return size() ? time(size() - 1) : 0.0; }
    double atom(std::size_t sample, int bs) const
    {
        return atoms[(sample - atoms_from) * static_cast<std::size_t>(n_bs) +
                     static_cast<std::size_t>(bs)];
    }
};

struct IntegrateOptions {
    int sample_stride = 10;                  // integration steps per stored sample
    std::optional<double> record_atoms_from; // s; unset = do not store atoms
    // Checked at every stored sample; returning true ends the run.
    std::function<bool(const Trajectory&)> stop;
};

// Fixed-step classical RK4.
Trajectory integrate(const NonlinearModel& model, const SystemState& initial, double duration,
                     double dt, const IntegrateOptions& options = {});

struct FitOptions {
    double start = 0.0;          // s, absolute time
    double end = 0.0;            // s, absolute time
    double envelope_periods = 3.0;
    double max_efolds = 10.0;
    // rad; later samples are excluded. The atoms respond with Q = Omega_a /
    // Gamma_a, so a small anharmonic frequency shift already detunes them.
    double nonlinear_excursion = 0.01;
    double min_periods = 20.0;
    double earliest = 0.0;       // a shifted window never starts before this
};

FitOptions fit_options(const SystemConfig& config);

struct DampingFit {
    double gamma_tot = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    double r_squared = 0.0;
    std::string method;
    bool low_confidence = false;
    std::size_t points = 0;
};

// Sliding-window mean of x_m^2, one value per `step` samples.
struct Envelope {
    std::vector<double> t;
    std::vector<double> mean_sq;
};
Envelope envelope(const Trajectory& trajectory, double window_periods, std::size_t step = 0);

DampingFit extract_damping(const Trajectory& trajectory, const FitOptions& options);

struct LimitCycle {
    bool saturated = false;
    bool bounded = false;
    double ratio = 0.0;          // saturated <x_m^2> / thermal <x_m^2>
    double onset_time = 0.0;     // s
    double growth_rate = 0.0;    // peak d ln<x_m^2>/dt, 1/s
    double growth_time = 0.0;    // 1 / growth_rate
    std::string note;
};

LimitCycle limit_cycle_metrics(const Trajectory& trajectory, double thermal_mean_sq,
                               double envelope_periods = 3.0);

struct PhaseProfile {
    double frequency = 0.0;        // rad/s
    double peak_to_mean = 0.0;     // spectral contrast of the dominant peak
    std::vector<double> lag_rad;   // per BS, relative to BS 1, positive = lagging
};

PhaseProfile mode_phase_profile(const Trajectory& trajectory, double t_start, double t_end);

// Integration step for a configuration: membrane period / steps_per_period,
// further limited by the sampling invariant.
double default_dt(const SystemConfig& config, const DerivedParams& derived);

struct SimulationResult {
    Trajectory trajectory;
    DampingFit fit;
    DerivedParams derived;
    double wall_seconds = 0.0;
};

struct SimulateOptions {
    bool keep_trajectory = true;
    bool stop_when_fitted = true;  // end once the fit window is complete
    std::optional<double> record_atoms_from;
    std::optional<double> duration;
    double anharmonic_scale = 1.0;
};

// Builds the model, starts from the equilibrium at the initial ramp power
// with the membrane displaced, integrates and fits the damping rate.
SimulationResult simulate(const SystemConfig& config, const SimulateOptions& options = {});

}  // namespace optolattice
