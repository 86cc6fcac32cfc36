#pragma once

#include <complex>
#include <vector>

#include "optolattice/dynamics.hpp"
#include "optolattice/params.hpp"

namespace optolattice {

// Linearised two-BS model: x'' = K x - D x' with x = (x_m, x_1, x_2).
struct LinearModel {
    double k_mm = 0.0, k_m1 = 0.0, k_m2 = 0.0;
    double k_1m = 0.0, k_2m = 0.0;
    double k_11 = 0.0, k_12 = 0.0, k_21 = 0.0, k_22 = 0.0;
    double gamma_m_prime = 0.0;  // Gamma_m + Gamma_opt
    double gamma_a = 0.0;
    double omega_m = 0.0;
    double tau = 0.0;            // retardation of the membrane-atom cross terms
    double membrane_mass = 0.0;  // energy weights for mode participation
    double atom_mass = 0.0;      // total coupled atom mass per BS
};

LinearModel linear_coefficients(double n, double atom_mass, double membrane_mass,
                                double omega_a, double reflectivity, double f, double nu);

// Coefficients plus membrane/atom damping for a configuration; f is the
// placement-reduced cavity factor.
LinearModel linear_model(const SystemConfig& config, const DerivedParams& derived);

struct Eigenmode {
    std::complex<double> value;
    double membrane_participation = 0.0;  // energy share of the membrane
};

struct StabilityResult {
    std::vector<std::complex<double>> eigenvalues;
    std::vector<Eigenmode> modes;  // upper half-plane, same order as eigenvalues
    std::complex<double> selected;
    double gamma_tot = 0.0;
    double condition = 0.0;        // eigenvector-matrix condition number
    bool ill_conditioned = false;
};

// Minimum energy share for a mode to count as membrane-like.
inline constexpr double kMembraneParticipation = 0.01;

// Eigenvalues of the 6x6 first-order system (tau ignored). Gamma_tot is
// -2 Re of the least-damped membrane-participating mode.
StabilityResult stability_eigenvalues(const LinearModel& model);

// Characteristic roots with the retarded cross terms, continued by Newton
// iteration from the undelayed eigenvalues.
StabilityResult delay_roots(const LinearModel& model);

// State (x_m, x_1, x_2, v_m, v_1, v_2). History before t = 0 is constant
// and equal to the initial positions with zero velocity.
struct LinearState {
    double x[3] = {0.0, 0.0, 0.0};
    double v[3] = {0.0, 0.0, 0.0};
};

// Fixed-step RK4 with cubic Hermite interpolation of the retarded history.
// tau = 0 evaluates the delayed terms at the current state.
Trajectory integrate_dde(const LinearModel& model, double tau, const LinearState& initial,
                         double duration, double dt, const IntegrateOptions& options = {});

// Integration step for the delay runs: period / n with n >= steps_per_period,
// n a multiple of samples_per_period and dt <= tau/4.
double dde_dt(const LinearModel& model, double tau, int steps_per_period,
              int samples_per_period = 1);

}  // namespace optolattice
