#pragma once

#include <vector>

namespace optolattice {

// d = (lambda/2)(1 - chi/pi), chi = arcsin([zeta sqrt(4+A^2) + zeta sqrt(4-zeta^2 A^2)] /
// [2(1+zeta^2)]).
double lattice_constant(double zeta, double asymmetry, double wavelength);

// x_m^st = (4 G / omega_c kappa) P_in / (M Omega_m^2).
double membrane_steady(double p_in, double G, double omega_c, double kappa, double mass,
                       double omega_m);

struct SteadyOptions {
    int max_iterations = 100;
    double tolerance = 1e-9;  // residual in units of the single-beam force sigma_L I0 / c
};

struct SteadyPositions {
    std::vector<double> positions;  // m, from the reference plane
    std::vector<double> residuals;  // force residual per BS, units of sigma_L I0 / c
    std::vector<double> stiffness;  // d f_i / d x_i, units of sigma_L I0 / (c m)
    double lattice_constant = 0.0;
    int iterations = 0;
};

// Equilibrium BS positions for membrane phase phi_st. Starts from the
// analytic lattice (first BS in the well nearest lambda/2 - phi/2k, adjacent
// BSs spaced by lattice_constant) and polishes with Newton on the exact
// transfer-matrix forces.
SteadyPositions steady_positions(int n_bs, double zeta, double reflectivity, double phi_st,
                                 double wavelength, const SteadyOptions& options = {});

}  // namespace optolattice
