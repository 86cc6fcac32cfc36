#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optolattice/dynamics.hpp"
#include "optolattice/linear.hpp"
#include "optolattice/params.hpp"

namespace optolattice {

std::vector<double> log_grid(double lo, double hi, int n);

// Runs task(i) for i in [0, n) on `workers` threads (0 = hardware
// concurrency). Results are written by index, so order never depends on
// scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

struct DampingPoint {
    double n_lat = 0.0;
    int n_bs = 0;
    double n_coupled = 0.0;
    double zeta = 0.0;
    double nu = 0.0;
    double gamma_tot = 0.0;
    double r_squared = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::string method;
    bool low_confidence = false;
    bool well_hopping = false;
    double wall_seconds = 0.0;
    std::string error;  // empty on success
};

using ProgressFn = std::function<void(const std::string&)>;

// Nonlinear Gamma_tot(N_lat) for one BS count.
std::vector<DampingPoint> damping_sweep(const SystemConfig& config, const std::vector<double>& grid,
                                        int n_bs, int workers, const ProgressFn& progress = {});

struct StabilityPoint {
    double n_lat = 0.0;
    double n_coupled = 0.0;
    double nu = 0.0;
    double gamma_tot = 0.0;
    double re = 0.0;
    double im = 0.0;
    double condition = 0.0;
    bool ill_conditioned = false;
};

// Linear-model Gamma_tot; with use_delay the retarded characteristic roots
// are used.
StabilityPoint stability_point(const SystemConfig& config, double n_lat, bool use_delay);
std::vector<StabilityPoint> stability_sweep(const SystemConfig& config,
                                            const std::vector<double>& grid, bool use_delay);

// First positive-to-negative crossing, interpolated linearly in log N_lat.
std::optional<double> crossing(const std::vector<double>& n_lat, const std::vector<double>& gamma);

// Root of a Gamma_tot(N_lat) function on [lo, hi] (log N bisection/regula falsi).
double find_threshold(const std::function<double(double)>& gamma_of_n, double lo, double hi,
                      double rel_tol = 1e-4, int max_evals = 60);

// Gamma_tot from a linear DDE run of the two-BS model at N_lat.
DampingFit dde_damping(const SystemConfig& config, double n_lat, double tau);

}  // namespace optolattice
