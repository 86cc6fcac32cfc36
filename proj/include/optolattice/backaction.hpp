#pragma once

#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "optolattice/params.hpp"

namespace optolattice {

struct BackactionParams {
    double omega_a = 0.0;  // rad/s
    double gamma_a = 0.0;  // 1/s
    double n = 0.0;        // coupled atoms
    double atom_mass = 0.0;
    double k = 0.0;        // 1/m
    double nu = 0.0;       // only used by the two-BS model
};

BackactionParams backaction_params(const SystemConfig& config, const DerivedParams& derived);

// delta P / Phi in W/rad for one sheet of atoms.
std::complex<double> tf_one_bs(double omega, double omega_a, double gamma_a, double n,
                               double atom_mass, double k);

// delta P / Phi in W/rad for the two-BS lattice.
std::complex<double> tf_two_bs(double omega, double omega_a, double gamma_a, double n,
                               double atom_mass, double k, double nu);

enum class TfModel { OneBs, TwoBs };

struct TransferFunctionPoint {
    double omega = 0.0;                 // rad/s
    std::complex<double> response;      // W/rad
    double phase_delay_deg = 0.0;       // positive = delay, unwrapped from the low end
    bool skipped = false;               // grid point sits on a pole
};

struct TfSweep {
    TfModel model = TfModel::OneBs;
    std::vector<TransferFunctionPoint> points;
    double max_phase_delay_deg = 0.0;
    std::size_t skipped = 0;
};

// Frequencies in rad/s; grid is linear unless log_grid.
TfSweep sweep_tf(TfModel model, double omega_min, double omega_max, int n_points, bool log_grid,
                 const BackactionParams& p);

struct CalibrationChain {
    double phi_rms = 0.116;
    double pickup = 0.03;
    double pd_conversion = 350.0;  // V/W
    double impedance = 50.0;       // Ohm
    double bandwidth = 18.0;       // Hz, informational
};

CalibrationChain calibration_chain(const BackactionConfig& config);

// Sentinel returned for a vanishing response.
inline constexpr double kZeroPowerDbm = -std::numeric_limits<double>::infinity();

// 10 log10(P_elec / 1 mW) with P_elec = (|response| phi_rms pickup pd)^2 / R
// plus offset_db.
double electrical_calibration(std::complex<double> response, const CalibrationChain& chain,
                              double offset_db = 0.0);

}  // namespace optolattice
