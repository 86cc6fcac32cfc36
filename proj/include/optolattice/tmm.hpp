#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace optolattice {

using cplx = std::complex<double>;

// Field convention used throughout: "leftward" travels toward the membrane
// (-x), "rightward" travels away from it (+x). Positions are measured from
// the reference plane on the membrane side of the atomic region.

struct ComplexMatrix2 {
    cplx m11{1.0, 0.0}, m12{0.0, 0.0}, m21{0.0, 0.0}, m22{1.0, 0.0};

    cplx det() const { return m11 * m22 - m12 * m21; }
    ComplexMatrix2 operator*(const ComplexMatrix2& o) const;
};

struct FieldPair {
    cplx leftward;
    cplx rightward;
};

ComplexMatrix2 multiply(const ComplexMatrix2& a, const ComplexMatrix2& b);
FieldPair apply(const ComplexMatrix2& m, const FieldPair& v);

// Maps the fields on the right of a BS onto the fields on its left.
ComplexMatrix2 bs_matrix(double zeta);
ComplexMatrix2 bs_matrix_inverse(double zeta);

// Maps the fields at x + d onto the fields at x.
ComplexMatrix2 prop_matrix(double d, double k);

struct BsFields {
    FieldPair left;   // A (leftward), B (rightward)
    FieldPair right;  // C (leftward), D (rightward)
};

struct FieldSolution {
    std::vector<BsFields> bs;  // ordered from the membrane side outward
    FieldPair boundary;        // fields at the reference plane, x = 0
    cplx membrane_in;          // C_m, field arriving at the membrane
    cplx membrane_out;         // D_m = eta exp(i Phi) C_m
    cplx c0;                   // leftward field at the input plane
    double phi = 0.0;

    // Incoming leftward and outgoing rightward fields at the input plane.
    FieldPair input_plane() const;
};

struct MirrorBoundary {
    double eta = 1.0;  // incoupling efficiency
    double t = 1.0;    // one-way amplitude transmission between atoms and membrane
};

// Transfer-matrix solve of the BS stack terminated by the phase-shifting
// mirror. The mirror returns eta t^2 exp(i Phi) of the field leaving the
// atoms toward it. Positions must be strictly increasing.
FieldSolution solve_fields(std::span<const double> positions, double zeta, double phi,
                           const MirrorBoundary& mirror, cplx c0, double k);

// Normalised force kernel |A|^2+|B|^2-|C|^2-|D|^2; multiply by eps0 sigma_L / 2
// for Newtons.
double bs_force_kernel(const BsFields& f);
double bs_force(const BsFields& f, double sigma_l);

// Radiation force on the reference plane (acts along -x).
double boundary_force(const FieldSolution& s, double sigma_l);

// Net momentum flux carried through the input plane, expressed as a force
// on everything to its left.
double input_momentum_flux(const FieldSolution& s, double sigma_l);

// (4 G / omega_c kappa) P_in with P_in = sigma_L eps0 c |eta C_m|^2 / 2.
double membrane_force(cplx c_m, double eta, double G, double omega_c, double kappa,
                      double sigma_l);

// Lightweight path used by the integrator: normalised BS force kernels and
// |field at the reference plane|^2 for |C0| = 1, no allocation.
struct ForceKernels {
    double membrane_intensity;  // |a_0 / C0|^2 at the reference plane
};
ForceKernels force_kernels(std::span<const double> positions, double zeta, double phi,
                           double reflectivity, double k, std::span<double> out);

}  // namespace optolattice
