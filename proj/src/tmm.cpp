#include "optolattice/tmm.hpp"

#include <cmath>
#include <string>

#include "optolattice/error.hpp"
#include "optolattice/params.hpp"

namespace optolattice {

namespace {

constexpr cplx kI{0.0, 1.0};

void check_positions(std::span<const double> positions, double k)
{
    const double min_gap = (kTwoPi / k) * 1e-6;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!std::isfinite(positions[i]))
            throw Error(ErrorCode::InvalidArgument, "BS position is not finite");
        if (i == 0)
            continue;
        const double gap = positions[i] - positions[i - 1];
        if (gap <= 0.0)
            throw Error(ErrorCode::InvalidArgument,
                        "BS positions must increase away from the membrane (index " +
                            std::to_string(i) + ")");
        if (gap < min_gap)
            throw Error(ErrorCode::InvalidArgument,
                        "BSs " + std::to_string(i - 1) + " and " + std::to_string(i) +
                            " overlap");
    }
}

}  // namespace

ComplexMatrix2 multiply(const ComplexMatrix2& a, const ComplexMatrix2& b)
{
    return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
            a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
}

ComplexMatrix2 ComplexMatrix2::operator*(const ComplexMatrix2& o) const
{
    return multiply(*this, o);
}

FieldPair apply(const ComplexMatrix2& m, const FieldPair& v)
{
    return {m.m11 * v.leftward + m.m12 * v.rightward, m.m21 * v.leftward + m.m22 * v.rightward};
}

ComplexMatrix2 bs_matrix(double zeta)
{
    return {1.0 + kI * zeta, kI * zeta, -kI * zeta, 1.0 - kI * zeta};
}

ComplexMatrix2 bs_matrix_inverse(double zeta)
{
    return {1.0 - kI * zeta, -kI * zeta, kI * zeta, 1.0 + kI * zeta};
}

ComplexMatrix2 prop_matrix(double d, double k)
{
    if (d < 0.0)
        throw Error(ErrorCode::InvalidArgument, "propagation distance must be non-negative");
    return {std::polar(1.0, k * d), 0.0, 0.0, std::polar(1.0, -k * d)};
}

FieldPair FieldSolution::input_plane() const
{
    if (bs.empty())
        return boundary;
    return bs.back().right;
}

FieldSolution solve_fields(std::span<const double> positions, double zeta, double phi,
                           const MirrorBoundary& mirror, cplx c0, double k)
{
    check_positions(positions, k);
    if (!(mirror.eta >= 0.0 && mirror.eta <= 1.0 && mirror.t >= 0.0 && mirror.t <= 1.0))
        throw Error(ErrorCode::RangeError, "mirror eta and t must lie in [0, 1]");

    // Seed with unit leftward field at the reference plane and march outward
    // with the inverse matrices; rescale at the end.
    const double r = mirror.eta * mirror.t * mirror.t;
    FieldSolution s;
    s.phi = phi;
    FieldPair v{1.0, r * std::polar(1.0, phi)};
    s.boundary = v;
    s.bs.reserve(positions.size());
    double x = 0.0;
    const auto minv = bs_matrix_inverse(zeta);
    for (double xi : positions) {
        const double d = xi - x;
        const cplx ph = std::polar(1.0, k * d);
        v = {v.leftward * std::conj(ph), v.rightward * ph};
        BsFields f;
        f.left = v;
        v = apply(minv, v);
        f.right = v;
        s.bs.push_back(f);
        x = xi;
    }
    const cplx incoming = v.leftward;
    if (std::abs(incoming) < 1e-300)
        throw Error(ErrorCode::IllConditioned, "field solve has no incoming component");
    const cplx scale = c0 / incoming;
    s.boundary.leftward *= scale;
    s.boundary.rightward *= scale;
    for (auto& f : s.bs) {
        f.left.leftward *= scale;
        f.left.rightward *= scale;
        f.right.leftward *= scale;
        f.right.rightward *= scale;
    }
    s.c0 = c0;
    s.membrane_in = mirror.t * s.boundary.leftward;
    s.membrane_out = mirror.eta * std::polar(1.0, phi) * s.membrane_in;
    return s;
}

double bs_force_kernel(const BsFields& f)
{
    return std::norm(f.left.leftward) + std::norm(f.left.rightward) - std::norm(f.right.leftward) -
           std::norm(f.right.rightward);
}

double bs_force(const BsFields& f, double sigma_l)
{
    return 0.5 * PhysicalConstants::vacuum_permittivity * sigma_l * bs_force_kernel(f);
}

double boundary_force(const FieldSolution& s, double sigma_l)
{
    return -0.5 * PhysicalConstants::vacuum_permittivity * sigma_l *
           (std::norm(s.boundary.leftward) + std::norm(s.boundary.rightward));
}

double input_momentum_flux(const FieldSolution& s, double sigma_l)
{
    const auto in = s.input_plane();
    return -0.5 * PhysicalConstants::vacuum_permittivity * sigma_l *
           (std::norm(in.leftward) + std::norm(in.rightward));
}

double membrane_force(cplx c_m, double eta, double G, double omega_c, double kappa,
                      double sigma_l)
{
    const double p_in = 0.5 * sigma_l * PhysicalConstants::vacuum_permittivity *
                        PhysicalConstants::speed_of_light * std::norm(eta * c_m);
    return 4.0 * G / (omega_c * kappa) * p_in;
}

ForceKernels force_kernels(std::span<const double> positions, double zeta, double phi,
                           double reflectivity, double k, std::span<double> out)
{
    cplx a{1.0, 0.0};
    cplx b = std::polar(reflectivity, phi);
    double x = 0.0;
    const cplx one_m = {1.0, -zeta};
    const cplx one_p = {1.0, zeta};
    const cplx iz = {0.0, zeta};
    const std::size_t n = positions.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double kd = k * (positions[i] - x);
        const cplx ph{std::cos(kd), std::sin(kd)};
        const cplx al = a * std::conj(ph);
        const cplx bl = b * ph;
        a = one_m * al - iz * bl;
        b = iz * al + one_p * bl;
        out[i] = std::norm(al) + std::norm(bl) - std::norm(a) - std::norm(b);
        x = positions[i];
    }
    const double inv = 1.0 / std::norm(a);
    for (std::size_t i = 0; i < n; ++i)
        out[i] *= inv;
    return {inv};
}

}  // namespace optolattice
