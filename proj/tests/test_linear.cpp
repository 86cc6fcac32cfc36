#include <doctest.h>

#include <cmath>

#include "optolattice/error.hpp"
#include "optolattice/linear.hpp"
#include "optolattice/sweep.hpp"

using namespace optolattice;

namespace {

SystemConfig at(double n_lat)
{
    SystemConfig c;
    c.lattice.n_lat = n_lat;
    c.lattice.n_bs = 2;
    return c;
}

}  // namespace

TEST_CASE("linear coefficients")
{
    const double n = 500.0, m = 1.4e-25, M = 1.2e-10, wa = 1.7e6, R = 0.5, f = 190.0, nu = 0.01;
    const LinearModel lm = linear_coefficients(n, m, M, wa, R, f, nu);
    const double c = n * m / (2.0 * M) * wa * wa;
    CHECK(lm.k_mm == doctest::Approx(c * R * (-2.0 + 0.1) * f * f).epsilon(1e-14));
    CHECK(lm.k_m1 == doctest::Approx(c * R * 0.91 * f).epsilon(1e-14));
    CHECK(lm.k_m2 == doctest::Approx(c * R * 0.99 * f).epsilon(1e-14));
    CHECK(lm.k_1m == doctest::Approx(wa * wa * 0.99 * f).epsilon(1e-14));
    CHECK(lm.k_2m == doctest::Approx(wa * wa * 0.91 * f).epsilon(1e-14));
    CHECK(lm.k_11 == doctest::Approx(-0.99 * wa * wa).epsilon(1e-14));
    CHECK(lm.k_22 == lm.k_11);
    CHECK(lm.k_12 == 0.0);
    CHECK(lm.k_21 == doctest::Approx(0.08 * wa * wa).epsilon(1e-14));
}

TEST_CASE("without atoms the membrane mode damps at Gamma_m + Gamma_opt")
{
    const SystemConfig c = at(0.0);
    const LinearModel lm = linear_model(c, derive(c));
    const StabilityResult r = stability_eigenvalues(lm);
    CHECK(r.gamma_tot == doctest::Approx(11.56).epsilon(1e-9));
    CHECK(std::abs(r.selected.imag()) ==
          doctest::Approx(std::sqrt(lm.omega_m * lm.omega_m - 11.56 * 11.56 / 4.0)).epsilon(1e-9));
}

TEST_CASE("eigenvalues are roots of the characteristic determinant")
{
    const SystemConfig c = at(3e7);
    LinearModel lm = linear_model(c, derive(c));
    lm.tau = 0.0;
    const StabilityResult r = stability_eigenvalues(lm);
    REQUIRE(r.eigenvalues.size() == 6);
    CHECK_FALSE(r.ill_conditioned);
    // Trace of the first-order system equals minus the total damping.
    std::complex<double> sum = 0.0;
    for (const auto& e : r.eigenvalues)
        sum += e;
    CHECK(sum.real() == doctest::Approx(-(lm.gamma_m_prime + 2.0 * lm.gamma_a)).epsilon(1e-6));
    CHECK(std::abs(sum.imag()) < 1e-3);
    // The undelayed root solve converges onto the same values.
    const StabilityResult d = delay_roots(lm);
    CHECK(d.gamma_tot == doctest::Approx(r.gamma_tot).epsilon(1e-9));
}

TEST_CASE("Gamma_tot changes sign between the two anchors")
{
    CHECK(stability_point(at(0.3e7), 0.3e7, false).gamma_tot > 0.0);
    CHECK(stability_point(at(8e7), 8e7, false).gamma_tot < 0.0);
}

TEST_CASE("small delay barely moves the eigenvalues")
{
    const SystemConfig c = at(3e7);
    LinearModel lm = linear_model(c, derive(c));
    const double g0 = stability_eigenvalues(lm).gamma_tot;
    lm.tau = 1e-12;
    CHECK(delay_roots(lm).gamma_tot == doctest::Approx(g0).epsilon(1e-3));
}

TEST_CASE("dde step selection")
{
    LinearModel lm;
    lm.omega_m = kTwoPi * 276e3;
    const double T = kTwoPi / lm.omega_m;
    CHECK(dde_dt(lm, 0.0, 200, 20) == doctest::Approx(T / 200));
    const double dt = dde_dt(lm, 36e-9, 200, 20);
    CHECK(dt <= 36e-9 / 4.0);
    const double n = T / dt;
    CHECK(std::abs(n - std::round(n)) < 1e-6);
    CHECK(static_cast<long>(std::round(n)) % 20 == 0);
}

TEST_CASE("dde integration with zero delay matches the eigenvalue")
{
    for (double n : {5e6, 6e7}) {
        CAPTURE(n);
        SystemConfig c = at(n);
        c.sim.fit_start = 20e-3;
        c.sim.fit_end = 0.12;
        c.sim.max_fit_efolds = 6.0;
        const double eig = stability_point(c, n, false).gamma_tot;
        const DampingFit f = dde_damping(c, n, 0.0);
        CHECK(f.gamma_tot == doctest::Approx(eig).epsilon(0.02));
    }
}

TEST_CASE("dde integration with delay matches the retarded roots")
{
    SystemConfig c = at(3.05e7);
    c.delay.tau = 36e-9;
    c.sim.fit_start = 20e-3;
    c.sim.fit_end = 0.15;
    const double root = stability_point(c, 3.05e7, true).gamma_tot;
    const DampingFit f = dde_damping(c, 3.05e7, 36e-9);
    CHECK(f.gamma_tot == doctest::Approx(root).epsilon(0.05));
}

TEST_CASE("dde rejects bad steps")
{
    const SystemConfig c = at(1e7);
    const LinearModel lm = linear_model(c, derive(c));
    CHECK_THROWS_AS(integrate_dde(lm, 36e-9, {}, 1e-4, 1e-8), Error);
    CHECK_THROWS_AS(integrate_dde(lm, -1.0, {}, 1e-4, 1e-9), Error);
}
