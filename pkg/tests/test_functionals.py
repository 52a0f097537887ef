import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xcbound import density as dn
from xcbound import functionals as fn
from xcbound import kernel

GAUSS_RHO43 = 0.75**1.5
GAUSS_GRAD_L1 = 4.0
GAUSS_GRAD13 = 1.5**1.5 * math.pi


@pytest.fixture(scope="module")
def gauss():
    return dn.gaussian()


def corr_monte_carlo(field, width, n, seed=7, chunk=1_000_000):
    """Corr by sampling x ~ rho / N and u uniform in the screening ball of x."""
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(n // chunk):
        x = rng.normal(scale=width / math.sqrt(2 * math.pi), size=(chunk, 3))
        rx = field.rho(np.linalg.norm(x, axis=1))
        R = np.cbrt(3 / (4 * math.pi * rx))
        d = rng.normal(size=(chunk, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        u = d * (R * rng.random(chunk) ** (1 / 3))[:, None]
        du = np.linalg.norm(u, axis=1)
        ry = field.rho(np.linalg.norm(x + u, axis=1))
        h = 3 / (4 * math.pi) * (rx - ry) * kernel.psi(np.minimum(du / R, 2.0)) / du**4
        # the ball has volume 1/rho(x), the x-density is rho(x)/N
        parts.append(field.particle_number * h / rx**2)
    a = np.concatenate(parts)
    return a.mean(), a.std() / math.sqrt(len(a))


class TestLocalFunctionals:
    def test_gaussian_oracles(self, gauss):
        assert fn.f_rho43(gauss) == pytest.approx(GAUSS_RHO43, abs=1e-5)
        assert fn.f_grad_l1(gauss) == pytest.approx(GAUSS_GRAD_L1, abs=1e-5)
        assert fn.f_grad13_l2(gauss) == pytest.approx(GAUSS_GRAD13, abs=1e-4)

    def test_unit_volume_ball(self):
        ball = dn.uniform_ball(radius=(3 / (4 * math.pi)) ** (1 / 3))
        assert fn.f_rho43(ball) == pytest.approx(1.0, rel=1e-10)

    def test_ball_gradient_is_surface_jump(self):
        ball = dn.uniform_ball(N=2.0, radius=1.5)
        assert fn.f_grad_l1(ball) == pytest.approx(3 * 2.0 / 1.5, rel=1e-12)

    def test_hard_edge_grad13_diverges(self):
        with pytest.raises(fn.DivergentFunctional):
            fn.f_grad13_l2(dn.uniform_ball())
        assert fn.FunctionalValues.of(dn.uniform_ball()).f_grad13_l2 == math.inf

    def test_hard_edge_detected_under_refinement(self, gauss):
        edge = fn.grad13_refinement_ratio(dn.sample_on_grid(dn.uniform_ball(), 64, 1.5))
        smooth = fn.grad13_refinement_ratio(dn.sample_on_grid(gauss, 64, 3.5))
        assert edge > 1.5
        assert smooth < 1.1

    @pytest.mark.parametrize("builder", [dn.gaussian, dn.exponential, dn.smoothed_ball])
    def test_thomas_fermi_scaling_z8(self, builder):
        base = builder()
        scaled = base.scaled(8.0)
        assert fn.f_rho43(scaled) == pytest.approx(8 ** (5 / 3) * fn.f_rho43(base), rel=1e-8)
        assert fn.f_grad_l1(scaled) == pytest.approx(8 ** (4 / 3) * fn.f_grad_l1(base), rel=1e-8)
        assert fn.f_grad13_l2(scaled) == pytest.approx(8 * fn.f_grad13_l2(base), rel=1e-8)

    @given(c=st.floats(0.05, 20.0))
    def test_homogeneity(self, c):
        base = dn.exponential()
        cf = base.times(c)
        assert fn.f_rho43(cf) == pytest.approx(c ** (4 / 3) * fn.f_rho43(base), rel=1e-10)
        assert fn.f_grad_l1(cf) == pytest.approx(c * fn.f_grad_l1(base), rel=1e-10)
        assert fn.f_grad13_l2(cf) == pytest.approx(c ** (2 / 3) * fn.f_grad13_l2(base), rel=1e-10)

    def test_non_negative(self):
        for f in fn.default_chain_corpus():
            v = fn.FunctionalValues.of(f)
            assert v.f_rho43 > 0 and v.f_grad_l1 > 0 and v.f_grad13_l2 > 0

    def test_constant_periodic_density_has_no_gradient(self):
        field = dn.grid_field(np.full((8, 8, 8), 0.7), 0.3, periodic=True)
        assert fn.f_grad_l1(field) == 0.0
        assert fn.f_grad13_l2(field) == 0.0

    def test_grid_richardson_agrees_with_analytic(self, gauss):
        coarse = dn.sample_on_grid(gauss, 80, 3.5)
        fine = dn.sample_on_grid(gauss, 160, 3.5)
        for f, exact in ((fn.f_rho43, GAUSS_RHO43), (fn.f_grad_l1, GAUSS_GRAD_L1), (fn.f_grad13_l2, GAUSS_GRAD13)):
            extrapolated = (4 * f(fine) - f(coarse)) / 3
            assert extrapolated == pytest.approx(exact, abs=1e-4)

    def test_grid_sums_are_thread_independent(self, gauss, monkeypatch):
        field = dn.sample_on_grid(gauss, 24, 3.5)
        monkeypatch.setenv("XCBOUND_THREADS", "1")
        a = fn.f_grad_l1(field)
        monkeypatch.setenv("XCBOUND_THREADS", "3")
        assert fn.f_grad_l1(field) == a


class TestDirectCoulomb:
    def test_uniform_ball(self):
        assert fn.direct_coulomb(dn.uniform_ball()) == pytest.approx(0.6, abs=1e-6)

    def test_gaussian_against_spectral_oracle(self, gauss):
        # rho_hat(k) = exp(-k^2 / 4 pi), so D = (1/pi) int exp(-k^2 / 2 pi) dk = 1 / sqrt 2
        oracle = 1 / math.sqrt(2)
        assert fn.direct_coulomb(gauss) == pytest.approx(oracle, rel=1e-9)
        assert fn.direct_coulomb_fourier(gauss) == pytest.approx(oracle, rel=1e-8)

    def test_exponential_two_routes(self):
        f = dn.exponential()
        assert fn.direct_coulomb(f) == pytest.approx(fn.direct_coulomb_fourier(f), rel=1e-6)
        # closed form for exp(-r) / 8 pi: 5 / 32
        assert fn.direct_coulomb(f) == pytest.approx(5 / 32, rel=1e-9)

    def test_narrow_gaussians_scale_inversely(self):
        widths = (0.1, 0.05, 0.025)
        vals = [fn.direct_coulomb(dn.gaussian(width=w)) * w for w in widths]
        assert np.allclose(vals, 1 / math.sqrt(2), rtol=1e-8)

    def test_positive(self):
        for f in fn.default_chain_corpus():
            assert fn.direct_coulomb(f) > 0

    def test_grid_unsupported(self):
        with pytest.raises(NotImplementedError):
            fn.direct_coulomb(dn.grid_field(np.ones((2, 2, 2)), 1.0))


class TestBounds:
    def test_gaussian_grad_l1_assembled_value(self, gauss):
        rep = fn.evaluate_bound(gauss, "grad_l1")
        assembled = -1.45079 * GAUSS_RHO43 - 0.3270 * 4**0.25 * GAUSS_RHO43**0.75
        assert rep.unclamped_value == pytest.approx(assembled, abs=5e-4)
        # alpha_opt = 0.386 exceeds the 0.3528 cap, so the reported bound is the 1.68 one
        assert rep.clamped
        assert rep.bound_value == pytest.approx(-1.68 * GAUSS_RHO43)

    def test_unclamped_for_smooth_wide_density(self):
        rep = fn.evaluate_bound(dn.gaussian(N=50.0, width=3.0), "grad_l1")
        assert not rep.clamped
        assert rep.alpha <= kernel.alpha_max()
        v = fn.FunctionalValues.of(dn.gaussian(N=50.0, width=3.0))
        c = fn.bound_constants()
        expected = -c["lda"] * v.f_rho43 - c["prefactor_l1"] * v.f_grad_l1**0.25 * v.f_rho43**0.75
        assert rep.bound_value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("variant,c", [("classic_168", 1.68), ("classic_164", 1.64)])
    def test_classic(self, gauss, variant, c):
        assert fn.evaluate_bound(gauss, variant).bound_value == pytest.approx(-c * GAUSS_RHO43)

    def test_zero_gradient(self):
        vals = fn.FunctionalValues(2.0, 0.0, 0.0)
        for v in ("grad_l1", "grad13_l2", "chain_l18", "chain_l14"):
            rep = fn.evaluate_bound(vals, v)
            assert rep.alpha is None
            assert rep.bound_value == pytest.approx(-1.45079 * 2.0, abs=1e-4)

    def test_fixed_alpha_above_cap_is_clamped(self, gauss):
        rep = fn.evaluate_bound(gauss, "grad_l1", alpha=0.5)
        assert rep.clamped and rep.alpha == 0.5

    def test_fixed_alpha_formula(self, gauss):
        rep = fn.evaluate_bound(gauss, "grad13_l2", alpha=0.2)
        c = fn.bound_constants()
        assert rep.bound_value == pytest.approx(
            -(c["lda"] + 0.2) * GAUSS_RHO43 - c["grad13_l2"] / 0.04 * GAUSS_GRAD13, rel=1e-10)

    def test_chain_formulas(self):
        f = dn.gaussian(N=200.0, width=4.0)
        v = fn.FunctionalValues.of(f)
        c = fn.bound_constants()
        r18 = fn.evaluate_bound(v, "chain_l18")
        r14 = fn.evaluate_bound(v, "chain_l14")
        assert r18.unclamped_value == pytest.approx(
            -c["lda"] * v.f_rho43 - c["chain_l18"] * v.f_grad13_l2**0.125 * v.f_rho43**0.875)
        assert r14.unclamped_value == pytest.approx(
            -c["lda"] * v.f_rho43 - c["chain_l14"] * v.f_grad13_l2**0.25 * v.f_rho43**0.75)

    def test_bounds_are_non_positive(self):
        for f in fn.default_chain_corpus():
            for rep in fn.evaluate_all(f)[1]:
                assert rep.bound_value <= 0

    def test_argument_validation(self, gauss):
        with pytest.raises(ValueError):
            fn.evaluate_bound(gauss, "pbe")
        with pytest.raises(ValueError):
            fn.evaluate_bound(gauss, "chain_l14", alpha=0.1)
        with pytest.raises(ValueError):
            fn.evaluate_bound(gauss, "grad_l1", alpha=-0.1)

    def test_json(self):
        rep = fn.evaluate_bound(dn.uniform_ball(), "grad13_l2")
        doc = json.loads(rep.to_json())
        assert doc["schema"] == "xcbound.bound/1"
        assert doc["f_grad13_l2"] is None and doc["bound_value"] is None
        assert set(doc) >= {"f_rho43", "f_grad_l1", "variant", "alpha", "constant_used", "clamped"}


class TestCorrection:
    def test_monte_carlo_oracle(self, gauss):
        mc, se = corr_monte_carlo(gauss, 1.0, 10_000_000)
        exact = fn.corr_exact(gauss)
        assert exact.value == pytest.approx(0.0170409, abs=1e-6)  # regression value
        assert abs(exact.value - mc) <= 4 * se

    def test_monte_carlo_oracle_concentrated(self):
        f = dn.gaussian(N=4.0, width=0.7)
        mc, se = corr_monte_carlo(f, 0.7, 4_000_000)
        assert abs(fn.corr_exact(f).value - mc) <= 4 * se

    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_dilation_scaling(self, lam):
        # Corr has the scaling of int rho^(4/3): lam^3 rho(lam x) multiplies it by lam
        f = dn.exponential()
        assert fn.corr_exact(f.dilated(lam)).value == pytest.approx(lam * fn.corr_exact(f).value, rel=1e-7)

    def test_not_homogeneous_under_thomas_fermi_scaling(self):
        # the screening radius shrinks faster than the length scale, so only dilations are exact
        f = dn.gaussian()
        assert fn.corr_exact(f.scaled(8.0)).value != pytest.approx(8 ** (5 / 3) * fn.corr_exact(f).value,
                                                                     rel=1e-2)

    def test_error_estimate_small(self):
        for f in fn.default_chain_corpus():
            r = fn.corr_exact(f)
            assert r.error < 1e-6 * max(1.0, abs(r.value))

    def test_constant_periodic_density(self):
        field = dn.grid_field(np.full((12, 12, 12), 1.0), 0.25, periodic=True)
        assert abs(fn.corr_periodic(field)) <= 1e-14

    def test_thread_count_bit_stable(self):
        f = dn.smoothed_ball()
        assert fn.corr_exact(f, threads=1).value == fn.corr_exact(f, threads=3).value

    def test_grid_rejected(self):
        with pytest.raises(dn.DensityError):
            fn.corr_exact(dn.grid_field(np.ones((2, 2, 2)), 1.0))


class TestCertificates:
    @pytest.mark.parametrize("field", fn.default_chain_corpus()[:6], ids=lambda f: f.label)
    def test_chain_holds(self, field):
        rep = fn.verify_chain(field)
        assert rep.passed
        assert len(rep.rows) == 8
        assert all(r.status == "holds" for r in rep.rows)

    def test_hard_edge_rows_skipped(self):
        rep = fn.verify_chain(dn.uniform_ball())
        skipped = [r for r in rep.rows if r.status == "skipped"]
        assert len(skipped) == 4 and all(r.inequality == "grad13_l2" for r in skipped)
        assert all("hard edge" in r.reason for r in skipped)
        assert rep.passed

    def test_small_alpha_trivially_satisfied(self, gauss):
        rep = fn.verify_chain(gauss, alphas=(1e-4,))
        assert all(r.rhs < -1e6 for r in rep.rows)

    def test_alpha_outside_range(self, gauss):
        with pytest.raises(ValueError):
            fn.verify_chain(gauss, alphas=(0.4,))

    def test_failure_is_reported(self, gauss):
        fake = fn.CorrResult(-1e3, 0.0, 1, 1)
        assert not fn.verify_chain(gauss, corr=fake).passed

    def test_scaling_report_analytic(self):
        rep = fn.tf_scaling_check(dn.gaussian(), (1, 2, 4, 8))
        assert rep.max_deviation() <= 1e-3

    def test_scaling_identity(self):
        rep = fn.tf_scaling_check(dn.exponential(), (1,))
        base = fn.FunctionalValues.of(dn.exponential())
        assert rep.values["f_rho43"][0] == pytest.approx(base.f_rho43, rel=1e-14)

    def test_scaling_report_grid(self):
        rep = fn.tf_scaling_check(dn.sample_on_grid(dn.gaussian(), 48, 3.5), (1, 2, 4, 8))
        assert rep.max_deviation() <= 1e-2
        assert set(rep.discretization) == set(fn.SCALING_EXPONENTS)
        assert all(0 <= v < 0.2 for v in rep.discretization.values())


def test_two_point_axes_use_first_order_differences():
    vals = np.array([1.0, 3.0])[:, None, None] * np.ones((2, 2, 2))
    field = dn.grid_field(vals, 0.5)
    # slope 4 over each of the 8 cells of volume 1/8
    assert fn.f_grad_l1(field) == pytest.approx(4.0)
    with pytest.raises(dn.DensityError):
        fn.f_grad_l1(dn.grid_field(np.ones((1, 4, 4)), 0.5))
