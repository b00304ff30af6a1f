import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cho.errors import PotentialDomainError, ValidationError
from cho.potentials import (
    MeanValueCheck,
    PotentialPair,
    check_mz,
    custom_potential,
    eval as peval,
    logarithmic_potential,
    regular_potential,
    resolvent,
    separation_r0,
    yosida_beta,
    yosida_dbeta,
    yosida_hat,
)

REG = regular_potential()
LOG = logarithmic_potential(2.0)
IDENTITY_BETA = custom_potential(beta_hat_coeffs=[0, 0, 0.5], pi_hat_coeffs=[0])


class TestEvaluation:
    def test_regular_well_values(self):
        assert peval(REG, 0.0) == 0.25
        assert peval(REG, 1.0) == 0.0
        assert peval(REG, -1.0) == 0.0

    def test_regular_first_derivative(self):
        # d/dr (r^2-1)^2/4 = r^3 - r, so F'(2) = 6.
        assert peval(REG, 2.0, order=1) == 6.0

    def test_logarithmic_vanishes_at_origin(self):
        assert peval(LOG, 0.0) == 0.0

    @pytest.mark.parametrize("spec", [REG, LOG, IDENTITY_BETA])
    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_derivatives_match_central_differences(self, spec, order):
        rs = np.linspace(-0.85, 0.85, 9)
        d = 1e-6
        fd = (spec.F(rs + d, order - 1) - spec.F(rs - d, order - 1)) / (2 * d)
        exact = spec.F(rs, order)
        assert np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))) < 1e-6

    def test_split_reassembles_potential(self):
        rs = np.linspace(-0.9, 0.9, 21)
        for spec in (REG, LOG):
            total = spec.beta_hat(rs) + (spec.F(rs) - spec.beta_hat(rs))
            assert np.allclose(total, spec.F(rs), atol=1e-14)
            assert np.allclose(spec.beta(rs) + spec.pi(rs), spec.F(rs, 1), atol=1e-12)

    @pytest.mark.parametrize("r", [1.0, -1.0, 1.5, -2.0])
    def test_logarithmic_domain_guard(self, r):
        with pytest.raises(PotentialDomainError):
            peval(LOG, r)

    def test_regular_defined_everywhere(self):
        assert np.isfinite(peval(REG, 100.0))

    def test_bad_order_rejected(self):
        with pytest.raises(ValueError):
            peval(REG, 0.0, order=4)


class TestCustomValidation:
    def test_beta_hat_must_vanish_at_zero(self):
        with pytest.raises(ValidationError):
            custom_potential([1.0, 0, 0.5], [0])

    def test_beta_must_be_monotone(self):
        with pytest.raises(ValidationError, match="nondecreasing"):
            custom_potential([0, 0, -1.0], [0])


class TestYosida:
    def test_fixed_point_at_zero(self):
        for eps in (0.9, 0.5, 1e-3):
            assert yosida_beta(REG, eps, 0.0) == 0.0
            assert yosida_hat(REG, eps, 0.0) == 0.0

    def test_identity_beta_closed_form(self):
        # beta = id: resolvent J = r/(1+eps), beta_eps = r/(1+eps).
        assert np.isclose(yosida_beta(IDENTITY_BETA, 0.5, 3.0), 2.0, atol=1e-11)
        rs = np.linspace(-4, 4, 11)
        assert np.allclose(
            yosida_beta(IDENTITY_BETA, 0.25, rs), rs / 1.25, atol=1e-11
        )
        assert np.allclose(
            yosida_hat(IDENTITY_BETA, 0.25, rs), rs**2 / (2 * 1.25), atol=1e-11
        )

    def test_dominated_by_beta_on_domain(self):
        rs = np.linspace(-0.95, 0.95, 41)
        for eps in (0.1, 0.01):
            assert np.all(np.abs(yosida_beta(LOG, eps, rs)) <= np.abs(LOG.beta(rs)) + 1e-12)

    def test_hat_sandwich(self):
        rs = np.linspace(-0.95, 0.95, 41)
        for eps in (0.3, 0.05):
            he = yosida_hat(LOG, eps, rs)
            assert np.all(he >= -1e-14)
            assert np.all(he <= LOG.beta_hat(rs) + 1e-12)

    def test_defined_outside_singular_domain(self):
        # The regularization extends beyond (-1, 1).
        vals = yosida_beta(LOG, 0.1, np.array([-3.0, 1.5, 10.0]))
        assert np.all(np.isfinite(vals))

    @settings(max_examples=40, deadline=None)
    @given(
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.sampled_from([0.5, 0.1, 0.01]),
    )
    def test_monotone_and_lipschitz(self, a, b, eps):
        for spec in (REG, LOG):
            fa, fb = yosida_beta(spec, eps, a), yosida_beta(spec, eps, b)
            assert (fa - fb) * (a - b) >= -1e-12
            assert abs(fa - fb) <= abs(a - b) / eps + 1e-9

    def test_pointwise_convergence(self):
        rs = np.linspace(-0.8, 0.8, 17)
        for spec in (REG, LOG):
            errs = [
                np.abs(yosida_beta(spec, eps, rs) - spec.beta(rs)).max()
                for eps in (1e-1, 1e-2, 1e-3)
            ]
            assert errs[0] > errs[1] > errs[2]

    def test_derivative_consistency(self):
        rs = np.linspace(-2, 2, 9)
        d = 1e-6
        for spec, eps in ((REG, 0.2), (LOG, 0.05)):
            fd = (yosida_beta(spec, eps, rs + d) - yosida_beta(spec, eps, rs - d)) / (2 * d)
            assert np.allclose(yosida_dbeta(spec, eps, rs), fd, rtol=1e-5, atol=1e-7)

    def test_resolvent_identity(self):
        # For the singular potential keep r moderate: the resolvent of a
        # huge r sits closer to 1 than float64 can represent.
        for spec, eps, rs in (
            (REG, 0.3, np.linspace(-6, 6, 25)),
            (LOG, 0.07, np.linspace(-2.5, 2.5, 25)),
        ):
            J = resolvent(spec, eps, rs)
            assert np.allclose(J + eps * spec.beta(J), rs, rtol=1e-10, atol=1e-10)

    def test_eps_out_of_range(self):
        with pytest.raises(ValueError):
            resolvent(REG, 1.5, 0.0)


class TestMeanValueCondition:
    def test_logarithmic_pass(self):
        pair = PotentialPair.same(LOG)
        res = check_mz(pair, m0=0.0, M=0.5, gamma=1.0)
        assert isinstance(res, MeanValueCheck)
        assert res.passed and res.rho == 0.5
        assert (res.lo, res.hi) == (-0.5, 0.5)

    def test_logarithmic_fail_reports_endpoint(self):
        pair = PotentialPair.same(LOG)
        res = check_mz(pair, m0=0.6, M=0.5, gamma=1.0)
        assert not res.passed
        assert "1.1" in res.message

    def test_unbounded_always_passes(self):
        pair = PotentialPair.same(REG)
        assert check_mz(pair, m0=100.0, M=50.0, gamma=0.1).passed


class TestSeparationThreshold:
    def test_matches_independent_bisection(self):
        # Oracle: with c1 = 2 and N = 0 the threshold is the positive root
        # of log((1+r)/(1-r)) = 4r, located by plain bisection.
        lo, hi = 0.5, 0.999999
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if np.log((1 + mid) / (1 - mid)) - 4 * mid >= 0:
                hi = mid
            else:
                lo = mid
        oracle = hi
        pair = PotentialPair.same(LOG)
        r0 = separation_r0(pair, N=0.0, phi0_sup=0.1)
        assert abs(r0 - oracle) < 1e-6

    def test_exists_near_one(self):
        pair = PotentialPair.same(LOG)
        r0 = separation_r0(pair, N=0.0, phi0_sup=0.999)
        assert 0.999 <= r0 < 1.0

    def test_regular_not_applicable(self):
        assert separation_r0(PotentialPair.same(REG), N=1.0, phi0_sup=0.5) is None

    def test_rejects_phi0_sup_at_one(self):
        with pytest.raises(ValidationError):
            separation_r0(PotentialPair.same(LOG), N=0.0, phi0_sup=1.0)

    def test_threshold_grows_with_mu_bound(self):
        pair = PotentialPair.same(LOG)
        r_small = separation_r0(pair, N=0.5, phi0_sup=0.2)
        r_large = separation_r0(pair, N=5.0, phi0_sup=0.2)
        assert 0.2 <= r_small < r_large < 1.0


class TestPotentialPair:
    def test_same_kind_pairs_record_compat_constant(self):
        for spec in (REG, LOG):
            pair = PotentialPair.same(spec)
            assert np.isfinite(pair.compat_constant)
            assert pair.compat_constant < 1.0

    def test_mixed_kind_allowed_when_domains_nest(self):
        pair = PotentialPair(bulk=REG, boundary=LOG)
        assert pair.compat_constant < 2.0

    def test_domain_inclusion_enforced(self):
        with pytest.raises(ValidationError, match="contained"):
            PotentialPair(bulk=LOG, boundary=REG)

    def test_compat_inequality_on_grid(self):
        # |beta(r)| <= C* (|beta_Gamma(r)| + 1) with the recorded constant.
        pair = PotentialPair.same(LOG)
        grid = np.linspace(-0.999, 0.999, 1000)
        lhs = np.abs(pair.bulk.beta(grid))
        rhs = pair.compat_constant * (np.abs(pair.boundary.beta(grid)) + 1.0)
        assert np.all(lhs <= rhs + 1e-12)
