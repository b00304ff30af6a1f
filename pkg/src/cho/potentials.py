"""Double-well potential library.

Every potential is stored as the split F = beta_hat + pi_hat into a
convex part (beta_hat, with monotone derivative beta) and a smooth
concave perturbation (pi_hat, derivative pi).  Shipped kinds:

* ``regular``      F(r) = (r^2 - 1)^2 / 4 on all of R,
* ``logarithmic``  F(r) = (1+r)ln(1+r) + (1-r)ln(1-r) - c1 r^2 on (-1, 1),
* ``custom``       polynomial coefficients for beta_hat and pi_hat.

Out-of-domain arguments raise; the caller, not this module, is
responsible for keeping iterates interior.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import PotentialDomainError, ValidationError

_UNBOUNDED = (-math.inf, math.inf)
_UNIT = (-1.0, 1.0)


class PotentialSpec:
    """One double-well potential with derivatives through order 3.

    Parameters
    ----------
    kind : str
        'regular', 'logarithmic' or 'custom'.
    domain : tuple
        Open interval D on which F is finite.
    derivs : sequence of callables
        Vectorized evaluators for F, F', F'', F'''.
    beta_fns : (beta_hat, beta, beta')
        Convex-part evaluators.
    pi_fns : (pi, pi')
        Perturbation-part evaluators.
    c1 : float or None
        Concavity constant of the logarithmic kind.
    """

    def __init__(self, kind, domain, derivs, beta_fns, pi_fns, c1=None):
        self.kind = kind
        self.domain = domain
        self.c1 = c1
        self._derivs = derivs
        self._beta_hat, self._beta, self._dbeta = beta_fns
        self._pi, self._dpi = pi_fns

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.domain[0]) or math.isfinite(self.domain[1])

    def check_domain(self, r):
        """Raise unless every value is strictly inside D."""
        if not self.bounded:
            return
        r = np.asarray(r)
        lo, hi = self.domain
        if np.any(r <= lo) or np.any(r >= hi):
            bad = r[np.logical_or(r <= lo, r >= hi)]
            raise PotentialDomainError(
                f"argument {float(np.ravel(bad)[0]):.6g} outside the open "
                f"domain ({lo:g}, {hi:g}) of the {self.kind} potential"
            )

    def F(self, r, order: int = 0):
        """Value of the order-th derivative of F, domain-checked."""
        if order not in (0, 1, 2, 3):
            raise ValueError(f"order must be 0..3, got {order}")
        self.check_domain(r)
        return self._derivs[order](np.asarray(r, dtype=float))

    def beta_hat(self, r):
        self.check_domain(r)
        return self._beta_hat(np.asarray(r, dtype=float))

    def beta(self, r):
        self.check_domain(r)
        return self._beta(np.asarray(r, dtype=float))

    def dbeta(self, r):
        self.check_domain(r)
        return self._dbeta(np.asarray(r, dtype=float))

    def pi(self, r):
        return self._pi(np.asarray(r, dtype=float))

    def dpi(self, r):
        return self._dpi(np.asarray(r, dtype=float))


def eval(spec: PotentialSpec, r, order: int = 0):
    """Functional alias for ``spec.F(r, order)``."""
    return spec.F(r, order)


def regular_potential() -> PotentialSpec:
    """Classical quartic double well, beta_hat = r^4/4, pi_hat = 1/4 - r^2/2."""
    derivs = (
        lambda r: 0.25 * (r * r - 1.0) ** 2,
        lambda r: r**3 - r,
        lambda r: 3.0 * r * r - 1.0,
        lambda r: 6.0 * r,
    )
    beta_fns = (lambda r: 0.25 * r**4, lambda r: r**3, lambda r: 3.0 * r * r)
    pi_fns = (lambda r: -r, lambda r: -np.ones_like(r))
    return PotentialSpec("regular", _UNBOUNDED, derivs, beta_fns, pi_fns)


def logarithmic_potential(c1: float = 2.0) -> PotentialSpec:
    """Logarithmic double well on (-1, 1); nonconvex for c1 > 1."""
    if c1 <= 1.0:
        raise ValidationError(f"logarithmic potential needs c1 > 1, got {c1}")

    def f0(r):
        return xlogy(1.0 + r, 1.0 + r) + xlogy(1.0 - r, 1.0 - r) - c1 * r * r

    derivs = (
        f0,
        lambda r: np.log1p(r) - np.log1p(-r) - 2.0 * c1 * r,
        lambda r: 2.0 / (1.0 - r * r) - 2.0 * c1,
        lambda r: 4.0 * r / (1.0 - r * r) ** 2,
    )
    beta_fns = (
        lambda r: xlogy(1.0 + r, 1.0 + r) + xlogy(1.0 - r, 1.0 - r),
        lambda r: np.log1p(r) - np.log1p(-r),
        lambda r: 2.0 / (1.0 - r * r),
    )
    pi_fns = (lambda r: -2.0 * c1 * r, lambda r: np.full_like(r, -2.0 * c1))
    return PotentialSpec("logarithmic", _UNIT, derivs, beta_fns, pi_fns, c1=c1)


def custom_potential(beta_hat_coeffs, pi_hat_coeffs) -> PotentialSpec:
    """Polynomial potential from coefficient lists (ascending powers).

    beta_hat must vanish at 0 and have a nondecreasing derivative on the
    sampled range [-10, 10]; this is validated at construction.
    """
    bh = np.polynomial.Polynomial(np.asarray(beta_hat_coeffs, dtype=float))
    ph = np.polynomial.Polynomial(np.asarray(pi_hat_coeffs, dtype=float))
    if abs(bh(0.0)) > 1e-14:
        raise ValidationError("beta_hat must satisfy beta_hat(0) = 0")
    beta = bh.deriv()
    if abs(beta(0.0)) > 1e-14:
        raise ValidationError("beta must satisfy beta(0) = 0")
    sample = np.linspace(-10.0, 10.0, 2001)
    if np.any(np.diff(beta(sample)) < -1e-12):
        raise ValidationError("beta = beta_hat' must be nondecreasing")

    bh_d = [bh.deriv(k) if k else bh for k in range(4)]
    ph_d = [ph.deriv(k) if k else ph for k in range(4)]
    derivs = tuple(
        (lambda b, p: (lambda r: b(r) + p(r)))(bh_d[k], ph_d[k]) for k in range(4)
    )
    beta_fns = (bh, beta, beta.deriv())
    pi_fns = (ph.deriv(), ph.deriv(2))
    return PotentialSpec("custom", _UNBOUNDED, derivs, beta_fns, pi_fns)


def make_potential(kind: str, c1: float = 2.0, beta_hat=None, pi_hat=None):
    """Factory used by the configuration layer."""
    if kind == "regular":
        return regular_potential()
    if kind == "logarithmic":
        return logarithmic_potential(c1)
    if kind == "custom":
        if beta_hat is None or pi_hat is None:
            raise ValidationError("custom potential needs beta_hat and pi_hat coefficients")
        return custom_potential(beta_hat, pi_hat)
    raise ValidationError(f"unknown potential kind {kind!r}")


# ---------------------------------------------------------------------------
# Yosida regularization
# ---------------------------------------------------------------------------

RESOLVENT_RTOL = 1e-12


def resolvent(spec: PotentialSpec, eps: float, r):
    """Solve J + eps * beta(J) = r for J, vectorized.

    Defined for every real r, also outside D: the solution J always lies
    strictly inside D.  Safeguarded Newton with a bisection fallback,
    relative tolerance 1e-12.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r).astype(float)

    lo = np.minimum(r, 0.0)
    hi = np.maximum(r, 0.0)
    if spec.bounded:
        a, b = spec.domain
        lo = np.maximum(lo, np.nextafter(a, 0.0))
        hi = np.minimum(hi, np.nextafter(b, 0.0))

    def g(J):
        return J + eps * spec._beta(J) - r

    glo, ghi = g(lo), g(hi)
    J = np.where(glo >= 0.0, lo, np.where(ghi <= 0.0, hi, 0.5 * (lo + hi)))
    active = (glo < 0.0) & (ghi > 0.0)

    # Safeguarded Newton: converged when the Newton correction is below the
    # relative tolerance (the correction size measures the error in J).
    for _ in range(200):
        if not np.any(active):
            break
        gJ = np.where(active, g(J), 0.0)
        lo = np.where(active & (gJ < 0.0), J, lo)
        hi = np.where(active & (gJ > 0.0), J, hi)
        dg = 1.0 + eps * spec._dbeta(np.where(active, J, 0.0))
        step = np.where(active, -gJ / dg, 0.0)
        J_newton = J + step
        inside = (J_newton > lo) & (J_newton < hi)
        converged = active & inside & (
            np.abs(step) <= RESOLVENT_RTOL * np.maximum(1.0, np.abs(J))
        )
        J = np.where(active, np.where(inside, J_newton, 0.5 * (lo + hi)), J)
        active = active & ~converged

    return float(J[0]) if scalar else J


def yosida_beta(spec: PotentialSpec, eps: float, r):
    """Yosida approximation beta_eps(r) = (r - J_eps(r)) / eps."""
    r = np.asarray(r, dtype=float)
    return (r - resolvent(spec, eps, r)) / eps


def yosida_dbeta(spec: PotentialSpec, eps: float, r):
    """Derivative of beta_eps; equals beta'(J)/(1 + eps beta'(J)) <= 1/eps."""
    J = np.asarray(resolvent(spec, eps, r))
    dB = spec._dbeta(J)
    return dB / (1.0 + eps * dB)


def yosida_hat(spec: PotentialSpec, eps: float, r):
    """Moreau envelope of beta_hat: |r - J|^2/(2 eps) + beta_hat(J)."""
    r = np.asarray(r, dtype=float)
    J = np.asarray(resolvent(spec, eps, r))
    return (r - J) ** 2 / (2.0 * eps) + spec._beta_hat(J)


# ---------------------------------------------------------------------------
# Structural validators
# ---------------------------------------------------------------------------

COMPAT_GRID = 1000


@dataclass
class PotentialPair:
    """Bulk and boundary potentials with the domination check.

    Construction verifies D(beta_boundary) is contained in D(beta_bulk)
    and records the sampled constant C* with
    |beta(r)| <= C* (|beta_Gamma(r)| + 1) on a 1000-point grid of the
    interior of D(beta_Gamma).
    """

    bulk: PotentialSpec
    boundary: PotentialSpec
    compat_constant: float = 0.0

    def __post_init__(self):
        blo, bhi = self.boundary.domain
        lo, hi = self.bulk.domain
        if blo < lo or bhi > hi:
            raise ValidationError(
                "boundary potential domain must be contained in the bulk one: "
                f"({blo:g}, {bhi:g}) vs ({lo:g}, {hi:g})"
            )
        if math.isinf(blo):
            grid = np.linspace(-10.0, 10.0, COMPAT_GRID)
        else:
            pad = 1e-6 * (bhi - blo)
            grid = np.linspace(blo + pad, bhi - pad, COMPAT_GRID)
        ratio = np.abs(self.bulk.beta(grid)) / (np.abs(self.boundary.beta(grid)) + 1.0)
        self.compat_constant = float(np.max(ratio))

    @property
    def bounded(self) -> bool:
        return self.boundary.bounded

    @classmethod
    def same(cls, spec: PotentialSpec) -> "PotentialPair":
        """Use one potential for both bulk and boundary."""
        return cls(spec, spec)


@dataclass
class MeanValueCheck:
    """Outcome of the mean-value condition."""

    passed: bool
    rho: float
    lo: float
    hi: float
    message: str = ""


def check_mz(pair: PotentialPair, m0: float, M: float, gamma: float) -> MeanValueCheck:
    """Mean-value condition: [-m0^- - rho, m0^+ + rho] inside int D(beta_Gamma).

    rho = M / gamma.  Always passes when the boundary domain is all of R.
    """
    if gamma > 0.0:
        rho = M / gamma
    else:
        rho = 0.0 if M == 0.0 else math.inf
    lo = -max(-m0, 0.0) - rho
    hi = max(m0, 0.0) + rho
    if not pair.bounded:
        return MeanValueCheck(True, rho, lo, hi)
    dlo, dhi = pair.boundary.domain
    if lo <= dlo:
        return MeanValueCheck(
            False, rho, lo, hi,
            f"lower endpoint {lo:g} not inside int D = ({dlo:g}, {dhi:g})",
        )
    if hi >= dhi:
        return MeanValueCheck(
            False, rho, lo, hi,
            f"upper endpoint {hi:g} not inside int D = ({dlo:g}, {dhi:g})",
        )
    return MeanValueCheck(True, rho, lo, hi)


SEPARATION_GRID = 8193


def separation_r0(pair: PotentialPair, N: float, phi0_sup: float):
    """Smallest threshold r0 in [phi0_sup, 1) beyond which both derivatives
    dominate +-N, or None when the domain is all of R (separation is then
    automatic from boundedness).

    Requires F'(r) >= N and F_Gamma'(r) >= N on [r0, 1) together with
    F'(r) <= -N and F_Gamma'(r) <= -N on (-1, -r0]; existence follows from
    the divergence of both derivatives at the endpoints.
    """
    if not pair.bounded:
        return None
    if phi0_sup >= 1.0:
        raise ValidationError(f"phi0_sup must be < 1, got {phi0_sup}")
    if N < 0.0:
        raise ValueError(f"N must be nonnegative, got {N}")

    start = max(phi0_sup, 0.0)
    grid = np.linspace(start, 1.0 - 1e-12, SEPARATION_GRID)

    def ok_pointwise(r):
        return (
            pair.bulk.F(r, 1) >= N
            and pair.boundary.F(r, 1) >= N
            and pair.bulk.F(-r, 1) <= -N
            and pair.boundary.F(-r, 1) <= -N
        )

    right = np.minimum(pair.bulk.F(grid, 1), pair.boundary.F(grid, 1))
    left = np.maximum(pair.bulk.F(-grid, 1), pair.boundary.F(-grid, 1))
    # Suffix conditions: every grid point at or beyond index k qualifies.
    right_ok = np.minimum.accumulate(right[::-1])[::-1] >= N
    left_ok = np.maximum.accumulate(left[::-1])[::-1] <= -N
    both = right_ok & left_ok
    if not both.any():
        raise ValidationError(
            f"no separation threshold below 1 found for N = {N:g}"
        )
    k = int(np.argmax(both))
    if k == 0:
        return float(grid[0])
    # Refine the crossing between the last failing and first passing node.
    a, b = float(grid[k - 1]), float(grid[k])
    for _ in range(60):
        mid = 0.5 * (a + b)
        if ok_pointwise(mid):
            b = mid
        else:
            a = mid
    return b
