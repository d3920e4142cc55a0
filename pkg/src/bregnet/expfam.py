"""One-parameter exponential families in natural form and their Bregman losses.

A family is a conjugate pair: the log-partition ``psi`` on the natural
domain and its Legendre dual ``phi`` on the mean domain, linked by
``mu = psi'`` and ``mu^{-1} = phi'``.  The negative log-likelihood of a
response ``y`` at natural parameter ``eta`` equals, up to a constant in
``eta``, the Bregman divergence ``d_phi(y || mu(eta))``; that divergence is
the training loss used throughout the package.

Three families are built in:

``gaussian``
    Unit variance, so the natural parameter is the mean: ``psi(t) = t^2/2``,
    ``phi(m) = m^2/2``, and the divergence is half the squared distance.
``bernoulli``
    ``psi(t) = log(1 + e^t)``, sigmoid link, negative-entropy conjugate.
    Means are clipped to ``[eps, 1-eps]`` (``eps = 1e-3``) so the curvature
    constants below stay finite.
``poisson``
    ``psi(t) = e^t``, exponential link, natural parameters clipped to
    ``[-5, 5]``.

Curvature constants: ``sigma2`` is the infimum of ``psi''`` over the
(clipped) natural domain; ``sigma1`` is *twice* the supremum.  With
``tau1 = 1/sigma1`` and ``tau2 = 1/sigma2`` this is exactly the convention
under which

    tau1 * (x - y)^2  <=  d_phi(x || y)  <=  tau2 * (x - y)^2

holds pointwise on the clipped mean domain (tight for the Gaussian), while
``sigma2 <= psi'' <= sigma1`` still holds.  Both bounds are exercised by the
test suite with zero tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import expit, gammaln, xlogy

from .errors import InvalidInputError

BERNOULLI_EPS = 1e-3
POISSON_THETA_CLIP = 5.0

# Default probe interval for families whose natural domain is all of R.
GAUSSIAN_GRID_RANGE = 5.0


@dataclass(frozen=True)
class ExpFamily:
    """A conjugate pair (psi, phi) with link mu and curvature constants.

    All callables are vectorized over numpy arrays.  Instances are
    immutable and safe to share across threads.
    """

    name: str
    psi: Callable[[np.ndarray], np.ndarray]
    grad_psi: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    grad_phi: Callable[[np.ndarray], np.ndarray]
    sigma1: float
    sigma2: float
    theta_domain: tuple[float, float]
    mean_domain: tuple[float, float]

    @property
    def tau1(self) -> float:
        return 1.0 / self.sigma1

    @property
    def tau2(self) -> float:
        return 1.0 / self.sigma2

    def clip_theta(self, eta):
        """Clamp natural parameters into the (finite part of the) domain."""
        lo, hi = self.theta_domain
        return np.clip(eta, lo, hi)


def _gaussian() -> ExpFamily:
    return ExpFamily(
        name="gaussian",
        psi=lambda t: 0.5 * np.square(t),
        grad_psi=lambda t: np.asarray(t, dtype=float) + 0.0,
        phi=lambda m: 0.5 * np.square(m),
        grad_phi=lambda m: np.asarray(m, dtype=float) + 0.0,
        sigma1=2.0,  # 2 * sup psi'' = 2
        sigma2=1.0,  # inf psi'' = 1
        theta_domain=(-math.inf, math.inf),
        mean_domain=(-math.inf, math.inf),
    )


def _bernoulli() -> ExpFamily:
    eps = BERNOULLI_EPS
    lo = math.log(eps / (1.0 - eps))
    return ExpFamily(
        name="bernoulli",
        psi=lambda t: np.logaddexp(0.0, t),
        grad_psi=expit,
        phi=lambda m: xlogy(m, m) + xlogy(1.0 - np.asarray(m, dtype=float), 1.0 - np.asarray(m, dtype=float)),
        grad_phi=lambda m: np.log(m) - np.log1p(-np.asarray(m, dtype=float)),
        sigma1=2.0 * 0.25,           # 2 * sup s(1-s), attained at theta = 0
        sigma2=eps * (1.0 - eps),    # inf s(1-s) on the clipped domain
        theta_domain=(lo, -lo),
        mean_domain=(eps, 1.0 - eps),
    )


def _poisson() -> ExpFamily:
    c = POISSON_THETA_CLIP
    return ExpFamily(
        name="poisson",
        psi=np.exp,
        grad_psi=np.exp,
        phi=lambda m: xlogy(m, m) - np.asarray(m, dtype=float),
        grad_phi=np.log,
        sigma1=2.0 * math.exp(c),
        sigma2=math.exp(-c),
        theta_domain=(-c, c),
        mean_domain=(math.exp(-c), math.exp(c)),
    )


_FAMILIES = {
    "gaussian": _gaussian(),
    "bernoulli": _bernoulli(),
    "poisson": _poisson(),
}

FAMILY_NAMES = tuple(sorted(_FAMILIES))


def get_family(name: str) -> ExpFamily:
    """Resolve a family by its CLI/config name string."""
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise InvalidInputError(
            f"unknown family {name!r}; expected one of {', '.join(FAMILY_NAMES)}"
        ) from None


def _check_mean_domain(fam: ExpFamily, v, argname: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    lo, hi = fam.mean_domain
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{argname} contains non-finite values")
    if np.any(v < lo) or np.any(v > hi):
        raise InvalidInputError(
            f"{argname} outside the clipped mean domain [{lo:.6g}, {hi:.6g}] "
            f"of family {fam.name!r}"
        )
    return v


def _check_theta_domain(fam: ExpFamily, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    lo, hi = fam.theta_domain
    if np.any(eta < lo) or np.any(eta > hi):
        raise InvalidInputError(
            f"eta outside the natural domain [{lo:.6g}, {hi:.6g}] of family {fam.name!r}"
        )
    return eta


def _check_response(fam: ExpFamily, y) -> np.ndarray:
    # Observed responses live in the closure of the mean domain: {0,1} and
    # counts are legal even though the clipped open domain excludes them.
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("y contains non-finite values")
    if fam.name == "bernoulli" and (np.any(y < 0.0) or np.any(y > 1.0)):
        raise InvalidInputError("bernoulli responses must lie in [0, 1]")
    if fam.name == "poisson" and np.any(y < 0.0):
        raise InvalidInputError("poisson responses must be nonnegative")
    return y


def bregman(fam: ExpFamily, x, y):
    """Divergence ``phi(x) - phi(y) - phi'(y) (x - y)`` on the mean domain.

    Evaluated through a per-family closed form that is algebraically equal
    to the defining expression but avoids catastrophic cancellation.  Not
    symmetric in general.
    """
    x = _check_mean_domain(fam, x, "x")
    y = _check_mean_domain(fam, y, "y")
    if fam.name == "gaussian":
        return 0.5 * np.square(x - y)
    if fam.name == "bernoulli":
        return xlogy(x, x / y) + xlogy(1.0 - x, (1.0 - x) / (1.0 - y))
    if fam.name == "poisson":
        return xlogy(x, x / y) - x + y
    return fam.phi(x) - fam.phi(y) - fam.grad_phi(y) * (x - y)


def loss_natural(fam: ExpFamily, y, eta):
    """One summand of the empirical Bregman risk: ``d_phi(y || mu(eta))``.

    Computed through the algebraic identity ``psi(eta) - y*eta + phi(y)``,
    with ``phi`` extended by continuity to the response support (so the
    Bernoulli endpoints {0,1} and the Poisson count 0 are legal).
    """
    y = _check_response(fam, y)
    eta = _check_theta_domain(fam, eta)
    return fam.psi(eta) - y * eta + fam.phi(y)


def loss_grad_natural(fam: ExpFamily, y, eta):
    """d/d(eta) of :func:`loss_natural`: the residual ``mu(eta) - y``."""
    y = _check_response(fam, y)
    eta = _check_theta_domain(fam, eta)
    return fam.grad_psi(eta) - y


def nll(fam: ExpFamily, y, eta):
    """Exact negative log-likelihood (base measure included).

    Differs from :func:`loss_natural` only by a term constant in ``eta``;
    kept separately so the equivalence is testable rather than assumed.
    """
    y = _check_response(fam, y)
    eta = _check_theta_domain(fam, eta)
    if fam.name == "gaussian":
        return 0.5 * np.square(y - eta) + 0.5 * math.log(2.0 * math.pi)
    if fam.name == "bernoulli":
        s = expit(eta)
        return -(xlogy(y, s) + xlogy(1.0 - y, 1.0 - s))
    if fam.name == "poisson":
        return np.exp(eta) - y * eta + gammaln(y + 1.0)
    raise InvalidInputError(f"no likelihood for family {fam.name!r}")


def sample_response(fam: ExpFamily, eta, rng: np.random.Generator):
    """Draw responses with natural parameter ``eta`` (elementwise)."""
    eta = _check_theta_domain(fam, eta)
    if fam.name == "gaussian":
        return rng.normal(loc=eta, scale=1.0)
    if fam.name == "bernoulli":
        return (rng.random(np.shape(eta)) < expit(eta)).astype(float)
    if fam.name == "poisson":
        return rng.poisson(lam=np.exp(eta)).astype(float)
    raise InvalidInputError(f"no sampler for family {fam.name!r}")


def kl(fam: ExpFamily, theta, theta2):
    """KL divergence between members, via ``d_phi(mu(theta) || mu(theta2))``."""
    theta = _check_theta_domain(fam, theta)
    theta2 = _check_theta_domain(fam, theta2)
    return bregman(fam, fam.grad_psi(theta), fam.grad_psi(theta2))


def kl_numeric(fam: ExpFamily, theta: float, theta2: float) -> float:
    """KL divergence computed from the densities, independently of ``phi``.

    Gaussian: adaptive quadrature of ``p log(p/q)``.  Bernoulli: the exact
    two-point sum with masses taken from ``exp(x*theta - psi(theta))``.
    Poisson: term-by-term series, truncated once the probability mass of a
    term falls below 1e-12 past the mean.
    """
    theta = float(theta)
    theta2 = float(theta2)
    if fam.name == "gaussian":
        def integrand(x):
            p = math.exp(-0.5 * (x - theta) ** 2) / math.sqrt(2 * math.pi)
            logratio = 0.5 * ((x - theta2) ** 2 - (x - theta) ** 2)
            return p * logratio

        val, _ = quad(integrand, -np.inf, np.inf, limit=200)
        return val
    if fam.name == "bernoulli":
        logp = np.array([0.0, theta]) - np.logaddexp(0.0, theta)
        logq = np.array([0.0, theta2]) - np.logaddexp(0.0, theta2)
        return float(np.sum(np.exp(logp) * (logp - logq)))
    if fam.name == "poisson":
        lam, lam2 = math.exp(theta), math.exp(theta2)
        total = 0.0
        k = 0
        while True:
            logp = k * theta - lam - gammaln(k + 1.0)
            pk = math.exp(logp)
            total += pk * (k * (theta - theta2) - (lam - lam2))
            if k > lam and pk < 1e-12:
                break
            k += 1
            if k > 100000:  # unreachable at the clipped domain scale
                break
        return total
    raise InvalidInputError(f"no numeric KL for family {fam.name!r}")


def natural_grid(fam: ExpFamily, num: int = 64) -> np.ndarray:
    """Evenly spaced probe grid over the natural domain.

    Unbounded domains (Gaussian) use ``[-GAUSSIAN_GRID_RANGE, +..]``.
    """
    lo, hi = fam.theta_domain
    if not math.isfinite(lo):
        lo = -GAUSSIAN_GRID_RANGE
    if not math.isfinite(hi):
        hi = GAUSSIAN_GRID_RANGE
    return np.linspace(lo, hi, num)


def mean_grid(fam: ExpFamily, num: int = 64) -> np.ndarray:
    """Probe grid over the clipped mean domain (image of :func:`natural_grid`)."""
    return fam.grad_psi(natural_grid(fam, num))
