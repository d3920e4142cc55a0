"""Synthetic generators: explanatory distributions, smooth ground truths
with exact derivative oracles, packing codes, and full dataset synthesis.

Explanatory distributions (``LambdaSpec``):

``uniform(d)``
    i.i.d. uniform on the unit cube.
``curve(d)``
    a fixed smooth closed curve embedded in the cube,
    ``x_k(t) = 1/2 + 0.45 sin(2 pi (k t + k/(2d)))`` for ``k = 1..d``
    with ``t ~ U[0,1]``; intrinsic dimension 1 by construction.
``sheet(d)``
    a fixed smooth 2-surface, ``x_k = 1/2 + 0.45 sin(2 pi (a_k t1 + b_k t2
    + k/(2d)))`` with per-coordinate integer frequency pairs
    ``(a_k, b_k) = (1,0), (0,1), (1,1), (2,1), (1,2), ...``; intrinsic
    dimension 2.
``cantor(levels)``
    middle-thirds construction on [0,1]: ternary digits drawn uniformly
    from {0, 2} down to ``levels`` levels.

Ground truths are sums of compactly supported smooth bumps
``b(x) = exp(1/(x^2-1))`` on (-1, 1), placed on a regular grid with
disjoint supports and scaled so the declared smoothness-norm budget holds.
Derivatives are exact closed forms up to order 2, which caps the usable
smoothness index at beta <= 3.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, InvalidInputError
from .expfam import get_family, sample_response
from .train import Dataset

BUMP_MAX_ORDER = 2
_NORM_GRID = 10_000


# ---------------------------------------------------------------------------
# the standard bump and its derivatives
# ---------------------------------------------------------------------------

def eval_bump(x, order: int = 0):
    """Value (order 0) or exact derivative (order 1, 2) of the bump.

    b(x) = exp(1/(x^2 - 1)) for |x| < 1, zero outside; all derivatives
    vanish at the boundary.  Orders above 2 are not implemented.
    """
    if order not in (0, 1, 2):
        raise CapabilityError(f"bump derivatives implemented up to order {BUMP_MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    q = xi * xi - 1.0  # in [-1, 0)
    with np.errstate(under="ignore"):
        b = np.exp(1.0 / q)
    if order == 0:
        out[inside] = b
    elif order == 1:
        out[inside] = b * (-2.0 * xi / (q * q))
    else:
        g1 = -2.0 * xi / (q * q)
        g2 = (6.0 * xi * xi + 2.0) / (q * q * q)
        out[inside] = b * (g1 * g1 + g2)
    return out if out.shape else float(out)


def _onedim_bump_bounds() -> tuple[float, float, float, float]:
    """Grid maxima of |b|, |b'|, |b''| and a grid Lipschitz bound for b''."""
    xs = np.linspace(-1.0, 1.0, _NORM_GRID)
    b0 = np.abs(eval_bump(xs, 0))
    b1 = np.abs(eval_bump(xs, 1))
    b2 = np.abs(eval_bump(xs, 2))
    lip2 = np.max(np.abs(np.diff(eval_bump(xs, 2))) / np.diff(xs))
    return float(np.max(b0)), float(np.max(b1)), float(np.max(b2)), float(lip2)


def _holder_seminorm_bound(sup_f: float, sup_df: float, exponent: float) -> float:
    # sup |f(x)-f(y)| / |x-y|^s bounded through min(2 sup|f|, sup|f'| t):
    # optimize the crossover to get (2 sup|f|)^(1-s) (sup|f'|)^s.
    if exponent <= 0.0:
        return 2.0 * sup_f
    if exponent >= 1.0:
        return sup_df
    return (2.0 * sup_f) ** (1.0 - exponent) * sup_df ** exponent


def product_bump_norm_bound(beta: float, d: int) -> float:
    """Numerical upper bound for the smoothness norm of the d-fold product bump.

    Sums grid-based sup norms of all partials up to order floor(beta) plus
    interpolation bounds for the top-order seminorms.  Conservative by
    construction; used only to scale amplitudes.
    """
    lb = int(math.floor(beta))
    if lb > BUMP_MAX_ORDER:
        raise CapabilityError(
            f"beta={beta} needs derivatives of order {lb}; bump oracle stops at {BUMP_MAX_ORDER}"
        )
    m0, m1, m2, lip2 = _onedim_bump_bounds()
    sup = {0: m0, 1: m1, 2: m2}
    lip = {0: m1, 1: m2, 2: lip2}
    from .approx import multi_indices  # stable multi-index enumeration

    total = 0.0
    for s in multi_indices(d, lb):
        total += float(np.prod([sup[o] for o in s]))
    frac = beta - lb
    for s in multi_indices(d, lb):
        if sum(s) != lb:
            continue
        # |prod_j f_j(x) - prod_j f_j(y)| <= sum_j (prod_{k!=j} sup_k) * H_j |x_j-y_j|^frac
        semis = 0.0
        for j in range(d):
            others = float(np.prod([sup[o] for i, o in enumerate(s) if i != j]))
            semis += others * _holder_seminorm_bound(sup[s[j]], lip[s[j]], frac)
        total += semis
    return total


_AMPLITUDE_CACHE: dict[tuple[float, int, float], float] = {}


def bump_amplitude(beta: float, d: int, holder_norm: float) -> float:
    """Scale ``a`` such that the grid-placed bump sums stay within the norm budget."""
    key = (float(beta), int(d), float(holder_norm))
    if key not in _AMPLITUDE_CACHE:
        _AMPLITUDE_CACHE[key] = holder_norm / product_bump_norm_bound(beta, d)
    return _AMPLITUDE_CACHE[key]


def bump_sq_integral() -> float:
    """Integral of b^2 over the real line (Simpson on a fine grid)."""
    xs = np.linspace(-1.0, 1.0, 20_001)
    ys = eval_bump(xs) ** 2
    from scipy.integrate import simpson

    return float(simpson(ys, x=xs))


# ---------------------------------------------------------------------------
# ground-truth targets
# ---------------------------------------------------------------------------

class HolderTarget:
    """Common protocol: value plus exact partial derivatives up to max_order."""

    kind: str
    dim: int
    beta: float
    holder_norm: float
    max_order: int

    def value(self, x):
        raise NotImplementedError

    def partial(self, s, x):
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError


class ConstantTarget(HolderTarget):
    def __init__(self, c: float, d: int, beta: float = 1.0):
        self.kind = "constant"
        self.dim = d
        self.beta = beta
        self.c = float(c)
        self.holder_norm = max(abs(self.c), 1e-12)
        self.max_order = 10  # every derivative is exactly zero

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return np.full(len(x), self.c)

    def partial(self, s, x):
        x = np.atleast_2d(np.asarray(x, float))
        if sum(s) == 0:
            return np.full(len(x), self.c)
        return np.zeros(len(x))

    def descriptor(self):
        return {"kind": "constant", "c": self.c, "d": self.dim}


class BumpSumTarget(HolderTarget):
    """Sum of disjointly supported scaled bumps on a regular m^d grid.

    f(x) = sum_cells w_cell * a * rho^beta * prod_j b((x_j - c_j)/rho)
    with support radius ``rho`` at most half the grid pitch, so supports
    are disjoint and the squared distance between two weight patterns is
    exactly (hamming distance) * a^2 * rho^(2 beta + d) * (int b^2)^d.
    """

    def __init__(self, beta: float, d: int, grid_m: int, omegas,
                 holder_norm: float = 1.0, rho: float | None = None):
        if grid_m < 1:
            raise InvalidInputError("grid resolution must be at least 1")
        omegas = np.asarray(omegas, dtype=float).reshape(-1)
        if omegas.size != grid_m ** d:
            raise InvalidInputError(
                f"weight vector length {omegas.size} != m^d = {grid_m ** d}"
            )
        pitch = 1.0 / grid_m
        if rho is None:
            rho = pitch / 2.0
        if rho > pitch / 2.0 + 1e-12:
            raise InvalidInputError(
                f"support radius {rho} overlaps neighboring cells (max {pitch / 2.0})"
            )
        self.kind = "bump-sum"
        self.dim = d
        self.beta = float(beta)
        self.grid_m = int(grid_m)
        self.omegas = omegas
        self.holder_norm = float(holder_norm)
        self.rho = float(rho)
        self.amplitude = bump_amplitude(beta, d, holder_norm)
        self.max_order = BUMP_MAX_ORDER
        axis = (np.arange(grid_m) + 0.5) * pitch
        self.centers = np.stack(
            np.meshgrid(*([axis] * d), indexing="ij"), axis=-1
        ).reshape(-1, d)

    def _cells(self, x: np.ndarray) -> np.ndarray:
        idx = np.clip(np.floor(x * self.grid_m).astype(int), 0, self.grid_m - 1)
        return np.ravel_multi_index(idx.T, (self.grid_m,) * self.dim)

    def _scaled_u(self, x: np.ndarray, flat: np.ndarray) -> np.ndarray:
        return (x - self.centers[flat]) / self.rho

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        flat = self._cells(x)
        u = self._scaled_u(x, flat)
        prof = np.prod(eval_bump(u, 0), axis=1)
        return self.omegas[flat] * self.amplitude * self.rho ** self.beta * prof

    def partial(self, s, x):
        if sum(s) > self.max_order or max(s) > BUMP_MAX_ORDER:
            raise CapabilityError(
                f"bump derivative oracle stops at order {BUMP_MAX_ORDER}; requested {s}"
            )
        x = np.atleast_2d(np.asarray(x, float))
        flat = self._cells(x)
        u = self._scaled_u(x, flat)
        prof = np.ones(len(x))
        for j, order in enumerate(s):
            prof *= eval_bump(u[:, j], order)
        scale = self.amplitude * self.rho ** (self.beta - sum(s))
        return self.omegas[flat] * scale * prof

    def descriptor(self):
        return {
            "kind": "bump-sum", "beta": self.beta, "d": self.dim,
            "grid_m": self.grid_m, "rho": self.rho,
            "holder_norm": self.holder_norm,
            "omegas": [float(v) for v in self.omegas],
        }


class PolyTarget(HolderTarget):
    """Smooth polynomial fixture: c * prod_j x_j (1 - x_j), rescaled to
    keep the declared norm budget (grid-bounded)."""

    def __init__(self, d: int, beta: float = 2.0, holder_norm: float = 1.0):
        self.kind = "smooth-poly"
        self.dim = d
        self.beta = float(beta)
        self.holder_norm = float(holder_norm)
        self.max_order = 10
        # one-dimensional factor g(t) = t(1-t): sup|g| = 1/4, |g'| <= 1, |g''| = 2
        per_axis = 1.0 + 1.0 + 2.0 + 0.25
        self.scale = holder_norm / per_axis ** d

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return self.scale * np.prod(x * (1.0 - x), axis=1)

    def partial(self, s, x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.full(len(x), self.scale)
        for j, order in enumerate(s):
            t = x[:, j]
            if order == 0:
                out *= t * (1.0 - t)
            elif order == 1:
                out *= 1.0 - 2.0 * t
            elif order == 2:
                out *= -2.0
            else:
                out *= 0.0
        return out

    def descriptor(self):
        return {"kind": "smooth-poly", "beta": self.beta, "d": self.dim,
                "holder_norm": self.holder_norm}


def single_bump_target(beta: float, d: int, holder_norm: float = 1.0) -> BumpSumTarget:
    """One cell-filling bump on [0,1]^d (grid resolution 1)."""
    return BumpSumTarget(beta=beta, d=d, grid_m=1, omegas=[1.0], holder_norm=holder_norm)


# ---------------------------------------------------------------------------
# explanatory distributions
# ---------------------------------------------------------------------------

_LAMBDA_KINDS = ("uniform", "curve", "sheet", "cantor")


@dataclass(frozen=True)
class LambdaSpec:
    kind: str
    d: int
    levels: int = 10          # cantor only
    intrinsic: int | None = None

    def __post_init__(self):
        if self.kind not in _LAMBDA_KINDS:
            raise InvalidInputError(
                f"unknown lambda kind {self.kind!r}; expected one of {_LAMBDA_KINDS}"
            )
        if self.kind == "cantor" and self.d != 1:
            raise InvalidInputError("the cantor family is one-dimensional")
        if self.kind == "curve" and self.d < 2:
            raise InvalidInputError("curve embeddings need d >= 2")
        if self.kind == "sheet" and self.d < 3:
            raise InvalidInputError("sheet embeddings need d >= 3")
        object.__setattr__(self, "intrinsic", {
            "uniform": self.d, "curve": 1, "sheet": 2, "cantor": None,
        }[self.kind])

    def descriptor(self) -> dict:
        return {"kind": self.kind, "d": self.d, "levels": self.levels}


_SHEET_FREQS = [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (1, 3)]


def sample_lambda(spec: LambdaSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. points; every coordinate is guaranteed to lie in [0,1]."""
    if n < 1:
        raise InvalidInputError("need at least one sample")
    if spec.kind == "uniform":
        xs = rng.random((n, spec.d))
    elif spec.kind == "curve":
        t = rng.random(n)
        ks = np.arange(1, spec.d + 1)
        phases = ks / (2.0 * spec.d)
        xs = 0.5 + 0.45 * np.sin(2.0 * np.pi * (np.outer(t, ks) + phases))
    elif spec.kind == "sheet":
        t = rng.random((n, 2))
        freqs = np.array(_SHEET_FREQS[:spec.d], dtype=float)
        phases = np.arange(1, spec.d + 1) / (2.0 * spec.d)
        xs = 0.5 + 0.45 * np.sin(2.0 * np.pi * (t @ freqs.T + phases))
    else:  # cantor
        digits = 2.0 * rng.integers(0, 2, size=(n, spec.levels))
        powers = 3.0 ** -np.arange(1, spec.levels + 1)
        xs = (digits @ powers)[:, None]
    assert np.all((xs >= 0.0) & (xs <= 1.0))
    return xs


# ---------------------------------------------------------------------------
# packing codes
# ---------------------------------------------------------------------------

@dataclass
class VGCode:
    """Binary words over the m^d grid with pairwise Hamming separation."""

    m: int
    d: int
    codewords: np.ndarray  # (M, m^d) uint8
    target_size: int

    @property
    def length(self) -> int:
        return self.m ** self.d

    @property
    def min_distance_required(self) -> float:
        return self.length / 8.0

    def pairwise_min_distance(self) -> int:
        w = self.codewords.astype(np.int16)
        dots = w @ w.T
        ones = w.sum(axis=1)
        dist = ones[:, None] + ones[None, :] - 2 * dots
        np.fill_diagonal(dist, dist.max() + 1)
        return int(dist.min())


def build_vg_code(m: int, d: int, rng: np.random.Generator,
                  max_rejections: int = 1_000_000) -> VGCode:
    """Greedy random packing: accept a word iff it keeps Hamming distance
    at least m^d/8 to everything accepted so far.

    Stops at 2^ceil(m^d/8) words or after the rejection budget; the
    achieved count is whatever the caller finds in ``codewords``.
    """
    length = m ** d
    min_dist = math.ceil(length / 8.0)
    target = 2 ** min_dist
    words: list[np.ndarray] = [rng.integers(0, 2, size=length, dtype=np.uint8)]
    rejections = 0
    while len(words) < target and rejections < max_rejections:
        cand = rng.integers(0, 2, size=length, dtype=np.uint8)
        dists = np.sum(np.asarray(words) != cand, axis=1)
        if np.all(dists >= min_dist):
            words.append(cand)
        else:
            rejections += 1
    return VGCode(m=m, d=d, codewords=np.asarray(words), target_size=target)


def make_f_omega(code: VGCode, omega, beta: float, holder_norm: float = 1.0,
                 rho: float | None = None) -> BumpSumTarget:
    """Instantiate the bump-sum target selected by a codeword.

    The support radius defaults to half the grid pitch so cells stay
    disjoint and the separation identity is exact.
    """
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if omega.size != code.length:
        raise InvalidInputError(
            f"omega length {omega.size} does not match the {code.m}^{code.d} grid"
        )
    return BumpSumTarget(beta=beta, d=code.d, grid_m=code.m, omegas=omega,
                         holder_norm=holder_norm, rho=rho)


def separation_identity(beta: float, d: int, holder_norm: float, rho: float,
                        hamming: int) -> float:
    """Exact squared L2(Leb) distance between two disjoint-support bump sums."""
    a = bump_amplitude(beta, d, holder_norm)
    return hamming * a ** 2 * rho ** (2.0 * beta + d) * bump_sq_integral() ** d


# ---------------------------------------------------------------------------
# dataset synthesis and persistence
# ---------------------------------------------------------------------------

def make_dataset(spec: LambdaSpec, target: HolderTarget, family: str, n: int,
                 rng: np.random.Generator) -> Dataset:
    """Covariates from the explanatory law, responses from the family at
    natural parameter f0(x)."""
    fam = get_family(family)
    xs = sample_lambda(spec, n, rng)
    eta = fam.clip_theta(np.asarray(target.value(xs), float))
    ys = sample_response(fam, eta, rng)
    return Dataset(xs=xs, ys=ys, family=fam.name)


def save_dataset(data: Dataset, csv_path, sidecar_path, meta: dict | None = None) -> None:
    d = data.d
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j + 1}" for j in range(d)] + ["y"])
        for row, y in zip(data.xs, data.ys):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{y:.17g}"])
    sidecar = {"family": data.family, "n": data.n, "d": d}
    if meta:
        sidecar.update(meta)
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(csv_path, family: str | None = None,
                 sidecar_path=None) -> Dataset:
    if family is None:
        if sidecar_path is None:
            raise InvalidInputError("need either a family name or a sidecar file")
        with open(sidecar_path) as fh:
            family = json.load(fh)["family"]
    rows = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(xs=rows[:, :-1], ys=rows[:, -1], family=family)
