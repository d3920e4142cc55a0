"""Dimension estimation from samples via dyadic covers and log-log slopes.

Covers use the dyadic grid anchored at 0 (cells ``[k 2^-j, (k+1) 2^-j)``),
a surrogate for covers by arbitrary sup-norm balls whose count differs by
at most a constant factor, so the fitted slope is unaffected.  Two profiles
are supported: the plain support cover (occupied cells) and the mass cover
(fewest cells holding all but a scale-dependent tail ``2^{-j alpha}`` of
the empirical mass), whose slope tracks how concentrated, rather than how
spread out, the measure is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def _cell_codes(samples: np.ndarray, j: int) -> np.ndarray:
    if np.any(samples < 0.0) or np.any(samples > 1.0):
        raise InvalidInputError("samples must lie in [0, 1]^d")
    side = 2 ** j
    idx = np.minimum((samples * side).astype(np.int64), side - 1)
    return np.ravel_multi_index(idx.T, (side,) * samples.shape[1])


def box_cover(samples: np.ndarray, j: int) -> int:
    """Number of occupied dyadic cells of side 2^-j.  Exact."""
    samples = np.atleast_2d(np.asarray(samples, float))
    return int(np.unique(_cell_codes(samples, j)).size)


def mass_cover(samples: np.ndarray, j: int, alpha: float) -> int:
    """Minimal number of dyadic cells holding empirical mass >= 1 - 2^{-j*alpha}.

    Greedy by descending cell mass, which is exact on a fixed partition.
    """
    if alpha <= 0:
        raise InvalidInputError("alpha must be positive")
    samples = np.atleast_2d(np.asarray(samples, float))
    _, counts = np.unique(_cell_codes(samples, j), return_counts=True)
    counts = np.sort(counts)[::-1]
    need = (1.0 - 2.0 ** (-j * alpha)) * len(samples)
    if need <= 0.0:
        return 1
    taken = np.searchsorted(np.cumsum(counts), need - 1e-9) + 1
    return int(min(taken, len(counts)))


@dataclass(frozen=True)
class CoverProfile:
    """Cover sizes across dyadic scales; ``kind`` records which cover."""

    scales_j: tuple[int, ...]
    counts: tuple[int, ...]
    kind: str                    # "support-cover" or "mass-cover(alpha)"
    n_samples: int

    @property
    def epsilons(self) -> tuple[float, ...]:
        return tuple(2.0 ** -j for j in self.scales_j)

    def rows(self):
        return [(j, 2.0 ** -j, c) for j, c in zip(self.scales_j, self.counts)]


def profile_support(samples, j_max: int = 10, j_min: int = 0) -> CoverProfile:
    samples = np.atleast_2d(np.asarray(samples, float))
    js = tuple(range(j_min, j_max + 1))
    counts = tuple(box_cover(samples, j) for j in js)
    return CoverProfile(scales_j=js, counts=counts, kind="support-cover",
                        n_samples=len(samples))


def profile_mass(samples, alpha: float, j_max: int = 10, j_min: int = 0) -> CoverProfile:
    samples = np.atleast_2d(np.asarray(samples, float))
    js = tuple(range(j_min, j_max + 1))
    counts = tuple(mass_cover(samples, j, alpha) for j in js)
    return CoverProfile(scales_j=js, counts=counts, kind=f"mass-cover({alpha:g})",
                        n_samples=len(samples))


@dataclass(frozen=True)
class DimEstimate:
    slope: float
    intercept: float
    r2: float                     # NaN when the window is degenerate
    scale_range: tuple[int, int]

    def to_json_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": None if math.isnan(self.r2) else self.r2,
            "j_min": self.scale_range[0],
            "j_max": self.scale_range[1],
        }


def default_window(profile: CoverProfile) -> tuple[int, int]:
    """Drop the two coarsest scales and the sample-starved fine scales
    (counts above n/10)."""
    usable = [j for j, c in zip(profile.scales_j, profile.counts)
              if c <= profile.n_samples / 10]
    usable = [j for j in usable if j >= profile.scales_j[0] + 2]
    if len(usable) < 3:
        raise InvalidInputError(
            "fewer than 3 usable scales after windowing; widen the profile"
        )
    return usable[0], usable[-1]


def fit_dimension(profile: CoverProfile, window: tuple[int, int] | None = None) -> DimEstimate:
    """Least-squares slope of log2(count) against j over the window."""
    if window is None:
        window = default_window(profile)
    j_lo, j_hi = window
    sel = [(j, c) for j, c in zip(profile.scales_j, profile.counts)
           if j_lo <= j <= j_hi]
    if len(sel) < 3:
        raise InvalidInputError("window must span at least 3 scales")
    js = np.array([j for j, _ in sel], dtype=float)
    logs = np.log2([c for _, c in sel])
    if np.allclose(logs, logs[0]):
        return DimEstimate(slope=0.0, intercept=float(logs[0]), r2=float("nan"),
                           scale_range=(j_lo, j_hi))
    slope, intercept = np.polyfit(js, logs, 1)
    pred = slope * js + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return DimEstimate(slope=float(slope), intercept=float(intercept), r2=r2,
                       scale_range=(j_lo, j_hi))


def save_profile_csv(path, profile: CoverProfile) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "epsilon", "count"])
        for j, eps, c in profile.rows():
            writer.writerow([j, f"{eps:.17g}", c])
