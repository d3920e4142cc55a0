"""Rate-sweep orchestration: size, train, measure, fit the log-log slope.

For every (sample size, seed) cell the harness draws a dataset, sizes a
network from the depth/width rule, trains it on the Bregman risk, and
measures the squared L2(lambda) distance to the ground truth by Monte
Carlo on fresh covariates.  Slopes are fitted on per-n medians, which are
robust to the occasional bad optimization run, and the report always
carries both candidate exponents, -2b/(2b+d) for the ambient dimension and
-2b/(2b+d_eff) for the user-supplied effective dimension, next to a
dimension estimate obtained from the data itself.

Cells are seeded individually from the master seed, so reports are
bit-reproducible and indifferent to scheduling; ``jobs > 1`` fans cells out
to worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dimension, expfam, synth
from .errors import InvalidInputError, TrainingAbortError
from .net import SizingRule, architect, size_for
from .synth import HolderTarget, LambdaSpec, VGCode
from .train import TrainConfig, fit


def l2_error(netobj, target: HolderTarget, spec: LambdaSpec, mc_points: int,
             rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of ||f_hat - f_0||^2_{L2(lambda)} with its s.e."""
    if mc_points < 1000:
        raise InvalidInputError("use at least 1000 Monte Carlo points")
    xs = synth.sample_lambda(spec, mc_points, rng)
    diff_sq = np.square(np.asarray(netobj.forward(xs), float)
                        - np.asarray(target.value(xs), float))
    return float(diff_sq.mean()), float(diff_sq.std(ddof=1) / math.sqrt(mc_points))


def excess_risk(netobj, target: HolderTarget, spec: LambdaSpec, family: str,
                mc_points: int, rng: np.random.Generator) -> tuple[float, float]:
    """Paired Monte Carlo estimate of the excess Bregman risk with its s.e."""
    fam = expfam.get_family(family)
    xs = synth.sample_lambda(spec, mc_points, rng)
    eta0 = fam.clip_theta(np.asarray(target.value(xs), float))
    ys = expfam.sample_response(fam, eta0, rng)
    eta_hat = fam.clip_theta(np.asarray(netobj.forward(xs), float))
    gap = expfam.loss_natural(fam, ys, eta_hat) - expfam.loss_natural(fam, ys, eta0)
    return float(gap.mean()), float(gap.std(ddof=1) / math.sqrt(mc_points))


@dataclass(frozen=True)
class SweepConfig:
    n_grid: tuple[int, ...]
    seeds_per_n: int
    beta: float
    lambda_spec: LambdaSpec
    family: str
    target: HolderTarget
    d_effective: float
    mc_test_points: int = 20_000
    master_seed: int = 0
    epochs: int = 250
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    c_depth: float = 1.0
    c_width: float = 1.0
    dim_samples: int = 50_000

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("n_grid must be strictly increasing with >= 4 values")
        if self.seeds_per_n < 3:
            raise InvalidInputError("seeds_per_n must be at least 3")
        object.__setattr__(self, "n_grid", grid)

    @property
    def clip_r(self) -> float:
        # output clamp at twice the target's norm budget
        return 2.0 * self.target.holder_norm


@dataclass
class CellResult:
    n: int
    seed: int
    error: float | None
    se: float | None
    risk: float | None
    risk_se: float | None
    failed: bool = False
    message: str = ""


@dataclass
class RateReport:
    cells: list[CellResult]
    medians: dict[int, float]
    slope: float
    slope_se: float
    exponent_ambient: float
    exponent_effective: float
    dim_support_slope: float | None
    dim_mass_slope: float | None
    config_echo: dict

    def to_json_dict(self) -> dict:
        return {
            "slope": self.slope,
            "slope_se": self.slope_se,
            "exponent_ambient": self.exponent_ambient,
            "exponent_effective": self.exponent_effective,
            "medians": {str(n): v for n, v in sorted(self.medians.items())},
            "dim_support_slope": self.dim_support_slope,
            "dim_mass_slope": self.dim_mass_slope,
            "n_failed": sum(c.failed for c in self.cells),
            "config": self.config_echo,
        }

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "seed", "error", "se"])
            for c in self.cells:
                writer.writerow([
                    c.n, c.seed,
                    "" if c.error is None else f"{c.error:.17g}",
                    "" if c.se is None else f"{c.se:.17g}",
                ])

    def save_slope_data(self, path) -> None:
        """Two-column (log n, log median error) file for external plotting."""
        with open(path, "w") as fh:
            for n, med in sorted(self.medians.items()):
                fh.write(f"{math.log(n):.17g} {math.log(med):.17g}\n")


def theoretical_exponents(beta: float, d: float, d_effective: float) -> tuple[float, float]:
    return (-2.0 * beta / (2.0 * beta + d),
            -2.0 * beta / (2.0 * beta + d_effective))


def _cell_rngs(master_seed: int, n: int, seed_idx: int):
    ss = np.random.SeedSequence((int(master_seed), int(n), int(seed_idx)))
    return [np.random.default_rng(child) for child in ss.spawn(4)]


def run_cell(cfg: SweepConfig, n: int, seed_idx: int) -> CellResult:
    """One (n, seed) job: data, sizing, training, fresh-sample evaluation."""
    rng_data, rng_init, _, rng_test = _cell_rngs(cfg.master_seed, n, seed_idx)
    try:
        data = synth.make_dataset(cfg.lambda_spec, cfg.target, cfg.family, n, rng_data)
        depth, width = size_for(SizingRule(
            beta=cfg.beta, dim_effective=cfg.d_effective, n=n,
            c_depth=cfg.c_depth, c_width=cfg.c_width))
        netobj = architect(depth, width, cfg.lambda_spec.d, rng_init)
        tcfg = TrainConfig(
            epochs=cfg.epochs, learning_rate=cfg.learning_rate,
            optimizer=cfg.optimizer,
            seed=int(np.random.SeedSequence((cfg.master_seed, n, seed_idx, 7)).generate_state(1)[0]),
            clip_r=cfg.clip_r)
        result = fit(netobj, data, tcfg)
        err, se = l2_error(result.net, cfg.target, cfg.lambda_spec,
                           cfg.mc_test_points, rng_test)
        risk, risk_se = excess_risk(result.net, cfg.target, cfg.lambda_spec,
                                    cfg.family, cfg.mc_test_points, rng_test)
        return CellResult(n=n, seed=seed_idx, error=err, se=se,
                          risk=risk, risk_se=risk_se)
    except TrainingAbortError as exc:
        return CellResult(n=n, seed=seed_idx, error=None, se=None,
                          risk=None, risk_se=None, failed=True, message=str(exc))


def _loglog_slope(ns, values) -> tuple[float, float]:
    xs = np.log(np.asarray(ns, float))
    ys = np.log(np.asarray(values, float))
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    dof = max(len(xs) - 2, 1)
    var = float(np.sum(resid ** 2)) / dof
    se = math.sqrt(var / float(np.sum((xs - xs.mean()) ** 2)))
    return float(slope), se


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> RateReport:
    tasks = [(n, s) for n in cfg.n_grid for s in range(cfg.seeds_per_n)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell_star, [(cfg, n, s) for n, s in tasks]))
    else:
        cells = [run_cell(cfg, n, s) for n, s in tasks]

    medians: dict[int, float] = {}
    for n in cfg.n_grid:
        errs = [c.error for c in cells if c.n == n and not c.failed]
        if errs:
            medians[n] = float(np.median(errs))
    if len(medians) < 2:
        raise TrainingAbortError("too many failed cells to fit a slope")
    slope, slope_se = _loglog_slope(list(medians), list(medians.values()))

    exp_amb, exp_eff = theoretical_exponents(cfg.beta, cfg.lambda_spec.d, cfg.d_effective)
    dim_rng = np.random.default_rng(np.random.SeedSequence((cfg.master_seed, 99991)))
    xs = synth.sample_lambda(cfg.lambda_spec, cfg.dim_samples, dim_rng)
    support_slope = mass_slope = None
    try:
        support_slope = dimension.fit_dimension(dimension.profile_support(xs)).slope
        mass_profile = dimension.profile_mass(xs, alpha=2.0 * cfg.beta)
        mass_slope = dimension.fit_dimension(mass_profile).slope
    except InvalidInputError:
        pass  # window too narrow on degenerate data; report None

    return RateReport(
        cells=cells,
        medians=medians,
        slope=slope,
        slope_se=slope_se,
        exponent_ambient=exp_amb,
        exponent_effective=exp_eff,
        dim_support_slope=support_slope,
        dim_mass_slope=mass_slope,
        config_echo={
            "n_grid": list(cfg.n_grid), "seeds_per_n": cfg.seeds_per_n,
            "beta": cfg.beta, "family": cfg.family,
            "lambda": cfg.lambda_spec.descriptor(),
            "target": cfg.target.descriptor(),
            "d_effective": cfg.d_effective,
            "mc_test_points": cfg.mc_test_points,
            "master_seed": cfg.master_seed,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "optimizer": cfg.optimizer,
            "c_depth": cfg.c_depth,
            "c_width": cfg.c_width,
        },
    )


def _run_cell_star(args):
    return run_cell(*args)


@dataclass(frozen=True)
class SeparationReport:
    m: int
    d: int
    n_words: int
    min_hamming: int
    required_hamming: float
    unit: float                 # squared distance per differing cell
    min_separation: float       # min_hamming * unit
    min_ratio: float            # min_separation / (required * unit)

    def to_json_dict(self) -> dict:
        return {
            "m": self.m, "d": self.d, "n_words": self.n_words,
            "min_hamming": self.min_hamming,
            "required_hamming": self.required_hamming,
            "unit": self.unit,
            "min_separation": self.min_separation,
            "min_ratio": self.min_ratio,
        }


def separation_check(code: VGCode, beta: float, rho: float,
                     holder_norm: float = 1.0) -> SeparationReport:
    """Exhaustive pairwise separation audit through the exact identity.

    The squared distance between two codeword targets equals their Hamming
    distance times the per-cell unit a^2 rho^(2 beta + d) (int b^2)^d, so
    the audit reduces to the Hamming matrix.
    """
    if code.length > 64:
        raise InvalidInputError("exhaustive audit is limited to m^d <= 64")
    min_h = code.pairwise_min_distance()
    unit = synth.separation_identity(beta, code.d, holder_norm, rho, 1)
    required = code.min_distance_required
    return SeparationReport(
        m=code.m, d=code.d, n_words=len(code.codewords),
        min_hamming=min_h, required_hamming=required, unit=unit,
        min_separation=min_h * unit,
        min_ratio=(min_h * unit) / (required * unit),
    )
