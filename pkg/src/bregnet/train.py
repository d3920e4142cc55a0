"""Minimize the empirical Bregman risk of a ReLU net by backpropagation.

The output-layer seed gradient is the analytic residual ``mu(eta) - y``;
everything upstream is the usual chain rule through ReLU masks.  Training
keeps the best iterate by training risk, so the returned net never does
worse than the initialization on the training set.  Runs are deterministic:
the same seed, config, and data produce a bit-identical loss trace.

Net outputs are treated as natural parameters.  Before the loss they are
clamped functionally to ``[-R, R]`` (the configured output clamp) and to
the family's natural domain; the clamp enters the gradient as a 0/1 mask.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import expfam
from .errors import InvalidInputError, TrainingAbortError
from .expfam import ExpFamily, get_family
from .net import Affine, ReluNet

FULL_BATCH_MAX_N = 512
DEFAULT_MINIBATCH = 64


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" (b1=0.9, b2=0.999, eps=1e-8) or "sgd"
    seed: int = 0
    batch_size: int | None = None  # None: full batch up to n=512, else 64
    clip_r: float | None = None    # output clamp level; None keeps the net's own

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidInputError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidInputError("batch_size must be at least 1")


@dataclass
class Dataset:
    """Supervised sample with covariates in the unit cube."""

    xs: np.ndarray  # (n, d)
    ys: np.ndarray  # (n,)
    family: str

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.xs.ndim != 2 or self.ys.ndim != 1 or len(self.xs) != len(self.ys):
            raise InvalidInputError("xs must be (n, d) and ys (n,) of equal length")
        if np.any(self.xs < 0.0) or np.any(self.xs > 1.0):
            raise InvalidInputError("covariates must lie in [0, 1]^d")
        expfam._check_response(get_family(self.family), self.ys)

    @property
    def n(self) -> int:
        return len(self.ys)

    @property
    def d(self) -> int:
        return self.xs.shape[1]


def _eta_bounds(fam: ExpFamily, clamp_level: float | None) -> tuple[float, float]:
    lo, hi = fam.theta_domain
    if clamp_level is not None:
        lo, hi = max(lo, -clamp_level), min(hi, clamp_level)
    return lo, hi


def _net_clamp_level(net: ReluNet) -> float | None:
    return net.clamp_level if net.final == "clamp" else None


def _forward_cache(net: ReluNet, xs: np.ndarray):
    """Forward pass keeping hidden activations; returns (hiddens, raw_eta)."""
    hiddens = [xs]
    h = xs
    for layer in net.layers[:-1]:
        h = np.maximum(h @ layer.w.T + layer.b, 0.0)
        hiddens.append(h)
    last = net.layers[-1]
    raw = (h @ last.w.T + last.b)[:, 0]
    return hiddens, raw


def empirical_risk(net: ReluNet, data: Dataset) -> float:
    """Mean Bregman loss over the sample; extreme outputs are clamped."""
    fam = get_family(data.family)
    _, raw = _forward_cache(net, data.xs)
    lo, hi = _eta_bounds(fam, _net_clamp_level(net))
    eta = np.clip(raw, lo, hi)
    return float(np.mean(expfam.loss_natural(fam, data.ys, eta)))


def backprop_grads(net: ReluNet, xs: np.ndarray, ys: np.ndarray, fam: ExpFamily,
                   clamp_level: float | None = None):
    """Gradient of the mean loss over the batch, one (gw, gb) pair per layer."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) == 0:
        raise InvalidInputError("batch must be nonempty")
    hiddens, raw = _forward_cache(net, xs)
    lo, hi = _eta_bounds(fam, clamp_level if clamp_level is not None else _net_clamp_level(net))
    eta = np.clip(raw, lo, hi)
    mask = ((raw > lo) & (raw < hi)).astype(float)
    delta = ((fam.grad_psi(eta) - ys) * mask / len(xs))[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        h_in = hiddens[idx]
        gw = delta.T @ h_in
        gb = delta.sum(axis=0)
        grads.append((gw, gb))
        if idx > 0:
            delta = (delta @ layer.w) * (hiddens[idx] > 0.0)
    grads.reverse()
    return grads


class _Adam:
    def __init__(self, shapes, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * np.square(g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


class _Sgd:
    def __init__(self, shapes, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


@dataclass
class FitResult:
    net: ReluNet
    trace: list[float]          # training risk after each epoch
    initial_risk: float
    final_risk: float           # risk of the returned (best) iterate
    best_epoch: int             # 0 means the initialization was never beaten


def fit(net: ReluNet, data: Dataset, cfg: TrainConfig) -> FitResult:
    """Train a copy of ``net`` on ``data`` and return the best iterate."""
    if net.final == "link":
        raise InvalidInputError("fit expects a natural-parameter net (identity or clamp final)")
    if net.input_dim != data.d:
        raise InvalidInputError(f"net input_dim {net.input_dim} != data dim {data.d}")
    if cfg.batch_size is not None and cfg.batch_size > data.n:
        raise InvalidInputError("batch_size exceeds the sample size")

    work = net.copy()
    if cfg.clip_r is not None:
        work.final = "clamp"
        work.clamp_level = float(cfg.clip_r)
    fam = get_family(data.family)
    clamp_level = _net_clamp_level(work)

    batch = cfg.batch_size
    if batch is None:
        batch = data.n if data.n <= FULL_BATCH_MAX_N else DEFAULT_MINIBATCH

    params = []
    for layer in work.layers:
        params.extend((layer.w, layer.b))
    shapes = [p.shape for p in params]
    opt = _Adam(shapes, cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(shapes, cfg.learning_rate)

    rng = np.random.default_rng(cfg.seed)
    initial_risk = empirical_risk(work, data)
    best_risk = initial_risk
    best_epoch = 0
    best_params = [p.copy() for p in params]
    trace: list[float] = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(data.n) if batch < data.n else np.arange(data.n)
        for start in range(0, data.n, batch):
            idx = order[start:start + batch]
            grads = backprop_grads(work, data.xs[idx], data.ys[idx], fam, clamp_level)
            flat = []
            for gw, gb in grads:
                flat.extend((gw, gb))
            if any(not np.all(np.isfinite(g)) for g in flat):
                raise TrainingAbortError(f"non-finite gradient at epoch {epoch}")
            opt.step(params, flat)
        risk = empirical_risk(work, data)
        trace.append(risk)
        if risk < best_risk:
            best_risk = risk
            best_epoch = epoch
            for dst, src in zip(best_params, params):
                np.copyto(dst, src)

    for dst, src in zip(params, best_params):
        np.copyto(dst, src)
    return FitResult(net=work, trace=trace, initial_risk=initial_risk,
                     final_risk=best_risk, best_epoch=best_epoch)


def save_trace(path, trace) -> None:
    """Write a loss trace as CSV with columns (epoch, train_risk)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_risk"])
        for epoch, risk in enumerate(trace, start=1):
            writer.writerow([epoch, f"{risk:.17g}"])
