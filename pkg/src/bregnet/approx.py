"""Constructive compilation of smooth functions into explicit ReLU weights.

The compiler covers the unit cube with a regular grid of cells, builds a
partition of unity out of trapezoid units, multiplies each trapezoid window
against a local Taylor polynomial through an approximate-product network,
and sums the cells.  Everything is emitted as explicit weights; no training
is involved.

Building blocks
---------------
* ``build_trapezoid(a, b)``: the exact four-unit piecewise-linear window
  that is 1 on ``[-b, b]`` and 0 outside ``[-a, a]``.
* ``build_prod(k, m)``: a ReLU net approximating the k-ary product on
  ``[-1, 1]^k`` to sup error ``2^-m``.  Pairwise products are realized by
  the dyadic-sawtooth squaring network via
  ``x*y = sq(|x+y|/2) - sq(|x-y|/2)`` and composed in a balanced binary
  tree.  A convenient exact property of this form: if one input of a pair
  is exactly zero, both squaring branches receive the same value and the
  output is exactly zero, so a vanishing window annihilates its whole cell.
* ``compile_target``: the full assembly with a measured-error certificate.

All cells share identical template subnetworks (the construction is
translation invariant); evaluation shifts each query point into its owning
cell's coordinates and applies the per-cell Taylor coefficients.  Weight
and depth accounting describe the equivalent block-diagonal monolith, and
``CompiledNet.to_monolith`` materializes that net for cross-checking.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, InvalidInputError
from .net import Affine, ReluNet

DEFAULT_ETA0 = 0.25
DEFAULT_PROBE_POINTS = 100_000


# ---------------------------------------------------------------------------
# network surgery helpers
# ---------------------------------------------------------------------------

def _affine_net(w, b) -> ReluNet:
    return ReluNet(layers=[Affine(np.asarray(w, float), np.asarray(b, float))])


def _compose(outer: ReluNet, inner: ReluNet) -> ReluNet:
    """outer(inner(x)); the junction affines multiply into one layer."""
    if outer.input_dim != inner.output_dim:
        raise InvalidInputError("composition dims do not match")
    last = inner.layers[-1]
    first = outer.layers[0]
    merged = Affine(first.w @ last.w, first.w @ last.b + first.b)
    return ReluNet(layers=inner.layers[:-1] + [merged] + outer.layers[1:])


def _stack(nets: list[ReluNet]) -> ReluNet:
    """Parallel composition over a shared input; outputs concatenate."""
    depth = nets[0].depth()
    d_in = nets[0].input_dim
    if any(n.depth() != depth or n.input_dim != d_in for n in nets):
        raise InvalidInputError("stacked nets must share depth and input dim")
    layers = []
    for i in range(depth):
        ws = [n.layers[i].w for n in nets]
        bs = [n.layers[i].b for n in nets]
        if i == 0:
            w = np.vstack(ws)
        else:
            rows = sum(m.shape[0] for m in ws)
            cols = sum(m.shape[1] for m in ws)
            w = np.zeros((rows, cols))
            r = c = 0
            for m in ws:
                w[r:r + m.shape[0], c:c + m.shape[1]] = m
                r += m.shape[0]
                c += m.shape[1]
        layers.append(Affine(w, np.concatenate(bs)))
    return ReluNet(layers=layers)


def _identity_block(dim: int) -> ReluNet:
    """Depth-2 exact identity on R^dim via paired ReLUs."""
    eye = np.eye(dim)
    return ReluNet(layers=[
        Affine(np.vstack([eye, -eye]), np.zeros(2 * dim)),
        Affine(np.hstack([eye, -eye]), np.zeros(dim)),
    ])


def _extend_depth(netobj: ReluNet, depth: int) -> ReluNet:
    out = netobj
    while out.depth() < depth:
        out = _compose(_identity_block(out.output_dim), out)
    if out.depth() != depth:
        raise InvalidInputError("cannot shrink a net to a smaller depth")
    return out


def _select_inputs(netobj: ReluNet, cols: list[int], total: int) -> ReluNet:
    """Re-route the net to read its inputs from ``cols`` of a wider vector."""
    sel = np.zeros((netobj.input_dim, total))
    for row, col in enumerate(cols):
        sel[row, col] = 1.0
    return _compose(netobj, _affine_net(sel, np.zeros(netobj.input_dim)))


def _sum_scalar_outputs(nets: list[ReluNet], coeffs, bias: float = 0.0) -> ReluNet:
    """Weighted sum of equal-depth scalar nets without adding a layer.

    The stacked final affines merge into a single output row, so the total
    entry count is the sum of the parts minus the per-part bias slots plus
    the one shared bias.
    """
    stacked = _stack(nets)
    coeffs = np.asarray(coeffs, float)
    pieces, bsum = [], bias
    for c, n in zip(coeffs, nets):
        pieces.append(c * n.layers[-1].w[0])
        bsum += c * float(n.layers[-1].b[0])
    merged = Affine(np.concatenate(pieces)[None, :], np.array([bsum]))
    return ReluNet(layers=stacked.layers[:-1] + [merged])


# ---------------------------------------------------------------------------
# trapezoid window
# ---------------------------------------------------------------------------

def trapezoid_value(a: float, b: float, x):
    """Closed form of the window: 1 on [-b,b], 0 outside [-a,a], affine between."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.clip((a - x) / (a - b), 0.0, 1.0)


def build_trapezoid(a: float, b: float) -> ReluNet:
    """Four-ReLU window net: relu((x+a)/(a-b)) - relu((x+b)/(a-b))
    - relu((x-b)/(a-b)) + relu((x-a)/(a-b)).  Exact, no approximation."""
    if not (0.0 < b <= a) or b >= a:
        raise InvalidInputError("trapezoid needs 0 < b < a (plateau inside support)")
    s = 1.0 / (a - b)
    w1 = np.array([[s], [s], [s], [s]])
    b1 = np.array([a * s, b * s, -b * s, -a * s])
    w2 = np.array([[1.0, -1.0, -1.0, 1.0]])
    return ReluNet(layers=[Affine(w1, b1), Affine(w2, np.zeros(1))])


# ---------------------------------------------------------------------------
# squaring and product networks
# ---------------------------------------------------------------------------

def _sq_net(stages: int) -> ReluNet:
    """Dyadic approximation of t^2 on [0, 1]: sup error <= 4^-(stages+1).

    Maintains, per hidden layer, the three sawtooth units of the current
    stage plus a carry of t and the running correction sum; the final
    affine assembles t - sum_i g_i / 4^i.
    """
    if stages < 1:
        raise InvalidInputError("need at least one sawtooth stage")
    layers = [Affine(np.array([[1.0], [1.0], [1.0]]), np.array([0.0, -0.5, -1.0]))]
    # row combo recovering g from the current sawtooth triple
    g = np.array([2.0, -4.0, 2.0])
    for j in range(2, stages + 1):
        prev_units = 3 if j == 2 else 5
        w = np.zeros((5, prev_units))
        b = np.array([0.0, -0.5, -1.0, 0.0, 0.0])
        w[0, :3] = g
        w[1, :3] = g
        w[2, :3] = g
        if j == 2:
            w[3, 0] = 1.0           # carry t (= first unit of layer 1)
            w[4, :3] = g / 4.0      # acc_1 = g_1 / 4
        else:
            w[3, 3] = 1.0           # carry forward
            w[4, 3 + 1] = 1.0       # previous acc
            w[4, :3] = g / (4.0 ** (j - 1))
        layers.append(Affine(w, b))
    if stages == 1:
        final = Affine((np.array([1.0, 0.0, 0.0]) - g / 4.0)[None, :], np.zeros(1))
    else:
        row = np.zeros(5)
        row[3] = 1.0
        row[4] = -1.0
        row[:3] = -g / (4.0 ** stages)
        final = Affine(row[None, :], np.zeros(1))
    layers.append(final)
    return ReluNet(layers=layers)


def _pair_prod_net(stages: int) -> ReluNet:
    """x*y on [-1,1]^2 via sq(|x+y|/2) - sq(|x-y|/2); error <= 2^-(2*stages+1)."""
    halves = _affine_net(np.array([[0.5, 0.5], [0.5, -0.5]]), np.zeros(2))
    absier = ReluNet(layers=[
        Affine(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]), np.zeros(4)),
        Affine(np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]]), np.zeros(2)),
    ])
    sq = _sq_net(stages)
    two_sq = _stack([_select_inputs(sq, [0], 2), _select_inputs(sq, [1], 2)])
    diff = _affine_net(np.array([[1.0, -1.0]]), np.zeros(1))
    return _compose(diff, _compose(two_sq, _compose(absier, halves)))


def _prod_stages(k: int, m: int) -> int:
    """Smallest per-pair stage count whose accumulated error stays below 2^-m."""
    stages = 1
    while (k - 1) * 2.0 ** (-(2 * stages + 1)) > 2.0 ** (-m):
        stages += 1
    return stages


def prod_min_m(k: int) -> float:
    """Validity threshold for the accuracy parameter at arity k."""
    return 0.5 * (math.log2(4 * k) - 1.0)


def build_prod(k: int, m: int) -> ReluNet:
    """k-ary product net on [-1,1]^k with sup error <= 2^-m.

    Balanced binary tree of pairwise product gadgets; each level's
    leftover wire is carried by an exact identity.  Depth and weight
    count grow affinely in m at fixed k.
    """
    if k < 1:
        raise InvalidInputError("arity must be at least 1")
    if m < prod_min_m(k):
        raise InvalidInputError(
            f"accuracy parameter m={m} below the validity threshold "
            f"{prod_min_m(k):.3f} for arity {k}"
        )
    wires = [_affine_net(np.eye(k)[i:i + 1], np.zeros(1)) for i in range(k)]
    if k == 1:
        return _extend_depth(wires[0], 2)
    stages = _prod_stages(k, m)
    pair = _pair_prod_net(stages)
    while len(wires) > 1:
        nxt = []
        for i in range(0, len(wires) - 1, 2):
            nxt.append(_compose(pair, _stack([wires[i], wires[i + 1]])))
        if len(wires) % 2 == 1:
            nxt.append(_extend_depth(wires[-1], nxt[0].depth()))
        wires = nxt
    return wires[0]


# ---------------------------------------------------------------------------
# Taylor grid and the compiler
# ---------------------------------------------------------------------------

def multi_indices(d: int, max_order: int) -> list[tuple[int, ...]]:
    """All derivative multi-indices with |s| <= max_order, in stable order."""
    out = []
    for order in range(max_order + 1):
        for c in itertools.combinations_with_replacement(range(d), order):
            s = [0] * d
            for j in c:
                s[j] += 1
            out.append(tuple(s))
    return sorted(set(out))


@dataclass
class TaylorGrid:
    """Cell centers and per-cell Taylor coefficients of the target."""

    epsilon: float
    delta: float
    grid_k: int                  # cells per axis
    d: int
    indices: list[tuple[int, ...]]
    centers: np.ndarray          # (K^d, d)
    coeffs: np.ndarray           # (K^d, n_terms): d^s f(center) / s!

    @property
    def n_cells(self) -> int:
        return len(self.centers)


def _factorial_multi(s) -> float:
    out = 1.0
    for v in s:
        out *= math.factorial(v)
    return out


def taylor_grid(target, beta: float, d: int, eta: float, p: float = 2.0) -> TaylorGrid:
    lb = int(math.floor(beta))
    if getattr(target, "max_order", 0) < lb:
        raise CapabilityError(
            f"target exposes exact derivatives up to order {target.max_order}, "
            f"but order {lb} is required"
        )
    eps = (eta / 20.0) ** (1.0 / beta)
    grid_k = math.ceil(1.0 / (2.0 * eps))
    delta = min(eps ** (p * beta) / d, eps / 3.0)
    axis = eps * (2.0 * np.arange(grid_k) + 1.0)
    centers = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    indices = multi_indices(d, lb)
    coeffs = np.empty((len(centers), len(indices)))
    for t, s in enumerate(indices):
        coeffs[:, t] = np.asarray(target.partial(s, centers), float) / _factorial_multi(s)
    return TaylorGrid(epsilon=eps, delta=delta, grid_k=grid_k, d=d,
                      indices=indices, centers=centers, coeffs=coeffs)


def _cell_template(d: int, s: tuple[int, ...], eps: float, delta: float, m: int) -> ReluNet:
    """Template subnet for one Taylor term, in cell-centered coordinates.

    Product of the d trapezoid windows and |s| rescaled coordinate factors
    (u_j / eps), fed through the k-ary product net.  The rescaling keeps
    every product input inside [-1, 1] on the cell support; the matching
    eps^{|s|} factor is folded into the cell coefficient.
    """
    order = int(sum(s))
    k = d + order
    wires = []
    for j in range(d):
        wires.append(_select_inputs(build_trapezoid(eps, delta), [j], d))
    for j in range(d):
        for _ in range(s[j]):
            row = np.zeros((1, d))
            row[0, j] = 1.0 / eps
            wires.append(_extend_depth(_affine_net(row, np.zeros(1)), 2))
    if k == 1:
        return wires[0]
    stages = _prod_stages(k, m)
    pair = _pair_prod_net(stages)
    while len(wires) > 1:
        nxt = []
        for i in range(0, len(wires) - 1, 2):
            nxt.append(_compose(pair, _stack([wires[i], wires[i + 1]])))
        if len(wires) % 2 == 1:
            nxt.append(_extend_depth(wires[-1], nxt[0].depth()))
        wires = nxt
    return wires[0]


@dataclass
class CompiledNet:
    """Cell-translated assembly of template subnets.

    Mathematically identical to the block-diagonal monolith over all
    (cell, term) subnets with a single merged output row; the structured
    form evaluates each query through its owning cell only, which the
    vanishing trapezoid windows make exact for every other cell.
    """

    d: int
    epsilon: float
    delta: float
    m: int
    grid_k: int
    indices: list[tuple[int, ...]]
    templates: list[ReluNet]     # one per index, padded to a common depth
    coeffs: np.ndarray           # (K^d, n_terms), template scaling included

    @property
    def input_dim(self) -> int:
        return self.d

    @property
    def n_cells(self) -> int:
        return self.grid_k ** self.d

    def _cell_index(self, x: np.ndarray) -> np.ndarray:
        idx = np.floor(x / (2.0 * self.epsilon)).astype(int)
        np.clip(idx, 0, self.grid_k - 1, out=idx)
        return idx

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if pts.shape[1] != self.d:
            raise InvalidInputError(f"input dim {pts.shape[1]} != {self.d}")
        idx = self._cell_index(pts)
        centers = self.epsilon * (2.0 * idx + 1.0)
        u = pts - centers
        flat = np.ravel_multi_index(idx.T, (self.grid_k,) * self.d)
        vals = np.column_stack([tpl.forward(u) for tpl in self.templates])
        out = np.sum(vals * self.coeffs[flat], axis=1)
        return out[0] if single else out

    # -- monolith-equivalent accounting ----------------------------------

    def depth(self) -> int:
        return self.templates[0].depth()

    def weight_count(self) -> int:
        per_cell = sum(t.weight_count() for t in self.templates)
        n_sub = self.n_cells * len(self.templates)
        return self.n_cells * per_cell - (n_sub - 1)

    def max_weight(self) -> float:
        inner = max(
            max(np.max(np.abs(l.w)), np.max(np.abs(l.b)) if l.b.size else 0.0)
            for t in self.templates for l in t.layers[:-1]
        )
        abs_coef = np.max(np.abs(self.coeffs), axis=0)
        final = max(
            float(c * np.max(np.abs(t.layers[-1].w)))
            for c, t in zip(abs_coef, self.templates)
        )
        bias = abs(float(np.sum(self.coeffs @ np.array(
            [t.layers[-1].b[0] for t in self.templates]))))
        return max(inner, final, bias)

    def to_monolith(self) -> ReluNet:
        """Materialize the explicit block-diagonal net (small instances only)."""
        subnets = []
        weights = []
        for cell in range(self.n_cells):
            idx = np.unravel_index(cell, (self.grid_k,) * self.d)
            center = self.epsilon * (2.0 * np.asarray(idx, float) + 1.0)
            shift = _affine_net(np.eye(self.d), -center)
            for t, tpl in enumerate(self.templates):
                subnets.append(_compose(tpl, shift))
                weights.append(self.coeffs[cell, t])
        return _sum_scalar_outputs(subnets, weights)

    def to_json_dict(self) -> dict:
        return {
            "kind": "cell-sum",
            "input_dim": self.d,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "m": self.m,
            "grid_k": self.grid_k,
            "indices": [list(s) for s in self.indices],
            "templates": [t.to_json_dict() for t in self.templates],
            "coeffs": [[float(v) for v in row] for row in self.coeffs],
            "depth": self.depth(),
            "weight_count": self.weight_count(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


@dataclass
class ErrorBudget:
    """Closed-form bound on the L_p(Leb) compilation error."""

    taylor_term: float
    prod_term: float
    leak_term: float

    @property
    def total(self) -> float:
        return self.taylor_term + self.prod_term + self.leak_term


def error_budget(eta: float, m: int, delta: float, beta: float, d: int,
                 holder_norm: float, p: float = 2.0) -> ErrorBudget:
    """Predicted error bound for the compiler's internal parameter choices.

    Sums the local Taylor remainder over the plateau region, the product
    network's dyadic error, and the contribution of the thin region where
    the partition of unity is not identically one.
    """
    lb = int(math.floor(beta))
    c = holder_norm
    taylor = 2.0 * c * d ** lb / math.factorial(lb) * delta ** beta
    prod = 2.0 * c / 2.0 ** m
    leak = 4.0 * c * (d * delta) ** (1.0 / p)
    return ErrorBudget(taylor_term=taylor, prod_term=prod, leak_term=leak)


@dataclass
class CertBundle:
    """Measured facts about one compiled net, serializable as JSON."""

    depth: int
    weights: int
    m: int
    epsilon: float
    delta: float
    measured_error: float
    bound: float
    probe_points: int
    measured_se: float
    eta: float
    beta: float
    d: int
    p: float
    n_cells: int
    n_terms: int
    theta_depth: float
    theta_weights: float

    def to_json_dict(self) -> dict:
        return {
            "depth": self.depth,
            "weights": self.weights,
            "m": self.m,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "measured_error": self.measured_error,
            "bound": self.bound,
            "probe_points": self.probe_points,
            "measured_se": self.measured_se,
            "eta": self.eta,
            "beta": self.beta,
            "d": self.d,
            "p": self.p,
            "n_cells": self.n_cells,
            "n_terms": self.n_terms,
            "theta_depth": self.theta_depth,
            "theta_weights": self.theta_weights,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def compile_target(target, beta: float, d: int, eta: float, p: float = 2.0,
                   eta0: float = DEFAULT_ETA0,
                   probe_points: int = DEFAULT_PROBE_POINTS,
                   rng: np.random.Generator | None = None) -> tuple[CompiledNet, CertBundle]:
    """Emit explicit ReLU weights approximating ``target`` in L_p(Leb).

    Internal choices: cell radius ``eps = (eta/20)^(1/beta)``, plateau
    radius ``delta = min(eps^(p*beta)/d, eps/3)``, product accuracy
    ``m = ceil(log2(8/(eta d^floor(beta))))``.  The certificate records the
    monolith-equivalent depth and weight count, the Monte Carlo estimate of
    the achieved error (with its standard error), and the closed-form bound
    it must stay below.
    """
    if eta <= 0.0:
        raise InvalidInputError("target accuracy eta must be positive")
    if eta > eta0:
        raise InvalidInputError(
            f"eta={eta} above the validity threshold eta0={eta0}"
        )
    if getattr(target, "dim", d) != d:
        raise InvalidInputError(f"target dimension {target.dim} != d={d}")
    grid = taylor_grid(target, beta, d, eta, p)
    lb = int(math.floor(beta))
    m = math.ceil(math.log2(8.0 / (eta * d ** lb)))
    m = max(m, math.ceil(prod_min_m(d + lb)), 1)

    templates = [_cell_template(d, s, grid.epsilon, grid.delta, m) for s in grid.indices]
    depth = max(t.depth() for t in templates)
    templates = [_extend_depth(t, depth) for t in templates]

    scale = np.array([grid.epsilon ** sum(s) for s in grid.indices])
    compiled = CompiledNet(
        d=d, epsilon=grid.epsilon, delta=grid.delta, m=m, grid_k=grid.grid_k,
        indices=grid.indices, templates=templates, coeffs=grid.coeffs * scale,
    )

    rng = rng if rng is not None else np.random.default_rng(0)
    xs = rng.random((probe_points, d))
    diff = np.abs(compiled.forward(xs) - np.asarray(target.value(xs), float))
    moment = float(np.mean(diff ** p))
    err = moment ** (1.0 / p)
    se_moment = float(np.std(diff ** p, ddof=1) / math.sqrt(probe_points))
    se = se_moment / (p * moment ** ((p - 1.0) / p)) if moment > 0 else 0.0

    budget = error_budget(eta, m, grid.delta, beta, d, target.holder_norm, p)
    log_term = math.ceil(math.log2(8.0 / eta))
    w = compiled.weight_count()
    envelope = grid.n_cells * math.comb(d + lb, lb)
    cert = CertBundle(
        depth=compiled.depth(),
        weights=w,
        m=m,
        epsilon=grid.epsilon,
        delta=grid.delta,
        measured_error=err,
        bound=budget.total,
        probe_points=probe_points,
        measured_se=se,
        eta=eta,
        beta=beta,
        d=d,
        p=p,
        n_cells=grid.n_cells,
        n_terms=len(grid.indices),
        theta_depth=max(0.0, (compiled.depth() - 4.0) / log_term),
        theta_weights=max(0.0, (w / envelope - 8.0 * d - 4.0 * lb) / m),
    )
    return compiled, cert
