"""Explicit feedforward ReLU networks and the depth/width sizing rule.

A net is an ordered list of affine maps with ReLU applied between them
(never after the last).  The final output can optionally pass through a
clamp to ``[-R, R]`` or through a family's canonical link; both are applied
functionally during evaluation, and the clamp can be exported as a pure
four-weight ReLU gadget when a self-contained artifact is needed.

Parameter accounting follows the usual conventions for this kind of
construction: ``depth`` is the number of affine maps, ``weight_count`` the
number of storable entries of all matrices and biases, ``max_weight`` the
largest absolute entry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SizingError
from . import expfam

FINAL_KINDS = ("identity", "clamp", "link")


@dataclass
class Affine:
    """One layer: ``y = w @ x + b`` with ``w`` of shape (out, in)."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.w.ndim != 2 or self.b.ndim != 1 or self.w.shape[0] != self.b.shape[0]:
            raise InvalidInputError(
                f"affine layer shapes do not compose: w {self.w.shape}, b {self.b.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w.shape[0]


@dataclass
class ReluNet:
    """Layered ReLU network with an optional final activation tag."""

    layers: list[Affine]
    final: str = "identity"
    clamp_level: float | None = None
    link_family: str | None = None

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("a network needs at least one affine layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise InvalidInputError(
                    f"consecutive layer shapes do not compose: {a.out_dim} -> {b.in_dim}"
                )
        if self.final not in FINAL_KINDS:
            raise InvalidInputError(f"unknown final activation {self.final!r}")
        if self.final == "clamp" and (self.clamp_level is None or self.clamp_level <= 0):
            raise InvalidInputError("clamp final activation needs a positive level")
        if self.final == "link" and not self.link_family:
            raise InvalidInputError("link final activation needs a family name")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def depth(self) -> int:
        return len(self.layers)

    def weight_count(self) -> int:
        return sum(layer.w.size + layer.b.size for layer in self.layers)

    def max_weight(self) -> float:
        return max(
            max(np.max(np.abs(layer.w)), np.max(np.abs(layer.b)))
            for layer in self.layers
        )

    def hidden_widths(self) -> list[int]:
        return [layer.out_dim for layer in self.layers[:-1]]

    def forward(self, x):
        """Evaluate on a single point (d,) or a batch (n, d).

        Returns a scalar / (n,) vector when the output dimension is 1,
        otherwise the raw (out,) / (n, out) array.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"input shape {x.shape} does not match input_dim={self.input_dim}"
            )
        for layer in self.layers[:-1]:
            h = np.maximum(h @ layer.w.T + layer.b, 0.0)
        last = self.layers[-1]
        h = h @ last.w.T + last.b
        h = self._apply_final(h)
        if h.shape[1] == 1:
            h = h[:, 0]
        return h[0] if single else h

    def _apply_final(self, h):
        if self.final == "clamp":
            r = self.clamp_level
            return np.clip(h, -r, r)
        if self.final == "link":
            return expfam.get_family(self.link_family).grad_psi(h)
        return h

    # -- serialization ---------------------------------------------------
    # Field order is fixed so that serialized nets diff cleanly.

    def to_json_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layer_dims": [layer.out_dim for layer in self.layers],
            "layers": [
                {"w": [float(v) for v in layer.w.ravel()],  # row-major
                 "b": [float(v) for v in layer.b]}
                for layer in self.layers
            ],
            "final": self.final,
            "clamp_level": self.clamp_level,
            "link_family": self.link_family,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "ReluNet":
        dims = [d["input_dim"]] + list(d["layer_dims"])
        layers = []
        for (n_in, n_out), spec in zip(zip(dims, dims[1:]), d["layers"]):
            w = np.array(spec["w"], dtype=float).reshape(n_out, n_in)
            b = np.array(spec["b"], dtype=float)
            layers.append(Affine(w, b))
        return cls(
            layers=layers,
            final=d.get("final", "identity"),
            clamp_level=d.get("clamp_level"),
            link_family=d.get("link_family"),
        )

    @classmethod
    def from_json(cls, s: str) -> "ReluNet":
        return cls.from_json_dict(json.loads(s))

    def copy(self) -> "ReluNet":
        return ReluNet(
            layers=[Affine(layer.w.copy(), layer.b.copy()) for layer in self.layers],
            final=self.final,
            clamp_level=self.clamp_level,
            link_family=self.link_family,
        )


def with_exported_clamp(net: ReluNet) -> ReluNet:
    """Materialize a clamp final activation as pure ReLU layers.

    ``clamp_R(t) = relu(t + R) - relu(t - R) - R`` exactly, so the export
    appends one hidden layer of two units and folds the combination into a
    new final affine.  Depth grows by one; the weight count grows by the
    gadget's six entries plus one extra final row entry.
    """
    if net.final != "clamp":
        return net.copy()
    if net.output_dim != 1:
        raise InvalidInputError("clamp export expects a scalar-output net")
    r = float(net.clamp_level)
    layers = [Affine(layer.w.copy(), layer.b.copy()) for layer in net.layers]
    layers.append(Affine(np.array([[1.0], [1.0]]), np.array([r, -r])))
    layers.append(Affine(np.array([[1.0, -1.0]]), np.array([-r])))
    return ReluNet(layers=layers, final="identity")


@dataclass(frozen=True)
class SizingRule:
    """Inputs of the depth/width rule ``L ~ log n``, ``W ~ n^{deff/(2b+deff)} log n``."""

    beta: float
    dim_effective: float
    n: int
    c_depth: float = 1.0
    c_width: float = 1.0

    def __post_init__(self):
        if self.beta <= 0 or self.dim_effective <= 0:
            raise InvalidInputError("beta and dim_effective must be positive")
        if self.n < 2:
            raise InvalidInputError("sample count must be at least 2")
        if self.c_depth <= 0 or self.c_width <= 0:
            raise InvalidInputError("proportionality constants must be positive")


def size_for(rule: SizingRule) -> tuple[int, int]:
    """Evaluate the sizing rule, clamping to the minimal viable net."""
    ln_n = math.log(rule.n)
    deff = rule.dim_effective
    exponent = deff / (2.0 * rule.beta + deff)
    depth = max(2, math.ceil(rule.c_depth * ln_n))
    width = math.ceil(rule.c_width * rule.n ** exponent * ln_n)
    return depth, width


def _architect_weight_count(depth: int, d: int, h: int) -> int:
    # d -> h -> ... -> h -> 1 with depth affine maps and depth-1 hidden layers
    first = (d + 1) * h
    middles = (depth - 2) * (h + 1) * h
    last = h + 1
    return first + middles + last


def architect(depth: int, width_budget: int, d: int, rng: np.random.Generator) -> ReluNet:
    """Allocate a weight budget evenly across ``depth - 1`` hidden layers.

    The single hidden width is the largest integer whose total parameter
    count stays within the budget; weights get He-style ``sqrt(2/fan_in)``
    normal initialization from the caller's generator, biases start at zero.
    """
    if depth < 2:
        raise SizingError("depth must be at least 2")
    if d < 1:
        raise SizingError("input dimension must be at least 1")
    if width_budget < d + 1:
        raise SizingError(f"weight budget {width_budget} below the minimum {d + 1}")
    h = 1
    if _architect_weight_count(depth, d, h) > width_budget:
        raise SizingError(
            f"weight budget {width_budget} cannot fit depth {depth} on input dim {d}"
        )
    while _architect_weight_count(depth, d, h + 1) <= width_budget:
        h += 1
    dims = [d] + [h] * (depth - 1) + [1]
    layers = []
    for n_in, n_out in zip(dims, dims[1:]):
        scale = math.sqrt(2.0 / n_in)
        layers.append(Affine(rng.normal(0.0, scale, size=(n_out, n_in)), np.zeros(n_out)))
    return ReluNet(layers=layers)
