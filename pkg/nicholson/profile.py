"""Grid functions on a truncated window with exponential left tail and clamped right tail."""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from nicholson import GridError

logger = logging.getLogger("nicholson.profile")

ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid t_min, t_min + h, ..., t_max with t_min < 0 < t_max."""
    t_min: float
    t_max: float
    h: float

    def __post_init__(self):
        if not (self.t_min < 0 < self.t_max):
            raise GridError(f"grid must straddle 0: t_min={self.t_min}, t_max={self.t_max}")
        if not self.h > 0:
            raise GridError(f"grid step must be positive, got {self.h}")
        cells = (self.t_max - self.t_min) / self.h
        if abs(cells - round(cells)) > ALIGN_TOL:
            raise GridError(f"h={self.h} does not divide the window [{self.t_min}, {self.t_max}]")

    @property
    def n(self) -> int:
        """Number of cells; the grid has n + 1 nodes."""
        return int(round((self.t_max - self.t_min) / self.h))

    @property
    def nodes(self) -> np.ndarray:
        return self.t_min + self.h * np.arange(self.n + 1)

    def steps(self, delay: float) -> int:
        """delay / h as an integer; GridError if the delay is not a multiple of h."""
        k = delay / self.h
        if abs(k - round(k)) > ALIGN_TOL:
            raise GridError(f"h={self.h} does not divide delay {delay}")
        return int(round(k))

    def require_aligned(self, *delays: float) -> None:
        for delay in delays:
            self.steps(delay)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.t_min, self.t_max, self.h / factor)


@dataclass(frozen=True, eq=False)
class Profile:
    """Values on a GridSpec; e^{left_rate t} tail below t_min, constant beyond t_max.

    The left tail starts from values[0] unless left_anchor pins its amplitude at t_min.
    """
    spec: GridSpec
    values: np.ndarray
    left_rate: float
    right_limit: float
    left_anchor: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.spec.n + 1,):
            raise GridError(f"expected {self.spec.n + 1} values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def left_value(self) -> float:
        """Tail value at t_min."""
        return float(self.values[0]) if self.left_anchor is None else self.left_anchor

    def anchored(self, value: float | None = None) -> "Profile":
        """Copy whose left tail is pinned at value (default: the current values[0])."""
        anchor = float(self.values[0]) if value is None else float(value)
        return Profile(self.spec, self.values, self.left_rate, self.right_limit, anchor)

    def eval(self, t):
        """Linear interpolation inside the window, tail models outside (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        v = self.values
        left = self.left_value * np.exp(self.left_rate * np.minimum(t_arr - self.spec.t_min, 0.0))
        inside = np.interp(t_arr, self.spec.nodes, v)
        out = np.where(t_arr < self.spec.t_min, left, inside)
        out = np.where(t_arr > self.spec.t_max, v[-1], out)
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def lagged(self, delay: float) -> np.ndarray:
        """Node values of t -> p(t - delay); delay must be a multiple of h."""
        k = self.spec.steps(delay)
        if k == 0:
            return self.values.copy()
        if k > self.spec.n:
            return self.left_value * np.exp(
                -self.left_rate * self.spec.h * (k - np.arange(self.spec.n + 1)))
        head = self.left_value * np.exp(-self.left_rate * self.spec.h * np.arange(k, 0, -1))
        return np.concatenate([head, self.values[:-k]])

    def with_values(self, values: np.ndarray) -> "Profile":
        return Profile(self.spec, values, self.left_rate, self.right_limit, self.left_anchor)

    def is_monotone(self, slack: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -slack))


def sup_diff(p: Profile, q: Profile) -> float:
    """max over nodes of |p - q|."""
    if p.spec != q.spec:
        raise GridError(f"profiles live on different grids: {p.spec} vs {q.spec}")
    return float(np.max(np.abs(p.values - q.values)))


def sample(fn: Callable, spec: GridSpec, left_rate: float, right_limit: float) -> Profile:
    """Evaluate fn at every node of spec."""
    nodes = spec.nodes
    values = np.asarray(fn(nodes), dtype=float)
    if values.shape == ():
        values = np.full(nodes.shape, float(values))
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise GridError(f"non-finite sample at node {i} (t={nodes[i]:.6g}): {values[i]}")
    return Profile(spec, values, left_rate, right_limit)


def constant_profile(value: float, spec: GridSpec, left_rate: float = 0.0) -> Profile:
    return Profile(spec, np.full(spec.n + 1, float(value)), left_rate, float(value))


def exp_weighted_nondecreasing(d: np.ndarray, beta: float, h: float,
                               rtol: float = 1e-10, atol: float = 0.0) -> tuple[bool, int, float]:
    """Whether t -> e^{beta t} d(t) is nondecreasing on a uniform grid.

    Tested in the overflow-free local form e^{beta h} d[i+1] >= d[i]. Returns
    (ok, worst node, worst margin).
    """
    d = np.asarray(d, dtype=float)
    if d.size < 2:
        return True, 0, 0.0
    grown = math.exp(beta * h) * d[1:]
    margin = grown - d[:-1] + rtol * (np.abs(d[:-1]) + np.abs(grown)) + atol
    i = int(np.argmin(margin))
    return bool(margin[i] >= 0), i, float(margin[i])
