"""Extrapolation models and the PCE / ZNE pipelines built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, fold_global
from .noise import NoiseModel
from .pauli import PauliString
from .pcs import SandwichPlan, build_sandwich, max_checks, z_rights
from .sim import ExpectationEstimate, PostSelectionStarved, expectation_z_basis, run_shots

MODEL_KINDS = ("linear", "exponential", "richardson")
DEFAULT_B_BOUNDS = (0.6, 1.2)
B_GRID_STEP = 1e-4
CSV_HEADER = "kind,a|alpha,b|beta,c,residual_ss,target,extrapolated"


@dataclass(frozen=True)
class Series:
    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        pts = tuple((float(a), float(v), float(e)) for a, v, e in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("series needs at least one point")
        xs = [p[0] for p in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("abscissas must be strictly increasing")

    @classmethod
    def from_values(cls, xs: Sequence[float], ys: Sequence[float], errs: Sequence[float] | None = None) -> "Series":
        errs = [0.0] * len(xs) if errs is None else errs
        return cls(tuple(zip(xs, ys, errs)))

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def y(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class FitResult:
    kind: str
    params: tuple[float, ...]
    residual_ss: float
    target: float
    extrapolated: float

    def evaluate(self, x: float) -> float:
        if self.kind == "linear":
            alpha, beta = self.params
            return alpha + beta * x
        if self.kind == "exponential":
            a, b, c = self.params
            return a * b ** x + c
        raise ValueError("Richardson weights only define the value at the target")

    def csv_row(self) -> str:
        if self.kind == "richardson":
            cols = [";".join(repr(w) for w in self.params), "", ""]
        else:
            cols = [repr(p) for p in self.params] + [""] * (3 - len(self.params))
        return ",".join([self.kind, *cols, repr(self.residual_ss), repr(self.target), repr(self.extrapolated)])


def fit_linear(s: Series, target: float) -> FitResult:
    """Ordinary least squares ``E(x) = alpha + beta x`` (errors ignored)."""
    if len(s) < 2:
        raise ValueError("linear fit needs at least 2 points")
    x, y = s.x, s.y
    xm, ym = x.mean(), y.mean()
    beta = float(((x - xm) * (y - ym)).sum() / ((x - xm) ** 2).sum())
    alpha = float(ym - beta * xm)
    rss = float(((y - alpha - beta * x) ** 2).sum())
    return FitResult("linear", (alpha, beta), rss, float(target), alpha + beta * target)


def exponential_grid(b_bounds: tuple[float, float], step: float = B_GRID_STEP) -> np.ndarray:
    lo, hi = b_bounds
    if not (lo <= hi) or lo <= 0:
        raise ValueError(f"empty or non-positive b bounds {b_bounds}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def fit_exponential(s: Series, target: float, b_bounds: tuple[float, float] = DEFAULT_B_BOUNDS,
                    step: float = B_GRID_STEP) -> FitResult:
    """Least squares ``E(x) = a b^x + c`` with ``b`` on a bounded grid.

    For each grid value of ``b`` the optimal ``(a, c)`` is the exact linear
    least-squares solution; the returned fit is the grid point with the
    smallest residual, ties going to the smallest ``b``.
    """
    if len(s) < 3:
        raise ValueError("exponential fit needs at least 3 points")
    grid = exponential_grid(b_bounds, step)
    x, y = s.x, s.y
    basis = grid[:, None] ** x[None, :]
    u = basis - basis.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    uu = (u * u).sum(axis=1)
    uy = u @ yc
    syy = float(yc @ yc)
    flat = uu <= 1e-300
    safe = np.where(flat, 1.0, uu)
    a = np.where(flat, 0.0, uy / safe)
    rss = np.where(flat, syy, syy - uy * a)
    rss = np.maximum(rss, 0.0)
    # Recompute residuals directly near the optimum; the shortcut above loses
    # precision when the fit is almost exact.
    tol = 1e-12 * max(1.0, syy)
    best = int(np.flatnonzero(rss <= rss.min() + tol)[0])
    b = float(grid[best])
    a_best = float(a[best])
    c_best = float(y.mean() - a_best * basis[best].mean())
    resid = y - (a_best * b ** x + c_best)
    rss_best = float(resid @ resid)
    return FitResult("exponential", (a_best, b, c_best), rss_best, float(target),
                     a_best * b ** target + c_best)


def richardson_weights(scales: Sequence[float]) -> np.ndarray:
    """Weights with ``sum w = 1`` and ``sum w c^j = 0`` for ``j = 1..k-1``."""
    c = np.asarray(scales, dtype=float)
    if len(c) < 2:
        raise ValueError("Richardson needs at least 2 points")
    if len(set(c.tolist())) != len(c):
        raise ValueError("duplicate abscissas make the Richardson system singular")
    w = np.ones(len(c))
    for i in range(len(c)):
        for j in range(len(c)):
            if j != i:
                w[i] *= c[j] / (c[j] - c[i])
    return w


def richardson(s: Series) -> FitResult:
    w = richardson_weights(s.x)
    value = float(w @ s.y)
    return FitResult("richardson", tuple(float(v) for v in w), 0.0, 0.0, value)


def fit_model(kind: str, s: Series, target: float, b_bounds: tuple[float, float] = DEFAULT_B_BOUNDS) -> FitResult:
    if kind == "linear":
        return fit_linear(s, target)
    if kind == "exponential":
        return fit_exponential(s, target, b_bounds)
    if kind == "richardson":
        if target != 0:
            raise ValueError("Richardson extrapolates to zero only")
        return richardson(s)
    raise ValueError(f"unknown model {kind!r}")


# ---------------------------------------------------------------------------
# pipelines


def spawn_seeds(rng, count: int) -> list[int]:
    """Independent integer seeds derived from a Generator or an int."""
    entropy = int(rng.integers(0, 2**63 - 1)) if isinstance(rng, np.random.Generator) else int(rng)
    return [int(ss.generate_state(1, np.uint64)[0]) for ss in np.random.SeedSequence(entropy).spawn(count)]


def z_all(n: int) -> PauliString:
    return PauliString(n, 0, (1 << n) - 1)


@dataclass
class PipelineResult:
    fit: FitResult
    estimates: list[ExpectationEstimate]
    abscissas: list[float]
    seeds: list[int] = field(default_factory=list)

    @property
    def extrapolated(self) -> float:
        return self.fit.extrapolated


class LayerStarved(PostSelectionStarved):
    def __init__(self, layer: int, cause: Exception):
        super().__init__(f"post-selection starved at {layer} check layer(s): {cause}")
        self.layer = layer


def pce_pipeline(payload: Circuit, noise: NoiseModel, checks_used: int, model: str, shots_total: int, rng,
                 observable: PauliString | None = None, rights: Sequence[PauliString] | None = None,
                 b_bounds: tuple[float, float] = DEFAULT_B_BOUNDS) -> PipelineResult:
    """Measure post-selected values with 1..checks_used layers and extrapolate to n checks."""
    n = payload.n_data
    target = max_checks(n, "z_basis")
    needed = 3 if model == "exponential" else 2
    if model not in ("linear", "exponential"):
        raise ValueError("PCE supports linear and exponential models")
    if checks_used < needed:
        raise ValueError(f"{model} PCE needs at least {needed} check layers")
    if checks_used > target:
        raise ValueError(f"checks_used={checks_used} exceeds the maximum {target}")
    rights = list(rights) if rights is not None else z_rights(n, checks_used)
    observable = observable if observable is not None else z_all(n)
    seeds = spawn_seeds(rng, checks_used)
    per = shots_total // checks_used
    estimates = []
    for k in range(1, checks_used + 1):
        circ = build_sandwich(SandwichPlan.from_rights(payload, rights[:k]))
        records = run_shots(circ, noise, per, seeds[k - 1])
        try:
            estimates.append(expectation_z_basis(records, observable, post_select=True))
        except PostSelectionStarved as exc:
            raise LayerStarved(k, exc) from exc
    xs = list(range(1, checks_used + 1))
    series = Series.from_values(xs, [e.value for e in estimates], [e.std_error for e in estimates])
    return PipelineResult(fit_model(model, series, target, b_bounds), estimates, xs, seeds)


def measure_scaled(payload: Circuit, noise: NoiseModel, scales: Sequence[float], shots_total: int, rng,
                   observable: PauliString | None = None) -> tuple[list[ExpectationEstimate], list[int]]:
    scales = list(scales)
    if not scales or scales[0] != 1 or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError(f"scale factors must start at 1 and increase strictly: {scales}")
    observable = observable if observable is not None else z_all(payload.n_data)
    seeds = spawn_seeds(rng, len(scales))
    per = shots_total // len(scales)
    estimates = []
    for s, seed in zip(scales, seeds):
        circ = fold_global(payload, s).with_measurements()
        estimates.append(expectation_z_basis(run_shots(circ, noise, per, seed), observable, post_select=False))
    return estimates, seeds


def zne_pipeline(payload: Circuit, noise: NoiseModel, scales: Sequence[float], model: str, shots_total: int, rng,
                 observable: PauliString | None = None,
                 b_bounds: tuple[float, float] = DEFAULT_B_BOUNDS) -> PipelineResult:
    """Fold the payload per scale factor and extrapolate to zero noise."""
    estimates, seeds = measure_scaled(payload, noise, scales, shots_total, rng, observable)
    series = Series.from_values(list(scales), [e.value for e in estimates], [e.std_error for e in estimates])
    return PipelineResult(fit_model(model, series, 0.0, b_bounds), estimates, list(scales), seeds)
