"""Shared grid geometry, configuration records and the dual objective.

Arrays follow one layout throughout the package: an image is a ``(rows, cols)``
float array and a dual field is a ``(2, rows, cols)`` array holding one
2-vector per pixel (first component along rows, second along columns).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

__all__ = [
    "GridShape",
    "SolverConfig",
    "TraceRecord",
    "SolveTrace",
    "FirstKIterations",
    "EveryNth",
    "BudgetedCount",
    "Never",
    "project_ball",
    "project_ball_field",
    "pixel_norms",
    "is_feasible",
    "dual_objective",
    "relative_error",
]


@dataclass(frozen=True)
class GridShape:
    """Pixel grid dimensions."""

    rows: int
    cols: int

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError("grid dimensions must be integers")
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def dual_shape(self) -> Tuple[int, int, int]:
        return (2, self.rows, self.cols)

    def coarse(self) -> "GridShape":
        """Coarse grid obtained by keeping every second fine pixel."""
        if self.rows < 3 or self.cols < 3:
            raise ValueError(f"grid {self.rows}x{self.cols} too small to coarsen")
        return GridShape(math.ceil(self.rows / 2), math.ceil(self.cols / 2))

    @classmethod
    def of(cls, array: np.ndarray) -> "GridShape":
        return cls(*np.shape(array)[-2:])


# --------------------------------------------------------------------------
# trigger policies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FirstKIterations:
    """Coarse corrections at every fine iteration ``k < K``."""

    K: int

    def __post_init__(self):
        if self.K <= 0:
            raise ValueError("K must be positive")

    def fires(self, k: int, n_corrections: int) -> bool:
        return k < self.K


@dataclass(frozen=True)
class EveryNth:
    """Coarse correction at every ``period``-th fine iteration."""

    period: int

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")

    def fires(self, k: int, n_corrections: int) -> bool:
        return k % self.period == 0


@dataclass(frozen=True)
class BudgetedCount:
    """At most ``max_corrections`` coarse corrections, taken first."""

    max_corrections: int

    def __post_init__(self):
        if self.max_corrections <= 0:
            raise ValueError("max_corrections must be positive")

    def fires(self, k: int, n_corrections: int) -> bool:
        return n_corrections < self.max_corrections


@dataclass(frozen=True)
class Never:
    """Trigger that never fires; turns the multigrid loop into plain FB."""

    def fires(self, k: int, n_corrections: int) -> bool:
        return False


@dataclass
class SolverConfig:
    """Parameters of the forward-backward (multigrid) iteration.

    ``line_search`` selects how a coarse correction is accepted (see
    :func:`fbmg.solver.line_search`). ``boundary_tol`` is the relative slack
    of the ball feasibility test, ``boundary_band`` the relative band below ``alpha`` inside which a pixel
    counts as lying on the ball boundary, and ``cone_tol`` the degeneracy
    tolerance of the director reduction.
    """

    alpha: float
    tau: float
    tau_H: float
    m: int = 6
    kappa: float = 0.5
    omega: float = 0.4
    line_search: str = "projected"
    trigger: object = field(default_factory=Never)
    max_iter: int = 1000
    boundary_tol: float = 1e-12
    boundary_band: float = 1e-9
    cone_tol: float = 1e-9
    target_relative: Optional[float] = None

    def __post_init__(self):
        if self.trigger is None:
            self.trigger = Never()
        self.validate()

    def validate(self, L: Optional[float] = None, L_H: Optional[float] = None) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tau > 0 or not self.tau_H > 0:
            raise ValueError("step lengths must be positive")
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.line_search not in ("fixed", "projected"):
            raise ValueError(f"unknown line-search mode {self.line_search!r}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if L is not None and not self.tau * L < 1:
            raise ValueError(f"tau={self.tau:g} violates tau < 1/L with L={L:g}")
        if L_H is not None and not 2 - self.tau_H * L_H > 0:
            raise ValueError(f"tau_H={self.tau_H:g} violates tau_H*L_H < 2 with L_H={L_H:g}")


@dataclass
class TraceRecord:
    iter: int
    icn: float
    cputime: float
    objective: float
    relative: float = float("nan")
    theta: float = 0.0
    corrected: bool = False


@dataclass
class SolveTrace:
    """Per-iteration log of a solve; record 0 is the starting point."""

    records: List[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def objective(self) -> np.ndarray:
        return self.column("objective")

    @property
    def icn(self) -> np.ndarray:
        return self.column("icn")

    def with_reference(self, vstar: float) -> "SolveTrace":
        """Fill the ``relative`` column from a reference optimum value."""
        v0 = self.records[0].objective
        for r in self.records:
            r.relative = relative_error(r.objective, v0, vstar)
        return self

    def first_reaching(self, rho: float) -> Optional[TraceRecord]:
        for r in self.records:
            if r.relative <= rho:
                return r
        return None


# --------------------------------------------------------------------------
# pixelwise ball geometry
# --------------------------------------------------------------------------


def project_ball(v, alpha: float) -> np.ndarray:
    """Euclidean projection of a 2-vector onto the closed ball of radius alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    v = np.asarray(v, dtype=float)
    nrm = math.hypot(v[0], v[1])
    if nrm <= alpha:
        return v.copy()
    return v * (alpha / nrm)


def pixel_norms(x: np.ndarray) -> np.ndarray:
    return np.hypot(x[0], x[1])


def project_ball_field(x: np.ndarray, alpha: float) -> np.ndarray:
    """Pixelwise :func:`project_ball` over a dual field."""
    nrm = pixel_norms(x)
    scale = alpha / np.maximum(nrm, alpha)
    return x * scale


def is_feasible(x: np.ndarray, alpha: float, boundary_tol: float = 1e-12) -> bool:
    return bool(np.all(pixel_norms(x) <= alpha * (1 + boundary_tol)))


def dual_objective(x: np.ndarray, dt, alpha: float, boundary_tol: float = 1e-12) -> float:
    """Value of ``0.5 |T^{-1/2}(div* x - e)|^2`` plus the pixelwise ball indicators.

    Additive constants of the conjugate data term are left out; returns
    ``inf`` when some pixel leaves the ball of radius ``alpha``.
    """
    if not is_feasible(x, alpha, boundary_tol):
        return math.inf
    return dt.smooth_value(x)


def relative_error(value: float, v0: float, vstar: float) -> float:
    """``(value - vstar) / (v0 - vstar)``."""
    gap = v0 - vstar
    if gap == 0:
        raise ZeroDivisionError("v0 equals vstar: problem already solved at the start point")
    return (value - vstar) / gap
