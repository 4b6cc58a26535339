"""scikit-learn style wrappers around the FB / FBMG dual TV solvers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .coarse import CoarseDataTerm
from .core import FirstKIterations, GridShape, SolverConfig
from .dataterm import DataTerm, SamplingMasks
from .solver import fbmg_solve
from .transfer import GridTransfer

__all__ = ["TVDenoiser", "MRIReconstructor"]


class _DualTVSolver(TransformerMixin, BaseEstimator):
    """Shared fit/transform plumbing; subclasses build the data term."""

    def _data_term(self, X):
        raise NotImplementedError

    def _config(self, dt):
        if self.multigrid:
            smooth = CoarseDataTerm(dt, GridTransfer(GridShape(*dt.e.shape)))
            tau_H = self.tauh_scale / smooth.lipschitz
            trigger = FirstKIterations(self.trigger_k)
        else:
            tau_H, trigger = 1.0, None
        return SolverConfig(
            alpha=self.alpha,
            tau=self.tau_scale / dt.lipschitz,
            tau_H=tau_H,
            m=self.m,
            omega=self.omega,
            line_search=self.line_search,
            trigger=trigger,
            max_iter=self.max_iter,
        )

    def _solve(self, X, x0=None):
        dt = self._data_term(X)
        if x0 is None or x0.shape[1:] != dt.e.shape:
            x0 = np.zeros((2,) + dt.e.shape)
        x, trace = fbmg_solve(x0, dt, self._config(dt))
        return dt, x, trace

    def fit(self, X, y=None):
        """Solve the dual problem for ``X`` and keep the result."""
        dt, x, trace = self._solve(X)
        self.dual_ = x
        self.image_ = dt.primal_recover(x)
        self.trace_ = trace
        self.n_iter_ = len(trace) - 1
        self.objective_ = trace.records[-1].objective
        return self

    def transform(self, X):
        """Reconstruct ``X``, warm-started from the fitted dual field."""
        check_is_fitted(self, "dual_")
        dt, x, _ = self._solve(X, self.dual_)
        return dt.primal_recover(x)

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).image_


class TVDenoiser(_DualTVSolver):
    """Total-variation denoising of a single grayscale image.

    Parameters
    ----------
    alpha : float
        TV weight.
    tau_scale, tauh_scale : float
        Fine and coarse step lengths as multiples of ``1/L`` and ``1/L_H``.
    m : int
        Coarse steps per correction.
    trigger_k : int
        Coarse corrections are made during the first ``trigger_k`` iterations.
    omega : float
        Line-search scaling.
    multigrid : bool
        ``False`` runs plain forward-backward.
    line_search : {"projected", "fixed"}
    max_iter : int
    """

    def __init__(self, alpha=0.85, tau_scale=0.95, tauh_scale=1.95, m=6, trigger_k=110,
                 omega=0.4, multigrid=True, line_search="projected", max_iter=500):
        self.alpha = alpha
        self.tau_scale = tau_scale
        self.tauh_scale = tauh_scale
        self.m = m
        self.trigger_k = trigger_k
        self.omega = omega
        self.multigrid = multigrid
        self.line_search = line_search
        self.max_iter = max_iter

    def _data_term(self, X):
        X = check_array(X, dtype=float, ensure_min_samples=3, ensure_min_features=3)
        return DataTerm.denoising(X)


class MRIReconstructor(_DualTVSolver):
    """Total-variation reconstruction from subsampled Fourier data.

    ``X`` is a :class:`~fbmg.dataterm.SamplingMasks`; the output is the
    real image on the mask grid. Parameters are as for :class:`TVDenoiser`.
    """

    def __init__(self, alpha=1.15, tau_scale=0.95, tauh_scale=1.95, m=6, trigger_k=500,
                 omega=0.4, multigrid=True, line_search="projected", max_iter=500):
        self.alpha = alpha
        self.tau_scale = tau_scale
        self.tauh_scale = tauh_scale
        self.m = m
        self.trigger_k = trigger_k
        self.omega = omega
        self.multigrid = multigrid
        self.line_search = line_search
        self.max_iter = max_iter

    def _data_term(self, X):
        if not isinstance(X, SamplingMasks):
            raise TypeError(f"expected SamplingMasks, got {type(X).__name__}")
        rows, cols = X.masks.shape[1:]
        if rows < 3 or cols < 3:
            raise ValueError("grid must be at least 3x3")
        return DataTerm.mri(X)
