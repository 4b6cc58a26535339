"""Forward-difference gradient, its adjoint and the isotropic TV norm."""

import numpy as np

__all__ = ["GRADIENT_NORM_SQ", "gradient", "divergence_adjoint", "tv_norm", "operator_norm_sq"]

#: Bound on ``|grad|^2`` for the 2-D forward-difference gradient.
GRADIENT_NORM_SQ = 8.0


def gradient(y):
    """Forward differences with Neumann boundary.

    Returns a ``(2, rows, cols)`` array; the row difference vanishes on the
    last row and the column difference on the last column.
    """
    y = np.asarray(y, dtype=float)
    g = np.zeros((2,) + y.shape)
    g[0, :-1, :] = y[1:, :] - y[:-1, :]
    g[1, :, :-1] = y[:, 1:] - y[:, :-1]
    return g


def divergence_adjoint(x):
    """Adjoint of :func:`gradient` (the negative discrete divergence)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[1:])
    p, q = x[0], x[1]
    out[:-1, :] -= p[:-1, :]
    out[1:, :] += p[:-1, :]
    out[:, :-1] -= q[:, :-1]
    out[:, 1:] += q[:, :-1]
    return out


def tv_norm(g):
    """Sum of pixelwise Euclidean norms of a ``(2, rows, cols)`` field."""
    g = np.asarray(g, dtype=float)
    return float(np.sum(np.hypot(g[0], g[1])))


def operator_norm_sq(shape, n_iter=500, seed=0):
    """Power-iteration estimate of ``|grad* grad|`` on a grid of ``shape``."""
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(shape)
    y /= np.linalg.norm(y)
    lam = 0.0
    for _ in range(n_iter):
        z = divergence_adjoint(gradient(y))
        lam = float(np.linalg.norm(z))
        if lam == 0:
            return 0.0
        y = z / lam
    return lam
