"""Brute-force reference implementations used to cross-check the solver pieces.

Nothing here shares numerical kernels with the modules it checks: dense
operators are assembled column by column from the functional operators,
cone membership comes from sampling the polar, and the primal TV problem is
solved directly on the image with a smoothed gradient method.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "dense_matrix_of",
    "BipolarProbe",
    "bipolar_probe",
    "projection_vi_check",
    "sample_polar",
    "primal_tv_solve_small",
    "finite_difference_gradient",
    "dense_forward_difference",
    "dense_data_term",
    "dft_matrix",
]

MAX_DENSE = 10_000


def dense_matrix_of(op, shape_in, shape_out=None):
    """Matrix whose column ``i`` is ``op(e_i)`` (flattened)."""
    shape_in = tuple(np.atleast_1d(shape_in))
    n_in = int(np.prod(shape_in))
    if n_in > MAX_DENSE:
        raise ValueError(f"refusing to densify an operator with {n_in} inputs")
    cols = []
    for i in range(n_in):
        e = np.zeros(n_in)
        e[i] = 1.0
        cols.append(np.asarray(op(e.reshape(shape_in)), dtype=float).ravel())
    A = np.stack(cols, axis=1)
    if shape_out is not None and A.shape[0] != int(np.prod(shape_out)):
        raise ValueError("operator output does not match shape_out")
    if A.shape[0] > MAX_DENSE:
        raise ValueError(f"refusing to densify an operator with {A.shape[0]} outputs")
    return A


def dense_forward_difference(rows, cols):
    """Gradient matrix written out from the difference definition."""
    n = rows * cols
    G = np.zeros((2 * n, n))
    idx = lambda r, c: r * cols + c  # noqa: E731
    for r in range(rows):
        for c in range(cols):
            if r + 1 < rows:
                G[idx(r, c), idx(r + 1, c)] = 1
                G[idx(r, c), idx(r, c)] = -1
            if c + 1 < cols:
                G[n + idx(r, c), idx(r, c + 1)] = 1
                G[n + idx(r, c), idx(r, c)] = -1
    return G


# --------------------------------------------------------------------------
# cone membership by sampling
# --------------------------------------------------------------------------


class BipolarProbe:
    """Sampled polar/bipolar of a finite set of planar vectors.

    The polar is sampled on ``directions`` equispaced unit vectors together
    with the normals of every input (which contain its extreme rays). For a
    probe direction ``w`` the margin ``max_u <w, u>`` over sampled polar
    directions equals the distance from ``w`` to the bipolar; probes whose
    margin lies inside the ``band_deg`` band are reported as ambiguous.
    """

    def __init__(self, vectors, directions=360, band_deg=2.0, tol=1e-9):
        vs = [np.asarray(v, dtype=float) for v in vectors]
        vs = [v / math.hypot(*v) for v in vs if math.hypot(*v) > 0]
        self.inputs = np.array(vs).reshape(-1, 2)
        ang = 2 * np.pi * np.arange(directions) / directions
        self.probes = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        normals = np.concatenate([
            np.stack([-self.inputs[:, 1], self.inputs[:, 0]], axis=1),
            np.stack([self.inputs[:, 1], -self.inputs[:, 0]], axis=1),
        ]) if len(self.inputs) else np.zeros((0, 2))
        cand = np.concatenate([self.probes, normals])
        if len(self.inputs):
            ok = (cand @ self.inputs.T).max(axis=1) <= tol
            self.polar = cand[ok]
        else:
            self.polar = cand
        self.tol = tol
        self.band = math.sin(math.radians(band_deg))
        # test directions: the uniform probes plus the inputs and their negatives
        self.test_directions = np.concatenate([self.probes, self.inputs, -self.inputs])

    def margin(self, w):
        w = np.atleast_2d(w)
        if len(self.polar) == 0:
            return np.full(len(w), -1.0)
        return (w @ self.polar.T).max(axis=1)

    def polar_contains(self, u):
        if len(self.inputs) == 0:
            return True
        return bool((self.inputs @ np.asarray(u, dtype=float)).max() <= self.tol)

    def membership(self, w=None):
        """Tri-state bipolar membership: +1 inside, -1 outside, 0 ambiguous."""
        w = self.test_directions if w is None else np.atleast_2d(w)
        m = self.margin(w)
        out = np.zeros(len(w), dtype=int)
        out[m <= self.tol] = 1
        out[m >= self.band] = -1
        return out


def bipolar_probe(vectors, directions=360):
    """Membership predicate for the closed convex cone generated by ``vectors``."""
    probe = BipolarProbe(vectors, directions)
    return lambda w: probe.membership(w)[0] == 1


# --------------------------------------------------------------------------
# projection variational inequality
# --------------------------------------------------------------------------


def sample_polar(cone_vectors, n, rng, extra_polar=()):
    """Points of the polar of ``ccone(cone_vectors)``, drawn by rejection.

    Includes the origin, any given ``extra_polar`` directions and random
    radii along sampled polar directions.
    """
    probe = BipolarProbe(cone_vectors, directions=720)
    dirs = probe.polar
    if len(extra_polar):
        dirs = np.concatenate([dirs, np.atleast_2d(extra_polar)])
    pts = [np.zeros(2)]
    if len(dirs):
        for _ in range(n - 1):
            u = dirs[rng.integers(len(dirs))]
            pts.append(u * rng.exponential(2.0))
        # non-negative combinations of two polar directions
        for _ in range(n // 2):
            u, v = dirs[rng.integers(len(dirs), size=2)]
            pts.append(u * rng.exponential() + v * rng.exponential())
    return np.array(pts)


def projection_vi_check(point, proj, anchor, cone_vectors, samples=100, rng=None, tol=1e-10):
    """Check ``proj`` is the projection of ``point`` onto ``anchor + polar(cone)``.

    Verifies feasibility of ``proj`` by the polar test and the variational
    inequality ``<point - proj, omega - proj> <= tol`` on sampled ``omega``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    point, proj, anchor = (np.asarray(a, dtype=float) for a in (point, proj, anchor))
    scale = max(1.0, float(np.abs(point).max()), float(np.abs(anchor).max()))
    probe = BipolarProbe(cone_vectors)
    rel = proj - anchor
    if len(probe.inputs) and (probe.inputs @ rel).max() > tol * scale:
        return False
    omegas = anchor + sample_polar(cone_vectors, samples, rng, extra_polar=[rel] if np.any(rel) else ())
    omegas = np.concatenate([omegas, [anchor + 2 * rel]])
    return bool(np.all((omegas - proj) @ (point - proj) <= tol * scale**2))


# --------------------------------------------------------------------------
# calculus helpers and a primal solver
# --------------------------------------------------------------------------


def finite_difference_gradient(f, x, h=1e-6):
    """Central differences of a scalar function over all entries of ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        e = e.reshape(x.shape)
        flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _diff(y):
    g = np.zeros((2,) + y.shape)
    g[0, :-1] = np.diff(y, axis=0)
    g[1, :, :-1] = np.diff(y, axis=1)
    return g


def dft_matrix(n):
    """Unitary 1-D DFT matrix."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def dense_data_term(dt):
    """``T`` and ``e`` written out from explicit DFT matrices.

    For denoising ``T = I`` and ``e = b``. For MRI each sample operator is
    the row selection of the unitary 2-D DFT matrix ``W``, so
    ``T = sum_s Re(W* S_s W)`` and ``e = sum_s Re(W* b_s)``.
    """
    rows, cols = dt.shape
    n = rows * cols
    if dt.samples is None or np.ndim(dt.samples) == 2:
        return np.eye(n), np.asarray(dt.e, dtype=float).ravel()
    W = np.kron(dft_matrix(rows), dft_matrix(cols))
    T = np.zeros((n, n))
    e = np.zeros(n)
    for mask, data in zip(dt.samples.masks, dt.samples.data):
        sel = mask.ravel()
        Ts = W[sel]
        T += (Ts.conj().T @ Ts).real
        e += (Ts.conj().T @ data.ravel()[sel]).real
    return T, e


def primal_tv_solve_small(dt, alpha, iters=20000, tol=1e-12):
    """Minimise ``0.5 <T y, y> - <e, y> + alpha TV(y)`` by primal-dual splitting.

    ``T`` and ``e`` come from :func:`dense_data_term` and the gradient from
    ``np.diff``, so nothing is shared with the dual solver. Returns the image.
    """
    rows, cols = dt.shape
    n = rows * cols
    if n > 256:
        raise ValueError("primal oracle is meant for grids of at most 16x16")
    T, e = dense_data_term(dt)
    K = np.array([_diff(u.reshape(rows, cols)).ravel() for u in np.eye(n)]).T
    s = t = 0.99 / math.sqrt(8.0)
    solve = np.linalg.inv(np.eye(n) + t * T)
    y = np.linalg.solve(T, e)
    ybar = y.copy()
    p = np.zeros(2 * n)
    for _ in range(iters):
        q = (p + s * (K @ ybar)).reshape(2, n)
        q /= np.maximum(1.0, np.hypot(q[0], q[1]) / alpha)
        p = q.ravel()
        y_new = solve @ (y - t * (K.T @ p) + t * e)
        ybar = 2 * y_new - y
        change = np.linalg.norm(y_new - y)
        y = y_new
        if change <= tol * max(1.0, np.linalg.norm(y)):
            break
    return y.reshape(rows, cols)
