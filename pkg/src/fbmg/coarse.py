"""Coarse-grid model of the dual TV problem.

At a feasible fine iterate ``x`` every coarse pixel ``l`` gets a constraint
set ``Omega_l = zeta0_l + polar(Gamma_l)``, where ``Gamma_l`` collects the
restricted ball normals of the fine pixels under the restriction stencil of
``l``. In two dimensions the bipolar of ``Gamma_l`` is one of five cones
(zero, ray, two-director cone, half-plane, whole plane), which makes the
projection onto ``Omega_l`` closed-form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .core import pixel_norms
from .dataterm import DENOISING
from .transfer import GridTransfer
from .tv_ops import GRADIENT_NORM_SQ, divergence_adjoint, gradient

__all__ = [
    "ZERO",
    "RAY",
    "TWO_CONE",
    "HALF_PLANE",
    "FULL",
    "PixelSubdiffClass",
    "ConeClass",
    "classify_pixel",
    "reduce_directors",
    "reduce_director_stack",
    "CoarseDataTerm",
    "CoarseModel",
    "build_coarse_model",
    "prox_coarse",
    "coarse_fb_iterate",
    "twocone_sector",
]

ZERO, RAY, TWO_CONE, HALF_PLANE, FULL = range(5)
KIND_NAMES = ("zero", "ray", "two_cone", "half_plane", "full")


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def _rot(a):
    """Counter-clockwise quarter turn."""
    return np.array([-a[1], a[0]])


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / math.hypot(v[0], v[1])


@dataclass(frozen=True)
class PixelSubdiffClass:
    """Ball subdifferential at one fine pixel: ``{0}`` or the ray through ``direction``."""

    boundary: bool
    direction: Optional[np.ndarray] = None


def classify_pixel(xi, alpha, boundary_band=1e-9, boundary_tol=1e-12):
    nrm = math.hypot(xi[0], xi[1])
    if nrm > alpha * (1 + boundary_tol):
        raise ValueError(f"pixel of norm {nrm!r} lies outside the ball of radius {alpha!r}")
    if nrm >= alpha * (1 - boundary_band):
        return PixelSubdiffClass(True, np.array(xi, dtype=float))
    return PixelSubdiffClass(False)


@dataclass
class ConeClass:
    """Closed convex cone in the plane, in one of the five reduced forms.

    Directors are unit vectors. For ``TWO_CONE``, ``zs`` may equal ``-zj``
    (the cone is then a line). For ``HALF_PLANE``, ``zj`` spans the boundary
    line and ``zs`` is a director on the open side. ``zjo``/``zso`` are unit
    orthogonals to ``zj``/``zs`` that are non-positive on the whole cone.
    """

    kind: int
    zj: Optional[np.ndarray] = None
    zs: Optional[np.ndarray] = None
    zjo: Optional[np.ndarray] = None
    zso: Optional[np.ndarray] = None

    @property
    def name(self) -> str:
        return KIND_NAMES[self.kind]

    @property
    def is_line(self) -> bool:
        return self.kind == TWO_CONE and float(np.dot(self.zj, self.zs)) < 0 and abs(_cross(self.zj, self.zs)) < 1e-12

    def distance(self, w) -> float:
        """Euclidean distance from ``w`` to the cone."""
        w = np.asarray(w, dtype=float)
        if self.kind == FULL:
            return 0.0
        if self.kind == ZERO:
            return float(math.hypot(*w))
        if self.kind == HALF_PLANE:
            return max(0.0, float(np.dot(w, self.zjo)))

        def ray_dist(z):
            t = max(0.0, float(np.dot(w, z)))
            return float(math.hypot(*(w - t * z)))

        if self.kind == RAY:
            return ray_dist(self.zj)
        if not self.is_line and _in_sector(w, self.zj, self.zs):
            return 0.0
        return min(ray_dist(self.zj), ray_dist(self.zs))

    def contains(self, w, tol=1e-8) -> bool:
        return self.distance(w) <= tol * max(1.0, float(np.linalg.norm(w)))


def _in_sector(v, a, b, tol=0.0):
    """``v`` in ``ccone{a, b}`` for non-collinear ``a``, ``b``."""
    det = _cross(a, b)
    b1 = _cross(v, b) / det
    b2 = _cross(a, v) / det
    return b1 >= -tol and b2 >= -tol


def _rot_field(a):
    return np.stack([-a[1], a[0]])


def _facing(n, side):
    """Flip the normals ``n`` wherever they point towards ``side``."""
    return np.where(_dot(side, n) > 0, -n, n)


def reduce_director_stack(vectors, active, cone_tol=1e-9):
    """Director reduction run independently for many pixels at once.

    Parameters
    ----------
    vectors : ndarray, shape (k, 2, ...)
        Candidate directors, folded in along the first axis.
    active : ndarray of bool, shape (k, ...)
        Which candidates are boundary normals; the rest are skipped.

    Returns
    -------
    kind, zj, zs, zjo, zso : ndarrays
        Cone data per pixel; unused directors are zero.
    """
    vectors = np.asarray(vectors, dtype=float)
    active = np.asarray(active, dtype=bool)
    k, shape = vectors.shape[0], vectors.shape[2:]
    flat_v = vectors.reshape(k, 2, -1)
    flat_a = active.reshape(k, -1)
    # pixels without any boundary normal stay ZERO; only the rest are reduced
    cols = np.flatnonzero(flat_a.any(axis=0))
    outs = [np.zeros(shape, dtype=int)] + [np.zeros((2,) + shape) for _ in range(4)]
    if cols.size:
        part = _reduce_flat(flat_v[:, :, cols], flat_a[:, cols], cone_tol)
        for full, sub in zip(outs, part):
            full.reshape(full.shape[:-len(shape)] + (-1,))[..., cols] = sub
    return tuple(outs)


def _reduce_flat(vectors, active, cone_tol):
    shape = vectors.shape[2:]
    kind = np.zeros(shape, dtype=int)
    line = np.zeros(shape, dtype=bool)
    zj = np.zeros((2,) + shape)
    zs = np.zeros((2,) + shape)
    zo = np.zeros((2,) + shape)
    for v, act in zip(vectors, active):
        nrm = np.hypot(v[0], v[1])
        act = act & (nrm > 0) & (kind != FULL)
        if not act.any():
            continue
        z = v / np.where(nrm > 0, nrm, 1.0)
        k0 = kind.copy()
        col = np.abs(_cross(zj, z)) <= cone_tol

        to_ray = act & (k0 == ZERO)
        zj = np.where(to_ray, z, zj)
        kind[to_ray] = RAY

        # ray + z: same direction, opposite (a line) or a proper two-cone
        ray = act & (k0 == RAY)
        opp = ray & col & (_dot(zj, z) <= 0)
        gen = ray & ~col
        zs = np.where(opp, -zj, np.where(gen, z, zs))
        kind[opp | gen] = TWO_CONE

        # half-plane + z beyond its boundary line fills the plane
        half = act & (k0 == HALF_PLANE)
        kind[half & (_dot(z, zo) > cone_tol)] = FULL

        # line + z off the line closes a half-plane
        ln = act & (k0 == TWO_CONE) & line
        grow = ln & ~col
        zs = np.where(grow, z, zs)
        zo = np.where(grow, _facing(_rot_field(zj), z), zo)
        kind[grow] = HALF_PLANE

        # two-cone + z: solve zj b1 + zs b2 = z and branch on the signs
        two = act & (k0 == TWO_CONE) & ~line
        line = (line & ~grow) | opp
        if not two.any():
            continue
        det = np.where(two, _cross(zj, zs), 1.0)
        b1 = _cross(z, zs) / det
        b2 = _cross(zj, z) / det
        b1 = np.where(np.abs(b1) <= cone_tol, 0.0, b1)
        b2 = np.where(np.abs(b2) <= cone_tol, 0.0, b2)
        drop_j = two & (b1 > 0) & (b2 < 0)
        drop_s = two & (b1 < 0) & (b2 > 0)
        opp_s = two & (b1 == 0) & (b2 < 0)
        opp_j = two & (b1 < 0) & (b2 == 0)
        kind[two & (b1 < 0) & (b2 < 0)] = FULL

        # z makes one director redundant; the new pair is re-checked for collinearity
        swap = drop_j | drop_s
        keep = np.where(drop_j, zs, zj)
        gone = np.where(drop_j, zj, zs)
        pcol = np.abs(_cross(keep, z)) <= cone_tol
        same = swap & pcol & (_dot(keep, z) > 0)
        flat = swap & pcol & ~same
        proper = swap & ~pcol
        zj = np.where(swap, keep, zj)
        zs = np.where(proper, z, np.where(flat, gone, zs))
        zo = np.where(flat, _facing(_rot_field(keep), gone), zo)
        kind[same] = RAY
        kind[flat] = HALF_PLANE

        # z opposite one director: half-plane bounded by that director's line
        hp = opp_s | opp_j
        zj, zs = np.where(opp_s, zs, zj), np.where(opp_s, zj, zs)
        zo = np.where(hp, _facing(_rot_field(zj), zs), zo)
        kind[hp] = HALF_PLANE

    two = kind == TWO_CONE
    line &= two
    zj = np.where((kind == ZERO) | (kind == FULL), 0.0, zj)
    zs = np.where(two | (kind == HALF_PLANE), zs, 0.0)
    jo = np.where(line, _rot_field(zj), _facing(_rot_field(zj), zs))
    so = np.where(line, -jo, _facing(_rot_field(zs), zj))
    zjo = np.where(two, jo, np.where(kind == HALF_PLANE, zo, 0.0))
    zso = np.where(two, so, 0.0)
    return kind, zj, zs, zjo, zso


def reduce_directors(vectors: Sequence, cone_tol: float = 1e-9) -> ConeClass:
    """Reduce boundary normals to the closed convex cone they generate.

    Vectors are folded in one at a time. With two directors ``zj, zs`` on
    hand a new ``zp`` is expressed as ``zj b1 + zs b2 = zp`` and the sign
    pattern of ``(b1, b2)`` decides whether ``zp`` is redundant, replaces a
    director, closes a half-plane (``zp`` opposite a director) or fills the
    plane. Opposing pairs are kept as a line so that later directors still
    see both of them. Zero vectors are ignored.
    """
    vs = np.asarray(vectors, dtype=float).reshape(-1, 2)
    if len(vs) == 0:
        return ConeClass(ZERO)
    kind, zj, zs, zjo, zso = reduce_director_stack(
        vs[:, :, None], np.ones((len(vs), 1), dtype=bool), cone_tol
    )
    k = int(kind[0])
    pick = lambda a, used: a[:, 0].copy() if used else None  # noqa: E731
    return ConeClass(
        k,
        pick(zj, k in (RAY, TWO_CONE, HALF_PLANE)),
        pick(zs, k in (TWO_CONE, HALF_PLANE)),
        pick(zjo, k in (TWO_CONE, HALF_PLANE)),
        pick(zso, k == TWO_CONE),
    )


def twocone_sector(v, cone: ConeClass) -> int:
    """Which of the four sectors around a two-director cone contains ``v``.

    0: the cone itself, 1: its polar, 2: between ``zj`` and ``zjo``,
    3: between ``zs`` and ``zso``.
    """
    if cone.kind != TWO_CONE:
        raise ValueError("sector split is defined for two-director cones only")
    v = np.asarray(v, dtype=float)
    if np.dot(v, cone.zj) <= 0 and np.dot(v, cone.zs) <= 0:
        return 1
    if not cone.is_line and _in_sector(v, cone.zj, cone.zs):
        return 0
    if _in_sector(v, cone.zj, cone.zjo):
        return 2
    return 3


# --------------------------------------------------------------------------
# coarse smooth term
# --------------------------------------------------------------------------


class CoarseDataTerm:
    """Coarse quadratic ``F_H(zeta) = 0.5 |T_H^{-1/2}(div_H* zeta - e_H)|^2``.

    ``e_H`` is the restriction of ``e``. For denoising ``T_H`` is the identity;
    otherwise ``T_H = R T P`` (restriction, fine ``T``, prolongation), which
    is symmetric positive definite. Up to ``dense_limit`` coarse pixels it is
    assembled and diagonalised; beyond that it is applied matrix-free and
    inverted with conjugate gradients.
    """

    def __init__(self, dt, transfer: GridTransfer, dense_limit: int = 4096):
        self.transfer = transfer
        self.shape = transfer.coarse.shape
        self.e = transfer.restrict(dt.e)
        self.identity = dt.kind == DENOISING or dt.fourier_weights is None
        self._dt = dt
        self._eig = None
        N = transfer.coarse.n
        if self.identity:
            self.lambda_min = 1.0
        elif N <= dense_limit:
            TH = self._assemble()
            lam, V = np.linalg.eigh(TH)
            if lam[0] <= 0:
                raise ValueError("coarse operator is not positive definite")
            self._eig = (lam, V)
            self.lambda_min = float(lam[0])
        else:
            op = self._linear_operator()
            self.lambda_min = float(spla.eigsh(op, k=1, which="SA", tol=1e-8)[0][0])
        self.lipschitz = GRADIENT_NORM_SQ / self.lambda_min

    def apply_T(self, z):
        if self.identity:
            return np.asarray(z, dtype=float).copy()
        t = self.transfer
        return t.restrict(self._dt.apply_T(t.prolong(z)))

    def _assemble(self):
        rows, cols = self.shape
        N = rows * cols
        TH = np.empty((N, N))
        for start in range(0, N, 256):
            idx = np.arange(start, min(start + 256, N))
            basis = np.zeros((idx.size, rows, cols))
            basis[np.arange(idx.size), idx // cols, idx % cols] = 1.0
            fine = self.transfer.prolong(basis)
            Tf = np.fft.ifft2(np.fft.fft2(fine, norm="ortho") * self._dt.fourier_weights, norm="ortho").real
            TH[:, idx] = self.transfer.restrict(Tf).reshape(idx.size, N).T
        return 0.5 * (TH + TH.T)

    def _linear_operator(self):
        N = self.shape[0] * self.shape[1]
        return spla.LinearOperator(
            (N, N), matvec=lambda v: self.apply_T(v.reshape(self.shape)).ravel(), dtype=float
        )

    def apply_T_inv(self, z):
        z = np.asarray(z, dtype=float)
        if self.identity:
            return z.copy()
        if self._eig is not None:
            lam, V = self._eig
            return (V @ ((V.T @ z.ravel()) / lam)).reshape(self.shape)
        sol, info = spla.cg(self._linear_operator(), z.ravel(), rtol=1e-12, maxiter=1000)
        if info != 0:
            raise RuntimeError(f"coarse CG did not converge (info={info})")
        return sol.reshape(self.shape)

    def value(self, zeta) -> float:
        r = divergence_adjoint(zeta) - self.e
        return 0.5 * float(np.vdot(r, self.apply_T_inv(r)))

    def gradient(self, zeta):
        return gradient(self.apply_T_inv(divergence_adjoint(zeta) - self.e))


# --------------------------------------------------------------------------
# coarse model
# --------------------------------------------------------------------------


@dataclass
class CoarseModel:
    """Per-coarse-pixel cones, anchor ``zeta0`` and coherence shift ``w``.

    Cone data are kept as arrays over the coarse grid: ``kind`` is
    ``(rows, cols)`` and the directors are ``(2, rows, cols)``.
    """

    kind: np.ndarray
    zj: np.ndarray
    zs: np.ndarray
    zjo: np.ndarray
    zso: np.ndarray
    anchor: np.ndarray
    shift: np.ndarray
    smooth: CoarseDataTerm

    @property
    def L_H(self) -> float:
        return self.smooth.lipschitz

    def cone(self, r, c) -> ConeClass:
        k = int(self.kind[r, c])
        pick = lambda a: None if np.all(a[:, r, c] == 0) else a[:, r, c].copy()  # noqa: E731
        return ConeClass(k, pick(self.zj), pick(self.zs), pick(self.zjo), pick(self.zso))

    def gradient(self, zeta):
        """Gradient of the shifted coarse smooth term."""
        return self.smooth.gradient(zeta) + self.shift

    def in_constraints(self, zeta, tol=1e-10) -> bool:
        """Whether every coarse pixel of ``zeta`` lies in its ``Omega_l``."""
        v = zeta - self.anchor
        scale = tol * max(1.0, float(np.abs(v).max()))
        return bool(np.all(_polar_violation(v, self) <= scale))


def _polar_violation(v, model):
    """Distance-like violation of ``v`` w.r.t. the polar of each pixel's cone."""
    k = model.kind
    out = np.zeros(k.shape)
    ray = k == RAY
    out[ray] = np.maximum(0, _dot(v, model.zj))[ray]
    two = k == TWO_CONE
    out[two] = np.maximum(0, np.maximum(_dot(v, model.zj), _dot(v, model.zs)))[two]
    half = k == HALF_PLANE
    # Omega is the ray anchor + [0, inf) zjo
    perp = np.abs(_dot(v, model.zj)) + np.maximum(0, -_dot(v, model.zjo))
    out[half] = perp[half]
    full = k == FULL
    out[full] = np.hypot(v[0], v[1])[full]
    return out


def _stencil_stack(x, boundary, coarse_shape):
    """Fine vectors and boundary flags under each coarse stencil, in row-major tap order."""
    rows, cols = boundary.shape
    cr, cc = coarse_shape
    xp = np.zeros((2, 2 * cr + 1, 2 * cc + 1))
    bp = np.zeros((2 * cr + 1, 2 * cc + 1), dtype=bool)
    xp[:, 1:rows + 1, 1:cols + 1] = x
    bp[1:rows + 1, 1:cols + 1] = boundary
    vecs, act = [], []
    for di in range(3):
        for dj in range(3):
            vecs.append(xp[:, di:di + 2 * cr:2, dj:dj + 2 * cc:2])
            act.append(bp[di:di + 2 * cr:2, dj:dj + 2 * cc:2])
    return np.stack(vecs), np.stack(act)


def build_coarse_model(x, dt, transfer: GridTransfer, alpha, boundary_band=1e-9,
                       boundary_tol=1e-12, cone_tol=1e-9, smooth: CoarseDataTerm = None):
    """Coarse model at the feasible fine iterate ``x``.

    ``smooth`` may be passed to reuse an already assembled coarse data term.
    """
    norms = pixel_norms(x)
    if np.any(norms > alpha * (1 + boundary_tol)):
        i = np.unravel_index(np.argmax(norms), norms.shape)
        raise ValueError(f"fine iterate infeasible at pixel {i}: norm {norms[i]!r} > {alpha!r}")
    if smooth is None:
        smooth = CoarseDataTerm(dt, transfer)

    coarse = transfer.coarse
    shape2 = (2,) + coarse.shape
    boundary = norms >= alpha * (1 - boundary_band)
    kind = np.zeros(coarse.shape, dtype=int)
    zj = zs = zjo = zso = np.zeros(shape2)
    if boundary.any():
        vecs, act = _stencil_stack(x, boundary, coarse.shape)
        kind, zj, zs, zjo, zso = reduce_director_stack(vecs, act, cone_tol)

    anchor = transfer.restrict(x)
    shift = transfer.restrict(dt.smooth_gradient(x)) - smooth.gradient(anchor)
    return CoarseModel(kind, zj, zs, zjo, zso, anchor, shift, smooth)


def _ray_proj(v, z):
    """``p(v, z)`` for unit ``z``: projection of ``v`` onto ``[0, inf) z``."""
    return np.maximum(0.0, _dot(v, z)) * z


def prox_coarse(zeta, model: CoarseModel):
    """Pixelwise Euclidean projection of ``zeta`` onto ``Omega_l``.

    This is the proximal map of the coarse indicator for every step length.
    """
    zeta = np.asarray(zeta, dtype=float)
    a = model.anchor
    v = zeta - a
    k = model.kind
    out = zeta.copy()

    ray = k == RAY
    if ray.any():
        out = np.where(ray, zeta - _ray_proj(v, model.zj), out)

    half = k == HALF_PLANE
    if half.any():
        out = np.where(half, a + _ray_proj(v, model.zjo), out)

    out = np.where(k == FULL, a, out)

    two = k == TWO_CONE
    if two.any():
        in_polar = (_dot(v, model.zj) <= 0) & (_dot(v, model.zs) <= 0)
        c1 = _ray_proj(v, model.zjo)
        c2 = _ray_proj(v, model.zso)
        d1 = _dot(v - c1, v - c1)
        d2 = _dot(v - c2, v - c2)
        edge = np.where(d1 <= d2, c1, c2)
        proj = np.where(in_polar, zeta, a + edge)
        out = np.where(two, proj, out)
    return out


def coarse_fb_iterate(model: CoarseModel, m: int, tau_H: float, zeta0=None):
    """``m`` forward-backward steps on the coarse problem.

    Returns the last iterate and the sum of squared step lengths.
    """
    zeta = model.anchor.copy() if zeta0 is None else np.asarray(zeta0, dtype=float).copy()
    total = 0.0
    for _ in range(m):
        nxt = prox_coarse(zeta - tau_H * model.gradient(zeta), model)
        total += float(np.sum((nxt - zeta) ** 2))
        zeta = nxt
    return zeta, total
