"""Full-weighting restriction and the matching prolongation.

The restriction is the tensor product of the 1-D stencil ``[1/2, 1, 1/2]``
centred on every second fine pixel; coarse pixel ``(r, c)`` sits on fine
pixel ``(2r, 2c)``. Stencil taps outside the image are dropped. The
prolongation is ``1/mu`` times the transpose with ``mu = 4``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .core import GridShape

__all__ = ["GridTransfer", "restriction_matrix_1d"]

_STENCIL = (0.5, 1.0, 0.5)


def restriction_matrix_1d(n_fine: int) -> sp.csr_matrix:
    n_coarse = (n_fine + 1) // 2
    rows, cols, vals = [], [], []
    for r in range(n_coarse):
        for off, w in zip((-1, 0, 1), _STENCIL):
            i = 2 * r + off
            if 0 <= i < n_fine:
                rows.append(r)
                cols.append(i)
                vals.append(w)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_coarse, n_fine))


class GridTransfer:
    """Restriction/prolongation pair between a fine grid and its coarsening.

    Parameters
    ----------
    fine : GridShape
        Fine grid; needs at least 3 pixels along each axis.

    Both operators accept scalar images ``(rows, cols)`` and stacked fields
    ``(..., rows, cols)``; dual fields are transferred componentwise.
    """

    mu = 4.0

    def __init__(self, fine: GridShape):
        self.fine = fine
        self.coarse = fine.coarse()
        self._Rr = restriction_matrix_1d(fine.rows)
        self._Rc = restriction_matrix_1d(fine.cols)
        self._RcT = self._Rc.T.tocsr()
        self._RrT = self._Rr.T.tocsr()

    def _check(self, u, shape, what):
        u = np.asarray(u, dtype=float)
        if u.shape[-2:] != shape.shape:
            raise ValueError(f"{what} field has shape {u.shape[-2:]}, expected {shape.shape}")
        return u

    def restrict(self, u):
        u = self._check(u, self.fine, "fine")
        if u.ndim > 2:
            return np.stack([self.restrict(v) for v in u])
        return np.asarray(self._Rr @ (self._Rc @ u.T).T)

    def prolong(self, w):
        w = self._check(w, self.coarse, "coarse")
        if w.ndim > 2:
            return np.stack([self.prolong(v) for v in w])
        return np.asarray(self._RrT @ (self._RcT @ w.T).T) / self.mu

    def fine_pixel_support(self, l):
        """Fine pixels ``(i, j)`` carrying nonzero weight for coarse pixel ``l``.

        ``l`` is either a flat coarse index or a ``(row, col)`` pair.
        """
        if np.ndim(l) == 0:
            r, c = divmod(int(l), self.coarse.cols)
        else:
            r, c = (int(v) for v in l)
        if not (0 <= r < self.coarse.rows and 0 <= c < self.coarse.cols):
            raise IndexError(f"coarse index {l} out of range")
        return [
            (i, j)
            for i in (2 * r - 1, 2 * r, 2 * r + 1)
            if 0 <= i < self.fine.rows
            for j in (2 * c - 1, 2 * c, 2 * c + 1)
            if 0 <= j < self.fine.cols
        ]
