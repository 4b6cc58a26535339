"""Quadratic data terms ``phi(y) = 1/2 sum_s |T_s y - b_s|^2`` and their conjugates.

Two kinds are supported. Denoising has a single full sample with ``T_1 = I``
so ``T = I`` and ``e = b``. MRI takes ``T_s = S_s F`` with ``F`` the unitary
2-D DFT and ``S_s`` a frequency mask; then ``T = F* diag(d) F`` where ``d``
is the symmetrised mask count, and every operation involving ``T`` is a
pointwise operation in Fourier space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .tv_ops import GRADIENT_NORM_SQ, divergence_adjoint, gradient

__all__ = [
    "DENOISING",
    "MRI",
    "SingularDataTermError",
    "SamplingMasks",
    "DataTerm",
    "symmetrise_mask",
    "random_line_masks",
    "fft2",
    "ifft2",
]

log = logging.getLogger(__name__)

DENOISING = "denoising"
MRI = "mri"


def fft2(y):
    return np.fft.fft2(y, norm="ortho")


def ifft2(y):
    return np.fft.ifft2(y, norm="ortho")


class SingularDataTermError(ValueError):
    """Raised when some frequency is never sampled, so ``T`` is not invertible."""

    def __init__(self, frequency):
        self.frequency = tuple(int(v) for v in frequency)
        super().__init__(f"frequency {self.frequency} is not covered by any sampling mask")


def _negated_frequencies(a):
    rows, cols = a.shape[-2:]
    ri = (-np.arange(rows)) % rows
    ci = (-np.arange(cols)) % cols
    return a[..., ri, :][..., ci]


def symmetrise_mask(counts):
    """Average aggregate sample counts over each frequency and its negative."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("sample counts must be non-negative")
    return 0.5 * (counts + _negated_frequencies(counts))


def random_line_masks(shape, t, lines, rng, max_retries=100):
    """Draw ``t`` masks of ``lines`` distinct Fourier rows each.

    The draw is repeated until every frequency is covered after
    symmetrisation; returns ``(masks, retries)``.
    """
    rows, cols = shape
    if not 0 < lines <= rows:
        raise ValueError(f"lines must lie in [1, {rows}], got {lines}")
    for attempt in range(max_retries + 1):
        masks = np.zeros((t, rows, cols), dtype=bool)
        for s in range(t):
            masks[s, rng.choice(rows, size=lines, replace=False), :] = True
        if np.all(symmetrise_mask(masks.sum(axis=0)) > 0):
            if attempt:
                log.info("mask coverage reached after %d redraws", attempt)
            return masks, attempt
    raise SingularDataTermError(np.argwhere(symmetrise_mask(masks.sum(axis=0)) == 0)[0])


@dataclass
class SamplingMasks:
    """Fourier masks ``S_1..S_t`` with the measured (complex) samples.

    ``masks`` is a boolean ``(t, rows, cols)`` array and ``data`` the complex
    samples of the same shape, zero off the masks.
    """

    masks: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.masks = np.asarray(self.masks, dtype=bool)
        self.data = np.asarray(self.data, dtype=complex)
        if self.masks.ndim != 3 or self.masks.shape != self.data.shape:
            raise ValueError("masks and data must both have shape (t, rows, cols)")
        self.data = np.where(self.masks, self.data, 0)

    @property
    def t(self) -> int:
        return self.masks.shape[0]

    @classmethod
    def measure(cls, image, masks, noise=None):
        """Samples ``S_s (F image + noise_s)`` for each mask."""
        spectrum = fft2(np.asarray(image, dtype=float))
        data = np.broadcast_to(spectrum, np.shape(masks)).astype(complex)
        if noise is not None:
            data = data + noise
        return cls(masks, np.where(masks, data, 0))

    def save(self, path):
        """Write to ``.npz``; complex samples as interleaved (re, im) pairs."""
        pairs = np.stack([self.data.real, self.data.imag], axis=-1)
        np.savez(path, masks=self.masks, data=pairs)

    @classmethod
    def load(cls, path):
        with np.load(path) as f:
            pairs = f["data"]
            return cls(f["masks"], pairs[..., 0] + 1j * pairs[..., 1])


class DataTerm:
    """Assembled ``T`` and ``e`` of the data term, with the dual-side maps.

    Build instances through :meth:`denoising` or :meth:`mri`.
    """

    def __init__(self, kind, e, fourier_weights=None, samples=None):
        self.kind = kind
        self.e = np.asarray(e, dtype=float)
        if not np.all(np.isfinite(self.e)):
            raise ValueError("e must be finite")
        self.fourier_weights = None
        if fourier_weights is not None:
            d = np.asarray(fourier_weights, dtype=float)
            if d.shape != self.e.shape:
                raise ValueError("fourier_weights must match the image shape")
            bad = np.argwhere(~(d > 0))
            if bad.size:
                raise SingularDataTermError(bad[0])
            self.fourier_weights = d
        self.samples = samples
        self.shape = self.e.shape

    # -- assembly ---------------------------------------------------------

    @classmethod
    def denoising(cls, b):
        """``t = 1``, ``T_1 = I``: gives ``T = I`` and ``e = b``."""
        b = np.asarray(b, dtype=float)
        return cls(DENOISING, b.copy(), samples=b)

    @classmethod
    def mri(cls, samples: SamplingMasks):
        counts = samples.masks.sum(axis=0)
        d = symmetrise_mask(counts)
        bad = np.argwhere(d <= 0)
        if bad.size:
            raise SingularDataTermError(bad[0])
        e = ifft2(samples.data.sum(axis=0)).real
        return cls(MRI, e, fourier_weights=d, samples=samples)

    # -- T and its powers -------------------------------------------------

    def _fourier_scale(self, z, power):
        z = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z)):
            raise ValueError("input must be finite")
        if self.fourier_weights is None:
            return z.copy()
        return ifft2(fft2(z) * self.fourier_weights**power).real

    def apply_T(self, z):
        return self._fourier_scale(z, 1.0)

    def apply_T_inv(self, z):
        return self._fourier_scale(z, -1.0)

    def apply_T_inv_sqrt(self, z):
        return self._fourier_scale(z, -0.5)

    def inv_norm(self) -> float:
        """``|T^{-1}|``."""
        if self.fourier_weights is None:
            return 1.0
        return float(1.0 / self.fourier_weights.min())

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant ``8 |T^{-1}|`` of the smooth dual gradient."""
        return GRADIENT_NORM_SQ * self.inv_norm()

    def quad_inv(self, r) -> float:
        """``<r, T^{-1} r>``."""
        if self.fourier_weights is None:
            return float(np.vdot(r, r))
        fr = fft2(r)
        return float(np.sum(np.abs(fr) ** 2 / self.fourier_weights))

    # -- dual side --------------------------------------------------------

    def primal_recover(self, x):
        """Primal image ``T^{-1}(e - div* x)`` associated with a dual field."""
        return self.apply_T_inv(self.e - divergence_adjoint(x))

    def smooth_value(self, x) -> float:
        """``0.5 |T^{-1/2}(div* x - e)|^2``."""
        return 0.5 * self.quad_inv(divergence_adjoint(x) - self.e)

    def smooth_gradient(self, x):
        return -gradient(self.primal_recover(x))

    def residuals(self) -> List[np.ndarray]:
        """``r_s = b_s - T_s T^{-1} e`` for every sample."""
        y = self.apply_T_inv(self.e)
        if self.kind == DENOISING:
            return [self.samples - y]
        spectrum = fft2(y)
        return [np.where(m, b - spectrum, 0) for m, b in zip(self.samples.masks, self.samples.data)]

    def phi_value(self, y) -> float:
        """Primal data term ``0.5 sum_s |T_s y - b_s|^2``."""
        if self.kind == DENOISING:
            return 0.5 * float(np.sum((y - self.samples) ** 2))
        spectrum = fft2(y)
        return 0.5 * float(
            sum(np.sum(np.abs(np.where(m, spectrum - b, 0)) ** 2)
                for m, b in zip(self.samples.masks, self.samples.data))
        )

    def phi_conjugate_value(self, z, include_constants=False) -> float:
        """``0.5 |T^{-1/2}(z + e)|^2``, optionally with the additive constants.

        With the constants this is the Fenchel conjugate of :meth:`phi_value`;
        ``-0.5 sum_s |r_s|^2 - 0.5 |T^{-1/2} e|^2``.
        """
        val = 0.5 * self.quad_inv(np.asarray(z, dtype=float) + self.e)
        if include_constants:
            val -= 0.5 * sum(float(np.sum(np.abs(r) ** 2)) for r in self.residuals())
            val -= 0.5 * self.quad_inv(self.e)
        return val
