"""Benchmark harness: data preparation, FB vs FBMG runs and artifact output.

An experiment computes a reference optimum with a long FBMG run, then runs
plain FB and FBMG from zero and writes their traces, the reconstructions
and a summary of the cost to reach the relative errors 0.01 and 0.001.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from .coarse import CoarseDataTerm
from .core import FirstKIterations, GridShape, SolveTrace, SolverConfig, TraceRecord
from .dataterm import DataTerm, SamplingMasks, random_line_masks
from .solver import fb_solve, fbmg_solve
from .transfer import GridTransfer

__all__ = [
    "DENOISE",
    "MRI",
    "PAPER_LINES",
    "PAPER_MRI_ROWS",
    "THRESHOLDS",
    "TRACE_COLUMNS",
    "ExperimentSpec",
    "ExperimentResult",
    "add_gaussian_noise",
    "add_complex_noise",
    "load_image",
    "save_image",
    "default_image",
    "prepare_image",
    "write_trace_csv",
    "read_trace_csv",
    "combine_traces",
    "run_experiment",
]

log = logging.getLogger(__name__)

DENOISE = "denoise"
MRI = "mri"
THRESHOLDS = (0.01, 0.001)
TRACE_COLUMNS = ("iter", "icn", "cputime", "objective", "relative")
PAPER_LINES = 150
PAPER_MRI_ROWS = 583
PAPER_MRI_PIXELS = 583 * 493


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------


def add_gaussian_noise(image, sigma: float, seed) -> np.ndarray:
    """Pixelwise real Gaussian noise of standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    image = np.asarray(image, dtype=float)
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    return image + sigma * rng.standard_normal(image.shape)


def add_complex_noise(samples, sigma: float, seed, masks=None) -> np.ndarray:
    """Independent real and imaginary Gaussian noise on each sample.

    With ``masks`` given, noise is added only where a frequency was sampled.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    samples = np.asarray(samples, dtype=complex)
    if sigma == 0:
        return samples.copy()
    rng = np.random.default_rng(seed)
    noise = sigma * (rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape))
    if masks is not None:
        noise = np.where(masks, noise, 0)
    return samples + noise


# --------------------------------------------------------------------------
# images
# --------------------------------------------------------------------------


def load_image(path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale or RGB raster, scaled to [0, 1].

    Returns ``(rows, cols)`` for grayscale and ``(3, rows, cols)`` for colour.
    """
    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode in ("1", "L", "P", "LA", "RGBA", "RGB", "CMYK"):
                if mode == "P":
                    im = im.convert("RGB")
                    mode = "RGB"
                elif mode in ("LA",):
                    im = im.convert("L")
                    mode = "L"
                elif mode in ("RGBA", "CMYK"):
                    im = im.convert("RGB")
                    mode = "RGB"
                arr = np.asarray(im, dtype=float)
                scale = 1.0 if mode == "1" else 255.0
            elif mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=float)
                scale = 65535.0
            else:
                raise ValueError(f"unsupported image mode {mode!r}")
    except OSError as err:
        raise ValueError(f"cannot read image {path}: {err}") from err
    arr = arr / scale
    if arr.ndim == 3:
        arr = np.moveaxis(arr, -1, 0)
    return arr


def save_image(path, field, bits: int = 8) -> None:
    """Clamp to [0, 1], quantise to ``bits`` (8 or 16) and write."""
    a = np.clip(np.asarray(field, dtype=float), 0.0, 1.0)
    if bits == 8:
        q = np.round(a * 255).astype(np.uint8)
    elif bits == 16:
        q = np.round(a * 65535).astype(np.uint16)
    else:
        raise ValueError("bits must be 8 or 16")
    if q.ndim == 3:
        if bits != 8:
            raise ValueError("colour images are written with 8 bits")
        im = Image.fromarray(np.ascontiguousarray(np.moveaxis(q, 0, -1)), mode="RGB")
    else:
        im = Image.fromarray(q)
    im.save(path)


def default_image(kind: str) -> np.ndarray:
    """Grayscale astronaut for denoising, Shepp-Logan phantom for MRI."""
    from skimage import color, data

    if kind == MRI:
        return np.asarray(data.shepp_logan_phantom(), dtype=float)
    return color.rgb2gray(data.astronaut())


def prepare_image(img, size: Optional[int]) -> np.ndarray:
    """Centre-crop to a square and downscale to ``size`` x ``size``."""
    from skimage import transform

    img = np.asarray(img, dtype=float)
    if size is None:
        return img
    channels = img if img.ndim == 3 else img[None]
    rows, cols = channels.shape[1:]
    s = min(rows, cols)
    r0, c0 = (rows - s) // 2, (cols - s) // 2
    out = [
        transform.resize(ch[r0:r0 + s, c0:c0 + s], (size, size), anti_aliasing=s > size)
        for ch in channels
    ]
    out = np.stack(out)
    return out if img.ndim == 3 else out[0]


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------


def write_trace_csv(path, trace: SolveTrace) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([r.iter] + [repr(float(getattr(r, c))) for c in TRACE_COLUMNS[1:]])


def read_trace_csv(path) -> Dict[str, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {c: np.array([float(r[c]) for r in rows]) for c in TRACE_COLUMNS}


def combine_traces(traces: Sequence[SolveTrace]) -> SolveTrace:
    """Sum per-channel traces of equal length into one.

    Objectives and CPU times add; ``icn`` is shared because every channel
    uses the same trigger and is taken from the first trace.
    """
    if len(traces) == 1:
        return traces[0]
    n = min(len(t) for t in traces)
    out = SolveTrace()
    for k in range(n):
        recs = [t.records[k] for t in traces]
        out.append(TraceRecord(
            recs[0].iter, recs[0].icn,
            sum(r.cputime for r in recs),
            sum(r.objective for r in recs),
            theta=recs[0].theta,
            corrected=recs[0].corrected,
        ))
    return out


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one FB vs FBMG comparison.

    ``lines=None`` scales the 150 lines per mask of a 583-row image to the
    working row count. ``sigma`` for MRI is the noise level of unnormalised
    DFT samples on a grid of ``noise_pixels`` pixels and is divided by
    ``sqrt(noise_pixels)`` for the unitary transform used here.
    """

    kind: str = DENOISE
    input: Optional[str] = None
    size: Optional[int] = 64
    sigma: Optional[float] = None
    alpha: Optional[float] = None
    tau_scale: float = 0.95
    tauh_scale: float = 1.95
    m: int = 6
    trigger_k: Optional[int] = None
    omega: float = 0.4
    line_search: str = "projected"
    t: int = 21
    lines: Optional[int] = None
    noise_pixels: int = PAPER_MRI_PIXELS
    seed: int = 0
    max_iter: int = 2000
    ref_iters: int = 20000
    out: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (DENOISE, MRI):
            raise ValueError(f"kind must be {DENOISE!r} or {MRI!r}")
        if self.sigma is None:
            self.sigma = 0.4 if self.kind == DENOISE else 50.0
        if self.alpha is None:
            self.alpha = 0.85 if self.kind == DENOISE else 1.15
        if self.trigger_k is None:
            self.trigger_k = 110 if self.kind == DENOISE else 500
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.size is not None and self.size < 3:
            raise ValueError("size must be at least 3")

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def scaled_lines(self, rows: int) -> int:
        if self.lines is not None:
            return int(self.lines)
        return max(1, min(rows, round(PAPER_LINES * rows / PAPER_MRI_ROWS)))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    vstar: float
    fb: SolveTrace
    fbmg: SolveTrace
    reference: SolveTrace
    recon_fb: np.ndarray
    recon_fbmg: np.ndarray
    observed: np.ndarray
    summary: List[dict] = field(default_factory=list)
    dual_reference: Optional[np.ndarray] = None


def _config(spec, dt, smooth, multigrid: bool, max_iter: int) -> SolverConfig:
    return SolverConfig(
        alpha=spec.alpha,
        tau=spec.tau_scale / dt.lipschitz,
        tau_H=spec.tauh_scale / smooth.lipschitz,
        m=spec.m,
        omega=spec.omega,
        line_search=spec.line_search,
        trigger=FirstKIterations(spec.trigger_k) if multigrid else None,
        max_iter=max_iter,
    )


def _data_terms(spec, clean, rng_seed):
    """Build one data term per channel and the image shown as ``noisy``."""
    if spec.kind == DENOISE:
        noisy = add_gaussian_noise(clean, spec.sigma, rng_seed)
        chans = noisy if noisy.ndim == 3 else noisy[None]
        return [DataTerm.denoising(c) for c in chans], noisy
    img = clean if clean.ndim == 2 else clean.mean(axis=0)
    rng = np.random.default_rng(rng_seed)
    lines = spec.scaled_lines(img.shape[0])
    masks, retries = random_line_masks(img.shape, spec.t, lines, rng)
    log.info("MRI masks: t=%d, %d lines each, %d coverage redraws", spec.t, lines, retries)
    clean_samples = SamplingMasks.measure(img, masks)
    sigma = spec.sigma / math.sqrt(spec.noise_pixels)
    data = add_complex_noise(clean_samples.data, sigma, rng_seed + 1, masks=masks)
    dt = DataTerm.mri(SamplingMasks(masks, data))
    return [dt], dt.primal_recover(np.zeros((2,) + img.shape))


def run_experiment(spec: ExperimentSpec, image=None) -> ExperimentResult:
    """Run reference, FB and FBMG solves and write artifacts to ``spec.out``.

    Parameters
    ----------
    spec : ExperimentSpec
    image : ndarray, optional
        Clean image; otherwise read from ``spec.input`` or the built-in
        default for the experiment kind.
    """
    if image is None:
        image = load_image(spec.input) if spec.input else default_image(spec.kind)
    clean = prepare_image(image, spec.size)
    dts, observed = _data_terms(spec, clean, spec.seed)

    refs, duals, fbs, mgs, rec_fb, rec_mg = [], [], [], [], [], []
    for dt in dts:
        shape = dt.e.shape
        smooth = CoarseDataTerm(dt, GridTransfer(GridShape(*shape)))
        x0 = np.zeros((2,) + shape)
        xr, ref = fbmg_solve(x0, dt, _config(spec, dt, smooth, True, spec.ref_iters))
        refs.append(ref)
        duals.append(xr)
        xf, tf = fb_solve(x0, dt, _config(spec, dt, smooth, False, spec.max_iter))
        xm, tm = fbmg_solve(x0, dt, _config(spec, dt, smooth, True, spec.max_iter))
        fbs.append(tf)
        mgs.append(tm)
        rec_fb.append(dt.primal_recover(xf))
        rec_mg.append(dt.primal_recover(xm))

    reference = combine_traces(refs)
    vstar = min(reference.records[-1].objective,
                *(t.records[-1].objective for t in fbs + mgs))
    fb = combine_traces(fbs).with_reference(vstar)
    fbmg = combine_traces(mgs).with_reference(vstar)
    squeeze = (lambda a: a[0]) if len(dts) == 1 else np.stack
    result = ExperimentResult(
        spec, vstar, fb, fbmg, reference,
        squeeze(rec_fb), squeeze(rec_mg), observed,
    )
    result.summary = summarise(fb, fbmg)
    result.dual_reference = squeeze(duals)
    if spec.out:
        write_artifacts(result, spec.out)
    return result


def summarise(fb: SolveTrace, fbmg: SolveTrace, thresholds=THRESHOLDS) -> List[dict]:
    rows = []
    for rho in thresholds:
        row = {"rho": rho}
        for name, tr in (("fb", fb), ("fbmg", fbmg)):
            rec = tr.first_reaching(rho)
            row[f"{name}_iter"] = rec.iter if rec else math.nan
            row[f"{name}_icn"] = rec.icn if rec else math.nan
            row[f"{name}_time"] = rec.cputime if rec else math.nan
        rows.append(row)
    return rows


def write_artifacts(result: ExperimentResult, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace_fb.csv", result.fb)
    write_trace_csv(out / "trace_fbmg.csv", result.fbmg)
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(result.summary[0]))
        w.writeheader()
        for row in result.summary:
            w.writerow({k: repr(float(v)) for k, v in row.items()})
    save_image(out / "recon_fb.png", result.recon_fb)
    save_image(out / "recon_fbmg.png", result.recon_fbmg)
    save_image(out / "noisy.png", result.observed)
    log.info("artifacts written to %s", out)
