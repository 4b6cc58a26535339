import numpy as np
import pytest

from fbmg.dataterm import DataTerm, SamplingMasks, random_line_masks


def make_mri(shape, t, lines, seed, noise=0.05):
    """Small random MRI data term over a random image."""
    rng = np.random.default_rng(seed)
    img = rng.random(shape)
    masks, _ = random_line_masks(shape, t, lines, rng)
    n = noise * (rng.standard_normal(masks.shape) + 1j * rng.standard_normal(masks.shape))
    return DataTerm.mri(SamplingMasks.measure(img, masks, n))


def feasible_field(shape, alpha, rng, boundary_fraction=0.5):
    """Random dual field with a share of pixels exactly on the ball boundary."""
    x = rng.standard_normal((2,) + shape)
    nrm = np.hypot(x[0], x[1])
    radius = alpha * rng.uniform(0.0, 0.95, shape)
    on = rng.random(shape) < boundary_fraction
    radius[on] = alpha
    return x / nrm * radius


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cone_generators(n, rng, adversarial=False):
    """Random planar director sets, optionally built from few repeated axes."""
    if n == 0:
        return np.zeros((0, 2))
    if adversarial:
        base = rng.uniform(0, 2 * np.pi, 2)
        pool = np.concatenate([base, base + np.pi, base + np.pi / 2])
        ang = rng.choice(pool, n)
    else:
        ang = rng.uniform(0, 2 * np.pi, n)
    scale = rng.choice([0.3, 1.0, 2.5], n) if adversarial else rng.uniform(0.5, 2.0, n)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1) * scale[:, None]


def descent_instance(seed, m, kind="denoising", shape=(8, 8)):
    """Coarse iterates on a random feasible instance.

    Returns ``(x, dt, transfer, model, zetas, tau_H)`` with ``zetas`` the
    ``m + 1`` coarse iterates starting at the anchor.
    """
    from fbmg.coarse import build_coarse_model, coarse_fb_iterate
    from fbmg.core import GridShape
    from fbmg.transfer import GridTransfer

    rng = np.random.default_rng(seed)
    alpha = rng.uniform(0.1, 1.0)
    dt = DataTerm.denoising(rng.random(shape)) if kind == "denoising" else make_mri(shape, 2, 3, seed)
    x = feasible_field(shape, alpha, rng, boundary_fraction=rng.uniform(0.2, 0.9))
    transfer = GridTransfer(GridShape(*shape))
    model = build_coarse_model(x, dt, transfer, alpha)
    tau_H = rng.uniform(0.1, 0.975) * 2 / model.L_H
    zetas = [model.anchor]
    for _ in range(m):
        zetas.append(coarse_fb_iterate(model, 1, tau_H, zeta0=zetas[-1])[0])
    return x, dt, transfer, model, zetas, tau_H


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in name and (rep.when == "call" or outcome != "passed"):
                num, _, label = name.split("test_criterion_")[1].partition("_")
                lines.append((int(num), label.replace("_", " "), "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, label, verdict in sorted(lines):
            terminalreporter.write_line(f"criterion {num} ({label}): {verdict}")
