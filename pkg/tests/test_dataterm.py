import numpy as np
import pytest

from fbmg.dataterm import (
    DataTerm,
    SamplingMasks,
    SingularDataTermError,
    random_line_masks,
    symmetrise_mask,
)
from fbmg.testkit import dense_data_term, dense_matrix_of, dft_matrix, finite_difference_gradient
from fbmg.tv_ops import divergence_adjoint

from conftest import make_mri


def test_denoising_assembly(rng):
    b = rng.random((5, 6))
    dt = DataTerm.denoising(b)
    assert np.array_equal(dt.e, b)
    z = rng.standard_normal((5, 6))
    assert np.array_equal(dt.apply_T(z), z) and np.array_equal(dt.apply_T_inv(z), z)
    assert dt.lipschitz == 8.0
    assert np.array_equal(dt.primal_recover(np.zeros((2, 5, 6))), b)


def test_full_sampling_gives_identity(rng):
    img = rng.random((6, 6))
    masks = np.ones((1, 6, 6), dtype=bool)
    dt = DataTerm.mri(SamplingMasks.measure(img, masks))
    assert np.allclose(dt.fourier_weights, 1.0)
    assert np.allclose(dt.e, img, atol=1e-12)


def test_symmetrise_mask():
    sym = np.ones((4, 5))
    assert np.array_equal(symmetrise_mask(sym), sym)
    d = np.zeros((4, 5))
    d[1, 2] = 1
    out = symmetrise_mask(d)
    assert out[1, 2] == 0.5 and out[3, 3] == 0.5 and out.sum() == 1.0
    c = np.random.default_rng(3).integers(0, 5, (6, 7)).astype(float)
    out = symmetrise_mask(c)
    neg = np.roll(np.flip(out, (0, 1)), 1, (0, 1))
    assert np.array_equal(out, neg)
    with pytest.raises(ValueError):
        symmetrise_mask(-np.ones((2, 2)))


@pytest.mark.parametrize("seed", [0, 1])
def test_T_and_e_match_dense_dft_oracle(seed):
    dt = make_mri((8, 8), 2, 5, seed)
    T, e = dense_data_term(dt)
    assert np.allclose(dense_matrix_of(dt.apply_T, (8, 8)), T, atol=1e-12)
    assert np.allclose(dt.e.ravel(), e, atol=1e-12)
    z = np.random.default_rng(seed).standard_normal(64)
    assert np.allclose(dt.apply_T_inv(z.reshape(8, 8)).ravel(), np.linalg.solve(T, z), atol=1e-10)
    S = dense_matrix_of(dt.apply_T_inv_sqrt, (8, 8))
    assert np.allclose(S @ S @ T, np.eye(64), atol=1e-10)
    assert dt.inv_norm() == pytest.approx(1 / np.linalg.eigvalsh(T).min())


def test_inverse_roundtrip_and_positivity(rng):
    dt = make_mri((10, 12), 3, 6, 4)
    for _ in range(5):
        z = rng.standard_normal((10, 12))
        assert np.allclose(dt.apply_T_inv(dt.apply_T(z)), z, atol=1e-10)
        assert np.vdot(dt.apply_T(z), z) > 0


def test_singular_data_term_reports_frequency():
    masks = np.zeros((1, 4, 4), dtype=bool)
    masks[0, :2] = True
    with pytest.raises(SingularDataTermError) as err:
        DataTerm.mri(SamplingMasks(masks, np.zeros((1, 4, 4))))
    assert tuple(err.value.frequency) == (2, 0)


def test_random_masks_cover_and_are_seeded():
    a, _ = random_line_masks((16, 16), 5, 4, np.random.default_rng(7))
    b, _ = random_line_masks((16, 16), 5, 4, np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert np.all(a.sum(axis=2) % 16 == 0) and np.all(a.sum(axis=(1, 2)) == 4 * 16)
    assert np.all(symmetrise_mask(a.sum(axis=0)) > 0)
    with pytest.raises(SingularDataTermError):
        random_line_masks((16, 16), 1, 2, np.random.default_rng(0), max_retries=3)


def test_masks_roundtrip(tmp_path):
    dt = make_mri((6, 6), 2, 3, 1)
    path = tmp_path / "s.npz"
    dt.samples.save(path)
    back = SamplingMasks.load(path)
    assert np.array_equal(back.masks, dt.samples.masks)
    assert np.array_equal(back.data, dt.samples.data)


def test_lemma_complex_operator_norm(rng):
    # |A y|^2 = <Re(A* A) y, y> for complex A and real y
    for n in (1, 7, 64):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        y = rng.standard_normal(n)
        lhs = np.linalg.norm(A @ y) ** 2
        assert abs(lhs - ((A.conj().T @ A).real @ y) @ y) <= 1e-10 * lhs


@pytest.mark.parametrize("t", [2, 3])
def test_residuals_are_orthogonal(t):
    for seed in range(3):
        dt = make_mri((8, 8), t, 4, seed, noise=0.3)
        W = np.kron(dft_matrix(8), dft_matrix(8))
        total = np.zeros(64)
        for mask, r in zip(dt.samples.masks, dt.residuals()):
            sel = mask.ravel()
            total += (W[sel].conj().T @ r.ravel()[sel]).real
        scale = max(np.abs(dt.samples.data).max(), 1.0)
        assert np.abs(total).max() <= 1e-9 * scale


def test_conjugate_denoising_closed_form(rng):
    b = rng.random((5, 5))
    dt = DataTerm.denoising(b)
    z = rng.standard_normal((5, 5))
    assert dt.phi_conjugate_value(-dt.e) == 0.0
    expected = 0.5 * np.sum(z**2) + np.sum(z * b)
    assert dt.phi_conjugate_value(z, include_constants=True) == pytest.approx(expected, rel=1e-12)


def test_conjugate_mri_dense_stationarity(rng):
    dt = make_mri((6, 6), 3, 3, 2, noise=0.2)
    T, e = dense_data_term(dt)
    W = np.kron(dft_matrix(6), dft_matrix(6))

    def phi(y):
        out = 0.0
        for mask, data in zip(dt.samples.masks, dt.samples.data):
            sel = mask.ravel()
            out += 0.5 * np.linalg.norm(W[sel] @ y - data.ravel()[sel]) ** 2
        return out

    for _ in range(5):
        z = rng.standard_normal(36)
        y = np.linalg.solve(T, z + e)
        direct = z @ y - phi(y)
        got = dt.phi_conjugate_value(z.reshape(6, 6), include_constants=True)
        assert got == pytest.approx(direct, rel=1e-10, abs=1e-10)
        assert phi(y) == pytest.approx(dt.phi_value(y.reshape(6, 6)), rel=1e-12)


@pytest.mark.parametrize("kind", ["denoising", "mri"])
def test_smooth_gradient_finite_differences(kind, rng):
    dt = DataTerm.denoising(rng.random((5, 5))) if kind == "denoising" else make_mri((6, 6), 2, 3, 5)
    shape = (2,) + dt.shape
    for _ in range(20):
        x = rng.standard_normal(shape)
        h = rng.standard_normal(shape)
        fd = (dt.smooth_value(x + 1e-6 * h) - dt.smooth_value(x - 1e-6 * h)) / 2e-6
        an = np.vdot(dt.smooth_gradient(x), h)
        assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))
    x = rng.standard_normal(shape)
    full = finite_difference_gradient(dt.smooth_value, x)
    assert np.allclose(full, dt.smooth_gradient(x), rtol=1e-6, atol=1e-7)


def test_smooth_gradient_vanishes_at_stationarity(rng):
    # choose e in the range of div*, then x with div* x = e is stationary
    x = rng.standard_normal((2, 5, 5))
    dt = DataTerm.denoising(divergence_adjoint(x))
    assert np.abs(dt.smooth_gradient(x)).max() < 1e-13
    assert np.array_equal(DataTerm.denoising(np.ones((3, 3))).smooth_gradient(np.zeros((2, 3, 3))),
                          np.zeros((2, 3, 3)))


def test_primal_recover_affine(rng):
    dt = make_mri((6, 8), 2, 4, 0)
    x1, x2 = rng.standard_normal((2, 2, 6, 8))
    zero = np.zeros_like(x1)
    r = dt.primal_recover
    assert np.allclose(r(x1 + x2) - r(x1) - r(x2) + r(zero), 0, atol=1e-12)


def test_non_finite_input_rejected():
    dt = make_mri((4, 4), 2, 2, 0)
    with pytest.raises(ValueError):
        dt.apply_T_inv(np.full((4, 4), np.nan))
