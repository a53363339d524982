import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pkrg.errors import DomainError, SymmetryError
from pkrg.spectral_field import (FrequencyGrid, PhysicalField, SpectralField, divergence_defect,
                                 fractional_laplacian, fractional_symbol, hermitian_complete,
                                 hermitian_defect, irfft3, leray_coeffs, leray_project,
                                 load_checkpoint, random_field, rfft3, save_checkpoint,
                                 transform_to_physical, transform_to_spectral)


def dft_oracle(samples):
    """Direct O(N^6) forward sum with the 1/N^3 normalisation."""
    n = samples.shape[-1]
    idx = np.arange(n)
    e = np.exp(-2j * np.pi * np.outer(idx, idx) / n)
    out = np.zeros(samples.shape, complex)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                w = e[a][:, None, None] * e[b][None, :, None] * e[c][None, None, :]
                out[..., a, b, c] = np.sum(samples * w, axis=(-3, -2, -1))
    return out / n**3


def test_rfft3_matches_direct_sum_at_n8(rng):
    x = rng.standard_normal((8, 8, 8))
    ref = dft_oracle(x)
    assert np.max(np.abs(rfft3(x) - ref[..., :5])) <= 1e-13
    assert np.max(np.abs(irfft3(rfft3(x), 8) - x)) <= 1e-13


def test_zero_field_gives_zero_samples(grid16):
    s = transform_to_physical(SpectralField.zeros(grid16)).samples
    assert s.shape == (3, 16, 16, 16) and not np.any(s)


def test_single_mode_is_cosine(grid16):
    c = np.zeros((3,) + grid16.shape, complex)
    c[0, 1, 0, 0] = 0.5
    c[0, -1, 0, 0] = 0.5
    s = transform_to_physical(SpectralField(grid16, c)).samples
    x = grid16.axis_points()
    assert np.allclose(s[0], np.cos(2 * np.pi * x)[:, None, None], atol=1e-14)
    assert not np.any(s[1:])


def test_round_trip_n32(grid32, rng):
    f = random_field(grid32, rng)
    back = transform_to_spectral(transform_to_physical(f))
    assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-12 * np.max(np.abs(f.coeffs))


def test_parseval(grid32, rng):
    f = random_field(grid32, rng)
    p = transform_to_physical(f)
    lhs = grid32.cell_volume * np.sum(p.samples**2)
    assert abs(lhs - f.norm() ** 2) <= 1e-12 * lhs
    assert abs(p.norm() - f.norm()) <= 1e-12 * f.norm()


def test_hermitian_violation_rejected(grid16):
    c = np.zeros((3,) + grid16.shape, complex)
    c[0, 1, 0, 0] = 1.0
    with pytest.raises(SymmetryError):
        leray_project(SpectralField(grid16, c))
    assert hermitian_defect(hermitian_complete(rfft3(np.ones((3, 16, 16, 16))))) == 0.0


@pytest.mark.parametrize("n", [8, 15, 17])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(DomainError):
        FrequencyGrid(n)


@pytest.mark.parametrize("alpha,k,expected", [
    (1.0, (1, 0, 0), 4 * math.pi**2),
    (1.25, (2, 0, 0), (4 * math.pi) ** 2.5),
    (1.25, (0, 2, 0), (4 * math.pi) ** 2.5),
])
def test_fractional_symbol_values(grid16, alpha, k, expected):
    sym = fractional_symbol(grid16, alpha, half=False)
    assert abs(sym[k] - expected) <= 1e-12 * expected


def test_alpha_zero_is_identity(grid16, rng):
    f = random_field(grid16, rng)
    g = fractional_laplacian(f, 0.0)
    assert np.array_equal(g.coeffs, f.coeffs)


@settings(max_examples=15, deadline=None)
@given(a1=st.floats(0.0, 1.5), a2=st.floats(0.0, 1.5), seed=st.integers(0, 2**16))
def test_fractional_semigroup(a1, a2, seed):
    grid = FrequencyGrid(16)
    f = random_field(grid, np.random.default_rng(seed))
    lhs = fractional_laplacian(f, a1 + a2).coeffs
    rhs = fractional_laplacian(fractional_laplacian(f, a1), a2).coeffs
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(np.max(np.abs(lhs)), 1e-300)


def test_negative_alpha_rejected(grid16):
    with pytest.raises(DomainError):
        fractional_symbol(grid16, -0.5)


def leray_oracle(coeffs, grid):
    """Per-mode matrix ``I - k k^T / |k|^2`` applied explicitly."""
    kx, ky, kz = grid.k_components(half=False, derivative=True)
    out = np.array(coeffs, complex)
    n = grid.n
    for a in range(n):
        for b in range(n):
            for c in range(n):
                k = np.array([kx[a, 0, 0], ky[0, b, 0], kz[0, 0, c]], float)
                kk = k @ k
                if kk == 0:
                    continue
                m = np.eye(3) - np.outer(k, k) / kk
                out[:, a, b, c] = m @ coeffs[:, a, b, c]
    return out


def test_leray_matches_matrix_oracle_n16(grid16, rng):
    f = random_field(grid16, rng)
    ref = leray_oracle(f.coeffs, grid16)
    out = leray_project(f)
    assert np.max(np.abs(out.coeffs - ref)) <= 1e-14
    kx, ky, kz = grid16.k_components(half=False, derivative=True)
    div = kx * out.coeffs[0] + ky * out.coeffs[1] + kz * out.coeffs[2]
    assert np.max(np.abs(div)) <= 1e-13
    assert divergence_defect(out) <= 1e-12


def test_leray_annihilates_gradient(grid32, rng):
    g = random_field(grid32, rng).coeffs[0]
    kx, ky, kz = grid32.k_components(half=False, derivative=True)
    grad = np.stack([1j * kx * g, 1j * ky * g, 1j * kz * g])
    out = leray_coeffs(grad, grid32, half=False)
    assert np.sqrt(np.sum(np.abs(out) ** 2)) <= 1e-12 * np.sqrt(np.sum(np.abs(grad) ** 2))


def test_leray_fixes_divergence_free(grid32, rng):
    f = random_field(grid32, rng, divergence_free=True)
    assert (leray_project(f) - f).norm() <= 1e-12 * f.norm()


def test_leray_self_adjoint(grid32, rng):
    f, g = random_field(grid32, rng), random_field(grid32, rng)
    a = leray_project(f).inner(g)
    b = f.inner(leray_project(g))
    assert abs(a - b) <= 1e-12 * f.norm() * g.norm()


def test_divergence_flag_is_checked(grid16, rng):
    f = random_field(grid16, rng)
    with pytest.raises(DomainError):
        SpectralField(grid16, f.coeffs, divergence_free=True)


def test_physical_field_shape_check(grid16):
    with pytest.raises(DomainError):
        PhysicalField(grid16, np.zeros((3, 8, 8, 8)))


def test_checkpoint_round_trip(tmp_path, grid16, rng):
    f = random_field(grid16, rng, divergence_free=True)
    p = tmp_path / "c.pkrg"
    save_checkpoint(p, f, 0.25, 1.1)
    raw = p.read_bytes()
    assert raw[:4] == b"PKRG"
    assert len(raw) == 4 + 4 + 4 + 3 * 8 + 3 * 16**3 * 8
    g, t, a = load_checkpoint(p)
    assert (t, a) == (0.25, 1.1)
    assert g.grid == grid16
    assert (g - f).norm() <= 1e-6 * f.norm()


def test_checkpoint_bad_magic(tmp_path):
    p = tmp_path / "bad.pkrg"
    p.write_bytes(b"XXXX" + bytes(64))
    with pytest.raises(DomainError):
        load_checkpoint(p)
