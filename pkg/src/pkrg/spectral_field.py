"""Periodic velocity fields stored as Fourier coefficients.

Conventions
-----------
The domain is the torus ``[0, L)^3`` sampled on ``n`` points per axis.  A
lattice wavevector ``k`` (integer components in ``(-n/2, n/2]``) carries the
physical frequency ``xi = k / L``.  The forward transform carries the factor
``1/n^3``::

    c(k) = n^-3 * sum_x u(x) exp(-2 pi i k.x / L)
    u(x) = sum_k c(k) exp(+2 pi i k.x / L)

so that ``||u||_{L^2}^2 = L^3 * sum_k |c(k)|^2`` (Parseval).

Coefficients are stored in full FFT index order with shape ``(3, n, n, n)``.
Internal kernels work on the half spectrum (last axis ``0..n/2``) that the
real FFT produces; :attr:`SpectralField.half` is a view into the full array.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, SymmetryError

HERMITIAN_TOL = 1e-12
DIVERGENCE_TOL = 1e-12
CHECKPOINT_MAGIC = b"PKRG"
CHECKPOINT_VERSION = 1

_WORKERS = 1


def set_workers(count: int) -> None:
    """Cap the number of threads used by every FFT in the package."""
    global _WORKERS
    if int(count) < 1:
        raise DomainError("thread count must be >= 1")
    _WORKERS = int(count)


def get_workers() -> int:
    return _WORKERS


# ---------------------------------------------------------------------------
# raw array transforms (no grid validation; usable on tiny oracle grids)
# ---------------------------------------------------------------------------

def rfft3(samples: np.ndarray) -> np.ndarray:
    """Half-spectrum coefficients of real samples over the last three axes."""
    n3 = np.prod(samples.shape[-3:])
    return sfft.rfftn(samples, axes=(-3, -2, -1), workers=_WORKERS) / n3


def irfft3(half: np.ndarray, n: int) -> np.ndarray:
    """Real samples from half-spectrum coefficients (inverse of :func:`rfft3`)."""
    return sfft.irfftn(half, s=(n, n, n), axes=(-3, -2, -1), workers=_WORKERS) * n**3


def negated_index(n: int) -> np.ndarray:
    """Index map ``i -> (-i) mod n`` used to look up ``c(-k)``."""
    return (-np.arange(n)) % n


def hermitian_complete(half: np.ndarray) -> np.ndarray:
    """Rebuild the full spectrum from a half spectrum using ``c(-k) = conj c(k)``."""
    n = half.shape[-3]
    full = np.empty(half.shape[:-1] + (n,), dtype=np.complex128)
    full[..., : n // 2 + 1] = half
    neg = negated_index(n)
    # columns m = n/2+1 .. n-1 mirror columns n-m = n/2-1 .. 1
    tail = half[..., n // 2 - 1 : 0 : -1]
    tail = np.take(np.take(tail, neg, axis=-3), neg, axis=-2)
    full[..., n // 2 + 1 :] = np.conj(tail)
    return full


def mirror(coeffs: np.ndarray) -> np.ndarray:
    """Return ``c(-k)`` for a full spectrum over the last three axes."""
    n = coeffs.shape[-1]
    neg = negated_index(n)
    out = np.take(coeffs, neg, axis=-3)
    out = np.take(out, neg, axis=-2)
    return np.take(out, neg, axis=-1)


def hermitian_defect(coeffs: np.ndarray) -> float:
    """Relative size of ``c(k) - conj c(-k)`` over the full spectrum."""
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs - np.conj(mirror(coeffs))))) / scale


def zero_nyquist(coeffs: np.ndarray, half: bool = False) -> np.ndarray:
    """Zero every coefficient with a component equal to ``n/2`` (in place)."""
    n = coeffs.shape[-3]
    coeffs[..., n // 2, :, :] = 0
    coeffs[..., :, n // 2, :] = 0
    if half:
        coeffs[..., :, :, -1] = 0
    else:
        coeffs[..., :, :, n // 2] = 0
    return coeffs


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _lattice(n: int, period: float):
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = n // 2  # components live in (-n/2, n/2]
    kh = k[: n // 2 + 1].copy()
    kh[-1] = n // 2
    kx, ky, kz = k[:, None, None], k[None, :, None], k[None, None, :]
    ksq_full = kx**2 + ky**2 + kz**2
    ksq_half = kx**2 + ky**2 + kh[None, None, :] ** 2
    xi_full = np.sqrt(ksq_full) / period
    xi_half = np.sqrt(ksq_half) / period
    for arr in (k, kh, ksq_full, ksq_half, xi_full, xi_half):
        arr.setflags(write=False)
    return k, kh, ksq_full, ksq_half, xi_full, xi_half


@dataclass(frozen=True)
class FrequencyGrid:
    """Lattice of ``n^3`` wavevectors on the torus of side ``period``."""

    n: int
    period: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise DomainError(f"n_per_axis must be an even integer >= 16, got {self.n}")
        if not self.period > 0:
            raise DomainError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "period", float(self.period))

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def half_shape(self):
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def volume(self) -> float:
        return self.period**3

    @property
    def cell_volume(self) -> float:
        return (self.period / self.n) ** 3

    @property
    def spacing(self) -> float:
        return self.period / self.n

    def k1d(self, half: bool = False) -> np.ndarray:
        """Integer wavenumbers along one axis (last axis if ``half``)."""
        k, kh, *_ = _lattice(self.n, self.period)
        return kh if half else k

    def k_components(self, half: bool = True, derivative: bool = False):
        """Broadcastable integer wavevector components ``(kx, ky, kz)``.

        With ``derivative`` the Nyquist component is replaced by 0, the usual
        convention for odd derivatives: ``+n/2`` and ``-n/2`` share one index,
        so only an even symbol is conjugate-consistent there.
        """
        k = self.k1d()
        kz = self.k1d(half=half)
        if derivative:
            k = k.copy()
            kz = kz.copy()
            k[self.n // 2] = 0
            kz[self.n // 2] = 0
        return k[:, None, None], k[None, :, None], kz[None, None, :]

    def ksq(self, half: bool = True) -> np.ndarray:
        _, _, full, hf, _, _ = _lattice(self.n, self.period)
        return hf if half else full

    def xi(self, half: bool = True) -> np.ndarray:
        """Frequency magnitude ``|k| / period`` on the lattice."""
        *_, full, hf = _lattice(self.n, self.period)
        return hf if half else full

    def axis_points(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @property
    def xi_max_axis(self) -> float:
        """Largest frequency along a coordinate axis, ``n / (2 L)``."""
        return self.n / (2.0 * self.period)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real 3-vector field on the torus held as Fourier coefficients.

    Parameters
    ----------
    grid : FrequencyGrid
    coeffs : ndarray, shape (3, n, n, n), complex
        Coefficients in FFT index order.
    divergence_free : bool
        When set, ``|khat . c(k)| <= 1e-12 |c(k)|`` is verified on construction.
    """

    grid: FrequencyGrid
    coeffs: np.ndarray
    divergence_free: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (3,) + self.grid.shape:
            raise DomainError(f"coeffs must have shape {(3,) + self.grid.shape}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.divergence_free:
            defect = divergence_defect(self)
            if defect > DIVERGENCE_TOL:
                raise DomainError(f"field flagged divergence-free has relative divergence {defect:.2e}")

    @classmethod
    def zeros(cls, grid: FrequencyGrid) -> "SpectralField":
        return cls(grid, np.zeros((3,) + grid.shape, complex), divergence_free=True)

    @classmethod
    def from_half(cls, grid: FrequencyGrid, half: np.ndarray, divergence_free: bool = False):
        return cls(grid, hermitian_complete(half), divergence_free=divergence_free)

    @property
    def half(self) -> np.ndarray:
        return self.coeffs[..., : self.grid.n // 2 + 1]

    def norm(self) -> float:
        """L2 norm over the torus."""
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))

    def inner(self, other: "SpectralField") -> float:
        """Real L2 inner product over the torus."""
        return float(self.grid.volume * np.real(np.vdot(other.coeffs, self.coeffs)))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def scaled(self, factor: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * factor, self.divergence_free)


@dataclass(frozen=True, eq=False)
class PhysicalField:
    """Real 3-vector samples on the uniform grid, shape ``(3, n, n, n)``."""

    grid: FrequencyGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.shape != (3,) + self.grid.shape:
            raise DomainError(f"samples must have shape {(3,) + self.grid.shape}, got {s.shape}")
        object.__setattr__(self, "samples", s)

    def norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.samples**2)))

    def sup_norm(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.samples**2, axis=0))))


def check_hermitian(f: SpectralField, tol: float = HERMITIAN_TOL) -> None:
    defect = hermitian_defect(f.coeffs)
    if defect > tol:
        raise SymmetryError(f"coefficients violate c(-k) = conj c(k): relative defect {defect:.2e}")


def transform_to_physical(f: SpectralField) -> PhysicalField:
    """Samples of ``f`` on the grid; rejects non-Hermitian coefficients."""
    check_hermitian(f)
    return PhysicalField(f.grid, irfft3(f.half, f.grid.n))


def transform_to_spectral(p: PhysicalField, divergence_free: bool = False) -> SpectralField:
    return SpectralField.from_half(p.grid, rfft3(p.samples), divergence_free=divergence_free)


def fractional_symbol(grid: FrequencyGrid, alpha: float, half: bool = True) -> np.ndarray:
    """Multiplier ``(2 pi |k| / L)^(2 alpha)``; zero at ``k = 0`` for ``alpha > 0``."""
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return np.ones(grid.half_shape if half else grid.shape)
    return (2.0 * np.pi * grid.xi(half)) ** (2.0 * alpha)


def fractional_laplacian(f: SpectralField, alpha: float) -> SpectralField:
    """Apply ``(-Delta)^alpha`` as a Fourier multiplier."""
    sym = fractional_symbol(f.grid, alpha, half=False)
    return SpectralField(f.grid, f.coeffs * sym, f.divergence_free)


def leray_coeffs(coeffs: np.ndarray, grid: FrequencyGrid, half: bool = True) -> np.ndarray:
    """``c - k (k . c) / |k|^2`` per mode, zero mode left unchanged.

    Uses derivative wavenumbers, so the projector commutes with the
    ``c(-k) = conj c(k)`` symmetry on Nyquist planes as well.
    """
    kx, ky, kz = grid.k_components(half=half, derivative=True)
    ksq = kx**2 + ky**2 + kz**2
    inv = np.zeros_like(ksq)
    np.divide(1.0, ksq, out=inv, where=ksq > 0)
    kdotc = (kx * coeffs[0] + ky * coeffs[1] + kz * coeffs[2]) * inv
    return np.stack([coeffs[0] - kx * kdotc, coeffs[1] - ky * kdotc, coeffs[2] - kz * kdotc])


def leray_project(f: SpectralField) -> SpectralField:
    """Orthogonal projection onto divergence-free fields."""
    check_hermitian(f)
    return SpectralField(f.grid, leray_coeffs(f.coeffs, f.grid, half=False), divergence_free=True)


def divergence_defect(f: SpectralField) -> float:
    """Largest ``|khat . c(k)| / |c(k)|`` over nonzero modes with nonzero coefficient."""
    kx, ky, kz = f.grid.k_components(half=False, derivative=True)
    c = f.coeffs
    kdotc = np.abs(kx * c[0] + ky * c[1] + kz * c[2])
    knorm = np.sqrt(kx**2 + ky**2 + kz**2)
    cnorm = np.sqrt(np.sum(np.abs(c) ** 2, axis=0))
    mask = (knorm > 0) & (cnorm > 0)
    if not np.any(mask):
        return 0.0
    return float(np.max(kdotc[mask] / (knorm[mask] * cnorm[mask])))


def random_field(grid: FrequencyGrid, rng: np.random.Generator, divergence_free: bool = False,
                 xi_window=None) -> SpectralField:
    """Real white-noise field, mean-free, Nyquist planes removed.

    Parameters
    ----------
    xi_window : (lo, hi), optional
        Keep only modes with ``lo <= |xi| < hi``.
    """
    half = rfft3(rng.standard_normal((3,) + grid.shape))
    half[:, 0, 0, 0] = 0
    zero_nyquist(half, half=True)
    if xi_window is not None:
        lo, hi = xi_window
        xi = grid.xi(half=True)
        half *= (xi >= lo) & (xi < hi)
    if divergence_free:
        half = leray_coeffs(half, grid)
    return SpectralField.from_half(grid, half, divergence_free=divergence_free)


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIddd")


def save_checkpoint(path, f: SpectralField, time: float, alpha: float) -> None:
    """Write the binary checkpoint: header then complex64 coefficients.

    Coefficients follow FFT index order (row-major over ``(kx, ky, kz)``),
    the three components concatenated.
    """
    header = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, f.grid.n,
                          f.grid.period, float(time), float(alpha))
    body = np.ascontiguousarray(f.coeffs, dtype="<c8").tobytes()
    Path(path).write_bytes(header + body)


def load_checkpoint(path):
    """Read a checkpoint; returns ``(field, time, alpha)``.

    The stored precision is single; the loaded field is re-symmetrised so that
    it passes the Hermitian check exactly.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path}: truncated checkpoint header")
    magic, version, n, period, time, alpha = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise DomainError(f"{path}: unsupported checkpoint version {version}")
    grid = FrequencyGrid(n, period)
    expected = 3 * n**3 * 8
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise DomainError(f"{path}: expected {expected} coefficient bytes, found {len(body)}")
    coeffs = np.frombuffer(body, dtype="<c8").astype(np.complex128).reshape((3,) + grid.shape)
    coeffs = 0.5 * (coeffs + np.conj(mirror(coeffs)))
    return SpectralField(grid, coeffs), time, alpha
