"""Dyadic frequency projections, the paraproduct split and Bernstein ratios.

The smooth step ``h`` equals 1 on ``(-inf, 1]`` and 0 on ``[2, inf)``; it is
glued from ``f(t) = exp(-1/t)``::

    h(x) = f(2 - x) / (f(2 - x) + f(x - 1))

The annular symbol is ``p(xi) = h(|xi|) - h(2|xi|)`` and ``p_j(xi) = p(xi / 2^j)``
is supported in ``2^(j-1) < |xi| < 2^(j+1)``.  Sums of consecutive symbols
telescope, so every band selector has a closed form in ``h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import BandRangeError, DomainError, PreconditionError
from .spectral_field import (FrequencyGrid, SpectralField, get_workers, irfft3,
                             rfft3, zero_nyquist)


# ---------------------------------------------------------------------------
# smooth step and dyadic symbols
# ---------------------------------------------------------------------------

def glue(t):
    """``exp(-1/t)`` for ``t > 0`` and 0 otherwise (vectorised)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(x):
    """The C-infinity step ``h``: 1 for ``x <= 1``, 0 for ``x >= 2``, decreasing between."""
    x = np.asarray(x, dtype=float)
    a = glue(2.0 - x)
    b = glue(x - 1.0)
    return a / (a + b)


def build_bump(x):
    """Radial annulus profile ``p(x) = h(|x|) - h(2|x|)``."""
    r = np.abs(np.asarray(x, dtype=float))
    return smooth_step(r) - smooth_step(2.0 * r)


def window_symbol(xi, lo=None, hi=None):
    """``sum_{lo <= i <= hi} p_i(xi)``; ``None`` bounds mean unbounded.

    The sum telescopes to ``h(xi/2^hi) - h(2 xi/2^lo)``.  Every window is zero
    at ``xi = 0``: the mean belongs to no dyadic band.
    """
    xi = np.asarray(xi, dtype=float)
    if lo is not None and hi is not None and lo > hi:
        return np.zeros_like(xi)
    upper = smooth_step(xi * 2.0**-hi) if hi is not None else np.ones_like(xi)
    lower = smooth_step(xi * 2.0 ** (1 - lo)) if lo is not None else np.zeros_like(xi)
    return np.where(xi == 0, 0.0, upper - lower)


def p_j(xi, j: int):
    """Single dyadic symbol ``p_j``."""
    return window_symbol(xi, j, j)


@dataclass(frozen=True)
class BandSelector:
    """A set of consecutive dyadic bands anchored at ``j``.

    ``lo``/``hi`` are the inclusive band limits; ``None`` means unbounded.
    """

    kind: str
    j: int
    lo: int | None
    hi: int | None

    def bands(self, bottom: int, top: int) -> range:
        """Bands of the window that lie in ``[bottom, top]``."""
        lo = bottom if self.lo is None else max(self.lo, bottom)
        hi = top if self.hi is None else min(self.hi, top)
        return range(lo, hi + 1)


def single(j: int) -> BandSelector:
    return BandSelector("single", j, j, j)


def tilde(j: int) -> BandSelector:
    """``P_{j +- 2}``, the five bands around ``j``."""
    return BandSelector("tilde", j, j - 2, j + 2)


def local_range(j: int) -> BandSelector:
    """``P_{j-4, j+2}``."""
    return BandSelector("range", j, j - 4, j + 2)


def leq(j: int) -> BandSelector:
    return BandSelector("leq", j, None, j)


def geq(j: int) -> BandSelector:
    return BandSelector("geq", j, j, None)


def band_window(lo: int, hi: int) -> BandSelector:
    return BandSelector("window", lo, lo, hi)


# ---------------------------------------------------------------------------
# band ranges on a lattice
# ---------------------------------------------------------------------------

def lattice_band_range(grid: FrequencyGrid):
    """Bands whose support meets a nonzero lattice frequency: ``(bottom, top)``."""
    xi_min = 1.0 / grid.period
    xi_max = math.sqrt(3.0) * grid.n / (2.0 * grid.period)
    bottom = math.floor(math.log2(xi_min))
    top = math.ceil(math.log2(xi_max))
    return bottom, top


def resolved_band_range(grid: FrequencyGrid):
    """Bands whose whole annulus fits inside the axis Nyquist frequency.

    ``j_min = 1`` and ``j_max = floor(log2(n / (2 L))) - 1``.
    """
    j_max = math.floor(math.log2(grid.xi_max_axis) + 1e-12) - 1
    return 1, j_max


def check_band(grid: FrequencyGrid, j: int) -> None:
    bottom, top = lattice_band_range(grid)
    if not bottom <= j <= top:
        raise BandRangeError(f"band {j} outside lattice range [{bottom}, {top}] for n={grid.n}, L={grid.period}")


def check_resolved(grid: FrequencyGrid, j: int) -> None:
    lo, hi = resolved_band_range(grid)
    if not lo <= j <= hi:
        raise BandRangeError(f"band {j} outside resolved range [{lo}, {hi}] for n={grid.n}, L={grid.period}")


@lru_cache(maxsize=256)
def _symbol_cached(n: int, period: float, lo, hi, half: bool):
    grid = FrequencyGrid(n, period)
    out = window_symbol(grid.xi(half), lo, hi)
    out.setflags(write=False)
    return out


def band_symbol(grid: FrequencyGrid, band: BandSelector, half: bool = True) -> np.ndarray:
    """Symbol values of ``band`` on the lattice (cached, read-only)."""
    return _symbol_cached(grid.n, grid.period, band.lo, band.hi, half)


def project(f: SpectralField, band: BandSelector) -> SpectralField:
    """Apply the Fourier multiplier of ``band`` to every component of ``f``.

    Raises
    ------
    BandRangeError
        If the anchor band has no support on the lattice.
    """
    check_band(f.grid, band.j)
    sym = band_symbol(f.grid, band, half=False)
    return SpectralField(f.grid, f.coeffs * sym, f.divergence_free)


def project_half(half: np.ndarray, grid: FrequencyGrid, band: BandSelector) -> np.ndarray:
    """Multiplier on half-spectrum arrays (no range check; internal kernels)."""
    return half * band_symbol(grid, band, half=True)


def band_physical(f: SpectralField, j: int) -> np.ndarray:
    """Samples of ``P_j f`` on the grid, shape ``(3, n, n, n)``."""
    check_band(f.grid, j)
    return irfft3(project_half(f.half, f.grid, single(j)), f.grid.n)


# ---------------------------------------------------------------------------
# padded products
# ---------------------------------------------------------------------------

def padded_size(n: int, pad: float) -> int:
    m = int(math.ceil(pad * n))
    return m + (m % 2)


def _axis_maps(n: int, m: int):
    h = n // 2
    src = np.r_[0:h, h + 1:n]          # k = 0..h-1, -h+1..-1 (Nyquist dropped)
    dst = np.r_[0:h, m - h + 1:m]
    return src, dst


def pad_half(half: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad a half spectrum from ``n`` to ``m`` points per axis (Nyquist dropped)."""
    n = half.shape[-3]
    src, dst = _axis_maps(n, m)
    out = np.zeros(half.shape[:-3] + (m, m, m // 2 + 1), dtype=np.complex128)
    h = n // 2
    out[..., dst[:, None], dst[None, :], :h] = half[..., src[:, None], src[None, :], :h]
    return out


def truncate_half(half_m: np.ndarray, n: int) -> np.ndarray:
    """Restrict a padded half spectrum back to the ``n`` lattice, Nyquist zeroed."""
    m = half_m.shape[-3]
    src, dst = _axis_maps(n, m)
    out = np.zeros(half_m.shape[:-3] + (n, n, n // 2 + 1), dtype=np.complex128)
    h = n // 2
    out[..., src[:, None], src[None, :], :h] = half_m[..., dst[:, None], dst[None, :], :h]
    return zero_nyquist(out, half=True)


def padded_band_samples(half: np.ndarray, grid: FrequencyGrid, j: int, m: int) -> np.ndarray:
    """Samples of ``P_j`` of a half spectrum on the padded ``m`` grid.

    Low bands occupy a small corner of the lattice, so the inverse transform
    is done axis by axis on the nonzero rows only.
    """
    n = grid.n
    kc = int(math.ceil(2.0 ** (j + 1) * grid.period))
    band = project_half(half, grid, single(j))
    if 2 * kc + 1 >= n - 1:
        return irfft3(pad_half(band, m), m)
    rows = np.r_[0:kc + 1, n - kc:n]
    dst = np.r_[0:kc + 1, m - kc:m]
    sub = band[..., rows[:, None], rows[None, :], :kc + 1]
    a = np.zeros(sub.shape[:-3] + (m, sub.shape[-2], kc + 1), dtype=np.complex128)
    a[..., dst, :, :] = sub
    a = sfft.ifft(a, axis=-3, workers=get_workers())
    b = np.zeros(a.shape[:-2] + (m, kc + 1), dtype=np.complex128)
    b[..., dst, :] = a
    b = sfft.ifft(b, axis=-2, workers=get_workers())
    c = np.zeros(b.shape[:-1] + (m // 2 + 1,), dtype=np.complex128)
    c[..., :kc + 1] = b
    return sfft.irfft(c, n=m, axis=-1, workers=get_workers()) * m**3


class PaddedBands:
    """Physical samples of every lattice band of a field on a padded grid.

    Parameters
    ----------
    f : SpectralField
        Must have zero mean; its Nyquist planes are ignored.
    pad : float
        Padding factor; 3/2 already keeps quadratic products alias-free on the
        original lattice.
    """

    def __init__(self, f: SpectralField, pad: float = 2.0):
        if pad < 1.5:
            raise DomainError(f"padding factor must be >= 3/2 for alias-free products, got {pad}")
        if np.max(np.abs(f.coeffs[:, 0, 0, 0])) > 1e-14 * max(1.0, np.max(np.abs(f.coeffs))):
            raise PreconditionError("paraproduct inputs must be mean-free")
        self.grid = f.grid
        self.m = padded_size(f.grid.n, pad)
        self.bottom, self.top = lattice_band_range(f.grid)
        self.bands = {}
        self._prefix = {}
        running = np.zeros((3, self.m, self.m, self.m))
        for i in range(self.bottom, self.top + 1):
            self.bands[i] = padded_band_samples(f.half, f.grid, i, self.m)
            running = running + self.bands[i]
            self._prefix[i] = running
        # the bands sum to f exactly on a mean-free lattice field
        self.full = running
        self._zero = np.zeros_like(running)

    def window(self, lo, hi) -> np.ndarray:
        """Sum of band samples over ``[lo, hi]`` clipped to the lattice range."""
        lo = self.bottom if lo is None else max(lo, self.bottom)
        hi = self.top if hi is None else min(hi, self.top)
        if lo > hi:
            return self._zero
        if lo == self.bottom:
            return self._prefix[hi]
        return self._prefix[hi] - self._prefix[lo - 1]


@dataclass(frozen=True, eq=False)
class ParaproductTerms:
    """The four interaction terms whose ``P_j`` reproduces ``P_j(f g)``."""

    j: int
    loc_low: SpectralField
    low_loc: SpectralField
    loc: SpectralField
    hh: SpectralField

    def total(self) -> SpectralField:
        return self.loc_low + self.low_loc + self.loc + self.hh


def _terms_physical(fb: PaddedBands, gb: PaddedBands, j: int):
    loc_low = fb.window(j - 2, j + 2) * gb.window(None, j - 5)
    low_loc = fb.window(None, j - 5) * gb.window(j - 2, j + 2)
    loc = fb.window(j - 4, j + 2) * gb.window(j - 4, j + 4)
    hh = np.zeros_like(loc)
    for k in range(max(j + 3, fb.bottom), fb.top + 1):
        hh += fb.bands[k] * gb.window(k - 2, k + 2)
    return loc_low, low_loc, loc, hh


def _to_lattice(samples_m: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    return truncate_half(rfft3(samples_m), grid.n)


def paraproduct_split(f: SpectralField, g: SpectralField, j: int, pad: float = 2.0,
                      bands=None) -> ParaproductTerms:
    """Split the componentwise product ``f_i g_i`` into the four paraproduct terms.

    Each term is formed in physical space on a zero-padded grid and then
    restricted to the original lattice, so ``P_j`` of the sum equals ``P_j(f g)``
    up to rounding.  ``bands`` may carry precomputed ``(PaddedBands, PaddedBands)``.
    """
    check_resolved(f.grid, j)
    fb, gb = bands if bands is not None else (PaddedBands(f, pad), PaddedBands(g, pad))
    terms = [SpectralField.from_half(f.grid, _to_lattice(t, f.grid)) for t in _terms_physical(fb, gb, j)]
    return ParaproductTerms(j, *terms)


def product(f: SpectralField, g: SpectralField, pad: float = 2.0, bands=None) -> SpectralField:
    """Componentwise product ``f_i g_i`` restricted to the lattice (alias-free)."""
    fb, gb = bands if bands is not None else (PaddedBands(f, pad), PaddedBands(g, pad))
    return SpectralField.from_half(f.grid, _to_lattice(fb.full * gb.full, f.grid))


def paraproduct_residuals(f: SpectralField, g: SpectralField, js=None, pad: float = 2.0):
    """``||P_j(f g) - P_j(sum of terms)||`` for each band in ``js``.

    The four terms are summed in physical space before a single transform per
    band; this is the same band bookkeeping as :func:`paraproduct_split`.

    Returns
    -------
    dict
        ``j -> (residual norm, ||P_j(f g)||)``.
    """
    grid = f.grid
    if js is None:
        lo, hi = resolved_band_range(grid)
        js = range(lo, hi + 1)
    fb, gb = PaddedBands(f, pad), PaddedBands(g, pad)
    fg = fb.full * gb.full
    fg_half = _to_lattice(fg, grid)
    out = {}
    for j in js:
        check_resolved(grid, j)
        defect = fg.copy()
        for t in _terms_physical(fb, gb, j):
            defect -= t
        sym = band_symbol(grid, single(j))
        res = SpectralField.from_half(grid, _to_lattice(defect, grid) * sym).norm()
        ref = SpectralField.from_half(grid, fg_half * sym).norm()
        out[j] = (res, ref)
    return out


# ---------------------------------------------------------------------------
# Bernstein and Young constants
# ---------------------------------------------------------------------------

def lp_norm(samples: np.ndarray, p: float, cell_volume: float) -> float:
    """L^p norm of a vector field sampled on a grid (pointwise Euclidean magnitude)."""
    mag = np.sqrt(np.sum(samples**2, axis=0)) if samples.ndim == 4 else np.abs(samples)
    if math.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag**p) * cell_volume) ** (1.0 / p))


def bernstein_ratio(f: SpectralField, j: int, p: float, q: float, oversample: int = 1) -> float:
    """``||P_j f||_q / (2^{3j(1/p - 1/q)} ||P_j f||_p)``.

    Norms use the physical grid; ``oversample > 1`` evaluates them on a
    zero-padded grid, which tightens the sup norm.  A vanishing ``P_j f``
    returns 0.
    """
    if not (1 <= p <= q):
        raise DomainError(f"need 1 <= p <= q, got p={p}, q={q}")
    check_band(f.grid, j)
    half = project_half(f.half, f.grid, single(j))
    m = f.grid.n * int(oversample)
    samples = irfft3(pad_half(half, m) if m != f.grid.n else half, m)
    cell = (f.grid.period / m) ** 3
    nq = lp_norm(samples, q, cell)
    np_ = lp_norm(samples, p, cell)
    if np_ == 0.0:
        return 0.0
    inv = (1.0 / p) - (0.0 if math.isinf(q) else 1.0 / q)
    return nq / (2.0 ** (3 * j * inv) * np_)


def young_constant(grid: FrequencyGrid, j: int) -> float:
    """l^1 norm of the discrete convolution kernel of ``P_j``.

    This is the exact operator norm of ``P_j`` on sup-norm grid functions and
    bounds its norm on every discrete L^q.
    """
    check_band(grid, j)
    kernel = irfft3(band_symbol(grid, single(j)), grid.n) / grid.n**3
    return float(np.sum(np.abs(kernel)))


def symbol_table(js, xi_max: float, bins: int = 256):
    """Rows ``(j, |xi| bin centre, p_j)`` for plotting the dyadic partition."""
    edges = np.linspace(0.0, xi_max, bins + 1)
    centres = 0.5 * (edges[1:] + edges[:-1])
    rows = []
    for j in js:
        vals = p_j(centres, j)
        rows.extend((int(j), float(c), float(v)) for c, v in zip(centres, vals))
    return rows
