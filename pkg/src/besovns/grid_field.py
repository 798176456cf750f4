"""
Fields on the periodic unit torus and their spectral representation.

Fourier modes are e^{2 pi i k.x} for integer k; a frequency variable xi of
the continuous theory is identified with 2 pi k.  The transform is normalized
so that sum |u_hat|^2 equals the mean of |u|^2 over the lattice.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridField",
    "SpectralField",
    "wavenumbers",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "riesz_transform",
    "leray_project",
    "divergence",
    "dealiased_product",
    "spectral_product",
    "pad_spectrum",
    "truncate",
    "spectral_extent",
    "l2_norm",
    "default_kmax",
]

HERMITIAN_TOL = 1e-9


def _workers() -> int:
    value = os.environ.get("BESOVNS_THREADS")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _check_grid(n: int, N: int) -> None:
    if n not in (1, 2, 3):
        raise ValueError(f"spatial dimension must be 1, 2 or 3, got {n}")
    if N < 16 or N & (N - 1):
        raise ValueError(f"samples per axis must be a power of two >= 16, got {N}")


def default_kmax(N: int) -> int:
    """Dealias bound floor(N/3)."""
    return N // 3


@dataclass(frozen=True, eq=False)
class GridField:
    """
    Real samples of a scalar or vector field on the lattice (i_1..i_n)/N.

    Parameters
    ----------
    n : int
        Spatial dimension.
    N : int
        Samples per axis, a power of two.
    data : ndarray
        Array of shape ``(c,) + (N,) * n``.
    """

    n: int
    N: int
    data: np.ndarray

    def __post_init__(self) -> None:
        _check_grid(self.n, self.N)
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == self.n:
            data = data[None]
        if data.shape[1:] != (self.N,) * self.n:
            raise ValueError(f"data shape {data.shape} does not match n={self.n}, N={self.N}")
        if not np.all(np.isfinite(data)):
            raise ValueError("grid field contains non-finite samples")
        object.__setattr__(self, "data", data)

    @property
    def c(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_function(cls, func: Callable, n: int, N: int) -> "GridField":
        """Sample ``func(*coords)``; it may return a scalar array or a list of components."""
        x = np.arange(N) / N
        coords = np.meshgrid(*([x] * n), indexing="ij")
        values = func(*coords)
        if isinstance(values, (list, tuple)):
            values = np.stack([np.broadcast_to(v, coords[0].shape) for v in values])
        return cls(n, N, np.asarray(values, dtype=np.float64))

    def component(self, i: int) -> "GridField":
        return GridField(self.n, self.N, self.data[i : i + 1])


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    Fourier coefficients u_hat(k) stored in FFT order, shape ``(c,) + (N,) * n``.

    ``kmax`` is the declared admissible bound: coefficients with any
    ``|k_l| > kmax`` are zero.
    """

    n: int
    N: int
    data: np.ndarray
    kmax: int

    def __post_init__(self) -> None:
        _check_grid(self.n, self.N)
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim == self.n:
            data = data[None]
        if data.shape[1:] != (self.N,) * self.n:
            raise ValueError(f"data shape {data.shape} does not match n={self.n}, N={self.N}")
        if not (0 <= self.kmax <= self.N // 2):
            raise ValueError(f"kmax={self.kmax} outside [0, N/2]")
        object.__setattr__(self, "data", data)

    @property
    def c(self) -> int:
        return self.data.shape[0]

    def with_data(self, data: np.ndarray, kmax: int | None = None) -> "SpectralField":
        return SpectralField(self.n, self.N, data, self.kmax if kmax is None else kmax)

    def component(self, i: int) -> "SpectralField":
        return self.with_data(self.data[i : i + 1])

    def hermitian_defect(self) -> float:
        """Max |u(-k) - conj u(k)| relative to max |u|."""
        flipped = self.data
        for ax in range(1, self.n + 1):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        scale = np.max(np.abs(self.data), initial=0.0)
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(flipped - np.conj(self.data))) / scale)


def wavenumbers(n: int, N: int) -> list[np.ndarray]:
    """Integer wavenumber arrays k_l, each broadcastable to ``(N,) * n``."""
    k1 = np.fft.fftfreq(N, d=1.0 / N).round().astype(np.int64)
    out = []
    for ax in range(n):
        shape = [1] * n
        shape[ax] = N
        out.append(k1.reshape(shape))
    return out


def _mode_mask(n: int, N: int, kmax: int) -> np.ndarray:
    mask = np.ones((N,) * n, dtype=bool)
    for k in wavenumbers(n, N):
        mask &= np.abs(k) <= kmax
    return mask


def forward_transform(f: GridField, kmax: int | None = None) -> SpectralField:
    """
    Unitary-normalized DFT (``u_hat = fft(u) / N^n``).

    The declared bound defaults to N/2 (no claim); pass ``kmax`` to truncate.
    """
    axes = tuple(range(1, f.n + 1))
    data = sfft.fftn(f.data, axes=axes, norm="forward", workers=_workers())
    F = SpectralField(f.n, f.N, data, f.N // 2)
    return F if kmax is None else truncate(F, kmax)


def inverse_transform(F: SpectralField) -> GridField:
    defect = F.hermitian_defect()
    if defect > HERMITIAN_TOL:
        raise ValueError(f"spectrum violates Hermitian symmetry (defect {defect:.3e})")
    axes = tuple(range(1, F.n + 1))
    data = sfft.ifftn(F.data, axes=axes, norm="forward", workers=_workers())
    return GridField(F.n, F.N, data.real)


def truncate(F: SpectralField, kmax: int) -> SpectralField:
    """Zero every mode with some |k_l| > kmax."""
    kmax = min(kmax, F.N // 2)
    return F.with_data(F.data * _mode_mask(F.n, F.N, kmax), kmax)


def spectral_extent(F: SpectralField, rtol: float = 1e-13) -> int:
    """Largest max_l |k_l| carrying a coefficient above ``rtol * max|u_hat|``."""
    amp = np.max(np.abs(F.data), axis=0)
    scale = amp.max(initial=0.0)
    if scale == 0.0:
        return 0
    ks = wavenumbers(F.n, F.N)
    kinf = np.zeros((F.N,) * F.n, dtype=np.int64)
    for k in ks:
        kinf = np.maximum(kinf, np.abs(k))
    return int(kinf[amp > rtol * scale].max())


Symbol = Union[np.ndarray, complex, float, Callable[..., np.ndarray]]


def apply_multiplier(F: SpectralField, sigma: Symbol) -> SpectralField:
    """
    Pointwise Fourier multiplier ``(sigma F)(k) = sigma(k) F(k)``.

    ``sigma`` may be a scalar, an array broadcastable to ``(N,)*n`` (or to the
    full ``(c,)+(N,)*n`` shape), or a callable of the integer wavenumber arrays.
    """
    if callable(sigma):
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma = sigma(*wavenumbers(F.n, F.N))
    sig = np.broadcast_to(np.asarray(sigma, dtype=np.complex128), F.data.shape)
    admissible = _mode_mask(F.n, F.N, F.kmax)
    bad = ~np.isfinite(sig) & admissible
    if np.any(bad):
        raise ValueError("multiplier is not finite on the admissible spectrum")
    sig = np.where(np.isfinite(sig), sig, 0.0)
    return F.with_data(F.data * sig)


def _ksq(n: int, N: int) -> np.ndarray:
    return sum(k.astype(np.float64) ** 2 for k in wavenumbers(n, N))


def _inv_abs_k(n: int, N: int) -> np.ndarray:
    ksq = _ksq(n, N)
    out = np.zeros_like(ksq)
    nz = ksq > 0
    out[nz] = 1.0 / np.sqrt(ksq[nz])
    return out


def riesz_transform(F: SpectralField, i: int) -> SpectralField:
    """R_i with symbol -i k_i / |k| (the 2 pi factors cancel); zero at k = 0."""
    if not (1 <= i <= F.n):
        raise ValueError(f"axis must lie in 1..{F.n}")
    k = wavenumbers(F.n, F.N)[i - 1]
    return apply_multiplier(F, -1j * k * _inv_abs_k(F.n, F.N))


def leray_project(u: SpectralField) -> SpectralField:
    """Divergence-free projection delta_il - k_i k_l / |k|^2, identity at k = 0."""
    if u.c != u.n:
        raise ValueError("Leray projection needs a vector field with c = n")
    ks = wavenumbers(u.n, u.N)
    ksq = _ksq(u.n, u.N)
    inv = np.zeros_like(ksq)
    inv[ksq > 0] = 1.0 / ksq[ksq > 0]
    kdotu = sum(ks[l] * u.data[l] for l in range(u.n))
    out = np.stack([u.data[i] - ks[i] * inv * kdotu for i in range(u.n)])
    return u.with_data(out)


def divergence(u: SpectralField) -> np.ndarray:
    """Spectral divergence sum_l 2 pi i k_l u_l, one complex array."""
    ks = wavenumbers(u.n, u.N)
    return sum(2j * np.pi * ks[l] * u.data[l] for l in range(u.n))


def pad_spectrum(F: SpectralField, M: int) -> SpectralField:
    """
    Embed the spectrum of an N-grid field into an M-grid (M >= N), or crop it
    when M < N.  Nyquist modes are split evenly so real fields stay real.
    """
    N, n = F.N, F.n
    if M == N:
        return F
    if M < N:
        idx = np.r_[0 : M // 2, N - M // 2 : N]
        data = F.data
        for ax in range(1, n + 1):
            data = np.take(data, idx, axis=ax)
        return SpectralField(n, M, data, min(F.kmax, M // 2))
    half = N // 2
    data = F.data
    for ax in range(1, n + 1):
        shape = list(data.shape)
        shape[ax] = M
        out = np.zeros(shape, dtype=np.complex128)
        lo = [slice(None)] * data.ndim
        src = [slice(None)] * data.ndim
        lo[ax] = slice(0, half)
        src[ax] = slice(0, half)
        out[tuple(lo)] = data[tuple(src)]
        lo[ax] = slice(M - half + 1, M)
        src[ax] = slice(half + 1, N)
        out[tuple(lo)] = data[tuple(src)]
        nyq = [slice(None)] * data.ndim
        nyq[ax] = half
        pos = [slice(None)] * data.ndim
        pos[ax] = half
        neg = [slice(None)] * data.ndim
        neg[ax] = M - half
        out[tuple(pos)] = 0.5 * data[tuple(nyq)]
        out[tuple(neg)] = 0.5 * data[tuple(nyq)]
        data = out
    return SpectralField(n, M, data, F.kmax)


def padded_physical(F: SpectralField, M: int) -> np.ndarray:
    """Real grid values of F resampled on an M-grid (M >= N), shape (c,) + (M,)*n."""
    n = F.n
    P = pad_spectrum(F, M).data[..., : M // 2 + 1]
    axes = tuple(range(1, n + 1))
    return sfft.irfftn(P, s=(M,) * n, axes=axes, norm="forward", workers=_workers())


def spectrum_from_padded(values: np.ndarray, n: int, N: int, kmax: int) -> SpectralField:
    """
    Spectrum of real M-grid values restricted to |k_l| <= kmax <= N/2 - 1 and
    stored on an N-grid.
    """
    M = values.shape[-1]
    axes = tuple(range(1, n + 1))
    H = sfft.rfftn(values, axes=axes, norm="forward", workers=_workers())
    idx = np.r_[0 : kmax + 1, M - kmax : M]
    dst = np.r_[0 : kmax + 1, N - kmax : N]
    for ax in range(1, n):
        H = np.take(H, idx, axis=ax)
    H = H[..., : kmax + 1]
    out = np.zeros((values.shape[0],) + (N,) * n, dtype=np.complex128)
    sub = np.zeros((values.shape[0],) + (2 * kmax + 1,) * (n - 1) + (N,), dtype=np.complex128)
    sub[..., : kmax + 1] = H
    if kmax > 0:
        # negative last-axis modes from Hermitian symmetry
        neg = np.conj(H[..., 1 : kmax + 1])
        for ax in range(1, n):
            neg = np.roll(np.flip(neg, axis=ax), 1, axis=ax)
        sub[..., N - kmax :] = np.flip(neg, axis=-1)
    out[np.ix_(range(values.shape[0]), *([dst] * (n - 1)), range(N))] = sub
    return truncate(SpectralField(n, N, out, kmax), kmax)


def spectral_product(F: SpectralField, G: SpectralField, kmax: int | None = None) -> SpectralField:
    """
    Exact product of two real trigonometric polynomials, truncated to
    ``kmax`` (default floor(N/3)).  Components broadcast when one factor is
    scalar.
    """
    if (F.n, F.N) != (G.n, G.N):
        raise ValueError("fields live on different grids")
    if F.c != G.c and 1 not in (F.c, G.c):
        raise ValueError(f"component counts {F.c} and {G.c} do not broadcast")
    n, N = F.n, F.N
    kmax = default_kmax(N) if kmax is None else kmax
    prod = padded_physical(F, 2 * N) * padded_physical(G, 2 * N)
    return spectrum_from_padded(prod, n, N, min(kmax, N // 2 - 1))


def dealiased_product(f: GridField, g: GridField) -> GridField:
    """Pointwise product computed on a zero-padded 2N grid, truncated to floor(N/3)."""
    if (f.n, f.N) != (g.n, g.N):
        raise ValueError("fields live on different grids")
    P = spectral_product(forward_transform(f), forward_transform(g))
    return inverse_transform(P)


def l2_norm(F: Union[SpectralField, GridField]) -> float:
    """L2 norm over the unit torus, summed over components."""
    if isinstance(F, GridField):
        return float(np.sqrt(np.mean(np.sum(F.data**2, axis=0))))
    return float(np.sqrt(np.sum(np.abs(F.data) ** 2)))
