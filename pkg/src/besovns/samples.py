"""Seeded random data used by tests, the acceptance suite and the CLI."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .grid_field import GridField, SpectralField, forward_transform, leray_project, pad_spectrum, truncate
from .lorentz_spaces import SpaceParams, besov_lorentz_norm
from .meyer_wavelet import WaveletCoeffs, analyze, build_system, synthesize, system_for

__all__ = [
    "random_band_field",
    "random_wavelet_coeffs",
    "random_wavelet_field",
    "random_divfree_field",
    "vector_besov_lorentz_norm",
]


def _log2(N: int) -> int:
    J = int(np.log2(N))
    if 2**J != N:
        raise ValueError(f"N={N} is not a power of two")
    return J


def random_band_field(n: int, N: int, rng: np.random.Generator, kmax: int, c: int = 1) -> SpectralField:
    """Real Gaussian grid noise truncated to |k_l| <= kmax, mean removed."""
    g = GridField(n, N, rng.standard_normal((c,) + (N,) * n))
    F = truncate(forward_transform(g), kmax)
    data = F.data.copy()
    data[(slice(None),) + (0,) * n] = 0.0
    return F.with_data(data)


def random_wavelet_coeffs(
    n: int,
    J: int,
    rng: np.random.Generator,
    P: SpaceParams,
    top: Optional[int] = None,
) -> WaveletCoeffs:
    """
    Gaussian detail coefficients on bands 0..top (default J-3, the bands whose
    windows stay inside the exactly reproduced range), scaled so every band
    contributes comparably to the critical Besov-Lorentz norm.  Zero mean.
    """
    top = J - 3 if top is None else top
    out = WaveletCoeffs.zeros(n, J)
    s = P.smoothness(n)
    for j in range(top + 1):
        scale = 2.0 ** (-j * (s + n / 2.0))
        # bands are drawn in a fixed order so coarse bands agree across J
        out.detail[j] = scale * rng.standard_normal(out.detail[j].shape)
    return out


def random_wavelet_field(
    n: int,
    N: int,
    rng: np.random.Generator,
    P: SpaceParams = SpaceParams(),
    normalize: bool = True,
    band: str = "complete",
) -> SpectralField:
    """
    Random wavelet-series datum on the N-grid, optionally of unit
    Besov-Lorentz norm.  ``band="complete"`` keeps the spectrum within N/6
    (exactly reproduced by the N-grid system); ``band="dealiased"`` fills
    up to N/3 using the system of the doubled grid.
    """
    J = _log2(N)
    if band == "complete":
        W = build_system(n, J)
        c = random_wavelet_coeffs(n, J, rng, P)
        F = synthesize(c, W, spectral=True)
        F = SpectralField(n, N, F.data, W.complete_kmax)
    elif band == "dealiased":
        W = build_system(n, J + 1)
        c = random_wavelet_coeffs(n, J + 1, rng, P)
        F = synthesize(c, W, spectral=True)
        F = truncate(pad_spectrum(F, N), N // 3)
    else:
        raise ValueError(f"unknown band {band!r}")
    if normalize:
        F = F.with_data(F.data / besov_lorentz_norm(analyze(F, system_for(n, N, F.kmax)), P))
    return F


def vector_besov_lorentz_norm(F: SpectralField, P: SpaceParams) -> float:
    """Sum of the component Besov-Lorentz norms."""
    W = system_for(F.n, F.N, F.kmax)
    return float(sum(besov_lorentz_norm(analyze(F.component(a), W), P) for a in range(F.c)))


def random_divfree_field(
    n: int,
    N: int,
    rng: np.random.Generator,
    k0: int = 4,
    P: Optional[SpaceParams] = None,
) -> SpectralField:
    """
    Leray-projected Gaussian vector field on |k_l| <= k0, mean zero; scaled
    to unit vector Besov-Lorentz norm when ``P`` is given, else unit L2.
    """
    F = random_band_field(n, N, rng, k0, c=n)
    F = leray_project(F)
    F = SpectralField(n, N, F.data, k0)
    norm = vector_besov_lorentz_norm(F, P) if P is not None else float(np.sqrt(np.sum(np.abs(F.data) ** 2)))
    return F.with_data(F.data / norm)
