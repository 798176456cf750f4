"""
Periodized Meyer wavelets on the unit torus.

Windows are evaluated at xi = 2 pi m 2^{-j}.  A wavelet phi^eps_{j,k} with
eps in {0,1}^n \\ {0}, 0 <= j <= j_max, k in {0..2^j-1}^n has Fourier
coefficients

    2^{-nj/2} prod_i w^{eps_i}(2 pi m_i / 2^j) exp(-2 pi i m.k / 2^j),

with w^0 = phi0 and w^1(xi) = exp(-i xi/2) phi(xi).  Together with the
constant function they form an orthonormal system whose span contains every
trigonometric polynomial with max |m_l| <= 2^{J-1} / 3 = N/6 (the
"complete band").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Union

import numpy as np
import scipy.fft as sfft

from .grid_field import (
    GridField,
    SpectralField,
    _workers,
    forward_transform,
    inverse_transform,
    pad_spectrum,
    spectral_extent,
    wavenumbers,
)

__all__ = [
    "WaveletSystem",
    "WaveletCoeffs",
    "build_system",
    "system_for",
    "analyze",
    "synthesize",
    "project_band",
    "scaling_coefficients",
    "support_ring_check",
    "eps_tuple",
    "bump_profile",
    "polynomial_profile",
]

TWO_PI = 2.0 * np.pi


def bump_profile(x: np.ndarray) -> np.ndarray:
    """C-infinity transition e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}) on [0, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def polynomial_profile(x: np.ndarray) -> np.ndarray:
    """Polynomial transition x^4 (35 - 84x + 70x^2 - 20x^3), C^3 at the ends."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)


PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bump": bump_profile,
    "poly": polynomial_profile,
}


def eps_tuple(index: int, n: int) -> tuple[int, ...]:
    """Detail index 0..2^n-2 to eps (bitmask index+1, bit i is axis i)."""
    b = index + 1
    return tuple((b >> i) & 1 for i in range(n))


def _windows(xi: np.ndarray, profile: Callable) -> tuple[np.ndarray, np.ndarray]:
    def phi0(z):
        x = 3.0 * np.abs(z) / TWO_PI - 1.0
        return np.where(np.abs(z) <= TWO_PI / 3, 1.0, np.where(np.abs(z) >= 2 * TWO_PI / 3, 0.0, np.cos(0.5 * np.pi * profile(x))))

    w0 = phi0(xi)
    phi = np.sqrt(np.clip(phi0(xi / 2) ** 2 - w0**2, 0.0, None))
    return w0, np.exp(-0.5j * xi) * phi


@dataclass(frozen=True, eq=False)
class WaveletSystem:
    """
    Window tables for an N = 2^J grid in dimension n.

    ``w0[j]`` and ``w1[j]`` hold phi0(2 pi m/2^j) and phi^1(2 pi m/2^j) for the
    FFT-ordered integer frequencies m of one axis.
    """

    n: int
    J: int
    profile: str
    w0: list = field(repr=False)
    w1: list = field(repr=False)

    @property
    def N(self) -> int:
        return 2**self.J

    @property
    def j_max(self) -> int:
        return self.J - 2

    @property
    def complete_kmax(self) -> int:
        """Largest |m_l| for which the system reproduces every mode."""
        return 2 ** (self.J - 1) // 3

    @property
    def n_eps(self) -> int:
        return 2**self.n - 1

    def phi0(self, xi):
        return _windows(np.asarray(xi, dtype=np.float64), PROFILES[self.profile])[0]

    def phi(self, xi):
        return np.abs(_windows(np.asarray(xi, dtype=np.float64), PROFILES[self.profile])[1])

    def window(self, j: int, eps: tuple[int, ...]) -> np.ndarray:
        """Tensor window prod_i w^{eps_i}_j(m_i), shape (N,)*n."""
        jj = max(j, 0) if all(e == 0 for e in eps) else j
        tables = (self._w0(jj), self._w1(jj))
        out = np.ones((1,) * self.n, dtype=np.complex128)
        for ax, e in enumerate(eps):
            shape = [1] * self.n
            shape[ax] = self.N
            out = out * tables[e].reshape(shape)
        return out

    def _w0(self, j: int) -> np.ndarray:
        if j < len(self.w0):
            return self.w0[j]
        return _windows(TWO_PI * _freqs(self.N) / 2.0**j, PROFILES[self.profile])[0].astype(np.complex128)

    def _w1(self, j: int) -> np.ndarray:
        if j < len(self.w1):
            return self.w1[j]
        return _windows(TWO_PI * _freqs(self.N) / 2.0**j, PROFILES[self.profile])[1]


def _freqs(N: int) -> np.ndarray:
    return np.fft.fftfreq(N, d=1.0 / N)


def _self_check(profile: Callable) -> None:
    x = np.linspace(0.0, 1.0, 401)
    v = profile(x)
    if not np.all(np.isfinite(v)) or abs(v[0]) > 1e-12 or abs(v[-1] - 1.0) > 1e-12:
        raise ValueError("transition profile must run from 0 to 1")
    if np.max(np.abs(v + profile(1.0 - x) - 1.0)) > 1e-12:
        raise ValueError("transition profile breaks the partition identity nu(x) + nu(1-x) = 1")
    h = 1e-4
    if abs(profile(np.array([h]))[0]) / h > 1e-3 or abs(1.0 - profile(np.array([1 - h]))[0]) / h > 1e-3:
        raise ValueError("transition profile is not C^1 at the ends of the transition")
    # phi^2(xi) + phi^2(2 pi - xi) = 1 on the transition band
    xi = np.linspace(TWO_PI / 3, 2 * TWO_PI / 3, 257)
    _, a = _windows(xi, profile)
    _, b = _windows(TWO_PI - xi, profile)
    if np.max(np.abs(np.abs(a) ** 2 + np.abs(b) ** 2 - 1.0)) > 1e-12:
        raise ValueError("window fails the partition identity")


@lru_cache(maxsize=32)
def _build(n: int, J: int, profile: str) -> WaveletSystem:
    _self_check(PROFILES[profile])
    N = 2**J
    m = _freqs(N)
    w0, w1 = [], []
    for j in range(J - 1):
        a, b = _windows(TWO_PI * m / 2.0**j, PROFILES[profile])
        w0.append(a.astype(np.complex128))
        w1.append(b)
    return WaveletSystem(n, J, profile, w0, w1)


def build_system(n: int, J: int, profile: Union[str, Callable] = "bump") -> WaveletSystem:
    """
    Build the window tables for dimension n and N = 2^J samples per axis.

    ``profile`` is ``"bump"``, ``"poly"``, or a callable transition
    nu: [0,1] -> [0,1], which is registered after passing the self-check.
    """
    if J < 4:
        raise ValueError("need J >= 4")
    if n not in (1, 2, 3):
        raise ValueError("n must be 1, 2 or 3")
    if callable(profile):
        _self_check(profile)
        name = f"custom-{id(profile)}"
        PROFILES[name] = profile
        profile = name
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    return _build(n, J, profile)


def system_for(n: int, N: int, kmax: int, profile: str = "bump") -> WaveletSystem:
    """Smallest system on a grid >= N whose complete band covers ``kmax``."""
    J = max(int(np.log2(N)), 4)
    while 2 ** (J - 1) // 3 < kmax:
        J += 1
    return build_system(n, J, profile)


@dataclass(eq=False)
class WaveletCoeffs:
    """
    ``base`` is the mean coefficient f^0_{0,0}; ``detail[j]`` has shape
    ``(2^n - 1,) + (2^j,) * n`` indexed by eps (see :func:`eps_tuple`) and k.
    """

    n: int
    J: int
    base: float
    detail: list

    @property
    def j_max(self) -> int:
        return len(self.detail) - 1

    @classmethod
    def zeros(cls, n: int, J: int) -> "WaveletCoeffs":
        return cls(n, J, 0.0, [np.zeros((2**n - 1,) + (2**j,) * n) for j in range(J - 1)])

    def copy(self) -> "WaveletCoeffs":
        return WaveletCoeffs(self.n, self.J, self.base, [d.copy() for d in self.detail])

    def energy(self) -> float:
        return self.base**2 + float(sum(np.sum(d**2) for d in self.detail))

    def bands(self) -> Iterator[tuple[int, np.ndarray]]:
        return iter(enumerate(self.detail))


def _as_spectral(f: Union[GridField, SpectralField], W: WaveletSystem) -> SpectralField:
    F = forward_transform(f) if isinstance(f, GridField) else f
    if F.n != W.n:
        raise ValueError("dimension mismatch between field and wavelet system")
    if F.N > W.N:
        raise ValueError(f"field grid N={F.N} is finer than the wavelet grid N={W.N}")
    return pad_spectrum(F, W.N)


def _fold(arr: np.ndarray, n: int, M: int) -> np.ndarray:
    """Sum an (N,)*n array over frequencies congruent mod M."""
    N = arr.shape[-1]
    out = arr
    for ax in range(n):
        shape = out.shape[:ax] + (N // M, M) + out.shape[ax + 1 :]
        out = out.reshape(shape).sum(axis=ax)
    return out


def _tile(arr: np.ndarray, n: int, N: int) -> np.ndarray:
    M = arr.shape[-1]
    return np.tile(arr, (N // M,) * n)


def _tables(W: WaveletSystem, j: int, eps: tuple[int, ...]) -> list:
    jj = max(j, 0) if all(e == 0 for e in eps) else j
    return [W._w1(jj) if e else W._w0(jj) for e in eps]


def _fold_axis(arr: np.ndarray, ax: int, M: int) -> np.ndarray:
    N = arr.shape[ax]
    shape = arr.shape[:ax] + (N // M, M) + arr.shape[ax + 1 :]
    return arr.reshape(shape).sum(axis=ax)


def _along(v: np.ndarray, ax: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[ax] = v.size
    return v.reshape(shape)


def _coeffs_for(uhat: np.ndarray, W: WaveletSystem, j: int, eps: tuple[int, ...]) -> np.ndarray:
    # window and fold are separable, so apply them one axis at a time
    M = 2 ** max(j, 0)
    F = uhat
    for ax, w in enumerate(_tables(W, j, eps)):
        F = _fold_axis(F * _along(np.conj(w), ax, W.n), ax, M)
    c = M ** (-W.n / 2.0) * sfft.ifftn(F, norm="forward", workers=_workers())
    return c.real


def _band_coeffs(uhat: np.ndarray, W: WaveletSystem, j: int) -> np.ndarray:
    """All eps != 0 coefficient arrays of band j, sharing folded prefixes."""
    M = 2**j
    prefix = {(): uhat}
    for ax in range(W.n):
        tabs = (np.conj(W._w0(j)), np.conj(W._w1(j)))
        prefix = {
            key + (e,): _fold_axis(F * _along(tabs[e], ax, W.n), ax, M)
            for key, F in prefix.items()
            for e in (0, 1)
        }
    out = np.empty((W.n_eps,) + (M,) * W.n)
    for e in range(W.n_eps):
        F = prefix[eps_tuple(e, W.n)]
        out[e] = (M ** (-W.n / 2.0) * sfft.ifftn(F, norm="forward", workers=_workers())).real
    return out


def _synth_for(c: np.ndarray, W: WaveletSystem, j: int, eps: tuple[int, ...]) -> np.ndarray:
    M = 2 ** max(j, 0)
    X = sfft.fftn(c, workers=_workers())
    for ax, w in enumerate(_tables(W, j, eps)):
        reps = [1] * W.n
        reps[ax] = W.N // M
        X = np.tile(X, reps) * _along(w, ax, W.n)
    return M ** (-W.n / 2.0) * X


def analyze(f: Union[GridField, SpectralField], W: WaveletSystem) -> WaveletCoeffs:
    """
    Wavelet coefficients <f, phi^eps_{j,k}> computed exactly from the spectrum.

    A scalar field is required.  Inputs on a coarser grid are zero-padded to
    the system grid.  Content beyond |m_l| > N/3 cannot be represented and is
    rejected.
    """
    F = _as_spectral(f, W)
    if F.c != 1:
        raise ValueError("analyze expects a scalar field; pass one component")
    if spectral_extent(F) > W.N // 3:
        raise ValueError("field spectrum exceeds the wavelet window range N/3")
    uhat = F.data[0]
    out = WaveletCoeffs.zeros(W.n, W.J)
    out.base = float(uhat[(0,) * W.n].real)
    for j in range(W.j_max + 1):
        out.detail[j] = _band_coeffs(uhat, W, j)
    return out


def _synthesize_hat(c: WaveletCoeffs, W: WaveletSystem) -> np.ndarray:
    uhat = np.zeros((W.N,) * W.n, dtype=np.complex128)
    uhat[(0,) * W.n] = c.base
    for j, d in c.bands():
        for e in range(W.n_eps):
            if np.any(d[e]):
                uhat += _synth_for(d[e], W, j, eps_tuple(e, W.n))
    return uhat


def synthesize(c: WaveletCoeffs, W: WaveletSystem, spectral: bool = False) -> Union[GridField, SpectralField]:
    """Field sum of c^eps_{j,k} phi^eps_{j,k} plus the mean."""
    if c.n != W.n or c.J != W.J or len(c.detail) != W.j_max + 1:
        raise ValueError("coefficient layout does not match the wavelet system")
    for j, d in c.bands():
        if d.shape != (W.n_eps,) + (2**j,) * W.n:
            raise ValueError(f"band {j} has shape {d.shape}")
    F = SpectralField(W.n, W.N, _synthesize_hat(c, W)[None], W.N // 3)
    return F if spectral else inverse_transform(F)


def scaling_coefficients(f: Union[GridField, SpectralField], W: WaveletSystem, j: int) -> np.ndarray:
    """f^0_{j,k} = <f, phi^0_{j,k}> for k in {0..2^j-1}^n (j clipped at 0)."""
    F = _as_spectral(f, W)
    return _coeffs_for(F.data[0], W, j, (0,) * W.n)


def _project_hat(uhat: np.ndarray, W: WaveletSystem, kind: str, j: int, eps=None) -> np.ndarray:
    if kind == "P":
        z = (0,) * W.n
        return _synth_for(_coeffs_for(uhat, W, j, z), W, j, z)
    if kind == "Qe":
        return _synth_for(_coeffs_for(uhat, W, j, eps), W, j, eps)
    if kind == "Q":
        out = np.zeros_like(uhat)
        coeffs = _band_coeffs(uhat, W, j)
        for e in range(W.n_eps):
            out += _synth_for(coeffs[e], W, j, eps_tuple(e, W.n))
        return out
    raise ValueError(f"unknown projection kind {kind!r}")


def project_band(
    f: Union[GridField, SpectralField],
    W: WaveletSystem,
    kind: str,
    j: int,
    eps: tuple[int, ...] | None = None,
) -> Union[GridField, SpectralField]:
    """
    Littlewood-Paley projection: ``"P"`` (P_j), ``"Q"`` (Q_j) or ``"Qe"`` (Q_j^eps).

    For ``"P"`` any j <= j_max + 1 is allowed; j <= 0 gives the mean.  The
    result has the input's type and lives on the system grid.
    """
    if kind == "P":
        if j > W.j_max + 1:
            raise ValueError(f"P_j needs j <= {W.j_max + 1}")
    elif not (0 <= j <= W.j_max):
        raise ValueError(f"band index {j} outside [0, {W.j_max}]")
    if kind == "Qe":
        if eps is None or len(eps) != W.n or not any(eps) or any(e not in (0, 1) for e in eps):
            raise ValueError("Q_j^eps needs eps in {0,1}^n minus the zero vector")
        eps = tuple(int(e) for e in eps)
    F = _as_spectral(f, W)
    data = np.stack([_project_hat(F.data[i], W, kind, j, eps) for i in range(F.c)])
    out = SpectralField(W.n, W.N, data, min(W.N // 3, max(F.kmax, 0)))
    return out if isinstance(f, SpectralField) else inverse_transform(out)


def _ring_mask(n: int, N: int, j: int, kind: str, eps) -> np.ndarray:
    scale = 2.0**j
    slack = 1e-9
    ks = [np.abs(k).astype(np.float64) for k in wavenumbers(n, N)]
    inside = np.ones((N,) * n, dtype=bool)
    if kind == "P":
        for k in ks:
            inside &= k <= scale / 6 + slack
        return inside
    if eps is None or len(eps) != n:
        raise ValueError(f"{kind} ring needs eps")
    if kind == "Q":
        lo1, hi1, hi0 = scale / 3, 4 * scale / 3, 2 * scale / 3
    elif kind == "product":
        lo1, hi1, hi0 = scale / 6, 3 * scale / 2, 5 * scale / 6
    else:
        raise ValueError(f"unknown ring kind {kind!r}")
    for k, e in zip(ks, eps):
        if e:
            inside &= (k >= lo1 - slack) & (k <= hi1 + slack)
        else:
            inside &= k <= hi0 + slack
    return inside


def support_ring_check(F: SpectralField, j: int, kind: str, eps: tuple[int, ...] | None = None) -> float:
    """
    Energy of F outside a frequency ring, with xi = 2 pi k:

    ``"P"``        |xi_i| <= pi/3 2^j               (support of P_{j-2} u)
    ``"Q"``        the Q_j^eps box                  (2pi/3 2^j <= |xi_i| <= 8pi/3 2^j if eps_i = 1)
    ``"product"``  the ring of P_{j-2}u Q_j^eps v   (pi/3 2^j <= |xi_i| <= 3 pi 2^j if eps_i = 1)
    """
    mask = _ring_mask(F.n, F.N, j, kind, eps)
    return float(np.sum(np.abs(F.data[:, ~mask]) ** 2))
