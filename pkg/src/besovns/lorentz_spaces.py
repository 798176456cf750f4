"""
Weak-Lorentz, Besov, Besov-Lorentz and Triebel-Lizorkin-Lorentz norms from
wavelet coefficients, the microlocal maximum norm of ring-sampled
trajectories, and Hardy-Littlewood maximal functions on the torus.

Band functions are piecewise constant: on the cube Q_{j,k} of volume 2^{-nj}
the band function f_j takes the value 2^{nj/2} sum_eps |f^eps_{j,k}|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid_field import GridField
from .meyer_wavelet import WaveletCoeffs, WaveletSystem, scaling_coefficients, system_for

__all__ = [
    "SpaceParams",
    "BandProfile",
    "band_profile",
    "band_values",
    "weak_lorentz_norm",
    "weak_lorentz_values",
    "dyadic_lorentz_sum",
    "besov_norm",
    "besov_lorentz_norm",
    "triebel_lizorkin_lorentz_norm",
    "hl_maximal",
    "maximal_array",
    "weak_pp",
    "maximal_weak_ratio",
    "cross_scale_sum",
    "cross_scale_sums",
    "lemma26_constant",
    "dyadic_rescale",
    "microlocal_table",
    "microlocal_norm",
    "decay_profile",
]

INF = math.inf


@dataclass(frozen=True)
class SpaceParams:
    """
    Exponents of the norms.  ``s=None`` means the critical value n/p - 1,
    resolved per dimension by :meth:`smoothness`.
    """

    p: float = 2.0
    q: float = 2.0
    r: float = INF
    s: Optional[float] = None
    m: float = 1.25
    mprime: float = 0.25

    def __post_init__(self) -> None:
        if not (1.0 < self.p < INF):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if self.q < 1.0:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.r < 1.0:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.m <= 0.0 or self.mprime < 0.0:
            raise ValueError("need m > 0 and m' >= 0")

    def smoothness(self, n: int) -> float:
        return n / self.p - 1.0 if self.s is None else float(self.s)

    @property
    def critical(self) -> bool:
        return self.s is None

    def wellposed_preset(self) -> bool:
        """Whether (q, m, m') fall in the small-data well-posedness range."""
        if not (self.m > 1.0 and 0.0 <= self.mprime < 0.5):
            return False
        return self.q < INF or self.mprime > 0.0


@dataclass(frozen=True, eq=False)
class BandProfile:
    """Cube values of one band sorted descending; ``volume`` is 2^{-nj}."""

    j: int
    n: int
    values: np.ndarray

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.n * self.j)


def band_values(c: WaveletCoeffs, j: int) -> np.ndarray:
    """Unsorted cube values of f_j, shape (2^j,)*n."""
    if not (0 <= j <= c.j_max):
        raise ValueError(f"band {j} outside [0, {c.j_max}]")
    return 2.0 ** (c.n * j / 2.0) * np.sum(np.abs(c.detail[j]), axis=0)


def band_profile(c: WaveletCoeffs, j: int) -> BandProfile:
    v = band_values(c, j).ravel()
    return BandProfile(j, c.n, np.sort(v)[::-1])


def _weak_sup(sorted_desc: np.ndarray, volume: float, p: float) -> float:
    """sup_lambda lambda |{f > lambda}|^{1/p} = max_rho a_(rho) (rho vol)^{1/p}."""
    if sorted_desc.size == 0 or sorted_desc[0] <= 0.0:
        return 0.0
    ranks = np.arange(1, sorted_desc.size + 1, dtype=np.float64)
    return float(np.max(sorted_desc * (ranks * volume) ** (1.0 / p)))


def dyadic_lorentz_sum(values: np.ndarray, volume: float, p: float, r: float) -> float:
    """
    (sum_{u in Z} 2^{ur} |{f > 2^u}|^{r/p})^{1/r} for a step function with the
    given cell values.  Levels below the smallest positive value are summed
    in closed form.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    v = v[v > 0]
    if v.size == 0:
        return 0.0
    u_low = math.ceil(math.log2(v[0])) - 1
    u_high = math.ceil(math.log2(v[-1]))
    mu0 = v.size * volume
    # work relative to 2^{u_high} to avoid overflow of 2^{ur}
    total = mu0 ** (r / p) * 2.0 ** ((u_low - u_high) * r) / (1.0 - 2.0 ** (-r))
    us = np.arange(u_low + 1, u_high + 1)
    if us.size:
        counts = v.size - np.searchsorted(v, 2.0 ** us.astype(np.float64), side="right")
        mu = counts * volume
        total += float(np.sum(2.0 ** ((us - u_high) * r) * mu ** (r / p)))
    return 2.0**u_high * total ** (1.0 / r)


def weak_lorentz_values(values: np.ndarray, volume: float, p: float, r: float = INF) -> float:
    """Lorentz quasinorm of a step function given by unsorted cell values."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if r == INF:
        return _weak_sup(np.sort(v)[::-1], volume, p)
    return dyadic_lorentz_sum(v, volume, p, r)


def weak_lorentz_norm(b: BandProfile, p: float, r: float = INF) -> float:
    """
    Lorentz quasinorm of a band.  r = inf gives the exact weak-L^p sup via
    order statistics; finite r uses the dyadic level sum.
    """
    if not (1.0 < p < INF):
        raise ValueError("p must lie in (1, inf)")
    if b.values.size == 0:
        return 0.0
    if r == INF:
        return _weak_sup(b.values, b.volume, p)
    return dyadic_lorentz_sum(b.values, b.volume, p, r)


def _lq(terms: Sequence[float], q: float) -> float:
    terms = np.asarray(terms, dtype=np.float64)
    if terms.size == 0:
        return 0.0
    if q == INF:
        return float(terms.max())
    return float(np.sum(terms**q) ** (1.0 / q))


def besov_norm(c: WaveletCoeffs, P: SpaceParams) -> float:
    """(sum_j 2^{jq(s+n/2-n/p)} (sum_{eps,k} |f^eps_{j,k}|^p)^{q/p})^{1/q}; the mean is ignored."""
    s = P.smoothness(c.n)
    terms = [
        2.0 ** (j * (s + c.n / 2.0 - c.n / P.p)) * np.sum(np.abs(d) ** P.p) ** (1.0 / P.p)
        for j, d in c.bands()
    ]
    return _lq(terms, P.q)


def besov_lorentz_terms(c: WaveletCoeffs, P: SpaceParams) -> np.ndarray:
    s = P.smoothness(c.n)
    return np.array([2.0 ** (j * s) * weak_lorentz_norm(band_profile(c, j), P.p, P.r) for j in range(c.j_max + 1)])


def besov_lorentz_norm(c: WaveletCoeffs, P: SpaceParams) -> float:
    """l^q over bands of 2^{js} ||f_j||_{L^{p,r}}."""
    return _lq(besov_lorentz_terms(c, P), P.q)


def _upsample(a: np.ndarray, factor: int) -> np.ndarray:
    for ax in range(a.ndim):
        a = np.repeat(a, factor, axis=ax)
    return a


def triebel_lizorkin_lorentz_norm(c: WaveletCoeffs, P: SpaceParams) -> float:
    """
    Lorentz quasinorm of the square function S = (sum_j 2^{jsq} f_j^q)^{1/q},
    evaluated on the finest cube level by dyadic levels.  r = inf uses the
    exact weak sup and q = inf uses sup_j.
    """
    s = P.smoothness(c.n)
    L = c.j_max
    acc = np.zeros((2**L,) * c.n)
    for j in range(L + 1):
        vals = _upsample(2.0 ** (j * s) * band_values(c, j), 2 ** (L - j))
        acc = np.maximum(acc, vals) if P.q == INF else acc + vals**P.q
    S = acc if P.q == INF else acc ** (1.0 / P.q)
    return weak_lorentz_values(S, 2.0 ** (-c.n * L), P.p, P.r)


def maximal_array(a: np.ndarray, kind: str = "dyadic") -> np.ndarray:
    """
    Maximal function of |a| for a periodic array of cells, side 2^L per axis.

    ``"dyadic"``: max over dyadic cubes containing the cell.  ``"uncentered"``:
    max over all cell-aligned cubes of side 2^{-l} (wrapping), which dominates
    the centered operator.
    """
    a = np.abs(np.asarray(a, dtype=np.float64))
    n = a.ndim
    side = a.shape[0]
    L = int(round(math.log2(side)))
    out = a.copy()
    if kind == "dyadic":
        level = a
        for l in range(L - 1, -1, -1):
            shape = []
            for _ in range(n):
                shape += [2**l, 2]
            level = level.reshape(shape).mean(axis=tuple(range(1, 2 * n, 2)))
            out = np.maximum(out, _upsample(level, 2 ** (L - l)))
        return out
    if kind == "uncentered":
        for l in range(L - 1, -1, -1):
            w = 2 ** (L - l)
            # mean over the cube whose lower corner is the cell, then the max
            # over all such cubes containing the cell
            avg = a
            for ax in range(n):
                avg = sum(np.roll(avg, -s, axis=ax) for s in range(w)) / w
            best = avg
            for ax in range(n):
                best = np.max(np.stack([np.roll(best, s, axis=ax) for s in range(w)]), axis=0)
            out = np.maximum(out, best)
        return out
    raise ValueError(f"unknown maximal kind {kind!r}")


def hl_maximal(f: GridField, kind: str = "dyadic") -> GridField:
    """Hardy-Littlewood maximal function of a scalar grid field (cells = samples)."""
    if f.c != 1:
        raise ValueError("hl_maximal expects a scalar field")
    return GridField(f.n, f.N, maximal_array(f.data[0], kind)[None])


def weak_pp(values: np.ndarray, volume: float, p: float) -> float:
    """sup_lambda lambda^p |{|f| > lambda}|."""
    return weak_lorentz_values(np.abs(values), volume, p) ** p


def maximal_weak_ratio(f: GridField, p: float, kind: str = "dyadic") -> float:
    """sup lambda^p |{Mf > lambda}| / sup lambda^p |{|f| > lambda}|."""
    vol = float(f.N) ** (-f.n)
    denom = weak_pp(f.data[0], vol, p)
    if denom == 0.0:
        return 0.0
    return weak_pp(hl_maximal(f, kind).data[0], vol, p) / denom


def _wrapped(d: np.ndarray, period: int) -> np.ndarray:
    return (d + period / 2.0) % period - period / 2.0


def cross_scale_sums(c: WaveletCoeffs, j: int, jp: int, N_decay: float) -> np.ndarray:
    """
    g^k_{j,j'} for every k in {0..2^j-1}^n, shape (2^j,)*n.

    j >= j': sum_{eps',k'} 2^{nj'/2}|f^{eps'}_{j',k'}| (1 + |k' - 2^{j'-j} k|)^{-N}
    j <  j': sum_{eps',k'} 2^{nj'/2}|f^{eps'}_{j',k'}| (1 + |k - 2^{j-j'} k'|)^{-N}
    Distances are periodic at the coarser of the two scales.
    """
    n = c.n
    if N_decay <= 2 * n + 1:
        raise ValueError(f"decay exponent must exceed 2n+1 = {2 * n + 1}")
    w = band_values(c, jp).ravel()
    k = np.arange(2**j, dtype=np.float64)
    kp = np.arange(2**jp, dtype=np.float64)
    if j >= jp:
        diff = _wrapped(kp[None, :] - 2.0 ** (jp - j) * k[:, None], 2**jp)
    else:
        diff = _wrapped(k[:, None] - 2.0 ** (j - jp) * kp[None, :], 2**j)
    # diff[k_i, k'_i] per axis; build |.|^2 over the full (k, k') product
    d2 = np.zeros((2**j,) * n + (2**jp,) * n)
    for ax in range(n):
        shape = [1] * (2 * n)
        shape[ax] = 2**j
        shape[n + ax] = 2**jp
        d2 = d2 + diff.reshape(shape) ** 2
    kernel = (1.0 + np.sqrt(d2)) ** (-N_decay)
    return (kernel.reshape((2**j) ** n, (2**jp) ** n) @ w).reshape((2**j,) * n)


def cross_scale_sum(c: WaveletCoeffs, j: int, jp: int, k: Sequence[int], N_decay: float) -> float:
    """Single value g^k_{j,j'}."""
    return float(cross_scale_sums(c, j, jp, N_decay)[tuple(int(x) % 2**j for x in k)])


def lemma26_constant(c: WaveletCoeffs, j: int, jp: int, N_decay: float, kind: str = "uncentered") -> float:
    """
    Smallest C with g^k_{j,j'} <= C 2^{n(j'-j)_+} M(f_{j'})(x) for all x in Q_{j,k}.
    """
    n = c.n
    g = cross_scale_sums(c, j, jp, N_decay)
    L = max(j, jp)
    fj = _upsample(band_values(c, jp), 2 ** (L - jp))
    M = maximal_array(fj, kind)
    if L > j:
        b = 2 ** (L - j)
        shape = []
        for _ in range(n):
            shape += [2**j, b]
        M = M.reshape(shape).min(axis=tuple(range(1, 2 * n, 2)))
    factor = 2.0 ** (n * max(jp - j, 0))
    mask = g > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(g[mask] / (factor * M[mask])))


def dyadic_rescale(c: WaveletCoeffs, d: int) -> tuple[WaveletCoeffs, float]:
    """
    Coefficient-level image of f -> 2^d f(2^d .): (eps, j, k) -> (eps, j+d, k)
    scaled by 2^{d(1 - n/2)}.  Returns the new coefficients and the energy of
    the source bands that fall off the band range (boundary bands).
    """
    n = c.n
    out = WaveletCoeffs.zeros(n, c.J)
    out.base = c.base
    amp = 2.0 ** (d * (1.0 - n / 2.0))
    lost = 0.0
    for j, band in c.bands():
        jn = j + d
        if not (0 <= jn <= c.j_max):
            lost += float(np.sum(band**2))
            continue
        if d >= 0:
            out.detail[jn][(slice(None),) + (slice(0, 2**j),) * n] = amp * band
        else:
            keep = (slice(None),) + (slice(0, 2**jn),) * n
            out.detail[jn] = amp * band[keep]
            dropped = np.ones(band.shape, dtype=bool)
            dropped[keep] = False
            lost += float(np.sum(band[dropped] ** 2))
    return out, lost


def _component_coeffs(T, W: WaveletSystem):
    return T.coefficients(W)


def microlocal_table(T, P: SpaceParams, W: Optional[WaveletSystem] = None) -> dict:
    """
    A^{p,m}_{j,j_t} for every stored ring j_t and band j, per component.

    Returns a dict with ``rings``, ``bands`` and ``A`` of shape
    (components, rings, bands).
    """
    if len(T.times) == 0:
        raise ValueError("empty trajectory")
    W = W or system_for(T.n, T.N, T.kmax)
    coeffs = _component_coeffs(T, W)
    rings = [j_t for j_t in range(T.ring_hi, T.ring_lo - 1, -1) if T.ring_indices(j_t).size]
    if not rings:
        raise ValueError("trajectory covers no complete ring")
    n, p = T.n, P.p
    bands = list(range(W.j_max + 1))
    A = np.zeros((T.c, len(rings), len(bands)))
    for a in range(T.c):
        for ri, j_t in enumerate(rings):
            idx = T.ring_indices(j_t)
            for j in bands:
                sup_vals = np.max(np.stack([band_values(coeffs[i][a], j) for i in idx]), axis=0)
                weak = _weak_sup(np.sort(sup_vals.ravel())[::-1], 2.0 ** (-n * j), p)
                mm = P.m if j >= j_t else P.mprime
                A[a, ri, j] = 2.0 ** (2 * (j - j_t) * mm) * 2.0 ** (j * (n / p - 1.0)) * weak
    return {"rings": rings, "bands": bands, "A": A}


def _microlocal_from_A(A: np.ndarray, rings, bands, q: float) -> float:
    jt = np.asarray(rings)[:, None]
    jj = np.asarray(bands)[None, :]
    high = jj >= jt
    if q == INF:
        hi = np.max(np.where(high, A, 0.0))
        lo = np.max(np.where(~high, A, 0.0))
        return float(hi + lo)
    per_ring = np.sum(A**q, axis=1)
    return float(np.max(per_ring) ** (1.0 / q))


def microlocal_norm(T, P: SpaceParams, W: Optional[WaveletSystem] = None) -> float:
    """
    Microlocal maximum norm: sup over rings of the l^q sum over bands of A-terms
    (1/q-th root), or the two-branch sup for q = inf.  Vector trajectories
    sum the component norms.
    """
    tab = microlocal_table(T, P, W)
    return float(sum(_microlocal_from_A(tab["A"][a], tab["rings"], tab["bands"], P.q) for a in range(T.c)))


def decay_profile(T, P: SpaceParams, W: Optional[WaveletSystem] = None) -> dict:
    """
    Per (ring, band): sup over ring samples, eps and k of
    (t 4^j)^{m or m'} 2^{(n/2-1)j} |f^eps_{j,k}(t)|  (``detail``), and of
    2^{nj/2} |f^0_{j,k}(t)|  (``scaling``), plus the raw per-time maxima used
    by the decay fits (``times``, ``detail_max``, ``scaling_max``).
    """
    if len(T.times) == 0:
        raise ValueError("empty trajectory")
    W = W or system_for(T.n, T.N, T.kmax)
    coeffs = _component_coeffs(T, W)
    n = T.n
    bands = list(range(W.j_max + 1))
    detail_max = np.zeros((len(T.times), len(bands)))
    scaling_max = np.zeros_like(detail_max)
    for i in range(len(T.times)):
        F = T.field(i)
        for j in bands:
            detail_max[i, j] = max(np.max(np.abs(coeffs[i][a].detail[j])) for a in range(T.c))
            scaling_max[i, j] = max(
                2.0 ** (n * j / 2.0) * np.max(np.abs(scaling_coefficients(F.component(a), W, j))) for a in range(T.c)
            )
    rings = [j_t for j_t in range(T.ring_hi, T.ring_lo - 1, -1) if T.ring_indices(j_t).size]
    detail = np.zeros((len(rings), len(bands)))
    scaling = np.zeros_like(detail)
    for ri, j_t in enumerate(rings):
        for i in T.ring_indices(j_t):
            t = T.times[i]
            for j in bands:
                x = t * 4.0**j
                w = x ** (P.m if x >= 1.0 else P.mprime) * 2.0 ** ((n / 2.0 - 1.0) * j)
                detail[ri, j] = max(detail[ri, j], w * detail_max[i, j])
                scaling[ri, j] = max(scaling[ri, j], scaling_max[i, j])
    return {
        "rings": rings,
        "bands": bands,
        "detail": detail,
        "scaling": scaling,
        "times": T.times.copy(),
        "detail_max": detail_max,
        "scaling_max": scaling_max,
    }
