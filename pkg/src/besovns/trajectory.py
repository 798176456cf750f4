"""Time-sampled families of spectral fields organized by binary time rings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid_field import SpectralField

__all__ = ["Trajectory", "ring_times", "ring_bounds"]


def ring_bounds(j_t: int) -> tuple[float, float]:
    """Ring j_t is [2^{-2 j_t}, 2^{2 - 2 j_t})."""
    return 2.0 ** (-2 * j_t), 2.0 ** (2 - 2 * j_t)


def ring_times(ring_lo: int, ring_hi: int, S: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Geometric nodes 2^{-2 j_t} 4^{i/S}, i = 0..S-1, for every ring, in
    increasing time.  Returns ``(times, ring_labels)``.
    """
    if ring_lo > ring_hi:
        raise ValueError("ring_lo must not exceed ring_hi")
    if S < 1:
        raise ValueError("need at least one sample per ring")
    times, labels = [], []
    for j_t in range(ring_hi, ring_lo - 1, -1):
        lo, _ = ring_bounds(j_t)
        for i in range(S):
            times.append(lo * 4.0 ** (i / S))
            labels.append(j_t)
    return np.array(times), np.array(labels, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Spectral fields at ring-sampled times, optionally preceded by t = 0.

    ``data`` has shape ``(T, c) + (N,) * n``; ``rings[i]`` is the ring label
    of time ``i`` (-1 marks the origin sample).
    """

    n: int
    N: int
    kmax: int
    ring_lo: int
    ring_hi: int
    samples_per_ring: int
    times: np.ndarray
    data: np.ndarray
    has_origin: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        data = np.asarray(self.data, dtype=np.complex128)
        expected, labels = ring_times(self.ring_lo, self.ring_hi, self.samples_per_ring)
        if self.has_origin:
            expected = np.r_[0.0, expected]
            labels = np.r_[-1, labels]
        if times.shape != expected.shape or not np.allclose(times, expected, rtol=1e-14, atol=0):
            raise ValueError("times do not match the declared ring layout")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        for t, j_t in zip(times, labels):
            if j_t >= 0:
                lo, hi = ring_bounds(int(j_t))
                if not (lo <= t < hi):
                    raise ValueError(f"time {t} outside ring {j_t}")
        if data.shape[0] != len(times) or data.shape[2:] != (self.N,) * self.n:
            raise ValueError(f"data shape {data.shape} inconsistent with {len(times)} times on n={self.n}, N={self.N}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "rings", labels)

    @property
    def c(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def from_fields(cls, fields, ring_lo: int, ring_hi: int, S: int, has_origin: bool = True) -> "Trajectory":
        times, _ = ring_times(ring_lo, ring_hi, S)
        if has_origin:
            times = np.r_[0.0, times]
        f0 = fields[0]
        data = np.stack([f.data for f in fields])
        kmax = max(f.kmax for f in fields)
        return cls(f0.n, f0.N, kmax, ring_lo, ring_hi, S, times, data, has_origin)

    def with_data(self, data: np.ndarray, kmax: int | None = None) -> "Trajectory":
        return Trajectory(
            self.n,
            self.N,
            self.kmax if kmax is None else kmax,
            self.ring_lo,
            self.ring_hi,
            self.samples_per_ring,
            self.times,
            data,
            self.has_origin,
        )

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.n, self.N, self.data[i], self.kmax)

    def ring_indices(self, j_t: int) -> np.ndarray:
        return np.nonzero(self.rings == j_t)[0]

    def at(self, t: float) -> SpectralField:
        """
        Field at time t by piecewise-geometric interpolation of each Fourier
        coefficient; modes whose neighbouring samples change sign or phase by
        more than pi/2 fall back to linear interpolation.
        """
        times = self.times
        if t < times[0] or t > times[-1]:
            raise ValueError(f"time {t} outside the stored range [{times[0]}, {times[-1]}]")
        i = int(np.searchsorted(times, t, side="right")) - 1
        if i >= len(times) - 1 or t == times[i]:
            return self.field(min(i, len(times) - 1))
        a, b = self.data[i], self.data[i + 1]
        theta = (t - times[i]) / (times[i + 1] - times[i])
        lin = (1 - theta) * a + theta * b
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = b / a
            ok = (np.abs(a) > 0) & (np.abs(b) > 0) & (np.abs(np.angle(ratio)) < np.pi / 2)
            geo = a * np.exp(theta * np.log(np.where(ok, ratio, 1.0)))
        return SpectralField(self.n, self.N, np.where(ok, geo, lin), self.kmax)

    def coefficients(self, W) -> list:
        """Per time, per component WaveletCoeffs in system W (cached)."""
        from .meyer_wavelet import analyze

        key = (W.n, W.J, W.profile)
        if key not in self._cache:
            out = []
            for i in range(len(self.times)):
                F = self.field(i)
                out.append([analyze(F.component(a), W) for a in range(self.c)])
            self._cache[key] = out
        return self._cache[key]
