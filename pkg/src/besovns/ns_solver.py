"""
Mild Navier-Stokes solutions on the torus by Picard iteration over a
ring-sampled trajectory, with an independent time-stepping oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .flows import FOUR_PI_SQ, bilinear_trajectory, heat_flow, nonlinear_term
from .grid_field import SpectralField, _ksq, divergence, inverse_transform, leray_project, pad_spectrum, truncate
from .lorentz_spaces import SpaceParams, besov_lorentz_terms, dyadic_rescale, microlocal_norm
from .meyer_wavelet import analyze, synthesize, system_for
from .trajectory import Trajectory, ring_times

__all__ = [
    "SolverConfig",
    "IterationReport",
    "picard_solve",
    "mild_residual",
    "rk4_reference",
    "taylor_green_field",
    "contraction_ratio",
    "smallness_scan",
    "scale_family_check",
    "trajectory_l2",
    "relative_l2_errors",
]


@dataclass(frozen=True)
class SolverConfig:
    """
    Grid, ring horizon and Picard controls.

    The stored trajectory covers rings ``ring_lo`` .. ``max(ring_hi,
    quadrature_ring)``; the extra fine rings keep the first Duhamel panel
    [0, t_1] short.  ``quadrature_ring=None`` means log2(N) + 2.
    """

    n: int = 2
    N: int = 32
    ring_lo: int = 1
    ring_hi: int = 4
    S: int = 8
    tol: float = 1e-10
    max_iter: int = 30
    params: SpaceParams = field(default_factory=SpaceParams)
    quadrature_ring: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n not in (2, 3):
            raise ValueError("the solver runs in dimension 2 or 3")
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError(f"N={self.N} must be a power of two >= 16")
        if self.ring_lo < 1:
            raise ValueError("ring_lo must be >= 1 so that t_max <= 1")
        if self.ring_lo > self.ring_hi:
            raise ValueError("ring_lo must not exceed ring_hi")
        if self.S < 2:
            raise ValueError("need at least two samples per ring")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def finest_ring(self) -> int:
        q = int(math.log2(self.N)) + 2 if self.quadrature_ring is None else self.quadrature_ring
        return max(self.ring_hi, q)

    def times(self) -> np.ndarray:
        t, _ = ring_times(self.ring_lo, self.finest_ring, self.S)
        return np.r_[0.0, t]


@dataclass
class IterationReport:
    """One entry per Picard iterate u^(tau), tau = 0, 1, ..."""

    micro: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    diff_micro: list = field(default_factory=list)
    diff_l2: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    wall: list = field(default_factory=list)
    converged: bool = False
    status: str = "running"
    ratio: float = float("nan")

    def records(self) -> list[dict]:
        """Per-iterate rows without wall-clock, for byte-stable output."""
        rows = []
        for i in range(len(self.micro)):
            rows.append(
                {
                    "tau": i,
                    "micro": self.micro[i],
                    "l2": self.l2[i],
                    "diff_micro": self.diff_micro[i],
                    "diff_l2": self.diff_l2[i],
                    "residual": self.residual[i],
                }
            )
        return rows

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "iterations": len(self.micro) - 1,
            "contraction_ratio": self.ratio,
            "final_residual": self.residual[-1] if self.residual else None,
        }


def trajectory_l2(T: Trajectory) -> np.ndarray:
    """L2 norm at every stored time (summed over components)."""
    axes = tuple(range(1, T.data.ndim))
    return np.sqrt(np.sum(np.abs(T.data) ** 2, axis=axes))


def relative_l2_errors(A: Trajectory, B: Trajectory) -> np.ndarray:
    """||A(t) - B(t)|| / ||B(t)|| per stored time (0/0 counts as 0)."""
    if A.data.shape != B.data.shape:
        raise ValueError("trajectories have different shapes")
    num = trajectory_l2(A.with_data(A.data - B.data))
    den = trajectory_l2(B)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out


def _check_divfree(f: SpectralField, tol: float = 1e-9) -> None:
    if f.c != f.n:
        raise ValueError("datum must be a vector field with c = n")
    scale = math.sqrt(float(np.sum(np.abs(f.data) ** 2)))
    if scale == 0.0:
        return
    div = float(np.sqrt(np.sum(np.abs(divergence(f)) ** 2)))
    if div > tol * scale * 2 * math.pi * max(f.kmax, 1):
        raise ValueError(f"datum is not divergence-free (|div u| = {div:.3e})")


def _heat_trajectory(f: SpectralField, cfg: SolverConfig) -> Trajectory:
    if (f.n, f.N) != (cfg.n, cfg.N):
        raise ValueError(f"datum grid (n={f.n}, N={f.N}) does not match the config (n={cfg.n}, N={cfg.N})")
    return heat_flow(f, cfg.ring_lo, cfg.finest_ring, cfg.S)


def mild_residual(u: Trajectory, f: SpectralField) -> float:
    """max_t ||u(t) - e^{t Delta} f + B(u, u)(t)|| / max(||f||, 1e-30)."""
    u0 = heat_flow(f, u.ring_lo, u.ring_hi, u.samples_per_ring)
    B = bilinear_trajectory(u, u)
    r = trajectory_l2(u.with_data(u.data - u0.data + B.data))
    fn = math.sqrt(float(np.sum(np.abs(f.data) ** 2)))
    return float(np.max(r) / max(fn, 1e-30))


def contraction_ratio(diffs: Sequence[float], floor: float = 1e-13) -> float:
    """Geometric mean of successive difference ratios above the noise floor."""
    d = [x for x in diffs[1:] if x > 0]
    pairs = [(a, b) for a, b in zip(d[:-1], d[1:]) if b > floor]
    if not pairs:
        return 0.0
    return float(math.exp(np.mean([math.log(b / a) for a, b in pairs])))


def picard_solve(f: SpectralField, cfg: SolverConfig, track_micro: bool = True) -> tuple[Trajectory, IterationReport]:
    """
    Iterate u^(tau+1) = e^{t Delta} f - B(u^(tau), u^(tau)) on the stored
    trajectory.  Stops when the relative successive difference falls below
    ``cfg.tol`` in both grid L2 and the microlocal norm, or when the
    difference grows on two consecutive steps (non-contraction).
    """
    # diverging iterates may overflow before non-contraction is detected;
    # that case is reported through ``status``
    with np.errstate(over="ignore", invalid="ignore"):
        return _picard(f, cfg, track_micro)


def _picard(f: SpectralField, cfg: SolverConfig, track_micro: bool) -> tuple[Trajectory, IterationReport]:
    _check_divfree(f)
    u0 = _heat_trajectory(f, cfg)
    u0 = u0.with_data(u0.data, kmax=cfg.N // 3)
    P = cfg.params
    W = system_for(cfg.n, cfg.N, cfg.N // 3)
    rep = IterationReport()
    fn = math.sqrt(float(np.sum(np.abs(f.data) ** 2)))

    def micro(T):
        return microlocal_norm(T, P, W) if track_micro else float("nan")

    start = time.perf_counter()
    u = u0
    rep.micro.append(micro(u))
    rep.l2.append(float(np.max(trajectory_l2(u))))
    rep.diff_micro.append(float("nan"))
    rep.diff_l2.append(float("nan"))
    if fn == 0.0:
        rep.residual.append(0.0)
        rep.wall.append(time.perf_counter() - start)
        rep.converged, rep.status, rep.ratio = True, "converged", 0.0
        return u, rep
    B = bilinear_trajectory(u, u)
    rep.residual.append(_residual(u, u0, B, fn))
    rep.wall.append(time.perf_counter() - start)
    growth = 0
    for _ in range(cfg.max_iter):
        new = u0.with_data(u0.data - B.data)
        d = new.with_data(new.data - u.data)
        scale_l2 = max(float(np.max(trajectory_l2(new))), 1e-300)
        dl2 = float(np.max(trajectory_l2(d))) / scale_l2
        m_new = micro(new)
        dmicro = micro(d) / m_new if track_micro and m_new > 0 else (0.0 if track_micro else float("nan"))
        u = new
        B = bilinear_trajectory(u, u)
        rep.micro.append(m_new)
        rep.l2.append(scale_l2)
        rep.diff_l2.append(dl2)
        rep.diff_micro.append(dmicro)
        rep.residual.append(_residual(u, u0, B, fn))
        rep.wall.append(time.perf_counter() - start)
        if not all(math.isfinite(x) for x in (dl2, rep.residual[-1])):
            rep.status = "nan"
            break
        ok_micro = (not track_micro) or dmicro < cfg.tol
        if dl2 < cfg.tol and ok_micro:
            rep.converged, rep.status = True, "converged"
            break
        if len(rep.diff_l2) >= 3 and dl2 > rep.diff_l2[-2]:
            growth += 1
        else:
            growth = 0
        if growth >= 2:
            rep.status = "non-contraction"
            break
    else:
        rep.status = "max-iter"
    rep.ratio = contraction_ratio(rep.diff_l2)
    return u, rep


def _residual(u: Trajectory, u0: Trajectory, B: Trajectory, fn: float) -> float:
    r = trajectory_l2(u.with_data(u.data - u0.data + B.data))
    return float(np.max(r) / fn)


def _advective_dt(U: SpectralField) -> float:
    u = inverse_transform(U).data
    umax = float(np.max(np.sqrt(np.sum(u**2, axis=0))))
    return math.inf if umax == 0 else 1.0 / (U.N * umax)


def rk4_reference(
    f: SpectralField,
    cfg: SolverConfig,
    cfl: float = 0.5,
    dt_max: float = 2e-3,
    dt: Optional[float] = None,
) -> Trajectory:
    """
    Pseudo-spectral integrating-factor RK4 for u_t + P div(u (x) u) = Delta u,
    landing exactly on the stored ring times.  Diffusion is integrated exactly;
    the step obeys the advective limit dt <= cfl / (N max|u|), capped at
    ``dt_max``.  An explicit ``dt`` above the advective limit is rejected.
    """
    _check_divfree(f)
    times = cfg.times()
    U = SpectralField(f.n, f.N, f.data, f.N // 3)
    limit = _advective_dt(U)
    if dt is not None:
        if dt > limit:
            raise ValueError(f"dt={dt:.3e} violates the advective CFL limit {limit:.3e}")
        step = dt
    else:
        step = min(cfl * limit, dt_max)
    a = FOUR_PI_SQ * _ksq(f.n, f.N)
    data = [U.data.copy()]
    u = U.data.copy()

    def rhs(x):
        return -nonlinear_term(U.with_data(x), U.with_data(x)).data

    for t0, t1 in zip(times[:-1], times[1:]):
        steps = max(1, math.ceil((t1 - t0) / step - 1e-9))
        h = (t1 - t0) / steps
        E = np.exp(-0.5 * a * h)
        E2 = E * E
        for _ in range(steps):
            k1 = rhs(u)
            k2 = rhs(E * (u + 0.5 * h * k1))
            k3 = rhs(E * u + 0.5 * h * k2)
            k4 = rhs(E2 * u + h * E * k3)
            u = E2 * u + (h / 6.0) * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
        data.append(u.copy())
    return Trajectory(f.n, f.N, f.N // 3, cfg.ring_lo, cfg.finest_ring, cfg.S, times, np.stack(data), True)


def taylor_green_field(N: int, n: int = 2) -> SpectralField:
    """(sin 2 pi x cos 2 pi y, -cos 2 pi x sin 2 pi y) on the 2-torus."""
    if n != 2:
        raise ValueError("the Taylor-Green datum is two-dimensional")
    data = np.zeros((2, N, N), dtype=np.complex128)
    # sin(a)cos(b) = sum over sign pairs of (+-1/4i) e^{i(+-a +- b)}
    for sx in (1, -1):
        for sy in (1, -1):
            data[0][sx % N, sy % N] = sx / 4j
            data[1][sx % N, sy % N] = -sy / 4j
    return SpectralField(2, N, data, 1)


def smallness_scan(
    direction: SpectralField,
    cfg: SolverConfig,
    eps_start: float = 1.0,
    eps_min: float = 1e-4,
    eps_max: float = 1e4,
    bisect_steps: int = 6,
) -> dict:
    """
    Largest amplitude eps for which Picard iteration on eps * direction
    converges within ``cfg.max_iter``: geometric bracketing then bisection.
    ``unbounded`` flags runs that still converge at ``eps_max`` (for instance
    a datum with B(f, f) = 0).
    """
    curve = []

    def run(eps):
        _, rep = picard_solve(direction.with_data(eps * direction.data), cfg, track_micro=False)
        curve.append({"eps": eps, "converged": rep.converged, "ratio": rep.ratio, "status": rep.status})
        return rep.converged

    eps = eps_start
    if run(eps):
        lo, hi = eps, None
        while eps < eps_max:
            eps = min(2 * eps, eps_max)
            if run(eps):
                lo = eps
            else:
                hi = eps
                break
        if hi is None:
            return {"eps0": lo, "unbounded": True, "curve": sorted(curve, key=lambda r: r["eps"])}
    else:
        lo, hi = None, eps
        while eps > eps_min:
            eps = eps / 2
            if run(eps):
                lo = eps
                break
            hi = eps
        if lo is None:
            return {"eps0": 0.0, "unbounded": False, "curve": sorted(curve, key=lambda r: r["eps"])}
    for _ in range(bisect_steps):
        mid = math.sqrt(lo * hi)
        if run(mid):
            lo = mid
        else:
            hi = mid
    return {"eps0": lo, "unbounded": False, "curve": sorted(curve, key=lambda r: r["eps"])}


def _shift_field(F: SpectralField, d: int) -> tuple[SpectralField, float]:
    W = system_for(F.n, F.N, F.kmax)
    comps, lost = [], 0.0
    for a in range(F.c):
        c, l = dyadic_rescale(analyze(F.component(a), W), d)
        lost += l
        comps.append(synthesize(c, W, spectral=True).data[0])
    G = SpectralField(W.n, W.N, np.stack(comps), W.N // 3)
    return G, lost


def _interior_norm(F: SpectralField, P: SpaceParams, bands: range) -> float:
    W = system_for(F.n, F.N, F.kmax)
    total = 0.0
    for a in range(F.c):
        terms = besov_lorentz_terms(analyze(F.component(a), W), P)
        sel = np.array([terms[j] for j in bands])
        total += float(np.max(sel)) if math.isinf(P.q) else float(np.sum(sel**P.q) ** (1.0 / P.q))
    return total


def scale_family_check(
    f: SpectralField,
    thetas: Sequence[int],
    cfg: Optional[SolverConfig] = None,
) -> dict:
    """
    Critical data norms of f_theta (coefficient index shift by log2 theta)
    against f over the bands both occupy, and, when ``cfg`` is given, the
    microlocal norms of the Picard solutions for f and the Leray-projected
    f_theta on rings shifted by log2 theta.
    """
    P = cfg.params if cfg is not None else SpaceParams()
    W = system_for(f.n, f.N, f.kmax)
    out = []
    for theta in thetas:
        d = int(round(math.log2(theta))) if theta > 0 else -1
        if theta <= 0 or 2**d != theta:
            raise ValueError(f"theta={theta} is not a power of two")
        g, lost = _shift_field(f, d)
        lo, hi = max(0, -d), min(W.j_max, W.j_max - d)
        src = range(lo, hi + 1)
        dst = range(lo + d, hi + d + 1)
        n0 = _interior_norm(f, P, src)
        n1 = _interior_norm(g, P, dst)
        row = {"theta": theta, "data_norm": n0, "data_norm_theta": n1, "data_deviation": abs(n1 - n0) / max(n0, 1e-300), "lost_energy": lost}
        if cfg is not None and f.c == f.n:
            u, _ = picard_solve(f, cfg)
            G = leray_project(g)
            G = SpectralField(G.n, f.N, _crop(G, f.N), f.N // 3)
            shifted = replace(cfg, ring_lo=cfg.ring_lo + d, ring_hi=cfg.ring_hi + d, quadrature_ring=cfg.finest_ring + d)
            v, _ = picard_solve(G, shifted)
            m0 = microlocal_norm(u, P)
            m1 = microlocal_norm(v, P)
            row.update({"solution_norm": m0, "solution_norm_theta": m1, "solution_deviation": abs(m1 - m0) / max(m0, 1e-300)})
        out.append(row)
    return {"rows": out}


def _crop(G: SpectralField, N: int) -> np.ndarray:
    return truncate(pad_spectrum(G, N), N // 3).data
