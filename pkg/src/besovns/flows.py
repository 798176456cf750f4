"""
Heat semigroup, Duhamel kernels, ring quadrature, Bony decomposition and the
bilinear flows built from them.

All Duhamel integrals are evaluated at every stored time of a trajectory by
the recursion  I(t_{i+1}) = e^{-a Delta_i} I(t_i) + panel_i,  with
a = |2 pi k|^2 and the heat factor integrated exactly on each panel.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .grid_field import (
    GridField,
    SpectralField,
    _ksq,
    forward_transform,
    inverse_transform,
    leray_project,
    padded_physical,
    spectrum_from_padded,
    spectral_extent,
    spectral_product,
    wavenumbers,
)
from .meyer_wavelet import WaveletSystem, _as_spectral, _project_hat, system_for
from .trajectory import Trajectory, ring_times

__all__ = [
    "Trajectory",
    "heat_factor",
    "heat_semigroup",
    "heat_flow",
    "duhamel_symbol",
    "duhamel_apply",
    "ring_quadrature",
    "duhamel_integrate",
    "coeff_decay_check",
    "neighbor_sums",
    "bony_decompose",
    "product_integrand",
    "product_flow",
    "paraproduct_flow",
    "couple_flow",
    "paraproduct_trajectory",
    "couple_trajectory",
    "nonlinear_term",
    "bilinear_trajectory",
    "bilinear_B",
    "bilinear_from_parts",
    "scaling_bound",
]

FOUR_PI_SQ = 4.0 * np.pi**2


def heat_factor(n: int, N: int, t: float) -> np.ndarray:
    return np.exp(-FOUR_PI_SQ * t * _ksq(n, N))


def heat_semigroup(f: SpectralField, t: float) -> SpectralField:
    """e^{t Delta} f, symbol exp(-|2 pi k|^2 t)."""
    if t < 0:
        raise ValueError(f"negative time {t}")
    return f.with_data(f.data * heat_factor(f.n, f.N, t))


def heat_flow(
    f: SpectralField,
    ring_lo: int,
    ring_hi: int,
    S: int = 4,
    has_origin: bool = True,
) -> Trajectory:
    """Heat-flow trajectory of f sampled on the rings [ring_lo, ring_hi]."""
    times, _ = ring_times(ring_lo, ring_hi, S)
    if has_origin:
        times = np.r_[0.0, times]
    ksq = _ksq(f.n, f.N)
    data = np.stack([f.data * np.exp(-FOUR_PI_SQ * t * ksq) for t in times])
    return Trajectory(f.n, f.N, f.kmax, ring_lo, ring_hi, S, times, data, has_origin)


def duhamel_symbol(n: int, N: int, kind: str, axes: Sequence[int]) -> np.ndarray:
    """
    Time-independent part of A_l = d_l (``"A1"``, one axis) or
    A_{l,l',l''} = d_l d_l' d_l'' (-Delta)^{-1} (``"A3"``, three axes); zero at k = 0.
    Axes are 1-based.
    """
    ks = wavenumbers(n, N)
    axes = list(axes)
    if any(not (1 <= a <= n) for a in axes):
        raise ValueError(f"axes must lie in 1..{n}")
    if kind == "A1":
        if len(axes) != 1:
            raise ValueError("A1 takes one axis")
        return 2j * np.pi * ks[axes[0] - 1] * np.ones((N,) * n)
    if kind == "A3":
        if len(axes) != 3:
            raise ValueError("A3 takes three axes")
        ksq = _ksq(n, N)
        inv = np.zeros_like(ksq)
        inv[ksq > 0] = 1.0 / (FOUR_PI_SQ * ksq[ksq > 0])
        sym = np.ones((N,) * n, dtype=np.complex128)
        for a in axes:
            sym = sym * (2j * np.pi * ks[a - 1])
        return sym * inv
    raise ValueError(f"unknown kernel kind {kind!r}")


def duhamel_apply(g: SpectralField, t: float, s: float, kind: str, axes: Sequence[int]) -> SpectralField:
    """Apply e^{(t-s) Delta} times the A1 / A3 derivative symbol."""
    if t < s:
        raise ValueError(f"need t >= s, got t={t}, s={s}")
    if s < 0:
        raise ValueError("negative time")
    sym = duhamel_symbol(g.n, g.N, kind, axes) * heat_factor(g.n, g.N, t - s)
    return g.with_data(g.data * sym)


def ring_quadrature(values: np.ndarray, times: np.ndarray, t: Optional[float] = None) -> np.ndarray:
    """
    Composite trapezoid of node values over [0, t] (default: the last node).
    The first node must be s = 0.
    """
    values = np.asarray(values)
    times = np.asarray(times, dtype=np.float64)
    if times.size < 2:
        raise ValueError("empty coverage: need at least two nodes")
    if times[0] != 0.0:
        raise ValueError("coverage gap: quadrature nodes must start at s = 0")
    if t is None:
        t = times[-1]
    i = int(np.searchsorted(times, t))
    if i >= times.size or not np.isclose(times[i], t, rtol=1e-14, atol=0):
        raise ValueError(f"t={t} is not a quadrature node")
    if i == 0:
        return np.zeros_like(values[0])
    dt = np.diff(times[: i + 1]).reshape((-1,) + (1,) * (values.ndim - 1))
    return np.sum(0.5 * dt * (values[:i] + values[1 : i + 1]), axis=0)


def _g1(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        big = -np.expm1(-x) / x
    small = 1.0 - x / 2 + x**2 / 6 - x**3 / 24 + x**4 / 120
    return np.where(x < 1e-3, small, big)


def _g2(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        big = (1.0 - np.exp(-x) * (1.0 + x)) / x**2
    small = 0.5 - x / 3 + x**2 / 8 - x**3 / 30 + x**4 / 144
    return np.where(x < 1e-2, small, big)


def _panel(Ni: np.ndarray, Nj: np.ndarray, a: np.ndarray, dt: float, interp: str) -> np.ndarray:
    """int_0^dt e^{-a(dt - s)} N(s) ds for N interpolated between Ni and Nj."""
    x = a * dt
    lin = dt * (_g2(x) * Ni + (_g1(x) - _g2(x)) * Nj)
    if interp == "linear":
        return lin
    scale = max(np.max(np.abs(Ni), initial=0.0), np.max(np.abs(Nj), initial=0.0))
    if scale == 0.0:
        return lin
    tiny = 1e-14 * scale
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = Nj / Ni
        ok = (np.abs(Ni) > tiny) & (np.abs(Nj) > tiny) & (np.abs(np.angle(r)) < np.pi / 2)
        logr = np.log(np.where(ok, r, 1.0))
        z = x + logr
        E = np.exp(-x)
        far = Ni * (np.where(ok, r, 1.0) - E) * dt / np.where(np.abs(z) > 1e-3, z, 1.0)
        near = Ni * E * dt * (1.0 + z / 2 + z**2 / 6 + z**3 / 24)
        geo = np.where(np.abs(z) > 1e-3, far, near)
    return np.where(ok, geo, lin)


def duhamel_integrate(
    values: np.ndarray,
    times: np.ndarray,
    n: int,
    N: int,
    symbol: Optional[np.ndarray] = None,
    interp: str = "geometric",
) -> np.ndarray:
    """
    int_0^{t_i} e^{(t_i - s) Delta} sigma N(s) ds at every node t_i.

    ``values`` has shape (T, c) + (N,)*n.  Within each panel N(s) is
    interpolated per mode (``"geometric"``: exactly exponential between the
    two samples when their ratio is well defined, else linear; ``"linear"``),
    and the heat factor is integrated in closed form.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.size < 2:
        raise ValueError("empty coverage")
    if times[0] != 0.0:
        raise ValueError("coverage gap: integrand must be sampled at s = 0")
    a = FOUR_PI_SQ * _ksq(n, N)
    out = np.zeros(values.shape, dtype=np.complex128)
    for i in range(times.size - 1):
        dt = times[i + 1] - times[i]
        out[i + 1] = np.exp(-a * dt) * out[i] + _panel(values[i], values[i + 1], a, dt, interp)
    if symbol is not None:
        out = out * symbol
    return out


def neighbor_sums(c0, j: int, N_decay: float) -> np.ndarray:
    """
    sum over eps', |j - j'| <= 1, k' of |f^{eps'}_{j',k'}| (1 + |2^{j-j'} k' - k|)^{-N},
    distances periodic mod 2^j; shape (2^j,)*n.
    """
    n = c0.n
    total = np.zeros((2**j,) * n)
    k = np.arange(2**j, dtype=np.float64)
    for jp in (j - 1, j, j + 1):
        if not (0 <= jp <= c0.j_max):
            continue
        w = np.sum(np.abs(c0.detail[jp]), axis=0).ravel()
        kp = np.arange(2**jp, dtype=np.float64)
        diff = 2.0 ** (j - jp) * kp[None, :] - k[:, None]
        diff = (diff + 2**j / 2.0) % 2**j - 2**j / 2.0
        d2 = np.zeros((2**j,) * n + (2**jp,) * n)
        for ax in range(n):
            shape = [1] * (2 * n)
            shape[ax] = 2**j
            shape[n + ax] = 2**jp
            d2 = d2 + diff.reshape(shape) ** 2
        kern = (1.0 + np.sqrt(d2)) ** (-N_decay)
        total += (kern.reshape((2**j) ** n, -1) @ w).reshape((2**j,) * n)
    return total


def coeff_decay_check(
    T: Trajectory,
    N_decay: Optional[float] = None,
    c_tilde: Optional[float] = None,
    W: Optional[WaveletSystem] = None,
    floor: float = 1e-12,
    bands: Optional[Sequence[int]] = None,
) -> dict:
    """
    Fit |f^eps_{j,k}(t)| <= C e^{-c t 4^j} S_{j,k} (t 4^j >= 1) and the
    undamped bound |f^eps_{j,k}(t)| <= C0 S_{j,k} (t 4^j <= 1), where S is the
    initial-coefficient neighbour sum.  The rate c is the negated slope of a
    least-squares line through the per-(t, j) upper envelope of
    log(|f(t)| / S); pass ``c_tilde`` to measure C at a fixed rate.
    ``bands`` restricts the check (default: every band of W).
    """
    if not T.has_origin:
        raise ValueError("decay check needs the t = 0 sample")
    W = W or system_for(T.n, T.N, T.kmax)
    N_decay = 2 * T.n + 2 if N_decay is None else N_decay
    coeffs = T.coefficients(W)
    xs, ys, x_small, y_small = [], [], [], []
    for a in range(T.c):
        c0 = coeffs[0][a]
        scale = max((np.max(np.abs(d)) for d in c0.detail), default=0.0)
        if scale == 0.0:
            continue
        for j in range(W.j_max + 1) if bands is None else bands:
            S = neighbor_sums(c0, j, N_decay)
            for i in range(1, len(T.times)):
                ft = np.abs(coeffs[i][a].detail[j])
                mask = (ft > floor * scale) & (S[None] > 0)
                if not np.any(mask):
                    continue
                y = float(np.max(np.log(ft[mask] / np.broadcast_to(S[None], ft.shape)[mask])))
                x = T.times[i] * 4.0**j
                (xs if x >= 1.0 else x_small).append(x)
                (ys if x >= 1.0 else y_small).append(y)
    report = {"c_tilde": None, "C": None, "C0": None, "n_points": len(xs), "passed": True}
    if y_small:
        report["C0"] = float(np.exp(max(y_small)))
    if len(xs) >= 2:
        xs_a, ys_a = np.array(xs), np.array(ys)
        if c_tilde is None:
            slope = np.polyfit(xs_a, ys_a, 1)[0]
            c_tilde = float(-slope)
        report["c_tilde"] = float(c_tilde)
        report["C"] = float(np.exp(np.max(ys_a + c_tilde * xs_a)))
        report["passed"] = bool(c_tilde > 0)
    return report


def _check_pair(u: Trajectory, v: Trajectory) -> None:
    if (u.n, u.N) != (v.n, v.N) or not np.array_equal(u.times, v.times):
        raise ValueError("trajectories must share grid and time layout")
    if not u.has_origin:
        raise ValueError("coverage gap: trajectories must include t = 0")


def _band_pieces(uhat: np.ndarray, W: WaveletSystem) -> tuple[list, list]:
    """Q_j u for j = 0..j_max and P_{j-2} u for j = 0..j_max."""
    Q = [_project_hat(uhat, W, "Q", j) for j in range(W.j_max + 1)]
    P0 = _project_hat(uhat, W, "P", 0)
    P = []
    for j in range(W.j_max + 1):
        acc = P0.copy()
        for jj in range(0, j - 2):
            acc = acc + Q[jj]
        P.append(acc)
    return Q, P


def _prod(a: np.ndarray, b: np.ndarray, W: WaveletSystem) -> np.ndarray:
    A = SpectralField(W.n, W.N, a[None], W.N // 2)
    B = SpectralField(W.n, W.N, b[None], W.N // 2)
    return spectral_product(A, B, W.N // 3).data[0]


PARTS = ("couple", "near", "para_u", "para_v")


def _parts_hat(uhat: np.ndarray, vhat: np.ndarray, W: WaveletSystem, which: Iterable[str]) -> dict:
    Qu, Pu = _band_pieces(uhat, W)
    Qv, Pv = _band_pieces(vhat, W)
    J = W.j_max + 1
    out = {}
    zero = np.zeros_like(uhat)
    for name in which:
        acc = zero.copy()
        if name == "couple":
            for j in range(J):
                acc += _prod(Qu[j], Qv[j], W)
        elif name == "near":
            for j in range(J):
                for jp in range(J):
                    if 0 < abs(j - jp) <= 2:
                        acc += _prod(Qu[j], Qv[jp], W)
        elif name == "paraproduct":
            for j in range(J):
                acc += _prod(Pu[j], Qv[j], W)
        elif name == "para_u":
            for j in range(J):
                acc += _prod(Pu[j], Qv[j], W)
            acc += _prod(Pu[0], _project_hat(vhat, W, "P", 0), W)
        elif name == "para_v":
            for j in range(J):
                acc += _prod(Qu[j], Pv[j], W)
        else:
            raise ValueError(f"unknown product part {name!r}")
        out[name] = acc
    return out


def bony_decompose(u, v, W: Optional[WaveletSystem] = None) -> dict:
    """
    Split uv into ``couple`` (sum Q_j u Q_j v), ``near`` (0 < |j-j'| <= 2),
    ``para_u`` (sum P_{j-2}u Q_j v, plus the mean product) and ``para_v``
    (sum Q_j u P_{j-2} v).  Scalar fields; both must lie in the band the
    system reproduces exactly.  Returned fields have the input type.
    """
    grid = isinstance(u, GridField)
    U = forward_transform(u) if grid else u
    V = forward_transform(v) if isinstance(v, GridField) else v
    if (U.n, U.N, U.c) != (V.n, V.N, V.c) or U.c != 1:
        raise ValueError("bony_decompose needs two scalar fields on the same grid")
    W = W or build_default(U, V)
    for F in (U, V):
        if spectral_extent(F) > W.complete_kmax:
            raise ValueError("field spectrum exceeds the complete band of the wavelet system")
    uhat = _as_spectral(U, W).data[0]
    vhat = _as_spectral(V, W).data[0]
    parts = _parts_hat(uhat, vhat, W, PARTS)
    out = {}
    for name, data in parts.items():
        F = SpectralField(W.n, W.N, data[None], W.N // 3)
        out[name] = inverse_transform(F) if grid else F
    return out


def build_default(U: SpectralField, V: SpectralField) -> WaveletSystem:
    ext = max(spectral_extent(U), spectral_extent(V))
    return system_for(U.n, U.N, ext)


def product_integrand(u: Trajectory, v: Trajectory, part: str, W: WaveletSystem) -> np.ndarray:
    """Node values of one Bony part (or ``"paraproduct"``) of u v, shape (T, 1) + (W.N,)*n."""
    _check_pair(u, v)
    if u.c != 1 or v.c != 1:
        raise ValueError("product flows take scalar trajectories")
    vals = []
    for i in range(len(u.times)):
        uh = _as_spectral(u.field(i), W).data[0]
        vh = _as_spectral(v.field(i), W).data[0]
        if part == "all":
            vals.append(_prod(uh, vh, W))
        else:
            vals.append(_parts_hat(uh, vh, W, [part])[part])
    return np.stack(vals)[:, None]


def product_flow(
    u: Trajectory,
    v: Trajectory,
    kind: str,
    axes: Sequence[int],
    part: str = "all",
    W: Optional[WaveletSystem] = None,
    interp: str = "geometric",
) -> Trajectory:
    """
    Trajectory of int_0^t A(part of u v)(s) ds with A = A1 / A3 along ``axes``.
    ``part`` is ``"all"``, ``"paraproduct"`` or one of the Bony parts.
    Fields are taken on the system grid W.N.
    """
    W = W or system_for(u.n, u.N, max(u.kmax, v.kmax))
    if spectral_extent_traj(u) > W.complete_kmax or spectral_extent_traj(v) > W.complete_kmax:
        raise ValueError("trajectory spectrum exceeds the complete band of the wavelet system")
    vals = product_integrand(u, v, part, W)
    sym = duhamel_symbol(W.n, W.N, kind, axes)
    data = duhamel_integrate(vals, u.times, W.n, W.N, sym, interp)
    return Trajectory(W.n, W.N, W.N // 3, u.ring_lo, u.ring_hi, u.samples_per_ring, u.times, data, True)


def spectral_extent_traj(T: Trajectory) -> int:
    amp = np.max(np.abs(T.data), axis=(0, 1))[None]
    return spectral_extent(SpectralField(T.n, T.N, amp, T.N // 2))


def _at_time(T: Trajectory, t: float) -> GridField:
    idx = np.nonzero(np.isclose(T.times, t, rtol=1e-14, atol=0))[0]
    if idx.size == 0:
        raise ValueError(f"t={t} is not a stored time")
    return inverse_transform(T.field(int(idx[0])))


def paraproduct_trajectory(u, v, kind="A1", axes=(1,), W=None, interp="geometric") -> Trajectory:
    """P_l / P_{l,l',l''}: Duhamel flow of sum_j P_{j-2}u Q_j v."""
    return product_flow(u, v, kind, axes, "paraproduct", W, interp)


def couple_trajectory(u, v, kind="A1", axes=(1,), W=None, interp="geometric") -> Trajectory:
    """C_l / C_{l,l',l''}: Duhamel flow of sum_j Q_j u Q_j v."""
    return product_flow(u, v, kind, axes, "couple", W, interp)


def paraproduct_flow(u, v, t, kind="A1", axes=(1,), W=None) -> GridField:
    return _at_time(paraproduct_trajectory(u, v, kind, axes, W), t)


def couple_flow(u, v, t, kind="A1", axes=(1,), W=None) -> GridField:
    return _at_time(couple_trajectory(u, v, kind, axes, W), t)


def nonlinear_term(U: SpectralField, V: SpectralField) -> SpectralField:
    """Leray projection of div(u (x) v), i.e. P sum_l d_l (u_l v)."""
    if U.c != U.n or V.c != V.n:
        raise ValueError("nonlinear term needs vector fields")
    n, N = U.n, U.N
    M = 2 * N
    u = padded_physical(U, M)
    v = u if V is U else padded_physical(V, M)
    ks = wavenumbers(n, N)
    acc = np.zeros(V.data.shape, dtype=np.complex128)
    kmax = N // 3
    for l in range(n):
        prod = spectrum_from_padded(u[l][None] * v, n, N, kmax)
        acc += 2j * np.pi * ks[l] * prod.data
    return leray_project(SpectralField(n, N, acc, kmax))


def bilinear_trajectory(u: Trajectory, v: Trajectory, interp: str = "geometric") -> Trajectory:
    """B(u, v)(t) = int_0^t e^{(t-s) Delta} P div(u (x) v) ds at every stored time."""
    _check_pair(u, v)
    vals = np.stack([nonlinear_term(u.field(i), v.field(i)).data for i in range(len(u.times))])
    data = duhamel_integrate(vals, u.times, u.n, u.N, None, interp)
    return u.with_data(data, kmax=u.N // 3)


def bilinear_B(u: Trajectory, v: Trajectory, t: float) -> GridField:
    return _at_time(bilinear_trajectory(u, v), t)


def bilinear_from_parts(
    u: Trajectory,
    v: Trajectory,
    l: int,
    W: Optional[WaveletSystem] = None,
    kind: str = "A1",
    axes: Optional[Sequence[int]] = None,
    interp: str = "linear",
) -> tuple[Trajectory, Trajectory]:
    """
    B_l(u, v) (or B_{l,l',l''}) from the plain product and from the sum of the
    four Bony parts, for scalar trajectories.  The default linear panel rule
    is additive in the integrand, so both results agree to rounding; the
    geometric rule is not.
    """
    axes = (l,) if axes is None else axes
    W = W or system_for(u.n, u.N, max(u.kmax, v.kmax))
    plain = product_flow(u, v, kind, axes, "all", W, interp)
    acc = None
    for part in PARTS:
        p = product_flow(u, v, kind, axes, part, W, interp)
        acc = p.data if acc is None else acc + p.data
    return plain, plain.with_data(acc)


def scaling_bound(T: Trajectory, P=None, W: Optional[WaveletSystem] = None) -> float:
    """max over t > 0 and bands with t 4^j >= 1 of t^{1/2} sup_k 2^{nj/2} |f^0_{j,k}(t)|."""
    from .lorentz_spaces import SpaceParams, decay_profile

    prof = decay_profile(T, P or SpaceParams(), W)
    best = 0.0
    for i, t in enumerate(prof["times"]):
        if t <= 0:
            continue
        for j in prof["bands"]:
            if t * 4.0**j >= 1.0:
                best = max(best, float(np.sqrt(t) * prof["scaling_max"][i, j]))
    return best
