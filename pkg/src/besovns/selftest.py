"""Fast invariant checks behind the ``selftest`` subcommand."""

from __future__ import annotations

import numpy as np

from .flows import bilinear_trajectory, bony_decompose, heat_flow, heat_semigroup
from .grid_field import divergence, spectral_product
from .lorentz_spaces import weak_lorentz_values
from .meyer_wavelet import analyze, build_system, project_band, synthesize
from .ns_solver import SolverConfig, picard_solve, taylor_green_field
from .samples import random_band_field, random_divfree_field


def _row(name: str, value: float, tol: float) -> dict:
    return {"record": "check", "name": name, "value": float(value), "tol": tol, "passed": bool(value <= tol)}


def run_selftest(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    W = build_system(2, 5)
    F = random_band_field(2, 32, rng, W.complete_kmax)
    c = analyze(F, W)
    rec = synthesize(c, W, spectral=True)
    rows.append(_row("reconstruction", np.max(np.abs(rec.data - F.data)), 1e-12))
    rows.append(_row("parseval", abs(c.energy() - np.sum(np.abs(F.data) ** 2)), 1e-12))
    acc = project_band(F, W, "P", 0).data.copy()
    for j in range(W.j_max + 1):
        acc += project_band(F, W, "Q", j).data
    rows.append(_row("partition_of_unity", np.max(np.abs(acc - F.data)), 1e-12))

    vals = rng.random(64)
    vol = 1.0 / 64
    fast = weak_lorentz_values(vals, vol, 2.0)
    lams = np.sort(vals)
    brute = max(lam * (np.sum(vals >= lam) * vol) ** 0.5 for lam in lams)
    rows.append(_row("weak_lorentz_order_statistic", abs(fast - brute), 1e-14))

    h1 = heat_semigroup(heat_semigroup(F, 0.01), 0.02)
    h2 = heat_semigroup(F, 0.03)
    rows.append(_row("heat_semigroup", np.max(np.abs(h1.data - h2.data)), 1e-12))

    G = random_band_field(2, 32, rng, W.complete_kmax)
    parts = bony_decompose(F, G, W)
    total = sum(p.data for p in parts.values())
    ref = spectral_product(F, G)
    rows.append(_row("bony_sum", np.max(np.abs(total - ref.data)) / np.max(np.abs(ref.data)), 1e-10))

    U = random_divfree_field(2, 32, rng, 3)
    T = heat_flow(U, 3, 5, 4)
    B = bilinear_trajectory(T, T)
    div = max(np.sqrt(np.sum(np.abs(divergence(B.field(i))) ** 2)) for i in range(len(B.times)))
    scale = max(np.sqrt(np.sum(np.abs(B.data[i]) ** 2)) for i in range(len(B.times)))
    rows.append(_row("bilinear_divergence", div / max(scale, 1e-300), 1e-10))

    cfg = SolverConfig(n=2, N=32, ring_lo=3, ring_hi=5, S=4)
    f = taylor_green_field(32)
    u, _ = picard_solve(f, cfg, track_micro=False)
    exact = np.stack([f.data * np.exp(-8 * np.pi**2 * t) for t in u.times])
    err = np.max(np.sqrt(np.sum(np.abs(u.data - exact) ** 2, axis=(1, 2, 3))))
    rows.append(_row("taylor_green", err, 1e-10))
    return rows
