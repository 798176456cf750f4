import numpy as np
import pytest
from hypothesis import given, strategies as st

from besovns.grid_field import GridField, SpectralField, forward_transform, spectral_product
from besovns.meyer_wavelet import (
    WaveletCoeffs,
    analyze,
    build_system,
    eps_tuple,
    polynomial_profile,
    project_band,
    support_ring_check,
    synthesize,
    system_for,
)
from besovns.samples import random_band_field


def wavelet(W, e, j, k):
    c = WaveletCoeffs.zeros(W.n, W.J)
    c.detail[j][(e,) + tuple(k)] = 1.0
    return synthesize(c, W, spectral=True)


def random_index(rng, W):
    j = int(rng.integers(0, W.j_max + 1))
    e = int(rng.integers(0, W.n_eps))
    k = tuple(int(x) for x in rng.integers(0, 2**j, size=W.n))
    return e, j, k


@pytest.mark.parametrize("profile", ["bump", "poly"])
def test_window_examples(profile):
    W = build_system(1, 6, profile)
    assert W.phi0(0.0) == 1.0
    xi = np.linspace(0, 2 * np.pi / 3, 50)
    assert np.all(W.phi(xi) == 0.0)
    assert np.all(W.phi0(np.linspace(4 * np.pi / 3, 8, 20)) == 0.0)
    for x in (0.7 * np.pi, 0.9 * np.pi, 1.2 * np.pi):
        assert abs(W.phi(x) ** 2 + W.phi(2 * np.pi - x) ** 2 - 1.0) < 1e-12
    v = W.phi0(np.linspace(0, 8, 400))
    assert np.all((v >= 0) & (v <= 1))


def test_partition_of_unity_per_axis():
    W = build_system(1, 7)
    k = np.arange(1, W.complete_kmax + 1)
    total = W.phi0(2 * np.pi * k) ** 2
    for j in range(W.j_max + 1):
        total = total + W.phi(2 * np.pi * k / 2**j) ** 2
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_profile_self_check_rejects_rough_profile():
    with pytest.raises(ValueError):
        build_system(2, 5, lambda x: np.clip(x, 0, 1))
    with pytest.raises(ValueError):
        build_system(2, 3)
    with pytest.raises(ValueError):
        build_system(2, 5, "no-such-profile")
    W = build_system(2, 5, polynomial_profile)
    assert W.j_max == 3


def test_system_for_covers_kmax():
    W = system_for(2, 32, 10)
    assert W.N == 64 and W.complete_kmax >= 10
    assert system_for(2, 32, 5).N == 32


def test_zero_field_zero_coeffs():
    W = build_system(2, 5)
    c = analyze(GridField(2, 32, np.zeros((32, 32))), W)
    assert c.energy() == 0.0
    assert np.all(synthesize(c, W).data == 0)


def test_coefficient_counts():
    c = WaveletCoeffs.zeros(3, 5)
    for j, band in c.bands():
        assert band.shape == (7,) + (2**j,) * 3


def test_single_wavelet_analysis(rng):
    W = build_system(2, 6)
    for _ in range(5):
        e, j, k = random_index(rng, W)
        F = wavelet(W, e, j, k)
        assert abs(np.sum(np.abs(F.data) ** 2) - 1.0) < 1e-10
        c = analyze(F, W)
        assert abs(c.detail[j][(e,) + k] - 1.0) < 1e-10
        c.detail[j][(e,) + k] = 0.0
        assert c.energy() < 1e-20


@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_parseval_and_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    J = 5 if n < 3 else 4
    W = build_system(n, J)
    F = random_band_field(n, 2**J, rng, W.complete_kmax)
    F = F.with_data(F.data + 0.3 * (np.indices((2**J,) * n).sum(0) == 0))
    c = analyze(F, W)
    norm2 = np.sum(np.abs(F.data) ** 2)
    assert abs(c.energy() - norm2) <= 1e-10 * norm2
    back = synthesize(c, W, spectral=True)
    assert np.max(np.abs(back.data - F.data)) <= 1e-10 * np.max(np.abs(F.data))


def test_analyze_rejects_inadmissible(rng):
    W = build_system(2, 5)
    F = forward_transform(GridField(2, 32, rng.standard_normal((32, 32))))
    with pytest.raises(ValueError):
        analyze(F, W)


def test_synthesize_rejects_layout_mismatch():
    W = build_system(2, 5)
    with pytest.raises(ValueError):
        synthesize(WaveletCoeffs.zeros(2, 6), W)


def test_projection_identities(rng):
    W = build_system(2, 6)
    F = random_band_field(2, 64, rng, W.complete_kmax)
    acc = project_band(F, W, "P", 0).data.copy()
    for j in range(W.j_max + 1):
        acc += project_band(F, W, "Q", j).data
    assert np.max(np.abs(acc - F.data)) < 1e-12
    for j in range(W.j_max + 1):
        Q = project_band(F, W, "Q", j)
        assert np.max(np.abs(project_band(Q, W, "Q", j).data - Q.data)) < 1e-12
        for jp in range(W.j_max + 1):
            if abs(j - jp) >= 2:
                QQ = project_band(Q, W, "Q", jp)
                assert np.max(np.abs(QQ.data)) < 1e-13
    e, j, k = random_index(rng, W)
    psi = wavelet(W, e, j, k)
    assert np.max(np.abs(project_band(psi, W, "Q", j).data - psi.data)) < 1e-12
    assert np.max(np.abs(project_band(psi, W, "Qe", j, eps_tuple(e, 2)).data - psi.data)) < 1e-12


def test_projection_rejects_bad_band(rng):
    W = build_system(2, 5)
    F = random_band_field(2, 32, rng, W.complete_kmax)
    with pytest.raises(ValueError):
        project_band(F, W, "Q", W.j_max + 1)
    with pytest.raises(ValueError):
        project_band(F, W, "Z", 1)


def test_top_projection_is_identity(rng):
    W = build_system(2, 6)
    F = random_band_field(2, 64, rng, W.complete_kmax)
    P = project_band(F, W, "P", W.j_max + 1)
    assert np.max(np.abs(P.data - F.data)) < 1e-12


def test_orthonormality_sample(rng):
    W = build_system(2, 6)
    cache = {}
    for _ in range(100):
        a, b = random_index(rng, W), random_index(rng, W)
        if rng.random() < 0.3:
            b = a
        for idx in (a, b):
            if idx not in cache:
                cache[idx] = wavelet(W, *idx).data[0]
        ip = np.vdot(cache[a], cache[b]).real
        assert abs(ip - (1.0 if a == b else 0.0)) < 1e-10


def test_support_rings(rng):
    W = build_system(2, 7)
    u = random_band_field(2, 128, rng, W.complete_kmax)
    v = random_band_field(2, 128, rng, W.complete_kmax)
    for j in range(2, W.j_max + 1):
        Pu = project_band(u, W, "P", j - 2)
        assert support_ring_check(Pu, j, "P") < 1e-24
        for e in range(W.n_eps):
            eps = eps_tuple(e, 2)
            Qv = project_band(v, W, "Qe", j, eps)
            assert support_ring_check(Qv, j, "Q", eps) < 1e-24
            prod = spectral_product(Pu, Qv, 128 // 2 - 1)
            total = np.sum(np.abs(prod.data) ** 2)
            assert support_ring_check(prod, j, "product", eps) <= 1e-12 * max(total, 1e-300)


def test_support_ring_detects_leakage():
    data = np.zeros((1, 32, 32), dtype=complex)
    data[0, 10, 0] = data[0, -10, 0] = 1.0
    F = SpectralField(2, 32, data, 16)
    assert support_ring_check(F, 2, "P") == pytest.approx(2.0)
