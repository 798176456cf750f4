
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from besovns.grid_field import GridField
from besovns.lorentz_spaces import (
    INF,
    BandProfile,
    SpaceParams,
    band_profile,
    band_values,
    besov_lorentz_norm,
    besov_norm,
    cross_scale_sum,
    cross_scale_sums,
    dyadic_lorentz_sum,
    dyadic_rescale,
    hl_maximal,
    lemma26_constant,
    maximal_weak_ratio,
    microlocal_norm,
    microlocal_table,
    triebel_lizorkin_lorentz_norm,
    weak_lorentz_norm,
    weak_lorentz_values,
)
from besovns.meyer_wavelet import WaveletCoeffs, build_system, synthesize
from besovns.trajectory import Trajectory, ring_times


def brute_weak(values, volume, p):
    """sup over lambda (each achieved value and the float just below it)."""
    v = np.asarray(values, dtype=float).ravel()
    best = 0.0
    for lam in np.r_[v, np.nextafter(v, -np.inf)]:
        if lam > 0:
            best = max(best, lam * (np.sum(v > lam) * volume) ** (1.0 / p))
    return best


def continuous_lorentz(values, volume, p, r):
    """(r int lambda^{r-1} mu(lambda)^{r/p} dlambda)^{1/r}, exact for step functions."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    v = v[v > 0]
    total, prev = 0.0, 0.0
    for i, x in enumerate(v):
        total += (x**r - prev**r) * ((v.size - i) * volume) ** (r / p)
        prev = x
    return total ** (1.0 / r)


def random_coeffs(rng, n, J, top=None):
    c = WaveletCoeffs.zeros(n, J)
    top = c.j_max if top is None else top
    for j in range(top + 1):
        c.detail[j] = rng.standard_normal(c.detail[j].shape) * 2.0**-j
    return c


def test_params_validation():
    for bad in (dict(p=1.0), dict(p=INF), dict(q=0.5), dict(r=0.9), dict(m=0.0), dict(mprime=-1)):
        with pytest.raises(ValueError):
            SpaceParams(**bad)
    P = SpaceParams(p=4.0)
    assert P.smoothness(3) == pytest.approx(-0.25)
    assert P.critical
    assert SpaceParams(m=1.25, mprime=0.25).wellposed_preset()
    assert not SpaceParams(q=INF, mprime=0.0).wellposed_preset()
    assert not SpaceParams(m=0.9).wellposed_preset()


def test_band_profile_examples():
    c = WaveletCoeffs.zeros(2, 6)
    assert np.all(band_profile(c, 2).values == 0)
    c.detail[2][1, 0, 0] = 1.0
    b = band_profile(c, 2)
    assert b.values.size == 16
    assert b.values[0] == pytest.approx(4.0) and np.all(b.values[1:] == 0)
    c.detail[2][1, 0, 0] = 0.5
    c.detail[2][2, 0, 0] = 0.5
    assert band_values(c, 2)[0, 0] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        band_values(c, 9)


def test_weak_norm_examples():
    # one cube value a, volume 2^{-nj}
    b = BandProfile(3, 2, np.r_[5.0, np.zeros(63)])
    assert weak_lorentz_norm(b, 2.0) == pytest.approx(5.0 * 2.0 ** (-6 / 2))
    assert weak_lorentz_values(np.array([2.0, 1.0, 0, 0]), 0.25, 1.0) == pytest.approx(0.5)
    assert weak_lorentz_values(np.full(7, 3.0), 2.0**-6, 1.5) == pytest.approx(3.0 * (7 * 2.0**-6) ** (1 / 1.5))
    assert weak_lorentz_norm(BandProfile(0, 2, np.zeros(0)), 2.0) == 0.0
    with pytest.raises(ValueError):
        weak_lorentz_norm(b, 1.0)


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 100)), st.floats(1.1, 6.0))
def test_weak_norm_matches_brute_force(v, p):
    vol = 1.0 / v.size
    fast = weak_lorentz_values(v, vol, p)
    assert fast == pytest.approx(brute_weak(v, vol, p), rel=1e-12, abs=1e-300)
    # Chebyshev
    assert fast <= (np.sum(v**p) * vol) ** (1 / p) * (1 + 1e-12)


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(1e-3, 100)), st.floats(1.1, 4.0), st.floats(1.0, 4.0))
def test_dyadic_sum_brackets_continuous_norm(v, p, r):
    vol = 1.0 / v.size
    D = dyadic_lorentz_sum(v, vol, p, r)
    C = continuous_lorentz(v, vol, p, r)
    lo = (1 - 2.0**-r) ** (1 / r)
    assert lo * D * (1 - 1e-9) <= C <= 2 * lo * D * (1 + 1e-9)


def test_besov_norm_examples(rng):
    P = SpaceParams(p=2.0, q=2.0)
    c = WaveletCoeffs.zeros(2, 6)
    assert besov_norm(c, P) == 0.0 and besov_lorentz_norm(c, P) == 0.0
    n, j = 2, 3
    c.detail[j][0, 0, 0] = 1.0
    s = P.smoothness(n)
    expect = 2.0 ** (j * (s + n / 2 - n / P.p))
    assert besov_norm(c, P) == pytest.approx(expect)
    assert besov_lorentz_norm(c, SpaceParams(p=3.0, q=INF)) == pytest.approx(
        2.0 ** (j * (2 / 3 - 1 + 1 - 2 / 3))
    )


@pytest.mark.parametrize("n,p,q", [(2, 2.0, 2.0), (2, 3.0, INF), (3, 1.5, 1.0)])
def test_besov_index_shift(rng, n, p, q):
    J = 5 if n == 2 else 4
    P = SpaceParams(p=p, q=q)
    c = random_coeffs(rng, n, J, top=J - 3)
    shifted = WaveletCoeffs.zeros(n, J)
    for j in range(J - 2):
        shifted.detail[j + 1][(slice(None),) + (slice(0, 2**j),) * n] = c.detail[j]
    factor = 2.0 ** (P.smoothness(n) + n / 2 - n / p)
    assert besov_norm(shifted, P) == pytest.approx(factor * besov_norm(c, P), rel=1e-12)


@given(st.integers(0, 2**31 - 1), st.sampled_from([1.5, 2.0, 3.0]), st.sampled_from([1.0, 2.0, INF]), st.sampled_from([2, 3]))
def test_critical_rescale_invariance(seed, p, q, n):
    rng = np.random.default_rng(seed)
    J = 5 if n == 2 else 4
    P = SpaceParams(p=p, q=q)
    c = random_coeffs(rng, n, J, top=J - 3)
    up, lost = dyadic_rescale(c, 1)
    assert lost == 0.0
    a, b = besov_lorentz_norm(c, P), besov_lorentz_norm(up, P)
    assert abs(a - b) <= 1e-6 * a
    down, lost = dyadic_rescale(up, -1)
    assert lost == 0.0
    assert abs(besov_lorentz_norm(down, P) - a) <= 1e-6 * a


def test_tll_examples(rng):
    P = SpaceParams(p=2.0, q=2.0, r=2.0)
    c = WaveletCoeffs.zeros(2, 6)
    assert triebel_lizorkin_lorentz_norm(c, P) == 0.0
    c.detail[2] = rng.standard_normal(c.detail[2].shape)
    assert triebel_lizorkin_lorentz_norm(c, P) == pytest.approx(besov_lorentz_norm(c, P), rel=1e-12)
    Pw = SpaceParams(p=2.0, q=INF)
    assert triebel_lizorkin_lorentz_norm(c, Pw) == pytest.approx(besov_lorentz_norm(c, Pw), rel=1e-12)


def test_tll_random_brackets_continuous(rng):
    P = SpaceParams(p=2.0, q=2.0, r=2.0)
    c = random_coeffs(rng, 2, 5)
    s = P.smoothness(2)
    L = c.j_max
    acc = np.zeros((2**L,) * 2)
    for j in range(L + 1):
        vals = np.kron(2.0 ** (j * s) * band_values(c, j), np.ones((2 ** (L - j),) * 2))
        acc += vals**2
    C = continuous_lorentz(np.sqrt(acc), 2.0 ** (-2 * L), 2.0, 2.0)
    D = triebel_lizorkin_lorentz_norm(c, P)
    lo = (1 - 2.0**-2) ** 0.5
    assert lo * D <= C <= 2 * lo * D


def test_hl_maximal_examples(rng):
    f = GridField(2, 16, np.full((1, 16, 16), -2.5))
    for kind in ("dyadic", "uncentered"):
        assert np.allclose(hl_maximal(f, kind).data, 2.5)
    ind = np.zeros((1, 16, 16))
    ind[0, :4, :4] = 1.0
    M = hl_maximal(GridField(2, 16, ind)).data[0]
    assert np.all(M[:4, :4] == 1.0)
    assert M[15, 15] == pytest.approx(1 / 16)
    g = GridField(2, 16, rng.standard_normal((1, 16, 16)))
    Mg = hl_maximal(g).data
    assert np.all(Mg >= np.abs(g.data))
    assert np.all(hl_maximal(g, "uncentered").data >= Mg - 1e-14)
    with pytest.raises(ValueError):
        hl_maximal(GridField(2, 16, np.zeros((2, 16, 16))))
    with pytest.raises(ValueError):
        hl_maximal(g, "centered")


def test_maximal_weak_ratio_bounded(rng):
    for _ in range(5):
        g = GridField(2, 32, rng.standard_normal((1, 32, 32)))
        r = maximal_weak_ratio(g, 2.0)
        assert 1.0 <= r < 10.0
    assert maximal_weak_ratio(GridField(2, 16, np.zeros((1, 16, 16))), 2.0) == 0.0


def test_cross_scale_examples(rng):
    n, N = 2, 6.0
    c = WaveletCoeffs.zeros(n, 7)
    assert np.all(cross_scale_sums(c, 3, 2, N) == 0)
    c.detail[2][0, 0, 0] = 0.7
    for k in [(0, 0), (1, 0), (2, 3)]:
        expect = 2.0 ** (n * 2 / 2) * 0.7 * (1 + np.hypot(*(2.0 ** (2 - 4) * np.array(k)))) ** -N
        assert cross_scale_sum(c, 4, 2, k, N) == pytest.approx(expect, rel=1e-12)
    # j < j' branch
    c2 = WaveletCoeffs.zeros(n, 7)
    c2.detail[4][1, 0, 0] = 1.0
    expect = 2.0**4 * (1 + np.hypot(1.0, 0.0)) ** -N
    assert cross_scale_sum(c2, 2, 4, (1, 0), N) == pytest.approx(expect, rel=1e-12)
    with pytest.raises(ValueError):
        cross_scale_sums(c, 3, 2, 5.0)


def test_cross_scale_maximal_constant(rng):
    c = random_coeffs(rng, 2, 6)
    for j, jp in [(3, 1), (2, 3), (4, 4)]:
        C1 = lemma26_constant(c, j, jp, 6.0)
        C2 = lemma26_constant(c, j, jp, 12.0)
        assert 0 < C2 <= C1 < 100


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1, 1e3))
def test_shift_inequality(x, y, a):
    assert 1 + abs(x) <= 2 * (1 + abs(x - y)) * (1 + a * abs(y)) * (1 + 1e-12)


def test_power_subadditivity(rng):
    a = rng.exponential(size=(10**4, 5))
    r = rng.uniform(1e-3, 1.0, size=(10**4, 1))
    assert np.all(np.sum(a, axis=1, keepdims=True) ** r <= np.sum(a**r, axis=1, keepdims=True) * (1 + 1e-12))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_localization_bound_constant(rng, n):
    """(1+|2^{j'}x-k'|)^{-n-1}(1+|2^j x-k|)^{-N-n-1} <= C (1+|2^{j'-j}k-k'|)^{-n-1}(1+|2^j x-k|)^{-N}."""
    M = 10**4
    j = rng.integers(0, 6, M)
    jp = j - rng.integers(0, 4, M)
    x = rng.uniform(-4, 4, (M, n))
    k = rng.integers(-40, 40, (M, n))
    kp = rng.integers(-10, 10, (M, n))
    A = 1 + np.linalg.norm(2.0 ** jp[:, None] * x - kp, axis=1)
    B = 1 + np.linalg.norm(2.0 ** j[:, None] * x - k, axis=1)
    D = 1 + np.linalg.norm(2.0 ** (jp - j)[:, None] * k - kp, axis=1)
    consts = []
    for Nd in (2 * n + 2, 4 * n + 4):
        ratio = A ** (-n - 1) * B ** (-Nd - n - 1) / (D ** (-n - 1) * B ** (-Nd))
        consts.append(ratio.max())
    assert consts[0] == pytest.approx(consts[1], rel=1e-12)
    assert consts[0] <= 2.0 ** (n + 1)


def constant_trajectory(F, j_t, S=4):
    times, _ = ring_times(j_t, j_t, S)
    data = np.stack([F.data] * S)
    return Trajectory(F.n, F.N, F.kmax, j_t, j_t, S, times, data, has_origin=False)


def test_microlocal_examples():
    W = build_system(2, 6)
    c = WaveletCoeffs.zeros(2, 6)
    T0 = constant_trajectory(synthesize(c, W, spectral=True), 2)
    P = SpaceParams(p=2.0, q=2.0)
    assert microlocal_norm(T0, P, W) == 0.0
    j, n, p = 3, 2, 3.0
    c.detail[j][0, 2, 1] = 1.0
    T = constant_trajectory(synthesize(c, W, spectral=True), j)
    expect = 2.0 ** (j * (n / p - 1)) * 2.0 ** (n * j / 2) * 2.0 ** (-n * j / p)
    for q in (1.0, 2.0, INF):
        assert microlocal_norm(T, SpaceParams(p=p, q=q), W) == pytest.approx(expect, rel=1e-8)


def test_microlocal_weight_monotonicity(rng):
    W = build_system(2, 6)
    T = constant_trajectory(synthesize(random_coeffs(rng, 2, 6, top=3), W, spectral=True), 2)
    base = microlocal_table(T, SpaceParams(m=1.25, mprime=0.25), W)
    more_m = microlocal_table(T, SpaceParams(m=2.0, mprime=0.25), W)
    more_mp = microlocal_table(T, SpaceParams(m=1.25, mprime=0.45), W)
    for ri, j_t in enumerate(base["rings"]):
        for j in base["bands"]:
            a = base["A"][0, ri, j]
            if j < j_t:
                assert more_mp["A"][0, ri, j] <= a
                assert more_m["A"][0, ri, j] == a
            else:
                assert more_m["A"][0, ri, j] >= a
                assert more_mp["A"][0, ri, j] == a


def test_microlocal_rejects_empty():
    with pytest.raises(ValueError):
        Trajectory(2, 32, 5, 2, 2, 4, np.zeros(0), np.zeros((0, 1, 32, 32)), has_origin=False)
