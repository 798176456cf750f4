import numpy as np
import pytest

from besovns.flows import heat_flow
from besovns.meyer_wavelet import build_system
from besovns.samples import random_band_field
from besovns.trajectory import Trajectory, ring_bounds, ring_times


def test_ring_layout():
    times, labels = ring_times(1, 3, 4)
    assert times.size == 12 and np.all(np.diff(times) > 0)
    assert times[0] == 2.0**-6
    for t, j in zip(times, labels):
        lo, hi = ring_bounds(int(j))
        assert lo <= t < hi
    # consecutive rings abut
    assert ring_bounds(3)[1] == ring_bounds(2)[0]
    with pytest.raises(ValueError):
        ring_times(3, 1, 4)
    with pytest.raises(ValueError):
        ring_times(1, 3, 0)


def test_trajectory_validation():
    times, _ = ring_times(1, 2, 2)
    data = np.zeros((4, 1, 16, 16))
    T = Trajectory(2, 16, 5, 1, 2, 2, times, data, has_origin=False)
    assert len(T) == 4 and T.c == 1
    assert list(T.ring_indices(2)) == [0, 1]
    with pytest.raises(ValueError):
        Trajectory(2, 16, 5, 1, 2, 2, times * 1.01, data, has_origin=False)
    with pytest.raises(ValueError):
        Trajectory(2, 16, 5, 1, 2, 2, times, data[:3], has_origin=False)
    with pytest.raises(ValueError):
        Trajectory(2, 16, 5, 1, 2, 2, times, data, has_origin=True)


def test_geometric_interpolation_exact_for_heat_modes(rng):
    F = random_band_field(2, 32, rng, 4)
    T = heat_flow(F, 1, 3, 4)
    t = 0.5 * (T.times[3] + T.times[4])
    exact = F.data * np.exp(-4 * np.pi**2 * t * _ksq(F))
    assert np.max(np.abs(T.at(t).data - exact)) < 1e-12
    assert np.array_equal(T.at(T.times[2]).data, T.data[2])
    with pytest.raises(ValueError):
        T.at(2.0)


def _ksq(F):
    k = np.fft.fftfreq(F.N, 1.0 / F.N)
    return k[:, None] ** 2 + k[None, :] ** 2


def test_sign_change_falls_back_to_linear():
    times, _ = ring_times(2, 2, 2)
    times = np.r_[0.0, times]
    data = np.zeros((3, 1, 16, 16), dtype=complex)
    data[0, 0, 1, 0], data[1, 0, 1, 0], data[2, 0, 1, 0] = 1.0, -1.0, -1.0
    T = Trajectory(2, 16, 5, 2, 2, 2, times, data)
    mid = 0.5 * times[1]
    assert T.at(mid).data[0, 1, 0] == pytest.approx(0.0)


def test_from_fields_and_coefficient_cache(rng):
    F = random_band_field(2, 32, rng, 4)
    T = heat_flow(F, 2, 3, 2)
    U = Trajectory.from_fields([T.field(i) for i in range(len(T))], 2, 3, 2)
    assert np.array_equal(U.data, T.data)
    W = build_system(2, 5)
    c1 = T.coefficients(W)
    assert T.coefficients(W) is c1
    assert len(c1) == len(T) and len(c1[0]) == 1
