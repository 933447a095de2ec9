import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddc.plant import NoiseProcess, PlantModel
from ddc.verify import (
    empirical_energy_ratio,
    frequency_grid_norm,
    hinf_norm,
    hinf_norm_matrices,
    spectral_radius,
    verify_gain,
)


def scalar_plant(a, b=1.0):
    return PlantModel(A=[[a]], B=[[b]], Bw=[[1.0]], C=[[1.0]], D=[[0.0]])


def test_spectral_radius_examples(plant):
    assert spectral_radius(np.diag([0.5, -0.25])) == pytest.approx(0.5, abs=1e-12)
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert spectral_radius(R) == pytest.approx(1.0, abs=1e-12)
    eig = np.linalg.eigvals(plant.A)
    assert spectral_radius(plant.A) == pytest.approx(max(abs(eig)), abs=1e-12)
    assert spectral_radius(plant.A) > 1
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


def test_hinf_all_pass():
    assert hinf_norm(scalar_plant(0.0, 3.0), np.zeros((1, 1))) == pytest.approx(1.0, rel=1e-9)


def test_hinf_scalar_pole():
    assert hinf_norm(scalar_plant(0.5), np.zeros((1, 1))) == pytest.approx(2.0, rel=1e-9)


def test_hinf_unstable_is_inf():
    assert hinf_norm(scalar_plant(1.5), np.zeros((1, 1))) == math.inf


def _random_stable(rng):
    n = int(rng.integers(1, 5))
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.1, 0.98) / max(abs(np.linalg.eigvals(A)))
    return A, rng.standard_normal((n, int(rng.integers(1, 4)))), rng.standard_normal((int(rng.integers(1, 4)), n))


def test_grid_and_refined_agree():
    rng = np.random.default_rng(5)
    for _ in range(100):
        A, B, C = _random_stable(rng)
        refined = hinf_norm_matrices(A, B, C, tol=1e-6)
        _, grid = frequency_grid_norm(A, B, C)
        assert grid.max() <= refined
        dense = frequency_grid_norm(A, B, C, 20001)[1].max()
        assert abs(dense - refined) <= 1e-5 * refined


def test_energy_ratio_skips_zero_noise():
    p = scalar_plant(0.5)
    ratios, skipped = empirical_energy_ratio(p, np.zeros((1, 1)), NoiseProcess(0.0), 100, 2)
    assert ratios == [] and skipped == [0, 1]


def test_energy_ratio_rejects_short_horizon():
    with pytest.raises(ValueError):
        empirical_energy_ratio(scalar_plant(0.5), np.zeros((1, 1)), NoiseProcess(0.1), 10, 1)


def test_energy_ratio_all_pass_bound():
    p = scalar_plant(0.0)
    ratios, _ = empirical_energy_ratio(p, np.zeros((1, 1)), NoiseProcess(0.3, 1), 10_000, 3)
    assert all(r <= 1.05 for r in ratios)


@given(seed=st.integers(0, 2**32 - 1))
def test_energy_ratio_below_norm(seed):
    rng = np.random.default_rng(seed)
    A, Bw, C = _random_stable(rng)
    n = A.shape[0]
    p = PlantModel(A=A, B=np.zeros((n, 1)), Bw=Bw, C=C, D=np.zeros((C.shape[0], 1)))
    norm = hinf_norm(p, np.zeros((1, n)))
    ratios, _ = empirical_energy_ratio(p, np.zeros((1, n)), NoiseProcess(0.2, seed), 2_000, 1)
    assert all(r <= norm**2 * 1.05 for r in ratios)


def test_verify_report_consistency(plant):
    F = np.array([[0.3815, -0.6629, -0.5368], [-0.1548, 0.6346, 1.2579]])
    rep = verify_gain(plant, F)
    assert rep.stable and rep.spectral_radius < 1 and math.isfinite(rep.hinf_norm) and rep.passed
    rep = verify_gain(plant, np.zeros((2, 3)))
    assert not rep.stable and rep.hinf_norm == math.inf and not rep.passed
    assert rep.to_dict()["hinf_norm"] == "inf"


def test_verify_gamma_target(plant):
    F = np.array([[-0.1788, -0.4381, -0.3199], [-0.2071, 0.2021, 0.9403]])
    rep = verify_gain(plant, F, gamma=0.5, noise=NoiseProcess(0.2, 0), L=1000, trials=2)
    assert rep.stable
    assert rep.meets_gamma is (rep.hinf_norm <= 0.5 + 1e-6)
    assert all(r <= rep.hinf_norm**2 * 1.05 for r in rep.empirical_energy_ratios)
