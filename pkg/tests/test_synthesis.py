import numpy as np
import pytest

from ddc.descriptor import DescriptorConditioningError, augment
from ddc.lmi import assemble_robust_lmi, solve_feasibility, verify_solution
from ddc.synthesis import (
    ControllerGain,
    ExtractionSingular,
    SynthesisInfeasible,
    synth_hinf,
    synth_robust,
)
from ddc.verify import spectral_radius

from conftest import make_dataset, stable_diag_plant


def test_robust_noiseless_stable_plant():
    p = stable_diag_plant()
    _, _, d = make_dataset(p, 0.0, seed=1, s0=1.5)
    g = synth_robust(d)
    assert g.method == "robust" and g.gamma is None
    assert spectral_radius(p.A + p.B @ g.F) < 1
    assert all(lam <= -0.5e-6 for lam in g.margins.values())


def test_shift_on_spectrum_rejected():
    with pytest.raises(DescriptorConditioningError):
        make_dataset(stable_diag_plant(), 0.0, seed=1, s0=0.5)


def test_robust_noiseless_paper_plant(plant, noiseless):
    g = synth_robust(noiseless[2])
    assert spectral_radius(plant.A + plant.B @ g.F) < 1


def test_robust_extraction_consistency(noisy):
    d = noisy[2]
    lmi, v = assemble_robust_lmi(augment(d))
    sol = solve_feasibility([lmi], v.all(), bound=1e4)
    g = synth_robust(d)
    K, Z = sol.assignment["K"], sol.assignment["Z"]
    F = Z @ np.linalg.inv(K)
    assert np.abs(F @ K - Z).max() <= 1e-8
    assert np.allclose(g.F, F, rtol=1e-6, atol=1e-8)
    assert verify_solution(lmi, sol) <= -0.5e-6


def test_robust_inflated_delta_rarely_stabilizes(plant):
    # the data-only condition stays feasible at any noise level; ground truth decides
    stabilizing = 0
    for seed in range(10):
        _, _, d = make_dataset(plant, 1e3, seed=seed)
        try:
            g = synth_robust(d)
        except SynthesisInfeasible:
            continue
        stabilizing += spectral_radius(plant.A + plant.B @ g.F) < 1
    assert stabilizing <= 5


def test_hinf_noiseless_feasible_and_consistent(noiseless):
    d = noiseless[2]
    g = synth_hinf(d, 0.5)
    assert g.method == "hinf" and g.gamma == 0.5
    assert all(lam <= -0.5e-6 for lam in g.margins.values())


def test_hinf_tiny_gamma_infeasible(plant):
    _, _, d = make_dataset(plant, 0.2, seed=0)
    with pytest.raises(SynthesisInfeasible):
        synth_hinf(d, 1e-6)


def test_hinf_large_gamma_feasible_when_robust_is(noisy):
    d = noisy[2]
    synth_robust(d)
    assert synth_hinf(d, 1e6).gamma == 1e6


@pytest.mark.parametrize("seed", [0, 1])
def test_gamma_monotonicity(plant, seed):
    _, _, d = make_dataset(plant, 0.2, seed=seed)
    grid = [1e-3, 1e-2, 0.05, 0.1, 0.5, 1.0, 5.0]
    ok = []
    for g in grid:
        try:
            synth_hinf(d, g)
            ok.append(True)
        except SynthesisInfeasible:
            ok.append(False)
    first = ok.index(True) if True in ok else len(ok)
    assert all(ok[first:])


def test_hinf_rejects_bad_gamma(noisy):
    with pytest.raises(ValueError):
        synth_hinf(noisy[2], -1.0)


def test_controller_gain_round_trip(noisy):
    g = synth_robust(noisy[2], provenance={"dataset": "abc"})
    back = ControllerGain.from_dict(g.to_dict())
    assert np.array_equal(back.F, g.F) and back.provenance == {"dataset": "abc"}
    assert back.margins == g.margins


def test_controller_gain_rejects_nonfinite():
    with pytest.raises(ValueError):
        ControllerGain(F=np.array([[np.nan]]), method="robust", eps=1.0, margins={})
    with pytest.raises(ValueError):
        ControllerGain(F=np.zeros((1, 1)), method="lqr", eps=1.0, margins={})


def test_extraction_singular_is_a_synthesis_failure():
    from ddc.synthesis import SynthesisError, _extract

    with pytest.raises(ExtractionSingular) as info:
        _extract(np.ones((1, 2)), np.zeros((2, 2)), "K", None)
    assert isinstance(info.value, SynthesisError)
