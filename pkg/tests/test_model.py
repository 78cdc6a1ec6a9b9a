import numpy as np
import pytest

from weakkubo import perturbation as pt
from weakkubo.errors import ConfigError, InvalidScenarioError
from weakkubo.model import (CouplingProfile, Povm, PovmOutcome, pointer_operator,
                            retrodiction_state, validate_scenario)
from weakkubo.presets import (SIGMA_Z, aav_gaussian, preset, qubit_qubit, random_povm,
                              random_seeded)


def codes(s):
    return {f.code for f in validate_scenario(s)}


def test_pointer_operator_of_qubit_basis_is_pauli_z():
    p = Povm.projective(np.eye(2), [1, -1])
    np.testing.assert_allclose(pointer_operator(p), SIGMA_Z, atol=1e-15)


def test_pointer_operator_constant_values():
    p = Povm.projective(np.eye(3), [2.5, 2.5, 2.5])
    np.testing.assert_allclose(pointer_operator(p), 2.5 * np.eye(3), atol=1e-15)


def test_pointer_operator_random_povm_matches_direct_sum():
    p = random_povm(np.random.default_rng(4), 3, 3, "q")
    direct = sum(o.weight * o.value * o.effect for o in p)
    np.testing.assert_allclose(pointer_operator(p), direct, atol=1e-12)


def test_pointer_operator_rejects_incomplete_povm():
    p = Povm((PovmOutcome("a", 1.0, np.diag([1.0, 0.0])),))
    with pytest.raises(InvalidScenarioError):
        pointer_operator(p)


def test_retrodiction_state_examples():
    psi = np.array([1, 1j]) / np.sqrt(2)
    proj = np.outer(psi, psi.conj())
    np.testing.assert_allclose(retrodiction_state(PovmOutcome("p", 1, proj)), proj)
    np.testing.assert_allclose(retrodiction_state(PovmOutcome("m", 1, 0.3 * np.eye(2))),
                               np.eye(2) / 2)
    rng = np.random.default_rng(2)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    r = retrodiction_state(PovmOutcome("r", 1, g @ g.conj().T))
    assert abs(np.trace(r) - 1) < 1e-12 and np.linalg.eigvalsh(r).min() > -1e-12
    with pytest.raises(ValueError):
        retrodiction_state(PovmOutcome("z", 1, np.zeros((2, 2))))


def test_shipped_presets_validate():
    assert validate_scenario(aav_gaussian()) == []
    assert validate_scenario(qubit_qubit()) == []
    assert validate_scenario(random_seeded(3)) == []


def test_missing_outcome_flags_completeness():
    s = qubit_qubit()
    partial = Povm(tuple(list(s.sys_povm)[:1]))
    assert "sys_povm.completeness" in codes(s.with_sys_povm(partial))


def test_trace_violation_flagged():
    s = qubit_qubit()
    bad = type(s)(**{**s.__dict__, "rho_i": 1.1 * s.rho_i})
    assert "rho_i.trace" in codes(bad)


def test_coupling_profiles_integrate_to_one():
    for shape, kw in [("boxcar", {}), ("hann", {}), ("pulse", {"first_cell": 3, "n_cells": 2}),
                      ("bumps", {"centers": [0.3], "widths": [0.1], "amplitudes": [1.0]})]:
        c = CouplingProfile.from_shape(shape, 128, 2.0, 0.1, **kw)
        assert abs(c.integral - 1) < 1e-8
        assert c.times.min() > 0 and c.times.max() < 2.0


def test_random_preset_is_deterministic():
    a, b = preset("random_seeded", seed=7), preset("random_seeded", seed=7)
    for name in ("h_s", "h_d", "a_obs", "x_obs", "rho_i", "rho_0"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert np.array_equal(a.coupling.samples, b.coupling.samples)


def test_unknown_preset_or_param_rejected():
    with pytest.raises(ConfigError):
        preset("nope")
    with pytest.raises(ConfigError):
        preset("qubit_qubit", bogus=1)


def test_aav_symmetric_postselection_gives_expectation():
    s = aav_gaussian(eps=np.pi / 2, n_t=64)
    wv = pt.weak_value_trace(s, "+")
    k = np.flatnonzero(s.coupling.samples)[0]
    lam_g = s.lam * s.coupling.samples[k]
    expectation = np.trace(s.a_obs @ s.rho_i).real
    assert abs(wv.a_w[k] / lam_g - expectation) < 1e-12


def test_aav_small_eps_is_anomalous():
    s = aav_gaussian(eps=0.1, n_t=64)
    wv = pt.weak_value_trace(s, "+")
    k = np.flatnonzero(s.coupling.samples)[0]
    a_w = wv.a_w[k] / (s.lam * s.coupling.samples[k])
    assert abs(a_w.real) > np.abs(np.linalg.eigvalsh(s.a_obs)).max()
    # textbook <f|A|i>/<f|i> for the instantaneous projective case
    w, v = np.linalg.eigh(s.rho_i)
    psi_i = v[:, -1]
    e = s.sys_povm["+"].effect
    w, v = np.linalg.eigh(e)
    psi_f = v[:, -1]
    textbook = (psi_f.conj() @ s.a_obs @ psi_i) / (psi_f.conj() @ psi_i)
    assert abs(a_w - textbook) < 1e-9
    assert abs(a_w.real - 1 / np.tan(0.1)) < 1e-9
