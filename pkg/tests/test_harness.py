import numpy as np
import pytest

from weakkubo import harness, perturbation as pt
from weakkubo.presets import (TAYLOR_NEGATIVITY_LAM, TAYLOR_NEGATIVITY_SEED, aav_gaussian,
                              qubit_qubit, random_seeded, taylor_negativity)


def test_fit_slope_recovers_power_law():
    x = np.array([0.16, 0.08, 0.04, 0.02])
    fit = harness.fit_slope(x, 3.0 * x ** 2.5)
    assert fit.slope == pytest.approx(2.5, abs=1e-12) and fit.residual < 1e-12


def test_fit_slope_drops_noise_floor_and_withholds_bad_fits():
    x = np.array([1.0, 0.1, 0.01, 0.001])
    fit = harness.fit_slope(x, [1e-2, 1e-5, 1e-14, 0.0])
    assert not fit.reported and fit.n_used == 2
    fit = harness.fit_slope(x, [1.0, 1e-6, 1.0, 1e-6])
    assert not fit.reported and fit.residual >= harness.MAX_SLOPE_RESIDUAL


def test_sweep_rejects_bad_axis():
    with pytest.raises(ValueError):
        harness.lambda_sweep(qubit_qubit(n_t=16), "+", [0.1, 0.2])
    with pytest.raises(ValueError):
        harness.lambda_sweep(qubit_qubit(n_t=16), "+", [0.1, 0.0, 0.2])


def test_degenerate_axis():
    res = harness.lambda_sweep(qubit_qubit(n_t=64), "+", [1e-15, 1e-15, 1e-15])
    for name in harness.ESTIMATORS:
        assert np.all(res.errors(name) < 1e-10)
        assert res.slope(name) is None


def test_sweep_is_deterministic_and_parallel_safe():
    s = random_seeded(2)
    f = s.sys_povm.labels[0]
    a = harness.lambda_sweep(s, f, [0.2, 0.1, 0.05, 0.02])
    b = harness.lambda_sweep(s, f, [0.2, 0.1, 0.05, 0.02], workers=4)
    assert a.table() == b.table()
    for name in harness.ESTIMATORS:
        assert np.all(a.errors(name) >= 0)


def test_amplification_column():
    res = harness.lambda_sweep(aav_gaussian(n_t=64), "+", [0.01, 0.005, 0.001])
    assert all(r.amplified for r in res.rows)


def test_negativity_search_guard():
    with pytest.raises(ValueError):
        harness.negativity_search(0, 0)


def test_negativity_search_replays_pinned_preset():
    hit = harness.negativity_search(0, 5)
    assert hit is not None
    assert (hit.seed, hit.lam) == (TAYLOR_NEGATIVITY_SEED, TAYLOR_NEGATIVITY_LAM)
    t = pt.naive_taylor_probability(taylor_negativity())
    assert t.min_entry == hit.min_taylor


@pytest.mark.parametrize("i", range(8))
def test_rational_form_nonnegative_in_search_trials(i):
    for lam in (0.25, 2.0):
        t = pt.naive_taylor_probability(random_seeded(i, lam, kind="sharp"))
        assert t.min_rational >= -1e-12


def test_campaign_passes_and_is_deterministic():
    a, b = harness.property_campaign(0, 6), harness.property_campaign(0, 6)
    assert a.ok
    assert a.results == b.results


def test_campaign_flags_injected_fault():
    s = random_seeded(3)
    bad = type(s)(**{**s.__dict__, "rho_i": 1.1 * s.rho_i})
    rep = harness.property_campaign(0, 3, inject=bad)
    assert len(rep.failures) == 1
    assert rep.failing_seeds == [-1]
    assert rep.failures[0].check == "validate"


def test_csv_format():
    text = harness.to_csv(["a", "b"], [[0.1, "x,y"], [1, True]], "hdr")
    assert text == '# hdr\r\na,b\r\n0.10000000000000001,"x,y"\r\n1,1\r\n'
