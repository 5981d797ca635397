import numpy as np
import pytest

from conftest import SPECS, pipeline
from weyl_lattice.solver import reconstruct_entries
from weyl_lattice.toda import (DEFAULT_TIME_SCALE, TodaError, evolve_and_reconstruct,
                               fit_time_scale, ode_oracle, toda_rhs)


def test_free_lattice_is_stationary():
    # the cut ends of the finite section move; the middle does not see them
    tr = ode_oracle(SPECS["free"], [0.5, 1.0], half_width=40)
    for i in range(2):
        e = tr.entries(i, -10, 10)
        assert max(abs(v) for v in e["a"].values()) < 1e-14
        assert max(abs(v - 1) for v in e["b"].values()) < 1e-14


def test_flaschka_rhs_signs_by_finite_differences():
    spec = SPECS["a0"]
    h = 1e-4
    tr = ode_oracle(spec, [h, 2 * h], half_width=20)
    o = tr.offset
    a0, b0 = spec.entries(-20, 20)
    da = (-3 * np.asarray(a0) + 4 * tr.a[0] - tr.a[1]) / (2 * h)
    db = (-3 * np.asarray(b0)[:-1] + 4 * tr.b[0] - tr.b[1]) / (2 * h)
    assert da[o] == pytest.approx(0.0, abs=1e-6)
    # b_0' = b_0 (a_1 - a_0) < 0 and b_{-1}' = b_{-1} (a_0 - a_{-1}) > 0
    assert db[o] == pytest.approx(-0.3, abs=1e-6)
    assert db[o - 1] == pytest.approx(0.3, abs=1e-6)
    ra, rb = toda_rhs(np.asarray(a0), np.asarray(b0)[:-1])
    assert np.allclose(ra, da, atol=1e-6) and np.allclose(rb, db, atol=1e-6)


def test_conservation_and_isospectrality():
    tr = ode_oracle(SPECS["a0"], [0.0, 0.5, 1.0])
    assert tr.conservation_drift < 1e-8
    e0 = tr.eigenvalues(0)
    for i in (1, 2):
        assert np.max(np.abs(tr.eigenvalues(i) - e0)) < 1e-6


def test_bad_times():
    with pytest.raises(TodaError):
        ode_oracle(SPECS["a0"], [-0.1])
    with pytest.raises(TodaError):
        ode_oracle(SPECS["a0"], [50.0])


def test_time_scale_fit_matches_frozen_value():
    _, data = pipeline("a0")
    cal = fit_time_scale(data, SPECS["a0"])
    assert cal.scale == pytest.approx(DEFAULT_TIME_SCALE, abs=1e-4)
    assert cal.deviation < 1e-8


def test_flow_matches_oracle():
    _, data = pipeline("a0")
    snaps = evolve_and_reconstruct(data, SPECS["a0"], [0.5, 0.1])
    assert [s.t for s in snaps] == [0.1, 0.5]
    for s in snaps:
        assert s.max_deviation < 1e-3
        assert s.residual < 1e-10


def test_decaying_right_side_is_not_the_flow():
    # the alternative right side -exp(-t/beta) does not follow the lattice
    _, data = pipeline("a0")
    tr = ode_oracle(SPECS["a0"], [0.3])
    ref = tr.entries(0, -3, 3)
    rec = reconstruct_entries(data, -3, 3, t=DEFAULT_TIME_SCALE * 0.3, certify=False, rhs="decay")
    dev = max(abs(rec.a[k] - ref["a"][k]) for k in rec.a)
    assert dev > 1e-2
