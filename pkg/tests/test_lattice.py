import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weyl_lattice.lattice import (LatticeSpec, SpecError, TailModel, eval_pq, free_spec, h_weights,
                                  oracle_eigenvalues, oracle_resolvent, oracle_truncate, perturbed_spec)

window = st.lists(st.tuples(st.floats(-1.0, 1.0), st.floats(0.5, 2.0)), min_size=6, max_size=10)


def spec_from(pairs):
    n = len(pairs)
    return LatticeSpec(-(n // 2), n - n // 2 - 1, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))


def test_pq_free_examples():
    lam = 0.7 + 0.2j
    pq = eval_pq(free_spec(), lam, -3, 3)
    assert pq.at(1)[0] == pytest.approx(lam)
    assert pq.at(-2)[0] == pytest.approx(-1)
    assert pq.at(1)[1] == pytest.approx(-1)
    assert pq.at(-2)[1] == pytest.approx(lam)


def test_pq_a0_example():
    assert eval_pq(perturbed_spec(a={0: 0.3}), 3.0, -1, 1).at(1)[0] == pytest.approx(2.7)


@given(window, st.complex_numbers(max_magnitude=6, allow_nan=False, allow_infinity=False))
@settings(max_examples=60, deadline=None)
def test_pq_recurrence_residual(pairs, lam):
    spec = spec_from(pairs)
    lo, hi = -12, 12
    pq = eval_pq(spec, lam, lo, hi)
    for W in (pq.P, pq.Q):
        for k in range(lo + 1, hi):
            i = k - lo
            r = spec.b_at(k - 1) * W[i - 1] + (spec.a_at(k) - lam) * W[i] + spec.b_at(k) * W[i + 1]
            scale = max(1.0, np.max(np.abs(W[: i + 2])) * (abs(lam) + 4))
            assert abs(r) < 1e-12 * scale


def test_h_examples():
    assert h_weights(free_spec(), 5) == 1.0
    assert h_weights(perturbed_spec(b={0: 2.0}), 2) == 2.0
    assert h_weights(perturbed_spec(b={-3: 0.5}), -4) == pytest.approx(2.0)


@given(window, st.integers(-9, 9))
def test_h_ratio_law(pairs, k):
    spec = spec_from(pairs)
    assert h_weights(spec, k + 1) / h_weights(spec, k) == pytest.approx(spec.b_at(k), rel=1e-12)


def test_oracle_small_and_eigenvalue():
    spec = LatticeSpec(-2, 1, (0.0,) * 4, (1.0,) * 4)
    M = np.diag(np.zeros(3)) + np.diag(np.ones(2), 1) + np.diag(np.ones(2), -1)
    assert np.allclose(np.linalg.eigvalsh(M), [-np.sqrt(2), 0, np.sqrt(2)])
    with pytest.raises(ValueError):
        oracle_truncate(spec, 1)
    ev = oracle_eigenvalues(perturbed_spec(b={0: 2.0}), 2000)
    outside = np.sort(ev[np.abs(ev) > 2.01])
    assert np.allclose(outside, [-2.5, 2.5], atol=1e-6)


def test_oracle_free_green_function():
    z = (3 - np.sqrt(5)) / 2
    g00 = oracle_resolvent(free_spec(), 2000, 3.0, 0, 0)
    assert g00.real == pytest.approx(1 / (z - 1 / z), abs=1e-6)
    g05 = oracle_resolvent(free_spec(), 2000, 3.0, 0, 5)
    assert g05.real == pytest.approx(z ** 5 / (z - 1 / z), abs=1e-6)
    assert oracle_resolvent(free_spec(), 2000, 10.0, 0, 0).real == pytest.approx(-1 / np.sqrt(96), abs=1e-9)


def test_oracle_resolvent_symmetric_and_herglotz():
    spec = perturbed_spec(a={0: 0.3}, b={1: 1.2})
    lam = 0.4 + 0.3j
    assert oracle_resolvent(spec, 400, lam, 0, 3) == pytest.approx(oracle_resolvent(spec, 400, lam, 3, 0))
    assert oracle_resolvent(spec, 400, lam, 0, 0).imag > 0


def test_spec_json_roundtrip_and_validation():
    spec = perturbed_spec(a={0: 0.3}, b={-1: 1.4})
    again = LatticeSpec.from_json(json.dumps(spec.to_dict()))
    assert again == spec
    with pytest.raises(SpecError):
        TailModel(0.0, -1.0)
    with pytest.raises(SpecError):
        LatticeSpec.from_json("{not json")
    d = spec.to_dict()
    d["right_tail"] = {"a": 0.0, "b": 0.5}
    with pytest.raises(SpecError):
        LatticeSpec.from_dict(d)
    with pytest.raises(SpecError):
        LatticeSpec(-1, 1, (0.0,) * 3, (1.0,) * 3)
