import numpy as np
import pytest

from conftest import SPECS, pipeline
from weyl_lattice.factor import g_direct, off_support_points
from weyl_lattice.pipeline import direct_u_residual, synthetic_instance
from weyl_lattice.solver import (SolverError, assemble_L, coercivity, discretize, g_from_u,
                                 reconstruct_entries, solve_u)


def test_free_solution_closed_form():
    _, data = pipeline("free")
    xi = data.grid.xi
    for k in (-4, 0, 3):
        L = assemble_L(data, k)
        assert np.allclose(L.matrix, np.eye(data.grid.M), atol=1e-11)
        sol = solve_u(data, k, L=L)
        assert np.max(np.abs(sol.u_circle + xi ** (-2 * (k + 1)))) < 1e-12


@pytest.mark.parametrize("name", ["a0", "b2"])
def test_coercivity_certificate(name):
    _, data = pipeline(name)
    for k in (-2, 0, 2):
        L = assemble_L(data, k)
        rep = coercivity(L, seed=[0, k + 10])
        assert rep.passed
        assert rep.probe_min >= 0.9 * rep.d
        assert rep.numerical_range_min >= 0.9 * rep.d
        assert solve_u(data, k, L=L).residual < 1e-10


@pytest.mark.parametrize("name", ["a0", "am1", "b0", "b2"])
def test_direct_u_solves_discrete_equation(name):
    R, data = pipeline(name)
    for k in range(-3, 4):
        assert direct_u_residual(R, data, k) < 1e-5


@pytest.mark.parametrize("name", ["a0", "b2"])
def test_g_two_routes(name):
    R, data = pipeline(name)
    disc = discretize(data)
    pts = off_support_points(R.partition, 20, seed=7, gap=0.1)
    for k in (-2, 0, 2):
        sol = solve_u(data, k)
        assert np.max(np.abs(g_from_u(data, sol, pts, disc) - g_direct(R, k, pts))) < 1e-5


def test_a0_entries_and_b_minus1():
    _, data = pipeline("a0")
    rec = reconstruct_entries(data, -5, 5)
    spec = SPECS["a0"]
    assert rec.g0[0] / rec.g0[-1] == pytest.approx(1.0, abs=1e-6)
    assert rec.a[0] == pytest.approx(0.3, abs=1e-4)
    for k in rec.a:
        assert rec.a[k] == pytest.approx(spec.a_at(k), abs=1e-4)
    for k in rec.b:
        assert rec.b[k] == pytest.approx(spec.b_at(k), abs=1e-4)


def test_b2_entries():
    _, data = pipeline("b2")
    rec = reconstruct_entries(data, -2, 2)
    assert rec.b[0] == pytest.approx(2.0, abs=1e-3)


def test_k_shift_consistency():
    # neighbouring k give the same entries whichever window they sit in
    _, data = pipeline("b0")
    r1 = reconstruct_entries(data, -3, 1, certify=False)
    r2 = reconstruct_entries(data, -1, 3, certify=False)
    for k in (-1, 0, 1):
        assert r1.a[k] == pytest.approx(r2.a[k], abs=1e-12)
        assert r1.b[k] == pytest.approx(r2.b[k], abs=1e-12)


def test_free_data_with_time_stays_free():
    _, data = pipeline("free")
    for rhs in ("decay", "unit"):
        rec = reconstruct_entries(data, -3, 3, t=0.7, rhs=rhs)
        assert max(abs(v) for v in rec.a.values()) < 1e-12
        assert max(abs(v - 1) for v in rec.b.values()) < 1e-12


def test_threads_give_identical_result():
    _, data = pipeline("a0")
    r1 = reconstruct_entries(data, -2, 2, certify=False)
    r4 = reconstruct_entries(data, -2, 2, certify=False, threads=4)
    assert r1.a == r4.a and r1.b == r4.b


def test_synthetic_instance_solves():
    data = synthetic_instance(panels=32)
    disc = discretize(data)
    assert disc.n_real == 2 + 4 * 32
    for k in (-1, 1):
        L = assemble_L(data, k)
        sol = solve_u(data, k, L=L)
        assert sol.residual < 1e-10
        assert coercivity(L, seed=1).passed


def test_bad_rhs_and_overflow():
    _, data = pipeline("b2")
    with pytest.raises(ValueError):
        assemble_L(data, 0, rhs="other")
    with pytest.raises(SolverError):
        assemble_L(data, 0, t=1e4)
