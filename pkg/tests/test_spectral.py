import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SPECS, pipeline
from weyl_lattice.factor import g_direct_circle
from weyl_lattice.lattice import _eig
from weyl_lattice.spectral import (CircleGrid, ReducedSpectralData, SpectralDataError, SigmaAtom,
                                   ac_coefficients, gap_coefficients, gap_coefficients_mu, rhat,
                                   rho1, rho2, synthetic_component, synthetic_data)
from weyl_lattice.weyl import WeylField

ORACLE_N = 1500


def oracle_atom(spec, beta):
    """Eigenvalue of the truncation nearest beta + 1/beta and the mass
    b_{-1} v(-1)^2 beta^2 / (beta^2 - 1) of its eigenvector."""
    w, v = _eig(spec, ORACLE_N)
    i = int(np.argmin(np.abs(w - (beta + 1 / beta))))
    vm1 = v[-1 + ORACLE_N, i]
    return w[i], spec.b_minus1 * vm1 ** 2 * beta ** 2 / (beta ** 2 - 1)


def test_circle_grid_symmetry():
    for gr in (0, 2, 4):
        g = CircleGrid.build(64, gr)
        assert np.allclose(g.theta, -g.theta[g.mirror], atol=1e-15)
        assert np.sum(g.weight) == pytest.approx(2 * np.pi, rel=1e-13)
        assert np.all(np.diff(g.theta) > 0)
    with pytest.raises(ValueError):
        CircleGrid.build(63)


def test_free_coefficients():
    W = WeylField(SPECS["free"])
    c = ac_coefficients(W, np.array([np.pi / 2, 1.0, -2.0]))
    assert c.q[0] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(c.b, 0, atol=1e-14) and np.allclose(c.d, 0, atol=1e-14)
    R, data = pipeline("free")
    assert data.rhat_sup < 1e-13 and not data.atoms


@pytest.mark.parametrize("name", ["a0", "am1", "b0", "b2", "a5"])
def test_contraction_bounds(name):
    R, data = pipeline(name)
    th = (np.arange(64) + 0.5) * 2 * np.pi / 64 - np.pi
    c = ac_coefficients(R.field, th)
    assert np.all(np.abs(c.b / c.a) <= 1 + 1e-12)
    assert np.all(np.abs(c.d / c.c) <= 1 + 1e-12)
    assert np.min(c.q) > 0
    assert data.rhat_sup < 1
    assert data.rhat_interior_sup < 1 - 1e-6


@pytest.mark.parametrize("name", ["a0", "b2"])
def test_rhat_closed_form_and_relation(name):
    R, data = pipeline(name)
    assert data.meta["rhat_closed_form_gap"] < 1e-8
    assert data.meta["relation_residual"] < 1e-8


@pytest.mark.parametrize("name", ["a0", "b0", "b2"])
def test_rhat_satisfies_jump(name):
    R, _ = pipeline(name)
    th = (np.arange(64) + 0.5) * 2 * np.pi / 64 - np.pi
    rh = rhat(R, th).value
    xi = np.exp(1j * th)
    for k in range(-3, 4):
        jump = xi ** (2 * (k + 1)) * (g_direct_circle(R, k, th, 1) - g_direct_circle(R, k, th, -1))
        mean = g_direct_circle(R, k, -th, 1) + g_direct_circle(R, k, -th, -1)
        assert np.max(np.abs(jump + rh * mean)) < 1e-5


def test_a0_rhat_golden():
    R, data = pipeline("a0")
    # frozen from this implementation; the jump test above is the independent check
    golden = {np.pi / 2: 0.011063647131702511 + 0.07375764754468318j,
              1.0: 0.08733337608526297 + 0.013899926284643172j,
              2.5: -0.11993005279410329 - 0.02910207527681375j}
    th = np.array(list(golden))
    assert rhat(R, th).value == pytest.approx(np.array(list(golden.values())), abs=1e-9)
    assert 1 - data.rhat_sup > 0


def test_rho2_plug_in():
    assert rho2([(0.4, 0.5, 0.5)]).masses[0] == pytest.approx(1.0)
    # inner-point weight first, then the mirror
    assert rho2([(0.4, 0.8, 0.2)]).masses[0] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        rho2([(1.5, 0.5, 0.5)])
    with pytest.raises(SpectralDataError):
        rho2([(0.4, 0.0, 0.5)])


@pytest.mark.parametrize("name", ["b2", "a0", "a5"])
def test_rho1_masses_against_oracle(name):
    R, data = pipeline(name)
    spec = SPECS[name]
    assert data.atoms
    for atom in data.atoms:
        lam, mass = oracle_atom(spec, atom.beta)
        assert atom.beta + 1 / atom.beta == pytest.approx(lam, abs=1e-8)
        assert atom.mass == pytest.approx(mass, rel=1e-6)


def test_b2_sigma_weight():
    R, data = pipeline("b2")
    betas = sorted(a.beta for a in data.atoms)
    assert betas == pytest.approx([-2.0, 2.0], abs=1e-8)
    for a in data.atoms:
        rb = R(np.array([1 / a.beta + 0j]))[0].real
        assert a.weight == pytest.approx(abs(a.beta - 1 / a.beta) / abs(a.beta) * a.mass / rb ** 2)
        assert a.mass == pytest.approx(0.125, abs=1e-10)
        assert a.weight == pytest.approx(15.0, rel=1e-10)


def test_omega1_points_carry_no_mass():
    R, _ = pipeline("a5")
    r1 = rho1(R.field, R.partition)
    for p, m, kind in zip(r1.points, r1.masses, r1.kinds):
        if kind == "omega1":
            assert m < 1e-12


pos = st.floats(0.05, 5.0)


@given(st.floats(1.05, 10), pos, pos, st.floats(-1.5, 1.5).filter(lambda x: abs(x) > 0.01),
       st.floats(0.1, 10), st.integers(0, 1))
def test_gap_coefficient_properties(alpha, s_self, s_mirror, g2, ratio, chi0):
    out = gap_coefficients(alpha, s_self, s_mirror, ratio, g2, chi0)
    inn = gap_coefficients(1 / alpha, s_mirror, s_self, 1 / ratio, -g2, chi0)
    assert out.p > 0
    assert out.p == pytest.approx(inn.p, rel=1e-12)
    assert out.m == pytest.approx(-inn.m, rel=1e-12, abs=1e-14)
    # the same coefficients through mu = sqrt(rho'_R / rho'_L); outside the
    # disk sigma is the left density
    mu = np.sqrt(s_mirror / s_self)
    un = gap_coefficients_mu(alpha, mu, ratio, g2, chi0)
    assert un.p == pytest.approx(out.p, rel=1e-12)
    assert un.q == pytest.approx(out.q, rel=1e-12)
    assert un.m == pytest.approx(out.m, rel=1e-12, abs=1e-14)
    un_in = gap_coefficients_mu(1 / alpha, mu, 1 / ratio, -g2, chi0)
    assert un_in.q == pytest.approx(inn.q, rel=1e-12)
    assert un_in.m == pytest.approx(inn.m, rel=1e-12, abs=1e-14)


def test_synthetic_component_density():
    comp = synthetic_component(1.3, 2.5, 32, lambda l: 0.5 + 0.1 * np.cos(l), lambda l: 0.3 + 0 * l,
                               lambda l: 1.0 + 0.2 * np.sin(l), lambda t: 1 + 0.1 * t, chi0=0)
    beta = comp.beta_out
    assert np.all(comp.p > 0)
    assert comp.density_out() == pytest.approx(comp.p / (2 * np.pi * np.abs(beta) * comp.q_out))
    assert np.all(np.isclose(comp.m_out, -comp.m_in))


def test_json_roundtrip_and_validation():
    _, data = pipeline("b2")
    d = json.loads(json.dumps(data.to_dict()))
    assert d["schema"] == 1
    again = ReducedSpectralData.from_dict(d)
    assert np.array_equal(again.rhat, data.rhat)
    assert [a.beta for a in again.atoms] == [a.beta for a in data.atoms]
    d["schema"] = 2
    with pytest.raises(ValueError):
        ReducedSpectralData.from_dict(d)
    grid = CircleGrid.build(64)
    with pytest.raises(SpectralDataError):
        synthetic_data(grid, lambda t: 1.2 + 0 * t)
    with pytest.raises(SpectralDataError):
        synthetic_data(grid, lambda t: 0 * t, [SigmaAtom(0.5, -1.0, "rho1", 1.0)])
