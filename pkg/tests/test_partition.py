import numpy as np
import pytest
from hypothesis import given, strategies as st

from weyl_lattice.lattice import free_spec, perturbed_spec
from weyl_lattice.partition import build_partition, s_sign, validate_conditions
from weyl_lattice.weyl import WeylField


def half_matrix_spectrum(spec, right=True, N=800):
    ks = list(range(0, N)) if right else list(range(-N, 0))
    a = np.array([spec.a_at(k) for k in ks])
    b = np.array([spec.b_at(k) for k in ks[:-1]])
    J = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
    w, v = np.linalg.eigh(J)
    site = 0 if right else -1
    return w, v[site] ** 2


def part_of(spec):
    W = WeylField(spec)
    return build_partition(W), W


def test_free_partition():
    part, W = part_of(free_spec())
    assert part.bands_right == [[-2.0, 2.0]] and part.bands_left == [[-2.0, 2.0]]
    assert not part.atoms_right and not part.atoms_left
    assert len(part.Phi) == 0 and len(part.omega1) == 0
    assert [d.phi for d in part.deltas] == [-1.0, 1.0]
    rep = validate_conditions(part, W)
    assert rep.ok
    assert rep.margins["B_at_0"] == pytest.approx(np.pi / 2, abs=1e-2)


def test_b0_eigenvalue_instance():
    spec = perturbed_spec(b={0: 2.0})
    part, W = part_of(spec)
    phis = sorted(d.phi for d in part.deltas if d.sign_change)
    assert phis[0] == pytest.approx(-2.0, abs=1e-10)
    assert phis[1] == pytest.approx(2.0, abs=1e-10)
    # the half-lattice atoms agree with the truncated half matrix
    w, wt = half_matrix_spectrum(spec)
    out = np.abs(w) > 2.05
    assert sorted(a.lam for a in part.atoms_right) == pytest.approx(sorted(w[out]), abs=1e-8)
    for a in part.atoms_right:
        i = np.argmin(np.abs(w - a.lam))
        assert a.mass == pytest.approx(wt[i], abs=1e-8)
    wl, _ = half_matrix_spectrum(spec, right=False)
    assert np.all(np.abs(wl) <= 2 + 1e-9) and not part.atoms_left
    assert validate_conditions(part, W).ok


def test_a0_five_one_sided_atom():
    spec = perturbed_spec(a={0: 5.0})
    part, W = part_of(spec)
    w, wt = half_matrix_spectrum(spec)
    top = np.argmax(w)
    assert len(part.atoms_right) == 1 and not part.atoms_left
    atom = part.atoms_right[0]
    assert atom.lam == pytest.approx(w[top], abs=1e-8)
    assert atom.mass == pytest.approx(wt[top], abs=1e-8)
    assert part.omega1 == pytest.approx([atom.z])
    rep = validate_conditions(part, W)
    assert rep.passed["A"] and rep.margins["A"] > 0
    # alpha* flips into the disk because the gap endpoint 1/z_a lies in V(Omega_1)
    flipped = [d for d in part.deltas if d.lo > 1 and d.alpha_star is not None]
    assert flipped[0].alpha_star == pytest.approx(atom.z)


def test_nonfree_tail_fails_e():
    spec = free_spec().to_dict()
    spec["right_tail"] = {"a": 0.0, "b": 1.2}
    from weyl_lattice.lattice import LatticeSpec
    s = LatticeSpec.from_dict(spec)
    part, W = part_of(s)
    rep = validate_conditions(part, W)
    assert not rep.passed["E"]


def test_sign_change_law_of_N():
    part, W = part_of(perturbed_spec(b={0: 2.0}, a={1: 0.4}))
    for d in part.deltas:
        lo = max(d.lo, -50) if np.isfinite(d.lo) else -50
        hi = min(d.hi, 50)
        t = np.linspace(lo, hi, 400)[1:-1]
        t = t[np.abs(np.abs(t) - 1) > 1e-3]
        for x in t[(t > min(d.lo, d.hi)) & (t < d.phi)]:
            if np.min(np.abs(x - np.array([a.z for a in part.atoms_right + part.atoms_left] + [1e9]))) > 1e-3:
                assert W.N(x).real < 0 or abs(x - d.phi) < 1e-6
        for x in t[(t > d.phi) & (t < d.hi)]:
            if np.min(np.abs(x - np.array([a.z for a in part.atoms_right + part.atoms_left] + [1e9]))) > 1e-3:
                assert W.N(x).real > 0 or abs(x - d.phi) < 1e-6


@given(st.floats(-50, 50).filter(lambda t: abs(abs(t) - 1) > 1e-6 and abs(t) > 1e-6))
def test_s_sign_antisymmetry(t):
    assert s_sign(t) * s_sign(1 / t) == -1


@given(st.floats(-20, 20).filter(lambda t: abs(t) > 1e-3))
def test_chi0_involution(t):
    part, _ = PART
    # chi0 marks Delta^(1) together with its mirror under V(t) = 1/t
    assert part.chi0(np.array([t]))[0] == part.chi0(np.array([1 / t]))[0]
    assert part.chi0(np.array([1 / (1 / t)]))[0] == part.chi0(np.array([t]))[0]


PART = part_of(perturbed_spec(b={0: 2.0}))


def test_partition_json():
    d = PART[0].to_dict()
    import json
    again = json.loads(json.dumps(d))
    assert again["Phi"] == pytest.approx(PART[0].Phi.tolist())
    assert all(abs(abs(p) - 2) < 1e-10 for p in again["Phi"])
