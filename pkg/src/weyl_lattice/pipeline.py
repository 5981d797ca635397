"""End-to-end runs shared by the command line and the test-suite.

Every report is a plain dict carrying "schema": 1.
"""
from __future__ import annotations

import logging
import time

import numpy as np

from .classical import reconstruct_classical, scattering_data
from .factor import build_R, check_factorization
from .kernels import identity_suite
from .lattice import LatticeSpec, SpecError
from .partition import build_partition, validate_conditions
from .solver import (assemble_L, circle_pv_matrix, coercivity, reconstruct_entries, residual_of,
                     solve_u)
from .spectral import (SCHEMA, CircleGrid, SigmaAtom, build_data, direct_u, synthetic_component,
                       synthetic_data)
from .toda import DEFAULT_TIME_SCALE, evolve_and_reconstruct
from .weyl import RICHARDSON_LADDER, WeylField, richardson_limit

__all__ = [
    "ConditionsError",
    "NumericalRejection",
    "prepare",
    "direct_table",
    "partition_report",
    "factorize_report",
    "data_report",
    "invert_report",
    "direct_u_residual",
    "roundtrip",
    "isp_report",
    "toda_report",
    "selfcheck",
    "synthetic_instance",
]

log = logging.getLogger(__name__)

FACTOR_TOL = 1e-6


class ConditionsError(RuntimeError):
    """The instance violates one of the conditions A) to E)."""

    def __init__(self, report):
        failed = sorted(k for k, v in report.passed.items() if not v)
        super().__init__(f"conditions violated: {', '.join(failed)}")
        self.report = report


class NumericalRejection(RuntimeError):
    """A residual, certificate or comparison exceeded its tolerance."""


def prepare(spec: LatticeSpec):
    field = WeylField(spec)
    part = build_partition(field)
    cond = validate_conditions(part, field)
    if not cond.ok:
        raise ConditionsError(cond)
    return field, part, cond


def direct_table(spec: LatticeSpec, M: int = 512) -> list[dict]:
    """Boundary values of n and N on a uniform circle grid and the two
    densities at 2 cos(theta); error_est is the gap between the exact
    boundary value and the extrapolated one."""
    field = WeylField(spec)
    theta = -np.pi + (np.arange(M) + 0.5) * 2 * np.pi / M
    rows = []
    for side in (1, -1):
        exact = field.n_circle(theta, side)
        vals = [field.n((1 - side * e) * np.exp(1j * theta)) for e in RICHARDSON_LADDER]
        err = np.abs(richardson_limit(vals, RICHARDSON_LADDER)[0] - exact)
        Nv = field.N_circle(theta, side)
        for th, v, e, nv in zip(theta, exact, err, Nv):
            rows.append({"theta": th, "function": "n", "side": side, "re": v.real, "im": v.imag,
                         "error_est": e})
            rows.append({"theta": th, "function": "N", "side": side, "re": nv.real, "im": nv.imag,
                         "error_est": float("nan")})
    dens = field.densities(2 * np.cos(theta[theta > 0]))
    for th, rr, rl in zip(theta[theta > 0], dens.rho_right, dens.rho_left):
        rows.append({"theta": th, "function": "rho_right", "side": 0, "re": rr, "im": 0.0, "error_est": 0.0})
        rows.append({"theta": th, "function": "rho_left", "side": 0, "re": rl, "im": 0.0, "error_est": 0.0})
    return rows


def partition_report(spec: LatticeSpec) -> dict:
    field = WeylField(spec)
    part = build_partition(field)
    cond = validate_conditions(part, field)
    out = {"schema": SCHEMA, "partition": part.to_dict(), "conditions": cond.to_dict(),
           "conditions_ok": cond.ok}
    if not cond.ok:
        raise ConditionsError(cond)
    return out


def factorize_report(spec: LatticeSpec, seed: int = 0):
    field, part, cond = prepare(spec)
    R = build_R(field, part)
    chk = check_factorization(R, seed=seed)
    rep = {"schema": SCHEMA, "factor": R.describe(), "check": chk, "conditions": cond.to_dict()}
    if not (chk["factorization_residual"] < FACTOR_TOL and chk["circle_residual"] < FACTOR_TOL):
        raise NumericalRejection(f"factorization residuals {chk['factorization_residual']:.3g}, "
                                 f"{chk['circle_residual']:.3g} exceed {FACTOR_TOL:g}")
    return R, rep


def data_report(spec: LatticeSpec, M: int = 512, grading: int = 4, seed: int = 0):
    R, frep = factorize_report(spec, seed)
    data = build_data(R, CircleGrid.build(M, grading))
    data.meta["factorization"] = frep["check"]
    data.meta["conditions"] = frep["conditions"]
    return R, data


def _certify(rec) -> None:
    for k, c in rec.coercivity.items():
        if not c["passed"]:
            raise NumericalRejection(f"coercivity certificate failed at k = {k}: probe min "
                                     f"{c['probe_min']:.3g} below 0.9 d = {0.9 * c['d']:.3g}")


def invert_report(data, k_lo: int, k_hi: int, t: float = 0.0, threads: int = 1, seed: int = 0,
                  rhs: str = "decay") -> dict:
    rec = reconstruct_entries(data, k_lo, k_hi, t=t, threads=threads, seed=seed, rhs=rhs)
    out = {"schema": SCHEMA, "t": t, **rec.to_dict(), "rhat_sup": data.rhat_sup,
           "d": data.d_bound, "max_solve_residual": float(max(rec.residuals.values()))}
    _certify(rec)
    return out


def direct_u_residual(R, data, k: int) -> float:
    """Residual of the discretized fundamental equation at u built from
    direct boundary values; independent of the linear solve."""
    if data.components:
        raise ValueError("direct u needs an instance without Omega_2^a components")
    L = assemble_L(data, k)
    ua, uc = direct_u(R, data, k)
    return residual_of(L, L.scale * np.concatenate([ua, uc]))


def roundtrip(spec: LatticeSpec, k_lo: int = -5, k_hi: int = 5, M: int = 512, grading: int = 4,
              tol: float = 1e-4, threads: int = 1, seed: int = 0) -> dict:
    t0 = time.perf_counter()
    R, data = data_report(spec, M, grading, seed)
    rec = reconstruct_entries(data, k_lo, k_hi, threads=threads, seed=seed)
    err_a = max(abs(rec.a[k] - spec.a_at(k)) for k in rec.a)
    err_b = max(abs(rec.b[k] - spec.b_at(k)) for k in rec.b)
    du = max(direct_u_residual(R, data, k) for k in range(max(k_lo, -3), min(k_hi, 3) + 1))
    coer = min(c["probe_min"] / max(c["d"], 1e-300) for c in rec.coercivity.values())
    fac = data.meta["factorization"]
    checks = [
        ("entries", max(err_a, err_b), tol),
        ("factorization", fac["factorization_residual"], FACTOR_TOL),
        ("circle_identity", fac["circle_residual"], FACTOR_TOL),
        ("solve_residual", float(max(rec.residuals.values())), 1e-10),
        ("direct_u_residual", du, 1e-5),
    ]
    table = [{"check": n, "value": float(v), "tolerance": tl, "pass": bool(v < tl)} for n, v, tl in checks]
    table.append({"check": "coercivity_ratio", "value": float(coer), "tolerance": 0.9,
                  "pass": all(c["passed"] for c in rec.coercivity.values())})
    return {"schema": SCHEMA, "spec": spec.to_dict(), "k_range": [k_lo, k_hi],
            "sigma": R.sigma, "rhat_sup": data.rhat_sup, "rhat_margin": 1 - data.rhat_sup,
            "rhat_interior_sup": data.rhat_interior_sup,
            "atoms": [{"beta": a.beta, "weight": a.weight} for a in data.atoms],
            "a": {str(k): v for k, v in rec.a.items()}, "b": {str(k): v for k, v in rec.b.items()},
            "max_entry_error": float(max(err_a, err_b)), "table": table,
            "passed": all(r["pass"] for r in table), "conditions": data.meta["conditions"],
            "seconds": time.perf_counter() - t0}


def isp_report(spec: LatticeSpec, k_lo: int = -5, k_hi: int = 5, M: int = 512, grading: int = 4) -> dict:
    if not spec.has_free_tails():
        raise SpecError("the classical method needs free tails (a = 0, b = 1) on both sides")
    sd = scattering_data(spec, CircleGrid.build(M, grading))
    rec = reconstruct_classical(sd, k_lo, k_hi)
    err = max(max(abs(rec["a"][k] - spec.a_at(k)) for k in rec["a"]),
              max(abs(rec["b"][k] - spec.b_at(k)) for k in rec["b"]))
    return {"schema": SCHEMA, "scattering": {"bound_states": sd.bound_states.tolist(),
                                             "rho": sd.rho.tolist(), "sigma": sd.sigma.tolist(),
                                             "max_abs_r": float(np.max(np.abs(sd.r)))},
            "a": {str(k): v for k, v in rec["a"].items()}, "b": {str(k): v for k, v in rec["b"].items()},
            "max_entry_error": float(err)}


def toda_report(spec: LatticeSpec, times, k_lo: int = -5, k_hi: int = 5, M: int = 512,
                grading: int = 4, threads: int = 1, seed: int = 0,
                scale: float = DEFAULT_TIME_SCALE) -> dict:
    _, data = data_report(spec, M, grading, seed)
    snaps = evolve_and_reconstruct(data, spec, times, (k_lo, k_hi), scale, threads, seed)
    return {"schema": SCHEMA, "time_scale": scale, "snapshots": [s.to_dict() for s in snaps],
            "max_deviation": float(max(s.max_deviation for s in snaps))}


def _pv_closed_forms(M: int = 512) -> dict:
    """The circle operator against (1/pi) v.p. int e^{in t} K(t + phi) dt =
    [n = 0] + sign(n) e^{-in phi}, K(x) = 1/(1 - e^{-ix})."""
    out = {}
    for grading in (0, 4):
        g = CircleGrid.build(M, grading)
        C = circle_pv_matrix(g)
        interior = np.abs(np.sin(g.theta)) > 1e-2
        worst, wl2 = 0.0, 0.0
        for n in (-7, -2, 0, 1, 4, 11):
            err = np.abs(C @ np.exp(1j * n * g.theta) - ((n == 0) + np.sign(n) * np.exp(-1j * n * g.theta)))
            worst = max(worst, float(np.max(err[interior])))
            wl2 = max(wl2, float(np.sqrt(np.sum(g.weight * err ** 2) / (2 * np.pi))))
        out[f"circle_pv_grading{grading}_interior"] = worst
        out[f"circle_pv_grading{grading}_l2"] = wl2
    return out


def synthetic_instance(panels: int = 48, M: int = 256):
    """Reduced data with two doubly covered components (one on the negative
    side with chi0 = 1), one rho_2 atom and one rho_1 atom."""
    from .spectral import rho2
    grid = CircleGrid.build(M, 4)
    lo, hi = 2.5, 4.0
    l0, l1 = lo + 1 / lo, hi + 1 / hi
    bump = lambda lam: np.sqrt(np.clip((lam - l0 + 0.05) * (l1 + 0.05 - lam), 0, None))
    c1 = synthetic_component(lo, hi, panels, lambda l: 0.3 * bump(l) * (1 + 0.2 * np.sin(l)),
                             lambda l: 0.2 * bump(l) * (1 + 0.3 * np.cos(l)),
                             lambda l: np.pi / 2 + 0.4 * np.sin(2 * l), lambda t: 1 + 0.1 * np.abs(t))
    c2 = synthetic_component(1.5, 2.2, panels, lambda l: 0.25 + 0 * l, lambda l: 0.5 + 0 * l,
                             lambda l: 1.0 + 0 * l, lambda t: 1 / (1 + 0.2 * np.abs(t)), chi0=1, sign=-1)
    r2 = rho2([(0.4, 0.8, 0.2)])
    atoms = [SigmaAtom(0.4, 1.3 ** 2 / (0.4 * abs(0.4 - 2.5)) * r2.masses[0], "rho2", r2.masses[0]),
             SigmaAtom(-1.8, 0.7, "rho1", 0.1)]
    return synthetic_data(grid, lambda th: 0.45 * np.sin(th) * np.exp(1j * th) * (1 + 0.3 * np.cos(3 * th)),
                          atoms, [c1, c2])


def _synthetic_check(panels: int, seed: int) -> dict:
    data = synthetic_instance(panels)
    c1, c2 = data.components
    worst_res, ratio = 0.0, np.inf
    for k in (-2, 0, 2):
        L = assemble_L(data, k)
        sol = solve_u(data, k, L=L)
        cert = coercivity(L, seed=[seed, k + 1000])
        worst_res = max(worst_res, sol.residual)
        ratio = min(ratio, cert.probe_min / cert.d)
        if not cert.passed:
            raise NumericalRejection(f"synthetic coercivity failed at k = {k}")
    q_recip = max(float(np.max(np.abs(c.q_out * c.q_in - 1))) for c in (c1, c2))
    m_anti = max(float(np.max(np.abs(c.m_out + c.m_in))) for c in (c1, c2))
    return {"synthetic_solve_residual": worst_res, "synthetic_coercivity_ratio": float(ratio),
            "synthetic_p_min": float(min(np.min(c.p) for c in (c1, c2))),
            "synthetic_q_reciprocity": q_recip, "synthetic_m_antisymmetry": m_anti}


SELFCHECK_TOL = {"identity": 1e-8, "pv_interior": 1e-10, "pv_l2": 1e-4, "residual": 1e-10}


def selfcheck(seed: int = 0, panels: int = 64) -> dict:
    ids = {k: float(v) for k, v in identity_suite(seed).items()}
    pv = _pv_closed_forms()
    syn = _synthetic_check(panels, seed)
    checks = [(f"identity:{k}", v, SELFCHECK_TOL["identity"]) for k, v in ids.items()]
    checks += [(k, v, SELFCHECK_TOL["pv_interior"] if k.endswith("interior") else SELFCHECK_TOL["pv_l2"])
               for k, v in pv.items()]
    checks.append(("synthetic_solve_residual", syn["synthetic_solve_residual"], SELFCHECK_TOL["residual"]))
    table = [{"check": n, "value": float(v), "tolerance": t, "pass": bool(v < t)} for n, v, t in checks]
    return {"schema": SCHEMA, "table": table, "synthetic": syn,
            "passed": all(r["pass"] for r in table)}
