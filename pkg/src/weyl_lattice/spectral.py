"""Reduced spectral data: r-hat on the circle, the measure sigma and the
coupling ratio m / q on the doubly covered real spectrum.

Circle samples live on a graded grid theta = w(s), s equispaced. The
grading clusters nodes at theta = 0 and theta = pi where the data have
square-root type behaviour, which keeps the trapezoid rule high order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .factor import FactorR, g_direct, g_direct_circle
from .partition import MEMBERSHIP_TOL, SpectrumPartition, s_sign
from .weyl import WeylField

__all__ = [
    "SpectralDataError",
    "CircleGrid",
    "Rho1Measure",
    "Rho2Atoms",
    "ACCoefficients",
    "ACComponent",
    "SigmaAtom",
    "ReducedSpectralData",
    "rho1",
    "rho2",
    "ac_coefficients",
    "rhat",
    "sigma_atoms",
    "build_data",
    "gap_coefficients",
    "synthetic_component",
    "synthetic_data",
    "direct_u",
]

log = logging.getLogger(__name__)

SCHEMA = 1
RHAT_REJECT = 1 - 1e-6
# |r-hat| tends to 1 at theta = 0, pi whenever the matrix is not free, so
# the contraction test is applied away from the two band edges
EDGE_GUARD = 1e-3
R_FLOOR = 1e-12
MASS_FLOOR = 1e-12


class SpectralDataError(RuntimeError):
    """The reduced data violate a structural requirement."""


# circle grid ----------------------------------------------------------------

def _grading(s, order: int):
    if order == 4:
        sn = np.sin(s)
        return (s - (2 / 3) * np.sin(2 * s) + np.sin(4 * s) / 12,
                (8 / 3) * sn ** 4, (32 / 3) * sn ** 3 * np.cos(s))
    if order == 2:
        return s - np.sin(2 * s) / 2, 2 * np.sin(s) ** 2, 2 * np.sin(2 * s)
    if order == 0:
        return s.copy(), np.ones_like(s), np.zeros_like(s)
    raise ValueError(f"unsupported grading {order}; use 0, 2 or 4")


@dataclass(frozen=True, eq=False)
class CircleGrid:
    """M nodes, symmetric under theta -> -theta (node j pairs with M-1-j)."""
    M: int
    grading: int
    s: np.ndarray
    theta: np.ndarray
    weight: np.ndarray  # d theta quadrature weights
    wp: np.ndarray
    wpp: np.ndarray

    @classmethod
    def build(cls, M: int = 512, grading: int = 4) -> "CircleGrid":
        if M < 8 or M % 2:
            raise ValueError("circle node count must be even and >= 8")
        h = 2 * np.pi / M
        s = (np.arange(M) + 0.5 - M / 2) * h
        theta, wp, wpp = _grading(s, grading)
        return cls(M, grading, s, theta, wp * h, wp, wpp)

    @property
    def xi(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def mirror(self) -> np.ndarray:
        return np.arange(self.M)[::-1]

    def to_dict(self) -> dict:
        return {"M": self.M, "grading": self.grading}


# measures ---------------------------------------------------------------------

@dataclass(frozen=True)
class Rho1Measure:
    points: np.ndarray
    masses: np.ndarray
    kinds: tuple  # "phi" or "omega1" per point
    winding: tuple


@dataclass(frozen=True)
class Rho2Atoms:
    points: np.ndarray  # inner points alpha^{-1} in (-1, 1)
    masses: np.ndarray


def _contour(F, z0: float, radius: float, n: int = 256):
    w = np.exp(2j * np.pi * np.arange(n) / n)
    z = z0 + radius * w
    vals = F(z)
    res = np.mean(vals * radius * w)
    return res, vals


def rho1(field: WeylField, part: SpectrumPartition) -> Rho1Measure:
    """Point masses of the measure of -1/N at Phi and Omega_1.

    The mass at a simple zero of N is Res(1/N) = 1/N'; at points of Omega_1
    N has a pole and the mass vanishes.
    """
    pts = [(float(p), "phi") for p in part.Phi] + [(float(p), "omega1") for p in part.omega1]
    allp = np.array([p for p, _ in pts] + [1.0, -1.0] + [1 / p for p, _ in pts])
    points, masses, kinds, wind = [], [], [], []
    for p, kind in pts:
        gaps = np.abs(allp - p)
        gap = float(np.min(gaps[gaps > MEMBERSHIP_TOL]))
        r = min(1e-3, 0.25 * gap)
        res1, _ = _contour(lambda z: 1 / field.N(z), p, r)
        res2, vals = _contour(lambda z: 1 / field.N(z), p, r / 2)
        if abs(res1 - res2) > 1e-8 * max(1.0, abs(res1)):
            raise SpectralDataError(f"1/N is not meromorphic with a single pole near {p}")
        nv = 1 / vals
        winding = int(round(np.sum(np.diff(np.unwrap(np.angle(np.append(nv, nv[0]))))) / (2 * np.pi)))
        if kind == "phi" and winding != 1:
            raise SpectralDataError(f"zero of N at {p} is not simple (winding {winding})")
        mass = float(res1.real)
        if mass < -1e-10:
            raise SpectralDataError(f"negative rho_1 mass {mass} at {p}")
        points.append(p)
        masses.append(max(mass, 0.0))
        kinds.append(kind)
        wind.append(winding)
    return Rho1Measure(np.array(points), np.array(masses), tuple(kinds), tuple(wind))


def rho2(pairs: Sequence[tuple]) -> Rho2Atoms:
    """pairs of (inner point, right mass, left mass) of common poles.

    The inner point alpha^{-1} of the pair carries
    (m_R / m_L) (m_R + m_L); the outer point carries nothing.
    """
    pts, masses = [], []
    for t, m_r, m_l in pairs:
        if not abs(t) < 1:
            raise ValueError("rho_2 lives on the inner point of each pair")
        if m_r <= 0 or m_l <= 0:
            raise SpectralDataError("common pole without both half-lattice masses")
        pts.append(float(t))
        masses.append((m_r / m_l) * (m_r + m_l))
    return Rho2Atoms(np.array(pts), np.array(masses))


# circle coefficients -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ACCoefficients:
    """Coefficients on the circle nodes (and on Omega_2^a components)."""
    theta: np.ndarray
    q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    components: tuple = ()

    def ratio_bounds(self) -> tuple[float, float]:
        with np.errstate(divide="ignore", invalid="ignore"):
            ba = np.abs(self.b / self.a)
            dc = np.abs(self.d / self.c)
        return float(np.nanmax(ba)), float(np.nanmax(dc))


def _n_four(field: WeylField, theta):
    return (field.n_circle(theta, 1), field.n_circle(theta, -1),
            field.n_circle(-theta, 1), field.n_circle(-theta, -1))


def ac_coefficients(field: WeylField, theta) -> ACCoefficients:
    theta = np.asarray(theta, dtype=float)
    npl, nmi, npl_i, nmi_i = _n_four(field, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (npl_i - nmi) / (npl_i - npl)
        b = (npl - nmi) / (npl - npl_i)
        c = (nmi_i - npl) / (nmi_i - nmi)
        d = (nmi - npl) / (nmi - nmi_i)
        q = 2 * np.sqrt(np.abs(npl.imag * nmi.imag)) / np.abs(npl - nmi_i)
    return ACCoefficients(theta, q, a, b, c, d)


@dataclass(frozen=True, eq=False)
class RhatSamples:
    theta: np.ndarray
    value: np.ndarray
    closed_form: np.ndarray
    relation_residual: float
    closed_form_gap: float

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.value)))


def rhat(R: FactorR, theta, coeffs: ACCoefficients | None = None) -> RhatSamples:
    """r-hat from the boundary values of R, with the closed form and the
    relation between the two ways of writing the jump as audits."""
    theta = np.asarray(theta, dtype=float)
    field = R.field
    coeffs = ac_coefficients(field, theta) if coeffs is None else coeffs
    Rp, Rm = R.circle(theta, 1), R.circle(theta, -1)
    Rpi, Rmi = R.circle(-theta, 1), R.circle(-theta, -1)
    value = -(Rp - Rm) / (Rpi + Rmi)
    npl, nmi = field.n_circle(theta, 1), field.n_circle(theta, -1)
    xi = np.exp(1j * theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (npl - nmi) / (xi - 1 / xi) * Rp * Rm / (1 + coeffs.q)
        rel = (coeffs.b / coeffs.a) * (Rp / Rpi) + (coeffs.d / coeffs.c) * (Rm / Rmi)
    scale = np.maximum(np.abs(coeffs.b / coeffs.a), 1e-300)
    ok = np.isfinite(rel)
    relation = float(np.max(np.abs(rel[ok]) / scale[ok])) if np.any(ok) else 0.0
    gap = float(np.max(np.abs(closed - value)))
    return RhatSamples(theta, value, closed, relation, gap)


# sigma ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SigmaAtom:
    beta: float
    weight: float
    kind: str  # "rho1" or "rho2"
    mass: float

    @property
    def s(self) -> float:
        return float(s_sign(self.beta))


def sigma_atoms(R: FactorR, r1: Rho1Measure, r2: Rho2Atoms | None = None,
                r2_modulus: Callable | None = None) -> list:
    """Atoms of sigma; zero-mass points of rho_1 are not part of the support."""
    out = []
    for beta, mass in zip(r1.points, r1.masses):
        if mass <= MASS_FLOOR:
            continue
        rb = float(np.real(R(np.array([1 / beta + 0j]))[0]))
        if abs(rb) < R_FLOOR:
            raise SpectralDataError(f"R vanishes at the mirror of the atom {beta}")
        w = abs(beta - 1 / beta) / abs(beta) * mass / rb ** 2
        out.append(SigmaAtom(float(beta), float(w), "rho1", float(mass)))
    if r2 is not None:
        for beta, mass in zip(r2.points, r2.masses):
            rmod2 = float(r2_modulus(beta)) if r2_modulus else float(abs(R(np.array([beta + 0j]))[0]) ** 2)
            w = rmod2 / (abs(beta) * abs(beta - 1 / beta)) * mass
            out.append(SigmaAtom(float(beta), float(w), "rho2", float(mass)))
    return out


# doubly covered continuous spectrum beyond the circle ---------------------------------

@dataclass(frozen=True, eq=False)
class ACComponent:
    """One component of Omega_2^a, sampled at midpoints of a uniform grid in
    x = log|beta| on the outer interval; the inner nodes are the reciprocals.

    weight_* are sigma weights of the nodes in the x variable,
    p h / (2 pi q); coupling_* is m(beta) / q(beta^{-1}).
    """
    sign: int
    x: np.ndarray
    h: float
    p: np.ndarray
    q_out: np.ndarray
    q_in: np.ndarray
    m_out: np.ndarray
    m_in: np.ndarray

    @property
    def beta_out(self) -> np.ndarray:
        return self.sign * np.exp(self.x)

    @property
    def beta_in(self) -> np.ndarray:
        return self.sign * np.exp(-self.x)

    @property
    def weight_out(self) -> np.ndarray:
        return self.p * self.h / (2 * np.pi * self.q_out)

    @property
    def weight_in(self) -> np.ndarray:
        return self.p * self.h / (2 * np.pi * self.q_in)

    @property
    def coupling_out(self) -> np.ndarray:
        return self.m_out / self.q_in

    @property
    def coupling_in(self) -> np.ndarray:
        return self.m_in / self.q_out

    def density_out(self) -> np.ndarray:
        """sigma density in beta: p / (2 pi |beta| q)."""
        return self.p / (2 * np.pi * np.abs(self.beta_out) * self.q_out)

    def to_dict(self) -> dict:
        return {"sign": self.sign, "x": self.x.tolist(), "h": self.h, "p": self.p.tolist(),
                "q_out": self.q_out.tolist(), "q_in": self.q_in.tolist(),
                "m_out": self.m_out.tolist(), "m_in": self.m_in.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ACComponent":
        arr = lambda k: np.asarray(d[k], dtype=float)
        return cls(int(d["sign"]), arr("x"), float(d["h"]), arr("p"), arr("q_out"),
                   arr("q_in"), arr("m_out"), arr("m_in"))


@dataclass(frozen=True)
class GapCoefficients:
    p: np.ndarray
    q: np.ndarray
    m: np.ndarray


def gap_coefficients(alpha, sigma_self, sigma_mirror, r_ratio, gamma2, chi0) -> GapCoefficients:
    """p, q, m from the densities at alpha (sigma_self) and at 1/alpha
    (sigma_mirror); r_ratio = |R(1/alpha)| / |R(alpha)|."""
    rt = np.sqrt(np.asarray(sigma_mirror) / np.asarray(sigma_self))
    p = (rt + 1 / rt) * np.tan(np.abs(gamma2))
    q = np.asarray(r_ratio) * rt
    m = (rt - 1 / rt) * np.cos(np.asarray(chi0) * np.pi)
    return GapCoefficients(p, q, m)


def gap_coefficients_mu(alpha, mu, r_ratio, gamma2, chi0) -> GapCoefficients:
    """The same coefficients written through mu = sqrt(rho'_R / rho'_L)."""
    s = s_sign(alpha)
    p = (mu + 1 / mu) * np.tan(np.abs(gamma2))
    q = np.asarray(r_ratio) * mu ** s
    m = s * (mu - 1 / mu) * np.cos(np.asarray(chi0) * np.pi)
    return GapCoefficients(p, q, m)


def synthetic_component(lo: float, hi: float, n: int, rho_right: Callable, rho_left: Callable,
                        eta: Callable, r_modulus: Callable, chi0: int = 0,
                        sign: int = 1) -> ACComponent:
    """Omega_2^a component over the outer interval sign * (lo, hi), 1 < lo < hi,
    from profiles in lambda = t + 1/t: the two densities, the argument eta of M
    in (0, pi), and a positive modulus |R(t)| on both sides of the circle."""
    if not 1 < lo < hi:
        raise ValueError("outer interval must satisfy 1 < lo < hi")
    h = (np.log(hi) - np.log(lo)) / n
    x = np.log(lo) + (np.arange(n) + 0.5) * h
    out = sign * np.exp(x)
    inn = 1 / out
    lam = out + inn
    rr, rl, et = rho_right(lam), rho_left(lam), eta(lam)
    if np.any(rr <= 0) or np.any(rl <= 0):
        raise SpectralDataError("synthetic densities must be positive on the component")
    if np.any(et <= 0) or np.any(et >= np.pi):
        raise SpectralDataError("eta must stay inside (0, pi)")
    g2_out = -0.5 * s_sign(out) * (et - chi0 * np.pi)
    g2_in = -0.5 * s_sign(inn) * (et - chi0 * np.pi)
    ratio_out = r_modulus(inn) / r_modulus(out)
    # sigma(alpha) is the left density outside the disk and the right one inside
    co = gap_coefficients(out, rl, rr, ratio_out, g2_out, chi0)
    ci = gap_coefficients(inn, rr, rl, 1 / ratio_out, g2_in, chi0)
    if np.max(np.abs(co.p - ci.p)) > 1e-12 * np.max(co.p):
        raise SpectralDataError("p is not symmetric under alpha -> 1/alpha")
    return ACComponent(sign, x, h, co.p, co.q, ci.q, co.m, ci.m)


# the data object ------------------------------------------------------------------

@dataclass(eq=False)
class ReducedSpectralData:
    grid: CircleGrid
    rhat: np.ndarray
    atoms: list
    components: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def rhat_sup(self) -> float:
        return float(np.max(np.abs(self.rhat))) if len(self.rhat) else 0.0

    @property
    def rhat_interior_sup(self) -> float:
        inner = np.abs(np.sin(self.grid.theta)) >= EDGE_GUARD
        return float(np.max(np.abs(self.rhat[inner]))) if np.any(inner) else 0.0

    @property
    def d_bound(self) -> float:
        return 0.5 * (1 - self.rhat_sup ** 2)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "grid": self.grid.to_dict(),
            "theta": self.grid.theta.tolist(),
            "rhat_re": self.rhat.real.tolist(),
            "rhat_im": self.rhat.imag.tolist(),
            "atoms": [{"beta": a.beta, "weight": a.weight, "kind": a.kind, "mass": a.mass}
                      for a in self.atoms],
            "components": [c.to_dict() for c in self.components],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReducedSpectralData":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported data schema {d.get('schema')!r}")
        g = d["grid"]
        grid = CircleGrid.build(int(g["M"]), int(g["grading"]))
        rh = np.asarray(d["rhat_re"], dtype=float) + 1j * np.asarray(d["rhat_im"], dtype=float)
        if rh.shape != (grid.M,):
            raise ValueError("r-hat samples do not match the circle grid")
        atoms = [SigmaAtom(float(a["beta"]), float(a["weight"]), str(a["kind"]), float(a.get("mass", 0.0)))
                 for a in d.get("atoms", [])]
        comps = [ACComponent.from_dict(c) for c in d.get("components", [])]
        return cls(grid, rh, atoms, comps, dict(d.get("meta", {})))

    def validate(self) -> None:
        if not self.rhat_sup < 1:
            raise SpectralDataError(f"max |r-hat| = {self.rhat_sup:.12g} is not below 1")
        if self.rhat_interior_sup >= RHAT_REJECT:
            raise SpectralDataError(
                f"|r-hat| = {self.rhat_interior_sup:.12g} away from the band edges is not below 1")
        for a in self.atoms:
            if a.weight <= 0 or not np.isfinite(a.weight):
                raise SpectralDataError(f"atom at {a.beta} has weight {a.weight}")
            if abs(abs(a.beta) - 1) < MEMBERSHIP_TOL:
                raise SpectralDataError(f"atom at {a.beta} sits on the circle")
        for c in self.components:
            if np.any(c.p <= 0):
                raise SpectralDataError("p must be positive on Omega_2^a")


def build_data(R: FactorR, grid: CircleGrid | None = None) -> ReducedSpectralData:
    grid = CircleGrid.build() if grid is None else grid
    field_ = R.field
    coeffs = ac_coefficients(field_, grid.theta)
    rh = rhat(R, grid.theta, coeffs)
    r1 = rho1(field_, R.partition)
    atoms = sigma_atoms(R, r1)
    ba, dc = coeffs.ratio_bounds()
    meta = {
        "sigma": R.sigma,
        "rhat_sup": rh.sup,
        "rhat_margin": 1 - rh.sup,
        "rhat_closed_form_gap": rh.closed_form_gap,
        "relation_residual": rh.relation_residual,
        "max_b_over_a": ba,
        "max_d_over_c": dc,
        "min_q": float(np.min(coeffs.q)),
        "rho1": {"points": r1.points.tolist(), "masses": r1.masses.tolist(), "kinds": list(r1.kinds)},
    }
    data = ReducedSpectralData(grid, rh.value, atoms, [], meta)
    meta["rhat_interior_sup"] = data.rhat_interior_sup
    data.validate()
    return data


def synthetic_data(grid: CircleGrid, rhat_fn: Callable, atoms: Sequence[SigmaAtom] = (),
                   components: Sequence[ACComponent] = ()) -> ReducedSpectralData:
    data = ReducedSpectralData(grid, np.asarray(rhat_fn(grid.theta), dtype=complex),
                               list(atoms), list(components), {"synthetic": True})
    data.validate()
    return data


# the direct side of the fundamental equation -----------------------------------------

def direct_u(R: FactorR, data: ReducedSpectralData, k: int) -> tuple[np.ndarray, np.ndarray]:
    """u(k, .) on the atoms and the circle nodes from direct boundary values
    of g: -beta^{-2(k+1)} g(k, 1/beta) at atoms and on the circle the average
    of the two boundary values of g at the mirror node."""
    theta = data.grid.theta
    xi = np.exp(1j * theta)
    gp = g_direct_circle(R, k, -theta, 1)
    gm = g_direct_circle(R, k, -theta, -1)
    u_circle = -xi ** (-2 * (k + 1)) * (gp + gm) / 2
    betas = np.array([a.beta for a in data.atoms])
    if len(betas):
        u_atoms = -betas ** (-2.0 * (k + 1)) * g_direct(R, k, 1 / betas + 0j)
    else:
        u_atoms = np.zeros(0, dtype=complex)
    return np.asarray(u_atoms, dtype=complex), u_circle
