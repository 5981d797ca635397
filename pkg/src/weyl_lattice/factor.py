"""The factor R(z) with R(z) R(1/z) N(z) = sigma (z - 1/z), and the function g.

R = C R0 R1 R2 R3 Rmu:
  R0    rational factor over the starred gap points;
  R1,R2 line integrals of the arguments on the simple and double
        spectrum beyond the unit circle image;
  R3    circle integral of -g3/2, g3 built from arg M on [-2, 2];
  Rmu   circle integral of ln mu, mu^2 the ratio of the two densities.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .kernels import (CircleArg, LineArg, _harmonics, _series, angle_offset, circle_boundary,
                      circle_mult, line_mult)
from .partition import SpectrumPartition, build_partition, s_sign
from .weyl import WeylField

__all__ = [
    "FactorizationError",
    "FactorR",
    "build_R",
    "check_factorization",
    "g_direct",
    "g_direct_circle",
    "direct_entries",
    "off_support_points",
]

log = logging.getLogger(__name__)

EDGE_PROBE = 1e-7
R_INF_RADIUS = 1e6
FACTOR_TOL = 1e-6


class FactorizationError(RuntimeError):
    """The factorization identity failed on an accepted instance."""


def _snap_edge(value: float, where: str) -> float:
    """Limit of arg M at a band edge: one of 0, pi/2, pi."""
    for target in (0.0, np.pi / 2, np.pi):
        if abs(value - target) < 1e-3:
            return target
    raise FactorizationError(f"argument of M has no limit at the {where} band edge ({value:.4g})")


def _gamma3_arg(field: WeylField) -> CircleArg:
    """-g3/2 as a circle argument with its two jumps declared."""

    def eta_circle(theta):
        return field.densities(2 * np.cos(np.abs(theta))).eta

    def g3(theta):
        theta = np.asarray(theta, dtype=float)
        return np.sign(theta) * (np.pi / 2 - eta_circle(theta))

    A = np.pi / 2 - _snap_edge(float(eta_circle(np.array([EDGE_PROBE]))[0]), "upper")
    B = np.pi / 2 - _snap_edge(float(eta_circle(np.array([np.pi - EDGE_PROBE]))[0]), "lower")
    # g3 jumps by 2A at 0 and by -2B across pi; the argument is -g3/2
    jumps = [(0.0, -A), (np.pi, B)]
    return CircleArg(lambda t: -0.5 * g3(t), [j for j in jumps if j[1] != 0.0], odd=True)


def _log_mu_arg(field: WeylField) -> CircleArg:
    def f(theta):
        d = field.densities(2 * np.cos(np.asarray(theta, dtype=float)))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(d.rho_right / d.rho_left) / 2

    return CircleArg(f)


def _gamma2_arg(part: SpectrumPartition, field: WeylField) -> LineArg:
    pieces = []
    for lo, hi in part.omega2_a:
        def g2(t):
            eta = field.densities(t + 1 / t).eta
            return -0.5 * s_sign(t) * (eta - part.chi0(t) * np.pi)
        pieces.append((lo, hi, g2))
    return LineArg([], pieces)


@dataclass
class FactorR:
    field: WeylField
    partition: SpectrumPartition
    gamma3: CircleArg
    log_mu: CircleArg
    line_arg: LineArg
    scale: float = 1.0  # the constant C
    sigma: int = 1
    meta: dict = field(default_factory=dict)

    # components ------------------------------------------------------------
    def r0(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for a in self.partition.numerators:
            out = out * (z - a)
        for p in self.partition.denominators:
            out = out / (z - p)
        return out

    def r0_circle(self, theta):
        """R0 at e^{i theta}; factors vanishing at +-1 without cancellation."""
        theta = np.asarray(theta, dtype=float)
        w = np.exp(1j * theta)
        out = np.ones_like(w)
        for a in self.partition.numerators:
            if a == 1.0:
                out = out * np.expm1(1j * theta)
            elif a == -1.0:
                out = out * -np.expm1(1j * angle_offset(theta, np.pi))
            else:
                out = out * (w - a)
        for p in self.partition.denominators:
            out = out / (w - p)
        return out

    def r_line(self, z):
        if not self.line_arg.pieces:
            return np.ones_like(np.asarray(z, dtype=complex))
        return line_mult(self.line_arg, z)

    def r3(self, z):
        return circle_mult(self.gamma3, np.asarray(z, dtype=complex))

    def r_mu(self, z):
        z = np.asarray(z, dtype=complex)
        h = _harmonics(self.log_mu)
        inside = np.abs(z) < 1
        zi = np.where(inside, z, 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            wo = np.where(inside, 0, 1 / z)
        e = np.where(inside, -(h.c_pos[0] + _series(h.c_pos, zi)), _series(h.c_neg, wo))
        return np.exp(e)

    def r_mu_circle(self, theta, side):
        h = _harmonics(self.log_mu)
        w = np.exp(1j * np.asarray(theta, dtype=float))
        if side > 0:
            return np.exp(-(h.c_pos[0] + _series(h.c_pos, w)))
        return np.exp(_series(h.c_neg, 1 / w))

    # R itself ------------------------------------------------------------------
    def __call__(self, z):
        """R(z) normalized so that R(infinity) = C."""
        z = np.asarray(z, dtype=complex)
        return self.scale * self.r0(z) * self.r_line(z) * self.r3(z) * self.r_mu(z)

    def normalized(self, z):
        """R(z) / R(infinity)."""
        return self(z) / self.scale

    def circle(self, theta, side):
        """Boundary values R^+ (side=+1) and R^- (side=-1) at e^{i theta}."""
        theta = np.asarray(theta, dtype=float)
        w = np.exp(1j * theta)
        return (self.scale * self.r0_circle(theta) * self.r_line(w)
                * circle_boundary(self.gamma3, theta, side) * self.r_mu_circle(theta, side))

    def describe(self) -> dict:
        return {
            "sigma": self.sigma,
            "scale": self.scale,
            "r0_zeros": list(self.partition.numerators),
            "r0_poles": list(self.partition.denominators),
            "gamma3_jumps": [list(j) for j in self.gamma3.jumps],
            "log_mu_mean": float(_harmonics(self.log_mu).c_pos[0].real),
            **self.meta,
        }


def off_support_points(part: SpectrumPartition, n: int, seed: int = 0, gap: float = 0.05):
    """Random points at distance >= gap from the circle, the real singular
    sets and the origin."""
    rng = np.random.default_rng(seed)
    sing = np.concatenate([part.omega1, 1 / part.omega1 if len(part.omega1) else [],
                           part.Phi, 1 / part.Phi if len(part.Phi) else [], part.omega2_s, [0.0]])
    out = []
    while len(out) < n:
        r = np.exp(rng.uniform(np.log(0.2), np.log(5.0)))
        z = r * np.exp(1j * rng.uniform(-np.pi, np.pi))
        if abs(abs(z) - 1) < gap:
            continue
        if len(sing) and np.min(np.abs(z - sing)) < gap:
            continue
        if any(lo - gap < z.real < hi + gap for lo, hi in part.omega2_a) and abs(z.imag) < gap:
            continue
        out.append(z)
    return np.array(out)


def build_R(field: WeylField, part: SpectrumPartition | None = None,
            tol: float = FACTOR_TOL) -> FactorR:
    part = build_partition(field) if part is None else part
    R = FactorR(field, part, _gamma3_arg(field), _log_mu_arg(field), _gamma2_arg(part, field))
    # fix C and sigma from one reference point; check_factorization audits the rest
    z_ref = off_support_points(part, 1, seed=12345)[0]
    K = complex(R(z_ref) * R(1 / z_ref) * field.N(z_ref) / (z_ref - 1 / z_ref))
    if abs(K.imag) > 1e-6 * abs(K):
        raise FactorizationError(f"R(z)R(1/z)N(z)/(z - 1/z) is not real at the reference point: {K}")
    R.sigma = 1 if K.real > 0 else -1
    R.scale = float(1 / np.sqrt(abs(K.real)))
    R.meta["reference_point"] = [z_ref.real, z_ref.imag]
    return R


def check_factorization(R: FactorR, n_points: int = 50, n_circle: int = 64, seed: int = 0) -> dict:
    field = R.field
    pts = off_support_points(R.partition, n_points, seed=seed)
    lhs = R(pts) * R(1 / pts) * field.N(pts)
    rhs = R.sigma * (pts - 1 / pts)
    rel = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    theta = -np.pi + (np.arange(n_circle) + 0.5) * 2 * np.pi / n_circle
    plus = R.circle(theta, 1) * R.circle(-theta, 1) * np.abs(field.n_circle(theta, 1).imag)
    minus = R.circle(theta, -1) * R.circle(-theta, -1) * np.abs(field.n_circle(theta, -1).imag)
    circ = float(np.max(np.abs(plus - minus) / np.maximum(np.abs(plus), 1e-300)))
    return {"sigma": R.sigma, "factorization_residual": rel, "circle_residual": circ,
            "n_points": n_points, "n_circle": n_circle}


# the function g on the direct side ------------------------------------------------

def g_direct(R: FactorR, k: int, z):
    """g(k, z) = (R(z)/R(inf)) z^{-(k+1)} h_k psi(k, z) off the circle."""
    z = np.asarray(z, dtype=complex)
    inside = np.abs(z) < 1
    out = np.empty(z.shape, dtype=complex)
    hk = R.field.h(k)
    if np.any(inside):
        zi = z[inside]
        out[inside] = R.normalized(zi) * hk * R.field.psi_scaled(k, k, zi, True)[0]
    if np.any(~inside):
        zo = z[~inside]
        out[~inside] = R.normalized(zo) * hk * R.field.psi_scaled(k, k, zo, False)[0]
    return out if out.ndim else complex(out)


def g_at_zero(R: FactorR, k: int) -> float:
    return float((R.normalized(np.array([0j])) * R.field.h(k) ** 2)[0].real)


def g_direct_circle(R: FactorR, k: int, theta, side: int):
    """g^+ (side=+1) or g^- (side=-1) at e^{i theta}."""
    theta = np.asarray(theta, dtype=float)
    w = np.exp(1j * theta)
    psi = R.field.psi_scaled(k, k, w, side > 0)[0]
    return R.circle(theta, side) / R.scale * R.field.h(k) * psi


def direct_entries(R: FactorR, k_lo: int, k_hi: int) -> dict:
    """Entries recovered from the direct g: b_{k-1}^2 = g(k,0)/g(k-1,0)
    and a_k = lim z (g(k,z) - g(k+1,z)) / g(k,z)."""
    from .weyl import richardson_limit

    ks = range(k_lo, k_hi + 1)
    b = {k - 1: float(np.sqrt(g_at_zero(R, k) / g_at_zero(R, k - 1))) for k in ks}
    ws = np.array([1e-3, 5e-4, 2.5e-4, 1.25e-4])
    a = {}
    for k in ks:
        vals = []
        for w in ws:
            z = np.array([1 / w + 0j])
            gk, gk1 = g_direct(R, k, z), g_direct(R, k + 1, z)
            vals.append((gk - gk1) / (w * gk))
        lim, _ = richardson_limit(vals, ws)
        a[k] = float(np.real(lim[0]))
    return {"a": a, "b": b}
