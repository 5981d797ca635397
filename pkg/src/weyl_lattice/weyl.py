"""Weyl functions of the two half-lattices and the functions n, N, M, psi.

Both half-lattice Weyl functions come from ratios of decaying solutions.
Constant tails close the recurrence exactly: on the tail the decaying
solution is a power of the root z of z + 1/z = (lam - a) / b with |z| < 1.
On the tail band the root sits on the unit circle and the side of approach
picks the branch, so boundary values are exact as well.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec, eval_pq, h_weights

__all__ = [
    "RICHARDSON_LADDER",
    "BoundaryValue",
    "DensityProfile",
    "WeylField",
    "decaying_root",
    "weyl_right",
    "weyl_left",
    "richardson_limit",
    "weyl_right_truncated",
    "truncation_gap",
]

RICHARDSON_LADDER = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
_ON_CIRCLE = 1e-10


def decaying_root(x, side=0):
    """Root z of z + 1/z = x with |z| <= 1.

    For real x in [-2, 2] both roots are unimodular; `side` is the sign of
    Im x in the limit (x + i0*side) and selects Im z < 0 for side > 0.
    """
    x = np.asarray(x, dtype=complex)
    s = np.sqrt(x * x - 4)
    z1 = (x - s) / 2
    z2 = (x + s) / 2
    z = np.where(np.abs(z1) <= np.abs(z2), z1, z2)
    pick = np.sign(x.imag)
    pick = np.where(np.abs(x.imag) > 0, pick, np.sign(side))
    on = np.abs(np.abs(z) - 1) < _ON_CIRCLE
    z_on = np.where(z1.imag * pick < 0, z1, z2)
    return np.where(on & (pick != 0), z_on, z)


def _right_ratio(spec: LatticeSpec, lam, side=0, root=None):
    """f(-1)/f(0) for the solution decaying to the right."""
    t = spec.right_tail
    z = decaying_root((lam - t.a) / t.b, side) if root is None else root
    k_top = spec.window_hi + 1
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = 1 / z  # f(k_top) / f(k_top + 1)
        for k in range(k_top, -1, -1):
            r = -((spec.a_at(k) - lam) + spec.b_at(k) / r) / spec.b_at(k - 1)
    return r


def _left_ratio(spec: LatticeSpec, lam, side=0, root=None):
    """f(0)/f(-1) for the solution decaying to the left."""
    t = spec.left_tail
    w = 1 / decaying_root((lam - t.a) / t.b, side) if root is None else root
    k_bot = spec.window_lo - 1
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rho = w  # f(k_bot) / f(k_bot - 1)
        for k in range(k_bot, 0):
            rho = -(spec.b_at(k - 1) / rho + (spec.a_at(k) - lam)) / spec.b_at(k)
    return rho


def weyl_right(spec: LatticeSpec, lam, side=0):
    """m^R(lam) = -f(0) / (b_{-1} f(-1)), f decaying to the right."""
    lam = np.asarray(lam, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -1 / (spec.b_minus1 * _right_ratio(spec, lam, side))


def weyl_left(spec: LatticeSpec, lam, side=0):
    """m^L(lam) = -f(-1) / (b_{-1} f(0)), f decaying to the left."""
    lam = np.asarray(lam, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -1 / (spec.b_minus1 * _left_ratio(spec, lam, side))


def _right_levels(spec: LatticeSpec, lam, N: int):
    """m_j of the half-lattices starting at site j, and the same with the
    lattice cut after site N - 1, for 0 <= j < N."""
    lam = np.asarray(lam, dtype=complex)
    m_tail = -1 / (spec.b_at(N - 1) * _right_ratio_from(spec, lam, N))
    full, cut = [None] * (N + 1), [None] * (N + 1)
    full[N], cut[N] = m_tail, np.zeros_like(lam)
    for j in range(N - 1, -1, -1):
        b2 = spec.b_at(j) ** 2
        full[j] = 1 / (spec.a_at(j) - lam - b2 * full[j + 1])
        cut[j] = 1 / (spec.a_at(j) - lam - b2 * cut[j + 1])
    return full, cut


def _right_ratio_from(spec: LatticeSpec, lam, start: int):
    """f(start - 1) / f(start) for the solution decaying to the right."""
    t = spec.right_tail
    z = decaying_root((lam - t.a) / t.b)
    k_top = max(spec.window_hi + 1, start)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = 1 / z
        for k in range(k_top, start - 1, -1):
            r = -((spec.a_at(k) - lam) + spec.b_at(k) / r) / spec.b_at(k - 1)
    return r


def weyl_right_truncated(spec: LatticeSpec, lam, N: int):
    """m^R of the right half-lattice cut after site N - 1 (a finite continued
    fraction); its Laurent series at infinity agrees with m^R in the first 2N
    coefficients."""
    if N < 1:
        raise ValueError("N must be positive")
    return _right_levels(spec, lam, N)[1][0]


def truncation_gap(spec: LatticeSpec, lam, N: int):
    """|m^R - m^R_N| without cancellation:
    m_j - y_j = b_j^2 m_j y_j (m_{j+1} - y_{j+1})."""
    full, cut = _right_levels(spec, lam, N)
    d = full[N]
    for j in range(N - 1, -1, -1):
        d = spec.b_at(j) ** 2 * full[j] * cut[j] * d
    return np.abs(d)


def richardson_limit(values, eps):
    """Extrapolate samples f(eps_j) to eps = 0 by Neville's scheme.

    Returns (limit, error estimate). values has the eps axis first.
    """
    table = [np.asarray(v, dtype=complex) for v in values]
    eps = np.asarray(eps, dtype=float)
    n = len(table)
    prev = table
    for level in range(1, n):
        prev = table
        table = [
            (eps[j] * prev[j + 1] - eps[j + level] * prev[j]) / (eps[j] - eps[j + level])
            for j in range(n - level)
        ]
    best = table[0]
    return best, np.abs(best - prev[-1])


@dataclass(frozen=True)
class BoundaryValue:
    point: float
    side: int
    value: complex
    extrapolation_error: float


@dataclass(frozen=True)
class DensityProfile:
    tau: np.ndarray
    rho_right: np.ndarray
    rho_left: np.ndarray
    mu: np.ndarray
    eta: np.ndarray
    eta_right: np.ndarray
    eta_left: np.ndarray


def _fold(arg):
    """Arguments of Herglotz boundary values live in [0, pi]."""
    a = np.angle(arg)
    return np.clip(np.where(a < -1e-9, a + np.pi, a), 0.0, np.pi)


class WeylField:
    """Evaluators for m^R, m^L, n, N, M and psi of one lattice."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.b = spec.b_minus1

    # lambda plane ------------------------------------------------------
    def m_right(self, lam, side=0):
        return weyl_right(self.spec, lam, side)

    def m_left(self, lam, side=0):
        return weyl_left(self.spec, lam, side)

    def M(self, lam, side=0):
        b = self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            return b * self.m_right(lam, side) - 1 / (b * self.m_left(lam, side))

    # z plane -------------------------------------------------------------
    def _n_inner(self, z, side):
        return -self.b * self.m_right(z + 1 / z, side)

    def _n_outer(self, z, side):
        with np.errstate(divide="ignore", invalid="ignore"):
            return -1 / (self.b * self.m_left(z + 1 / z, side))

    def n(self, z):
        """n(z) off the unit circle."""
        z = np.asarray(z, dtype=complex)
        inside = np.abs(z) < 1
        out = np.empty_like(z)
        if np.any(inside):
            out[inside] = self._n_inner(z[inside], 0)
        if np.any(~inside):
            out[~inside] = self._n_outer(z[~inside], 0)
        return out if out.ndim else complex(out)

    def N(self, z):
        z = np.asarray(z, dtype=complex)
        return self.n(z) - self.n(1 / z)

    def n_circle(self, theta, side):
        """Exact boundary value of n at e^{i theta}; side +1 inner, -1 outer.

        With free tails the tail root on the circle is e^{i theta} itself on
        both sides, which keeps full precision next to the band edges where
        2 cos(theta) rounds to +-2.
        """
        theta = np.asarray(theta, dtype=float)
        lam = 2 * np.cos(theta) + 0j
        xi = np.exp(1j * theta)
        spec = self.spec
        with np.errstate(divide="ignore", invalid="ignore"):
            if side > 0:
                if spec.right_tail.is_free():
                    return 1 / _right_ratio(spec, lam, root=xi)
                return -self.b * self.m_right(lam, -np.sign(np.sin(theta)))
            if spec.left_tail.is_free():
                return _left_ratio(spec, lam, root=xi)
            return -1 / (self.b * self.m_left(lam, np.sign(np.sin(theta))))

    def N_circle(self, theta, side):
        """N^+(xi) = n^+(xi) - n^-(1/xi) and N^- = n^-(xi) - n^+(1/xi)."""
        theta = np.asarray(theta, dtype=float)
        return self.n_circle(theta, side) - self.n_circle(-theta, -side)

    def psi(self, k: int, z):
        z = np.asarray(z, dtype=complex)
        lam = z + 1 / z
        pq = eval_pq(self.spec, lam, min(k, -1), max(k, 0))
        P, Q = pq.at(k)
        return self.n(z) * P + Q

    def psi_circle(self, k: int, theta, side):
        theta = np.asarray(theta, dtype=float)
        lam = 2 * np.cos(theta) + 0j
        pq = eval_pq(self.spec, lam, min(k, -1), max(k, 0))
        P, Q = pq.at(k)
        return self.n_circle(theta, side) * P + Q

    def psi_scaled(self, k_lo: int, k_hi: int, z, inner: bool) -> np.ndarray:
        """z^{-(k+1)} psi(k, z) for k_lo <= k <= k_hi (k axis first).

        inner=True uses the solution decaying to the right (|z| <= 1), else
        the one decaying to the left (|z| >= 1). With F(k) = z^{-k} f(k) the
        recurrences stay regular at z = 0 and z = infinity, and at |z| = 1
        they give the inner/outer boundary values exactly.
        """
        spec = self.spec
        z = np.asarray(z, dtype=complex)
        lo, hi = min(k_lo, -1), max(k_hi, 0)
        F = {}
        if inner:
            top = max(hi, spec.window_hi) + 1
            F[top + 1] = np.ones_like(z)
            F[top] = np.ones_like(z)
            z2 = z * z
            for k in range(top, lo, -1):
                F[k - 1] = ((1 + z2 - spec.a_at(k) * z) * F[k]
                            - spec.b_at(k) * z2 * F[k + 1]) / spec.b_at(k - 1)
        else:
            bot = min(lo, spec.window_lo) - 1
            F[bot - 1] = np.ones_like(z)
            F[bot] = np.ones_like(z)
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(z == np.inf, 0, 1 / z)
            w2 = w * w
            for k in range(bot, hi):
                F[k + 1] = ((1 + w2 - spec.a_at(k) * w) * F[k]
                            - spec.b_at(k - 1) * w2 * F[k - 1]) / spec.b_at(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.stack([F[k] / F[-1] for k in range(k_lo, k_hi + 1)])

    def h(self, k: int) -> float:
        return h_weights(self.spec, k)

    # boundary values by extrapolation ------------------------------------
    def boundary_value(self, which: str, point: float, side: int,
                       ladder=RICHARDSON_LADDER, tol: float = 1e-6) -> BoundaryValue:
        """Limit of a function at a real point (side = sign of Im) or at
        e^{i point} on the circle (side +1 inner, -1 outer), by Richardson
        extrapolation over the eps ladder."""
        eps = np.asarray(ladder, dtype=float)
        if which in ("m_right", "m_left", "M"):
            f = getattr(self, which)
            vals = [f(point + 1j * side * e) for e in eps]
        elif which in ("n", "N"):
            f = getattr(self, which)
            vals = [f((1 - side * e) * np.exp(1j * point)) for e in eps]
        else:
            raise ValueError(f"unknown function {which!r}")
        value, err = richardson_limit(vals, eps)
        return BoundaryValue(float(point), int(side), complex(value), float(err))

    def densities(self, tau) -> DensityProfile:
        """Spectral densities and boundary arguments on the real axis."""
        tau = np.asarray(tau, dtype=float)
        mr = self.m_right(tau + 0j, 1)
        ml = self.m_left(tau + 0j, 1)
        right = self.b * mr
        left = -1 / (self.b * ml)
        rho_r = np.maximum(right.imag, 0) / np.pi
        rho_l = np.maximum(left.imag, 0) / np.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = np.sqrt(rho_r / rho_l)
        mu = np.where((rho_r > 1e-12) & (rho_l > 1e-12), mu, np.nan)
        return DensityProfile(tau, rho_r, rho_l, mu, _fold(right + left),
                              _fold(mr), _fold(left))
