"""Classical inverse scattering for compact perturbations of the free lattice.

Jost solutions are normalized as psi~(k, z) = z^k on the free side. The
function

    Phi_k(z) = (1/c~(z)) z^{-k} H_k psi~(k, z)   (|z| < 1, right Jost)
    Phi_k(z) = z^{-k} H_k psi~(k, z)             (|z| > 1, left Jost)

with H_k = b_lo ... b_{k-1} tends to 1 at infinity, and across the circle

    xi^{2(k+1)} (Phi^+ - Phi^-)(xi) = r(xi) Phi^-(1/xi),   r = xi^2 d~/c~.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .lattice import LatticeSpec, SpecError
from .solver import circle_pv_matrix
from .spectral import CircleGrid

__all__ = [
    "ScatteringError",
    "ScatteringData",
    "MarchenkoSolution",
    "jost",
    "wronskian",
    "scattering_data",
    "phi_direct",
    "phi_direct_circle",
    "solve_marchenko",
    "reconstruct_classical",
]

log = logging.getLogger(__name__)


class ScatteringError(RuntimeError):
    """Resonance or a degenerate scattering problem."""


def _require_free_tails(spec: LatticeSpec) -> None:
    if not spec.has_free_tails():
        raise SpecError("classical scattering needs free tails (a = 0, b = 1) on both sides")


def _jost_table(spec: LatticeSpec, z, side: str, k_lo: int, k_hi: int) -> dict:
    """psi~(k, z) for k_lo - 1 <= k <= k_hi + 1; side 'right' is seeded by
    z^k beyond the window on the right, 'left' on the left."""
    z = np.asarray(z, dtype=complex)
    lam = z + 1 / z
    f = {}
    if side == "right":
        top = max(spec.window_hi, k_hi) + 2
        f[top + 1], f[top] = z ** (top + 1), z ** top
        for k in range(top, k_lo - 2, -1):
            f[k - 1] = ((lam - spec.a_at(k)) * f[k] - spec.b_at(k) * f[k + 1]) / spec.b_at(k - 1)
    elif side == "left":
        bot = min(spec.window_lo, k_lo) - 2
        f[bot - 1], f[bot] = z ** (bot - 1), z ** bot
        for k in range(bot, k_hi + 2):
            f[k + 1] = ((lam - spec.a_at(k)) * f[k] - spec.b_at(k - 1) * f[k - 1]) / spec.b_at(k)
    else:
        raise ValueError("side must be 'right' or 'left'")
    return f


def jost(spec: LatticeSpec, k: int, z, side: str | None = None):
    """Jost solution psi~(k, z); by default the right one for |z| <= 1 and
    the left one for |z| > 1."""
    _require_free_tails(spec)
    z = np.asarray(z, dtype=complex)
    if side is None:
        if z.ndim == 0:
            side = "right" if abs(z) <= 1 else "left"
        else:
            out = np.empty(z.shape, dtype=complex)
            inner = np.abs(z) <= 1
            if np.any(inner):
                out[inner] = jost(spec, k, z[inner], "right")
            if np.any(~inner):
                out[~inner] = jost(spec, k, z[~inner], "left")
            return out
    return _jost_table(spec, z, side, k, k)[k]


def wronskian(spec: LatticeSpec, f: dict, g: dict, k: int):
    return spec.b_at(k) * (f[k] * g[k + 1] - f[k + 1] * g[k])


def _H(spec: LatticeSpec, k: int) -> float:
    lo = spec.window_lo
    if k >= lo:
        return float(np.prod([spec.b_at(j) for j in range(lo, k)]))
    return 1.0


def _W(spec: LatticeSpec, z, k: int = 0):
    """<psi~(1/z) left, psi~(z) right>."""
    z = np.asarray(z, dtype=complex)
    L = _jost_table(spec, 1 / z, "left", k, k)
    R = _jost_table(spec, z, "right", k, k)
    return wronskian(spec, L, R, k)


@dataclass(frozen=True, eq=False)
class ScatteringData:
    grid: CircleGrid
    r: np.ndarray            # reflection coefficient in the Phi -> 1 normalization
    bound_states: np.ndarray
    rho: np.ndarray
    cprime: np.ndarray
    sigma: np.ndarray        # z_n^2 rho_n / c~'(z_n), same normalization as r

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "r_re": self.r.real.tolist(), "r_im": self.r.imag.tolist(),
                "bound_states": self.bound_states.tolist(), "rho": self.rho.tolist(),
                "cprime": self.cprime.tolist(), "sigma": self.sigma.tolist(),
                "max_abs_r": float(np.max(np.abs(self.r))) if len(self.r) else 0.0}


def _bound_states(spec: LatticeSpec) -> list:
    """Real zeros of W in (-1, 1); z W(z) is a polynomial in z."""
    F = lambda t: float((t * _W(spec, np.array([t + 0j]))).real[0])
    grid = np.concatenate([-np.geomspace(1 - 1e-9, 1e-6, 4000), np.geomspace(1e-6, 1 - 1e-9, 4000)])
    vals = (grid * _W(spec, grid + 0j)).real
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        if grid[i] * grid[i + 1] < 0:
            continue
        roots.append(brentq(F, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return roots


def scattering_data(spec: LatticeSpec, grid: CircleGrid | None = None, k_ref: int = 0) -> ScatteringData:
    _require_free_tails(spec)
    grid = CircleGrid.build() if grid is None else grid
    xi = grid.xi
    R = _jost_table(spec, xi, "right", k_ref, k_ref)
    L = _jost_table(spec, xi, "left", k_ref, k_ref)
    Li = _jost_table(spec, 1 / xi, "left", k_ref, k_ref)
    w_c = wronskian(spec, Li, R, k_ref)
    if np.min(np.abs(w_c)) < 1e-12 * np.max(np.abs(w_c)):
        raise ScatteringError("the Jost Wronskian vanishes on the circle (resonance)")
    # psi+ = c psi-(xi) + d psi-(1/xi)
    c = w_c / (xi - 1 / xi)
    d = -wronskian(spec, L, R, k_ref) / (xi - 1 / xi)
    r = xi ** 2 * d / c
    zs = _bound_states(spec)
    rho, cp, sig = [], [], []
    for zn in zs:
        Rn = _jost_table(spec, zn + 0j, "right", k_ref, k_ref)[k_ref]
        Ln = _jost_table(spec, 1 / zn + 0j, "left", k_ref, k_ref)[k_ref]
        rho.append(float((Rn / Ln).real))
        # c~(z) = W(z) / (z - 1/z); residue of 1/c~ by a small contour
        rad = 1e-3 * min(abs(zn), 1 - abs(zn))
        wv = np.exp(2j * np.pi * np.arange(128) / 128)
        zz = zn + rad * wv
        res = np.mean((zz - 1 / zz) / _W(spec, zz, k_ref) * rad * wv)
        cp.append(float(1 / res.real))
        sig.append(zn ** 2 * rho[-1] * float(res.real))
    return ScatteringData(grid, r, np.array(zs), np.array(rho), np.array(cp), np.array(sig))


def phi_direct(spec: LatticeSpec, k: int, z):
    """Phi_k(z) off the circle from the Jost solutions."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty(z.shape, dtype=complex)
    inner = np.abs(z) < 1
    H = _H(spec, k)
    if np.any(inner):
        zi = z[inner]
        c = _W(spec, zi) / (zi - 1 / zi)
        out[inner] = zi ** (-k) * H * _jost_table(spec, zi, "right", k, k)[k] / c
    if np.any(~inner):
        zo = z[~inner]
        out[~inner] = zo ** (-k) * H * _jost_table(spec, zo, "left", k, k)[k]
    return out


def phi_direct_circle(spec: LatticeSpec, k: int, theta, side: int):
    xi = np.exp(1j * np.asarray(theta, dtype=float))
    H = _H(spec, k)
    if side > 0:
        c = _W(spec, xi) / (xi - 1 / xi)
        return xi ** (-k) * H * _jost_table(spec, xi, "right", k, k)[k] / c
    return xi ** (-k) * H * _jost_table(spec, xi, "left", k, k)[k]


@dataclass
class MarchenkoSolution:
    """X_j = Phi^-(1/xi_j) on the circle nodes and Y_n = Phi(1/z_n)."""
    k: int
    X: np.ndarray
    Y: np.ndarray
    residual: float
    data: ScatteringData

    @property
    def u_circle(self) -> np.ndarray:
        return self.data.grid.xi ** (-2 * (self.k + 1)) * self.X

    def _weights(self):
        d = self.data
        xi = d.grid.xi
        f = xi ** (-2 * (self.k + 1)) * d.r * self.X
        res = d.bound_states ** (-2.0 * (self.k + 1)) * d.sigma * self.Y
        return f, res

    def phi(self, z):
        """Cauchy representation of Phi_k at z off the circle."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        d = self.data
        xi = d.grid.xi
        f, res = self._weights()
        out = np.ones(z.shape, dtype=complex)
        if len(res):
            out += (1 / (z[:, None] - d.bound_states[None, :])) @ res
        out += (xi[None, :] / (xi[None, :] - z[:, None])) @ (f * d.grid.weight) / (2 * np.pi)
        return out

    def moments(self) -> tuple[complex, complex]:
        """Phi_k(0) and c_k with Phi_k(z) = 1 + c_k / z + O(z^-2)."""
        d = self.data
        xi = d.grid.xi
        f, res = self._weights()
        w = d.grid.weight / (2 * np.pi)
        phi0 = 1 - np.sum(res / d.bound_states) + np.sum(f * w) if len(res) else 1 + np.sum(f * w)
        c = np.sum(res) - np.sum(f * xi * w)
        return complex(phi0), complex(c)


def solve_marchenko(data: ScatteringData, k: int) -> MarchenkoSolution:
    grid = data.grid
    M = grid.M
    xi = grid.xi
    zn = data.bound_states
    N = len(zn)
    C = circle_pv_matrix(grid)
    mir = grid.mirror
    rinv = data.r[mir]
    pk = xi ** (-2 * (k + 1)) * data.r  # f = pk * X
    bs = zn ** (-2.0 * (k + 1)) * data.sigma if N else np.zeros(0)
    A = np.zeros((M + N, M + N), dtype=complex)
    A[:M, :M] = np.eye(M) - 0.5 * C * pk[None, :]
    A[np.arange(M), mir] += 0.5 * xi ** (2 * (k + 1)) * rinv
    if N:
        A[:M, M:] = -bs[None, :] / (1 / xi[:, None] - zn[None, :])
        A[M:, M:] = np.eye(N) - bs[None, :] / (1 / zn[:, None] - zn[None, :])
        A[M:, :M] = -(grid.weight / (2 * np.pi)) * pk[None, :] * xi[None, :] / (xi[None, :] - 1 / zn[:, None])
    rhs = np.ones(M + N, dtype=complex)
    sol = np.linalg.solve(A, rhs)
    res = float(np.linalg.norm(A @ sol - rhs) / np.linalg.norm(rhs))
    return MarchenkoSolution(k, sol[:M], sol[M:], res, data)


def reconstruct_classical(data: ScatteringData, k_lo: int, k_hi: int) -> dict:
    """Entries from Phi_k(0) and the 1/z coefficient, as for the new method."""
    phi0, c = {}, {}
    for k in range(k_lo - 1, k_hi + 2):
        s = solve_marchenko(data, k)
        phi0[k], c[k] = s.moments()
    a = {k: float((c[k] - c[k + 1]).real) for k in range(k_lo, k_hi + 1)}
    b = {}
    for k in range(k_lo, k_hi + 2):
        ratio = (phi0[k] / phi0[k - 1]).real
        if not ratio > 0:
            raise ScatteringError(f"Phi_{k}(0) / Phi_{k-1}(0) = {ratio:.3g} is not positive")
        b[k - 1] = float(np.sqrt(ratio))
    return {"a": a, "b": b}
