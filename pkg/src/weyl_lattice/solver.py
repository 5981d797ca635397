"""Nystroem discretization of the fundamental equation and reconstruction of
the matrix entries.

Unknowns are v = e^{(beta - 1/beta) t} beta^{2(k+1)} u at the atoms, at
the Omega_2^a nodes (outer block, then the mirrored inner block) and at the
circle nodes. The inner product is the one of L^2(sigma~ + d theta / pi).

Circle block: the principal value operator
    (1/pi) v.p. int F(theta) K(theta + phi) d theta,  K(x) = 1 / (1 - e^{-ix}),
is discretized after the change of variables theta = w(s) in its symmetric
form sqrt(w'(s) w'(t)) K(w(s) + w(t)), which is unitary before
discretization. Its singular part is the Fourier multiplier sign(n) in s;
what is left is a continuous kernel with diagonal limit (w' - 1)/2.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .spectral import CircleGrid, ReducedSpectralData

__all__ = [
    "SolverError",
    "Discretization",
    "OperatorL",
    "Solution",
    "ReconstructionResult",
    "circle_pv_matrix",
    "discretize",
    "assemble_L",
    "solve_u",
    "coercivity",
    "residual_of",
    "g_from_u",
    "reconstruct_entries",
]

log = logging.getLogger(__name__)

SOLVE_TOL = 1e-10
N_PROBES = 100


class SolverError(RuntimeError):
    """Linear solve or certificate failure."""


def _kernel(x):
    return 1 / (1 - np.exp(-1j * x))


@lru_cache(maxsize=8)
def _symmetric_pv(M: int, grading: int) -> np.ndarray:
    grid = CircleGrid.build(M, grading)
    s, w, wp = grid.s, grid.theta, grid.wp
    h = 2 * np.pi / M
    n = np.fft.fftfreq(M, 1 / M)
    mult = np.where(n >= 0, 1.0, -1.0)
    mult[np.abs(n) == M // 2] = 0.0
    # sum over harmonics of mult_n e^{-i n x} at x = s_i + s_j = (i + j + 1) h - 2 pi
    x = (np.arange(2 * M - 1) + 1) * h - 2 * np.pi
    c = (np.exp(-1j * np.outer(x, n)) @ mult) / M
    I, J = np.indices((M, M))
    T = c[I + J]
    diag = I + J == M - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (np.sqrt(wp[:, None] * wp[None, :]) * _kernel(w[:, None] + w[None, :])
                - _kernel(s[:, None] + s[None, :])) * h / np.pi
    corr[diag] = ((wp - 1) / 2 * h / np.pi)[I[diag]]
    T = T + corr
    T.setflags(write=False)
    return T


def circle_pv_matrix(grid: CircleGrid, symmetric: bool = False) -> np.ndarray:
    """Matrix of F -> (1/pi) v.p. int F(theta) K(theta + phi_i) d theta on
    node values F_j. With symmetric=True the sqrt(w') conjugated form."""
    T = _symmetric_pv(grid.M, grid.grading)
    if symmetric:
        return T
    r = np.sqrt(grid.wp)
    return T * (r[None, :] / r[:, None])


# unknown layout -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Discretization:
    """Node positions, sigma weights, signs and pairing of all unknowns."""
    beta: np.ndarray       # real nodes (atoms, then Omega_2^a nodes)
    sigma: np.ndarray      # sigma weights of the real nodes
    s: np.ndarray          # s(beta)
    pair: np.ndarray       # index of the mirror node for Omega_2^a, else -1
    coupling: np.ndarray   # m(beta) / q(1/beta) on Omega_2^a, else 0
    n_atoms: int
    grid: CircleGrid

    @property
    def n_real(self) -> int:
        return len(self.beta)

    @property
    def size(self) -> int:
        return self.n_real + self.grid.M


def discretize(data: ReducedSpectralData) -> Discretization:
    beta = [a.beta for a in data.atoms]
    sig = [a.weight for a in data.atoms]
    pair = [-1] * len(beta)
    coup = [0.0] * len(beta)
    for c in data.components:
        n = len(c.x)
        base = len(beta)
        beta += list(c.beta_out) + list(c.beta_in)
        sig += list(c.weight_out) + list(c.weight_in)
        pair += [base + n + i for i in range(n)] + [base + i for i in range(n)]
        coup += list(c.coupling_out) + list(c.coupling_in)
    beta = np.array(beta, dtype=float)
    circ = np.abs(np.abs(beta) - 1)
    if len(beta) and np.min(circ) < 1e-12:
        raise SolverError("a real node sits on the unit circle")
    return Discretization(beta, np.array(sig, dtype=float), np.where(np.abs(beta) > 1, 1.0, -1.0),
                          np.array(pair, dtype=int), np.array(coup, dtype=float),
                          len(data.atoms), data.grid)


def _time_factor(beta, k: int, t: float):
    beta = np.asarray(beta)
    with np.errstate(over="ignore"):
        return np.exp((beta - 1 / beta) * t) * beta ** (2.0 * (k + 1))


# operator -------------------------------------------------------------------

@dataclass(eq=False)
class OperatorL:
    matrix: np.ndarray
    rhs: np.ndarray
    weights: np.ndarray    # inner product weights sigma~ and d theta / pi
    scale: np.ndarray      # v = scale * u
    disc: Discretization
    k: int
    t: float
    rtilde: np.ndarray

    def weighted(self) -> np.ndarray:
        r = np.sqrt(self.weights)
        return self.matrix * (r[:, None] / r[None, :])


def assemble_L(data: ReducedSpectralData, k: int, t: float = 0.0,
               disc: Discretization | None = None, rhs: str = "decay") -> OperatorL:
    """rhs='decay' gives the right side -exp(-t/beta); rhs='unit' gives -1,
    which is the static equation on data evolved by exp((beta - 1/beta) t)."""
    if rhs not in ("decay", "unit"):
        raise ValueError("rhs must be 'decay' or 'unit'")
    disc = discretize(data) if disc is None else disc
    grid = disc.grid
    nr, M = disc.n_real, grid.M
    xi = grid.xi
    E_real = _time_factor(disc.beta, k, t).real
    E_circ = _time_factor(xi, k, t)
    if not np.all(np.isfinite(E_real)) or np.any(E_real <= 0):
        raise SolverError("time factor over- or underflowed on the real nodes; reduce t")
    sig_t = disc.sigma / E_real
    rt = data.rhat / E_circ
    # column measures: s sigma~ on real nodes, r~ d theta / pi on the circle
    col = np.concatenate([disc.s * sig_t, rt * grid.weight / np.pi])
    rows = np.concatenate([disc.beta + 0j, xi])
    with np.errstate(divide="ignore", invalid="ignore"):
        K = 1 / (1 - 1 / (rows[:, None] * rows[None, :]))
    # paired Omega_2^a nodes: node exclusion keeps the smooth limit 1/2
    for i, j in enumerate(disc.pair):
        if j >= 0:
            K[i, j] = 0.5
    A = K * col[None, :]
    A[nr:, nr:] = circle_pv_matrix(grid) * rt[None, :]
    A[np.arange(nr + M), np.arange(nr + M)] += 1.0
    for i, j in enumerate(disc.pair):
        if j >= 0:
            A[i, j] -= np.sign(disc.beta[i]) * disc.coupling[i] / 2 * E_real[i]
    rhs = -np.exp(-t / rows) if rhs == "decay" else -np.ones(len(rows), dtype=complex)
    weights = np.concatenate([sig_t, grid.weight / np.pi])
    scale = np.concatenate([E_real + 0j, E_circ])
    return OperatorL(A, rhs, weights, scale, disc, k, t, rt)


def _wnorm(x, w) -> float:
    return float(np.sqrt(np.sum(w * np.abs(x) ** 2)))


def residual_of(L: OperatorL, v) -> float:
    return _wnorm(L.matrix @ v - L.rhs, L.weights) / _wnorm(L.rhs, L.weights)


@dataclass
class Solution:
    k: int
    t: float
    v: np.ndarray
    u: np.ndarray
    residual: float
    n_real: int

    @property
    def u_real(self) -> np.ndarray:
        return self.u[: self.n_real]

    @property
    def u_circle(self) -> np.ndarray:
        return self.u[self.n_real:]


def solve_u(data: ReducedSpectralData, k: int, t: float = 0.0,
            L: OperatorL | None = None, tol: float = SOLVE_TOL, rhs: str = "decay") -> Solution:
    L = assemble_L(data, k, t, rhs=rhs) if L is None else L
    try:
        lu = sla.lu_factor(L.matrix)
    except (sla.LinAlgError, ValueError) as exc:
        raise SolverError(f"dense solve failed: {exc}") from exc
    v = sla.lu_solve(lu, L.rhs)
    res = residual_of(L, v)
    if res > tol:
        # one step of refinement before giving up
        v = v + sla.lu_solve(lu, L.rhs - L.matrix @ v)
        res = residual_of(L, v)
    if not res < tol:
        raise SolverError(f"solve residual {res:.3g} exceeds {tol:.1g}")
    return Solution(k, t, v, v / L.scale, res, L.disc.n_real)


@dataclass
class CoercivityReport:
    d: float
    probe_min: float
    numerical_range_min: float
    n_probes: int
    passed: bool

    def to_dict(self) -> dict:
        return {"d": self.d, "probe_min": self.probe_min,
                "numerical_range_min": self.numerical_range_min,
                "n_probes": self.n_probes, "passed": self.passed}


def coercivity(L: OperatorL, n_probes: int = N_PROBES, seed: int = 0,
               slack: float = 0.1) -> CoercivityReport:
    """Re <Lv, v> / |v|^2 over random probes, against d = (1 - max|r~|^2)/2,
    and the smallest eigenvalue of the Hermitian part (the discrete bound)."""
    rtmax = float(np.max(np.abs(L.rtilde))) if len(L.rtilde) else 0.0
    d = 0.5 * (1 - rtmax ** 2)
    rng = np.random.default_rng(seed)
    n = L.matrix.shape[0]
    V = rng.standard_normal((n, n_probes)) + 1j * rng.standard_normal((n, n_probes))
    LV = L.matrix @ V
    w = L.weights[:, None]
    num = np.real(np.sum(w * LV * V.conj(), axis=0))
    den = np.sum(w * np.abs(V) ** 2, axis=0)
    probe_min = float(np.min(num / den))
    B = L.weighted()
    nr_min = float(np.linalg.eigvalsh((B + B.conj().T) / 2)[0])
    return CoercivityReport(d, probe_min, nr_min, n_probes,
                            bool(probe_min >= (1 - slack) * d))


# representation of g and the entries ---------------------------------------------

def _measures(data: ReducedSpectralData, disc: Discretization):
    grid = disc.grid
    real_w = disc.s * disc.sigma
    circ_w = data.rhat * grid.weight / np.pi
    return real_w, circ_w


def g_from_u(data: ReducedSpectralData, sol: Solution, z,
             disc: Discretization | None = None):
    """g(k, z) = 1 + int u s / (1 - z/alpha) d sigma + (1/pi) int r u / (1 - z e^{-i theta}) d theta."""
    disc = discretize(data) if disc is None else disc
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    real_w, circ_w = _measures(data, disc)
    xi = disc.grid.xi
    out = np.ones(z.shape, dtype=complex)
    if disc.n_real:
        out += (1 / (1 - z[:, None] / disc.beta[None, :])) @ (sol.u_real * real_w)
    out += (1 / (1 - z[:, None] / xi[None, :])) @ (sol.u_circle * circ_w)
    return out


def g_moments(data: ReducedSpectralData, sol: Solution, disc: Discretization) -> tuple[complex, complex]:
    """g(k, 0) and the coefficient S with g(k, z) = 1 - S/z + O(z^-2)."""
    real_w, circ_w = _measures(data, disc)
    xi = disc.grid.xi
    g0 = 1 + np.sum(sol.u_real * real_w) + np.sum(sol.u_circle * circ_w)
    S = np.sum(disc.beta * sol.u_real * real_w) + np.sum(xi * sol.u_circle * circ_w)
    return complex(g0), complex(S)


@dataclass
class ReconstructionResult:
    k_lo: int
    k_hi: int
    a: dict
    b: dict
    g0: dict
    residuals: dict
    coercivity: dict = field(default_factory=dict)
    solutions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k_range": [self.k_lo, self.k_hi],
            "a": {str(k): v for k, v in self.a.items()},
            "b": {str(k): v for k, v in self.b.items()},
            "g0": {str(k): v for k, v in self.g0.items()},
            "solve_residuals": {str(k): v for k, v in self.residuals.items()},
            "coercivity": {str(k): v for k, v in self.coercivity.items()},
        }


def reconstruct_entries(data: ReducedSpectralData, k_lo: int, k_hi: int, t: float = 0.0,
                        threads: int = 1, certify: bool = True, seed: int = 0,
                        keep_solutions: bool = False, rhs: str = "decay") -> ReconstructionResult:
    """a_k for k_lo <= k <= k_hi and b_k for k_lo - 1 <= k <= k_hi; b_k is the
    positive root."""
    disc = discretize(data)
    ks = list(range(k_lo - 1, k_hi + 2))

    def one(k):
        L = assemble_L(data, k, t, disc, rhs)
        sol = solve_u(data, k, t, L)
        cert = coercivity(L, seed=[seed, k + 1000]) if certify else None
        return k, sol, cert

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, ks))
    else:
        results = [one(k) for k in ks]
    g0, S, res, cert, sols = {}, {}, {}, {}, {}
    for k, sol, c in results:
        g0[k], S[k] = g_moments(data, sol, disc)
        res[k] = sol.residual
        if c is not None:
            cert[k] = c.to_dict()
        if keep_solutions:
            sols[k] = sol
    a, b = {}, {}
    for k in range(k_lo, k_hi + 1):
        a[k] = float((S[k + 1] - S[k]).real)
    for k in range(k_lo, k_hi + 2):
        ratio = (g0[k] / g0[k - 1]).real
        if not ratio > 0:
            raise SolverError(f"g({k}, 0) / g({k - 1}, 0) = {ratio:.3g} is not positive")
        b[k - 1] = float(np.sqrt(ratio))
    return ReconstructionResult(k_lo, k_hi, a, b, {k: float(v.real) for k, v in g0.items()},
                                res, cert, sols)
