"""Multiplicative Cauchy integrals on the real line and on the unit circle.

Line:   P(z, g)  = exp{ (1/pi) int g(t) (1/(t - z) - t/(1 + t^2)) dt }
Circle: Ph(z, g) = exp{ -(1/(2 pi i)) int (e^{it} + z)/(e^{it} - z) g(t) dt }

Piecewise constant parts of an argument function integrate in closed form;
only smooth remainders go through quadrature (line) or harmonics (circle).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureError",
    "LineArg",
    "CircleArg",
    "circle_grid",
    "angle_offset",
    "circle_coeffs",
    "line_mult",
    "line_boundary",
    "circle_mult",
    "circle_boundary",
    "conjugate_function",
    "pv_line",
    "identity_suite",
]

DEFAULT_HARMONICS = 2048
MAX_HARMONICS = 1 << 16
TAIL_ENERGY_TOL = 1e-12

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_X2, _GL_W2 = np.polynomial.legendre.leggauss(48)


class QuadratureError(RuntimeError):
    """A quadrature or harmonic expansion did not converge."""


# argument functions -------------------------------------------------------

@dataclass
class LineArg:
    """g(t) = sum of constants on intervals plus smooth compact pieces.

    steps: (lo, hi, value); lo may be -inf and hi may be +inf.
    pieces: (lo, hi, func) with finite ends and vectorized func.
    """
    steps: list = field(default_factory=list)
    pieces: list = field(default_factory=list)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for lo, hi, c in self.steps:
            out += np.where((t > lo) & (t < hi), c, 0.0)
        for lo, hi, f in self.pieces:
            inside = (t > lo) & (t < hi)
            if np.any(inside):
                out[inside] += f(t[inside])
        return out

    def __add__(self, other: "LineArg") -> "LineArg":
        return LineArg(self.steps + other.steps, self.pieces + other.pieces)

    def __neg__(self) -> "LineArg":
        return LineArg([(lo, hi, -c) for lo, hi, c in self.steps],
                       [(lo, hi, _negate(f)) for lo, hi, f in self.pieces])

    def inverted(self) -> "LineArg":
        """V(g)(t) = g(1/t), for arguments supported away from 0."""
        steps = []
        for lo, hi, c in self.steps:
            if lo < 0 < hi:
                raise ValueError("cannot invert a step containing 0")
            steps.append((_inv(hi), _inv(lo), c))
        pieces = []
        for lo, hi, f in self.pieces:
            if lo <= 0 <= hi:
                raise ValueError("cannot invert a piece containing 0")
            pieces.append((1 / hi, 1 / lo, _compose_inv(f)))
        return LineArg(steps, pieces)


def _negate(f):
    return lambda t: -f(t)


def _compose_inv(f):
    return lambda t: f(1 / t)


def _inv(x: float) -> float:
    if np.isinf(x):
        return 0.0
    if x == 0:
        raise ValueError("0 is not invertible")
    return 1 / x


@dataclass
class CircleArg:
    """g(theta) on (-pi, pi): smooth callable plus declared jumps.

    jumps: (theta0, height) with height = g(theta0+) - g(theta0-). A jump
    across theta = pi must be declared at pi. func evaluates the whole
    function, jumps included.
    """
    func: Callable
    jumps: list = field(default_factory=list)
    odd: bool = False

    def smooth_part(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.asarray(self.func(theta), dtype=float).copy()
        for th0, h in self.jumps:
            out -= h / np.pi * sawtooth(theta - th0)
        return out

    def __add__(self, other: "CircleArg") -> "CircleArg":
        f, g = self.func, other.func
        return CircleArg(lambda t: f(t) + g(t), self.jumps + other.jumps,
                         self.odd and other.odd)

    def __neg__(self) -> "CircleArg":
        f = self.func
        return CircleArg(lambda t: -f(t), [(a, -h) for a, h in self.jumps], self.odd)


def sawtooth(theta):
    """(pi - t)/2 on (0, 2 pi), periodic; a jump of +pi at 0."""
    t = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    return np.where(t == 0, 0.0, (np.pi - t) / 2)


# circle harmonics ---------------------------------------------------------

PI_LO = 1.2246467991473532e-16  # pi - float(pi)


def angle_offset(theta, th0: float):
    """theta - th0 reduced to (-pi, pi], exact near th0 in {0, pi}.

    Near +-pi the float pi is off by 1.2e-16, which is large relative to
    the distance of graded nodes from -1; the subtraction is done in two
    parts so it stays exact (Sterbenz) and the low part is added back.
    """
    theta = np.asarray(theta, dtype=float)
    if th0 == 0.0:
        return theta
    if th0 == np.pi:
        return np.where(theta > 0, (theta - np.pi) - PI_LO, (theta + np.pi) + PI_LO)
    return np.angle(np.exp(1j * (theta - th0)))


def circle_grid(M: int) -> np.ndarray:
    """Half-offset equispaced nodes on (-pi, pi); symmetric, avoids +-1."""
    return -np.pi + (np.arange(M) + 0.5) * 2 * np.pi / M


def circle_coeffs(values) -> tuple[np.ndarray, np.ndarray]:
    """Fourier coefficients c_m = (1/2pi) int g e^{-im t} dt from samples on
    circle_grid(M). Returns (c_pos, c_neg): c_m and c_{-m} for m = 0..M/2-1."""
    values = np.asarray(values)
    M = values.shape[0]
    theta0 = -np.pi + np.pi / M
    F = np.fft.fft(values, axis=0) / M
    m = np.arange(M // 2)
    shape = (-1,) + (1,) * (values.ndim - 1)
    c_pos = F[m] * np.exp(-1j * m * theta0).reshape(shape)
    c_neg = F[(-m) % M] * np.exp(1j * m * theta0).reshape(shape)
    return c_pos, c_neg


class _Harmonics:
    """Cached coefficients of the smooth part of a circle argument."""

    def __init__(self, arg: CircleArg, n_harm: int = DEFAULT_HARMONICS):
        self.arg = arg
        M = 2 * n_harm
        while True:
            c_pos, c_neg = circle_coeffs(arg.smooth_part(circle_grid(M)))
            total = np.sum(np.abs(c_pos) ** 2) + np.sum(np.abs(c_neg) ** 2)
            q = len(c_pos) // 4
            tail = np.sum(np.abs(c_pos[-q:]) ** 2) + np.sum(np.abs(c_neg[-q:]) ** 2)
            if tail <= TAIL_ENERGY_TOL * max(total, 1.0):
                break
            if M >= 2 * MAX_HARMONICS:
                raise QuadratureError(f"harmonic tail energy {tail:.3e} above tolerance")
            M *= 2
        self.c_pos, self.c_neg = c_pos, c_neg


_HARM_CACHE: dict = {}


def _harmonics(arg: CircleArg) -> _Harmonics:
    key = id(arg)
    hit = _HARM_CACHE.get(key)
    if hit is None or hit.arg is not arg:
        if len(_HARM_CACHE) > 32:
            _HARM_CACHE.clear()
        hit = _HARM_CACHE[key] = _Harmonics(arg)
    return hit


def _series(c, w):
    """sum_{m>=1} c_m w^m by Horner."""
    out = np.zeros_like(w)
    for cm in c[:0:-1]:
        out = (out + cm) * w
    return out


def circle_exponent(arg: CircleArg, z):
    """log Ph(z, g) for |z| != 1."""
    z = np.asarray(z, dtype=complex)
    h = _harmonics(arg)
    inside = np.abs(z) < 1
    zi = np.where(inside, z, 0)
    zo = np.where(inside, np.inf, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        e_in = 1j * (h.c_pos[0] + 2 * _series(h.c_pos, zi))
        e_out = -1j * (h.c_pos[0] + 2 * _series(h.c_neg, 1 / zo))
    e = np.where(inside, e_in, e_out)
    for th0, jump in arg.jumps:
        with np.errstate(divide="ignore", invalid="ignore"):
            e_j = np.where(inside, np.log(1 - z * np.exp(-1j * th0)),
                           np.log(1 - np.exp(1j * th0) / np.where(inside, 1, z)))
        e = e - jump / np.pi * e_j
    return e


def circle_mult(arg: CircleArg, z):
    e = circle_exponent(arg, z)
    return np.exp(e) if np.ndim(e) else complex(np.exp(e))


def circle_boundary(arg: CircleArg, theta, side: int):
    """Ph^+ (side=+1, from inside) or Ph^- (side=-1) at e^{i theta}."""
    theta = np.asarray(theta, dtype=float)
    h = _harmonics(arg)
    w = np.exp(1j * theta)
    if side > 0:
        e = 1j * (h.c_pos[0] + 2 * _series(h.c_pos, w))
    else:
        e = -1j * (h.c_pos[0] + 2 * _series(h.c_neg, 1 / w))
    for th0, jump in arg.jumps:
        x = angle_offset(theta, th0)
        d = -np.expm1(1j * x if side > 0 else -1j * x)
        with np.errstate(divide="ignore"):
            e = e - jump / np.pi * np.log(d)
    return np.exp(e)


def conjugate_function(values) -> np.ndarray:
    """Harmonic conjugate of samples on circle_grid(M), by harmonics."""
    values = np.asarray(values, dtype=float)
    M = len(values)
    theta = circle_grid(M)
    c_pos, c_neg = circle_coeffs(values)
    m = np.arange(1, M // 2)
    ph = np.exp(1j * np.outer(theta, m))
    return (-1j * (ph @ c_pos[1:] - ph.conj() @ c_neg[1:])).real


# line quadrature ------------------------------------------------------------

def _graded_panels(lo: float, hi: float, z: complex, max_depth: int = 60) -> list:
    """Split [lo, hi] so each panel is shorter than its distance to z."""
    out, stack = [], [(lo, hi, 0)]
    while stack:
        a, b, d = stack.pop()
        mid = 0.5 * (a + b)
        dist = abs(z - mid) - 0.5 * (b - a)
        if (b - a) > max(dist, 0.0) and d < max_depth:
            stack.append((a, mid, d + 1))
            stack.append((mid, b, d + 1))
        else:
            out.append((a, b))
    return out


def _panel_integral(f, panels, kernel, nodes, weights):
    total = 0j
    for a, b in panels:
        h = 0.5 * (b - a)
        s = 0.5 * (a + b) + h * nodes
        total += h * np.sum(weights * f(s) * kernel(s))
    return total


def _smooth_exponent(lo, hi, f, z, tol):
    panels = _graded_panels(lo, hi, z)
    x0 = z.real
    if lo < x0 < hi:
        # subtract f(Re z) so node rounding near a close pole is not amplified
        f0 = float(f(np.array([x0]))[0])
        kernel = lambda s: 1 / (s - z)
        g = lambda s: f(s) - f0
        extra = f0 * np.log((hi - z) / (lo - z))
    else:
        kernel = lambda s: 1 / (s - z)
        g, extra = f, 0j
    comp = lambda s: -f(s) * s / (1 + s * s)
    one = lambda s: 1.0
    vals = []
    for nodes, weights in ((_GL_X, _GL_W), (_GL_X2, _GL_W2)):
        vals.append(_panel_integral(g, panels, kernel, nodes, weights)
                    + _panel_integral(comp, panels, one, nodes, weights))
    if abs(vals[0] - vals[1]) > tol * max(1.0, abs(vals[1])):
        raise QuadratureError(f"line quadrature estimate {abs(vals[0] - vals[1]):.2e} above {tol:.1e}")
    return vals[1] + extra


def _step_exponent(lo, hi, z):
    """int_lo^hi (1/(t - z) - t/(1 + t^2)) dt, closed form."""
    if np.isinf(lo) and np.isinf(hi):
        raise ValueError("a step must have at least one finite end")
    if np.isinf(lo):
        return np.log(z - hi) - 0.5 * np.log1p(hi * hi)
    if np.isinf(hi):
        return -np.log(lo - z) + 0.5 * np.log1p(lo * lo)
    return np.log((hi - z) / (lo - z)) - 0.5 * np.log1p(hi * hi) + 0.5 * np.log1p(lo * lo)


def line_exponent(arg: LineArg, z: complex, tol: float = 1e-11) -> complex:
    z = complex(z)
    e = 0j
    for lo, hi, c in arg.steps:
        e += c * _step_exponent(lo, hi, z)
    for lo, hi, f in arg.pieces:
        e += _smooth_exponent(lo, hi, f, z, tol)
    return e / np.pi


def line_mult(arg: LineArg, z, tol: float = 1e-11):
    if np.ndim(z):
        return np.array([np.exp(line_exponent(arg, w, tol)) for w in np.ravel(z)]).reshape(np.shape(z))
    return complex(np.exp(line_exponent(arg, z, tol)))


def pv_line(f, lo: float, hi: float, t: float, tol: float = 1e-11) -> float:
    """PV int_lo^hi f(s)/(s - t) ds by singularity subtraction."""
    if not lo < t < hi:
        raise ValueError("point must lie inside the interval")
    ft = float(f(np.array([t]))[0])
    g = lambda s: (f(s) - ft) / (s - t)
    vals = []
    for nodes, weights in ((_GL_X, _GL_W), (_GL_X2, _GL_W2)):
        v = 0.0
        for a, b in (_graded_panels(lo, t, t, 12) + _graded_panels(t, hi, t, 12)):
            h = 0.5 * (b - a)
            s = 0.5 * (a + b) + h * nodes
            v += h * np.sum(weights * g(s))
        vals.append(v)
    if abs(vals[0] - vals[1]) > tol * max(1.0, abs(vals[1])):
        raise QuadratureError("principal value did not converge; integrand may not be Hoelder")
    return float(vals[1] + ft * np.log((hi - t) / (t - lo)))


def line_boundary(arg: LineArg, t: float, side: int, tol: float = 1e-11) -> complex:
    """P^+ (side=+1) or P^- (side=-1) at a real point t."""
    log_mod = 0.0
    for lo, hi, c in arg.steps:
        a = 0.0 if np.isinf(lo) else np.log(abs(lo - t)) - 0.5 * np.log1p(lo * lo)
        b = 0.0 if np.isinf(hi) else np.log(abs(hi - t)) - 0.5 * np.log1p(hi * hi)
        log_mod += c * (b - a)
    for lo, hi, f in arg.pieces:
        comp = lambda s, f=f: f(s) * s / (1 + s * s)
        log_mod -= _panel_integral(comp, _graded_panels(lo, hi, complex(t), max_depth=12),
                                   lambda s: 1.0, _GL_X2, _GL_W2).real
        if lo < t < hi:
            log_mod += pv_line(f, lo, hi, t, tol)
        else:
            log_mod += _panel_integral(f, _graded_panels(lo, hi, complex(t)),
                                       lambda s: 1 / (s - t), _GL_X2, _GL_W2).real
    return complex(np.exp(log_mod / np.pi + 1j * side * float(arg(np.array([t]))[0])))


# identity suite ---------------------------------------------------------------

def identity_suite(seed: int = 0) -> dict:
    """Residuals of the multiplicative-integral identities at random points."""
    rng = np.random.default_rng(seed)
    g1 = LineArg([(0.5, 1.5, 0.7), (-np.inf, -2.0, -0.4)], [(2.0, 3.0, lambda t: np.sin(t) ** 2)])
    g2 = LineArg([(-1.0, -0.25, 1.1)], [(0.3, 0.9, lambda t: np.cos(3 * t))])
    zs = rng.normal(size=8) + 1j * (0.2 + rng.random(8))
    res = {}
    res["line_additive"] = max(abs(line_mult(g1 + g2, z) - line_mult(g1, z) * line_mult(g2, z))
                               / abs(line_mult(g1 + g2, z)) for z in zs)
    res["line_conjugate"] = max(abs(line_mult(g1, z.conjugate()) - line_mult(g1, z).conjugate())
                                / abs(line_mult(g1, z)) for z in zs)
    g3 = LineArg([(0.5, 1.5, 0.7), (2.0, np.inf, 0.3)], [(2.0, 3.0, lambda t: np.sin(t) ** 2)])
    res["line_inversion"] = max(abs(line_mult(g3, 1 / z) - line_mult(-g3.inverted(), z))
                                / abs(line_mult(g3, 1 / z)) for z in zs)
    t0 = 2.5
    res["line_boundary_modulus"] = abs(abs(line_boundary(g1, t0, 1)) - abs(line_boundary(g1, t0, -1)))
    eps = 1e-9
    res["line_boundary_limit"] = abs(line_boundary(g1, t0, 1) - line_mult(g1, t0 + 1j * eps)) \
        / abs(line_boundary(g1, t0, 1))
    c1 = CircleArg(lambda t: np.sin(t) + 0.3 * np.sin(2 * t) ** 3, odd=True)
    c2 = CircleArg(lambda t: np.pi / 2 * np.sign(t), [(0.0, np.pi), (np.pi, -np.pi)], odd=True)
    c3 = CircleArg(lambda t: 0.2 + np.cos(t) * np.exp(np.cos(t)))
    ws = np.concatenate([0.8 * np.exp(2j * np.pi * rng.random(4)), 1.7 * np.exp(2j * np.pi * rng.random(4))])
    both = c1 + c2
    res["circle_additive"] = float(np.max(np.abs(circle_mult(both, ws) - circle_mult(c1, ws) * circle_mult(c2, ws))
                                          / np.abs(circle_mult(both, ws))))
    res["circle_odd_inversion"] = float(np.max(np.abs(circle_mult(both, 1 / ws) - circle_mult(both, ws))
                                               / np.abs(circle_mult(both, ws))))
    th = circle_grid(64)
    res["circle_boundary_modulus"] = float(np.max(np.abs(np.abs(circle_boundary(c3, th, 1))
                                                         - np.abs(circle_boundary(c3, th, -1)))))
    res["circle_boundary_argument"] = float(np.max(np.abs(np.angle(circle_boundary(c3, th, 1)) - c3.func(th))))
    res["odd_step_ratio"] = abs(circle_mult(c2, 2.0) / circle_mult(c2, 3.0) - 1.5)
    res["pv_constant"] = abs(pv_line(lambda s: np.ones_like(s), -1.0, 1.0, 0.5) - np.log(1 / 3))
    # pi/4 is node 7 of the 12-point grid
    res["conjugate_cos"] = abs(conjugate_function(np.cos(circle_grid(12)))[7] - np.sin(np.pi / 4))
    return res
