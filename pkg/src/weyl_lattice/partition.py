"""Spectral sets of the two half-lattices and their images in the z-plane.

z-plane conventions: a point t of the real axis represents
lambda = t + 1/t; |t| < 1 belongs to the right half-lattice and |t| > 1 to
the left one. V(t) = 1/t.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq

from .lattice import LatticeSpec
from .weyl import WeylField

__all__ = [
    "MEMBERSHIP_TOL",
    "ATOM_MASS_FLOOR",
    "Atom",
    "DeltaInterval",
    "SpectrumPartition",
    "ConditionReport",
    "detect_supports",
    "split_intervals",
    "star_select",
    "validate_conditions",
    "build_partition",
]

log = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-9
ATOM_MASS_FLOOR = 1e-8
MAX_GAP_FACTORS = 64


@dataclass(frozen=True)
class Atom:
    lam: float
    z: float
    mass: float
    side: str  # "R" or "L"


@dataclass
class DeltaInterval:
    lo: float
    hi: float
    phi: float
    sign_change: bool
    alpha_star: float | None = None
    phi_star: float | None = None


@dataclass
class SpectrumPartition:
    bands_right: list
    bands_left: list
    atoms_right: list
    atoms_left: list
    omega1: np.ndarray
    omega2_s: np.ndarray
    omega2_a: list  # real z-intervals beyond the unit circle image
    deltas: list = field(default_factory=list)
    numerators: list = field(default_factory=list)
    denominators: list = field(default_factory=list)

    @property
    def Phi(self) -> np.ndarray:
        return np.array(sorted(p for p in self.denominators if abs(p + 1) > MEMBERSHIP_TOL))

    def chi1(self, t):
        """Indicator of Phi and Omega_1 on sample points."""
        pts = np.concatenate([self.Phi, self.omega1])
        return _member(t, pts)

    def chi2_s(self, t):
        pts = self.omega2_s[np.abs(self.omega2_s) < 1]
        return _member(t, pts)

    def chi2_a(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for lo, hi in self.omega2_a:
            out |= (t > lo) & (t < hi)
        return out

    def chi0(self, t):
        """Indicator of Delta^(1) and its mirror image V(Delta^(1))."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for d in self.deltas:
            lo, hi = d.lo, d.phi
            out |= (t > lo) & (t < hi)
            with np.errstate(divide="ignore"):
                inv = 1 / t
            out |= (inv > lo) & (inv < hi)
        return out

    def to_dict(self) -> dict:
        return {
            "bands_right": self.bands_right,
            "bands_left": self.bands_left,
            "atoms_right": [asdict(a) for a in self.atoms_right],
            "atoms_left": [asdict(a) for a in self.atoms_left],
            "omega1": self.omega1.tolist(),
            "omega2_s": self.omega2_s.tolist(),
            "omega2_a": self.omega2_a,
            "deltas": [asdict(d) for d in self.deltas],
            "Phi": self.Phi.tolist(),
            "r0_zeros": list(self.numerators),
            "r0_poles": list(self.denominators),
        }


def s_sign(t):
    """s(t) = 1 for |t| > 1 and -1 for |t| < 1."""
    return np.where(np.abs(np.asarray(t, dtype=float)) > 1, 1.0, -1.0)


def _member(t, pts):
    t = np.asarray(t, dtype=float)
    if len(pts) == 0:
        return np.zeros(t.shape, dtype=bool)
    return np.min(np.abs(t[..., None] - np.asarray(pts)[None, :]), axis=-1) < MEMBERSHIP_TOL


# half-lattice atoms ---------------------------------------------------------

def _norm_bound(spec: LatticeSpec) -> float:
    a = list(spec.a) + [spec.left_tail.a, spec.right_tail.a]
    b = list(spec.b) + [spec.left_tail.b, spec.right_tail.b]
    return max(abs(x) for x in a) + 2 * max(b)


def _decaying_values(spec: LatticeSpec, which: str, t):
    """(f(-1), f(0), lam) of the decaying solution parametrized by the tail
    root t, |t| < 1, for real lam outside the tail band."""
    t = np.asarray(t, dtype=float)
    if which == "R":
        tail = spec.right_tail
        lam = tail.a + tail.b * (t + 1 / t)
        k = spec.window_hi + 1
        f_next, f = t, np.ones_like(t)
        while k > -1:
            f_prev = -((spec.a_at(k) - lam) * f + spec.b_at(k) * f_next) / spec.b_at(k - 1)
            f_next, f = f, f_prev
            k -= 1
            s = np.maximum(np.abs(f), np.abs(f_next))
            f, f_next = f / s, f_next / s
        return f, f_next, lam
    tail = spec.left_tail
    lam = tail.a + tail.b * (t + 1 / t)
    k = spec.window_lo - 1
    f_prev, f = np.ones_like(t), 1 / t
    while k < 0:
        f_new = -(spec.b_at(k - 1) * f_prev + (spec.a_at(k) - lam) * f) / spec.b_at(k)
        f_prev, f = f, f_new
        k += 1
        s = np.maximum(np.abs(f), np.abs(f_prev))
        f, f_prev = f / s, f_prev / s
    return f_prev, f, lam


def _t_grid(t_min: float) -> np.ndarray:
    near = 1 - np.geomspace(1e-8, 1e-2, 400)
    far = np.linspace(t_min, 1 - 1e-2, 3000)
    pos = np.unique(np.concatenate([far, near]))
    return np.concatenate([-pos[::-1], pos])


def _residue_mass(F, lam0: float, radius: float, n: int = 128) -> float:
    """mass of an atom: F ~ mass / (lam0 - lam) near lam0."""
    w = np.exp(2j * np.pi * np.arange(n) / n)
    vals = F(lam0 + radius * w)
    return float((-np.mean(vals * radius * w)).real)


def _half_atoms(spec: LatticeSpec, field: WeylField, which: str) -> list:
    tail = spec.right_tail if which == "R" else spec.left_tail
    bound = _norm_bound(spec) + abs(tail.a)
    x_max = bound / tail.b + 2
    t_min = 1 / x_max
    t = _t_grid(t_min)

    def f_zero(tt):
        return float(_decaying_values(spec, which, np.array([tt]))[0][0])

    vals = _decaying_values(spec, which, t)[0]
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        if t[i] * t[i + 1] < 0:
            continue
        roots.append(brentq(f_zero, t[i], t[i + 1], xtol=1e-15, rtol=1e-15))
    if which == "R":
        F = lambda lam: field.b * field.m_right(lam)
    else:
        F = lambda lam: -1 / (field.b * field.m_left(lam))
    lams = [tail.a + tail.b * (r + 1 / r) for r in roots]
    atoms = []
    for r, lam in zip(roots, lams):
        others = [abs(lam - l2) for l2 in lams if l2 != lam]
        gap = min([abs(abs(lam - tail.a) - 2 * tail.b)] + others)
        mass = _residue_mass(F, lam, min(1e-3, 0.25 * gap))
        if mass < ATOM_MASS_FLOOR:
            log.debug("dropping %s-atom at %g with mass %g", which, lam, mass)
            continue
        z = _z_image(lam, which)
        atoms.append(Atom(float(lam), float(z), mass, which))
    return atoms


def _z_image(lam: float, which: str) -> float:
    """Preimage of lam under t + 1/t inside (R) or outside (L) the disk."""
    s = np.sqrt(lam * lam - 4 + 0j).real
    t = (lam - s) / 2 if abs((lam - s) / 2) < 1 else (lam + s) / 2
    return t if which == "R" else 1 / t


def detect_supports(field: WeylField):
    spec = field.spec
    bands_r = [list(spec.right_tail.band)]
    bands_l = [list(spec.left_tail.band)]
    return bands_r, bands_l, _half_atoms(spec, field, "R"), _half_atoms(spec, field, "L")


def _z_intervals_beyond(bands_common) -> list:
    """Real z-intervals (|t| != 1) whose image t + 1/t lies in the common
    band part outside [-2, 2]."""
    out = []
    for lo, hi in bands_common:
        for a, b in ((max(lo, 2.0), hi), (lo, min(hi, -2.0))):
            if b - a <= 1e-12:
                continue
            za = [_z_image(a, "R"), _z_image(b, "R")]
            zi = (min(za), max(za))
            out.append(zi)
            out.append((min(1 / zi[0], 1 / zi[1]), max(1 / zi[0], 1 / zi[1])))
    return sorted(out)


# interval splitting -------------------------------------------------------

def split_intervals(part: SpectrumPartition, field: WeylField, span: float) -> list:
    """Cut |t| > 1 at singular points; locate the sign change of N in each piece."""
    cuts = [p for p in np.concatenate([part.omega1, 1 / part.omega1, part.omega2_s])
            if abs(p) > 1]
    pos = sorted(p for p in cuts if p > 0)
    neg = sorted(p for p in cuts if p < 0)
    edges_pos = [1.0] + pos + [np.inf]
    edges_neg = [-np.inf] + neg + [-1.0]
    deltas = []
    for lo, hi in list(zip(edges_neg[:-1], edges_neg[1:])) + list(zip(edges_pos[:-1], edges_pos[1:])):
        deltas.append(_split_one(field, lo, hi, span, part))
    return deltas


def _sample_interval(lo: float, hi: float, span: float) -> np.ndarray:
    a = lo if np.isfinite(lo) else -span
    b = hi if np.isfinite(hi) else span
    w = b - a
    if w <= 0:
        return np.array([])
    u = np.concatenate([np.geomspace(1e-9, 1e-2, 200), np.linspace(1e-2, 1 - 1e-2, 2000),
                        1 - np.geomspace(1e-9, 1e-2, 200)])
    u = np.unique(u)
    pts = a + w * u
    if not np.isfinite(lo):
        pts = pts[pts > a + 1e-9]
    return pts


def _split_one(field: WeylField, lo: float, hi: float, span: float, part) -> DeltaInterval:
    t = _sample_interval(lo, hi, span)
    if len(part.omega2_a):
        t = t[~part.chi2_a(t)]
    N = field.N(t + 0j).real
    ok = np.isfinite(N)
    t, N = t[ok], N[ok]
    sgn = np.sign(N)
    changes = np.nonzero((sgn[:-1] < 0) & (sgn[1:] > 0))[0]
    down = np.nonzero((sgn[:-1] > 0) & (sgn[1:] < 0))[0]
    # a pole of N between samples also flips the sign; those sit at the cut points
    if len(changes) > 1 or len(down) > 0:
        raise ValueError(f"N changes sign more than once on ({lo}, {hi})")
    if len(changes) == 1:
        i = changes[0]
        f = lambda x: float(field.N(complex(x)).real)
        phi = brentq(f, t[i], t[i + 1], xtol=1e-14, rtol=1e-15)
        return DeltaInterval(lo, hi, float(phi), True)
    if np.all(sgn >= 0):
        return DeltaInterval(lo, hi, lo, False)
    return DeltaInterval(lo, hi, hi, False)


def star_select(part: SpectrumPartition) -> None:
    """Choose one representative of each pair {x, 1/x} and collect the
    zeros and poles of the rational factor."""
    vomega1 = 1 / part.omega1 if len(part.omega1) else np.array([])

    def in_v(x):
        return np.isfinite(x) and bool(_member(np.array([x]), vomega1)[0])

    def in_o(x):
        return np.isfinite(x) and bool(_member(np.array([x]), part.omega1)[0])

    nums, dens = [], []
    for d in part.deltas:
        d.alpha_star = (1 / d.lo if in_v(d.lo) else d.lo) if np.isfinite(d.lo) else None
        if in_o(d.lo) and in_o(d.hi):
            d.phi_star = d.phi
        elif in_v(d.lo) and in_v(d.hi):
            d.phi_star = 1 / d.phi
        elif np.isfinite(d.phi):
            d.phi_star = 1 / d.phi if in_v(d.phi) else d.phi
        else:
            d.phi_star = None
    neg = [d for d in part.deltas if d.hi <= -1]
    first, last = neg[0], neg[-1]
    for d in neg:
        if d is not first:
            nums.append(d.alpha_star)
        if d is not last:
            dens.append(d.phi_star)
    if last.phi_star is not None and abs(last.phi_star + 1) > MEMBERSHIP_TOL:
        # N changes sign next to -1: mirror of the rule at +1
        nums.append(-1.0)
        dens.append(last.phi_star)
    if first is last and abs(first.phi + 1) <= MEMBERSHIP_TOL:
        first.alpha_star = first.phi_star = -1.0
    for d in part.deltas:
        if d.lo >= 1:
            if d.alpha_star is not None:
                nums.append(d.alpha_star)
            if d.phi_star is not None:
                dens.append(d.phi_star)
    # cancel coincident zero/pole pairs
    for x in list(nums):
        for y in list(dens):
            if abs(x - y) < MEMBERSHIP_TOL:
                nums.remove(x)
                dens.remove(y)
                break
    if len(nums) + len(dens) > 2 * MAX_GAP_FACTORS:
        raise ValueError("too many gap factors")
    part.numerators = [float(x) for x in nums]
    part.denominators = [float(x) for x in dens]


def build_partition(field: WeylField) -> SpectrumPartition:
    spec = field.spec
    bands_r, bands_l, atoms_r, atoms_l = detect_supports(field)
    zr = np.array([a.z for a in atoms_r])
    zl = np.array([a.z for a in atoms_l])
    common_r = [t for t in zr if len(zl) and np.min(np.abs(1 / t - zl)) < 1e-7]
    common_l = [t for t in zl if len(zr) and np.min(np.abs(1 / t - zr)) < 1e-7]
    omega2_s = np.array(sorted(common_r + common_l))
    omega1 = np.array(sorted([t for t in zr if t not in common_r] + [t for t in zl if t not in common_l]))
    common = []
    for lo, hi in bands_r:
        for lo2, hi2 in bands_l:
            a, b = max(lo, lo2), min(hi, hi2)
            if b > a:
                common.append((a, b))
    part = SpectrumPartition(bands_r, bands_l, atoms_r, atoms_l, omega1, omega2_s,
                             _z_intervals_beyond(common))
    span = _norm_bound(spec) + 4
    part.deltas = split_intervals(part, field, span)
    star_select(part)
    return part


# condition validation -------------------------------------------------------

@dataclass
class ConditionReport:
    passed: dict
    margins: dict
    notes: dict

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margins": self.margins, "notes": self.notes}


def _holder_quotient(f, a: float, b: float, gamma: float = 0.5, levels: int = 12) -> float:
    x = np.linspace(a, b, 2 ** levels + 1)
    y = f(x)
    worst = 0.0
    for lev in range(levels):
        step = 2 ** lev
        d = np.abs(y[step:] - y[:-step])
        h = (x[step] - x[0])
        worst = max(worst, float(np.nanmax(d)) / h ** gamma)
    return worst


def validate_conditions(part: SpectrumPartition, field: WeylField,
                        n_samples: int = 512, edge_guard: float = 1e-3) -> ConditionReport:
    passed, margins, notes = {}, {}, {}
    # A) mutual distances of the z-plane sets and the circle
    groups = {
        "omega1_phi": np.concatenate([part.omega1, part.Phi]),
        "v_omega1_phi": 1 / np.concatenate([part.omega1, part.Phi]) if len(part.omega1) + len(part.Phi) else np.array([]),
        "omega2_s": part.omega2_s,
    }
    dist = np.inf
    names = list(groups)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if len(groups[a]) and len(groups[b]):
                dist = min(dist, float(np.min(np.abs(groups[a][:, None] - groups[b][None, :]))))
    pts = np.concatenate(list(groups.values()))
    if len(pts):
        dist = min(dist, float(np.min(np.abs(np.abs(pts) - 1))))
        for lo, hi in part.omega2_a:
            dist = min(dist, float(np.min(np.minimum(np.abs(pts - lo), np.abs(pts - hi)))))
    margins["A"] = dist
    passed["A"] = bool(dist > MEMBERSHIP_TOL) and len(part.omega2_s) < 64

    # B) arguments strictly inside (0, pi) on interior samples of [-2, 2]
    theta = (np.arange(n_samples) + 0.5) * np.pi / n_samples
    theta = theta[(theta > edge_guard) & (theta < np.pi - edge_guard)]
    tau = 2 * np.cos(theta)
    dp = field.densities(tau)
    mb = np.minimum(np.minimum(dp.eta_right, np.pi - dp.eta_right),
                    np.minimum(dp.eta_left, np.pi - dp.eta_left))
    margins["B"] = float(np.min(mb))
    margins["B_at_0"] = float(mb[np.argmin(np.abs(tau))])
    passed["B"] = bool(np.min(mb) > 0)
    notes["B"] = "margin measured on interior samples of [-2, 2]; it degenerates at the band edges"

    # C) sampled Hoelder quotient of eta^R - eta^L
    def diff(x):
        d = field.densities(x)
        return d.eta_right - d.eta_left
    hq = _holder_quotient(diff, -2 + edge_guard, 2 - edge_guard)
    margins["C"] = hq
    passed["C"] = bool(np.isfinite(hq) and hq < 1e3)

    # D) oscillation of the arguments on the common band beyond [-2, 2]
    osc = 0.0
    for lo, hi in part.omega2_a:
        t = np.linspace(lo, hi, 257)[1:-1]
        lam = t + 1 / t
        d = field.densities(lam)
        osc = max(osc, float(np.ptp(d.eta_right)), float(np.ptp(d.eta_left)))
    margins["D"] = np.pi - osc
    passed["D"] = bool(osc < np.pi)

    # E) no half-lattice spectrum next to +-2 and Hoelder arguments on [-2, 2]
    gap = np.inf
    for lo, hi in part.bands_right + part.bands_left:
        if hi > 2.0 + 1e-12 or lo < -2.0 - 1e-12:
            gap = 0.0
    for a in part.atoms_right + part.atoms_left:
        gap = min(gap, abs(abs(a.lam) - 2.0))
    he = max(_holder_quotient(lambda x: field.densities(x).eta_right, -2 + edge_guard, 2 - edge_guard),
             _holder_quotient(lambda x: field.densities(x).eta_left, -2 + edge_guard, 2 - edge_guard))
    margins["E_gap"] = gap
    margins["E_holder"] = he
    passed["E"] = bool(gap > 1e-3 and np.isfinite(he) and he < 1e3)
    notes["E"] = "requires both half-lattices to have no spectrum in a neighbourhood of +-2 outside [-2, 2]"
    return ConditionReport(passed, margins, notes)
