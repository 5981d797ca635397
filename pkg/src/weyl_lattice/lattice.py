"""Doubly-infinite Jacobi matrices with a finite window and constant tails.

The matrix acts as

    (J w)_k = b_{k-1} w_{k-1} + a_k w_k + b_k w_{k+1},

with a_k, b_k taken from the window for window_lo <= k <= window_hi and
from the left/right tail constants outside of it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "SpecError",
    "TailModel",
    "LatticeSpec",
    "PolySolutionPair",
    "eval_pq",
    "h_weights",
    "oracle_truncate",
    "oracle_resolvent",
    "free_spec",
    "perturbed_spec",
]

ENTRY_BOUND = 1e6


class SpecError(ValueError):
    """Invalid lattice description."""


@dataclass(frozen=True)
class TailModel:
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.a) or not np.isfinite(self.b):
            raise SpecError("tail constants must be finite")
        if self.b <= 0:
            raise SpecError(f"tail b must be positive, got {self.b}")

    @property
    def band(self) -> tuple[float, float]:
        return self.a - 2 * self.b, self.a + 2 * self.b

    def covers_reference_band(self) -> bool:
        lo, hi = self.band
        return lo <= -2.0 + 1e-12 and hi >= 2.0 - 1e-12

    def is_free(self) -> bool:
        return self.a == 0.0 and self.b == 1.0


@dataclass(frozen=True)
class LatticeSpec:
    window_lo: int
    window_hi: int
    a: tuple
    b: tuple
    left_tail: TailModel = field(default_factory=TailModel)
    right_tail: TailModel = field(default_factory=TailModel)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        n = self.window_hi - self.window_lo + 1
        if self.window_lo > -2 or self.window_hi < 1:
            raise SpecError("window must satisfy window_lo <= -2 and window_hi >= 1")
        if len(self.a) != n or len(self.b) != n:
            raise SpecError(f"window of size {n} needs {n} values of a and b")
        arr = np.array(self.a + self.b)
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > ENTRY_BOUND:
            raise SpecError("entries must be finite and bounded")
        if min(self.b) <= 0:
            raise SpecError("off-diagonal entries b_k must be positive")

    # entry access -----------------------------------------------------
    def a_at(self, k: int) -> float:
        if k < self.window_lo:
            return self.left_tail.a
        if k > self.window_hi:
            return self.right_tail.a
        return self.a[k - self.window_lo]

    def b_at(self, k: int) -> float:
        if k < self.window_lo:
            return self.left_tail.b
        if k > self.window_hi:
            return self.right_tail.b
        return self.b[k - self.window_lo]

    def entries(self, k_lo: int, k_hi: int) -> tuple[np.ndarray, np.ndarray]:
        ks = range(k_lo, k_hi + 1)
        return (np.array([self.a_at(k) for k in ks]),
                np.array([self.b_at(k) for k in ks]))

    @property
    def b_minus1(self) -> float:
        return self.b_at(-1)

    def has_free_tails(self) -> bool:
        return self.left_tail.is_free() and self.right_tail.is_free()

    def validate_tails(self) -> None:
        """Both tail bands must contain [-2, 2]."""
        for name, tail in (("left", self.left_tail), ("right", self.right_tail)):
            if not tail.covers_reference_band():
                lo, hi = tail.band
                raise SpecError(f"{name} tail band [{lo}, {hi}] does not contain [-2, 2]")

    # serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "window_lo": self.window_lo,
            "window_hi": self.window_hi,
            "a": list(self.a),
            "b": list(self.b),
            "left_tail": {"a": self.left_tail.a, "b": self.left_tail.b},
            "right_tail": {"a": self.right_tail.a, "b": self.right_tail.b},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LatticeSpec":
        try:
            spec = cls(
                window_lo=int(d["window_lo"]),
                window_hi=int(d["window_hi"]),
                a=tuple(d["a"]),
                b=tuple(d["b"]),
                left_tail=TailModel(**_tail(d.get("left_tail", {}))),
                right_tail=TailModel(**_tail(d.get("right_tail", {}))),
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed spec: {exc}") from exc
        spec.validate_tails()
        return spec

    @classmethod
    def from_json(cls, text: str) -> "LatticeSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec is not valid JSON: {exc}") from exc


def _tail(d: Mapping) -> dict:
    return {"a": float(d.get("a", 0.0)), "b": float(d.get("b", 1.0))}


def free_spec(lo: int = -8, hi: int = 8) -> LatticeSpec:
    n = hi - lo + 1
    return LatticeSpec(lo, hi, (0.0,) * n, (1.0,) * n)


def perturbed_spec(a: Mapping[int, float] | None = None,
                   b: Mapping[int, float] | None = None,
                   lo: int = -8, hi: int = 8) -> LatticeSpec:
    """Free lattice with a few entries replaced, e.g. perturbed_spec(a={0: 0.3})."""
    a = dict(a or {})
    b = dict(b or {})
    ks = list(a) + list(b)
    lo = min([lo] + [k - 1 for k in ks])
    hi = max([hi] + [k + 1 for k in ks])
    av = tuple(a.get(k, 0.0) for k in range(lo, hi + 1))
    bv = tuple(b.get(k, 1.0) for k in range(lo, hi + 1))
    return LatticeSpec(lo, hi, av, bv)


@dataclass(frozen=True)
class PolySolutionPair:
    """P_k and Q_k for k_lo <= k <= k_hi at one value of lambda."""
    k_lo: int
    lam: complex
    P: np.ndarray
    Q: np.ndarray

    def at(self, k: int) -> tuple[complex, complex]:
        i = k - self.k_lo
        return self.P[i], self.Q[i]


def eval_pq(spec: LatticeSpec, lam, k_lo: int, k_hi: int) -> PolySolutionPair:
    """Run the three-term recurrence from P_0=1, P_{-1}=0, Q_0=0, Q_{-1}=1.

    lam may be an array; the k axis is the leading axis of P and Q.
    """
    if not (k_lo <= -1 and k_hi >= 0):
        raise ValueError("need k_lo <= -1 <= 0 <= k_hi")
    lam = np.asarray(lam, dtype=complex)
    # longer recurrences far outside the band grow like |z|^-k
    dtype = np.clongdouble if np.any(np.abs(lam) > 4) else complex
    lam_x = lam.astype(dtype)
    n = k_hi - k_lo + 1
    P = np.zeros((n,) + lam.shape, dtype=dtype)
    Q = np.zeros_like(P)
    i0 = -k_lo  # index of k = 0
    P[i0], Q[i0 - 1] = 1, 1
    for k in range(0, k_hi):
        i = k - k_lo
        bk, bkm, ak = spec.b_at(k), spec.b_at(k - 1), spec.a_at(k)
        P[i + 1] = -(bkm * P[i - 1] + (ak - lam_x) * P[i]) / bk
        Q[i + 1] = -(bkm * Q[i - 1] + (ak - lam_x) * Q[i]) / bk
    for k in range(-1, k_lo, -1):
        i = k - k_lo
        bk, bkm, ak = spec.b_at(k), spec.b_at(k - 1), spec.a_at(k)
        P[i - 1] = -((ak - lam_x) * P[i] + bk * P[i + 1]) / bkm
        Q[i - 1] = -((ak - lam_x) * Q[i] + bk * Q[i + 1]) / bkm
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
        raise OverflowError("recurrence overflowed")
    return PolySolutionPair(k_lo, complex(lam) if lam.ndim == 0 else lam,
                            P.astype(complex), Q.astype(complex))


def h_weights(spec: LatticeSpec, k: int) -> float:
    """h_k with h_{-1} = 1 and h_{k+1} / h_k = b_k."""
    if k >= -1:
        return float(np.prod([spec.b_at(j) for j in range(-1, k)]))
    return 1.0 / float(np.prod([spec.b_at(j) for j in range(k, -1)]))


def oracle_truncate(spec: LatticeSpec, N: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the Dirichlet truncation to [-N, N]."""
    if N < max(-spec.window_lo, spec.window_hi) + 1:
        raise ValueError("truncation too small for the window")
    d, e = spec.entries(-N, N)
    return d, e[:-1]


_EIG_CACHE: dict = {}


def _eig(spec: LatticeSpec, N: int):
    key = (spec, N)
    if key not in _EIG_CACHE:
        d, e = oracle_truncate(spec, N)
        if len(_EIG_CACHE) > 8:
            _EIG_CACHE.clear()
        _EIG_CACHE[key] = eigh_tridiagonal(d, e)
    return _EIG_CACHE[key]


def oracle_eigenvalues(spec: LatticeSpec, N: int = 2000) -> np.ndarray:
    return _eig(spec, N)[0]


def oracle_resolvent(spec: LatticeSpec, N: int, lam: complex, i: int, j: int) -> complex:
    """Entry (i, j) of (J_N - lam)^{-1}, i.e. sum v(i) v(j) / (lam_m - lam)."""
    w, v = _eig(spec, N)
    if np.min(np.abs(w - lam)) < 1e-12:
        raise ZeroDivisionError("lambda sits on a truncated eigenvalue")
    return complex(np.sum(v[i + N] * v[j + N] / (w - lam)))
