"""Exact calculus on finite combinations of exponential vectors.

A combination sum_k c_k e(f_k) is stored by its coefficients and directions;
all pairings go through the reproducing kernel <e(f), e(g)> = exp(<f, g>), so
no truncation enters. The shift family and the pairing family act by exact
term rewriting:

    shift:          e(g) -> exp(<f, g>) e(g),  adjoint  e(g) -> e(g + f)
    pair(t):        e(f) -> e(f) (x) e(t f)
    pair(t) adjoint: e(f) (x) e(g) -> e(f + t g)

Only recorded combinations can be shifted or paired; a plain truncated vector
carries no exponential structure to rewrite (exp_vector stamps its source, so
its truncations remain usable).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import FockVector, as_mode_vector, exp_vector

__all__ = [
    "ExpCombo",
    "ExpCombo2",
    "exp_gram",
    "exp_gram2",
    "exp_shift",
    "pair_map",
    "pair_merge",
]


@dataclass(eq=False)
class ExpCombo:
    """Finite combination sum_k c_k e(f_k)."""

    d: int
    terms: list[tuple[complex, np.ndarray]]

    def __post_init__(self):
        fixed = []
        for c, f in self.terms:
            fixed.append((complex(c), as_mode_vector(f, self.d)))
        self.terms = fixed

    @classmethod
    def single(cls, f) -> "ExpCombo":
        fa = as_mode_vector(f)
        return cls(fa.shape[0], [(1.0 + 0j, fa)])

    def __add__(self, other: "ExpCombo") -> "ExpCombo":
        if self.d != other.d:
            raise ValueError("mode dimension mismatch")
        return ExpCombo(self.d, list(self.terms) + list(other.terms))

    def __mul__(self, scalar) -> "ExpCombo":
        c = complex(scalar)
        return ExpCombo(self.d, [(c * a, f) for a, f in self.terms])

    __rmul__ = __mul__

    def gram(self, other: "ExpCombo") -> complex:
        return exp_gram(self, other)

    def norm(self) -> float:
        return float(np.sqrt(max(exp_gram(self, self).real, 0.0)))

    def to_fock(self, truncation: int) -> FockVector:
        """Truncate to levels 0..M; the result records this combo as source."""
        out = FockVector.zero(self.d, truncation)
        for c, f in self.terms:
            ef = exp_vector(f, truncation)
            for n in range(truncation + 1):
                out.levels[n] += c * ef.levels[n]
        out.source = self
        return out


@dataclass(eq=False)
class ExpCombo2:
    """Finite combination sum_k c_k e(f_k) (x) e(g_k) on the doubled space."""

    d: int
    terms: list[tuple[complex, np.ndarray, np.ndarray]]

    def __post_init__(self):
        fixed = []
        for c, f, g in self.terms:
            fixed.append(
                (complex(c), as_mode_vector(f, self.d), as_mode_vector(g, self.d))
            )
        self.terms = fixed

    @classmethod
    def single(cls, f, g) -> "ExpCombo2":
        fa = as_mode_vector(f)
        return cls(fa.shape[0], [(1.0 + 0j, fa, as_mode_vector(g, fa.shape[0]))])

    def __add__(self, other: "ExpCombo2") -> "ExpCombo2":
        if self.d != other.d:
            raise ValueError("mode dimension mismatch")
        return ExpCombo2(self.d, list(self.terms) + list(other.terms))

    def __mul__(self, scalar) -> "ExpCombo2":
        c = complex(scalar)
        return ExpCombo2(self.d, [(c * a, f, g) for a, f, g in self.terms])

    __rmul__ = __mul__

    def gram(self, other: "ExpCombo2") -> complex:
        return exp_gram2(self, other)


def exp_gram(a: ExpCombo, b: ExpCombo) -> complex:
    """<a, b> via the exponential kernel, exact."""
    if a.d != b.d:
        raise ValueError("mode dimension mismatch")
    total = 0.0 + 0.0j
    for ca, fa in a.terms:
        for cb, fb in b.terms:
            total += np.conj(ca) * cb * np.exp(np.vdot(fa, fb))
    return complex(total)


def exp_gram2(a: ExpCombo2, b: ExpCombo2) -> complex:
    """Pairing on the doubled space: the kernel factorizes over the legs."""
    if a.d != b.d:
        raise ValueError("mode dimension mismatch")
    total = 0.0 + 0.0j
    for ca, fa, ga in a.terms:
        for cb, fb, gb in b.terms:
            total += np.conj(ca) * cb * np.exp(np.vdot(fa, fb) + np.vdot(ga, gb))
    return complex(total)


def _require_combo(x) -> ExpCombo:
    if isinstance(x, ExpCombo):
        return x
    if isinstance(x, FockVector):
        if isinstance(x.source, ExpCombo):
            return x.source
        raise ValueError(
            "this operation needs exponential structure; the Fock vector does "
            "not record a generating combination"
        )
    raise TypeError(f"expected ExpCombo or FockVector, got {type(x).__name__}")


def exp_shift(f, x, adjoint: bool = False):
    """Exponential shift family along f.

    Plain mode: e(g) -> exp(<f, g>) e(g). Adjoint mode: e(g) -> e(g + f).
    Accepts a combination, or a Fock vector stamped by one (the result is then
    re-truncated at the same roof).
    """
    combo = _require_combo(x)
    fa = as_mode_vector(f, combo.d)
    if adjoint:
        shifted = ExpCombo(combo.d, [(c, g + fa) for c, g in combo.terms])
    else:
        shifted = ExpCombo(
            combo.d, [(c * np.exp(np.vdot(fa, g)), g) for c, g in combo.terms]
        )
    if isinstance(x, FockVector):
        return shifted.to_fock(x.truncation)
    return shifted


def pair_map(t: float, x) -> ExpCombo2:
    """Pairing family: e(f) -> e(f) (x) e(t f)."""
    combo = _require_combo(x)
    s = float(t)
    return ExpCombo2(combo.d, [(c, f, s * f) for c, f in combo.terms])


def pair_merge(t: float, x2: ExpCombo2) -> ExpCombo:
    """Adjoint of the pairing family: e(f) (x) e(g) -> e(f + t g)."""
    if not isinstance(x2, ExpCombo2):
        raise TypeError(f"expected ExpCombo2, got {type(x2).__name__}")
    s = float(t)
    return ExpCombo(x2.d, [(c, f + s * g) for c, f, g in x2.terms])
