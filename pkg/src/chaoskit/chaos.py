"""Chaos expansions over the simulation cells, and their Fock dictionary.

A square-integrable functional of the simulated noise is held as its list of
symmetric kernels, one per order, in occupation coordinates over the grid's
retained cells: kernels[n][p] is the kernel value on any argument tuple whose
cell multiset is the occupation at position p. All L2 pairings carry the cell
masses, so the stored objects are discretizations of the continuum kernels,
not abstract coefficient arrays.

`embed_chaos` transfers an expansion to the truncated Fock space over one
mode per cell; the transfer is an isometry for the E|F|^2 norm, sends the
stochastic exponential's kernels to an exponential vector, and intertwines
gradient with the universal lowering map and divergence with the raising map
coefficient for coefficient. That gives every identity here two independent
routes: a kernel-level sum in this module and a ladder-operator computation
in `fock`. Pathwise, the same expansions are evaluated by the engines in
`integrals`, either through recorded power-term structure or through the
per-cell product decomposition of multiple integrals.
"""
from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass
from hashlib import sha256
from math import factorial

import numpy as np

from .fock import FockVector, MarkedFock, SkorohodIdentity, ito_skorohod
from .fock import split as fock_split
from .indices import (
    check_level,
    level_dim,
    lower_maps,
    multiplicities,
    occ_array,
    position,
    raise_maps,
    factorial_ratio_sqrt,
)
from .integrals import _as_ensemble, power_integrals
from .levy import CellGrid, StepField

__all__ = [
    "ChaosCoefficients",
    "MarkedChaos",
    "kernel_inner",
    "embed_field",
    "embed_chaos",
    "extract_chaos",
    "embed_marked",
    "gradient",
    "divergence",
    "number_apply",
    "number_factorization_residual",
    "dom_gradient_functional",
    "dom_divergence_functional",
    "ou_semigroup",
    "sobolev_scale",
    "process_inner",
    "ChaosSkorohod",
    "ito_skorohod_chaos",
    "BNSplit",
    "bn_split",
    "chaos_evaluate",
    "project_mc",
    "save_chaos",
    "load_chaos",
]


def _mass_weights(grid: CellGrid, n: int) -> np.ndarray:
    """Product of cell masses over each occupation, mu^alpha."""
    if n == 0:
        return np.ones(1)
    occ = occ_array(grid.n_cells, n)
    return np.exp(occ @ np.log(grid.cell_masses))


def kernel_inner(grid: CellGrid, n: int, f: np.ndarray, g: np.ndarray) -> complex:
    """L2(mu^n) pairing of symmetric order-n kernels, conjugate on the left."""
    w = multiplicities(grid.n_cells, n) * _mass_weights(grid, n)
    return complex(np.sum(np.conj(f) * g * w))


def _zero_kernels(c: int, truncation: int) -> list[np.ndarray]:
    return [
        np.zeros(check_level(c, n), dtype=np.complex128)
        for n in range(truncation + 1)
    ]


@dataclass(eq=False)
class ChaosCoefficients:
    """Truncated chaos expansion sum_n I_n(kernels[n]).

    source, when present, records the expansion as power terms
    (coeff, field, degree) meaning coeff * I_degree(field tensor power); the
    kernels stay authoritative, the terms only let `chaos_evaluate` use the
    exact generating-series engine instead of the dense product route.
    """

    grid: CellGrid
    truncation: int
    kernels: list[np.ndarray]
    source: list | None = None

    def __post_init__(self):
        if self.truncation < 0:
            raise ValueError("truncation must be >= 0")
        if len(self.kernels) != self.truncation + 1:
            raise ValueError(
                f"expected {self.truncation + 1} kernels, got {len(self.kernels)}"
            )
        c = self.grid.n_cells
        casted = []
        for n, k in enumerate(self.kernels):
            dim = check_level(c, n)
            arr = np.asarray(k, dtype=np.complex128)
            if arr.shape != (dim,):
                raise ValueError(
                    f"order-{n} kernel expects shape ({dim},), got {arr.shape}"
                )
            casted.append(arr)
        self.kernels = casted

    @classmethod
    def zero(cls, grid: CellGrid, truncation: int) -> "ChaosCoefficients":
        return cls(grid, truncation, _zero_kernels(grid.n_cells, truncation), [])

    @classmethod
    def constant(cls, grid: CellGrid, truncation: int, value) -> "ChaosCoefficients":
        out = cls.zero(grid, truncation)
        out.kernels[0][0] = value
        out.source = [(complex(value), None, 0)]
        return out

    @classmethod
    def from_field(
        cls, field: StepField, truncation: int
    ) -> "ChaosCoefficients":
        """First-order functional I_1(field)."""
        if truncation < 1:
            raise ValueError("a first-order functional needs truncation >= 1")
        out = cls.zero(field.grid, truncation)
        # order-one occupation rows enumerate cells last-first
        out.kernels[1][:] = field.cell_values()[::-1]
        out.source = [(1.0 + 0.0j, field, 1)]
        return out

    @classmethod
    def from_power(
        cls, field: StepField, degree: int, truncation: int, coeff=1.0
    ) -> "ChaosCoefficients":
        """coeff * I_degree of the tensor power of one field."""
        if not 0 <= degree <= truncation:
            raise ValueError("degree must lie within the truncation")
        out = cls.zero(field.grid, truncation)
        c = field.grid.n_cells
        vals = field.cell_values()
        occ = occ_array(c, degree)
        prod = np.full(occ.shape[0], complex(coeff), dtype=np.complex128)
        for i in range(c):
            hot = occ[:, i] > 0
            if np.any(hot):
                prod[hot] *= vals[i] ** occ[hot, i]
        out.kernels[degree][:] = prod
        out.source = [(complex(coeff), field if degree else None, degree)]
        return out

    @classmethod
    def doleans(cls, field: StepField, truncation: int) -> "ChaosCoefficients":
        """Chaos kernels of the stochastic exponential, field^n / n! per order."""
        out = cls.zero(field.grid, truncation)
        for n in range(truncation + 1):
            term = cls.from_power(field, n, truncation, 1.0 / factorial(n))
            out.kernels[n][:] = term.kernels[n]
            out.source.extend(term.source)
        return out

    def _check_compatible(self, other: "ChaosCoefficients"):
        if self.truncation != other.truncation or (
            other.grid is not self.grid and other.grid.spec() != self.grid.spec()
        ):
            raise ValueError("chaos expansions are not compatible")

    def copy(self) -> "ChaosCoefficients":
        return ChaosCoefficients(
            self.grid,
            self.truncation,
            [k.copy() for k in self.kernels],
            None if self.source is None else list(self.source),
        )

    def __add__(self, other: "ChaosCoefficients") -> "ChaosCoefficients":
        self._check_compatible(other)
        src = None
        if self.source is not None and other.source is not None:
            src = list(self.source) + list(other.source)
        return ChaosCoefficients(
            self.grid,
            self.truncation,
            [a + b for a, b in zip(self.kernels, other.kernels)],
            src,
        )

    def __sub__(self, other: "ChaosCoefficients") -> "ChaosCoefficients":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "ChaosCoefficients":
        z = complex(scalar)
        src = None
        if self.source is not None:
            src = [(z * c, f, n) for c, f, n in self.source]
        return ChaosCoefficients(
            self.grid, self.truncation, [z * k for k in self.kernels], src
        )

    __rmul__ = __mul__

    def inner(self, other: "ChaosCoefficients") -> complex:
        """E[conj(self) * other] under the chaos isometry."""
        self._check_compatible(other)
        total = 0.0 + 0.0j
        for n, (f, g) in enumerate(zip(self.kernels, other.kernels)):
            total += factorial(n) * kernel_inner(self.grid, n, f, g)
        return complex(total)

    def norm_sq(self) -> float:
        return float(self.inner(self).real)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def level_norm_sq(self, n: int) -> float:
        return float(
            (factorial(n) * kernel_inner(self.grid, n, self.kernels[n], self.kernels[n])).real
        )


@dataclass(eq=False)
class MarkedChaos:
    """Cell-indexed process with chaos kernels per mark.

    kernels[n] has shape (dim_n, n_cells); column s holds the order-n kernel
    of the process value at cell s. Symmetry in the n closed arguments is
    automatic in occupation storage; no symmetry ties them to the mark.
    """

    grid: CellGrid
    truncation: int
    kernels: list[np.ndarray]

    def __post_init__(self):
        if len(self.kernels) != self.truncation + 1:
            raise ValueError(
                f"expected {self.truncation + 1} marked kernels, got {len(self.kernels)}"
            )
        c = self.grid.n_cells
        casted = []
        for n, k in enumerate(self.kernels):
            dim = check_level(c, n)
            arr = np.asarray(k, dtype=np.complex128)
            if arr.shape != (dim, c):
                raise ValueError(
                    f"marked order-{n} kernel expects shape ({dim}, {c}), got {arr.shape}"
                )
            casted.append(arr)
        self.kernels = casted

    @classmethod
    def zero(cls, grid: CellGrid, truncation: int) -> "MarkedChaos":
        c = grid.n_cells
        return cls(
            grid,
            truncation,
            [
                np.zeros((check_level(c, n), c), dtype=np.complex128)
                for n in range(truncation + 1)
            ],
        )

    def section(self, cell: int) -> ChaosCoefficients:
        """The functional at one cell: kernels[n][:, cell] as an expansion."""
        if not 0 <= cell < self.grid.n_cells:
            raise ValueError(f"cell {cell} out of range")
        return ChaosCoefficients(
            self.grid,
            self.truncation,
            [k[:, cell].copy() for k in self.kernels],
        )


def process_inner(u: MarkedChaos, v: MarkedChaos) -> complex:
    """L2(mu; chaos) pairing: sum over cells of mass times section pairings."""
    if u.truncation != v.truncation or u.grid.spec() != v.grid.spec():
        raise ValueError("marked expansions are not compatible")
    grid = u.grid
    total = 0.0 + 0.0j
    for n, (g, h) in enumerate(zip(u.kernels, v.kernels)):
        w = multiplicities(grid.n_cells, n) * _mass_weights(grid, n)
        total += factorial(n) * np.einsum(
            "a,s,as,as->", w, grid.cell_masses, np.conj(g), h
        )
    return complex(total)


def gradient(F: ChaosCoefficients) -> MarkedChaos:
    """Malliavin derivative: order-n kernel at mark s is (n+1) f_{n+1}(., s).

    The top marked order is zero, mirroring the truncation roof.
    """
    grid, M = F.grid, F.truncation
    c = grid.n_cells
    out = MarkedChaos.zero(grid, M)
    for m in range(M):
        up_t = raise_maps(c, m)[0]
        out.kernels[m][:] = (m + 1) * F.kernels[m + 1][up_t]
    return out


def _symmetrize(grid: CellGrid, g: np.ndarray, m: int) -> np.ndarray:
    """Average the mark into the closed arguments: order m -> order m + 1."""
    c = grid.n_cells
    occ = occ_array(c, m + 1)
    low_t = lower_maps(c, m + 1)[0]
    out = np.zeros(occ.shape[0], dtype=np.complex128)
    for s in range(c):
        col = low_t[:, s]
        hot = col >= 0
        if np.any(hot):
            out[hot] += occ[hot, s] * g[col[hot], s]
    return out / (m + 1)


def divergence(u: MarkedChaos) -> tuple[ChaosCoefficients, float]:
    """Skorohod integral: symmetrized kernels one order up.

    Returns (expansion, dropped): dropped is the norm of the order that would
    land above the truncation roof.
    """
    grid, M = u.grid, u.truncation
    out = ChaosCoefficients.zero(grid, M)
    out.source = None
    dropped = 0.0
    for m in range(M + 1):
        tilde = _symmetrize(grid, u.kernels[m], m)
        if m + 1 <= M:
            out.kernels[m + 1][:] = tilde
        else:
            mass = factorial(m + 1) * kernel_inner(grid, m + 1, tilde, tilde).real
            dropped = float(np.sqrt(max(mass, 0.0)))
    return out, dropped


def number_apply(F: ChaosCoefficients) -> ChaosCoefficients:
    return ChaosCoefficients(
        F.grid, F.truncation, [n * k for n, k in enumerate(F.kernels)], None
    )


def number_factorization_residual(F: ChaosCoefficients) -> float:
    """Norm of divergence(gradient(F)) minus the number operator on F.

    Zero in exact arithmetic: the gradient's top marked order vanishes, so
    the composition never spills over the truncation roof.
    """
    composed, dropped = divergence(gradient(F))
    return float(np.hypot((composed - number_apply(F)).norm(), dropped))


def dom_gradient_functional(F: ChaosCoefficients) -> float:
    """Squared graph seminorm of the derivative: sum of n n! ||f_n||^2."""
    total = 0.0
    for n in range(1, F.truncation + 1):
        total += n * F.level_norm_sq(n)
    return float(total)


def dom_divergence_functional(u: MarkedChaos) -> float:
    """Divergence-domain functional: sum of (n+1)! ||symmetrized kernel||^2.

    Monotone under raising the truncation with the lower kernels fixed.
    """
    grid = u.grid
    total = 0.0
    for m in range(u.truncation + 1):
        tilde = _symmetrize(grid, u.kernels[m], m)
        total += factorial(m + 1) * kernel_inner(grid, m + 1, tilde, tilde).real
    return float(total)


def ou_semigroup(F: ChaosCoefficients, t: float) -> ChaosCoefficients:
    """Ornstein-Uhlenbeck flow: order n decays as exp(-t n)."""
    if t < 0:
        raise ValueError("semigroup time must be >= 0")
    return ChaosCoefficients(
        F.grid,
        F.truncation,
        [np.exp(-t * n) * k for n, k in enumerate(F.kernels)],
        None,
    )


def sobolev_scale(F: ChaosCoefficients) -> ChaosCoefficients:
    """Scale order n by (1 + n)^(-1/2); trades plain norm for graph norm."""
    return ChaosCoefficients(
        F.grid,
        F.truncation,
        [k / np.sqrt(1.0 + n) for n, k in enumerate(F.kernels)],
        None,
    )


# ---------------------------------------------------------------------------
# Fock dictionary


def embed_field(field: StepField) -> np.ndarray:
    """Mode vector of a field: cell values times root cell masses."""
    return field.cell_values() * np.sqrt(field.grid.cell_masses)


def _embed_scale(grid: CellGrid, n: int) -> np.ndarray:
    c = grid.n_cells
    return (
        np.sqrt(float(factorial(n)))
        * factorial_ratio_sqrt(c, n)
        * np.sqrt(_mass_weights(grid, n))
    )


def embed_chaos(F: ChaosCoefficients) -> FockVector:
    """Isometry onto the Fock space with one mode per retained cell.

    The stochastic exponential's kernels land exactly on the exponential
    vector of the embedded field, and E[conj(F) G] becomes the Fock pairing.
    """
    grid, M = F.grid, F.truncation
    levels = [
        _embed_scale(grid, n) * F.kernels[n] for n in range(M + 1)
    ]
    return FockVector(grid.n_cells, M, levels)


def extract_chaos(psi: FockVector, grid: CellGrid) -> ChaosCoefficients:
    """Inverse of `embed_chaos` for vectors over this grid's cells."""
    if psi.d != grid.n_cells:
        raise ValueError("mode count does not match the grid's retained cells")
    kernels = [
        psi.levels[n] / _embed_scale(grid, n) for n in range(psi.truncation + 1)
    ]
    return ChaosCoefficients(grid, psi.truncation, kernels, None)


def embed_marked(u: MarkedChaos, truncation: int | None = None) -> MarkedFock:
    """Marked-vector embedding; extra truncation headroom adds zero levels."""
    grid, M = u.grid, u.truncation
    Mt = M if truncation is None else truncation
    if Mt < M:
        raise ValueError("embedding cannot shrink the truncation")
    c = grid.n_cells
    root_mass = np.sqrt(grid.cell_masses)
    levels = []
    for n in range(Mt + 1):
        if n <= M:
            levels.append(
                _embed_scale(grid, n)[:, None] * u.kernels[n] * root_mass[None, :]
            )
        else:
            levels.append(np.zeros((check_level(c, n), c), dtype=np.complex128))
    return MarkedFock(c, Mt, levels)


# ---------------------------------------------------------------------------
# Skorohod isometry, kernel route against Fock route


@dataclass(frozen=True)
class ChaosSkorohod:
    """Both sides of the Skorohod isometry for a pair of processes.

    lhs: E[conj(delta u) delta v] from the symmetrized kernels, untruncated.
    base: the L2(mu; chaos) pairing of the processes.
    exchange: the mark-exchanged derivative correction.
    fock: the same identity run through the abstract ladder machinery.
    """

    lhs: complex
    base: complex
    exchange: complex
    fock: SkorohodIdentity | None

    @property
    def rhs(self) -> complex:
        return self.base + self.exchange

    @property
    def defect(self) -> float:
        return abs(self.lhs - self.rhs)


def ito_skorohod_chaos(
    u: MarkedChaos, v: MarkedChaos, fock_route: bool = True
) -> ChaosSkorohod:
    if u.truncation != v.truncation or u.grid.spec() != v.grid.spec():
        raise ValueError("marked expansions are not compatible")
    grid, M = u.grid, u.truncation
    c = grid.n_cells
    masses = grid.cell_masses

    lhs = 0.0 + 0.0j
    for m in range(M + 1):
        tu = _symmetrize(grid, u.kernels[m], m)
        tv = _symmetrize(grid, v.kernels[m], m)
        lhs += factorial(m + 1) * kernel_inner(grid, m + 1, tu, tv)

    base = process_inner(u, v)

    exchange = 0.0 + 0.0j
    for m in range(1, M + 1):
        up_t = raise_maps(c, m - 1)[0]
        A = u.kernels[m][up_t]  # [beta, t, s] = g_m(beta + e_t; s)
        B = v.kernels[m][up_t]  # [beta, s, t] = h_m(beta + e_s; t)
        w = multiplicities(c, m - 1) * _mass_weights(grid, m - 1)
        exchange += (
            m
            * factorial(m)
            * np.einsum("b,s,t,bts,bst->", w, masses, masses, np.conj(A), B)
        )

    fock = None
    if fock_route:
        fu = embed_marked(u, M + 1)
        fv = embed_marked(v, M + 1)
        fock = ito_skorohod(fu, fv)
    return ChaosSkorohod(complex(lhs), complex(base), complex(exchange), fock)


# ---------------------------------------------------------------------------
# diffusion / jump mode split


@dataclass(frozen=True)
class BNSplit:
    """Block decomposition over the diffusion and jump cells."""

    diffusion_cells: tuple[int, ...]
    jump_cells: tuple[int, ...]
    block_norms: dict[tuple[int, int], float]
    total: float
    degenerate: bool


def bn_split(F: ChaosCoefficients) -> BNSplit:
    """Split E|F|^2 by how many arguments ride the diffusion bin.

    Runs through the Fock mode-partition isomorphism of the embedded vector,
    so the blocks are unitary pieces, not a regrouping heuristic. Grids with
    no diffusion cells or no jump cells degenerate to a single block and warn.
    """
    grid = F.grid
    diff = tuple(i for i, (_, b) in enumerate(grid.cells) if b == 0)
    jump = tuple(i for i, (_, b) in enumerate(grid.cells) if b != 0)
    if not diff or not jump:
        warnings.warn(
            "grid carries only one noise component; split is a single block",
            stacklevel=2,
        )
        blocks = {}
        for n in range(F.truncation + 1):
            key = (n, 0) if jump == () else (0, n)
            blocks[key] = F.level_norm_sq(n)
        return BNSplit(diff, jump, blocks, F.norm_sq(), True)
    sp = fock_split(embed_chaos(F), diff)
    norms = {
        key: float(np.vdot(blk, blk).real) for key, blk in sorted(sp.blocks.items())
    }
    return BNSplit(diff, jump, norms, float(sum(norms.values())), False)


# ---------------------------------------------------------------------------
# pathwise evaluation


def _cell_position_table(grid: CellGrid) -> np.ndarray:
    pos = np.full((grid.n_time, grid.n_bins), -1, dtype=np.int64)
    for i, (k, b) in enumerate(grid.cells):
        pos[k, b] = i
    return pos


def _power_table(ens, grid: CellGrid, n_max: int, lo: int, hi: int) -> np.ndarray:
    """Per-path compensated cell powers, shape (hi - lo, n_cells, n_max + 1).

    Entry m at cell w is the m-fold integral of the cell's own indicator:
    monic heat Hermite in the Brownian increment on the diffusion bin,
    Charlier-style count polynomials on jump bins. These are the building
    blocks of every multiple integral via the occupation product formula.
    """
    model = grid.model
    c = grid.n_cells
    nb = hi - lo
    table = np.zeros((nb, c, n_max + 1))
    table[:, :, 0] = 1.0
    if n_max == 0:
        return table
    pos = _cell_position_table(grid)
    dt = grid.dt
    if model.sigma > 0:
        s = model.sigma**2 * dt
        for k in range(grid.n_time):
            w = pos[k, 0]
            if w < 0:
                continue
            x = model.sigma * ens.brownian[lo:hi, k]
            table[:, w, 1] = x
            for m in range(2, n_max + 1):
                table[:, w, m] = x * table[:, w, m - 1] - (m - 1) * s * table[:, w, m - 2]
    if grid.n_bins > 1:
        j0, j1 = int(ens.offsets[lo]), int(ens.offsets[hi])
        counts = np.zeros((nb, c))
        if j1 > j0:
            rows = ens.jump_paths[j0:j1] - lo
            cols = pos[ens.jump_cells[j0:j1], ens.jump_bins[j0:j1]]
            np.add.at(counts, (rows, cols), 1.0)
        for k in range(grid.n_time):
            for b in range(1, grid.n_bins):
                w = pos[k, b]
                if w < 0:
                    continue
                a = grid.bin_rates[b - 1] * dt
                N = counts[:, w]
                # convolve C(N, r) with the exponential series, times m!
                binom = [np.ones(nb)]
                for r in range(1, n_max + 1):
                    binom.append(binom[-1] * (N - (r - 1)) / r)
                for m in range(1, n_max + 1):
                    acc = np.zeros(nb)
                    for r in range(m + 1):
                        acc += binom[r] * ((-a) ** (m - r) / factorial(m - r))
                    table[:, w, m] = factorial(m) * acc
    return table


def _dense_values(F: ChaosCoefficients, ens) -> np.ndarray:
    grid, M = F.grid, F.truncation
    c = grid.n_cells
    P = ens.n_paths
    out = np.full(P, complex(F.kernels[0][0]), dtype=np.complex128)
    plans = []
    for n in range(1, M + 1):
        occ = occ_array(c, n)
        mult = multiplicities(c, n)
        kern = F.kernels[n]
        rows = np.nonzero(kern)[0]
        plan = []
        for p in rows:
            cols = np.nonzero(occ[p])[0]
            plan.append((kern[p] * mult[p], cols, occ[p, cols]))
        plans.append(plan)
    block = max(1, int(8_000_000 // max(c * (M + 1), 1)))
    for lo in range(0, P, block):
        hi = min(lo + block, P)
        table = _power_table(ens, grid, M, lo, hi)
        for plan in plans:
            for coeff, cols, exps in plan:
                acc = table[:, cols[0], exps[0]].copy()
                for cc, ee in zip(cols[1:], exps[1:]):
                    acc *= table[:, cc, ee]
                out[lo:hi] += coeff * acc
    return out


def chaos_evaluate(F: ChaosCoefficients, source):
    """Per-path value of the truncated expansion.

    Recorded power terms go through the exact generating-series engine; the
    fallback multiplies per-cell compensated powers over each occupation,
    which is exact too but scales with the stored coefficient count.
    """
    ens, scalar = _as_ensemble(source)
    if ens.grid.spec() != F.grid.spec():
        raise ValueError("expansion and paths live on different grids")
    if F.source is not None:
        out = np.zeros(ens.n_paths, dtype=np.complex128)
        by_field: dict[int, tuple[StepField, list]] = {}
        for coeff, field, degree in F.source:
            if degree == 0:
                out += coeff
                continue
            key = id(field)
            by_field.setdefault(key, (field, []))[1].append((coeff, degree))
        for field, terms in by_field.values():
            n_max = max(deg for _, deg in terms)
            powers = power_integrals(field, n_max, ens)
            for coeff, deg in terms:
                out += coeff * powers[:, deg]
    else:
        out = _dense_values(F, ens)
    return complex(out[0]) if scalar else out


def project_mc(
    values: np.ndarray, ens, truncation: int
) -> tuple[ChaosCoefficients, dict[int, float]]:
    """Estimate chaos kernels of per-path samples by correlation.

    Monte Carlo, not exact: each kernel entry comes with a standard error,
    and the returned map gives the largest one per order. The order-n
    estimator correlates the samples against the occupation's compensated
    power product divided by n! and the occupation's mass.
    """
    ens, _ = _as_ensemble(ens)
    grid = ens.grid
    c = grid.n_cells
    P = ens.n_paths
    vals = np.asarray(values, dtype=np.complex128)
    if vals.shape != (P,):
        raise ValueError(f"expected {P} per-path samples, got shape {vals.shape}")
    sums = [np.zeros(level_dim(c, n), dtype=np.complex128) for n in range(truncation + 1)]
    sq_re = [np.zeros(level_dim(c, n)) for n in range(truncation + 1)]
    sq_im = [np.zeros(level_dim(c, n)) for n in range(truncation + 1)]
    scale = [
        1.0 / (factorial(n) * _mass_weights(grid, n)) for n in range(truncation + 1)
    ]
    plans = []
    for n in range(truncation + 1):
        occ = occ_array(c, n)
        plan = []
        for p in range(occ.shape[0]):
            cols = np.nonzero(occ[p])[0]
            plan.append((p, cols, occ[p, cols]))
        plans.append(plan)
    block = max(1, int(8_000_000 // max(c * (truncation + 1), 1)))
    for lo in range(0, P, block):
        hi = min(lo + block, P)
        table = _power_table(ens, grid, truncation, lo, hi)
        v = vals[lo:hi]
        for n in range(truncation + 1):
            sc = scale[n]
            for p, cols, exps in plans[n]:
                acc = v.copy()
                for cc, ee in zip(cols, exps):
                    acc *= table[:, cc, ee]
                acc *= sc[p]
                sums[n][p] += acc.sum()
                sq_re[n][p] += np.sum(acc.real**2)
                sq_im[n][p] += np.sum(acc.imag**2)
    kernels = [s / P for s in sums]
    se_max: dict[int, float] = {}
    denom = max(P - 1, 1)
    for n in range(truncation + 1):
        mean = kernels[n]
        var_re = np.maximum(sq_re[n] / P - mean.real**2, 0.0) * P / denom
        var_im = np.maximum(sq_im[n] / P - mean.imag**2, 0.0) * P / denom
        se = np.sqrt((var_re + var_im) / P)
        se_max[n] = float(se.max(initial=0.0))
    return ChaosCoefficients(grid, truncation, kernels, None), se_max


# ---------------------------------------------------------------------------
# serialization

CHAOS_FORMAT = "chaoskit-chaos 1"


def _occ_label(occ_row: np.ndarray) -> str:
    cells: list[str] = []
    for i, a in enumerate(occ_row):
        cells.extend([str(i)] * int(a))
    return ",".join(cells) if cells else "-"


def save_chaos(F: ChaosCoefficients, dest) -> None:
    """Write a hashed, line-oriented text form; entries in enumeration order."""
    lines = [
        CHAOS_FORMAT,
        "grid " + json.dumps(F.grid.spec(), sort_keys=True, separators=(",", ":")),
        f"truncation {F.truncation}",
        f"cells {F.grid.n_cells}",
    ]
    c = F.grid.n_cells
    for n in range(F.truncation + 1):
        occ = occ_array(c, n)
        kern = F.kernels[n]
        for p in np.nonzero(kern)[0]:
            z = complex(kern[p])
            lines.append(f"term {n} {_occ_label(occ[p])} {z.real!r} {z.imag!r}")
    digest = sha256("\n".join(lines).encode()).hexdigest()
    lines.append(f"hash {digest}")
    payload = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w") as fh:
            fh.write(payload)
    else:
        dest.write(payload)


def load_chaos(src, grid: CellGrid) -> ChaosCoefficients:
    """Read `save_chaos` output; validates the hash and the grid spec."""
    if isinstance(src, (str, os.PathLike)):
        with open(src) as fh:
            text = fh.read()
    else:
        text = src.read()
    lines = text.rstrip("\n").split("\n")
    if len(lines) < 5 or lines[0] != CHAOS_FORMAT:
        raise ValueError("unrecognized chaos serialization")
    if not lines[-1].startswith("hash "):
        raise ValueError("missing content hash")
    digest = sha256("\n".join(lines[:-1]).encode()).hexdigest()
    if lines[-1].split()[1] != digest:
        raise ValueError("content hash mismatch")
    stored_spec = json.loads(lines[1].removeprefix("grid "))
    if stored_spec != grid.spec():
        raise ValueError("serialized expansion belongs to a different grid")
    truncation = int(lines[2].split()[1])
    c = int(lines[3].split()[1])
    if c != grid.n_cells:
        raise ValueError("cell count mismatch")
    out = ChaosCoefficients.zero(grid, truncation)
    out.source = None
    for line in lines[4:-1]:
        parts = line.split()
        if parts[0] != "term" or len(parts) != 5:
            raise ValueError(f"malformed line: {line}")
        n = int(parts[1])
        if parts[2] == "-":
            occ = (0,) * c
        else:
            hits = np.bincount(
                np.array([int(x) for x in parts[2].split(",")]), minlength=c
            )
            occ = tuple(int(x) for x in hits)
        if sum(occ) != n:
            raise ValueError(f"occupation does not match order: {line}")
        out.kernels[n][position(occ)] = complex(float(parts[3]), float(parts[4]))
    return out
