"""Finite-activity jump diffusions, their cell grids, and exact simulation.

A model is a drift b, a diffusion coefficient sigma, and finitely many jump
atoms (x_j, lambda_j). The driving noise is coordinatized over a regular time
grid crossed with mark bins: bin 0 carries the diffusion component, the
remaining bins partition the atoms. Cell masses are

    mu(k, 0)   = sigma^2 * dt
    mu(k, bin) = nu(bin) * dt,   nu(bin) = sum of atom intensities in the bin

and only positive-mass cells embed into the one-particle space. Simulation is
exact: Gaussian increments per time cell plus per-atom Poisson counts with
uniform jump times in (0, T]. Per-path randomness comes from a counter-based
generator keyed by the seed and jumped by the path index, so path i is
identical no matter how the ensemble is batched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from hashlib import sha256

import numpy as np

__all__ = [
    "LevyModel",
    "CellGrid",
    "StepField",
    "SamplePath",
    "PathEnsemble",
    "path_rng",
    "sample_path",
    "sample_ensemble",
    "cell_increments",
    "terminal_value",
    "brownian_preset",
    "poisson_preset",
    "export_paths",
    "import_paths",
]


@dataclass(frozen=True)
class LevyModel:
    """Finite-activity model: drift, diffusion, jump atoms, horizon."""

    b: float = 0.0
    sigma: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()
    horizon: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        sizes = [x for x, _ in self.atoms]
        for x, lam in self.atoms:
            if x == 0:
                raise ValueError("atom size must be nonzero")
            if lam <= 0:
                raise ValueError("atom intensity must be > 0")
        if len(set(sizes)) != len(sizes):
            raise ValueError("atom sizes must be distinct")

    def symbol(self, u: float) -> complex:
        """Characteristic exponent eta(u); E[exp(i u X(t))] = exp(-t eta(u)).

        eta(u) = -i b u + sigma^2 u^2 / 2
                 + sum_j lambda_j (1 - exp(i u x_j) + i u x_j [|x_j| < 1]).
        """
        u = float(u)
        total = -1j * self.b * u + 0.5 * self.sigma**2 * u**2
        for x, lam in self.atoms:
            term = 1.0 - np.exp(1j * u * x)
            if abs(x) < 1.0:
                term = term + 1j * u * x
            total = total + lam * term
        return complex(total)

    @property
    def small_jump_drift(self) -> float:
        """Compensator drift removed from the small-jump part."""
        return sum(lam * x for x, lam in self.atoms if abs(x) < 1.0)

    @property
    def mean_slope(self) -> float:
        """E[X(t)] / t under the compensated small-jump bookkeeping."""
        return self.b + sum(lam * x for x, lam in self.atoms if abs(x) >= 1.0)


@dataclass(eq=False)
class CellGrid:
    """Regular time grid crossed with mark bins.

    atom_groups[b] lists the atom indices carried by jump bin b+1; bin 0 is
    always the diffusion bin (mass zero when sigma = 0). Every atom must be
    covered exactly once.
    """

    model: LevyModel
    n_time: int
    atom_groups: tuple[tuple[int, ...], ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n_time < 1:
            raise ValueError("need at least one time cell")
        n_atoms = len(self.model.atoms)
        if self.atom_groups is None:
            self.atom_groups = tuple((j,) for j in range(n_atoms))
        else:
            self.atom_groups = tuple(tuple(int(j) for j in g) for g in self.atom_groups)
        seen: list[int] = []
        for g in self.atom_groups:
            if not g:
                raise ValueError("empty atom group")
            seen.extend(g)
        if sorted(seen) != list(range(n_atoms)):
            raise ValueError("atom groups must cover every atom exactly once")
        self.dt = self.model.horizon / self.n_time
        self.bin_rates = np.array(
            [sum(self.model.atoms[j][1] for j in g) for g in self.atom_groups]
        )
        self.atom_bin = np.zeros(n_atoms, dtype=np.int64)
        for bidx, g in enumerate(self.atom_groups):
            for j in g:
                self.atom_bin[j] = bidx + 1
        # column 0 is the diffusion bin
        masses = np.empty(self.n_bins)
        masses[0] = self.model.sigma**2 * self.dt
        masses[1:] = self.bin_rates * self.dt
        self.bin_masses = masses
        retained_bins = [b for b in range(self.n_bins) if masses[b] > 0]
        self.cells = tuple(
            (k, b) for k in range(self.n_time) for b in retained_bins
        )
        self.cell_index = {cell: i for i, cell in enumerate(self.cells)}
        self.cell_masses = np.array([self.bin_masses[b] for _, b in self.cells])

    @property
    def n_bins(self) -> int:
        return 1 + len(self.atom_groups)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_of_time(self, t: float) -> int:
        """Time-cell index containing t; the last cell is closed at T."""
        if not 0 <= t <= self.model.horizon:
            raise ValueError("time outside [0, horizon]")
        return min(int(t / self.dt), self.n_time - 1)

    def spec(self) -> dict:
        return {
            "b": self.model.b,
            "sigma": self.model.sigma,
            "atoms": [[x, lam] for x, lam in self.model.atoms],
            "horizon": self.model.horizon,
            "n_time": self.n_time,
            "atom_groups": [list(g) for g in self.atom_groups],
        }

    def grid_hash(self) -> str:
        payload = json.dumps(self.spec(), sort_keys=True, separators=(",", ":"))
        return sha256(payload.encode()).hexdigest()[:16]


@dataclass(eq=False)
class StepField:
    """Cell-constant complex field; values has shape (n_time, n_bins).

    Column 0 rides the diffusion bin. Off-support values (zero-mass bins) are
    allowed but carry no mass in embeddings or integrals. The scalar time
    profile of a field is its diffusion-bin column.
    """

    grid: CellGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.complex128)
        shape = (self.grid.n_time, self.grid.n_bins)
        if arr.shape != shape:
            raise ValueError(f"step field expects shape {shape}, got {arr.shape}")
        self.values = arr

    @classmethod
    def zero(cls, grid: CellGrid) -> "StepField":
        return cls(grid, np.zeros((grid.n_time, grid.n_bins), dtype=np.complex128))

    @classmethod
    def from_columns(cls, grid: CellGrid, **columns) -> "StepField":
        """Build from per-bin time profiles: diffusion=..., bins={b: profile}."""
        out = np.zeros((grid.n_time, grid.n_bins), dtype=np.complex128)
        diff = columns.pop("diffusion", None)
        bins = columns.pop("bins", {})
        if columns:
            raise ValueError(f"unknown arguments {sorted(columns)}")
        if diff is not None:
            out[:, 0] = np.asarray(diff, dtype=np.complex128)
        for b, profile in bins.items():
            if not 1 <= b < grid.n_bins:
                raise ValueError(f"bin {b} out of range")
            out[:, b] = np.asarray(profile, dtype=np.complex128)
        return cls(grid, out)

    def cell_values(self) -> np.ndarray:
        """Values over the retained cells, aligned with grid.cells."""
        return np.array([self.values[k, b] for k, b in self.grid.cells])

    def norm_sq(self) -> float:
        """Squared L2(mu) norm over the retained cells."""
        vals = self.cell_values()
        return float(np.sum(np.abs(vals) ** 2 * self.grid.cell_masses))

    def inner(self, other: "StepField") -> complex:
        """L2(mu) pairing, conjugate linear on the left."""
        if other.grid is not self.grid and other.grid.spec() != self.grid.spec():
            raise ValueError("step fields live on different grids")
        a = self.cell_values()
        b = other.cell_values()
        return complex(np.sum(np.conj(a) * b * self.grid.cell_masses))

    def time_profile(self) -> np.ndarray:
        return self.values[:, 0].copy()


@dataclass(eq=False)
class SamplePath:
    """One exact draw: Gaussian cell increments plus a sorted jump record."""

    grid: CellGrid
    index: int
    brownian: np.ndarray | None
    jump_times: np.ndarray
    jump_atoms: np.ndarray

    @property
    def jump_cells(self) -> np.ndarray:
        dt = self.grid.dt
        if self.jump_times.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.minimum(
            (self.jump_times / dt).astype(np.int64), self.grid.n_time - 1
        )

    @property
    def jump_bins(self) -> np.ndarray:
        return self.grid.atom_bin[self.jump_atoms]


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based substream for one path."""
    bitgen = np.random.Philox(key=seed)
    if index:
        bitgen = bitgen.jumped(index)
    return np.random.Generator(bitgen)


def _draw_path(model: LevyModel, grid: CellGrid, rng: np.random.Generator):
    T = model.horizon
    brownian = None
    if model.sigma > 0:
        brownian = rng.normal(0.0, np.sqrt(grid.dt), grid.n_time)
    times_parts = []
    atoms_parts = []
    for j, (_, lam) in enumerate(model.atoms):
        count = int(rng.poisson(lam * T))
        if count:
            # uniform on (0, T]
            t = T * (1.0 - rng.random(count))
            times_parts.append(t)
            atoms_parts.append(np.full(count, j, dtype=np.int64))
    if times_parts:
        times = np.concatenate(times_parts)
        atoms = np.concatenate(atoms_parts)
        order = np.argsort(times, kind="stable")
        times = times[order]
        atoms = atoms[order]
    else:
        times = np.zeros(0)
        atoms = np.zeros(0, dtype=np.int64)
    return brownian, times, atoms


def sample_path(model: LevyModel, grid: CellGrid, seed: int, index: int = 0) -> SamplePath:
    """Exact draw of path `index` of the stream started at `seed`."""
    if grid.model != model:
        raise ValueError("grid was built for a different model")
    brownian, times, atoms = _draw_path(model, grid, path_rng(seed, index))
    return SamplePath(grid, index, brownian, times, atoms)


@dataclass(eq=False)
class PathEnsemble:
    """n_paths exact draws packed for vectorized evaluation.

    Jump records are CSR style: path i owns jump_times[offsets[i]:offsets[i+1]].
    """

    model: LevyModel
    grid: CellGrid
    seed: int
    n_paths: int
    brownian: np.ndarray | None
    jump_times: np.ndarray
    jump_atoms: np.ndarray
    jump_paths: np.ndarray
    offsets: np.ndarray

    def path(self, i: int) -> SamplePath:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return SamplePath(
            self.grid,
            i,
            None if self.brownian is None else self.brownian[i],
            self.jump_times[lo:hi],
            self.jump_atoms[lo:hi],
        )

    @property
    def jump_cells(self) -> np.ndarray:
        if self.jump_times.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.minimum(
            (self.jump_times / self.grid.dt).astype(np.int64), self.grid.n_time - 1
        )

    @property
    def jump_bins(self) -> np.ndarray:
        return self.grid.atom_bin[self.jump_atoms]


def sample_ensemble(
    model: LevyModel, grid: CellGrid, seed: int, n_paths: int
) -> PathEnsemble:
    """Draw paths 0..n_paths-1; bitwise identical to per-path sample_path."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    if grid.model != model:
        raise ValueError("grid was built for a different model")
    brownian = (
        np.empty((n_paths, grid.n_time)) if model.sigma > 0 else None
    )
    times_parts = []
    atoms_parts = []
    counts = np.zeros(n_paths, dtype=np.int64)
    for i in range(n_paths):
        b, t, a = _draw_path(model, grid, path_rng(seed, i))
        if brownian is not None:
            brownian[i] = b
        counts[i] = t.size
        if t.size:
            times_parts.append(t)
            atoms_parts.append(a)
    offsets = np.zeros(n_paths + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    if times_parts:
        jump_times = np.concatenate(times_parts)
        jump_atoms = np.concatenate(atoms_parts)
    else:
        jump_times = np.zeros(0)
        jump_atoms = np.zeros(0, dtype=np.int64)
    jump_paths = np.repeat(np.arange(n_paths, dtype=np.int64), counts)
    return PathEnsemble(
        model, grid, seed, n_paths, brownian, jump_times, jump_atoms, jump_paths, offsets
    )


def cell_increments(source, grid: CellGrid | None = None) -> np.ndarray:
    """Martingale cell increments over the retained cells.

    Diffusion cells carry sigma * Delta B; a jump cell carries its jump count
    minus the compensator nu(bin) * dt. Returns (n_cells,) for a path and
    (n_paths, n_cells) for an ensemble.
    """
    if isinstance(source, SamplePath):
        path, ens = source, None
        grid = grid or path.grid
    elif isinstance(source, PathEnsemble):
        path, ens = None, source
        grid = grid or ens.grid
    else:
        raise TypeError("cell_increments expects a SamplePath or PathEnsemble")
    model = grid.model
    comp = np.zeros(grid.n_cells)
    for ci, (k, b) in enumerate(grid.cells):
        if b > 0:
            comp[ci] = grid.bin_rates[b - 1] * grid.dt
    if path is not None:
        out = -comp.copy()
        for ci, (k, b) in enumerate(grid.cells):
            if b == 0:
                out[ci] = model.sigma * path.brownian[k]
        cells = path.jump_cells
        bins = path.jump_bins
        for k, b in zip(cells, bins):
            out[grid.cell_index[(int(k), int(b))]] += 1.0
        return out
    out = np.tile(-comp, (ens.n_paths, 1))
    col_of = {}
    for ci, (k, b) in enumerate(grid.cells):
        col_of[(k, b)] = ci
        if b == 0:
            out[:, ci] = model.sigma * ens.brownian[:, k]
    if ens.jump_times.size:
        cols = np.array(
            [col_of[(int(k), int(b))] for k, b in zip(ens.jump_cells, ens.jump_bins)],
            dtype=np.int64,
        )
        np.add.at(out, (ens.jump_paths, cols), 1.0)
    return out


def terminal_value(source) -> np.ndarray | float:
    """X(T) assembled with compensated small jumps.

    X(T) = b T + sigma B(T) + sum of jump sizes - T * (small-jump compensator).
    """
    if isinstance(source, SamplePath):
        grid = source.grid
        model = grid.model
        total = model.b * model.horizon - model.small_jump_drift * model.horizon
        if source.brownian is not None:
            total += model.sigma * float(np.sum(source.brownian))
        sizes = np.array([model.atoms[j][0] for j in source.jump_atoms])
        return float(total + np.sum(sizes))
    if isinstance(source, PathEnsemble):
        grid = source.grid
        model = grid.model
        out = np.full(
            source.n_paths,
            model.b * model.horizon - model.small_jump_drift * model.horizon,
        )
        if source.brownian is not None:
            out += model.sigma * source.brownian.sum(axis=1)
        if source.jump_times.size:
            sizes = np.array([x for x, _ in model.atoms])[source.jump_atoms]
            np.add.at(out, source.jump_paths, sizes)
        return out
    raise TypeError("terminal_value expects a SamplePath or PathEnsemble")


def brownian_preset(horizon: float = 1.0) -> LevyModel:
    """Standard diffusion: b = 0, sigma = 1, no atoms."""
    return LevyModel(b=0.0, sigma=1.0, atoms=(), horizon=horizon)


def poisson_preset(lam: float = 1.0, horizon: float = 1.0) -> LevyModel:
    """Compensated standard Poisson: single atom at x = 1 with intensity lam."""
    return LevyModel(b=0.0, sigma=0.0, atoms=((1.0, float(lam)),), horizon=horizon)


def export_paths(source: PathEnsemble, fh) -> None:
    """One JSON record per path: grid hash, increments, jump list."""
    h = source.grid.grid_hash()
    for i in range(source.n_paths):
        p = source.path(i)
        rec = {
            "path": i,
            "grid": h,
            "brownian": None if p.brownian is None else [float(x) for x in p.brownian],
            "jumps": [
                [float(t), int(a)] for t, a in zip(p.jump_times, p.jump_atoms)
            ],
        }
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def import_paths(fh, grid: CellGrid) -> list[SamplePath]:
    """Read records written by export_paths; validates the grid hash."""
    h = grid.grid_hash()
    out = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec["grid"] != h:
            raise ValueError("path record was produced on a different grid")
        jumps = rec["jumps"]
        times = np.array([t for t, _ in jumps], dtype=np.float64)
        atoms = np.array([a for _, a in jumps], dtype=np.int64)
        noise = rec["brownian"]
        out.append(
            SamplePath(
                grid,
                int(rec["path"]),
                None if noise is None else np.asarray(noise, dtype=np.float64),
                times,
                atoms,
            )
        )
    return out
