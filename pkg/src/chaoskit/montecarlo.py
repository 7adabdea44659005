"""Monte Carlo reduction with order-independent sums.

Per-path values come from the vectorized engines; the reduction here uses
compensated summation on the real and imaginary parts separately, so the
reported mean does not depend on path order or on how the ensemble was
blocked. Standard errors combine both parts in quadrature, and acceptance
margins elsewhere are stated as multiples of that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levy import CellGrid, LevyModel, sample_ensemble

__all__ = ["MCStat", "summarize", "mc_estimate"]


@dataclass(frozen=True)
class MCStat:
    mean: complex
    se: float
    se_re: float
    se_im: float
    n_paths: int
    seed: int

    def within(self, target: complex, k: float = 4.0) -> bool:
        """Whether target sits inside k standard errors of the mean."""
        return abs(self.mean - target) <= k * max(self.se, 1e-300)

    def report(self) -> dict:
        return {
            "mean_re": self.mean.real,
            "mean_im": self.mean.imag,
            "se": self.se,
            "n_paths": self.n_paths,
            "seed": self.seed,
        }


def _fsum_mean(x: np.ndarray) -> float:
    return math.fsum(x.tolist()) / x.size


def summarize(values: np.ndarray, seed: int = -1) -> MCStat:
    """Mean and standard error of per-path samples (real or complex)."""
    v = np.asarray(values)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("summarize expects a nonempty 1-d sample array")
    n = v.size
    re = np.ascontiguousarray(v.real, dtype=np.float64)
    im = np.ascontiguousarray(v.imag, dtype=np.float64) if np.iscomplexobj(v) else None
    mean_re = _fsum_mean(re)
    var_re = _fsum_mean((re - mean_re) ** 2) * n / max(n - 1, 1)
    se_re = math.sqrt(var_re / n)
    if im is None:
        mean_im, se_im = 0.0, 0.0
    else:
        mean_im = _fsum_mean(im)
        var_im = _fsum_mean((im - mean_im) ** 2) * n / max(n - 1, 1)
        se_im = math.sqrt(var_im / n)
    return MCStat(
        mean=complex(mean_re, mean_im),
        se=math.hypot(se_re, se_im),
        se_re=se_re,
        se_im=se_im,
        n_paths=n,
        seed=seed,
    )


def mc_estimate(
    functional,
    model: LevyModel,
    grid: CellGrid,
    n_paths: int,
    seed: int,
) -> MCStat:
    """Draw an ensemble and summarize functional(ensemble) -> (P,) values."""
    ens = sample_ensemble(model, grid, seed, n_paths)
    values = np.asarray(functional(ens))
    if values.shape != (n_paths,):
        raise ValueError(
            f"functional returned shape {values.shape}, expected ({n_paths},)"
        )
    return summarize(values, seed=seed)
