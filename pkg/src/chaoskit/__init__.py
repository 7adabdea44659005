"""Truncated symmetric Fock calculus and chaos expansions for finite-activity
jump diffusions, with a verification CLI built on exact kernels and seeded
Monte Carlo."""

from ._version import __version__
from .chaos import (
    BNSplit,
    ChaosCoefficients,
    ChaosSkorohod,
    MarkedChaos,
    bn_split,
    chaos_evaluate,
    embed_chaos,
    embed_marked,
    extract_chaos,
    ito_skorohod_chaos,
    load_chaos,
    project_mc,
    save_chaos,
)
from .config import RunConfig
from .fock import (
    FockVector,
    MarkedFock,
    SkorohodIdentity,
    annihilate,
    create,
    exp_vector,
    ito_skorohod,
    second_quantize,
    tensor_power,
)
from .exponential import ExpCombo, ExpCombo2, exp_gram, exp_shift
from .indices import GuardLimitError, level_dim, occupations
from .integrals import (
    doleans_exp,
    exp_martingale_terminal,
    iterated_chain,
    iterated_integral,
    power_integrals,
    product_integral,
    stochastic_integral,
)
from .levy import (
    CellGrid,
    LevyModel,
    PathEnsemble,
    SamplePath,
    StepField,
    brownian_preset,
    cell_increments,
    poisson_preset,
    sample_ensemble,
    sample_path,
    terminal_value,
)
from .montecarlo import MCStat, mc_estimate, summarize
from .reporting import CheckRecord, emit_report
from .suites import run_suite

__all__ = [
    "BNSplit",
    "CellGrid",
    "ChaosCoefficients",
    "ChaosSkorohod",
    "CheckRecord",
    "ExpCombo",
    "ExpCombo2",
    "FockVector",
    "GuardLimitError",
    "LevyModel",
    "MCStat",
    "MarkedChaos",
    "MarkedFock",
    "PathEnsemble",
    "RunConfig",
    "SamplePath",
    "SkorohodIdentity",
    "StepField",
    "__version__",
    "annihilate",
    "bn_split",
    "brownian_preset",
    "cell_increments",
    "chaos_evaluate",
    "create",
    "doleans_exp",
    "embed_chaos",
    "embed_marked",
    "emit_report",
    "exp_gram",
    "exp_martingale_terminal",
    "exp_shift",
    "exp_vector",
    "extract_chaos",
    "ito_skorohod",
    "ito_skorohod_chaos",
    "iterated_chain",
    "iterated_integral",
    "level_dim",
    "load_chaos",
    "mc_estimate",
    "occupations",
    "poisson_preset",
    "power_integrals",
    "product_integral",
    "project_mc",
    "run_suite",
    "sample_ensemble",
    "sample_path",
    "save_chaos",
    "second_quantize",
    "stochastic_integral",
    "summarize",
    "tensor_power",
    "terminal_value",
]
