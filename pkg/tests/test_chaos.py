"""Chaos expansions over grid cells: calculus, embeddings, serialization."""
import io
import warnings
from math import factorial

import numpy as np
import pytest

from chaoskit.chaos import (
    CHAOS_FORMAT,
    ChaosCoefficients,
    MarkedChaos,
    bn_split,
    chaos_evaluate,
    divergence,
    dom_gradient_functional,
    embed_chaos,
    embed_marked,
    extract_chaos,
    gradient,
    ito_skorohod_chaos,
    load_chaos,
    number_apply,
    number_factorization_residual,
    ou_semigroup,
    process_inner,
    project_mc,
    save_chaos,
)
from chaoskit.indices import level_dim
from chaoskit.integrals import power_integrals, stochastic_integral
from chaoskit.levy import (
    CellGrid,
    LevyModel,
    StepField,
    poisson_preset,
    sample_ensemble,
)

MIXED = LevyModel(b=0.0, sigma=1.0, atoms=((1.0, 1.0),), horizon=1.0)


def mixed_grid(n_time=3):
    return CellGrid(MIXED, n_time)


def jump_grid(n_time=4):
    model = poisson_preset(1.0, 1.0)
    return CellGrid(model, n_time)


def rand_chaos(rng, grid, truncation, scale=0.5):
    c = grid.n_cells
    kernels = [
        scale * (rng.standard_normal(level_dim(c, n)) + 1j * rng.standard_normal(level_dim(c, n)))
        for n in range(truncation + 1)
    ]
    return ChaosCoefficients(grid, truncation, kernels, None)


def rand_marked(rng, grid, truncation, zero_top=True):
    c = grid.n_cells
    kernels = []
    for n in range(truncation + 1):
        shape = (level_dim(c, n), c)
        if zero_top and n == truncation:
            kernels.append(np.zeros(shape, dtype=np.complex128))
        else:
            kernels.append(
                0.5 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            )
    return MarkedChaos(grid, truncation, kernels)


def test_embedding_preserves_inner_products():
    rng = np.random.default_rng(15)
    grid = mixed_grid()
    F = rand_chaos(rng, grid, 3)
    G = rand_chaos(rng, grid, 3)
    want = F.inner(G)
    got = embed_chaos(F).inner(embed_chaos(G))
    assert got == pytest.approx(want, rel=1e-11)
    assert embed_chaos(F).norm_sq() == pytest.approx(F.norm_sq(), rel=1e-11)


def test_extract_inverts_embed():
    rng = np.random.default_rng(16)
    grid = mixed_grid()
    F = rand_chaos(rng, grid, 3)
    back = extract_chaos(embed_chaos(F), grid)
    for a, b in zip(back.kernels, F.kernels):
        assert np.allclose(a, b, atol=1e-12)


def test_first_order_norm_is_the_field_mass():
    grid = jump_grid()
    prof = np.array([0.5, 0.2 - 0.1j, 0.8j, -0.3])
    field = StepField.from_columns(grid, bins={1: prof})
    F = ChaosCoefficients.from_field(field, 2)
    assert F.level_norm_sq(1) == pytest.approx(float(field.norm_sq()), rel=1e-12)
    assert F.level_norm_sq(0) == 0.0
    # same storage layout as the power constructor, and the dense route must
    # agree with the generating-series route once the source hint is gone
    assert np.array_equal(F.kernels[1], ChaosCoefficients.from_power(field, 1, 2).kernels[1])
    ens = sample_ensemble(grid.model, grid, seed=29, n_paths=8)
    via_source = chaos_evaluate(F, ens)
    F.source = None
    assert np.allclose(chaos_evaluate(F, ens), via_source, atol=1e-12)


def test_doleans_kernels_are_scaled_powers():
    grid = jump_grid()
    field = StepField.from_columns(grid, bins={1: np.array([0.4, 0.7, 0.1, 0.9])})
    E = ChaosCoefficients.doleans(field, 3)
    for n in range(4):
        want = ChaosCoefficients.from_power(field, n, 3, coeff=1.0 / factorial(n))
        assert np.allclose(E.kernels[n], want.kernels[n], atol=1e-14)
    assert len(E.source) == 4


def test_gradient_divergence_duality():
    rng = np.random.default_rng(18)
    grid = mixed_grid()
    F = rand_chaos(rng, grid, 3)
    u = rand_marked(rng, grid, 3, zero_top=True)
    div, dropped = divergence(u)
    assert dropped == 0.0
    assert div.inner(F) == pytest.approx(process_inner(u, gradient(F)), rel=1e-11)


def test_divergence_symmetrization_by_hand():
    grid = jump_grid(2)
    g = np.array([[1.0 + 2j, -0.5], [0.25j, 3.0]])
    u = MarkedChaos(
        grid,
        2,
        [
            np.zeros((1, 2), dtype=np.complex128),
            g,
            np.zeros((3, 2), dtype=np.complex128),
        ],
    )
    out, dropped = divergence(u)
    assert dropped == 0.0
    # occupations at order two enumerate (0,2), (1,1), (2,0); the level-one
    # rows list cell one first
    assert out.kernels[2][0] == pytest.approx(g[0, 1])
    assert out.kernels[2][1] == pytest.approx((g[0, 0] + g[1, 1]) / 2)
    assert out.kernels[2][2] == pytest.approx(g[1, 0])
    assert not np.any(out.kernels[1])


def test_number_operator_factorizes():
    rng = np.random.default_rng(19)
    grid = mixed_grid()
    F = rand_chaos(rng, grid, 3)
    counted = number_apply(F)
    for n in range(4):
        assert np.allclose(counted.kernels[n], n * F.kernels[n])
    assert number_factorization_residual(F) <= 1e-12 * F.norm()


def test_ou_semigroup_scales_orders():
    rng = np.random.default_rng(20)
    grid = jump_grid()
    F = rand_chaos(rng, grid, 2)
    out = ou_semigroup(F, 0.4)
    for n in range(3):
        assert np.allclose(out.kernels[n], np.exp(-0.4 * n) * F.kernels[n])
    with pytest.raises(ValueError):
        ou_semigroup(F, -0.2)


def test_dom_gradient_functional_weights_levels():
    rng = np.random.default_rng(22)
    grid = jump_grid()
    F = rand_chaos(rng, grid, 3)
    want = sum(n * F.level_norm_sq(n) for n in range(1, 4))
    assert dom_gradient_functional(F) == pytest.approx(want, rel=1e-12)


def test_skorohod_identity_kernel_and_ladder_routes():
    rng = np.random.default_rng(24)
    grid = mixed_grid()
    for _ in range(5):
        u = rand_marked(rng, grid, 2, zero_top=True)
        v = rand_marked(rng, grid, 2, zero_top=True)
        res = ito_skorohod_chaos(u, v)
        scale = abs(res.lhs) + abs(res.rhs) + 1.0
        assert res.defect <= 1e-10 * scale
        assert abs(res.fock.lhs - res.lhs) <= 1e-10 * scale
        assert abs(res.fock.rhs - res.rhs) <= 1e-10 * scale


def test_embed_marked_respects_process_inner():
    rng = np.random.default_rng(26)
    grid = mixed_grid()
    u = rand_marked(rng, grid, 2, zero_top=True)
    v = rand_marked(rng, grid, 2, zero_top=True)
    want = process_inner(u, v)
    got = embed_marked(u, 3).inner(embed_marked(v, 3))
    assert got == pytest.approx(want, rel=1e-11)


def test_evaluation_routes_agree():
    grid = jump_grid()
    model = grid.model
    field = StepField.from_columns(grid, bins={1: np.array([0.6, 0.2, 0.9, 0.4])})
    F = ChaosCoefficients.from_power(field, 2, 3)
    G = ChaosCoefficients(grid, 3, [k.copy() for k in F.kernels], None)
    ens = sample_ensemble(model, grid, seed=83, n_paths=300)
    via_series = chaos_evaluate(F, ens)
    via_dense = chaos_evaluate(G, ens)
    scale = np.max(np.abs(via_series)) + 1.0
    assert np.max(np.abs(via_series - via_dense)) <= 1e-10 * scale
    powers = power_integrals(field, 2, ens)
    assert np.allclose(via_series, powers[:, 2], atol=1e-10 * scale)


def test_evaluation_rejects_foreign_paths():
    grid = jump_grid()
    F = ChaosCoefficients.constant(grid, 1, 1.0)
    other_grid = jump_grid(8)
    ens = sample_ensemble(other_grid.model, other_grid, seed=1, n_paths=3)
    with pytest.raises(ValueError, match="different grids"):
        chaos_evaluate(F, ens)


def test_projection_recovers_a_first_order_functional():
    grid = jump_grid()
    model = grid.model
    prof = np.array([0.8, -0.3, 0.5, 1.1])
    field = StepField.from_columns(grid, bins={1: prof})
    ens = sample_ensemble(model, grid, seed=91, n_paths=3000)
    values = stochastic_integral(field, ens)
    est, se_max = project_mc(values, ens, 1)
    # order-one occupation rows list the last cell first
    assert np.max(np.abs(est.kernels[1] - prof[::-1])) <= 6.0 * se_max[1]
    assert abs(est.kernels[0][0]) <= 6.0 * se_max[0]


def test_serialization_round_trip():
    rng = np.random.default_rng(33)
    grid = jump_grid()
    F = rand_chaos(rng, grid, 2)
    F.kernels[1][2] = 0.0  # keep a structural zero out of the file
    buf = io.StringIO()
    save_chaos(F, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == CHAOS_FORMAT
    assert "np." not in text
    back = load_chaos(io.StringIO(text), grid)
    assert back.truncation == 2
    for a, b in zip(back.kernels, F.kernels):
        assert np.array_equal(a, b)


def test_serialization_rejects_tampering_and_foreign_grids():
    rng = np.random.default_rng(34)
    grid = jump_grid()
    F = rand_chaos(rng, grid, 1)
    buf = io.StringIO()
    save_chaos(F, buf)
    text = buf.getvalue()
    corrupt = text.replace("0.", "1.", 1)
    with pytest.raises(ValueError, match="hash"):
        load_chaos(io.StringIO(corrupt), grid)
    with pytest.raises(ValueError, match="different grid"):
        load_chaos(io.StringIO(text), jump_grid(8))
    with pytest.raises(ValueError, match="unrecognized"):
        load_chaos(io.StringIO("not-a-chaos-file\n" + text), grid)
    load_chaos(io.StringIO(text), grid)


def test_bn_split_is_a_unitary_decomposition():
    rng = np.random.default_rng(35)
    grid = mixed_grid()
    F = rand_chaos(rng, grid, 2)
    res = bn_split(F)
    assert not res.degenerate
    assert len(res.diffusion_cells) == 3 and len(res.jump_cells) == 3
    assert res.total == pytest.approx(F.norm_sq(), rel=1e-10)
    assert all(v >= 0 for v in res.block_norms.values())


def test_bn_split_warns_on_single_component_grids():
    rng = np.random.default_rng(36)
    grid = jump_grid()
    F = rand_chaos(rng, grid, 2)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = bn_split(F)
    assert res.degenerate
    assert any("single block" in str(w.message) for w in caught)
    assert res.total == pytest.approx(F.norm_sq(), rel=1e-12)
