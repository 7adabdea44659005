"""Run configuration: defaults, validation, hashing."""
import json
import os

import pytest

from chaoskit.config import DEFAULT_TOLERANCES, SUITES, RunConfig
from chaoskit.indices import GuardLimitError


def test_defaults_are_complete():
    cfg = RunConfig()
    assert cfg.suite == "all"
    assert cfg.d == 2
    assert cfg.truncation == 5
    assert cfg.n_paths == 100_000
    assert cfg.seed == 42
    assert cfg.tolerances == DEFAULT_TOLERANCES
    assert set(SUITES) == {"fock", "sim", "chaos", "malliavin", "all"}


@pytest.mark.parametrize(
    "field,bad",
    [
        ("suite", "spectral"),
        ("d", 0),
        ("truncation", -1),
        ("max_degree", 0),
        ("n_time", 0),
        ("chaos_n_time", 0),
        ("chaos_truncation", -1),
        ("n_paths", 1),
        ("seed", -1),
        ("horizon", 0.0),
        ("sigma", -0.5),
    ],
)
def test_field_validation(field, bad):
    with pytest.raises(ValueError, match=field):
        RunConfig(**{field: bad})


def test_some_noise_source_is_required():
    with pytest.raises(ValueError):
        RunConfig(sigma=0.0, atoms=[])


def test_tolerance_overrides_merge_over_defaults():
    cfg = RunConfig(tolerances={"algebraic": 1e-9})
    assert cfg.tolerances["algebraic"] == 1e-9
    assert cfg.tolerances["mc_sigmas"] == DEFAULT_TOLERANCES["mc_sigmas"]
    with pytest.raises(ValueError, match="tolerance"):
        RunConfig(tolerances={"wobble": 1.0})


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(ValueError, match="unknown"):
        RunConfig.from_dict({"d": 2, "velocity": 3})


def test_file_round_trip(tmp_path):
    cfg = RunConfig(suite="fock", d=3, seed=7)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = RunConfig.from_file(os.fspath(path))
    assert back.to_dict() == cfg.to_dict()
    assert back.config_hash() == cfg.config_hash()


def test_config_hash_tracks_content():
    assert RunConfig(seed=1).config_hash() == RunConfig(seed=1).config_hash()
    assert RunConfig(seed=1).config_hash() != RunConfig(seed=2).config_hash()


def test_mixed_model_mirrors_the_config():
    cfg = RunConfig(b=0.2, sigma=0.5, atoms=[[1.0, 1.5]], horizon=2.0)
    model = cfg.mixed_model()
    assert model.b == 0.2
    assert model.sigma == 0.5
    assert model.atoms == ((1.0, 1.5),)
    assert model.horizon == 2.0


def test_guard_validation_raises_before_any_allocation():
    cfg = RunConfig(d=40, truncation=30)
    with pytest.raises(GuardLimitError):
        cfg.validate_guards()


def test_out_dir_resolution_is_absolute():
    cfg = RunConfig(out_dir="runs")
    assert os.path.isabs(cfg.resolve_out_dir())
