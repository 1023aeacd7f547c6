import json

import pytest

from sitforge.config import parse_config, validate_config
from sitforge.errors import ConfigError
from sitforge.presets import preset_files


def minimal(**overrides):
    cfg = {
        "dataset": {"type": "synthetic", "classes": 4, "dim": 6, "train_per_class": 10,
                    "test_per_class": 4, "spread": 0.3, "seed": 1},
        "scenario": {"class_schedule": [2, 2]},
        "strategy": "naive",
    }
    cfg.update(overrides)
    return cfg


def test_minimal_config_fills_defaults():
    cfg = validate_config(minimal())
    assert cfg.plan["epochs_first"] == 20
    assert cfg.network["hidden"] == [100, 50]
    assert cfg.scenario["test_policy"] == "fixed"
    assert cfg.runs == 3
    assert len(cfg.strategies) == 1
    assert cfg.strategies[0].id == "naive"
    assert cfg.strategies[0].head_mode == "maximal"


def test_ewc_defaults_max_f():
    cfg = validate_config(minimal(strategy={"id": "ewc", "strength": 1000.0,
                                            "plan": {"eta_later": 0.005}}))
    assert cfg.strategies[0].params["max_f"] == 0.001


def test_lwf_map_preset_accepted():
    cfg = validate_config(minimal(strategy={"id": "lwf", "map": [0.66, 0.9, 0.45, 0.85]}))
    assert cfg.strategies[0].params["map"] == [0.66, 0.9, 0.45, 0.85]
    assert cfg.strategies[0].head_mode == "expanding"


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key 'colour'"):
        validate_config(minimal(colour="red"))
    with pytest.raises(ConfigError, match="dataset"):
        validate_config(minimal(dataset={"type": "synthetic", "classes": 4, "dim": 6,
                                         "train_per_class": 10, "test_per_class": 4,
                                         "spread": 0.3, "seed": 1, "bogus": 1}))
    with pytest.raises(ConfigError, match="naive"):
        validate_config(minimal(strategy={"id": "naive", "strength": 2.0}))


def test_missing_fields_named():
    with pytest.raises(ConfigError, match="'dataset'"):
        validate_config({"scenario": {"class_schedule": [2]}, "strategy": "naive"})
    with pytest.raises(ConfigError, match="'strategy'"):
        validate_config({"dataset": {"type": "synthetic"},
                         "scenario": {"class_schedule": [2]}})
    with pytest.raises(ConfigError, match="class_schedule"):
        validate_config(minimal(scenario={}))


def test_overshoot_strength_rejected():
    # ceiling is 1/(eta_later * max_f) = 1/(0.05 * 0.001) = 20000
    with pytest.raises(ConfigError, match="overshoot"):
        validate_config(minimal(strategy={"id": "ewc", "strength": 2.1e4}))
    cfg = validate_config(minimal(strategy={"id": "ewc", "strength": 2.0e4}))
    assert cfg.strategies[0].params["strength"] == 2.0e4


def test_strategy_and_strategies_exclusive():
    with pytest.raises(ConfigError, match="not both"):
        validate_config(minimal(strategies=["naive"]))


def test_duplicate_strategies_rejected():
    cfg = minimal()
    del cfg["strategy"]
    cfg["strategies"] = ["naive", "naive"]
    with pytest.raises(ConfigError, match="twice"):
        validate_config(cfg)


def test_mt_rejects_head_managing_strategies():
    with pytest.raises(ConfigError, match="SIT-specific"):
        validate_config(minimal(strategy="cwrplus",
                                scenario={"mode": "MT", "class_schedule": [2, 2]}))


def test_importance_strategies_need_maximal_head():
    with pytest.raises(ConfigError, match="maximal"):
        validate_config(minimal(strategy={"id": "si", "head_mode": "expanding",
                                          "plan": {"eta_later": 0.005}}))


def test_schedule_must_cover_dataset():
    with pytest.raises(ConfigError, match="covers 3 classes"):
        validate_config(minimal(scenario={"class_schedule": [2, 1]}))


def test_runs_validation():
    with pytest.raises(ConfigError, match="runs"):
        validate_config(minimal(runs=0))


def test_unknown_strategy_id():
    with pytest.raises(ConfigError, match="unknown strategy id"):
        validate_config(minimal(strategy="dropout"))


def test_parse_config_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(minimal()))
    cfg = parse_config(path)
    assert cfg.dataset["classes"] == 4
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config(bad)


def test_shipped_preset_files_in_sync(tmp_path):
    # configs/ must match the preset generator byte for byte
    from pathlib import Path

    repo_configs = Path(__file__).resolve().parent.parent / "configs"
    for name, cfg in preset_files().items():
        expected = json.dumps(cfg, indent=2, sort_keys=True) + "\n"
        assert (repo_configs / name).read_text() == expected, f"{name} out of sync"


def test_all_presets_validate():
    for name, cfg in preset_files().items():
        parsed = validate_config(cfg)
        assert parsed.strategies, name
