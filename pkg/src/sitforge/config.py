"""Experiment configuration: JSON in, fully validated ExperimentConfig out.

Validation is fail-fast and strict: unknown keys are rejected with their
section, missing required fields are named, and the overshoot bound on the
regularization strength is checked before any compute starts.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .strategies import STRATEGY_IDS

_DATASET_KEYS = {
    "synthetic": {"type", "classes", "dim", "train_per_class", "test_per_class",
                  "spread", "seed"},
    "idx": {"type", "images", "labels", "train_images", "train_labels",
            "test_images", "test_labels", "test_fraction"},
    "csv": {"type", "path", "label_column", "test_fraction"},
}
_SCENARIO_KEYS = {"mode", "update_type", "class_schedule", "test_policy"}
_NETWORK_KEYS = {"hidden", "hidden_std", "output_init", "output_std"}
_PLAN_KEYS = {"epochs_first", "epochs_later", "eta_first", "eta_later", "minibatch_size"}
_TOP_KEYS = {"dataset", "scenario", "network", "plan", "strategy", "strategies",
             "runs", "base_seed", "out_dir"}

_STRATEGY_KEYS = {
    "naive": set(),
    "cumulative": set(),
    "lwf": {"map"},
    "ewc": {"strength", "max_f", "fisher_mode", "fisher_minibatch"},
    "si": {"strength", "max_f", "xi", "weights"},
    "cwr": {"weights", "reinit_std"},
    "cwrplus": {"avg_scope"},
    "ar1": {"strength", "max_f", "xi", "weights", "avg_scope"},
}

_STRATEGY_DEFAULTS = {
    "naive": {},
    "cumulative": {},
    "lwf": {"map": None},
    "ewc": {"strength": 1e5, "max_f": 0.001, "fisher_mode": "minibatch",
            "fisher_minibatch": None},
    "si": {"strength": 1e5, "max_f": 0.001, "xi": 1e-7, "weights": [0.00001, 0.005]},
    "cwr": {"weights": [1.25, 1.0], "reinit_std": 0.01},
    "cwrplus": {"avg_scope": "full"},
    "ar1": {"strength": 300.0, "max_f": 0.001, "xi": 1e-7, "weights": [0.0015, 0.0015],
            "avg_scope": "full"},
}

# published defaults: expanding head only helps the soft-target strategy
_DEFAULT_HEAD_MODE = {s: "maximal" for s in STRATEGY_IDS}
_DEFAULT_HEAD_MODE["lwf"] = "expanding"


@dataclass
class StrategyConfig:
    id: str
    params: dict
    head_mode: str
    plan_overrides: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"id": self.id, "head_mode": self.head_mode, **self.params}
        if self.plan_overrides:
            d["plan"] = dict(self.plan_overrides)
        return d


@dataclass
class ExperimentConfig:
    dataset: dict
    scenario: dict
    network: dict
    plan: dict
    strategies: list
    runs: int
    base_seed: int
    out_dir: str | None

    def to_dict(self):
        return {
            "dataset": dict(self.dataset),
            "scenario": dict(self.scenario),
            "network": dict(self.network),
            "plan": dict(self.plan),
            "strategies": [s.to_dict() for s in self.strategies],
            "runs": self.runs,
            "base_seed": self.base_seed,
            "out_dir": self.out_dir,
        }


def _require(section, key, where):
    if key not in section:
        raise ConfigError(f"missing required field {key!r} in {where}")
    return section[key]


def _reject_unknown(section, allowed, where):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")


def _positive(value, name, kind=float):
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    if value <= 0:
        raise ConfigError(f"{name} must be positive")
    return value


def _validate_dataset(raw):
    if not isinstance(raw, dict):
        raise ConfigError("dataset must be an object")
    kind = _require(raw, "type", "dataset")
    if kind not in _DATASET_KEYS:
        raise ConfigError(f"unknown dataset type {kind!r} (synthetic, idx, csv)")
    _reject_unknown(raw, _DATASET_KEYS[kind], f"dataset ({kind})")
    out = dict(raw)
    if kind == "synthetic":
        defaults = {"classes": 10, "dim": 32, "train_per_class": 100,
                    "test_per_class": 40, "spread": 0.45, "seed": 0}
        for k, v in defaults.items():
            out.setdefault(k, v)
        _positive(out["spread"], "dataset.spread")
        for k in ("classes", "dim", "train_per_class", "test_per_class"):
            out[k] = int(_positive(out[k], f"dataset.{k}", int))
    elif kind == "idx":
        four = all(k in out for k in ("train_images", "train_labels",
                                      "test_images", "test_labels"))
        pair = "images" in out and "labels" in out
        if not (four or pair):
            raise ConfigError("idx dataset needs either images+labels or the four "
                              "train/test files")
        out.setdefault("test_fraction", 0.2)
    else:
        _require(out, "path", "dataset (csv)")
        _require(out, "label_column", "dataset (csv)")
        out.setdefault("test_fraction", 0.2)
    return out


def _validate_scenario(raw):
    raw = dict(raw or {})
    _reject_unknown(raw, _SCENARIO_KEYS, "scenario")
    out = {"mode": raw.get("mode", "SIT"), "update_type": raw.get("update_type", "NC"),
           "class_schedule": raw.get("class_schedule"),
           "test_policy": raw.get("test_policy", "fixed")}
    if out["mode"] not in ("SIT", "MT"):
        raise ConfigError(f"scenario.mode must be SIT or MT, got {out['mode']!r}")
    if out["update_type"] != "NC":
        raise ConfigError("only the NC update content type is supported")
    if out["test_policy"] not in ("fixed", "expanding"):
        raise ConfigError(f"unknown test policy {out['test_policy']!r}")
    if out["class_schedule"] is None:
        raise ConfigError("missing required field 'class_schedule' in scenario")
    schedule = list(out["class_schedule"])
    if not schedule or any(int(s) < 1 for s in schedule):
        raise ConfigError("class_schedule entries must be positive")
    out["class_schedule"] = [int(s) for s in schedule]
    return out


def _validate_network(raw):
    raw = dict(raw or {})
    _reject_unknown(raw, _NETWORK_KEYS, "network")
    out = {"hidden": raw.get("hidden", [100, 50]),
           "hidden_std": raw.get("hidden_std", 0.01),
           "output_init": raw.get("output_init", "zero"),
           "output_std": raw.get("output_std", 0.01)}
    hidden = [int(h) for h in out["hidden"]]
    if not hidden or any(h < 1 for h in hidden):
        raise ConfigError("network.hidden needs at least one positive layer width")
    out["hidden"] = hidden
    _positive(out["hidden_std"], "network.hidden_std")
    if out["output_init"] not in ("zero", "gaussian"):
        raise ConfigError(f"unknown output init {out['output_init']!r}")
    return out


def _validate_plan(raw, where="plan", partial=False):
    raw = dict(raw or {})
    _reject_unknown(raw, _PLAN_KEYS, where)
    defaults = {"epochs_first": 20, "epochs_later": 20, "eta_first": 0.05,
                "eta_later": 0.05, "minibatch_size": 32}
    out = dict(raw) if partial else {**defaults, **raw}
    for k, v in out.items():
        if k.startswith("epochs") or k == "minibatch_size":
            out[k] = int(_positive(v, f"{where}.{k}", int))
        else:
            out[k] = _positive(v, f"{where}.{k}")
    return out


def _validate_strategy(raw, index, base_plan):
    if isinstance(raw, str):
        raw = {"id": raw}
    if not isinstance(raw, dict):
        raise ConfigError("strategy must be an id string or an object")
    where = f"strategies[{index}]"
    sid = _require(raw, "id", where)
    if sid not in STRATEGY_IDS:
        raise ConfigError(f"unknown strategy id {sid!r} (choose from {', '.join(STRATEGY_IDS)})")
    allowed = _STRATEGY_KEYS[sid] | {"id", "head_mode", "plan"}
    _reject_unknown(raw, allowed, f"{where} ({sid})")
    params = dict(_STRATEGY_DEFAULTS[sid])
    for k in _STRATEGY_KEYS[sid]:
        if k in raw:
            params[k] = raw[k]
    head_mode = raw.get("head_mode", _DEFAULT_HEAD_MODE[sid])
    if head_mode not in ("maximal", "expanding"):
        raise ConfigError(f"unknown head mode {head_mode!r} in {where}")
    if sid in ("ewc", "si") and head_mode == "expanding":
        raise ConfigError(f"{sid} needs the maximal head (importance shapes are fixed)")
    plan_overrides = _validate_plan(raw.get("plan"), f"{where}.plan", partial=True)
    if "map" in params and params["map"] is not None:
        m = list(params["map"])
        if len(m) != 4:
            raise ConfigError(f"{where}: map must be a 4-tuple (in_lo, in_hi, out_lo, out_hi)")
        if float(m[0]) == float(m[1]):
            raise ConfigError(f"{where}: degenerate map, in_lo == in_hi")
        params["map"] = [float(v) for v in m]
    if "weights" in params:
        w = [float(v) for v in params["weights"]]
        if len(w) != 2 or any(v < 0 for v in w):
            raise ConfigError(f"{where}: weights must be two nonnegative values "
                              "(first batch, later batches)")
        params["weights"] = w
    if "strength" in params and float(params["strength"]) < 0:
        raise ConfigError(f"{where}: strength must be nonnegative")
    if "xi" in params:
        params["xi"] = _positive(params["xi"], f"{where}.xi")
    if "max_f" in params:
        params["max_f"] = _positive(params["max_f"], f"{where}.max_f")
    if params.get("fisher_mode") not in (None, "minibatch", "pattern"):
        raise ConfigError(f"{where}: fisher_mode must be 'minibatch' or 'pattern'")
    if params.get("avg_scope") not in (None, "full", "batch_classes"):
        raise ConfigError(f"{where}: avg_scope must be 'full' or 'batch_classes'")
    # overshoot bound: the anchored decay step must not jump past the anchor
    if "strength" in params and "max_f" in params:
        eta_later = plan_overrides.get("eta_later", base_plan["eta_later"])
        ceiling = 1.0 / (eta_later * params["max_f"])
        if float(params["strength"]) > ceiling:
            raise ConfigError(
                f"{where}: strength {params['strength']:g} exceeds the overshoot bound "
                f"1/(eta_later*max_f) = {ceiling:g}")
    return StrategyConfig(sid, params, head_mode, plan_overrides)


def validate_config(raw):
    """Normalize and validate a raw config dict into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if "strategy" in raw and "strategies" in raw:
        raise ConfigError("give either 'strategy' or 'strategies', not both")
    if "strategy" not in raw and "strategies" not in raw:
        raise ConfigError("missing required field 'strategy' in config")
    dataset = _validate_dataset(_require(raw, "dataset", "config"))
    scenario = _validate_scenario(_require(raw, "scenario", "config"))
    network = _validate_network(raw.get("network"))
    plan = _validate_plan(raw.get("plan"))
    raw_strategies = raw.get("strategies", [raw.get("strategy")])
    if not isinstance(raw_strategies, list) or not raw_strategies:
        raise ConfigError("'strategies' must be a non-empty list")
    strategies = [_validate_strategy(s, i, plan) for i, s in enumerate(raw_strategies)]
    seen = set()
    for s in strategies:
        if s.id in seen:
            raise ConfigError(f"strategy {s.id!r} listed twice")
        seen.add(s.id)
    if scenario["mode"] == "MT":
        bad = [s.id for s in strategies if s.id in ("cwr", "cwrplus", "ar1", "cumulative")]
        if bad:
            raise ConfigError(f"strategies {bad} are SIT-specific and cannot run under MT")
    if dataset["type"] == "synthetic" and sum(scenario["class_schedule"]) != dataset["classes"]:
        raise ConfigError(f"class_schedule covers {sum(scenario['class_schedule'])} classes "
                          f"but the dataset has {dataset['classes']}")
    runs = int(raw.get("runs", 3))
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    return ExperimentConfig(dataset, scenario, network, plan, strategies, runs,
                            int(raw.get("base_seed", 0)), raw.get("out_dir"))


def parse_config(source):
    """Load a config from a path, '-' (stdin), an open file, or a dict."""
    if isinstance(source, dict):
        return validate_config(source)
    if source == "-":
        raw = json.load(sys.stdin)
    elif isinstance(source, (str, Path)):
        try:
            with open(source) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {source}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {source}: {exc}") from None
    else:
        raw = json.load(source)
    return validate_config(raw)
