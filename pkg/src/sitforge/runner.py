"""Experiment orchestration: seeded runs, parallel workers, aggregation, artifacts.

Every run derives its randomness (class ordering, network init, shuffles,
head re-inits) from (base_seed, run_index), so a config re-run reproduces every
report byte for byte. SITFORGE_THREADS caps the worker pool.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .datasets import gen_synthetic, load_csv, load_idx, load_idx_pairs
from .diagnostics import (AggregateRecord, MtAggregateRecord, MtRunRecord, RunRecord,
                          emit_reports, save_record, weight_change)
from .errors import ConfigError, TrainingDiverged
from .network import InitPolicy, TrainPlan, init_network
from .scenario import ScenarioSpec, backward_transfer, run_mt, run_sit, split_nc
from .strategies import Ar1, Cumulative, Cwr, CwrPlus, Ewc, Lwf, Naive, Si
from . import svgplot


def _sub_seed(*path):
    return int(np.random.SeedSequence(list(path)).generate_state(1)[0])


def worker_count(runs):
    env = os.environ.get("SITFORGE_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(runs, cap))


def build_dataset(spec):
    kind = spec["type"]
    if kind == "synthetic":
        return gen_synthetic(spec["classes"], spec["dim"], spec["train_per_class"],
                             spec["test_per_class"], spec["spread"], spec["seed"])
    if kind == "idx":
        if "train_images" in spec:
            return load_idx_pairs(spec["train_images"], spec["train_labels"],
                                  spec["test_images"], spec["test_labels"])
        return load_idx(spec["images"], spec["labels"], spec["test_fraction"])
    if kind == "csv":
        return load_csv(spec["path"], spec["label_column"], spec["test_fraction"])
    raise ConfigError(f"unknown dataset type {kind!r}")


def build_strategy(sc, seed=0, mt=False):
    p = sc.params
    scope = "shared" if mt else "all"
    if sc.id == "naive":
        return Naive()
    if sc.id == "cumulative":
        return Cumulative()
    if sc.id == "lwf":
        return Lwf(map_params=p["map"])
    if sc.id == "ewc":
        return Ewc(p["strength"], p["max_f"], p["fisher_mode"], p["fisher_minibatch"],
                   scope=scope)
    if sc.id == "si":
        return Si(p["strength"], p["max_f"], p["xi"], p["weights"], scope=scope)
    if sc.id == "cwr":
        return Cwr(p["weights"], p["reinit_std"], seed=seed)
    if sc.id == "cwrplus":
        return CwrPlus(p["avg_scope"])
    if sc.id == "ar1":
        return Ar1(p["strength"], p["max_f"], p["xi"], p["weights"], p["avg_scope"])
    raise ConfigError(f"unknown strategy id {sc.id!r}")


def _layer_names(hidden):
    return [f"hidden_{i + 1}" for i in range(len(hidden))] + ["output"]


def _build_net(cfg, strat_cfg, dataset, batches, seed):
    n = cfg.network
    policy = InitPolicy(n["hidden_std"], n["output_init"], n["output_std"])
    if strat_cfg.head_mode == "expanding":
        class_ids = list(batches[0].class_ids)
    else:
        class_ids = list(range(dataset.n_classes))
    sizes = [dataset.dim, *n["hidden"], len(class_ids)]
    return init_network(sizes, policy, seed=seed, class_ids=class_ids,
                        head_mode=strat_cfg.head_mode)


def _plan_for(cfg, strat_cfg, shuffle_seed):
    merged = {**cfg.plan, **strat_cfg.plan_overrides}
    return TrainPlan(merged["epochs_first"], merged["epochs_later"], merged["eta_first"],
                     merged["eta_later"], merged["minibatch_size"], shuffle_seed)


def _hyperparameters(strategy, strat_cfg):
    h = dict(strategy.hyperparameters())
    h["head_mode"] = strat_cfg.head_mode
    if strat_cfg.plan_overrides:
        h["plan"] = dict(strat_cfg.plan_overrides)
    return h


def _partial_record(strat_cfg, strategy, run_index, run_seed, partial, layer_names, echo):
    done = len(partial.confusions)
    matrix = [list(row) for row in np.asarray(partial.accuracy.matrix)[:done]]
    changes = [weight_change(partial.snapshots[i], partial.snapshots[i + 1])
               for i in range(done)]
    overall = [float(v) for v in partial.accuracy.overall[:done]]
    return RunRecord(strat_cfg.id, _hyperparameters(strategy, strat_cfg), run_index,
                     run_seed, overall, matrix,
                     [c.tolist() for c in partial.confusions], changes, layer_names,
                     None, overall[-1] if overall else float("nan"),
                     partial.class_sets, echo)


def single_run(cfg, strat_cfg, dataset, run_index):
    """One seeded run; returns (record, final model snapshot or None)."""
    run_seed = _sub_seed(cfg.base_seed, run_index)
    spec = ScenarioSpec(cfg.scenario["mode"], cfg.scenario["update_type"],
                        cfg.scenario["class_schedule"], _sub_seed(run_seed, 1),
                        cfg.scenario["test_policy"])
    batches, test = split_nc(dataset, spec)
    net = _build_net(cfg, strat_cfg, dataset, batches, _sub_seed(run_seed, 2))
    plan = _plan_for(cfg, strat_cfg, _sub_seed(run_seed, 3))
    layer_names = _layer_names(cfg.network["hidden"])
    echo = cfg.to_dict()
    if spec.mode == "MT":
        strategy = build_strategy(strat_cfg, seed=_sub_seed(run_seed, 4), mt=True)
        result = run_mt(strategy, net, batches, test, plan)
        record = MtRunRecord(strat_cfg.id, _hyperparameters(strategy, strat_cfg),
                             run_index, run_seed, result.per_task, result.average,
                             result.class_sets, echo)
        return record, None
    strategy = build_strategy(strat_cfg, seed=_sub_seed(run_seed, 4))
    try:
        result = run_sit(strategy, net, batches, test, spec, plan, dataset.n_classes)
    except TrainingDiverged as exc:
        exc.record = _partial_record(strat_cfg, strategy, run_index, run_seed,
                                     exc.partial_result, layer_names, echo)
        raise
    changes = [weight_change(result.snapshots[i], result.snapshots[i + 1])
               for i in range(len(batches))]
    matrix = [list(row) for row in result.accuracy.matrix]
    bwt = backward_transfer(result.accuracy.matrix) if len(batches) >= 2 else None
    record = RunRecord(strat_cfg.id, _hyperparameters(strategy, strat_cfg), run_index,
                       run_seed, [float(v) for v in result.accuracy.overall], matrix,
                       [c.tolist() for c in result.confusions], changes, layer_names,
                       bwt, float(result.accuracy.overall[-1]), result.class_sets, echo)
    return record, result.snapshots[-1]


def aggregate_runs(records):
    """Mean/std across completed runs of one strategy."""
    first = records[0]
    if first.kind == "mt_run":
        per_task = np.asarray([r.per_task for r in records])
        return MtAggregateRecord(first.strategy_id, first.hyperparameters, len(records),
                                 per_task.mean(axis=0).tolist(),
                                 [float(r.average) for r in records],
                                 first.class_sets, first.config_echo)
    overall = np.asarray([r.overall for r in records])
    matrices = np.asarray([r.accuracy_matrix for r in records], dtype=np.float64)
    confusions = np.asarray([r.confusions for r in records], dtype=np.int64)
    changes = np.asarray([r.weight_changes for r in records])
    return AggregateRecord(
        first.strategy_id, first.hyperparameters, len(records),
        overall.mean(axis=0).tolist(), overall.std(axis=0).tolist(),
        matrices.mean(axis=0).tolist(), confusions.sum(axis=0).tolist(),
        changes.mean(axis=0).tolist(), first.layer_names,
        [r.bwt for r in records], [float(r.final_accuracy) for r in records],
        first.class_sets, first.config_echo)


def _write_comparison(out_dir, aggregates):
    rows = []
    series = []
    for agg in aggregates:
        if agg.kind != "aggregate":
            continue
        final = np.asarray(agg.final_per_run)
        rows.append([agg.strategy_id, float(np.mean(final)), float(np.std(final)),
                     agg.mean_bwt if agg.mean_bwt is not None else float("nan")])
        xs = list(range(1, len(agg.mean_overall) + 1))
        series.append((agg.strategy_id, xs, [float(v) for v in agg.mean_overall]))
    if not rows:
        return
    lines = ["strategy,final_accuracy,final_std,bwt"]
    for row in rows:
        lines.append(",".join([row[0]] + [repr(float(v)) for v in row[1:]]))
    with open(Path(out_dir) / "comparison.csv", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    svgplot.write_line_chart(Path(out_dir) / "comparison.svg", series,
                             title="strategy comparison (mean over runs)",
                             x_label="training batch", y_label="test accuracy",
                             y_range=(0.0, 1.0))


def run_experiment(config, out_dir=None, seed_override=None, quiet=False):
    """Execute all strategies and runs of a validated config; 0 ok, 2 on divergence."""
    if not isinstance(config, ExperimentConfig):
        raise ConfigError("run_experiment needs a validated ExperimentConfig")
    if seed_override is not None:
        config.base_seed = int(seed_override)
    target = out_dir or config.out_dir
    if target is None:
        raise ConfigError("no output directory: set out_dir in the config or pass --out")
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(config.dataset)
    if sum(config.scenario["class_schedule"]) != dataset.n_classes:
        raise ConfigError(f"class_schedule covers {sum(config.scenario['class_schedule'])} "
                          f"classes but the dataset has {dataset.n_classes}")
    with open(target / "config.json", "w", newline="\n") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    say = (lambda *a: None) if quiet else print
    diverged = False
    aggregates = []
    for strat_cfg in config.strategies:
        say(f"[{strat_cfg.id}] {config.runs} run(s)")
        strat_dir = target / strat_cfg.id
        records = [None] * config.runs

        def one(run_index, sc=strat_cfg):
            return single_run(config, sc, dataset, run_index)

        with ThreadPoolExecutor(max_workers=worker_count(config.runs)) as pool:
            futures = {pool.submit(one, k): k for k in range(config.runs)}
            for future, k in futures.items():
                run_dir = strat_dir / f"run_{k + 1}"
                try:
                    record, final_snapshot = future.result()
                except TrainingDiverged as exc:
                    diverged = True
                    say(f"[{strat_cfg.id}] run {k + 1} diverged: {exc}")
                    run_dir.mkdir(parents=True, exist_ok=True)
                    save_record(exc.record, run_dir / "results.json")
                    if exc.record.overall:
                        emit_reports(exc.record, run_dir)
                    continue
                run_dir.mkdir(parents=True, exist_ok=True)
                save_record(record, run_dir / "results.json")
                emit_reports(record, run_dir)
                if final_snapshot is not None:
                    with open(run_dir / "model.json", "w", newline="\n") as fh:
                        json.dump(final_snapshot.to_dict(), fh, sort_keys=True)
                        fh.write("\n")
                records[k] = record
        done = [r for r in records if r is not None]
        if len(done) == config.runs:
            agg = aggregate_runs(done)
            agg_dir = strat_dir / "aggregate"
            agg_dir.mkdir(parents=True, exist_ok=True)
            save_record(agg, agg_dir / "results.json")
            emit_reports(agg, agg_dir)
            aggregates.append(agg)
            if agg.kind == "aggregate":
                say(f"[{strat_cfg.id}] final accuracy "
                    f"{np.mean(agg.final_per_run):.3f} (bwt {agg.mean_bwt})")
            else:
                say(f"[{strat_cfg.id}] MT average accuracy {agg.mean_average:.3f}")
    if len(config.strategies) > 1:
        _write_comparison(target, aggregates)
    return 2 if diverged else 0
