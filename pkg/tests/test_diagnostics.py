import json

import numpy as np
import pytest

from sitforge.diagnostics import (AggregateRecord, RunRecord, emit_reports, load_record,
                                  record_to_dict, save_record, saturation_alarm,
                                  weight_change)
from sitforge.errors import ContractError
from sitforge.network import InitPolicy, init_network


def snapshots_pair(seed=0):
    net = init_network([4, 6, 5, 3], InitPolicy(hidden_std=0.3, output_init="gaussian",
                                                output_std=0.3), seed=seed)
    return net.snapshot(), net


def test_weight_change_identical_snapshots():
    snap, net = snapshots_pair()
    assert weight_change(snap, net.snapshot()) == [0.0, 0.0, 0.0]


def test_weight_change_uniform_shift_reads_exactly():
    snap, net = snapshots_pair(seed=1)
    net.layers[1].W += 0.5
    net.layers[1].b += 0.5
    changes = weight_change(snap, net.snapshot())
    assert changes[0] == 0.0
    assert changes[1] == pytest.approx(0.5, abs=1e-15)
    assert changes[2] == 0.0


def test_weight_change_mismatched_architecture():
    snap, _ = snapshots_pair(seed=2)
    other = init_network([4, 7, 5, 3], InitPolicy(), seed=2).snapshot()
    with pytest.raises(ContractError):
        weight_change(snap, other)


def test_weight_change_expanded_head_uses_common_columns():
    net = init_network([4, 6, 3], InitPolicy(output_init="gaussian"), seed=3,
                       class_ids=[0, 1, 2], head_mode="expanding")
    before = net.snapshot()
    from sitforge.network import expand_head
    expand_head(net, [3, 4])
    net.head.W[:, 0] += 1.0  # change one original column
    changes = weight_change(before, net.snapshot())
    expected = 6 / (6 * 3 + 3)  # mean |delta| over the three common columns + biases
    assert changes[-1] == pytest.approx(expected, abs=1e-12)


def test_saturation_alarm_diagonal_clean():
    assert saturation_alarm(np.eye(5, dtype=int) * 10) == []


def test_saturation_alarm_single_column():
    confusion = np.zeros((4, 4), dtype=int)
    confusion[:, 2] = 5
    assert saturation_alarm(confusion) == [2]


def run_record(batches=3, classes=4):
    rng = np.random.default_rng(0)
    confusions = []
    for _ in range(batches):
        m = rng.integers(0, 5, (classes, classes))
        confusions.append(m.tolist())
    matrix = np.full((batches, batches), np.nan)
    for i in range(batches):
        matrix[i, : i + 1] = rng.uniform(0, 1, i + 1)
    return RunRecord(
        strategy_id="naive", hyperparameters={}, run_index=1, seed=7,
        overall=[0.3, 0.4, 0.5], accuracy_matrix=matrix.tolist(),
        confusions=confusions,
        weight_changes=[[0.1, 0.2, 0.0]] * batches,
        layer_names=["hidden_1", "hidden_2", "output"],
        bwt=-0.25, final_accuracy=0.5,
        class_sets=[(0, 1), (2,), (3,)],
    )


def test_emit_reports_file_set(tmp_path):
    paths = emit_reports(run_record(), tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["accuracy_curve.csv", "accuracy_curve.svg", "accuracy_matrix.csv",
                     "confusion_B1.csv", "confusion_B2.csv", "confusion_B3.csv",
                     "summary.json", "weight_change.csv", "weight_change.svg"]
    curve = (tmp_path / "accuracy_curve.csv").read_text()
    assert curve.splitlines()[0] == "batch,overall_accuracy,std"
    assert len(curve.splitlines()) == 4  # header + one row per batch
    assert "\r" not in curve


def test_emit_reports_deterministic_bytes(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    emit_reports(run_record(), a)
    emit_reports(run_record(), b)
    for pa in sorted(a.iterdir()):
        assert pa.read_bytes() == (b / pa.name).read_bytes()


def test_summary_round_trips_scalars(tmp_path):
    record = run_record()
    emit_reports(record, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["bwt"] == record.bwt
    assert summary["final_accuracy"] == record.final_accuracy
    assert summary["overall"] == record.overall


def test_record_save_load_round_trip(tmp_path):
    record = run_record()
    save_record(record, tmp_path / "results.json")
    loaded = load_record(tmp_path / "results.json")
    assert record_to_dict(loaded) == record_to_dict(record)


def test_aggregate_record_reports(tmp_path):
    agg = AggregateRecord(
        strategy_id="ewc", hyperparameters={"strength": 100.0}, runs=3,
        mean_overall=[0.2, 0.3], std_overall=[0.01, 0.02],
        mean_matrix=[[0.2, 0.1], [0.15, 0.4]],
        summed_confusions=[np.eye(3, dtype=int).tolist()] * 2,
        mean_weight_changes=[[0.1, 0.0]] * 2, layer_names=["hidden_1", "output"],
        bwt_per_run=[-0.1, -0.2, -0.15], final_per_run=[0.3, 0.31, 0.29],
        class_sets=[(0,), (1, 2)],
    )
    paths = emit_reports(agg, tmp_path)
    assert (tmp_path / "accuracy_curve.csv") in paths
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["runs"] == 3
    assert summary["bwt"] == pytest.approx(-0.15)
