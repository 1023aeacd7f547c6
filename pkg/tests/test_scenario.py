import numpy as np
import pytest

from sitforge.datasets import gen_synthetic
from sitforge.errors import ConfigError, ContractError
from sitforge.network import InitPolicy, TrainPlan, init_network, train_batch
from sitforge.scenario import (ScenarioSpec, backward_transfer, evaluate, evaluate_task,
                               run_mt, run_sit, split_nc)
from sitforge.strategies import Cwr, Naive, run_strategy_batch


def plan(**kw):
    args = dict(epochs_first=10, epochs_later=10, eta_first=0.1, eta_later=0.1,
                minibatch_size=32, shuffle_seed=1)
    args.update(kw)
    return TrainPlan(**args)


def net_for(ds, seed=0, hidden=(20, 12)):
    return init_network([ds.dim, *hidden, ds.n_classes],
                        InitPolicy(hidden_std=0.3, output_init="zero"), seed=seed)


def test_split_nc_core50_shape():
    ds = gen_synthetic(50, 4, 4, 2, 0.3, seed=0)
    spec = ScenarioSpec(class_schedule=[10] + [5] * 8, class_ordering_seed=3)
    batches, test = split_nc(ds, spec)
    assert len(batches) == 9
    sets = [set(b.class_ids) for b in batches]
    for i in range(9):
        for j in range(i + 1, 9):
            assert not sets[i] & sets[j]
    assert set().union(*sets) == set(range(50))
    assert sorted(np.unique(test.labels)) == list(range(50))


def test_split_nc_icifar_shape():
    ds = gen_synthetic(100, 4, 3, 2, 0.3, seed=1)
    spec = ScenarioSpec(class_schedule=[10] * 10, class_ordering_seed=0)
    batches, _ = split_nc(ds, spec)
    assert len(batches) == 10
    assert all(len(b.class_ids) == 10 for b in batches)


def test_split_nc_seed_changes_ordering_not_sizes():
    ds = gen_synthetic(12, 4, 5, 2, 0.3, seed=2)
    a, _ = split_nc(ds, ScenarioSpec(class_schedule=[4, 4, 4], class_ordering_seed=1))
    b, _ = split_nc(ds, ScenarioSpec(class_schedule=[4, 4, 4], class_ordering_seed=2))
    assert [x.size for x in a] == [x.size for x in b]
    assert any(set(x.class_ids) != set(y.class_ids) for x, y in zip(a, b))


def test_split_nc_determinism():
    ds = gen_synthetic(8, 4, 5, 2, 0.3, seed=3)
    spec = ScenarioSpec(class_schedule=[4, 4], class_ordering_seed=9)
    a, ta = split_nc(ds, spec)
    b, tb = split_nc(ds, spec)
    for x, y in zip(a, b):
        assert np.array_equal(x.inputs, y.inputs)
        assert np.array_equal(x.labels, y.labels)
    assert np.array_equal(ta.inputs, tb.inputs)


def test_split_nc_schedule_validation():
    ds = gen_synthetic(6, 4, 5, 2, 0.3, seed=4)
    with pytest.raises(ConfigError):
        split_nc(ds, ScenarioSpec(class_schedule=[4, 4]))
    with pytest.raises(ConfigError):
        split_nc(ds, ScenarioSpec(class_schedule=[2, 2]))


def test_evaluate_chance_level():
    ds = gen_synthetic(50, 6, 2, 8, 0.3, seed=5)
    net = init_network([6, 10, 50], InitPolicy(hidden_std=0.5, output_init="gaussian",
                                               output_std=0.5), seed=5)
    x, y = ds.test_patterns()
    acc, confusion = evaluate(net, x, y, 50)
    assert confusion.sum() == len(x)
    assert acc < 0.08  # chance is 1/50; binomial headroom


def test_evaluate_fixed_policy_caps_at_seen_fraction():
    # after the first batch only its classes can be right; with well-separated
    # clusters the ceiling (fraction of test patterns in those classes) is hit
    ds = gen_synthetic(10, 8, 30, 10, 0.02, seed=6)
    spec = ScenarioSpec(class_schedule=[2, 2, 2, 2, 2], class_ordering_seed=1)
    batches, test = split_nc(ds, spec)
    net = net_for(ds, seed=6)
    net, eval_net = run_strategy_batch(Naive(), net, batches[0],
                                       plan(epochs_first=30, epochs_later=30))
    acc, _ = evaluate(eval_net, test.inputs, test.labels, 10)
    fraction = np.isin(test.labels, batches[0].class_ids).mean()
    assert fraction == pytest.approx(0.2)
    assert acc <= fraction + 1e-12
    assert acc > 0.15


def test_evaluate_expanding_equals_fixed_after_last_batch():
    ds = gen_synthetic(6, 6, 20, 8, 0.2, seed=7)
    spec = ScenarioSpec(class_schedule=[3, 3], class_ordering_seed=2)
    batches, test = split_nc(ds, spec)
    net = net_for(ds, seed=7)
    strat = Naive()
    for batch in batches:
        net, eval_net = run_strategy_batch(strat, net, batch, plan())
    fixed_acc, _ = evaluate(eval_net, test.inputs, test.labels, 6, "fixed")
    exp_acc, _ = evaluate(eval_net, test.inputs, test.labels, 6, "expanding",
                          classes_seen=set(range(6)))
    assert fixed_acc == exp_acc


def test_run_sit_single_batch_equals_plain_training():
    ds = gen_synthetic(4, 6, 20, 8, 0.2, seed=8)
    spec = ScenarioSpec(class_schedule=[4], class_ordering_seed=3)
    batches, test = split_nc(ds, spec)
    p = plan()
    result = run_sit(Naive(), net_for(ds, seed=8), batches, test, spec, p, 4)
    manual = net_for(ds, seed=8)
    train_batch(manual, batches[0].inputs, batches[0].labels, p, 1)
    acc, _ = evaluate(manual, test.inputs, test.labels, 4)
    assert result.accuracy.overall[0] == acc
    assert result.accuracy.matrix.shape == (1, 1)


def test_run_sit_accuracy_matrix_reproducible():
    ds = gen_synthetic(6, 6, 15, 6, 0.25, seed=9)
    spec = ScenarioSpec(class_schedule=[2, 2, 2], class_ordering_seed=4)
    out = []
    for _ in range(2):
        batches, test = split_nc(ds, spec)
        result = run_sit(Naive(), net_for(ds, seed=9), batches, test, spec, plan(), 6)
        out.append(result.accuracy)
    assert np.array_equal(out[0].matrix, out[1].matrix)
    assert np.array_equal(out[0].overall, out[1].overall)


def test_run_sit_overall_equals_confusion_trace():
    ds = gen_synthetic(6, 6, 15, 6, 0.25, seed=10)
    spec = ScenarioSpec(class_schedule=[3, 3], class_ordering_seed=5)
    batches, test = split_nc(ds, spec)
    result = run_sit(Naive(), net_for(ds, seed=10), batches, test, spec, plan(), 6)
    for i, confusion in enumerate(result.confusions):
        assert confusion.sum() == len(test.labels)
        assert result.accuracy.overall[i] == np.trace(confusion) / confusion.sum()


def test_run_sit_snapshots_per_batch():
    ds = gen_synthetic(4, 6, 15, 6, 0.25, seed=11)
    spec = ScenarioSpec(class_schedule=[2, 2], class_ordering_seed=6)
    batches, test = split_nc(ds, spec)
    result = run_sit(Cwr(seed=1), net_for(ds, seed=11), batches, test, spec, plan(), 4)
    assert len(result.snapshots) == 3  # baseline + one per batch
    assert np.all(result.snapshots[0].weights[-1] == 0.0)


def test_run_mt_single_task_is_plain_supervised():
    ds = gen_synthetic(4, 6, 20, 8, 0.1, seed=12)
    spec = ScenarioSpec(mode="MT", class_schedule=[4], class_ordering_seed=7)
    batches, test = split_nc(ds, spec)
    result = run_mt(Naive(), net_for(ds, seed=12), batches, test,
                    plan(epochs_first=30, epochs_later=30, eta_first=0.2, eta_later=0.2))
    assert len(result.per_task) == 1
    assert result.average == result.per_task[0]
    assert result.average > 0.8


def test_run_mt_rejects_sit_only_strategies():
    ds = gen_synthetic(4, 6, 10, 4, 0.2, seed=13)
    spec = ScenarioSpec(mode="MT", class_schedule=[2, 2], class_ordering_seed=8)
    batches, test = split_nc(ds, spec)
    with pytest.raises(ConfigError):
        run_mt(Cwr(), net_for(ds, seed=13), batches, test, plan())


def test_evaluate_task_chance_level_and_wrong_head():
    ds = gen_synthetic(4, 6, 10, 6, 0.2, seed=14)
    net = init_network([6, 8, 2], InitPolicy(output_init="zero"), seed=14,
                       class_ids=[0, 1])
    x, y = ds.test_patterns([0, 1])
    # zero head: every prediction lands on the first class, so balanced data
    # scores exactly 1/classes
    assert evaluate_task(net, x, y, [0, 1]) == pytest.approx(0.5)
    x_bad, y_bad = ds.test_patterns([2, 3])
    with pytest.raises(ContractError):
        evaluate_task(net, x_bad, y_bad, [0, 1])


def test_backward_transfer_no_forgetting_is_zero():
    r = np.array([[0.5, np.nan], [0.5, 0.6]])
    r[1, 0] = r[0, 0]
    assert backward_transfer(r) == 0.0


def test_backward_transfer_hand_example():
    r = np.full((3, 3), np.nan)
    r[0, 0] = 0.6
    r[1, 1] = 0.5
    r[2, 0] = 0.4
    r[2, 1] = 0.5
    r[2, 2] = 0.9
    assert backward_transfer(r) == pytest.approx(-0.10, abs=1e-15)


def test_backward_transfer_needs_two_batches():
    with pytest.raises(ConfigError):
        backward_transfer(np.array([[1.0]]))
