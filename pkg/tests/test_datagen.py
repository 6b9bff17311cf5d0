"""Demonstration collection, persistence and replay."""
import math

import numpy as np
import pytest

from pseudotactile.datagen import (
    CollectionAborted,
    Dataset,
    Demonstration,
    collect,
    dataset_stats,
    derive_seed,
    feature_stats,
    load_dataset,
    replay_demo,
    save_dataset,
    steps_identical,
)
from pseudotactile.expert import Stage, expert_rollout
from pseudotactile.world import WorldConfig, check_success, reset


@pytest.fixture(scope="module")
def drawer10():
    return collect("drawer", 10, 1)


def test_collect_twice_byte_identical(tmp_path, drawer10):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(drawer10, a)
    save_dataset(collect("drawer", 10, 1), b)
    assert a.read_bytes() == b.read_bytes()


def test_collect_independent_of_jobs(tmp_path, drawer10):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(drawer10, a)
    save_dataset(collect("drawer", 10, 1, jobs=2), b)
    assert a.read_bytes() == b.read_bytes()


def test_roundtrip_exact(tmp_path, drawer10):
    p = tmp_path / "d.jsonl"
    save_dataset(drawer10, p)
    back = load_dataset(p)
    assert back == drawer10
    assert back.path == str(p)
    for x, y in zip(back.demonstrations, drawer10.demonstrations):
        assert steps_identical(x.steps, y.steps)


def test_clean_data_has_no_overrides(drawer10):
    assert all(not d.disturbed and d.override_steps == () for d in drawer10.demonstrations)


def test_demo_invariants(drawer10):
    cfg = WorldConfig()
    for d in drawer10.demonstrations:
        assert 0 < d.length <= cfg.max_steps
    for i, d in enumerate(drawer10.demonstrations):
        assert d.demo_id == i


def test_clean_data_gripper_bit_tracks_grasp(drawer10):
    # the demo-time correlation the policy learns: closed bit means held object
    for d in drawer10.demonstrations:
        for s in d.steps:
            assert (s.observation.binary_gripper == 1) == (s.stage is Stage.POST_GRASP)


def test_filter_soundness_replay(drawer10):
    for d in drawer10.demonstrations[:4]:
        assert steps_identical(replay_demo(d, drawer10.world, drawer10.feedback), d.steps)


def test_persisted_demos_end_in_success():
    ds = collect("pick", 5, 2)
    for d in ds.demonstrations:
        scene = reset(d.task, d.seed)
        out = expert_rollout(scene)
        assert out.success and check_success(scene)
        assert len(out.steps) == d.length


def test_disturbed_collection_replays(tmp_path):
    ds = collect("oven", 6, 3, disturb_fraction=1.0, feedback=False)
    assert all(d.disturbed for d in ds.demonstrations)
    p = tmp_path / "o.jsonl"
    save_dataset(ds, p)
    back = load_dataset(p)
    for d in back.demonstrations[:3]:
        assert steps_identical(replay_demo(d, back.world, back.feedback), d.steps)


def test_stats_exact_counts():
    s = dataset_stats(collect("pick", 4, 5))
    assert s.n_demos == 4 and s.per_task == {"pick": 4}
    assert s.disturbance_share == 0.0


def _fake(lengths, disturbed):
    demos = [
        Demonstration(i, reset("pick", 0).task, i, tuple([None] * n), dist)
        for i, (n, dist) in enumerate(zip(lengths, disturbed))
    ]
    return Dataset(demos, np.zeros(11), np.ones(11), demos[0].task)


def test_stats_mean_length():
    s = dataset_stats(_fake([100] * 10, [False] * 10))
    assert s.mean_length == 100 and s.total_steps == 1000


def test_stats_single_demo():
    s = dataset_stats(_fake([37], [True]))
    assert (s.n_demos, s.mean_length, s.disturbance_share) == (1, 37, 1.0)


def test_stats_empty_rejected():
    with pytest.raises(ValueError):
        dataset_stats(Dataset([], np.zeros(11), np.ones(11), reset("pick", 0).task))


def test_disturbance_share_binomial_bounds():
    n = 200
    ds = collect("pick", n, 9, disturb_fraction=0.5)
    share = dataset_stats(ds).disturbance_share
    half_width = 2.576 * math.sqrt(0.25 / n)  # 99% normal approximation
    assert abs(share - 0.5) <= half_width


def test_feature_stats_constant_dims_get_unit_std():
    ds = collect("pick", 3, 1)
    mean, std = feature_stats(ds.demonstrations)
    feats = np.array([s.observation.features() for d in ds.demonstrations for s in d.steps])
    assert np.allclose(mean, feats.mean(axis=0))
    for j in range(11):
        if np.ptp(feats[:, j]) == 0:
            assert std[j] == 1.0
        else:
            assert std[j] > 0


def test_guard_aborts_misconfigured_collection():
    cfg = WorldConfig(capture_radius=1e-6, timeout=2.0)
    with pytest.raises(CollectionAborted):
        collect("pick", 5, 0, config=cfg, guard_after=10)


def test_bad_arguments():
    with pytest.raises(ValueError):
        collect("pick", 0, 0)
    with pytest.raises(ValueError):
        collect("pick", 1, 0, disturb_fraction=1.5)


def test_derive_seed_streams_differ():
    assert derive_seed(1, "scene", 0) == derive_seed(1, "scene", 0)
    assert len({derive_seed(1, "scene", i) for i in range(100)}) == 100
    assert derive_seed(1, "scene", 0) != derive_seed(1, "disturb", 0)
