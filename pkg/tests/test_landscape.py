import numpy as np
import pytest

from photoland.dynamics import Design, EnvironmentSet, Pose, SimConfig, default_environments, simulate
from photoland.landscape import (
    CheckpointCorruptError, CheckpointMismatchError, GridSpec, ShapeMismatchError, ShardLog,
    ci_resistance, config_hash, design_grid, design_metrics, learnability, level_counts,
    overlap, success_matrix, success_tensor, sweep, weight_grid,
)

TINY = GridSpec(design_bins=2, weight_bins=5)
FAST = SimConfig(max_steps=1500)


def test_grid_sizes_and_spacing():
    paper = GridSpec.paper()
    assert len(design_grid(paper)) == 6561
    assert np.diff(paper.design_values()) == pytest.approx(np.full(8, 0.125))
    assert len(weight_grid(paper)) == 121 * 121
    assert np.diff(paper.weight_values()) == pytest.approx(np.full(120, 1 / 60))
    assert len(design_grid(GridSpec.desk())) == 625
    assert len(design_grid(GridSpec(design_bins=2))) == 16
    assert len(design_grid(GridSpec(design_bins=1, design_lo=0.2, design_hi=0.2))) == 1


def test_grid_order():
    grid = design_grid(TINY)
    assert grid[0].as_vector().tolist() == [-0.5, -0.5, -0.5, -0.5]
    assert grid[1].as_vector().tolist() == [-0.5, -0.5, -0.5, 0.5]
    assert grid[-1].as_vector().tolist() == [0.5, 0.5, 0.5, 0.5]
    pols = weight_grid(TINY)
    assert (pols[1].w1, pols[1].w2) == (-1.0, -0.5)


def test_grid_spec_rejects_bad_bounds():
    with pytest.raises(ValueError):
        GridSpec(design_lo=0.5, design_hi=-0.5)
    with pytest.raises(ValueError):
        GridSpec(weight_bins=0)


def test_overlap_examples():
    eye = np.eye(3, dtype=np.uint8)
    np.testing.assert_array_equal(overlap([eye] * 4), 4 * np.eye(3))
    z = np.zeros((3, 3), np.uint8)
    np.testing.assert_array_equal(overlap([z] * 4), z)
    with pytest.raises(ShapeMismatchError):
        overlap([np.zeros((3, 3)), np.zeros((3, 4))])


def test_overlap_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mats = [rng.integers(0, 2, (10, 10)) for _ in range(4)]
        o = overlap(mats)
        for i in range(10):
            for j in range(10):
                assert o[i, j] == sum(int(m[i, j]) for m in mats)


def test_metric_examples():
    o = np.array([[4, 4, 0], [1, 2, 3], [0, 0, 4]])
    # g = (1, 1, 1, 3): three generalist cells of nine, six cells solving anything
    assert level_counts(o, 4) == (1, 1, 1, 3)
    assert learnability(o, 4) == 3 / 9
    assert ci_resistance(o, 4) == 0.5
    z = np.zeros((3, 3), int)
    assert learnability(z, 4) == 0.0 and ci_resistance(z, 4) == 0.0
    all4 = np.full((2, 2), 4)
    assert learnability(all4, 4) == 1.0 and ci_resistance(all4, 4) == 1.0


def test_metric_bounds_random():
    rng = np.random.default_rng(4)
    for _ in range(50):
        o = rng.integers(0, 5, (7, 7))
        ml, mci = learnability(o, 4), ci_resistance(o, 4)
        assert 0 <= ml <= mci <= 1


def test_success_tensor_matches_simulate():
    design = Design((0.5, 0.5), (0.5, -0.5))
    spec = GridSpec(weight_bins=5)
    envs = default_environments()
    S = success_tensor(design, envs, spec, FAST)
    assert S.shape == (4, 5, 5) and S.dtype == np.uint8
    for k, start in enumerate(envs):
        for idx, pol in enumerate(weight_grid(spec)):
            i, j = divmod(idx, 5)
            assert S[k, i, j] == simulate(design, pol, start, FAST).success
    m = success_matrix(design, envs.start_poses[2], spec, FAST, env_index=2)
    np.testing.assert_array_equal(m.values, S[2])


def test_colocated_design_has_no_generalists():
    spec = GridSpec(weight_bins=11)
    d = Design((0.25, 0.0), (0.25, 0.0))
    assert design_metrics(d, default_environments(), spec, FAST).m_l == 0.0


def test_environment_permutation_invariance():
    design = Design((0.5, 0.25), (0.0, -0.5))
    spec = GridSpec(weight_bins=9)
    envs = default_environments()
    a = design_metrics(design, envs, spec, FAST)
    b = design_metrics(design, EnvironmentSet(tuple(reversed(envs.start_poses))), spec, FAST)
    assert (a.m_l, a.m_ci, a.counts) == (b.m_l, b.m_ci, b.counts)


def _key(ms):
    return [(m.design.as_vector().tolist(), m.m_l, m.m_ci, m.counts) for m in ms]


def test_sweep_worker_invariance():
    envs = default_environments()
    a = sweep(TINY, envs, FAST, workers=1)
    b = sweep(TINY, envs, FAST, workers=2)
    assert len(a) == 16 and _key(a) == _key(b)


def test_checkpoint_resume(tmp_path):
    envs = default_environments()
    ck = tmp_path / "sweep.ckpt"
    full = sweep(TINY, envs, FAST, checkpoint=ck)
    size = ck.stat().st_size
    again = sweep(TINY, envs, FAST, checkpoint=ck, resume=True)
    assert _key(again) == _key(full)
    assert ck.stat().st_size == size  # nothing recomputed

    # tear the last record: it is dropped and recomputed
    with open(ck, "r+b") as fh:
        fh.truncate(size - 3)
    healed = sweep(TINY, envs, FAST, checkpoint=ck, resume=True)
    assert _key(healed) == _key(full)
    assert ck.stat().st_size == size

    digest = config_hash(TINY, envs, FAST)
    assert len(list(ShardLog(ck, digest).load())) == 16


def test_checkpoint_partial_resume(tmp_path):
    envs = default_environments()
    ck = tmp_path / "sweep.ckpt"
    designs = design_grid(TINY)
    log = ShardLog(ck, config_hash(TINY, envs, FAST, designs))
    log.start()
    for i in (0, 5, 9):
        log.append(i, success_tensor(designs[i], envs, TINY, FAST))
    resumed = sweep(TINY, envs, FAST, checkpoint=ck, resume=True)
    assert _key(resumed) == _key(sweep(TINY, envs, FAST))


def test_checkpoint_mismatch_and_corruption(tmp_path):
    envs = default_environments()
    ck = tmp_path / "sweep.ckpt"
    sweep(TINY, envs, FAST, checkpoint=ck)
    with pytest.raises(CheckpointMismatchError):
        sweep(TINY, envs, SimConfig(max_steps=1400), checkpoint=ck, resume=True)
    other = EnvironmentSet((Pose(1.0, 1.0),))
    with pytest.raises(CheckpointMismatchError):
        sweep(TINY, other, FAST, checkpoint=ck, resume=True)
    data = bytearray(ck.read_bytes())
    data[60] ^= 0xFF
    ck.write_bytes(bytes(data))
    with pytest.raises(CheckpointCorruptError):
        sweep(TINY, envs, FAST, checkpoint=ck, resume=True)
    ck.write_bytes(b"nope" + bytes(40))
    with pytest.raises(CheckpointCorruptError):
        sweep(TINY, envs, FAST, checkpoint=ck, resume=True)


def test_fresh_sweep_replaces_checkpoint(tmp_path):
    envs = default_environments()
    ck = tmp_path / "sweep.ckpt"
    sweep(TINY, envs, SimConfig(max_steps=1400), checkpoint=ck)
    sweep(TINY, envs, FAST, checkpoint=ck)  # no resume: old log discarded, no mismatch
    assert len(list(ShardLog(ck, config_hash(TINY, envs, FAST)).load())) == 16
