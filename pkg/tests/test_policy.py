import numpy as np
import pytest

from arena_rl.policy import (
    HEADS,
    HIDDEN,
    MASK_PENALTY,
    AdamState,
    CheckpointError,
    adam_step,
    backward,
    clip_grad_norm,
    closed_form_param_count,
    forward,
    init_params,
    load_checkpoint,
    masked_categorical,
    masked_log_softmax,
    sample_and_logprob,
    sample_index,
    save_checkpoint,
    zero_params,
)

TINY = dict(hidden=(8, 8, 8), heads=(3, 4, 1))


def test_architecture_and_count():
    p = init_params(78, seed=0)
    assert p.hidden == HIDDEN == (512, 512, 512)
    assert p.heads == HEADS == (9, 11, 1)
    assert p.dtype == np.float32
    expected = 78 * 512 + 512 + 2 * (512 * 512 + 512) + 512 * 21 + 21
    assert p.count() == closed_form_param_count(78) == expected


def test_zero_weights_give_zero_outputs():
    la, ld, v = forward(zero_params(60), np.random.default_rng(0).normal(size=60))
    assert not la.any() and not ld.any() and v == 0.0


def test_forward_is_deterministic_and_batched():
    obs = np.random.default_rng(1).normal(size=(6, 78)).astype(np.float32)
    a = forward(init_params(78, seed=3), obs)
    b = forward(init_params(78, seed=3), obs)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    single = forward(init_params(78, seed=3), obs[2])
    for x, y in zip(a, single):
        np.testing.assert_allclose(x[2], y, rtol=1e-6, atol=1e-7)
    assert all(np.isfinite(x).all() for x in a)


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError, match="60"):
        forward(init_params(78), np.zeros(60))


def test_value_gradient_wrt_input_matches_finite_difference():
    p = init_params(6, seed=4, dtype=np.float64, **TINY)
    x = np.random.default_rng(5).normal(size=(1, 6))
    _, _, v, cache = forward(p, x, cache=True)
    # back-propagate to the input by hand through the trunk
    a = p.arrays
    dh = np.ones((1, 1)) @ a["wv"].T
    for i in reversed(range(3)):
        dz = dh * (1 - cache.activations[i + 1] ** 2)
        dh = dz @ a[f"w{i}"].T
    for j in range(6):
        d = 1e-6
        xp, xm = x.copy(), x.copy()
        xp[0, j] += d
        xm[0, j] -= d
        fd = (forward(p, xp)[2][0] - forward(p, xm)[2][0]) / (2 * d)
        assert fd == pytest.approx(dh[0, j], rel=1e-6, abs=1e-10)


def test_backward_zero_upstream_gives_zero_grads():
    p = init_params(6, seed=0, dtype=np.float64, **TINY)
    x = np.random.default_rng(0).normal(size=(5, 6))
    *_, cache = forward(p, x, cache=True)
    g = backward(p, cache, np.zeros((5, 3)), np.zeros((5, 4)), np.zeros(5))
    assert all(not v.any() for v in g.values())
    assert set(g) == set(p.names)
    assert all(g[n].shape == p.arrays[n].shape for n in p.names)


def test_backward_rejects_bad_head_shape():
    p = init_params(6, seed=0, dtype=np.float64, **TINY)
    *_, cache = forward(p, np.zeros((2, 6)), cache=True)
    with pytest.raises(ValueError):
        backward(p, cache, np.zeros((2, 5)), np.zeros((2, 4)), np.zeros(2))


def test_backward_matches_finite_differences_on_tiny_net():
    """Loss = sum(c_a * la) + sum(c_d * ld) + sum(c_v * v) for random coefficients."""
    rng = np.random.default_rng(8)
    p = init_params(6, seed=1, dtype=np.float64, policy_head_scale=1.0, **TINY)
    x = rng.normal(size=(7, 6))
    ca, cd, cv = rng.normal(size=(7, 3)), rng.normal(size=(7, 4)), rng.normal(size=7)

    def loss(q):
        la, ld, v = forward(q, x)
        return (ca * la).sum() + (cd * ld).sum() + (cv * v).sum()

    *_, cache = forward(p, x, cache=True)
    g = backward(p, cache, ca, cd, cv)
    h = 1e-5
    for name in p.names:
        arr = p.arrays[name]
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss(p)
            arr[idx] = old - h
            dn = loss(p)
            arr[idx] = old
            fd = (up - dn) / (2 * h)
            assert abs(fd - g[name][idx]) <= 1e-6 * max(1.0, abs(fd)), (name, idx)


def test_duplicated_batch_keeps_mean_gradient():
    p = init_params(6, seed=2, dtype=np.float64, **TINY)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 6))
    ua, ud, uv = rng.normal(size=(4, 3)), rng.normal(size=(4, 4)), rng.normal(size=4)
    *_, c1 = forward(p, x, cache=True)
    g1 = backward(p, c1, ua / 4, ud / 4, uv / 4)
    x2 = np.concatenate([x, x])
    *_, c2 = forward(p, x2, cache=True)
    g2 = backward(p, c2, np.concatenate([ua, ua]) / 8, np.concatenate([ud, ud]) / 8, np.concatenate([uv, uv]) / 8)
    for n in p.names:
        np.testing.assert_allclose(g1[n], g2[n], rtol=1e-12, atol=1e-14)


# -- masked distributions ---------------------------------------------------------


def test_single_unmasked_entry_is_certain():
    d = masked_categorical(np.array([0.3, -2.0, 5.0]), np.array([False, True, False]))
    assert d.probs.tolist() == [0.0, 1.0, 0.0]
    assert d.entropy == 0.0


def test_uniform_logits_over_k_entries():
    mask = np.array([True, False, True, True, False])
    d = masked_categorical(np.zeros(5), mask)
    np.testing.assert_allclose(d.probs[mask], 1 / 3, rtol=1e-12)
    assert (d.probs[~mask] == 0).all()
    assert d.entropy == pytest.approx(np.log(3))


def test_masking_equals_softmax_over_remaining():
    d = masked_categorical(np.array([1.0, 2.0, 3.0]), np.array([False, True, True]))
    e = np.exp([2.0, 3.0])
    np.testing.assert_allclose(d.probs[1:], e / e.sum(), rtol=1e-12)
    assert d.probs[0] == 0.0


def test_all_false_mask_rejected():
    with pytest.raises(ValueError):
        masked_categorical(np.zeros(3), np.zeros(3, dtype=bool))


def test_distribution_normalization_and_entropy_bounds():
    rng = np.random.default_rng(0)
    logits = rng.normal(scale=5.0, size=(2000, 11))
    mask = rng.random((2000, 11)) < 0.5
    mask[np.arange(2000), rng.integers(0, 11, 2000)] = True
    d = masked_categorical(logits, mask)
    np.testing.assert_allclose(d.probs.sum(-1), 1.0, atol=1e-6)
    assert (d.probs[~mask] == 0.0).all()
    assert (d.entropy >= -1e-12).all()
    assert (d.entropy <= np.log(mask.sum(-1)) + 1e-9).all()


def test_mask_penalty_gradient_is_zero_for_masked_logits():
    # d log_softmax_j / d z_i = delta_ij - p_i, and p_i == 0 for masked i
    logits = np.array([[0.5, 1.0, -1.0, 2.0]])
    mask = np.array([[True, False, True, True]])
    lp = masked_log_softmax(logits, mask)
    p = np.where(mask, np.exp(lp), 0.0)
    assert p[0, 1] == 0.0
    assert MASK_PENALTY == 1e9


def test_sampling_deterministic_when_single_option():
    a = masked_categorical(np.zeros((1, 9)), np.eye(9, dtype=bool)[[4]])
    d = masked_categorical(np.zeros((1, 11)), np.eye(11, dtype=bool)[[7]])
    ai, di, lp = sample_and_logprob(a, d, np.random.default_rng(0))
    assert (ai[0], di[0], lp[0]) == (4, 7, 0.0)


def test_sampling_frequencies_within_three_sigma():
    probs = np.array([0.1, 0.0, 0.25, 0.05, 0.6])
    n = 100_000
    idx = sample_index(np.tile(probs, (n, 1)), np.random.default_rng(11))
    counts = np.bincount(idx, minlength=5)
    sigma = np.sqrt(n * probs * (1 - probs))
    assert (np.abs(counts - n * probs) <= 3 * sigma + 1e-9).all()
    assert counts[1] == 0


def test_masked_index_never_sampled_in_a_million_draws():
    mask = np.array([True, False, True, False, True, True, False, True, True])
    d = masked_categorical(np.random.default_rng(2).normal(size=9), mask)
    idx = sample_index(np.tile(d.probs, (1_000_000, 1)), np.random.default_rng(3))
    assert not np.isin(idx, np.flatnonzero(~mask)).any()


def test_sample_index_handles_tiny_probabilities():
    probs = np.array([[1e-300, 0.0, 1.0 - 1e-300]])
    for seed in range(200):
        assert sample_index(probs, np.random.default_rng(seed))[0] != 1


# -- optimizer ----------------------------------------------------------------------


def test_adam_zero_gradients_leave_params():
    p = init_params(6, seed=0, **TINY)
    before = p.copy()
    opt = AdamState.for_params(p)
    adam_step(p, {n: np.zeros_like(a) for n, a in p.arrays.items()}, opt)
    assert p.equal(before)
    assert opt.step == 1
    assert all(opt.m[n].shape == p.arrays[n].shape for n in p.names)


def test_adam_constant_gradient_steps_approach_learning_rate():
    p = init_params(6, seed=0, dtype=np.float64, **TINY)
    opt = AdamState.for_params(p, learning_rate=1e-3)
    rng = np.random.default_rng(0)
    g = {n: rng.choice([-2.0, 0.5, 3.0], size=a.shape) for n, a in p.arrays.items()}
    for k in range(50):
        before = p.copy()
        adam_step(p, g, opt)
        assert opt.step == k + 1
    for n in p.names:
        delta = p.arrays[n] - before.arrays[n]
        # with bias correction, m_hat = g and v_hat = g^2 exactly, so each step is -lr * sign(g)
        np.testing.assert_allclose(delta, -1e-3 * np.sign(g[n]), rtol=1e-6)


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(7)
    p = init_params(6, seed=0, dtype=np.float64, **TINY)
    opt = AdamState.for_params(p, learning_rate=0.01)
    w = p.arrays["w1"].copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t in range(1, 6):
        g = rng.normal(size=w.shape)
        adam_step(p, {"w1": g}, opt)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p.arrays["w1"], w, rtol=1e-12)


def test_clip_grad_norm():
    g = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
    assert clip_grad_norm(g, 1.0) == pytest.approx(5.0)
    assert np.sqrt(sum((x**2).sum() for x in g.values())) == pytest.approx(1.0)
    g = {"a": np.array([0.3])}
    clip_grad_norm(g, 1.0)
    assert g["a"][0] == 0.3


# -- checkpoints ---------------------------------------------------------------


def test_checkpoint_roundtrip_is_bitwise(tmp_path):
    p = init_params(60, seed=9)
    save_checkpoint(p, tmp_path / "c.ckpt")
    q = load_checkpoint(tmp_path / "c.ckpt")
    assert p.equal(q)
    assert q.dtype == np.float32


def test_checkpoint_dimension_mismatch(tmp_path):
    save_checkpoint(init_params(60, seed=0), tmp_path / "c.ckpt")
    with pytest.raises(CheckpointError, match="input_dim"):
        load_checkpoint(tmp_path / "c.ckpt", expected_input_dim=78)


def test_checkpoint_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(init_params(6, seed=0, **TINY), path)
    data = path.read_bytes()
    path.write_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)
    path.write_bytes(data[:-3])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)
    path.write_bytes(data + b"\0")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)
    bad_version = bytearray(data)
    bad_version[8] = 99
    path.write_bytes(bytes(bad_version))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)
