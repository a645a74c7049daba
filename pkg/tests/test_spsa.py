import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frugalzo.objective import ForwardCounter, grad_exact, make_quadratic, make_toy
from frugalzo.partition import BlockPartition
from frugalzo.rng import gaussian_block, rng_init
from frugalzo.spsa import perturb_inplace, spsa_projection


def draws(seed, n):
    z, _ = gaussian_block(rng_init(seed), n)
    return z


def test_zero_scale_is_noop():
    w = np.array([1.0, -0.0, 3.5e-300, -2.0])
    before = w.copy()
    perturb_inplace(w, seed=9, scale=0.0, partition=BlockPartition.whole(4))
    assert np.array_equal(w, before)
    # signed zero survives too
    assert np.signbit(w[1])


def test_perturb_matches_definition():
    w = np.array([1.0, 2.0, 3.0])
    perturb_inplace(w, seed=5, scale=1.0, partition=BlockPartition.whole(3))
    assert np.array_equal(w, np.array([1.0, 2.0, 3.0]) + draws(5, 3))


def test_perturb_is_partition_invariant():
    w0 = np.linspace(-2.0, 2.0, 12)
    results = []
    for part in (
        BlockPartition.whole(12),
        BlockPartition.uniform(12, 3),
        BlockPartition.per_coordinate(12),
    ):
        w = w0.copy()
        perturb_inplace(w, seed=17, scale=0.7, partition=part)
        results.append(w)
    assert np.array_equal(results[0], results[1])
    assert np.array_equal(results[0], results[2])


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**64 - 1),
    cuts=st.lists(st.integers(min_value=1, max_value=23), max_size=6, unique=True),
)
def test_perturb_partition_invariance_property(seed, cuts):
    # any contiguous partition applies the identical perturbation bitwise
    d = 24
    bounds = [0] + sorted(cuts) + [d]
    blocks = tuple(
        (a, b - a) for a, b in zip(bounds, bounds[1:]) if b > a
    )
    w0 = np.linspace(-1.5, 2.5, d)
    w_whole = w0.copy()
    perturb_inplace(w_whole, seed, 0.31, BlockPartition.whole(d))
    w_split = w0.copy()
    perturb_inplace(w_split, seed, 0.31, BlockPartition(blocks))
    assert np.array_equal(w_whole, w_split)


def test_partition_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        perturb_inplace(np.zeros(3), seed=1, scale=1.0, partition=BlockPartition.whole(4))


@pytest.mark.xfail(
    strict=True,
    reason="IEEE-754 rounding: the +mu/-2mu/+mu round trip is not bit-exact; "
    "drift is bounded and deterministic (see test below and decisions ledger)",
)
def test_three_move_dance_restores_bit_exactly():
    w0 = np.random.default_rng(3).normal(size=1000)
    w = w0.copy()
    part = BlockPartition.whole(1000)
    perturb_inplace(w, seed=2, scale=1e-3, partition=part)
    perturb_inplace(w, seed=2, scale=-2e-3, partition=part)
    perturb_inplace(w, seed=2, scale=1e-3, partition=part)
    assert np.array_equal(w, w0)


def test_three_move_dance_drift_is_bounded_and_deterministic():
    mu = 1e-3
    part = BlockPartition.whole(1000)
    z = draws(2, 1000)
    for scale_w in (1e-3, 1.0, 1e3):
        w0 = np.random.default_rng(3).normal(size=1000) * scale_w
        w = w0.copy()
        perturb_inplace(w, seed=2, scale=mu, partition=part)
        perturb_inplace(w, seed=2, scale=-2 * mu, partition=part)
        perturb_inplace(w, seed=2, scale=mu, partition=part)
        # three roundings, each at most half an ulp of the largest intermediate
        peak = np.maximum(np.abs(w0), np.maximum(np.abs(w0 + mu * z), np.abs(w0 - mu * z)))
        assert (np.abs(w - w0) <= 2.0 * np.spacing(peak)).all()
        # and the drift is a pure function of (w0, seed, mu)
        w2 = w0.copy()
        perturb_inplace(w2, seed=2, scale=mu, partition=part)
        perturb_inplace(w2, seed=2, scale=-2 * mu, partition=part)
        perturb_inplace(w2, seed=2, scale=mu, partition=part)
        assert np.array_equal(w, w2)


@pytest.mark.xfail(
    strict=True,
    reason="bit-exact restore after the projection dance is unattainable in "
    "IEEE-754; the quantified-drift test is the operative contract",
)
def test_projection_restores_weights_bit_exactly():
    obj = make_quadratic(np.full(64, 2.0))
    w0 = np.random.default_rng(1).normal(size=64)
    w = w0.copy()
    spsa_projection(obj, w, None, 1e-3, seed=4, partition=BlockPartition.whole(64))
    assert np.array_equal(w, w0)


def test_projection_restore_drift_bounded():
    obj = make_quadratic(np.full(64, 2.0))
    w0 = np.random.default_rng(1).normal(size=64)
    w = w0.copy()
    mu = 1e-3
    z = draws(4, 64)
    spsa_projection(obj, w, None, mu, seed=4, partition=BlockPartition.whole(64))
    peak = np.maximum(np.abs(w0), np.maximum(np.abs(w0 + mu * z), np.abs(w0 - mu * z)))
    assert (np.abs(w - w0) <= 2.0 * np.spacing(peak)).all()


def test_projection_on_1d_quadratic_is_exact():
    # f(w) = w^2 at w = 3: p = 6 z for any mu, up to fp rounding
    obj = make_quadratic(np.array([2.0]))
    part = BlockPartition.whole(1)
    for seed in (1, 2, 3):
        z = draws(seed, 1)[0]
        # fp cancellation in (L+ - L-) grows like 1/mu, so stay at sane scales
        for mu in (1e-1, 1e-2, 1e-3):
            w = np.array([3.0])
            rec, _, _ = spsa_projection(obj, w, None, mu, seed, part)
            assert rec.projection == pytest.approx(6.0 * z, rel=1e-10)


def test_projection_equals_directional_gradient_on_f3():
    obj = make_toy("f3")
    part = BlockPartition.whole(2)
    w = np.array([-1.0, 1.0])
    g = grad_exact(obj, w)  # (-200, 2)
    for seed in range(10):
        z = draws(seed, 2)
        rec, _, _ = spsa_projection(obj, w.copy(), None, 1e-3, seed, part)
        assert rec.projection == pytest.approx(z @ g, rel=1e-10)


def test_quadratic_exactness_many_draws():
    diag = np.random.default_rng(5).uniform(0.5, 5.0, size=16)
    obj = make_quadratic(diag)
    part = BlockPartition.whole(16)
    w = np.random.default_rng(6).normal(size=16)
    g = grad_exact(obj, w)
    for seed in range(100):
        z = draws(seed, 16)
        rec, _, _ = spsa_projection(obj, w.copy(), None, 1e-3, seed, part)
        assert rec.projection == pytest.approx(z @ g, rel=1e-10)


def test_richardson_error_scales_quadratically_on_f1():
    # smooth nonquadratic: |p - z.g| ~ C mu^2, so halving mu quarters the error
    obj = make_toy("f1")
    part = BlockPartition.whole(2)
    w0 = obj.default_init
    g = grad_exact(obj, w0)
    for seed in (1, 3):
        z = draws(seed, 2)
        errs = []
        for mu in (2e-2, 1e-2, 5e-3):
            rec, _, _ = spsa_projection(obj, w0.copy(), None, mu, seed, part)
            errs.append(abs(rec.projection - z @ g))
        assert 3.5 <= errs[0] / errs[1] <= 4.5
        assert 3.5 <= errs[1] / errs[2] <= 4.5


def test_projection_consumes_exactly_two_forward_passes():
    obj = make_toy("f2")
    counter = ForwardCounter()
    spsa_projection(
        obj, obj.default_init.copy(), None, 1e-3, 7, BlockPartition.whole(2), counter
    )
    assert counter.train == 2
    assert counter.eval_measures == 0


def test_projection_mean_loss_brackets_center_loss():
    obj = make_toy("f2")
    w = obj.default_init.copy()
    rec, lp, lm = spsa_projection(obj, w, None, 1e-3, 7, BlockPartition.whole(2))
    assert rec.projection == (lp - lm) / (2 * 1e-3)


def test_mu_must_be_positive():
    obj = make_toy("f3")
    with pytest.raises(ValueError):
        spsa_projection(obj, np.zeros(2), None, 0.0, 1, BlockPartition.whole(2))


def test_record_fields():
    obj = make_toy("f3")
    rec, _, _ = spsa_projection(
        obj, np.zeros(2), None, 1e-3, seed=123, partition=BlockPartition.whole(2), step=42
    )
    assert rec.step == 42
    assert rec.seed == 123
    assert np.isfinite(rec.projection)
