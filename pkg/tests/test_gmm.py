import numpy as np
import pytest

from motionseg.core import MotionMask, RgbImage
from motionseg.errors import EmptyBackground, EmptyForeground, TooFewSamples
from motionseg.gmm import (
    VARIANCE_FLOOR,
    FgBgGmm,
    Gmm,
    fit_fgbg_from_motion,
    fit_gmm,
    frame_distance_weight,
    motion_color_samples,
    nll,
)

from oracles import gaussian_mixture_nll


def _random_gmm(rng, k=3):
    a = rng.standard_normal((k, 3, 3)) * 0.2
    covs = np.einsum("kij,klj->kil", a, a) + 0.05 * np.eye(3)
    w = rng.random(k) + 0.1
    return Gmm(w / w.sum(), rng.random((k, 3)), covs)


def test_identical_samples_hit_the_variance_floor():
    color = np.array([0.3, 0.6, 0.9])
    g = fit_gmm(np.tile(color, (40, 1)), n_components=1)
    assert np.allclose(g.means[0], color)
    assert np.allclose(g.covariances[0], VARIANCE_FLOOR * np.eye(3), atol=1e-12)
    assert g.weights[0] == 1.0


def test_two_blobs_recover_their_centroids():
    rng = np.random.default_rng(5)
    c0, c1 = np.array([0.2, 0.2, 0.2]), np.array([0.8, 0.8, 0.8])
    blob0 = np.clip(c0 + 0.005 * rng.standard_normal((120, 3)), 0, 1)
    blob1 = np.clip(c1 + 0.005 * rng.standard_normal((120, 3)), 0, 1)
    samples = np.concatenate([blob0, blob1])
    g = fit_gmm(samples, n_components=2, seed=0)
    # independent oracle: the per-blob sample centroids
    centroids = sorted([blob0.mean(axis=0), blob1.mean(axis=0)],
                       key=lambda m: m[0])
    fitted = sorted(g.means, key=lambda m: m[0])
    for got, want in zip(fitted, centroids):
        assert np.abs(got - want).max() < 0.01


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        fit_gmm(np.zeros((3, 3)), n_components=5)


def test_nll_analytic_single_gaussian():
    mu = np.array([0.4, 0.5, 0.6])
    g = Gmm(np.array([1.0]), mu[None, :], np.eye(3)[None, :, :])
    base = 1.5 * np.log(2 * np.pi)
    assert abs(nll(g, mu) - base) < 1e-12
    # distance d from the mean adds d^2 / 2
    d = 0.3
    off = mu + np.array([d, 0.0, 0.0])
    assert abs(nll(g, off) - (base + d * d / 2)) < 1e-12


def test_mixture_likelihood_dominates_weighted_components():
    rng = np.random.default_rng(6)
    for _ in range(20):
        g = _random_gmm(rng)
        color = rng.random(3)
        mix_like = np.exp(-nll(g, color))
        for k in range(g.n_components):
            single = Gmm(np.array([1.0]), g.means[k:k + 1],
                         g.covariances[k:k + 1])
            part = g.weights[k] * np.exp(-nll(single, color))
            assert mix_like >= part - 1e-12


def test_nll_matches_direct_formula():
    rng = np.random.default_rng(7)
    for _ in range(30):
        g = _random_gmm(rng, k=int(rng.integers(1, 5)))
        color = rng.random(3)
        direct = gaussian_mixture_nll(g.weights, g.means, g.covariances, color)
        assert abs(nll(g, color) - direct) <= 1e-9 * max(1.0, abs(direct))


def test_nll_finite_even_far_away():
    g = Gmm(np.array([1.0]), np.zeros((1, 3)),
            (VARIANCE_FLOOR * np.eye(3))[None, :, :])
    assert np.isfinite(nll(g, np.ones(3)))


def test_em_history_is_non_increasing():
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = int(rng.integers(12, 60))
        colors = rng.random((n, 3))
        weights = rng.random(n) + 0.1
        _, history = fit_gmm(colors, weights, n_components=3,
                             seed=int(rng.integers(1000)),
                             return_history=True)
        diffs = np.diff(history)
        assert (diffs <= 1e-9).all(), f"NLL increased: {history}"


def test_fit_is_sample_order_independent():
    rng = np.random.default_rng(9)
    colors = rng.random((80, 3))
    weights = rng.random(80) + 0.1
    g1 = fit_gmm(colors, weights, n_components=3, seed=4)
    perm = rng.permutation(80)
    g2 = fit_gmm(colors[perm], weights[perm], n_components=3, seed=4)
    probe = rng.random((50, 3))
    assert np.abs(nll(g1, probe) - nll(g2, probe)).max() < 1e-6


def test_fitted_gmm_invariants():
    rng = np.random.default_rng(10)
    for _ in range(5):
        g = fit_gmm(rng.random((50, 3)), n_components=4,
                    seed=int(rng.integers(100)))
        assert abs(g.weights.sum() - 1.0) < 1e-9
        assert (g.weights >= 0).all()
        for cov in g.covariances:
            assert np.linalg.eigvalsh(cov).min() >= VARIANCE_FLOOR - 1e-12


def test_frame_distance_weight():
    assert [frame_distance_weight(0, t) for t in range(3)] == [1.0, 0.5, 1 / 3]
    assert frame_distance_weight(5, 3) == frame_distance_weight(3, 5)


def _frame(colors, mask):
    return RgbImage(np.asarray(colors, dtype=np.float64)), \
        MotionMask(np.asarray(mask, dtype=np.uint8))


def test_single_frame_batch_weights_are_one():
    frame = _frame([[[0.1] * 3, [0.9] * 3]], [[1, 0]])
    fg_c, fg_w, bg_c, bg_w = motion_color_samples([frame], 0)
    assert np.array_equal(fg_w, [1.0]) and np.array_equal(bg_w, [1.0])
    assert np.allclose(fg_c, [[0.1] * 3]) and np.allclose(bg_c, [[0.9] * 3])


def test_batch_weights_follow_frame_distance():
    frames = [_frame([[[0.1 * (t + 1)] * 3, [0.9] * 3]], [[1, 0]])
              for t in range(3)]
    fg_c, fg_w, _, _ = motion_color_samples(frames, 0)
    assert np.allclose(sorted(fg_w, reverse=True), [1.0, 0.5, 1 / 3])
    # the weight-1 sample is the target frame's own foreground pixel
    assert np.allclose(fg_c[np.argmax(fg_w)], [0.1] * 3)


def test_foreground_restricted_to_masked_frames():
    lone = _frame([[[0.25] * 3, [0.75] * 3]], [[1, 0]])
    empty = _frame([[[0.5] * 3, [0.75] * 3]], [[0, 0]])
    fg_c, _, _, _ = motion_color_samples([lone, empty], 0)
    assert np.allclose(fg_c, [[0.25] * 3])


def test_empty_sides_raise():
    all_bg = _frame([[[0.5] * 3]], [[0]])
    with pytest.raises(EmptyForeground):
        motion_color_samples([all_bg], 0)
    all_fg = _frame([[[0.5] * 3]], [[1]])
    with pytest.raises(EmptyBackground):
        motion_color_samples([all_fg], 0)


def test_fit_fgbg_from_motion_single_frame_reduces_to_fit_gmm():
    rng = np.random.default_rng(11)
    colors = rng.random((4, 6, 3))
    mask = np.zeros((4, 6), dtype=np.uint8)
    mask[1:3, 1:4] = 1
    frame = (RgbImage(colors), MotionMask(mask))
    pair = fit_fgbg_from_motion([frame], 0, n_components=2, seed=3)
    direct_fg = fit_gmm(colors[mask == 1], n_components=2, seed=3)
    direct_bg = fit_gmm(colors[mask == 0], n_components=2, seed=3)
    probe = rng.random((20, 3))
    assert np.allclose(nll(pair.foreground, probe), nll(direct_fg, probe))
    assert np.allclose(nll(pair.background, probe), nll(direct_bg, probe))
    assert isinstance(pair, FgBgGmm)
