"""Weighted Gaussian mixtures over RGB color.

These provide the motion-derived appearance unaries: the foreground mixture
is fit on colors of pixels marked as moving foreground, the background
mixture on the rest, and a pixel's unary cost is the negative log-likelihood
under the corresponding mixture.

Fitting is weighted EM. Initialization is k-means++ with the caller's seed,
run on samples sorted lexicographically by color so the fit does not depend
on sample order. Covariances are floored so flat color regions cannot
produce singular matrices.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import EmptyBackground, EmptyForeground, TooFewSamples

# Smallest eigenvalue any covariance is allowed to have.
VARIANCE_FLOOR = 1e-6

DEFAULT_COMPONENTS = 5

_EM_MAX_ITER = 100
_EM_REL_TOL = 1e-6

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Gmm:
    """A K-component Gaussian mixture over 3-D color."""

    weights: np.ndarray      # (K,), nonnegative, sums to 1
    means: np.ndarray        # (K, 3)
    covariances: np.ndarray  # (K, 3, 3), eigenvalues >= VARIANCE_FLOOR

    def __post_init__(self):
        for name in ("weights", "means", "covariances"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_components(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class FgBgGmm:
    foreground: Gmm
    background: Gmm


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    """Clip eigenvalues from below at VARIANCE_FLOOR, keeping symmetry."""
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, VARIANCE_FLOOR)
    return (vecs * vals) @ vecs.T


def _component_log_density(mean, cov, colors):
    """log N(colors; mean, cov) for an (N, 3) color array, via Cholesky."""
    chol = np.linalg.cholesky(cov)
    dev = colors - mean
    sol = solve_triangular(chol, dev.T, lower=True)
    maha = np.einsum("ij,ij->j", sol, sol)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (3.0 * _LOG_2PI + logdet + maha)


def _log_terms(g: Gmm, colors: np.ndarray) -> np.ndarray:
    """log(w_k N_k(colors)) as a (K, N) array; dead components give -inf."""
    with np.errstate(divide="ignore"):
        logw = np.log(g.weights)
    terms = np.empty((g.n_components, len(colors)))
    for k in range(g.n_components):
        if np.isneginf(logw[k]):
            terms[k] = -np.inf
        else:
            terms[k] = logw[k] + _component_log_density(
                g.means[k], g.covariances[k], colors)
    return terms


def _log_likelihood(g: Gmm, colors: np.ndarray) -> np.ndarray:
    """Per-sample log mixture density, (N,). Zero-weight components drop out."""
    return logsumexp(_log_terms(g, colors), axis=0)


def nll(g: Gmm, color) -> float | np.ndarray:
    """Negative log-likelihood of a color (3,) or a batch of colors (N, 3).

    Finite for every input: the covariance floor bounds the density away
    from both zero and infinity on the color cube.
    """
    color = np.asarray(color, dtype=np.float64)
    if color.ndim == 1:
        return float(-_log_likelihood(g, color[None, :])[0])
    return -_log_likelihood(g, color)


def fit_gmm(colors, weights=None, n_components=DEFAULT_COMPONENTS, seed=0,
            return_history=False):
    """Fit a weighted GMM to (N, 3) colors with positive sample weights.

    Runs EM to convergence: stops when the relative change of the weighted
    NLL drops below 1e-6, or after 100 iterations. The weighted NLL is
    non-increasing across iterations (up to the covariance floor, which
    only activates on degenerate clusters).

    With ``return_history`` also returns the per-iteration weighted NLL,
    evaluated on the parameters entering each iteration.
    """
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    n = len(colors)
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(weights) != n:
        raise ValueError("colors and weights disagree in length")
    if np.any(weights <= 0):
        raise ValueError("sample weights must be positive")
    if n < n_components:
        raise TooFewSamples(f"{n} samples for {n_components} components")

    # order-independent init: sort by color, then seed k-means++
    order = np.lexsort((colors[:, 2], colors[:, 1], colors[:, 0]))
    colors = colors[order]
    weights = weights[order]
    centers = _kmeanspp_centers(colors, weights, n_components,
                                np.random.default_rng(seed))

    # hard assignment to the nearest center bootstraps the first M-step
    d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((n, n_components))
    resp[np.arange(n), np.argmin(d2, axis=1)] = 1.0
    g = _m_step(colors, weights, resp)

    history = []
    prev = None
    for _ in range(_EM_MAX_ITER):
        resp, cur_nll = _e_step(g, colors, weights)
        history.append(cur_nll)
        if prev is not None and abs(prev - cur_nll) < _EM_REL_TOL * max(1.0, abs(prev)):
            break
        prev = cur_nll
        g = _m_step(colors, weights, resp)

    if return_history:
        return g, history
    return g


def _kmeanspp_centers(colors, weights, k, rng):
    n = len(colors)
    probs = weights / weights.sum()
    centers = np.empty((k, 3))
    centers[0] = colors[rng.choice(n, p=probs)]
    if k == 1:
        return centers
    d2 = ((colors - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        scores = weights * d2
        total = scores.sum()
        if total <= 0.0:
            # every point already coincides with a chosen center
            idx = rng.choice(n, p=probs)
        else:
            idx = rng.choice(n, p=scores / total)
        centers[j] = colors[idx]
        d2 = np.minimum(d2, ((colors - centers[j]) ** 2).sum(axis=1))
    return centers


def _e_step(g, colors, weights):
    """Responsibilities and weighted NLL under the current parameters."""
    terms = _log_terms(g, colors)
    norm = logsumexp(terms, axis=0)
    resp = np.exp(terms - norm).T  # (N, K)
    return resp, float(-(weights * norm).sum())


def _m_step(colors, weights, resp):
    wresp = resp * weights[:, None]         # (N, K)
    mass = wresp.sum(axis=0)                # (K,)
    k = resp.shape[1]
    mix = mass / weights.sum()
    means = np.zeros((k, 3))
    covs = np.tile(VARIANCE_FLOOR * np.eye(3), (k, 1, 1))
    for j in range(k):
        if mass[j] <= 0.0:
            continue  # dead component keeps zero mixing weight
        means[j] = wresp[:, j] @ colors / mass[j]
        dev = colors - means[j]
        covs[j] = _floor_covariance((wresp[:, j][:, None] * dev).T @ dev / mass[j])
    return Gmm(weights=mix, means=means, covariances=covs)


def frame_distance_weight(t: int, t_prime: int) -> float:
    """Weight of a sample from frame t' when fitting for frame t."""
    return 1.0 / (1.0 + abs(t - t_prime))


def motion_color_samples(frames, target_index):
    """Colors split by motion mask, weighted by frame distance.

    ``frames`` is a list of (RgbImage, MotionMask) pairs; colors of frame
    t' carry weight 1/(1+|t-t'|) relative to the target frame. Returns
    (fg_colors, fg_weights, bg_colors, bg_weights).
    """
    if not 0 <= target_index < len(frames):
        raise IndexError(f"target_index {target_index} out of range")
    fg_colors, fg_w, bg_colors, bg_w = [], [], [], []
    for t, (img, mask) in enumerate(frames):
        w = frame_distance_weight(target_index, t)
        flat = img.pixels.reshape(-1, 3)
        fg = mask.mask.reshape(-1) == 1
        if fg.any():
            fg_colors.append(flat[fg])
            fg_w.append(np.full(int(fg.sum()), w))
        if (~fg).any():
            bg_colors.append(flat[~fg])
            bg_w.append(np.full(int((~fg).sum()), w))
    if not fg_colors:
        raise EmptyForeground("no foreground pixel in any frame of the batch")
    if not bg_colors:
        raise EmptyBackground("no background pixel in any frame of the batch")
    return (np.concatenate(fg_colors), np.concatenate(fg_w),
            np.concatenate(bg_colors), np.concatenate(bg_w))


def fit_fgbg_from_motion(frames, target_index, n_components=DEFAULT_COMPONENTS,
                         seed=0) -> FgBgGmm:
    """Fit foreground/background GMMs for one frame of a batch.

    ``frames`` is a list of (RgbImage, MotionMask) pairs. Colors from frame
    t' enter with weight 1/(1+|t-t'|) relative to the target frame, so the
    target frame dominates but the whole batch stabilizes the fit.
    """
    fg_c, fg_w, bg_c, bg_w = motion_color_samples(frames, target_index)
    return FgBgGmm(
        foreground=fit_gmm(fg_c, fg_w, n_components, seed),
        background=fit_gmm(bg_c, bg_w, n_components, seed),
    )
