"""Pixel-grid energy assembly and minimization.

The energy over a labeling x is

    E(x) = sum_i [ nll_gmm(i, x_i) + a * (-log p_i(x_i)) ]
         + sum_{(i,j)} w_ij * [x_i != x_j]

where the GMM term uses the background mixture for label 0 and the shared
foreground mixture for every object label, p_i are prediction scores, ``a``
balances the two unaries, and w_ij is a contrast-sensitive Potts weight
that is switched off inside a band around motion-segment boundaries (so
the minimizer may cheaply relabel across imprecise motion edges).

Binary problems are solved exactly with one graph cut; multi-label
problems with expansion moves (each move is one exact binary cut).
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .core import GridAdjacency, LabelMap, MotionMask, RgbImage, ScoreMap
from .errors import DimensionMismatch, LabelNotAllowed, WrongLabelCount
from .gmm import FgBgGmm, nll
from .maxflow import SOURCE, FlowNetwork, min_cut

# Prediction scores are clamped here before taking logs; softmax outputs
# stored as float32 can round to exact zero.
SCORE_CLAMP = 1e-10

DEFAULT_EXPANSION_SWEEPS = 5


@dataclass(frozen=True)
class PairwiseParams:
    """Contrast-sensitive Potts parameters.

    ``smoothness`` scales the pairwise term against the unaries,
    ``contrast_scale`` is the exponential color-contrast coefficient
    (0.5 with colors in [0, 1]), and ``boundary_band`` is the Chebyshev
    half-width of the discount band around motion boundaries.
    """

    smoothness: float = 10.0
    contrast_scale: float = 0.5
    boundary_band: int = 2

    def __post_init__(self):
        if self.smoothness <= 0 or self.contrast_scale <= 0:
            raise ValueError("smoothness and contrast_scale must be positive")
        if self.boundary_band < 0:
            raise ValueError("boundary_band must be >= 0")


@dataclass(frozen=True)
class BoundaryBand:
    """Per-pixel flag, 1 inside the band around motion-segment edges."""

    band: np.ndarray  # (H, W) bool

    def __post_init__(self):
        b = np.ascontiguousarray(np.asarray(self.band, dtype=bool))
        if b.ndim != 2:
            raise DimensionMismatch(f"expected (H, W) band, got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "band", b)

    @property
    def height(self) -> int:
        return self.band.shape[0]

    @property
    def width(self) -> int:
        return self.band.shape[1]


def boundary_band_from_mask(mask: MotionMask, half_width: int) -> BoundaryBand:
    """Band of all pixels within Chebyshev distance ``half_width`` of a
    mask boundary pixel (a pixel with a 4-neighbor of opposite value)."""
    m = mask.mask.astype(bool)
    edge = np.zeros_like(m)
    diff = m[:, 1:] != m[:, :-1]
    edge[:, 1:] |= diff
    edge[:, :-1] |= diff
    diff = m[1:, :] != m[:-1, :]
    edge[1:, :] |= diff
    edge[:-1, :] |= diff
    if half_width > 0 and edge.any():
        size = 2 * half_width + 1
        edge = binary_dilation(edge, structure=np.ones((size, size), dtype=bool))
    return BoundaryBand(edge)


def potts_weight(z_i, z_j, i, j, band: BoundaryBand, p: PairwiseParams) -> float:
    """Pairwise weight between 4-neighbor pixels i=(row,col), j=(row,col).

    The label indicator [x_i != x_j] is applied by the solvers, not here.
    """
    if band.band[i] and band.band[j]:
        return 0.0
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    d2 = float(((z_i - z_j) ** 2).sum())
    dist = float(np.hypot(i[0] - j[0], i[1] - j[1]))
    return p.smoothness * np.exp(-p.contrast_scale * d2) / dist


@dataclass(frozen=True)
class EnergyModel:
    """Assembled unary/pairwise costs over the allowed labels.

    ``unary[n, c]`` is the cost of assigning pixel n (row-major) the label
    ``allowed_labels[c]``; ``pairwise[e]`` is the Potts weight of grid edge
    e in ``adjacency.edges()`` order.
    """

    allowed_labels: tuple
    unary: np.ndarray     # (N, A)
    pairwise: np.ndarray  # (E,)
    adjacency: GridAdjacency

    def __post_init__(self):
        u = np.ascontiguousarray(self.unary, dtype=np.float64)
        w = np.ascontiguousarray(self.pairwise, dtype=np.float64)
        if u.shape != (self.adjacency.node_count, len(self.allowed_labels)):
            raise DimensionMismatch("unary shape disagrees with grid/labels")
        if w.shape != (self.adjacency.edge_count,):
            raise DimensionMismatch("pairwise shape disagrees with grid edges")
        if not np.isfinite(u).all():
            raise ValueError("unary costs must be finite")
        if w.size and w.min() < 0:
            raise ValueError("pairwise weights must be >= 0")
        u.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "unary", u)
        object.__setattr__(self, "pairwise", w)
        object.__setattr__(self, "allowed_labels", tuple(self.allowed_labels))

    def column_of(self, label: int) -> int:
        try:
            return self.allowed_labels.index(label)
        except ValueError:
            raise LabelNotAllowed(f"label {label} not in {self.allowed_labels}")


def build_energy(img: RgbImage, gmms: FgBgGmm, scores: ScoreMap, allowed,
                 prediction_weight: float, params: PairwiseParams,
                 band: BoundaryBand) -> EnergyModel:
    """Assemble the energy for one frame.

    ``allowed`` lists the usable label indices and must contain background
    (0); ``prediction_weight`` balances the prediction term against the
    GMM term (0 switches predictions off entirely).
    """
    allowed = tuple(sorted(set(int(l) for l in allowed)))
    if not allowed or allowed[0] != 0:
        raise LabelNotAllowed("allowed label set must contain background (0)")
    if len(allowed) < 2:
        raise WrongLabelCount("need at least one object label besides background")
    if scores.height != img.height or scores.width != img.width:
        raise DimensionMismatch("image and score map disagree in size")
    if band.height != img.height or band.width != img.width:
        raise DimensionMismatch("image and boundary band disagree in size")
    if allowed[-1] >= scores.channels:
        raise DimensionMismatch(
            f"label {allowed[-1]} needs {allowed[-1] + 1} score channels, "
            f"have {scores.channels}")

    colors = img.pixels.reshape(-1, 3)
    nll_bg = nll(gmms.background, colors)
    nll_fg = nll(gmms.foreground, colors)
    neglogp = -np.log(np.maximum(scores.scores.reshape(-1, scores.channels),
                                 SCORE_CLAMP))

    unary = np.empty((len(colors), len(allowed)))
    for c, label in enumerate(allowed):
        motion_term = nll_bg if label == 0 else nll_fg
        unary[:, c] = motion_term + prediction_weight * neglogp[:, label]

    adjacency = GridAdjacency(img.width, img.height)
    edges = adjacency.edges()
    d2 = ((colors[edges[:, 0]] - colors[edges[:, 1]]) ** 2).sum(axis=1)
    pairwise = params.smoothness * np.exp(-params.contrast_scale * d2)
    flat_band = band.band.reshape(-1)
    pairwise[flat_band[edges[:, 0]] & flat_band[edges[:, 1]]] = 0.0

    return EnergyModel(allowed_labels=allowed, unary=unary, pairwise=pairwise,
                       adjacency=adjacency)


def _labels_to_columns(m: EnergyModel, x: LabelMap) -> np.ndarray:
    flat = x.labels.reshape(-1)
    if (flat.shape[0] != m.adjacency.node_count
            or x.width != m.adjacency.width):
        raise DimensionMismatch("labeling does not match the model grid")
    lookup = np.full(max(m.allowed_labels) + 2, -1)
    for c, label in enumerate(m.allowed_labels):
        lookup[label] = c
    clipped = np.minimum(flat, len(lookup) - 1)
    cols = lookup[clipped]
    if (cols < 0).any() or (flat >= len(lookup)).any():
        bad = flat[(cols < 0) | (flat >= len(lookup))][0]
        raise LabelNotAllowed(f"label {bad} not in {m.allowed_labels}")
    return cols


def _energy_of_columns(m: EnergyModel, cols: np.ndarray) -> float:
    edges = m.adjacency.edges()
    unary = m.unary[np.arange(len(cols)), cols].sum()
    pairwise = (m.pairwise * (cols[edges[:, 0]] != cols[edges[:, 1]])).sum()
    return float(unary + pairwise)


def total_energy(m: EnergyModel, x: LabelMap) -> float:
    """Energy of a labeling: unaries plus Potts costs on disagreeing edges."""
    return _energy_of_columns(m, _labels_to_columns(m, x))


def _columns_to_labelmap(m: EnergyModel, cols: np.ndarray) -> LabelMap:
    labels = np.asarray(m.allowed_labels, dtype=np.int32)[cols]
    return LabelMap(labels.reshape(m.adjacency.height, m.adjacency.width))


def _solve_binary_columns(theta0, theta1, edges, weights) -> np.ndarray:
    """Exact cut for a two-column energy; returns y with 1 = second column."""
    n = len(theta0)
    net = FlowNetwork(n)
    base = np.minimum(theta0, theta1)
    src = theta0 - base  # paid when y_i = 0 (node on sink side)
    snk = theta1 - base  # paid when y_i = 1 (node on source side)
    for i in range(n):
        if src[i] > 0.0 or snk[i] > 0.0:
            net.add_terminal(i, src[i], snk[i])
    for e in range(len(edges)):
        w = weights[e]
        if w > 0.0:
            net.add_edge(int(edges[e, 0]), int(edges[e, 1]), w, w)
    return (min_cut(net).side == SOURCE).astype(np.int64)


def minimize_binary(m: EnergyModel) -> LabelMap:
    """Exact global minimizer for a two-label model (submodular Potts)."""
    if len(m.allowed_labels) != 2:
        raise WrongLabelCount(
            f"binary solver needs exactly 2 allowed labels, got "
            f"{len(m.allowed_labels)}")
    y = _solve_binary_columns(m.unary[:, 0], m.unary[:, 1],
                              m.adjacency.edges(), m.pairwise)
    return _columns_to_labelmap(m, y)


def minimize_expansion(m: EnergyModel, init: LabelMap | None = None,
                       sweeps: int = DEFAULT_EXPANSION_SWEEPS,
                       energy_trace: list | None = None) -> LabelMap:
    """Expansion-move minimization for two or more labels.

    One move offers every pixel the choice "keep current label or switch
    to label a" and solves it exactly as a binary cut; labels are swept in
    ascending order. A move is accepted only when it strictly lowers the
    energy, so the energy is non-increasing across moves; passing
    ``energy_trace`` records the energy after every move. Terminates after
    ``sweeps`` full passes or when a pass brings no strict decrease.
    """
    if len(m.allowed_labels) < 2:
        raise WrongLabelCount("expansion needs at least 2 allowed labels")
    if init is None:
        cols = np.argmin(m.unary, axis=1)
    else:
        cols = _labels_to_columns(m, init)
    edges = m.adjacency.edges()
    e0, e1 = edges[:, 0], edges[:, 1]
    energy = _energy_of_columns(m, cols)

    for _ in range(max(1, sweeps)):
        improved = False
        for a in range(len(m.allowed_labels)):
            ci, cj = cols[e0], cols[e1]
            theta0 = m.unary[np.arange(len(cols)), cols]  # keep
            theta1 = m.unary[:, a].copy()                 # switch to a
            # pairwise reparameterization:
            #   E(0,0)=w[ci!=cj]  E(0,1)=w[ci!=a]  E(1,0)=w[cj!=a]  E(1,1)=0
            w_keep = m.pairwise * (ci != cj)   # A
            w_i = m.pairwise * (ci != a)       # B
            w_j = m.pairwise * (cj != a)       # C
            np.add.at(theta1, e0, w_j - w_keep)
            np.add.at(theta1, e1, -w_j)
            cap = w_i + w_j - w_keep           # >= 0 for Potts

            n = len(cols)
            net = FlowNetwork(n)
            base = np.minimum(theta0, theta1)
            src = theta0 - base
            snk = theta1 - base
            for i in range(n):
                if src[i] > 0.0 or snk[i] > 0.0:
                    net.add_terminal(i, src[i], snk[i])
            for e in range(len(edges)):
                if cap[e] > 0.0:
                    # cut when y[e1]=1 and y[e0]=0: directed arc e1 -> e0
                    net.add_edge(int(e1[e]), int(e0[e]), cap[e], 0.0)
            y = min_cut(net).side == SOURCE
            candidate = np.where(y, a, cols)
            cand_energy = _energy_of_columns(m, candidate)
            if cand_energy < energy:
                cols = candidate
                energy = cand_energy
                improved = True
            if energy_trace is not None:
                energy_trace.append(energy)
        if not improved:
            break
    return _columns_to_labelmap(m, cols)
