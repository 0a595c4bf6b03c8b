"""Video co-localization: prediction-seeded GMMs, superpixel cuts, boxes.

Frames are segmented object-vs-background at the superpixel level to keep
the cut problem small: unaries are pixel-count-weighted GMM costs of each
superpixel's mean color, the pairwise term mirrors the pixel-level
contrast-sensitive Potts scaled by shared boundary length, and the final
box encloses the largest 4-connected foreground component.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import GridAdjacency, LabelMap, RgbImage, check_same_shape
from .energy import PairwiseParams, _solve_binary_columns
from .errors import DimensionMismatch, EmptyBackground, EmptyForeground
from .gmm import DEFAULT_COMPONENTS, FgBgGmm, fit_gmm, nll

# SLIC settings: iteration count is fixed (the standard value), the color
# scale maps [0,1] RGB onto the ~100-unit range the compactness values of
# the original algorithm assume.
_SLIC_ITERS = 10
_SLIC_COLOR_SCALE = 100.0

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class SuperpixelMap:
    """A partition of the pixel grid into 4-connected superpixels."""

    ids: np.ndarray          # (H, W) int32, values 0..S-1
    mean_colors: np.ndarray  # (S, 3)
    centroids: np.ndarray    # (S, 2) mean (row, col) per superpixel
    counts: np.ndarray       # (S,) pixel counts, all >= 1

    def __post_init__(self):
        ids = np.ascontiguousarray(self.ids, dtype=np.int32)
        if ids.ndim != 2:
            raise DimensionMismatch(f"expected (H, W) ids, got {ids.shape}")
        s = len(self.counts)
        if ids.min() != 0 or ids.max() != s - 1 or np.any(self.counts < 1):
            raise ValueError("superpixel ids must cover 0..S-1, each nonempty")
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        for name in ("mean_colors", "centroids", "counts"):
            a = np.ascontiguousarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_superpixels(self) -> int:
        return len(self.counts)

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel-coordinate box."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)


def _grid_shape(height, width, target):
    """Rows x cols of initial cluster centers with rows*cols in [S/2, 2S]."""
    rows = int(np.clip(round(np.sqrt(target * height / width)), 1, height))
    cols = int(np.clip(round(target / rows), 1, width))
    while rows * cols < (target + 1) // 2:
        if cols < width:
            cols += 1
        elif rows < height:
            rows += 1
        else:
            break
    while rows * cols > 2 * target and rows * cols > 1:
        if rows >= cols and rows > 1:
            rows -= 1
        elif cols > 1:
            cols -= 1
        else:
            break
    return rows, cols


def _seed_centers(img, rows, cols):
    """Stratum-midpoint centers, moved to the lowest-gradient pixel of the
    3x3 neighborhood only when that strictly improves, so flat areas keep
    the exact (fractional) grid midpoints and stay symmetric."""
    h, w = img.height, img.width
    px = img.pixels
    grad = np.zeros((h, w))
    if w > 2:
        grad[:, 1:-1] += ((px[:, 2:] - px[:, :-2]) ** 2).sum(axis=2)
    if h > 2:
        grad[1:-1, :] += ((px[2:, :] - px[:-2, :]) ** 2).sum(axis=2)
    centers = []
    for r in range(rows):
        for c in range(cols):
            fy = (r + 0.5) * h / rows - 0.5
            fx = (c + 0.5) * w / cols - 0.5
            iy = int(np.clip(round(fy), 0, h - 1))
            ix = int(np.clip(round(fx), 0, w - 1))
            best = (iy, ix)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    y, x = iy + dy, ix + dx
                    if 0 <= y < h and 0 <= x < w and grad[y, x] < grad[best]:
                        best = (y, x)
            centers.append((fy, fx) if best == (iy, ix) else best)
    return centers


def _flood_label(ids):
    """Relabel 4-connected equal-value components in raster discovery
    order; returns (label map, component count)."""
    h, w = ids.shape
    out = np.full((h, w), -1, dtype=np.int32)
    next_label = 0
    for sy in range(h):
        for sx in range(w):
            if out[sy, sx] >= 0:
                continue
            old = ids[sy, sx]
            stack = [(sy, sx)]
            out[sy, sx] = next_label
            head = 0
            while head < len(stack):
                y, x = stack[head]
                head += 1
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if (0 <= ny < h and 0 <= nx < w and out[ny, nx] == -1
                            and ids[ny, nx] == old):
                        out[ny, nx] = next_label
                        stack.append((ny, nx))
            next_label += 1
    return out, next_label


def _split_largest(out, count):
    """Grow a connected half of the largest component into a new label.

    The grown half is connected by construction; the remainder may fall
    apart, so the caller re-runs :func:`_flood_label` afterwards."""
    sizes = np.bincount(out.ravel(), minlength=count)
    target = int(np.argmax(sizes))
    ys, xs = np.nonzero(out == target)
    take = len(ys) // 2
    if take == 0:
        return out, count
    h, w = out.shape
    seen = np.zeros((h, w), dtype=bool)
    seen[ys[0], xs[0]] = True
    queue = [(int(ys[0]), int(xs[0]))]
    head = 0
    while head < len(queue) and head < take:
        y, x = queue[head]
        head += 1
        out[y, x] = count
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if (0 <= ny < h and 0 <= nx < w and not seen[ny, nx]
                    and out[ny, nx] == target):
                seen[ny, nx] = True
                queue.append((ny, nx))
    return _flood_label(out)


def _merge_bounded(out, count, min_size, lower, upper):
    """Merge components into their largest neighbor, smallest first.

    Components below ``min_size`` are merged while more than ``lower``
    remain; any component may be merged while more than ``upper`` remain,
    so the final count lands inside [lower, upper]."""
    sizes = np.bincount(out.ravel(), minlength=count).astype(np.int64)
    alive = sizes > 0
    while int(alive.sum()) > 1:
        live = np.nonzero(alive)[0]
        smallest = int(live[np.argmin(sizes[live])])
        if len(live) > upper:
            victim = smallest
        elif len(live) > lower and sizes[smallest] < min_size:
            victim = smallest
        else:
            break
        member = out == victim
        ring = ndimage.binary_dilation(member, structure=FOUR_CONNECTED)
        neighbors = np.unique(out[ring & ~member])
        if len(neighbors) == 0:
            break
        target = int(neighbors[np.argmax(sizes[neighbors])])
        out[member] = target
        sizes[target] += sizes[victim]
        sizes[victim] = 0
        alive[victim] = False
    vals, inv = np.unique(out, return_inverse=True)
    return inv.reshape(out.shape).astype(np.int32), len(vals)


def slic_superpixels(img: RgbImage, target_count: int, compactness: float = 10.0,
                     seed: int = 0) -> SuperpixelMap:
    """SLIC-style clustering of a frame into roughly ``target_count``
    superpixels.

    Iterates assignment in joint (color, position) space from grid-seeded
    centers, then enforces 4-connectivity by merging small fragments into
    an adjacent superpixel. The returned count lies within
    [target_count/2, 2*target_count] (capped at the pixel count). The
    algorithm is fully deterministic; ``seed`` is accepted for interface
    uniformity and unused.
    """
    del seed
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    h, w = img.height, img.width
    n = h * w
    target = min(target_count, n)
    rows, cols = _grid_shape(h, w, target)
    centers = _seed_centers(img, rows, cols)
    k = len(centers)
    step = max(1, int(round(np.sqrt(n / k))))

    px = img.pixels
    pos_y, pos_x = np.mgrid[:h, :w]
    c_pos = np.array(centers, dtype=np.float64)
    c_col = np.array([px[int(np.clip(round(y), 0, h - 1)),
                         int(np.clip(round(x), 0, w - 1))] for y, x in centers])

    ids = np.zeros((h, w), dtype=np.int32)
    for _ in range(_SLIC_ITERS):
        dist = np.full((h, w), np.inf)
        ids.fill(-1)
        for j in range(k):
            cy, cx = c_pos[j]
            y0, y1 = max(0, int(cy) - step), min(h, int(cy) + step + 1)
            x0, x1 = max(0, int(cx) - step), min(w, int(cx) + step + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            dc = ((px[y0:y1, x0:x1] - c_col[j]) ** 2).sum(axis=2)
            ds = ((pos_y[y0:y1, x0:x1] - cy) ** 2
                  + (pos_x[y0:y1, x0:x1] - cx) ** 2)
            d = _SLIC_COLOR_SCALE ** 2 * dc + compactness ** 2 * ds / step ** 2
            win = dist[y0:y1, x0:x1]
            better = d < win
            win[better] = d[better]
            ids[y0:y1, x0:x1][better] = j
        orphan = ids < 0
        if orphan.any():
            # pixels outside every search window: assign to nearest center
            oy, ox = np.nonzero(orphan)
            d = (_SLIC_COLOR_SCALE ** 2
                 * ((px[oy, ox][:, None] - c_col[None]) ** 2).sum(axis=2)
                 + compactness ** 2
                 * ((oy[:, None] - c_pos[None, :, 0]) ** 2
                    + (ox[:, None] - c_pos[None, :, 1]) ** 2) / step ** 2)
            ids[oy, ox] = np.argmin(d, axis=1)
        for j in range(k):
            member = ids == j
            if member.any():
                c_pos[j] = (pos_y[member].mean(), pos_x[member].mean())
                c_col[j] = px[member].mean(axis=0)

    lower = max(1, (target + 1) // 2)
    upper = 2 * target
    final, count = _flood_label(ids)
    while count < lower:
        final, grown = _split_largest(final, count)
        if grown == count:
            break
        count = grown
    final, count = _merge_bounded(final, count, max(1, n // (2 * k)),
                                  lower, upper)

    flat = final.ravel()
    counts = np.bincount(flat, minlength=count)
    mean_colors = np.stack(
        [np.bincount(flat, weights=px[..., c].ravel(), minlength=count)
         for c in range(3)], axis=1) / counts[:, None]
    centroids = np.stack(
        [np.bincount(flat, weights=pos_y.ravel(), minlength=count),
         np.bincount(flat, weights=pos_x.ravel(), minlength=count)],
        axis=1) / counts[:, None]
    return SuperpixelMap(final, mean_colors, centroids, counts)


def seed_gmms_from_scores(frames, score_maps, category: int,
                          n_components: int = DEFAULT_COMPONENTS,
                          seed: int = 0) -> FgBgGmm:
    """Fit object/background GMMs from confidently predicted pixels.

    Foreground samples are pixels with the category's score strictly above
    0.5, background samples those with the background score strictly above
    0.5; ambiguous pixels (no score above 0.5) enter neither side. The fit
    is unweighted over all given frames.
    """
    if not frames:
        raise ValueError("need at least one frame")
    fg, bg = [], []
    for img, scores in zip(frames, score_maps):
        check_same_shape(img, scores)
        flat = img.pixels.reshape(-1, 3)
        p = scores.scores.reshape(-1, scores.channels)
        fg.append(flat[p[:, category] > 0.5])
        bg.append(flat[p[:, 0] > 0.5])
    fg, bg = np.concatenate(fg), np.concatenate(bg)
    if len(fg) == 0:
        raise EmptyForeground(f"no pixel predicts category {category} above 0.5")
    if len(bg) == 0:
        raise EmptyBackground("no pixel predicts background above 0.5")
    k = min(n_components, len(fg), len(bg))
    return FgBgGmm(foreground=fit_gmm(fg, None, k, seed),
                   background=fit_gmm(bg, None, k, seed))


def _superpixel_edges(sp: SuperpixelMap):
    """Adjacent superpixel pairs and their shared boundary lengths."""
    grid = GridAdjacency(sp.width, sp.height).edges()
    a = sp.ids.ravel()[grid[:, 0]].astype(np.int64)
    b = sp.ids.ravel()[grid[:, 1]].astype(np.int64)
    cross = a != b
    lo = np.minimum(a[cross], b[cross])
    hi = np.maximum(a[cross], b[cross])
    key, length = np.unique(lo * sp.n_superpixels + hi, return_counts=True)
    return np.stack([key // sp.n_superpixels, key % sp.n_superpixels],
                    axis=1), length.astype(np.float64)


def coloc_segment(frame: RgbImage, sp: SuperpixelMap, gmms: FgBgGmm,
                  params: PairwiseParams = PairwiseParams()) -> LabelMap:
    """Binary object/background segmentation at the superpixel level.

    Node costs are the GMM negative log-likelihoods of each superpixel's
    mean color times its pixel count; edge costs follow the pixel-level
    contrast form on mean colors and centroid distance, scaled by the
    shared boundary length. The cut is exact; labels are projected back
    to pixels.
    """
    check_same_shape(frame, sp)
    theta0 = sp.counts * nll(gmms.background, sp.mean_colors)
    theta1 = sp.counts * nll(gmms.foreground, sp.mean_colors)
    edges, boundary = _superpixel_edges(sp)
    if len(edges):
        dc = ((sp.mean_colors[edges[:, 0]] - sp.mean_colors[edges[:, 1]]) ** 2
              ).sum(axis=1)
        dist = np.sqrt(((sp.centroids[edges[:, 0]]
                         - sp.centroids[edges[:, 1]]) ** 2).sum(axis=1))
        weights = (params.smoothness * np.exp(-params.contrast_scale * dc)
                   / dist * boundary)
    else:
        weights = np.zeros(0)
    y = _solve_binary_columns(theta0, theta1, edges, weights)
    return LabelMap(y[sp.ids].astype(np.int32))


def largest_component_box(x: LabelMap):
    """Tight box around the largest 4-connected foreground component.

    Foreground is any nonzero label. Ties go to the component whose first
    pixel comes earliest in raster order; all-background maps give None.
    """
    fg = x.labels > 0
    if not fg.any():
        return None
    comp, count = ndimage.label(fg, structure=FOUR_CONNECTED)
    sizes = np.bincount(comp.ravel(), minlength=count + 1)
    sizes[0] = 0
    best = int(np.argmax(sizes))  # scipy labels in raster order of discovery
    rows, cols = np.nonzero(comp == best)
    return BoundingBox(int(cols.min()), int(rows.min()),
                       int(cols.max()), int(rows.max()))
