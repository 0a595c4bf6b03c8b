"""A tiny per-pixel softmax classifier and the alternating training loop.

The classifier scores each pixel from quadratic color features only. It
exists to exercise the full loop (predict, infer latent labels, SGD update)
at desk scale, not to segment well; any real predictor can replace it by
writing score maps to disk.
"""

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import LabelSet, RgbImage, ScoreMap, argmax_labels
from .errors import (
    BadDimensions,
    BadMagic,
    SizeMismatch,
    TruncatedFile,
    ZeroCount,
)
from .inference import InferenceParams, infer_labels
from .io import DatasetManifest, read_image, read_mask
from .loss import ClassWeights, class_weights, weighted_nll_loss
from .pipeline import select_finetune_shots, shot_frames, shot_overlap

FEATURE_COUNT = 10

_MODEL_MAGIC = b"MTM1"


def color_features(pixels: np.ndarray) -> np.ndarray:
    """Quadratic color features (R,G,B,R2,G2,B2,RG,RB,GB,1) per pixel.

    Accepts any (..., 3) array and returns (..., 10).
    """
    p = np.asarray(pixels, dtype=np.float64)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    return np.stack([r, g, b, r * r, g * g, b * b,
                     r * g, r * b, g * b, np.ones_like(r)], axis=-1)


@dataclass(frozen=True)
class ToyModel:
    """Per-class weight vectors over the color features, with the momentum
    state carried alongside so updates are pure functions."""

    weights: np.ndarray   # (C, FEATURE_COUNT)
    velocity: np.ndarray  # (C, FEATURE_COUNT)

    def __post_init__(self):
        for name in ("weights", "velocity"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 2 or a.shape[1] != FEATURE_COUNT or a.shape[0] < 2:
                raise BadDimensions(f"{name} must be (num_labels, {FEATURE_COUNT})")
            if not np.isfinite(a).all():
                raise ValueError(f"{name} must be finite")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.weights.shape != self.velocity.shape:
            raise BadDimensions("weights and velocity disagree in shape")

    @classmethod
    def zeros(cls, num_labels: int) -> "ToyModel":
        return cls(np.zeros((num_labels, FEATURE_COUNT)),
                   np.zeros((num_labels, FEATURE_COUNT)))

    @property
    def num_labels(self) -> int:
        return self.weights.shape[0]


def predict(model: ToyModel, img: RgbImage) -> ScoreMap:
    """Per-pixel softmax over class scores w_l . phi(z_i)."""
    logits = color_features(img.pixels) @ model.weights.T
    logits -= logits.max(axis=2, keepdims=True)
    e = np.exp(logits)
    return ScoreMap(e / e.sum(axis=2, keepdims=True))


@dataclass(frozen=True)
class ToyTrainConfig:
    """Optimizer settings; the batch is always the frames of one shot.

    ``decay_every``/``decay_factor`` expose an optional step schedule
    (0 disables it); ``finetune_epochs`` > 0 appends a fine-tune pass on
    the best-overlapping shot per video with a raised prediction weight.
    """

    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    epochs: int = 5
    seed: int = 0
    decay_every: int = 0
    decay_factor: float = 0.1
    finetune_epochs: int = 0
    finetune_prediction_weight: float = 2.0
    overlap_threshold: float = 0.2

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0 or self.finetune_epochs < 0:
            raise ValueError("weight_decay and finetune_epochs must be >= 0")


def batch_loss(model: ToyModel, batch, cw: ClassWeights) -> float:
    """Mean per-pixel weighted loss of (RgbImage, LabelMap) pairs."""
    total, pixels = 0.0, 0
    for img, labeling in batch:
        loss, _ = weighted_nll_loss(predict(model, img), labeling, cw)
        total += loss
        pixels += labeling.labels.size
    return total / pixels


def sgd_step(model: ToyModel, batch, cw: ClassWeights, cfg: ToyTrainConfig,
             learning_rate: float | None = None) -> ToyModel:
    """One momentum-SGD update of the model on a batch of labeled frames.

    ``batch`` is a list of (RgbImage, LabelMap) pairs. The gradient is the
    mean over all pixels of the batch of the weighted loss pulled back
    through the feature map, plus L2 weight decay. The update follows the
    classic momentum form v <- mu v - lr (grad + wd w); w <- w + v, so with
    momentum and decay zero it is exactly w - lr grad.
    """
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    grad = np.zeros_like(model.weights)
    pixels = 0
    for img, labeling in batch:
        _, g = weighted_nll_loss(predict(model, img), labeling, cw)
        phi = color_features(img.pixels).reshape(-1, FEATURE_COUNT)
        grad += g.reshape(-1, model.num_labels).T @ phi
        pixels += labeling.labels.size
    if pixels == 0:
        return model
    grad /= pixels
    velocity = cfg.momentum * model.velocity - lr * (grad + cfg.weight_decay
                                                     * model.weights)
    return ToyModel(model.weights + velocity, velocity)


def save_model(model: ToyModel, path) -> None:
    """Write an MTM1 checkpoint: "MTM1 <classes> <features>\\n" then the
    weights as float32 little-endian, row-major. Velocity is not saved."""
    header = b"MTM1 %d %d\n" % (model.num_labels, FEATURE_COUNT)
    Path(path).write_bytes(header + model.weights.astype("<f4").tobytes())


def load_model(path) -> ToyModel:
    """Read an MTM1 checkpoint; the momentum state starts at zero."""
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise TruncatedFile(f"{path}: no header line")
    fields = data[:newline].split()
    if not fields or fields[0] != _MODEL_MAGIC:
        raise BadMagic(f"{path}: expected MTM1 header")
    if len(fields) != 3:
        raise BadMagic(f"{path}: header needs 'MTM1 classes features'")
    try:
        classes, features = int(fields[1]), int(fields[2])
    except ValueError as e:
        raise BadMagic(f"{path}: non-integer header field") from e
    if classes < 2 or features != FEATURE_COUNT:
        raise BadDimensions(f"{path}: bad shape {classes}x{features}")
    payload = data[newline + 1:]
    need = classes * features * 4
    if len(payload) != need:
        raise SizeMismatch(f"{path}: payload has {len(payload)} of {need} bytes")
    weights = np.frombuffer(payload, dtype="<f4").reshape(classes, features)
    return ToyModel(weights.astype(np.float64), np.zeros((classes, features)))


# ---------------------------------------------------------------------------
# Alternating training loop


def _load_shot(manifest, shot):
    frames = shot_frames(shot)
    imgs = [read_image(manifest.resolve(f.image_path)) for f in frames]
    masks = [read_mask(manifest.resolve(f.motion_mask_path)) for f in frames]
    return imgs, masks


def _label_counts(manifest: DatasetManifest) -> dict:
    """Frames per object label over the frames each shot actually uses."""
    counts = {l: 0 for l in manifest.label_set.object_labels}
    for v in manifest.videos:
        used = sum(len(shot_frames(s)) for s in v.shots)
        for name in v.weak_labels:
            counts[manifest.label_set.index(name)] += used
    return counts


def _weak_indices(label_set: LabelSet, video) -> tuple:
    return tuple(label_set.index(name) for name in video.weak_labels)


def train_loop(manifest: DatasetManifest, params: InferenceParams,
               cfg: ToyTrainConfig, model: ToyModel | None = None) -> ToyModel:
    """Alternate label inference and SGD updates over a prepared manifest.

    Per epoch, per shot: predict score maps with the current model, infer
    latent labels from motion and predictions, then take one SGD step on
    the shot. Shot order is reshuffled each epoch from ``cfg.seed``. Loss
    weights come from per-label frame counts over the sampled frames, so
    every category of the manifest must appear in at least one video.

    With ``cfg.finetune_epochs`` > 0, the best-overlapping shot of each
    video (mean motion/prediction overlap at least the threshold) is
    selected and training continues on those shots only, with the
    prediction weight raised to ``cfg.finetune_prediction_weight``.

    An empty manifest returns the model unchanged.
    """
    if model is None:
        model = ToyModel.zeros(len(manifest.label_set))
    if model.num_labels != len(manifest.label_set):
        raise BadDimensions(
            f"model has {model.num_labels} classes, manifest "
            f"{len(manifest.label_set)}")
    shots = [(v, s) for v in manifest.videos for s in v.shots]
    if not shots:
        return model
    counts = _label_counts(manifest)
    dead = sorted(l for l, c in counts.items() if c == 0)
    if dead:
        names = [manifest.label_set.categories[l] for l in dead]
        raise ZeroCount(f"categories without any frame: {names}")
    cw = class_weights(counts, num_labels=len(manifest.label_set))

    cache = {id(s): _load_shot(manifest, s) for _, s in shots}
    rng = np.random.default_rng(cfg.seed)

    def run_epochs(epochs, shot_list, infer_params):
        nonlocal model
        for epoch in range(epochs):
            lr = cfg.learning_rate
            if cfg.decay_every > 0:
                lr *= cfg.decay_factor ** (epoch // cfg.decay_every)
            order = rng.permutation(len(shot_list))
            for i in order:
                video, shot = shot_list[i]
                imgs, masks = cache[id(shot)]
                scores = [predict(model, img) for img in imgs]
                labels = infer_labels(list(zip(imgs, masks, scores)),
                                      _weak_indices(manifest.label_set, video),
                                      infer_params)
                model = sgd_step(model, list(zip(imgs, labels)), cw, cfg, lr)

    run_epochs(cfg.epochs, shots, params)

    if cfg.finetune_epochs > 0:
        overlaps = {}
        for video, shot in shots:
            imgs, masks = cache[id(shot)]
            predicted = [argmax_labels(predict(model, img)) for img in imgs]
            overlaps.setdefault(video.video_id, {})[shot.shot_id] = (
                shot_overlap(masks, predicted))
        picks = select_finetune_shots(overlaps, cfg.overlap_threshold)
        chosen = [(v, s) for v, s in shots
                  if picks.get(v.video_id) == s.shot_id]
        if chosen:
            run_epochs(cfg.finetune_epochs, chosen,
                       params.finetune_mode(cfg.finetune_prediction_weight))
    return model
