"""Bit-exact readers and writers for frames, masks, labels, scores, manifests.

Formats (these are the package's wire contracts, see README for byte-level
examples):

* RGB frames:   binary PPM (``P6``), maxval 255.
* Masks/labels: binary PGM (``P5``), maxval 255. Masks must be 0/255 and map
  to 0/1; label files store the label index directly in the byte.
* Score maps:   ``MSF1`` - one ASCII header line
  ``"MSF1 <height> <width> <channels>\\n"`` followed by
  height*width*channels IEEE-754 float32 little-endian values, row-major,
  channel-last.
* Manifests:    JSON, schema documented on :func:`read_manifest`.

Writers emit canonical headers so that write(read(f)) is byte-identical to f
for canonical files.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BACKGROUND, LabelMap, LabelSet, MotionMask, RgbImage, ScoreMap
from .errors import (
    BadDimensions,
    BadMagic,
    EmptyShot,
    LabelOutOfRange,
    NonBinaryMask,
    SchemaError,
    SizeMismatch,
    TruncatedFile,
    UnknownLabel,
)

# ---------------------------------------------------------------------------
# PNM (PPM/PGM) plumbing


def _parse_pnm_header(data: bytes, magic: bytes, path):
    """Parse ``magic w h maxval`` allowing PNM whitespace and # comments.

    Returns (width, height, payload offset).
    """
    if not data.startswith(magic):
        raise BadMagic(f"{path}: expected {magic.decode()} file")
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise TruncatedFile(f"{path}: header ends early")
        c = data[pos:pos + 1]
        if c == b"#":  # comment runs to end of line
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise BadMagic(f"{path}: unexpected byte {c!r} in header")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise BadDimensions(f"{path}: nonpositive dimensions {width}x{height}")
    if maxval != 255:
        raise BadMagic(f"{path}: only maxval 255 is supported, got {maxval}")
    # exactly one whitespace byte separates header and payload
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise TruncatedFile(f"{path}: missing header/payload separator")
    return width, height, pos + 1


def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, offset = _parse_pnm_header(data, magic, path)
    need = width * height * channels
    payload = data[offset:]
    if len(payload) < need:
        raise TruncatedFile(f"{path}: payload has {len(payload)} of {need} bytes")
    if len(payload) > need:
        raise SizeMismatch(f"{path}: {len(payload) - need} trailing bytes")
    raw = np.frombuffer(payload, dtype=np.uint8, count=need)
    shape = (height, width, channels) if channels > 1 else (height, width)
    return raw.reshape(shape)


def _write_pnm(path, magic: bytes, raw: np.ndarray) -> None:
    height, width = raw.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (width, height)
    Path(path).write_bytes(header + raw.astype(np.uint8).tobytes())


def read_image(path) -> RgbImage:
    """Read a binary PPM (P6, maxval 255) frame."""
    return RgbImage.from_bytes(_read_pnm(path, b"P6", 3))


def write_image(img: RgbImage, path) -> None:
    raw = np.rint(img.pixels * 255.0).astype(np.uint8)
    _write_pnm(path, b"P6", raw)


def read_mask(path) -> MotionMask:
    """Read a binary PGM mask; pixels must be exactly 0 or 255."""
    raw = _read_pnm(path, b"P5", 1)
    bad = ~np.isin(raw, (0, 255))
    if bad.any():
        r, c = np.unravel_index(int(np.argmax(bad)), raw.shape)
        raise NonBinaryMask(f"{path}: value {raw[r, c]} at (row={r}, col={c})")
    return MotionMask((raw == 255).astype(np.uint8))


def write_mask(mask: MotionMask, path) -> None:
    _write_pnm(path, b"P5", mask.mask * np.uint8(255))


def read_labels(path, num_labels: int) -> LabelMap:
    """Read a PGM label map; every byte must be < ``num_labels``."""
    raw = _read_pnm(path, b"P5", 1)
    if raw.size and int(raw.max()) >= num_labels:
        r, c = np.unravel_index(int(np.argmax(raw >= num_labels)), raw.shape)
        raise LabelOutOfRange(
            f"{path}: label {raw[r, c]} at (row={r}, col={c}), have {num_labels}")
    return LabelMap(raw.astype(np.int32))


def write_labels(labels: LabelMap, path) -> None:
    if labels.labels.size and int(labels.labels.max()) > 255:
        raise LabelOutOfRange("PGM label maps support at most 256 labels")
    _write_pnm(path, b"P5", labels.labels.astype(np.uint8))


# ---------------------------------------------------------------------------
# MSF1 score tensors

_MSF_MAGIC = b"MSF1"


def read_scores(path) -> ScoreMap:
    """Read an MSF1 score tensor; the float32 payload round-trips bit-exactly."""
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise TruncatedFile(f"{path}: no header line")
    fields = data[:newline].split()
    if not fields or fields[0] != _MSF_MAGIC:
        raise BadMagic(f"{path}: expected MSF1 header")
    if len(fields) != 4:
        raise BadMagic(f"{path}: header needs 'MSF1 h w c', got {len(fields)} fields")
    try:
        height, width, channels = (int(x) for x in fields[1:])
    except ValueError as e:
        raise BadMagic(f"{path}: non-integer header field") from e
    if height < 1 or width < 1 or channels < 1:
        raise BadDimensions(f"{path}: bad shape {height}x{width}x{channels}")
    payload = data[newline + 1:]
    need = height * width * channels * 4
    if len(payload) != need:
        raise SizeMismatch(f"{path}: payload has {len(payload)} of {need} bytes")
    raw = np.frombuffer(payload, dtype="<f4").reshape(height, width, channels)
    return ScoreMap(raw.astype(np.float64))


def write_scores(scores: ScoreMap, path) -> None:
    header = b"MSF1 %d %d %d\n" % (scores.height, scores.width, scores.channels)
    payload = scores.scores.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# Dataset manifest


@dataclass(frozen=True)
class FrameRecord:
    image_path: str
    motion_mask_path: str
    score_map_path: str | None = None
    ground_truth_label_path: str | None = None
    ground_truth_box: tuple | None = None  # (x_min, y_min, x_max, y_max)


@dataclass(frozen=True)
class ShotRecord:
    shot_id: str
    frames: tuple
    kept_range: tuple | None = None       # (start, stop), set by pruning
    sampled_indices: tuple | None = None  # set by frame sampling


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    weak_labels: tuple  # category names, never background
    shots: tuple


@dataclass(frozen=True)
class DatasetManifest:
    videos: tuple
    label_set: LabelSet
    base_dir: Path = field(default_factory=Path)

    def resolve(self, rel) -> Path:
        """Resolve a manifest-relative path against the manifest directory."""
        return self.base_dir / rel


def _require(cond, msg):
    if not cond:
        raise SchemaError(msg)


def _parse_frame(obj, where) -> FrameRecord:
    _require(isinstance(obj, dict), f"{where}: frame must be an object")
    _require("image_path" in obj, f"{where}: missing image_path")
    _require("motion_mask_path" in obj, f"{where}: missing motion_mask_path")
    box = obj.get("ground_truth_box")
    if box is not None:
        _require(isinstance(box, (list, tuple)) and len(box) == 4,
                 f"{where}: ground_truth_box must have 4 coordinates")
        box = tuple(int(v) for v in box)
    return FrameRecord(
        image_path=str(obj["image_path"]),
        motion_mask_path=str(obj["motion_mask_path"]),
        score_map_path=obj.get("score_map_path"),
        ground_truth_label_path=obj.get("ground_truth_label_path"),
        ground_truth_box=box,
    )


def parse_manifest(doc: dict, base_dir=".") -> DatasetManifest:
    """Validate a manifest dict; see :func:`read_manifest` for the schema."""
    _require(isinstance(doc, dict), "manifest must be a JSON object")
    _require("videos" in doc and isinstance(doc["videos"], list),
             "manifest needs a 'videos' list")

    weak = []
    videos = []
    for vi, vobj in enumerate(doc["videos"]):
        where = f"videos[{vi}]"
        _require(isinstance(vobj, dict), f"{where}: must be an object")
        _require("video_id" in vobj, f"{where}: missing video_id")
        labels = vobj.get("weak_labels")
        _require(isinstance(labels, list), f"{where}: weak_labels must be a list")
        if not labels:
            raise UnknownLabel(f"{where}: weak_labels must be nonempty")
        if BACKGROUND in labels:
            raise UnknownLabel(f"{where}: background cannot be a weak label")
        _require(isinstance(vobj.get("shots"), list), f"{where}: shots must be a list")
        shots = []
        for si, sobj in enumerate(vobj["shots"]):
            swhere = f"{where}.shots[{si}]"
            _require(isinstance(sobj, dict), f"{swhere}: must be an object")
            _require("shot_id" in sobj, f"{swhere}: missing shot_id")
            frames = sobj.get("frames")
            _require(isinstance(frames, list), f"{swhere}: frames must be a list")
            if not frames:
                raise EmptyShot(f"{swhere}: shot has no frames")
            kept = sobj.get("kept_range")
            if kept is not None:
                _require(len(kept) == 2 and 0 <= kept[0] < kept[1] <= len(frames),
                         f"{swhere}: bad kept_range")
                kept = (int(kept[0]), int(kept[1]))
            sampled = sobj.get("sampled_indices")
            if sampled is not None:
                sampled = tuple(int(i) for i in sampled)
                _require(all(0 <= i < len(frames) for i in sampled),
                         f"{swhere}: sampled index out of range")
            shots.append(ShotRecord(
                shot_id=str(sobj["shot_id"]),
                frames=tuple(_parse_frame(f, f"{swhere}.frames[{fi}]")
                             for fi, f in enumerate(frames)),
                kept_range=kept,
                sampled_indices=sampled,
            ))
        weak.extend(labels)
        videos.append(VideoRecord(
            video_id=str(vobj["video_id"]),
            weak_labels=tuple(str(x) for x in labels),
            shots=tuple(shots),
        ))

    categories = doc.get("categories")
    if categories is None:
        categories = sorted(set(weak))
    else:
        _require(isinstance(categories, list) and categories,
                 "categories must be a nonempty list")
        unknown = set(weak) - set(categories)
        if unknown:
            raise UnknownLabel(f"weak labels not in categories: {sorted(unknown)}")
        if BACKGROUND in categories:
            raise UnknownLabel("categories must not list the background class")
    return DatasetManifest(
        videos=tuple(videos),
        label_set=LabelSet.from_objects(categories),
        base_dir=Path(base_dir),
    )


def read_manifest(path) -> DatasetManifest:
    """Read and validate a dataset manifest.

    Schema::

        {
          "categories": ["car", ...],            # optional, fixes label order
          "videos": [
            {"video_id": str,
             "weak_labels": [category, ...],     # nonempty, no background
             "shots": [
               {"shot_id": str,
                "frames": [
                  {"image_path": str,
                   "motion_mask_path": str,
                   "score_map_path": str?,
                   "ground_truth_label_path": str?,
                   "ground_truth_box": [x_min, y_min, x_max, y_max]?},
                  ...],                          # nonempty, ordered by time
                "kept_range": [start, stop]?,    # written by `prune`
                "sampled_indices": [int, ...]?   # written by `sample`
               }, ...]}, ...]
        }

    Relative frame paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e
    return parse_manifest(doc, base_dir=path.parent)


def manifest_to_dict(m: DatasetManifest) -> dict:
    """Inverse of :func:`parse_manifest`, dropping unset optional fields."""
    videos = []
    for v in m.videos:
        shots = []
        for s in v.shots:
            frames = []
            for f in s.frames:
                fo = {"image_path": f.image_path,
                      "motion_mask_path": f.motion_mask_path}
                if f.score_map_path is not None:
                    fo["score_map_path"] = f.score_map_path
                if f.ground_truth_label_path is not None:
                    fo["ground_truth_label_path"] = f.ground_truth_label_path
                if f.ground_truth_box is not None:
                    fo["ground_truth_box"] = list(f.ground_truth_box)
                frames.append(fo)
            so = {"shot_id": s.shot_id, "frames": frames}
            if s.kept_range is not None:
                so["kept_range"] = list(s.kept_range)
            if s.sampled_indices is not None:
                so["sampled_indices"] = list(s.sampled_indices)
            shots.append(so)
        videos.append({"video_id": v.video_id,
                       "weak_labels": list(v.weak_labels),
                       "shots": shots})
    return {"categories": list(m.label_set.categories[1:]), "videos": videos}


def write_manifest(m: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(m), indent=2) + "\n")
