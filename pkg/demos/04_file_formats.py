"""
On-disk formats: PPM frames, PGM maps, MSF1 scores, MTM1 checkpoints
====================================================================

Every artifact the library reads or writes is a small, documented binary
format. This script writes one of each, shows the leading bytes, and
round-trips them to demonstrate the formats are lossless.
"""

import tempfile
from pathlib import Path

import numpy as np

from motionseg.core import LabelMap, MotionMask, RgbImage, ScoreMap
from motionseg.io import (
    read_image,
    read_labels,
    read_manifest,
    read_mask,
    read_scores,
    write_image,
    write_labels,
    write_mask,
    write_scores,
)
from motionseg.predictor import ToyModel, load_model, save_model
from motionseg.synthetic import write_blob_dataset

out = Path(tempfile.mkdtemp(prefix="motionseg_demo4_"))
rng = np.random.default_rng(0)


def show(path, n=24):
    data = path.read_bytes()
    print(f"{path.name}: {len(data)} bytes, starts {data[:n]!r}")


# binary PPM (P6): 8-bit RGB frames in [0,1] float form in memory
img = RgbImage(rng.random((4, 6, 3)))
write_image(img, out / "frame.ppm")
show(out / "frame.ppm")
again = read_image(out / "frame.ppm")
write_image(again, out / "frame2.ppm")
assert (out / "frame.ppm").read_bytes() == (out / "frame2.ppm").read_bytes()

# binary PGM (P5): motion masks use 0/255, label maps small ints per pixel
write_mask(MotionMask(rng.integers(0, 2, (4, 6)).astype(np.uint8)),
           out / "mask.pgm")
show(out / "mask.pgm")
labels = LabelMap(rng.integers(0, 3, (4, 6)).astype(np.int32))
write_labels(labels, out / "labels.pgm")
assert np.array_equal(read_labels(out / "labels.pgm", 3).labels, labels.labels)

# MSF1: per-pixel score maps, float32 little-endian after one header line
raw = rng.random((4, 6, 3)) + 0.05
write_scores(ScoreMap(raw / raw.sum(axis=2, keepdims=True)), out / "s.msf")
show(out / "s.msf")
print(f"  read back shape {read_scores(out / 's.msf').scores.shape}")

# MTM1: toy model checkpoints, float32 weights after one header line
weights = rng.standard_normal((3, 10)).astype("<f4").astype(np.float64)
save_model(ToyModel(weights, np.zeros((3, 10))), out / "model.mtm")
show(out / "model.mtm")
assert np.array_equal(load_model(out / "model.mtm").weights, weights)

# JSON manifest: the dataset index every tool consumes
manifest_path = write_blob_dataset(out / "data", seed=0)
manifest = read_manifest(manifest_path)
print(f"manifest: {len(manifest.videos)} videos, categories "
      f"{manifest.label_set.categories}")
print(manifest_path.read_text()[:300], "...")
print(f"all artifacts under {out}")
