#!/usr/bin/env python3
"""Check that an exported dataset can be consumed by a training loader.

Validates manifest.json and every annotation file against the schemas in
../schema, then enumerates (frame, label) pairs the way a clip classifier
would and decodes the images.

    python3 tools/dataset_smoke.py path/to/dataset
"""
import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from PIL import Image

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schema"
LABELS = {"non_violent": 0, "violent": 1}


def load_validator(name):
    schema = json.loads((SCHEMA_DIR / name).read_text())
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def enumerate_samples(root, manifest):
    """Yield (split, clip_dir, frame_index, class_id) for every frame."""
    for clip in manifest["clips"]:
        clip_dir = root / clip["split"] / clip["label"] / clip["id"]
        for i in range(clip["frames"]):
            yield clip["split"], clip_dir, i, LABELS[clip["label"]]


def check_frame(clip_dir, i, ann_validator):
    rgb = np.asarray(Image.open(clip_dir / f"frame_{i:05d}.ppm"))
    seg = np.asarray(Image.open(clip_dir / f"seg_{i:05d}.ppm"))
    depth = np.asarray(Image.open(clip_dir / f"depth_{i:05d}.pgm"))
    h, w = rgb.shape[:2]
    if rgb.shape != (h, w, 3) or seg.shape != rgb.shape or depth.shape != (h, w):
        raise ValueError(f"{clip_dir.name}/{i}: pass shapes disagree {rgb.shape} {seg.shape} {depth.shape}")
    ann = json.loads((clip_dir / f"ann_{i:05d}.json").read_text())
    ann_validator.validate(ann)
    for b in ann["boxes"]:
        if not (b["x_min"] <= b["x_max"] < w and b["y_min"] <= b["y_max"] < h):
            raise ValueError(f"{clip_dir.name}/{i}: box out of frame {b}")
    return len(ann["boxes"])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset", type=Path)
    args = ap.parse_args()

    manifest = json.loads((args.dataset / "manifest.json").read_text())
    load_validator("manifest.schema.json").validate(manifest)
    ann_validator = load_validator("annotation.schema.json")

    frames = Counter()
    boxes = 0
    for split, clip_dir, i, cls in enumerate_samples(args.dataset, manifest):
        boxes += check_frame(clip_dir, i, ann_validator)
        frames[(split, cls)] += 1

    clips = Counter((c["split"], c["label"]) for c in manifest["clips"])
    print(f"ok clips={len(manifest['clips'])} frames={sum(frames.values())} boxes={boxes}")
    for (split, label), n in sorted(clips.items()):
        print(f"  {split:5} {label:11} clips={n} frames={frames[(split, LABELS[label])]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
