"""Problem ingestion, result emission and the evaluation metrics.

File formats owned by the batch front end:

* unaries: CSV (one pixel per row, one label per column) or raw little-endian
  float32 with a 12-byte header (magic ``UNRY``, uint32 pixel count, uint32
  label count);
* superpixel maps: single-channel 16-bit PNG or CSV of segment ids, id 0
  meaning unassigned;
* labelings: CSV grid of label indices plus a palette PNG;
* energy traces: CSV with (iteration, seconds, discrete energy, objective);
* metrics: JSON with pixel accuracy and mean IoU, in percent.
"""

import csv
import json
import struct

import numpy as np
from PIL import Image

from .model import CrfModel

UNARY_MAGIC = b"UNRY"


def read_image(path):
    """Load an image as H x W x 3 float64 RGB in [0, 255]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.float64)


def write_image(path, array):
    Image.fromarray(np.asarray(array).astype(np.uint8), mode="RGB").save(path)


def read_unaries(path):
    path = str(path)
    if path.endswith(".csv"):
        try:
            data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ValueError(f"{path}: malformed unary CSV ({exc})") from exc
        return data
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != UNARY_MAGIC:
            raise ValueError(f"{path}: not a unary file (bad magic at offset 0)")
        n, m = struct.unpack("<II", header[4:12])
        payload = np.frombuffer(fh.read(), dtype="<f4")
        if payload.size != n * m:
            raise ValueError(
                f"{path}: expected {n * m} float32 values after the header, "
                f"found {payload.size}"
            )
        return payload.astype(np.float64).reshape(n, m)


def write_unaries(path, unaries, binary=None):
    path = str(path)
    unaries = np.asarray(unaries, dtype=np.float64)
    if binary is None:
        binary = not path.endswith(".csv")
    if binary:
        n, m = unaries.shape
        with open(path, "wb") as fh:
            fh.write(UNARY_MAGIC + struct.pack("<II", n, m))
            fh.write(unaries.astype("<f4").tobytes())
    else:
        np.savetxt(path, unaries, delimiter=",", fmt="%.9g")


def read_superpixels(path, n_pixels=None):
    path = str(path)
    if path.endswith(".csv"):
        seg = np.loadtxt(path, delimiter=",", dtype=np.int64).reshape(-1)
    else:
        with Image.open(path) as img:
            seg = np.asarray(img, dtype=np.int64).reshape(-1)
    if n_pixels is not None and seg.shape[0] != n_pixels:
        raise ValueError(
            f"{path}: superpixel map has {seg.shape[0]} entries, expected {n_pixels}"
        )
    return seg


def write_superpixels(path, segments, shape):
    seg = np.asarray(segments, dtype=np.int64).reshape(shape)
    if seg.max(initial=0) > np.iinfo(np.uint16).max:
        raise ValueError("segment ids exceed the 16-bit range")
    Image.fromarray(seg.astype(np.uint16)).save(path)


def grid_superpixels(width, height, block):
    """Disjoint block x block tiles as segment ids; tiles under 3 pixels get 0."""
    if block < 2:
        raise ValueError("block must be at least 2")
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    tiles_x = -(-width // block)
    tile = (yy // block) * tiles_x + (xx // block) + 1
    seg = tile.ravel().astype(np.int64)
    ids, counts = np.unique(seg, return_counts=True)
    small = ids[counts < 3]
    seg[np.isin(seg, small)] = 0
    return seg


def label_palette(n_labels=256):
    """Deterministic colour table (bit-reversal colormap, one row per label)."""
    palette = np.zeros((n_labels, 3), dtype=np.uint8)
    for i in range(n_labels):
        r = g = b = 0
        cid = i
        for shift in range(8):
            r |= ((cid >> 0) & 1) << (7 - shift)
            g |= ((cid >> 1) & 1) << (7 - shift)
            b |= ((cid >> 2) & 1) << (7 - shift)
            cid >>= 3
        palette[i] = (r, g, b)
    return palette


def write_labeling(csv_path, png_path, labels, shape):
    labels = np.asarray(labels, dtype=np.int64).reshape(shape)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in labels:
            writer.writerow([int(v) for v in row])
    img = Image.fromarray(labels.astype(np.uint8), mode="P")
    img.putpalette(label_palette().ravel().tolist())
    img.save(png_path)


def read_labeling(csv_path):
    return np.loadtxt(csv_path, delimiter=",", dtype=np.int64, ndmin=2).reshape(-1)


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "seconds", "discrete_energy", "objective"])
        for iteration, seconds, energy, objective in trace.rows():
            writer.writerow([iteration, f"{seconds:.6f}", repr(energy), repr(objective)])


def write_metrics(path, accuracy, mean_iou):
    with open(path, "w") as fh:
        json.dump({"pixel_accuracy": accuracy, "mean_iou": mean_iou}, fh, indent=2)
        fh.write("\n")


def metrics(predicted, actual, ignore_label=-1):
    """Pixel accuracy and mean IoU in percent.

    Pixels whose ground-truth label equals ``ignore_label`` are excluded. IoU
    averages over the labels present in either labelling (ignored pixels
    aside).
    """
    predicted = np.asarray(predicted, dtype=np.int64).reshape(-1)
    actual = np.asarray(actual, dtype=np.int64).reshape(-1)
    if predicted.shape != actual.shape:
        raise ValueError("labelings differ in length")
    valid = actual != ignore_label
    if not valid.any():
        raise ValueError("no valid pixels to score")
    pred = predicted[valid]
    act = actual[valid]
    accuracy = 100.0 * float((pred == act).sum()) / pred.shape[0]
    ious = []
    for lbl in np.union1d(np.unique(pred), np.unique(act)):
        inter = float(((pred == lbl) & (act == lbl)).sum())
        union = float(((pred == lbl) | (act == lbl)).sum())
        ious.append(inter / union if union else 0.0)
    return accuracy, 100.0 * float(np.mean(ious))


def load_problem(image_path, unary_path, config, superpixel_path=None):
    """Assemble a model from the input files.

    Clique solvers take the superpixel map (or the grid generator configured
    through ``config.grid_block``); segments below the minimum region size are
    left out of the clique structure. Clique costs follow the colour-variance
    rule.
    """
    image = read_image(image_path)
    height, width = image.shape[:2]
    n = height * width
    unaries = read_unaries(unary_path)
    if unaries.shape[0] != n:
        raise ValueError(
            f"{unary_path}: {unaries.shape[0]} unary rows for {n} image pixels"
        )
    segments = None
    if config.uses_cliques:
        if superpixel_path is not None:
            segments = read_superpixels(superpixel_path, n)
        elif config.grid_block >= 2:
            segments = grid_superpixels(width, height, config.grid_block)
        else:
            raise ValueError(
                "clique solvers need a superpixel map or a grid block size"
            )
    model = CrfModel.from_image(
        image, unaries, config.kernels(), segments,
        gamma=config.gamma, eta=config.eta, min_region=config.min_region,
    )
    return model, (height, width)


def save_problem(dir_path, image, unaries, segments=None, truth=None):
    """Write a toy problem bundle; returns the paths written (test helper)."""
    import os

    paths = {
        "image": os.path.join(dir_path, "image.png"),
        "unaries": os.path.join(dir_path, "unaries.csv"),
    }
    write_image(paths["image"], image)
    write_unaries(paths["unaries"], unaries)
    if segments is not None:
        paths["superpixels"] = os.path.join(dir_path, "superpixels.png")
        write_superpixels(paths["superpixels"], segments, image.shape[:2])
    if truth is not None:
        paths["gt"] = os.path.join(dir_path, "gt.csv")
        with open(paths["gt"], "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in np.asarray(truth).reshape(image.shape[0], image.shape[1]):
                writer.writerow([int(v) for v in row])
    return paths
