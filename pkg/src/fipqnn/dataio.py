"""Fashion-MNIST ingestion, zero-pixel ternary features and prototype collapsing."""
from __future__ import annotations

import csv
import gzip
import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagicError, CountMismatchError, InvalidInputError, TruncatedFileError

log = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
COLUMN_GROUPS = ((0, 9), (9, 18), (18, 28))
DEFAULT_KEEP = (4, 5)   # coat -> 0, sandal -> 1
SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class RawImage:
    pixels: np.ndarray   # (28, 28) uint8
    label: int


@dataclass
class ImageSet:
    """Images ``(N, rows, cols)`` uint8 with labels ``(N,)``."""

    images: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> RawImage:
        return RawImage(self.images[i], int(self.labels[i]))


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_images(buf: bytes) -> np.ndarray:
    if len(buf) < 16:
        raise TruncatedFileError("image header shorter than 16 bytes")
    magic, n, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != IMAGE_MAGIC:
        raise BadMagicError(f"image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")
    need = n * rows * cols
    if len(buf) - 16 < need:
        raise TruncatedFileError(f"image payload has {len(buf) - 16} bytes, header promises {need}")
    return np.frombuffer(buf, dtype=np.uint8, count=need, offset=16).reshape(n, rows, cols)


def _parse_labels(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise TruncatedFileError("label header shorter than 8 bytes")
    magic, n = struct.unpack(">II", buf[:8])
    if magic != LABEL_MAGIC:
        raise BadMagicError(f"label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")
    if len(buf) - 8 < n:
        raise TruncatedFileError(f"label payload has {len(buf) - 8} bytes, header promises {n}")
    return np.frombuffer(buf, dtype=np.uint8, count=n, offset=8)


def load_idx(images_path, labels_path) -> ImageSet:
    """Parse an IDX image/label pair (optionally gzip-compressed)."""
    images = _parse_images(_read_bytes(images_path))
    labels = _parse_labels(_read_bytes(labels_path))
    if len(images) != len(labels):
        raise CountMismatchError(f"{len(images)} images but {len(labels)} labels")
    return ImageSet(images, labels)


def idx_bytes(data: ImageSet) -> tuple[bytes, bytes]:
    """Serialize back to uncompressed IDX image and label payloads."""
    n, r, c = data.images.shape
    img = struct.pack(">IIII", IMAGE_MAGIC, n, r, c) + np.ascontiguousarray(data.images, dtype=np.uint8).tobytes()
    lab = struct.pack(">II", LABEL_MAGIC, n) + np.ascontiguousarray(data.labels, dtype=np.uint8).tobytes()
    return img, lab


def find_split(data_dir, split: str):
    """Paths of a split's image/label files, accepting ``.gz`` or plain names."""
    out = []
    for stem in SPLIT_FILES[split]:
        for cand in (Path(data_dir) / (stem + ".gz"), Path(data_dir) / stem):
            if cand.exists():
                out.append(cand)
                break
        else:
            raise FileNotFoundError(f"{stem}[.gz] not found in {data_dir}")
    return tuple(out)


def filter_classes(data: ImageSet, keep=DEFAULT_KEEP) -> ImageSet:
    """Keep the listed classes and relabel them ``0, 1, ...`` in ``keep`` order."""
    keep = list(keep)
    if not keep:
        raise InvalidInputError("keep-set is empty")
    mask = np.isin(data.labels, keep)
    remap = np.full(256, -1, dtype=np.int16)
    remap[keep] = np.arange(len(keep))
    return ImageSet(data.images[mask], remap[data.labels[mask]].astype(np.uint8))


def zero_counts(images) -> np.ndarray:
    """Zero pixels per column group, shape ``(N, 3)`` (a single image gives ``(3,)``)."""
    imgs = np.asarray(images)
    single = imgs.ndim == 2
    imgs = imgs[None] if single else imgs
    counts = np.stack([(imgs[:, :, a:b] == 0).sum(axis=(1, 2)) for a, b in COLUMN_GROUPS], axis=1)
    return counts[0] if single else counts


def ternary_codes(counts, thresholds) -> np.ndarray:
    counts = np.asarray(counts)
    th = np.asarray(thresholds, dtype=float)
    if np.any(th[:, 0] >= th[:, 1]):
        raise InvalidInputError("need t_low < t_high for every group")
    return (-1 + (counts >= th[:, 0]).astype(np.int8) + (counts >= th[:, 1]).astype(np.int8)).astype(np.int8)


def featurize(images, thresholds) -> np.ndarray:
    """Ternary features: -1 below ``t_low``, 0 in ``[t_low, t_high)``, +1 at or above ``t_high``."""
    return ternary_codes(zero_counts(images), thresholds)


def _rank_threshold(sorted_vals: np.ndarray, q_num: int, q_den: int):
    """Smallest value whose empirical CDF exceeds ``q_num / q_den``."""
    idx = min(len(sorted_vals) - 1, (q_num * len(sorted_vals)) // q_den)
    return sorted_vals[idx]


def tertile_thresholds(counts) -> list:
    """Per-group ``(t_low, t_high)`` at the lower and upper tertile (nearest rank)."""
    counts = np.atleast_2d(np.asarray(counts))
    if counts.shape[0] == 0:
        raise InvalidInputError("empty training subset")
    out = []
    for g in range(counts.shape[1]):
        v = np.sort(counts[:, g])
        lo, hi = _rank_threshold(v, 1, 3), _rank_threshold(v, 2, 3)
        if lo >= hi:
            if v[0] == v[-1]:
                log.warning("group %d: all counts equal %s, thresholds collapse", g, v[0])
            else:
                log.warning("group %d: tertiles coincide at %s", g, lo)
            lo, hi = lo - 0.5, lo + 0.5
        out.append((float(lo), float(hi)))
    return out


def _entropy(p):
    p = p[p > 0]
    return -(p * np.log(p)).sum()


def supervised_thresholds(counts, labels) -> list:
    """Per-group ``(t_low, t_high)`` maximizing mutual information with the label.

    Exhaustive over integer pairs; ties go to the lexicographically smallest
    pair. Uses training labels only.
    """
    counts = np.atleast_2d(np.asarray(counts)).astype(np.int64)
    labels = np.asarray(labels).astype(np.int64)
    if counts.shape[0] == 0:
        raise InvalidInputError("empty training subset")
    n = len(labels)
    n_cls = int(labels.max()) + 1
    out = []
    for g in range(counts.shape[1]):
        top = int(counts[:, g].max()) + 2
        hist = np.zeros((top, n_cls))
        np.add.at(hist, (counts[:, g], labels), 1)
        cum = np.vstack([np.zeros(n_cls), np.cumsum(hist, axis=0)])   # cum[t] = #(count < t)
        total = cum[-1]
        h_y = _entropy(total / n)
        best, best_pair = -np.inf, None
        for lo in range(1, top):
            a = cum[lo]
            his = np.arange(lo + 1, top + 1)
            b = cum[his] - a
            c = total - cum[his]
            cells = np.stack([np.broadcast_to(a, b.shape), b, c], axis=1) / n   # (pairs, 3, classes)
            px = cells.sum(axis=2)
            with np.errstate(divide="ignore", invalid="ignore"):
                h_cond = -np.nansum(np.where(cells > 0, cells * np.log(cells / px[:, :, None]), 0.0), axis=(1, 2))
            mi = h_y - h_cond
            k = int(np.argmax(mi))
            if mi[k] > best + 1e-12:
                best, best_pair = mi[k], (float(lo), float(his[k]))
        out.append(best_pair)
    return out


def fit_thresholds(counts, labels=None, method: str = "tertile") -> list:
    """Calibrate per-group thresholds on training zero-counts.

    ``tertile`` is label-free; ``supervised`` maximizes mutual information
    between the ternary code and the training label.
    """
    if method == "tertile":
        return tertile_thresholds(counts)
    if method == "supervised":
        if labels is None:
            raise InvalidInputError("supervised thresholds need labels")
        return supervised_thresholds(counts, labels)
    raise InvalidInputError(f"unknown threshold method {method!r}")


@dataclass(frozen=True)
class Prototype:
    features: tuple
    label: int
    weight: int
    n_pos: int


def prototypes(features, labels) -> list[Prototype]:
    """Collapse identical feature vectors; label by majority (ties -> 0), weight = count."""
    features = np.asarray(features)
    labels = np.asarray(labels).astype(int)
    groups: dict = {}
    for f, y in zip(map(tuple, features.tolist()), labels.tolist()):
        c = groups.setdefault(f, [0, 0])
        c[int(y != 0)] += 1
    out = []
    for f in sorted(groups):
        n0, n1 = groups[f]
        out.append(Prototype(f, int(n1 > n0), n0 + n1, n1))
    return out


def prototype_arrays(protos):
    X = np.array([p.features for p in protos], dtype=np.int64)
    y = np.array([p.label for p in protos], dtype=np.int64)
    w = np.array([p.weight for p in protos], dtype=np.int64)
    return X, y, w


def write_features_csv(path, X, y, w=None):
    w = np.ones(len(y), dtype=int) if w is None else w
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["f1", "f2", "f3", "label", "weight"])
        for row, lab, wt in zip(np.asarray(X).tolist(), np.asarray(y).tolist(), np.asarray(w).tolist()):
            wr.writerow([*row, lab, wt])


def read_features_csv(path):
    """Returns ``(X, y, w)`` integer arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    if head[-2:] != ["label", "weight"]:
        raise InvalidInputError(f"{path}: expected columns ending in label, weight")
    arr = np.array([[int(float(v)) for v in r] for r in body], dtype=np.int64).reshape(-1, len(head))
    return arr[:, :-2], arr[:, -2], arr[:, -1]


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_json(d: dict) -> str:
    return json.dumps(d, indent=2, sort_keys=True) + "\n"
