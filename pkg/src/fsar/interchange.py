"""Binary interchange files: frame features (STARFT01) and checkpoints
(STARCK01).

Feature files carry f32 data (converted to f64 on load); checkpoints carry
the full-precision f64 parameter tensors and a config snapshot, and
round-trip byte-identically.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .attention import TextBank, TextEntry
from .autodiff import tree_flatten, tree_unflatten
from .errors import ConfigurationError, InconsistencyError
from .synthetic import Dataset, Video

FEATURE_MAGIC = b"STARFT01"
CHECKPOINT_MAGIC = b"STARCK01"
FORMAT_VERSION = 1


def _u32(x: int) -> bytes:
    return struct.pack("<I", x)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ConfigurationError("truncated file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def write_features(path, videos, classes) -> None:
    """Write a STARFT01 file.

    ``videos``: iterable of (video_id, class_id, F x D float array);
    ``classes``: iterable of (class_id, name, descriptor_text, D embedding).
    """
    videos = list(videos)
    classes = list(classes)
    if not videos:
        raise ConfigurationError("cannot write a feature file with no videos")
    F, D = np.asarray(videos[0][2]).shape
    blob = bytearray()
    blob += FEATURE_MAGIC
    blob += _u32(FORMAT_VERSION) + _u32(len(videos)) + _u32(F) + _u32(D)
    blob += _u32(len(classes))
    for class_id, name, desc, emb in classes:
        emb = np.asarray(emb, dtype="<f4")
        if emb.shape != (D,):
            raise InconsistencyError(
                f"class {class_id} embedding shape {emb.shape}, expected ({D},)")
        nb, db = name.encode("utf-8"), desc.encode("utf-8")
        blob += _u32(class_id) + _u32(len(nb)) + nb + _u32(len(db)) + db
        blob += emb.tobytes()
    for video_id, class_id, feats in videos:
        feats = np.ascontiguousarray(feats, dtype="<f4")
        if feats.shape != (F, D):
            raise InconsistencyError(
                f"video {video_id} shape {feats.shape}, expected ({F}, {D})")
        blob += _u32(video_id) + _u32(class_id) + feats.tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def read_features(path):
    """Parse a STARFT01 file; returns (videos, classes) in writer terms."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(8) != FEATURE_MAGIC:
        raise ConfigurationError(f"{path}: not a STARFT01 file")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported feature format version {version}")
    num_videos, F, D, num_classes = r.u32(), r.u32(), r.u32(), r.u32()
    classes = []
    for _ in range(num_classes):
        class_id = r.u32()
        name = r.text()
        desc = r.text()
        emb = np.frombuffer(r.take(4 * D), dtype="<f4").astype(np.float64)
        classes.append((class_id, name, desc, emb))
    videos = []
    for _ in range(num_videos):
        video_id, class_id = r.u32(), r.u32()
        feats = np.frombuffer(r.take(4 * F * D), dtype="<f4")
        videos.append((video_id, class_id,
                       feats.astype(np.float64).reshape(F, D)))
    return videos, classes


def dataset_to_features(dataset: Dataset):
    """Writer-format tuples for a dataset, using the informative bank."""
    names = {e.class_id: f"action_{e.class_id}" for e
             in dataset.informative_bank.entries}
    classes = [(e.class_id, names[e.class_id], e.text, e.embedding)
               for e in dataset.informative_bank.entries]
    videos = [(v.video_id, v.class_id, v.features) for v in dataset.videos]
    return videos, classes


def load_dataset(path) -> Dataset:
    """Dataset from a feature file.

    The file's descriptors become the informative bank; a deterministic
    generic bank (random unit directions, template texts) is synthesized so
    that descriptor ablations stay runnable on file-backed data.
    """
    raw_videos, classes = read_features(path)
    D = classes[0][3].shape[0]
    informative = TextBank(
        entries=[TextEntry(cid, desc, emb) for cid, _, desc, emb in classes],
        source="llm-generated")
    rng = np.random.default_rng(0)
    dirs = rng.normal(0.0, 1.0, size=(len(classes), D))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    generic = TextBank(
        entries=[TextEntry(cid, f"a photo of {name}", dirs[i])
                 for i, (cid, name, _, _) in enumerate(classes)],
        source="template")
    videos = [Video(vid, cid, feats) for vid, cid, feats in raw_videos]
    return Dataset(videos, [c[0] for c in classes], informative, generic)


def save_checkpoint(path, params: dict, config: dict, step: int = 0) -> None:
    """Write a STARCK01 checkpoint: config snapshot plus named f64 tensors."""
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += _u32(FORMAT_VERSION) + _u32(step)
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    blob += _u32(len(cfg)) + cfg
    flat = tree_flatten(params)
    blob += _u32(len(flat))
    for name, arr in flat:
        # ascontiguousarray would promote 0-d tensors to 1-d
        arr = np.asarray(arr, dtype="<f8", order="C")
        nb = name.encode("utf-8")
        blob += _u32(len(nb)) + nb
        blob += _u32(arr.ndim)
        for ext in arr.shape:
            blob += _u32(ext)
        blob += arr.tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path):
    """Returns (params, config, step)."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(8) != CHECKPOINT_MAGIC:
        raise ConfigurationError(f"{path}: not a STARCK01 checkpoint")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {version}")
    step = r.u32()
    config = json.loads(r.text())
    pairs = []
    for _ in range(r.u32()):
        name = r.text()
        rank = r.u32()
        shape = tuple(r.u32() for _ in range(rank))
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(shape).copy()
        pairs.append((name, arr))
    return tree_unflatten(pairs), config, step
