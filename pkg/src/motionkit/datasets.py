"""Dataset descriptors, discovery, windowing, splits, and normalization.

A dataset is a directory of clip files plus a small config file holding the
hyperparameters (one config per dataset, see ``configs/``). This module
turns that into fixed-length training windows: discover files, load clips,
flatten to channel matrices, unwrap rotation seams, cut windows, split
train/val deterministically, and normalize per channel.
"""

from __future__ import annotations

import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10
    import tomli as tomllib

from .channels import clip_to_matrix, rotation_channel_mask, unwrap_rotation_channels
from .errors import ParseError
from .formats import find_asf_for, load_clip
from .skeleton import Skeleton

log = logging.getLogger(__name__)

FORMATS = ("bvh", "asfamc", "canonical")
_FORMAT_EXTENSIONS = {"bvh": (".bvh",), "asfamc": (".amc",), "canonical": (".canon",)}


@dataclass(frozen=True)
class DatasetDescriptor:
    """Per-dataset hyperparameters, loaded from a config file."""

    name: str
    data_path: Path
    format: str
    window_length: int
    window_stride: int
    normalize: bool = True
    fps_override: float | None = None
    label_rule: dict[str, str] | None = None
    val_fraction: float = 0.0
    split_seed: int = 0

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.window_length < 2:
            raise ValueError("window_length must be >= 2")
        if self.window_stride < 1:
            raise ValueError("window_stride must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.fps_override is not None and not self.fps_override > 0:
            raise ValueError("fps_override must be positive")

    @property
    def frame_time_override(self) -> float | None:
        return None if self.fps_override is None else 1.0 / self.fps_override


_CONFIG_FIELDS = {
    "name": str,
    "data_path": str,
    "format": str,
    "window_length": int,
    "window_stride": int,
    "normalize": bool,
    "fps_override": (int, float),
    "label_rule": dict,
    "val_fraction": (int, float),
    "split_seed": int,
}
_REQUIRED_CONFIG_FIELDS = ("name", "data_path", "format", "window_length", "window_stride")


def load_descriptor(config_path: str | Path) -> DatasetDescriptor:
    """Load a dataset config file. Unknown fields are rejected.

    A relative ``data_path`` is resolved against the config file's
    directory, so configs can travel with their data.
    """
    config_path = Path(config_path)
    try:
        raw = tomllib.loads(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror or exc}", path=str(config_path)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"bad config syntax: {exc}", path=str(config_path)) from None

    for key, value in raw.items():
        expected = _CONFIG_FIELDS.get(key)
        if expected is None:
            raise ParseError(f"unknown field {key!r}", path=str(config_path))
        if not isinstance(value, expected) or isinstance(value, bool) and expected is not bool:
            raise ParseError(f"field {key!r} has the wrong type", path=str(config_path))
    for key in _REQUIRED_CONFIG_FIELDS:
        if key not in raw:
            raise ParseError(f"missing required field {key!r}", path=str(config_path))
    if "label_rule" in raw:
        for k, v in raw["label_rule"].items():
            if not isinstance(v, str):
                raise ParseError(f"label_rule[{k!r}] must be a string", path=str(config_path))

    data_path = Path(raw["data_path"])
    if not data_path.is_absolute():
        data_path = (config_path.parent / data_path).resolve()
    try:
        return DatasetDescriptor(
            name=raw["name"],
            data_path=data_path,
            format=raw["format"],
            window_length=raw["window_length"],
            window_stride=raw["window_stride"],
            normalize=raw.get("normalize", True),
            fps_override=float(raw["fps_override"]) if "fps_override" in raw else None,
            label_rule=dict(raw["label_rule"]) if "label_rule" in raw else None,
            val_fraction=float(raw.get("val_fraction", 0.0)),
            split_seed=raw.get("split_seed", 0),
        )
    except ValueError as exc:
        raise ParseError(str(exc), path=str(config_path)) from None


# --- discovery ---------------------------------------------------------------


def discover(descriptor: DatasetDescriptor) -> list[tuple[Path, str | None]]:
    """List the dataset's clip files with their labels.

    The listing is recursive and lexicographically sorted (by path relative
    to ``data_path``), so the result is deterministic across platforms.
    Labels come from ``label_rule`` applied to the first-level subdirectory
    name; files outside mapped subdirectories get no label.
    """
    root = descriptor.data_path
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory does not exist: {root}")
    extensions = _FORMAT_EXTENSIONS[descriptor.format]
    found = [
        p for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in extensions
    ]
    found.sort(key=lambda p: p.relative_to(root).as_posix())
    out: list[tuple[Path, str | None]] = []
    for path in found:
        label = None
        if descriptor.label_rule:
            parts = path.relative_to(root).parts
            if len(parts) > 1:
                label = descriptor.label_rule.get(parts[0])
        out.append((path, label))
    if descriptor.format == "asfamc":
        for path, _ in out:
            find_asf_for(path)  # fail early if any pairing is ambiguous
    return out


# --- normalization -----------------------------------------------------------

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and population standard deviation (clamped)."""

    means: tuple[float, ...]
    stds: tuple[float, ...]

    def __post_init__(self):
        if len(self.means) != len(self.stds):
            raise ValueError("means and stds must have equal length")
        if any(s < STD_FLOOR for s in self.stds):
            raise ValueError(f"stds must be clamped to >= {STD_FLOOR}")

    @classmethod
    def identity(cls, channel_count: int) -> "NormStats":
        return cls((0.0,) * channel_count, (1.0,) * channel_count)

    @property
    def channel_count(self) -> int:
        return len(self.means)

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (values - np.asarray(self.means)) / np.asarray(self.stds)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return values * np.asarray(self.stds) + np.asarray(self.means)


def compute_stats(windows) -> NormStats:
    """Per-channel mean and population std over training windows.

    Accepts a WindowSet or any iterable of channel matrices / (matrix,
    label) pairs. Stds are clamped to ``STD_FLOOR`` so constant channels
    stay invertible.
    """
    matrices = _matrices(windows)
    if not matrices:
        raise ValueError("cannot compute stats from zero windows")
    stacked = np.concatenate(matrices, axis=0)
    means = stacked.mean(axis=0)
    stds = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return NormStats(tuple(float(m) for m in means), tuple(float(s) for s in stds))


def _matrices(windows) -> list[np.ndarray]:
    if isinstance(windows, WindowSet):
        return [w for w, _ in windows.windows]
    out = []
    for item in windows:
        if isinstance(item, tuple):
            out.append(np.asarray(item[0], dtype=np.float64))
        else:
            out.append(np.asarray(item, dtype=np.float64))
    return out


def save_stats(path: str | Path, stats: NormStats) -> None:
    doc = {"version": 1, "means": list(stats.means), "stds": list(stats.stds)}
    Path(path).write_text(json.dumps(doc, allow_nan=False), encoding="utf-8")


def load_stats(path: str | Path) -> NormStats:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot load stats: {exc}", path=str(path)) from None
    if not isinstance(obj, dict) or obj.get("version") != 1:
        raise ParseError("stats file must be an object with version 1", path=str(path))
    means, stds = obj.get("means"), obj.get("stds")
    if not isinstance(means, list) or not isinstance(stds, list):
        raise ParseError("stats file needs 'means' and 'stds' arrays", path=str(path))
    try:
        return NormStats(tuple(float(m) for m in means), tuple(float(s) for s in stds))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad stats values: {exc}", path=str(path)) from None


# --- windowing and splitting -------------------------------------------------


def window(values: np.ndarray, length: int, stride: int, origin: str | None = None) -> list[np.ndarray]:
    """Cut a clip's channel matrix into fixed-length windows.

    Windows start at 0, stride, 2*stride, ... while start + length stays
    within the clip. Clips shorter than one window yield no windows; that
    is logged, not raised, so one short file cannot sink a dataset build.
    """
    if length < 2:
        raise ValueError("window length must be >= 2")
    if stride < 1:
        raise ValueError("window stride must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    frames = values.shape[0]
    if frames < length:
        log.warning(
            "clip%s has %d frames, shorter than window length %d; skipped",
            f" {origin}" if origin else "", frames, length,
        )
        return []
    return [values[start : start + length].copy() for start in range(0, frames - length + 1, stride)]


def split(items, val_fraction: float, split_seed: int):
    """Deterministic train/val partition.

    Items are sorted lexicographically (by string key), shuffled by a
    splitmix64-keyed Fisher-Yates, and the first ceil(n * val_fraction) go
    to validation. Same seed, same split, on any platform.
    """
    from .rng import SplitMix64

    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must be in [0, 1)")
    ordered = sorted(items, key=_sort_key)
    SplitMix64(split_seed).shuffle(ordered)
    n_val = math.ceil(len(ordered) * val_fraction)
    return ordered[n_val:], ordered[:n_val]


def _sort_key(item) -> str:
    if isinstance(item, tuple):
        return str(item[0])
    return str(item)


@dataclass(frozen=True)
class WindowSet:
    """Fixed-shape training examples cut from one dataset split."""

    skeleton: Skeleton
    windows: list[tuple[np.ndarray, str | None]]
    split: str = "train"

    def __post_init__(self):
        if self.split not in ("train", "val"):
            raise ValueError("split must be 'train' or 'val'")
        shape = None
        for values, _ in self.windows:
            if values.ndim != 2:
                raise ValueError("windows must be 2-D channel matrices")
            if shape is None:
                shape = values.shape
            elif values.shape != shape:
                raise ValueError(f"window shapes differ: {values.shape} vs {shape}")
            if values.shape[1] != self.skeleton.channel_count:
                raise ValueError("window channel count does not match the skeleton")

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def labels(self) -> list[str]:
        """Distinct labels present, sorted; unlabeled windows excluded."""
        return sorted({label for _, label in self.windows if label is not None})


@dataclass(frozen=True)
class DatasetBuild:
    """Everything the training pipeline needs from one dataset."""

    descriptor: DatasetDescriptor
    skeleton: Skeleton
    train: WindowSet
    val: WindowSet
    stats: NormStats
    frame_time: float


def build_window_sets(descriptor: DatasetDescriptor) -> DatasetBuild:
    """Discover, load, window, split, and normalize one dataset.

    The train/val split happens at clip level (windows from one file never
    straddle the split). Stats come from the training split only; when the
    descriptor disables normalization, identity stats are applied so the
    downstream model contract stays uniform.
    """
    files = discover(descriptor)
    if not files:
        raise ValueError(f"dataset {descriptor.name!r} has no clip files under {descriptor.data_path}")
    train_files, val_files = split(files, descriptor.val_fraction, descriptor.split_seed)

    skeleton: Skeleton | None = None
    frame_time: float | None = None
    mask = None

    def load_windows(file_list):
        nonlocal skeleton, frame_time, mask
        out = []
        for path, label in file_list:
            sk, clip = load_clip(path, frame_time=descriptor.frame_time_override)
            if skeleton is None:
                skeleton = sk
                frame_time = clip.frame_time
                mask = rotation_channel_mask(sk)
            elif not skeleton.same_structure(sk):
                raise ValueError(
                    f"{path}: skeleton structure differs from the rest of dataset {descriptor.name!r}"
                )
            values = unwrap_rotation_channels(clip_to_matrix(clip), mask)
            for w in window(values, descriptor.window_length, descriptor.window_stride, origin=str(path)):
                out.append((w, label))
        return out

    # load train first so the reference skeleton comes from the train split
    train_windows = load_windows(train_files)
    val_windows = load_windows(val_files)
    if not train_windows:
        raise ValueError(
            f"dataset {descriptor.name!r} produced no training windows "
            f"(window_length {descriptor.window_length} may exceed every clip)"
        )

    if descriptor.normalize:
        stats = compute_stats([w for w, _ in train_windows])
    else:
        stats = NormStats.identity(skeleton.channel_count)
    train_windows = [(stats.normalize(w), label) for w, label in train_windows]
    val_windows = [(stats.normalize(w), label) for w, label in val_windows]

    return DatasetBuild(
        descriptor=descriptor,
        skeleton=skeleton,
        train=WindowSet(skeleton, train_windows, "train"),
        val=WindowSet(skeleton, val_windows, "val"),
        stats=stats,
        frame_time=frame_time,
    )
