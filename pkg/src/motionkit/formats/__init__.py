"""Mocap format parsers, writers, and file-level load/save helpers."""

from __future__ import annotations

import dataclasses
from pathlib import Path

from ..errors import ParseError
from ..skeleton import MotionClip, Skeleton
from .asfamc import AsfBone, parse_amc, parse_asf
from .bvh import parse_bvh, write_bvh
from .canonical import from_canonical, skeleton_fingerprint, to_canonical

__all__ = [
    "AsfBone",
    "parse_bvh",
    "write_bvh",
    "parse_asf",
    "parse_amc",
    "to_canonical",
    "from_canonical",
    "skeleton_fingerprint",
    "load_clip",
    "save_clip",
    "find_asf_for",
    "CLIP_EXTENSIONS",
]

# extensions load_clip understands; .asf loads as a zero-frame clip
CLIP_EXTENSIONS = (".bvh", ".canon", ".amc", ".asf")


def find_asf_for(amc_path: Path) -> Path:
    """The skeleton file an .amc uses: the unique .asf in its directory."""
    candidates = sorted(amc_path.parent.glob("*.asf"))
    if not candidates:
        raise ParseError("no .asf skeleton file in the directory", path=str(amc_path))
    if len(candidates) > 1:
        names = ", ".join(c.name for c in candidates)
        raise ParseError(f"ambiguous skeleton: multiple .asf files ({names})", path=str(amc_path))
    return candidates[0]


def load_clip(path: str | Path, frame_time: float | None = None) -> tuple[Skeleton, MotionClip]:
    """Load any supported clip file, dispatching on extension.

    ``frame_time`` overrides the file's frame time when given (the only way
    to set a rate for .amc input beyond the 1/120 s default).
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in CLIP_EXTENSIONS:
        raise ParseError(f"unsupported clip extension {suffix!r}", path=str(path))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror or exc}", path=str(path)) from None
    except UnicodeDecodeError:
        raise ParseError("file is not valid UTF-8", path=str(path)) from None

    if suffix == ".bvh":
        skeleton, clip = parse_bvh(text)
    elif suffix == ".canon":
        skeleton, clip = from_canonical(text)
    elif suffix == ".amc":
        asf_path = find_asf_for(path)
        skeleton, bones = parse_asf(asf_path.read_text(encoding="utf-8"))
        clip = parse_amc(text, skeleton, bones, frame_time=frame_time or 1.0 / 120.0)
        return skeleton, clip
    else:  # .asf: skeleton only, empty clip at the format's default rate
        skeleton, _ = parse_asf(text)
        clip = MotionClip(skeleton, frame_time or 1.0 / 120.0, ())
        return skeleton, clip

    if frame_time is not None and frame_time != clip.frame_time:
        clip = dataclasses.replace(clip, frame_time=frame_time)
    return skeleton, clip


def save_clip(path: str | Path, skeleton: Skeleton, clip: MotionClip) -> None:
    """Write a clip as .bvh or .canon, dispatching on extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".bvh":
        text = write_bvh(skeleton, clip)
    elif suffix == ".canon":
        text = to_canonical(skeleton, clip)
    else:
        raise ValueError(f"unsupported output extension {suffix!r} (use .bvh or .canon)")
    path.write_text(text, encoding="utf-8")
