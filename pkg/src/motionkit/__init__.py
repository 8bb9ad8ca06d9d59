"""Skeleton animation toolkit.

Parse and write mocap clip files, fit label-conditioned autoregressive
models to pose channel data, sample new motion, and stream poses to a
renderer over a line-delimited TCP protocol.
"""

from .errors import MotionKitError, NumericalError, ParseError, ProtocolError
from .rotations import EULER_ORDERS, Rotation, axis_rotation, euler_to_quat, quat_mul, quat_to_euler
from .skeleton import Joint, MotionClip, Pose, Skeleton, forward_kinematics
from .channels import channel_layout, clip_to_matrix, matrix_to_clip, unwrap_rotation_channels
from .formats import (
    from_canonical,
    load_clip,
    parse_amc,
    parse_asf,
    parse_bvh,
    save_clip,
    skeleton_fingerprint,
    to_canonical,
    write_bvh,
)
from .datasets import (
    DatasetDescriptor,
    NormStats,
    WindowSet,
    build_window_sets,
    compute_stats,
    load_descriptor,
    load_stats,
    save_stats,
    window,
)
from .models import (
    ARModel,
    ConditionedModel,
    EvalReport,
    evaluate,
    fit,
    fit_conditioned,
    load,
    sample,
    save,
    select_best,
    train_on_dataset,
)
from .protocol import DEFAULT_PORT, PlaySummary, StreamServer, play, serve

__version__ = "0.1.0"

__all__ = [
    "MotionKitError",
    "NumericalError",
    "ParseError",
    "ProtocolError",
    "EULER_ORDERS",
    "Rotation",
    "axis_rotation",
    "euler_to_quat",
    "quat_mul",
    "quat_to_euler",
    "Joint",
    "MotionClip",
    "Pose",
    "Skeleton",
    "forward_kinematics",
    "channel_layout",
    "clip_to_matrix",
    "matrix_to_clip",
    "unwrap_rotation_channels",
    "from_canonical",
    "load_clip",
    "parse_amc",
    "parse_asf",
    "parse_bvh",
    "save_clip",
    "skeleton_fingerprint",
    "to_canonical",
    "write_bvh",
    "DatasetDescriptor",
    "NormStats",
    "WindowSet",
    "build_window_sets",
    "compute_stats",
    "load_descriptor",
    "load_stats",
    "save_stats",
    "window",
    "ARModel",
    "ConditionedModel",
    "EvalReport",
    "evaluate",
    "fit",
    "fit_conditioned",
    "load",
    "sample",
    "save",
    "select_best",
    "train_on_dataset",
    "DEFAULT_PORT",
    "PlaySummary",
    "StreamServer",
    "play",
    "serve",
    "__version__",
]
