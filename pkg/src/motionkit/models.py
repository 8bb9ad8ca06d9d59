"""Label-conditioned autoregressive motion model.

Each channel is modeled independently as an AR(k) process in normalized
channel space: x_t = b + w_1 x_{t-1} + ... + w_k x_{t-k} + noise. Fitting is
closed-form ridge least squares (lambda = 1e-8, just enough to kill exact
singularities without biasing well-posed problems). A ConditionedModel holds
one ARModel per action label plus an unconditioned fallback.

Sampling rolls the recursion forward from seed frames, adds
temperature-scaled gaussian noise from the fixed splitmix64 / Box-Muller
generator, denormalizes, and re-encodes rotations as unit quaternions, so
every emitted pose is valid regardless of what the linear model produced.
"""

from __future__ import annotations

import logging
import math
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import clip_to_matrix, matrix_to_clip, rotation_channel_mask, unwrap_rotation_channels
from .datasets import DatasetBuild, DatasetDescriptor, NormStats, WindowSet, build_window_sets
from .errors import NumericalError, ParseError
from .formats import skeleton_fingerprint
from .rng import SplitMix64
from .skeleton import MotionClip, forward_kinematics

log = logging.getLogger(__name__)

RIDGE_LAMBDA = 1e-8


@dataclass(frozen=True, eq=False)
class ARModel:
    """One fitted AR(k) model over all channels.

    ``coefficients`` has shape (channel_count, order) with the newest lag
    first: column i holds the weight on x_{t-(i+1)}.
    """

    order: int
    channel_count: int
    coefficients: np.ndarray
    intercept: np.ndarray
    noise_std: np.ndarray
    skeleton_fingerprint: str
    norm_stats: NormStats
    trained_on: str = ""

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.coefficients.shape != (self.channel_count, self.order):
            raise ValueError("coefficients must have shape (channel_count, order)")
        if self.intercept.shape != (self.channel_count,):
            raise ValueError("intercept must have shape (channel_count,)")
        if self.noise_std.shape != (self.channel_count,):
            raise ValueError("noise_std must have shape (channel_count,)")
        if np.any(self.noise_std < 0):
            raise ValueError("noise_std must be >= 0")
        if self.norm_stats.channel_count != self.channel_count:
            raise ValueError("norm_stats length must match channel_count")
        for arr in (self.coefficients, self.intercept, self.noise_std):
            arr.setflags(write=False)


@dataclass(frozen=True, eq=False)
class ConditionedModel:
    """Per-label AR models sharing one skeleton, order, and normalization."""

    labels: dict[str, ARModel]
    fallback: ARModel | None = None

    def __post_init__(self):
        members = list(self.labels.values()) + ([self.fallback] if self.fallback else [])
        if not members:
            raise ValueError("conditioned model needs at least one member model")
        first = members[0]
        for m in members[1:]:
            if (
                m.order != first.order
                or m.channel_count != first.channel_count
                or m.skeleton_fingerprint != first.skeleton_fingerprint
            ):
                raise ValueError("member models must share order, channel_count, and skeleton")

    @property
    def order(self) -> int:
        return self._any().order

    @property
    def channel_count(self) -> int:
        return self._any().channel_count

    @property
    def skeleton_fingerprint(self) -> str:
        return self._any().skeleton_fingerprint

    @property
    def norm_stats(self) -> NormStats:
        return self._any().norm_stats

    def _any(self) -> ARModel:
        if self.fallback is not None:
            return self.fallback
        return next(iter(self.labels.values()))

    def resolve(self, label: str | None) -> ARModel:
        """The member model a given label selects (fallback when unknown)."""
        if label is not None and label in self.labels:
            return self.labels[label]
        if self.fallback is None:
            raise ValueError(f"unknown label {label!r} and the model has no fallback")
        return self.fallback


@dataclass(frozen=True)
class LabelMetrics:
    one_step_mse: float
    joint_position_error: float
    window_count: int


@dataclass(frozen=True)
class EvalReport:
    """Validation metrics: normalized one-step MSE and FK position error."""

    one_step_mse: float
    joint_position_error: float
    per_label: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.one_step_mse < 0 or self.joint_position_error < 0:
            raise ValueError("metrics must be >= 0")


# --- fitting -----------------------------------------------------------------


def fit(
    windows: WindowSet,
    order: int,
    *,
    stats: NormStats | None = None,
    trained_on: str = "",
) -> ARModel:
    """Fit per-channel AR(order) coefficients by ridge least squares.

    ``windows`` must already be in normalized channel space; ``stats`` is
    the transform that got them there (identity when omitted), carried on
    the model so sampling can invert it.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not windows.windows:
        raise ValueError("cannot fit on zero windows")
    length = windows.windows[0][0].shape[0]
    if length < order + 1:
        raise ValueError(f"windows of length {length} cannot support order {order} (need >= {order + 1})")
    channel_count = windows.skeleton.channel_count
    if stats is None:
        stats = NormStats.identity(channel_count)

    targets = []
    lag_blocks = []
    for values, _ in windows.windows:
        frames = values.shape[0]
        targets.append(values[order:])
        lag_blocks.append(
            np.stack([values[order - i : frames - i] for i in range(1, order + 1)], axis=1)
        )
    y = np.concatenate(targets, axis=0)  # (N, C)
    lags = np.concatenate(lag_blocks, axis=0)  # (N, order, C)

    coefficients = np.empty((channel_count, order))
    intercept = np.empty(channel_count)
    noise_std = np.empty(channel_count)
    ones = np.ones((y.shape[0], 1))
    eye = np.eye(order + 1)
    for c in range(channel_count):
        design = np.concatenate([lags[:, :, c], ones], axis=1)  # (N, order+1)
        gram = design.T @ design + RIDGE_LAMBDA * eye
        rhs = design.T @ y[:, c]
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"channel {c}: normal equations are singular ({exc})") from None
        if not np.all(np.isfinite(beta)):
            raise NumericalError(f"channel {c}: normal equations produced non-finite coefficients")
        coefficients[c] = beta[:order]
        intercept[c] = beta[order]
        noise_std[c] = float(np.std(y[:, c] - design @ beta))

    return ARModel(
        order=order,
        channel_count=channel_count,
        coefficients=coefficients,
        intercept=intercept,
        noise_std=noise_std,
        skeleton_fingerprint=skeleton_fingerprint(windows.skeleton),
        norm_stats=stats,
        trained_on=trained_on,
    )


def fit_conditioned(
    windows: WindowSet,
    order: int,
    *,
    stats: NormStats | None = None,
    trained_on: str = "",
) -> ConditionedModel:
    """Fit one ARModel per label plus a fallback on all windows.

    Unlabeled windows contribute to the fallback only.
    """
    label_names = windows.labels
    if not label_names:
        raise ValueError("no labeled windows; use fit for an unconditioned model")
    members: dict[str, ARModel] = {}
    for label in label_names:
        subset = WindowSet(
            windows.skeleton,
            [(w, lab) for w, lab in windows.windows if lab == label],
            windows.split,
        )
        try:
            members[label] = fit(subset, order, stats=stats, trained_on=trained_on)
        except (ValueError, NumericalError) as exc:
            raise type(exc)(f"label {label!r}: {exc}") from None
    fallback = fit(windows, order, stats=stats, trained_on=trained_on)
    return ConditionedModel(labels=members, fallback=fallback)


# --- prediction and evaluation -----------------------------------------------


def one_step_predictions(model: ARModel, values: np.ndarray) -> np.ndarray:
    """Teacher-forced one-step predictions for rows order..L-1.

    ``values`` is a normalized (L, C) window; the result has shape
    (L - order, C), row t predicting values[order + t] from true history.
    """
    k = model.order
    frames = values.shape[0]
    if frames < k + 1:
        raise ValueError(f"window of length {frames} cannot support order {k}")
    preds = np.tile(model.intercept, (frames - k, 1))
    for i in range(1, k + 1):
        preds += model.coefficients[:, i - 1] * values[k - i : frames - i]
    return preds


def evaluate(model, windows: WindowSet) -> EvalReport:
    """One-step MSE (normalized space) and FK joint-position error.

    For a ConditionedModel each window is scored by the model its label
    selects. Position error denormalizes the predicted and true next frames,
    rebuilds poses, and averages the global joint-position distance.
    """
    if not windows.windows:
        raise ValueError("cannot evaluate on zero windows")
    if model.skeleton_fingerprint != skeleton_fingerprint(windows.skeleton):
        raise ValueError("model was trained on a different skeleton")

    groups: dict = {}
    for values, label in windows.windows:
        member = model.resolve(label) if isinstance(model, ConditionedModel) else model
        sq_sum, sq_n, pos_sum, pos_n = groups.get(label, (0.0, 0, 0.0, 0))
        preds = one_step_predictions(member, values)
        truth = values[member.order :]
        sq_sum += float(np.sum((preds - truth) ** 2))
        sq_n += preds.size
        dist_sum, dist_n = _position_error(member, windows, preds, truth)
        pos_sum += dist_sum
        pos_n += dist_n
        groups[label] = (sq_sum, sq_n, pos_sum, pos_n)

    per_label = {}
    total = [0.0, 0, 0.0, 0]
    window_counts: dict = {}
    for _, label in windows.windows:
        window_counts[label] = window_counts.get(label, 0) + 1
    for label, (sq_sum, sq_n, pos_sum, pos_n) in groups.items():
        per_label[label] = LabelMetrics(
            one_step_mse=sq_sum / sq_n,
            joint_position_error=pos_sum / pos_n,
            window_count=window_counts[label],
        )
        total[0] += sq_sum
        total[1] += sq_n
        total[2] += pos_sum
        total[3] += pos_n
    return EvalReport(
        one_step_mse=total[0] / total[1],
        joint_position_error=total[2] / total[3],
        per_label=per_label,
    )


def _position_error(member: ARModel, windows: WindowSet, preds, truth):
    """Sum and count of per-joint FK distances between pred/true frames."""
    stats = member.norm_stats
    pred_clip = matrix_to_clip(windows.skeleton, stats.denormalize(preds), 1.0)
    true_clip = matrix_to_clip(windows.skeleton, stats.denormalize(truth), 1.0)
    dist_sum = 0.0
    count = 0
    for pred_pose, true_pose in zip(pred_clip.frames, true_clip.frames):
        pred_fk = forward_kinematics(windows.skeleton, pred_pose)
        true_fk = forward_kinematics(windows.skeleton, true_pose)
        for (p, _), (q, _) in zip(pred_fk, true_fk):
            dist_sum += math.dist(p, q)
            count += 1
    return dist_sum, count


def select_best(candidates):
    """Pick the model with minimal one-step MSE.

    Ties go to the lower order, then to the earlier list position.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate models")
    best_i = min(
        range(len(candidates)),
        key=lambda i: (candidates[i][1].one_step_mse, candidates[i][0].order, i),
    )
    return candidates[best_i][0]


# --- sampling ----------------------------------------------------------------


def sample(
    model,
    seed_clip: MotionClip,
    frames: int,
    *,
    temperature: float = 0.0,
    rng_seed: int = 0,
    label: str | None = None,
) -> MotionClip:
    """Generate new frames autoregressively after the seed clip.

    The rollout runs in normalized channel space; one gaussian is drawn per
    (step, channel) in order, from SplitMix64(rng_seed) through Box-Muller,
    so output is bit-reproducible for a fixed seed. Only the generated
    frames are returned (the seed is context, not output).
    """
    if frames < 0:
        raise ValueError("frames must be >= 0")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    member = model.resolve(label) if isinstance(model, ConditionedModel) else model
    if not isinstance(member, ARModel):
        raise TypeError("model must be an ARModel or ConditionedModel")
    if label is not None and not isinstance(model, ConditionedModel):
        raise ValueError(f"unknown label {label!r} and the model has no fallback")
    if member.skeleton_fingerprint != skeleton_fingerprint(seed_clip.skeleton):
        raise ValueError("seed clip skeleton does not match the model's skeleton")
    k = member.order
    if len(seed_clip.frames) < k:
        raise ValueError(f"seed clip has {len(seed_clip.frames)} frames, order {k} needs at least {k}")

    skeleton = seed_clip.skeleton
    mask = rotation_channel_mask(skeleton)
    seed_values = unwrap_rotation_channels(clip_to_matrix(seed_clip), mask)
    history = member.norm_stats.normalize(seed_values[-k:])

    rng = SplitMix64(rng_seed)
    channel_count = member.channel_count
    out = np.empty((frames, channel_count))
    buf = np.concatenate([history, out], axis=0)  # rows 0..k-1 are context
    for t in range(frames):
        row = member.intercept.copy()
        for i in range(1, k + 1):
            row += member.coefficients[:, i - 1] * buf[k + t - i]
        noise = np.fromiter(
            (rng.next_gaussian() for _ in range(channel_count)), dtype=np.float64, count=channel_count
        )
        row += temperature * member.noise_std * noise
        buf[k + t] = row
    generated = buf[k:]
    if not np.all(np.isfinite(generated)):
        raise NumericalError("sampling diverged to non-finite values (unstable model)")
    values = member.norm_stats.denormalize(generated)
    return matrix_to_clip(skeleton, values, seed_clip.frame_time, label=label)


# --- persistence -------------------------------------------------------------


def save(model, path: str | Path) -> None:
    """Write a model file (schema documented in the README)."""
    if isinstance(model, ARModel):
        doc = {"version": 1, "kind": "ar", **_encode_ar(model)}
    elif isinstance(model, ConditionedModel):
        # top-level per-channel fields hold the fallback (unconditioned) model
        shared = model._any()
        doc = {
            "version": 1,
            "kind": "conditioned",
            "order": model.order,
            "channel_count": model.channel_count,
            "skeleton_fingerprint": model.skeleton_fingerprint,
            "norm": _encode_norm(shared.norm_stats),
        }
        if model.fallback is not None:
            doc["channels"] = _encode_ar(model.fallback)["channels"]
            doc["trained_on"] = model.fallback.trained_on
        doc["labels"] = {label: _encode_ar(m) for label, m in sorted(model.labels.items())}
    else:
        raise TypeError("model must be an ARModel or ConditionedModel")
    Path(path).write_text(json.dumps(doc, allow_nan=False), encoding="utf-8")


def _encode_norm(stats: NormStats) -> dict:
    return {"means": [float(v) for v in stats.means], "stds": [float(v) for v in stats.stds]}


def _encode_ar(m: ARModel) -> dict:
    return {
        "order": m.order,
        "channel_count": m.channel_count,
        "skeleton_fingerprint": m.skeleton_fingerprint,
        "norm": _encode_norm(m.norm_stats),
        "channels": [
            {
                "coeffs": [float(v) for v in m.coefficients[c]],
                "intercept": float(m.intercept[c]),
                "noise_std": float(m.noise_std[c]),
            }
            for c in range(m.channel_count)
        ],
        "trained_on": m.trained_on,
    }


def load(path: str | Path):
    """Load a model file; returns ARModel or ConditionedModel."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read model file: {exc.strerror or exc}", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is truncated or not valid: {exc.msg}", path=str(path)) from None
    if not isinstance(obj, dict):
        raise ParseError("model file must hold an object", path=str(path))
    version = obj.get("version")
    if version != 1:
        raise ParseError(f"unsupported model file version {version!r} (expected 1)", path=str(path))
    kind = obj.get("kind")
    if kind == "ar":
        return _decode_ar(obj, str(path))
    if kind == "conditioned":
        labels = obj.get("labels")
        if not isinstance(labels, dict) or not labels:
            raise ParseError("labels: expected a non-empty object", path=str(path))
        members = {label: _decode_ar(entry, f"{path}:labels.{label}") for label, entry in labels.items()}
        # top-level channels, when present, decode as the fallback model
        fallback = _decode_ar(obj, f"{path}:fallback") if "channels" in obj else None
        try:
            return ConditionedModel(labels=members, fallback=fallback)
        except ValueError as exc:
            raise ParseError(str(exc), path=str(path)) from None
    raise ParseError(f"unknown model kind {kind!r}", path=str(path))


def _decode_ar(obj, where: str) -> ARModel:
    if not isinstance(obj, dict):
        raise ParseError("expected a model object", path=where)
    for key in ("order", "channel_count", "skeleton_fingerprint", "norm", "channels"):
        if key not in obj:
            raise ParseError(f"missing field {key!r}", path=where)
    order, channel_count = obj["order"], obj["channel_count"]
    if not isinstance(order, int) or not isinstance(channel_count, int):
        raise ParseError("order and channel_count must be integers", path=where)
    fingerprint = obj["skeleton_fingerprint"]
    if not isinstance(fingerprint, str) or not fingerprint:
        raise ParseError("skeleton_fingerprint must be a non-empty string", path=where)
    norm = obj["norm"]
    if not isinstance(norm, dict) or "means" not in norm or "stds" not in norm:
        raise ParseError("norm must hold means and stds", path=where)
    channels = obj["channels"]
    if not isinstance(channels, list) or len(channels) != channel_count:
        raise ParseError(f"channels must be a list of length {channel_count}", path=where)
    coefficients = np.empty((channel_count, order))
    intercept = np.empty(channel_count)
    noise_std = np.empty(channel_count)
    for c, entry in enumerate(channels):
        if not isinstance(entry, dict):
            raise ParseError(f"channels[{c}]: expected an object", path=where)
        coeffs = entry.get("coeffs")
        if not isinstance(coeffs, list) or len(coeffs) != order:
            raise ParseError(f"channels[{c}].coeffs must be a list of length {order}", path=where)
        try:
            coefficients[c] = [float(v) for v in coeffs]
            intercept[c] = float(entry["intercept"])
            noise_std[c] = float(entry["noise_std"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"channels[{c}]: bad values ({exc})", path=where) from None
    try:
        stats = NormStats(tuple(float(v) for v in norm["means"]), tuple(float(v) for v in norm["stds"]))
        return ARModel(
            order=order,
            channel_count=channel_count,
            coefficients=coefficients,
            intercept=intercept,
            noise_std=noise_std,
            skeleton_fingerprint=fingerprint,
            norm_stats=stats,
            trained_on=obj.get("trained_on", ""),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), path=where) from None


# --- the train pipeline used by the CLI --------------------------------------


@dataclass(frozen=True)
class TrainResult:
    model: object
    report: EvalReport
    candidates: list
    build: DatasetBuild


def train_on_dataset(descriptor: DatasetDescriptor, orders) -> TrainResult:
    """Full training pass: build windows, fit candidate orders, select best.

    Labeled datasets get a ConditionedModel, unlabeled a plain ARModel.
    With an empty validation split, candidates are scored on the training
    split instead (logged, since that weakens model selection).
    """
    orders = sorted(set(int(k) for k in orders))
    if not orders:
        raise ValueError("need at least one candidate order")
    build = build_window_sets(descriptor)
    eval_set = build.val
    if not eval_set.windows:
        log.warning(
            "dataset %s: empty validation split, scoring candidates on training windows",
            descriptor.name,
        )
        eval_set = build.train

    conditioned = bool(build.train.labels)
    scored = []
    for k in orders:
        if conditioned:
            model = fit_conditioned(build.train, k, stats=build.stats, trained_on=descriptor.name)
        else:
            model = fit(build.train, k, stats=build.stats, trained_on=descriptor.name)
        scored.append((model, evaluate(model, eval_set)))
    best = select_best(scored)
    report = next(r for m, r in scored if m is best)
    return TrainResult(model=best, report=report, candidates=scored, build=build)
