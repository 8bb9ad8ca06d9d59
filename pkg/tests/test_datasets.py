"""Dataset descriptors, discovery, windowing, splits, and normalization."""

import json
import logging
import math

import numpy as np
import pytest

from motionkit import (
    DatasetDescriptor,
    Joint,
    MotionClip,
    NormStats,
    ParseError,
    Pose,
    Rotation,
    Skeleton,
    build_window_sets,
    compute_stats,
    load_descriptor,
    load_stats,
    save_stats,
    window,
)
from motionkit.datasets import STD_FLOOR, WindowSet, discover, split
from motionkit.formats import write_bvh
from support import SYNTH_SKELETON, write_config, write_synth_dataset


def descriptor_for(tmp_path, **overrides):
    fields = {
        "name": "synth",
        "data_path": str(tmp_path / "data"),
        "format": "bvh",
        "window_length": 30,
        "window_stride": 30,
        "label_rule": {"walk": "walk", "reach": "reach"},
    }
    fields.update(overrides)
    fields = {k: v for k, v in fields.items() if v is not None}
    return load_descriptor(write_config(tmp_path / "ds.toml", **fields))


# --- descriptor --------------------------------------------------------------


def test_load_descriptor_full(tmp_path):
    d = descriptor_for(
        tmp_path, normalize=False, fps_override=60, val_fraction=0.25, split_seed=7
    )
    assert d.name == "synth"
    assert d.data_path == tmp_path / "data"
    assert d.format == "bvh"
    assert (d.window_length, d.window_stride) == (30, 30)
    assert d.normalize is False
    assert d.fps_override == 60.0
    assert d.frame_time_override == 1.0 / 60.0
    assert d.label_rule == {"walk": "walk", "reach": "reach"}
    assert (d.val_fraction, d.split_seed) == (0.25, 7)


def test_load_descriptor_defaults(tmp_path):
    path = write_config(
        tmp_path / "ds.toml",
        name="d", data_path="data", format="bvh", window_length=8, window_stride=4,
    )
    d = load_descriptor(path)
    assert d.normalize is True
    assert d.fps_override is None and d.frame_time_override is None
    assert d.label_rule is None
    assert d.val_fraction == 0.0 and d.split_seed == 0


def test_relative_data_path_resolves_against_config(tmp_path):
    sub = tmp_path / "configs"
    sub.mkdir()
    (tmp_path / "clips").mkdir()
    path = write_config(
        sub / "ds.toml",
        name="d", data_path="../clips", format="bvh", window_length=8, window_stride=4,
    )
    assert load_descriptor(path).data_path == (tmp_path / "clips").resolve()


@pytest.mark.parametrize(
    "fields, fragment",
    [
        ({"name": "d"}, "missing required field 'data_path'"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8},
         "missing required field 'window_stride'"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "surprise": 1}, "unknown field 'surprise'"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": "8",
          "window_stride": 4}, "field 'window_length' has the wrong type"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": True,
          "window_stride": 4}, "field 'window_length' has the wrong type"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "normalize": 1}, "field 'normalize' has the wrong type"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "fps_override": "fast"}, "field 'fps_override' has the wrong type"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "split_seed": 1.5}, "field 'split_seed' has the wrong type"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "label_rule": {"sub": 3}}, "label_rule['sub'] must be a string"),
        ({"name": "d", "data_path": "x", "format": "fbx", "window_length": 8,
          "window_stride": 4}, "format must be one of"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 1,
          "window_stride": 4}, "window_length must be >= 2"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 0}, "window_stride must be >= 1"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "val_fraction": 1.0}, "val_fraction must be in [0, 1)"),
        ({"name": "d", "data_path": "x", "format": "bvh", "window_length": 8,
          "window_stride": 4, "fps_override": 0}, "fps_override must be positive"),
    ],
)
def test_load_descriptor_errors(tmp_path, fields, fragment):
    path = write_config(tmp_path / "ds.toml", **fields)
    with pytest.raises(ParseError) as err:
        load_descriptor(path)
    assert fragment in str(err.value)
    assert "ds.toml" in str(err.value)


def test_load_descriptor_bad_syntax_and_missing_file(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("name = [unclosed", encoding="utf-8")
    with pytest.raises(ParseError, match="bad config syntax"):
        load_descriptor(bad)
    with pytest.raises(ParseError, match="cannot read config"):
        load_descriptor(tmp_path / "absent.toml")


# --- discovery ---------------------------------------------------------------


def test_discover_sorted_and_labeled(tmp_path):
    data = tmp_path / "data"
    for rel in ("walk/w1.bvh", "walk/deep/w2.bvh", "reach/r1.bvh", "misc/m1.bvh", "top.bvh"):
        p = data / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("", encoding="utf-8")
    (data / "notes.txt").write_text("", encoding="utf-8")

    d = descriptor_for(tmp_path)
    found = discover(d)
    rels = [p.relative_to(data).as_posix() for p, _ in found]
    assert rels == ["misc/m1.bvh", "reach/r1.bvh", "top.bvh", "walk/deep/w2.bvh", "walk/w1.bvh"]
    labels = dict(zip(rels, (label for _, label in found)))
    assert labels["walk/w1.bvh"] == "walk"
    assert labels["walk/deep/w2.bvh"] == "walk"  # first-level directory decides
    assert labels["reach/r1.bvh"] == "reach"
    assert labels["misc/m1.bvh"] is None  # unmapped subdirectory
    assert labels["top.bvh"] is None  # no subdirectory at all


def test_discover_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError, match="does not exist"):
        discover(descriptor_for(tmp_path))


def test_discover_asfamc_requires_pairing(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    (data / "take.amc").write_text("1\n", encoding="utf-8")
    d = descriptor_for(tmp_path, format="asfamc", label_rule=None)
    with pytest.raises(ParseError, match="no .asf skeleton"):
        discover(d)


# --- normalization -----------------------------------------------------------


def test_compute_stats_hand_values():
    w1 = np.array([[0.0, 5.0], [2.0, 5.0]])
    w2 = np.array([[4.0, 5.0], [6.0, 5.0]])
    stats = compute_stats([w1, w2])
    assert stats.means == (3.0, 5.0)
    # population std of 0,2,4,6 is sqrt(5); the constant column hits the floor
    assert stats.stds[0] == pytest.approx(math.sqrt(5.0), abs=1e-12)
    assert stats.stds[1] == STD_FLOOR


def test_compute_stats_accepts_labeled_pairs_and_window_sets():
    w = np.array([[1.0], [3.0]])
    from_pairs = compute_stats([(w, "walk")])
    ws = WindowSet(
        Skeleton((Joint("r", None, (0.0, 0.0, 0.0), ("TX",)),), name="r"),
        [(w, "walk")],
    )
    assert compute_stats(ws) == from_pairs
    assert from_pairs.means == (2.0,)


def test_compute_stats_empty():
    with pytest.raises(ValueError, match="zero windows"):
        compute_stats([])


def test_norm_stats_round_trip():
    stats = NormStats((1.0, -2.0), (2.0, 0.5))
    values = np.array([[3.0, -1.0], [1.0, -2.0]])
    normalized = stats.normalize(values)
    assert np.array_equal(normalized, [[1.0, 2.0], [0.0, 0.0]])
    assert np.allclose(stats.denormalize(normalized), values, atol=1e-15)
    assert stats.channel_count == 2
    identity = NormStats.identity(2)
    assert np.array_equal(identity.normalize(values), values)


def test_norm_stats_validation():
    with pytest.raises(ValueError, match="equal length"):
        NormStats((0.0,), (1.0, 1.0))
    with pytest.raises(ValueError, match="clamped"):
        NormStats((0.0,), (0.0,))


def test_stats_file_round_trip(tmp_path):
    stats = NormStats((0.1 + 0.2, -3.5), (1.0 / 3.0, 2.0))
    path = tmp_path / "stats.json"
    save_stats(path, stats)
    assert load_stats(path) == stats  # json floats round-trip exactly

    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and len(doc["means"]) == 2


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("{nope", "cannot load stats"),
        ('{"version": 2, "means": [], "stds": []}', "version 1"),
        ('{"version": 1, "means": [0.0]}', "needs 'means' and 'stds'"),
        ('{"version": 1, "means": [0.0], "stds": [0.0]}', "bad stats values"),
        ('{"version": 1, "means": [0.0], "stds": ["x"]}', "bad stats values"),
    ],
)
def test_load_stats_errors(tmp_path, text, fragment):
    path = tmp_path / "stats.json"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ParseError, match=fragment):
        load_stats(path)


# --- windowing and splits ------------------------------------------------------


def test_window_starts_and_copy():
    values = np.arange(20.0).reshape(10, 2)
    got = window(values, 4, 2)
    assert [w[0, 0] for w in got] == [0.0, 4.0, 8.0, 12.0]
    assert all(w.shape == (4, 2) for w in got)
    got[0][0, 0] = 99.0
    assert values[0, 0] == 0.0  # windows are copies

    assert len(window(values, 4, 3)) == 3  # starts 0, 3, 6
    assert len(window(values, 10, 1)) == 1
    assert len(window(values, 2, 100)) == 1


def test_window_short_clip_skipped(caplog):
    values = np.zeros((3, 2))
    with caplog.at_level(logging.WARNING, logger="motionkit.datasets"):
        assert window(values, 5, 1, origin="tiny.bvh") == []
    assert "tiny.bvh" in caplog.text and "shorter than window length" in caplog.text


def test_window_validation():
    values = np.zeros((10, 2))
    with pytest.raises(ValueError, match=">= 2"):
        window(values, 1, 1)
    with pytest.raises(ValueError, match=">= 1"):
        window(values, 4, 0)


def test_split_frozen_and_order_independent():
    items = list("abcdefghij")
    train, val = split(items, 0.3, 42)
    # the seed-42 permutation of 10 items is frozen in test_rng; applying it
    # to the sorted items puts a, j, f in front
    assert val == ["a", "j", "f"]
    assert train == ["i", "g", "e", "h", "c", "b", "d"]

    scrambled = ["d", "j", "a", "g", "b", "i", "f", "c", "h", "e"]
    assert split(scrambled, 0.3, 42) == (train, val)


def test_split_properties():
    items = [(f"clip{i:02d}.bvh", None) for i in range(7)]
    train, val = split(items, 0.5, 9)
    assert len(val) == math.ceil(7 * 0.5)
    assert sorted(train + val) == sorted(items)
    assert split(items, 0.5, 9) == (train, val)
    assert split(items, 0.5, 10) != (train, val)

    all_train, none_val = split(items, 0.0, 3)
    assert none_val == [] and len(all_train) == 7
    with pytest.raises(ValueError, match="val_fraction"):
        split(items, 1.0, 3)


def test_window_set_validation():
    sk = Skeleton((Joint("r", None, (0.0, 0.0, 0.0), ("TX", "TY")),), name="r")
    good = [(np.zeros((4, 2)), "a"), (np.zeros((4, 2)), None), (np.zeros((4, 2)), "b")]
    ws = WindowSet(sk, good)
    assert len(ws) == 3
    assert ws.labels == ["a", "b"]

    with pytest.raises(ValueError, match="split must be"):
        WindowSet(sk, good, "test")
    with pytest.raises(ValueError, match="2-D"):
        WindowSet(sk, [(np.zeros(4), None)])
    with pytest.raises(ValueError, match="shapes differ"):
        WindowSet(sk, [(np.zeros((4, 2)), None), (np.zeros((5, 2)), None)])
    with pytest.raises(ValueError, match="channel count"):
        WindowSet(sk, [(np.zeros((4, 3)), None)])


# --- end-to-end build ----------------------------------------------------------


def test_build_window_sets(tmp_path):
    write_synth_dataset(tmp_path / "data")
    d = descriptor_for(tmp_path, val_fraction=0.25, split_seed=5)
    build = build_window_sets(d)

    # 12 clips of 90 frames, window 30/30: 3 windows each; ceil(12/4) = 3 val clips
    assert len(build.train) == 27
    assert len(build.val) == 9
    assert build.train.split == "train" and build.val.split == "val"
    assert build.skeleton.same_structure(SYNTH_SKELETON)
    assert build.frame_time == pytest.approx(1.0 / 30.0, abs=1e-6)
    assert build.train.labels == ["reach", "walk"]

    # train windows are normalized by their own stats: zero mean, unit std
    stacked = np.concatenate([w for w, _ in build.train.windows], axis=0)
    assert np.allclose(stacked.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(stacked.std(axis=0), 1.0, atol=1e-9)

    # val windows use the train stats, so they denormalize back to raw values
    raw = build.stats.denormalize(build.val.windows[0][0])
    assert np.all(np.isfinite(raw)) and raw.shape == (30, 12)

    again = build_window_sets(d)
    assert all(
        np.array_equal(a[0], b[0]) and a[1] == b[1]
        for a, b in zip(build.train.windows, again.train.windows)
    )


def test_build_without_normalization(tmp_path):
    write_synth_dataset(tmp_path / "data", clips_per_label=2)
    d = descriptor_for(tmp_path, normalize=False)
    build = build_window_sets(d)
    assert build.stats == NormStats.identity(12)
    # identity stats leave raw degree-scale values in place
    assert np.concatenate([w for w, _ in build.train.windows]).std() > 1.0


def test_build_fps_override(tmp_path):
    write_synth_dataset(tmp_path / "data", clips_per_label=1)
    d = descriptor_for(tmp_path, fps_override=60)
    assert build_window_sets(d).frame_time == 1.0 / 60.0


def test_build_rejects_mixed_skeletons(tmp_path):
    write_synth_dataset(tmp_path / "data", clips_per_label=2)
    other = Skeleton(
        (Joint("solo", None, (0.0, 0.0, 0.0), ("TX", "TY", "TZ", "RZ", "RX", "RY")),),
        name="solo",
    )
    frames = tuple(Pose((0.0, 0.0, float(i)), (Rotation.identity(),)) for i in range(40))
    clip = MotionClip(other, 1.0 / 30.0, frames)
    (tmp_path / "data" / "zz_other.bvh").write_text(write_bvh(other, clip), encoding="utf-8")

    with pytest.raises(ValueError, match="zz_other.bvh.*differs"):
        build_window_sets(descriptor_for(tmp_path))


def test_build_empty_and_too_short(tmp_path):
    (tmp_path / "data").mkdir()
    with pytest.raises(ValueError, match="no clip files"):
        build_window_sets(descriptor_for(tmp_path))

    write_synth_dataset(tmp_path / "data", clips_per_label=1, frames=20)
    with pytest.raises(ValueError, match="no training windows"):
        build_window_sets(descriptor_for(tmp_path))  # window_length 30 > 20 frames
