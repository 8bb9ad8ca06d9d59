"""Test harness wiring for the live-link add-on.

The add-on imports ``bpy`` and ``mathutils``, which only exist inside the
DCC. ``blender_stub/`` provides in-process stand-ins; putting it on sys.path
before collection means the whole suite runs in plain Python while the
add-on code stays byte-identical to what ships.
"""

import sys
from pathlib import Path

import pytest

_TESTS_DIR = Path(__file__).resolve().parent
for entry in (str(_TESTS_DIR), str(_TESTS_DIR / "blender_stub")):
    if entry not in sys.path:
        sys.path.insert(0, entry)

import bpy  # noqa: E402  (the stub, once the path is set)

from motionkit_blender import scene  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_scene():
    """Every test starts with an empty scene and clean mutation counters."""
    bpy.stub_reset()
    scene.MUTATION_CALLS = 0
    scene.MUTATION_THREADS.clear()
    yield
