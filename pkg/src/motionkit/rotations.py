"""Rotation algebra: unit quaternions and intrinsic Euler angles.

Conventions fixed here and relied on everywhere else:

* Quaternion component order is (w, x, y, z), scalar first.
* Every ``Rotation`` is unit norm (|norm - 1| <= 1e-9) and sign-canonical:
  w >= 0, ties at w == 0 broken by the first nonzero of (x, y, z) being
  positive. q and -q encode the same rotation; canonicalizing makes equality
  checks meaningful.
* Euler angles are intrinsic rotations composed in the listed axis order
  (BVH semantics), degrees at the API boundary, radians internally.
* Gimbal lock (|sin(middle)| within 1e-12 of 1, roughly 1e-4 deg around
  +/-90): the middle angle is reported as exactly +/-90, the first as 0, and
  the remaining freedom is absorbed by the third angle. The decomposition is
  not unique there; the rotation itself is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EULER_ORDERS = ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX")

_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}
# even permutations of (0, 1, 2); the other three orders are odd
_EVEN = {(0, 1, 2), (1, 2, 0), (2, 0, 1)}

_NORM_TOL = 1e-9
# Lock detection runs on sin(middle): asin turns ~1e-15 of matrix roundoff
# into microdegrees near +/-90, so a degree-scale window cannot be trusted.
_LOCK_SIN_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class Rotation:
    """Unit quaternion in (w, x, y, z) order, canonicalized to w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(n) or abs(n - 1.0) > _NORM_TOL:
            raise ValueError(f"quaternion is not unit norm (norm={n!r})")
        if _needs_flip(self.w, self.x, self.y, self.z):
            # exact sign flip, no precision loss
            object.__setattr__(self, "w", -self.w)
            object.__setattr__(self, "x", -self.x)
            object.__setattr__(self, "y", -self.y)
            object.__setattr__(self, "z", -self.z)

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def normalized(w: float, x: float, y: float, z: float) -> "Rotation":
        """Build a Rotation from arbitrary components, rescaling to unit norm."""
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if not math.isfinite(n) or n < 1e-12:
            raise ValueError(f"cannot normalize quaternion with norm {n!r}")
        return Rotation(w / n, x / n, y / n, z / n)

    def conjugate(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def components(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)

    def apply(self, v) -> tuple[float, float, float]:
        """Rotate a 3-vector by this quaternion."""
        vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
        w, x, y, z = self.w, self.x, self.y, self.z
        # v + 2*q_vec x (q_vec x v + w v)
        tx = y * vz - z * vy + w * vx
        ty = z * vx - x * vz + w * vy
        tz = x * vy - y * vx + w * vz
        return (
            vx + 2.0 * (y * tz - z * ty),
            vy + 2.0 * (z * tx - x * tz),
            vz + 2.0 * (x * ty - y * tx),
        )

    def matrix(self) -> list[list[float]]:
        """Equivalent 3x3 rotation matrix (row major)."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]

    def angle_to(self, other: "Rotation") -> float:
        """Rotation angle in degrees separating two rotations."""
        # Hamilton product of self's conjugate and other; atan2 of the relative
        # quaternion's vector norm stays accurate where acos of the dot saturates.
        aw, ax, ay, az = self.w, -self.x, -self.y, -self.z
        bw, bx, by, bz = other.w, other.x, other.y, other.z
        w = aw * bw - ax * bx - ay * by - az * bz
        x = aw * bx + ax * bw + ay * bz - az * by
        y = aw * by - ax * bz + ay * bw + az * bx
        z = aw * bz + ax * by - ay * bx + az * bw
        return math.degrees(2.0 * math.atan2(math.hypot(x, y, z), abs(w)))


def _needs_flip(w: float, x: float, y: float, z: float) -> bool:
    if w != 0.0:
        return w < 0.0
    for c in (x, y, z):
        if c != 0.0:
            return c < 0.0
    return False


def quat_mul(a: Rotation, b: Rotation) -> Rotation:
    """Hamilton product a*b, renormalized and canonicalized.

    a*b applies b first, then a, when rotating column vectors.
    """
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    return Rotation.normalized(w, x, y, z)


def axis_rotation(axis: str, degrees: float) -> Rotation:
    """Rotation of ``degrees`` about a principal axis ('X', 'Y' or 'Z')."""
    if axis not in _AXIS_INDEX:
        raise ValueError(f"unknown axis {axis!r}")
    if not math.isfinite(degrees):
        raise ValueError(f"non-finite angle {degrees!r}")
    half = math.radians(degrees) * 0.5
    w = math.cos(half)
    s = math.sin(half)
    xyz = [0.0, 0.0, 0.0]
    xyz[_AXIS_INDEX[axis]] = s
    return Rotation.normalized(w, *xyz)


def euler_to_quat(angles, order: str) -> Rotation:
    """Compose three intrinsic axis rotations (degrees) in the given order."""
    _check_order(order)
    a0, a1, a2 = (float(a) for a in angles)
    for a in (a0, a1, a2):
        if not math.isfinite(a):
            raise ValueError(f"non-finite euler angle {a!r}")
    q = quat_mul(axis_rotation(order[0], a0), axis_rotation(order[1], a1))
    return quat_mul(q, axis_rotation(order[2], a2))


def quat_to_euler(r: Rotation, order: str) -> tuple[float, float, float]:
    """Decompose a rotation into intrinsic Euler angles (degrees).

    Inverse of :func:`euler_to_quat` up to the gimbal-lock convention
    described in the module docstring.
    """
    _check_order(order)
    n = math.sqrt(r.w * r.w + r.x * r.x + r.y * r.y + r.z * r.z)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"quaternion is not unit norm (norm={n!r})")

    i, j, k = (_AXIS_INDEX[c] for c in order)
    even = (i, j, k) in _EVEN
    m = r.matrix()

    s = m[i][k] if even else -m[i][k]
    s = max(-1.0, min(1.0, s))
    b = math.asin(s)

    if 1.0 - abs(s) < _LOCK_SIN_TOL:
        # First angle zeroed, middle snapped to the exact pole, third solved
        # from the residual k-rotation.
        a = 0.0
        b = math.copysign(0.5 * math.pi, s)
        mj = _axis_matrix_t(j, b)
        res = _mat_mul(mj, m)
        u = (k + 1) % 3
        v = (k + 2) % 3
        c = math.atan2(res[v][u], res[u][u])
    elif even:
        a = math.atan2(-m[j][k], m[k][k])
        c = math.atan2(-m[i][j], m[i][i])
    else:
        a = math.atan2(m[j][k], m[k][k])
        c = math.atan2(m[i][j], m[i][i])

    return (math.degrees(a), math.degrees(b), math.degrees(c))


def _check_order(order: str) -> None:
    if order not in EULER_ORDERS:
        raise ValueError(f"unknown rotation order {order!r} (expected one of {EULER_ORDERS})")


def _axis_matrix_t(axis: int, angle: float) -> list[list[float]]:
    """Transpose of the principal-axis rotation matrix."""
    c = math.cos(angle)
    s = math.sin(angle)
    m = [[0.0] * 3 for _ in range(3)]
    m[axis][axis] = 1.0
    u = (axis + 1) % 3
    v = (axis + 2) % 3
    m[u][u] = c
    m[v][v] = c
    # transpose of (m[v][u], m[u][v]) = (s, -s)
    m[v][u] = -s
    m[u][v] = s
    return m


def _mat_mul(a, b):
    return [
        [sum(a[r][t] * b[t][c] for t in range(3)) for c in range(3)]
        for r in range(3)
    ]
