"""Orbit camera, pose sampling, ray generation and per-ray sample placement.

World convention: the volume occupies the box ``[-1, 1]^2 x [-0.5, 0.5]``.
Voxel ``(x, y, z)`` has its center at
``((x + .5) / X * 2 - 1, (y + .5) / Y * 2 - 1, .5 - (z + .5) / Z)``, so the
grid depth index grows away from a camera at the frontal pose, which sits on
the +z axis looking at the origin with +y up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PoseError

POSE_MEAN = math.pi / 2
YAW_STD = 0.3
PITCH_STD = 0.155

BOX_LO = np.array([-1.0, -1.0, -0.5])
BOX_HI = np.array([1.0, 1.0, 0.5])
BOX_CIRCUMRADIUS = float(np.linalg.norm(BOX_HI))

DEFAULT_ORBIT_RADIUS = 3.0
# 30 degrees: at the frontal pose every pixel ray crosses the box from its
# front face to its back face, so every pixel sees the background plane.
DEFAULT_FOV_Y = math.radians(30.0)

N_SAMPLES_TRAIN = 12
N_SAMPLES_TEST = 36


@dataclass(frozen=True)
class CameraPose:
    yaw: float = POSE_MEAN
    pitch: float = POSE_MEAN


FRONTAL = CameraPose()


@dataclass(frozen=True)
class CameraConfig:
    orbit_radius: float = DEFAULT_ORBIT_RADIUS
    fov_y: float = DEFAULT_FOV_Y
    image_w: int = 64
    image_h: int = 64
    n_samples: int = N_SAMPLES_TEST

    def __post_init__(self):
        if not self.orbit_radius > BOX_CIRCUMRADIUS:
            raise ConfigError(
                f"orbit radius {self.orbit_radius} must exceed box circumradius {BOX_CIRCUMRADIUS:.4f}"
            )
        if not 0 < self.fov_y < math.pi:
            raise ConfigError(f"fov_y must be in (0, pi), got {self.fov_y}")
        if self.image_w < 1 or self.image_h < 1:
            raise ConfigError("image size must be positive")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")


def sample_pose(rng):
    """Draw a pose around the frontal view.

    ``rng`` is anything with a ``standard_normal()`` method; two draws are
    consumed, yaw first.
    """
    zy = float(rng.standard_normal())
    zp = float(rng.standard_normal())
    return CameraPose(POSE_MEAN + YAW_STD * zy, POSE_MEAN + PITCH_STD * zp)


def sample_poses(rng, n):
    """Vectorized form of :func:`sample_pose`; returns ``(yaw, pitch)`` arrays."""
    z = rng.standard_normal((n, 2))
    return POSE_MEAN + YAW_STD * z[:, 0], POSE_MEAN + PITCH_STD * z[:, 1]


def camera_position(pose, radius):
    sp = math.sin(pose.pitch)
    return radius * np.array(
        [math.cos(pose.yaw) * sp, math.cos(pose.pitch), math.sin(pose.yaw) * sp]
    )


def camera_basis(pose, radius):
    """Return ``(eye, right, up, forward)`` for a look-at-origin camera."""
    if not (math.isfinite(pose.yaw) and math.isfinite(pose.pitch)):
        raise PoseError(f"non-finite pose {pose}")
    if abs(math.sin(pose.pitch)) < 1e-6:
        raise PoseError(f"pitch {pose.pitch} is gimbal-degenerate (camera along the up axis)")
    eye = camera_position(pose, radius)
    forward = -eye / np.linalg.norm(eye)
    right = np.cross(forward, [0.0, 1.0, 0.0])
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return eye, right, up, forward


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    pixel: tuple = (0, 0)


@dataclass(frozen=True, eq=False)
class RayGrid:
    """All rays of an image; arrays have shape ``(h, w, 3)``."""

    origins: np.ndarray
    directions: np.ndarray

    @property
    def shape(self):
        return self.directions.shape[:2]

    def __getitem__(self, uv):
        u, v = uv
        return Ray(self.origins[v, u], self.directions[v, u], (u, v))


def generate_rays(pose, cfg):
    """One ray per pixel center; row 0 is the top of the image."""
    eye, right, up, forward = camera_basis(pose, cfg.orbit_radius)
    tan_half = math.tan(cfg.fov_y / 2)
    aspect = cfg.image_w / cfg.image_h
    sx = ((np.arange(cfg.image_w) + 0.5) / cfg.image_w * 2 - 1) * tan_half * aspect
    sy = (1 - (np.arange(cfg.image_h) + 0.5) / cfg.image_h * 2) * tan_half
    gx, gy = np.meshgrid(sx, sy, indexing="xy")
    d = forward + gx[..., None] * right + gy[..., None] * up
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    origins = np.broadcast_to(eye, d.shape).copy()
    return RayGrid(origins, d)


@dataclass(frozen=True, eq=False)
class RaySampleBatch:
    """Samples along one ray or a batch of rays (leading axes).

    ``t``, ``delta``: ``(..., n)``; ``points``: ``(..., n, 3)`` in voxel
    coordinates; ``hit``: bool ``(...)``. For a single missed ray the sample
    arrays are empty.
    """

    t: np.ndarray
    delta: np.ndarray
    points: np.ndarray
    hit: np.ndarray
    t_enter: np.ndarray | None = None
    t_exit: np.ndarray | None = None


def ray_box_intersect(origins, directions, lo=BOX_LO, hi=BOX_HI):
    """Slab test; returns ``(t_enter, t_exit, hit)`` with ``t_enter >= 0``."""
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(directions, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    parallel = d == 0
    safe = np.where(parallel, 1.0, d)
    t1 = (lo - o) / safe
    t2 = (hi - o) / safe
    inside = (o >= lo) & (o <= hi)
    tn = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    tf = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    t_enter = np.maximum(tn.max(axis=-1), 0.0)
    t_exit = tf.min(axis=-1)
    hit = t_exit - t_enter > 1e-12
    return t_enter, t_exit, hit


def world_to_grid(points, geom, lo=BOX_LO, hi=BOX_HI):
    p = np.asarray(points, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    u = (p - lo) / (hi - lo)
    gx = u[..., 0] * geom.X - 0.5
    gy = u[..., 1] * geom.Y - 0.5
    gz = (1.0 - u[..., 2]) * geom.Z - 0.5
    return np.stack([gx, gy, gz], axis=-1)


def grid_to_world(points, geom, lo=BOX_LO, hi=BOX_HI):
    g = np.asarray(points, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    u = np.stack(
        [(g[..., 0] + 0.5) / geom.X, (g[..., 1] + 0.5) / geom.Y, 1.0 - (g[..., 2] + 0.5) / geom.Z],
        axis=-1,
    )
    return lo + u * (hi - lo)


def place_samples_batch(origins, directions, geom, n, rng=None, lo=BOX_LO, hi=BOX_HI):
    """Place ``n`` samples on each ray's box segment.

    Deterministic placement puts ``t_i`` at the midpoints of ``n`` equal
    sub-intervals of ``[t_enter, t_exit]``; ``delta_i = t_{i+1} - t_i`` and
    the last spacing is the mean spacing. With ``rng`` given, each sample is
    jittered uniformly inside its sub-interval.
    """
    if n < 2:
        raise ConfigError("need at least 2 samples per ray")
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(directions, dtype=np.float64)
    t_enter, t_exit, hit = ray_box_intersect(o, d, lo, hi)
    spacing = np.where(hit, t_exit - t_enter, 0.0) / n
    offs = np.arange(n) + 0.5
    if rng is not None:
        offs = np.arange(n) + rng.uniform(0.0, 1.0, size=hit.shape + (n,))
    t = np.where(hit[..., None], t_enter[..., None] + offs * spacing[..., None], 0.0)
    delta = np.empty_like(t)
    delta[..., :-1] = t[..., 1:] - t[..., :-1]
    delta[..., -1] = spacing
    world = o[..., None, :] + t[..., None] * d[..., None, :]
    points = np.where(hit[..., None, None], world_to_grid(world, geom, lo, hi), 0.0)
    return RaySampleBatch(t, delta, points, hit, t_enter, t_exit)


def place_samples(ray, geom, n, rng=None):
    b = place_samples_batch(ray.origin, ray.direction, geom, n, rng)
    if not bool(b.hit):
        empty = np.empty(0)
        return RaySampleBatch(empty, empty, np.empty((0, 3)), np.bool_(False), b.t_enter, b.t_exit)
    return b
