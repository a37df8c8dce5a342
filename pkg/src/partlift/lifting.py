"""Depth-guided soft unprojection of 2D part maps into 3D volumes.

A lifted voxel is ``psi(d_hat(x, y), z) * value(x, y)`` where ``psi`` is a
symmetric bump peaking at the part's absolute depth. Volumes are evaluated
lazily: only the voxels a sampler touches are ever computed. The
materialized form exists as a test oracle and for small grids.

Volumes are indexed ``(x, y, z)`` in voxel units while 2D maps are indexed
``[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError, VolumeAllocationError
from .part_model import absolute_depth

DEFAULT_BUDGET_BYTES = 2 * 1024**3


@dataclass(frozen=True)
class MappingFn:
    """Depth-guided 2D-to-3D mapping function.

    ``kind`` is ``"gaussian"`` (``exp(-param * u**2)``) or ``"invprop"``
    (``1 / (1 + param * u**2)``) with ``u = d_hat - z``.
    """

    kind: str = "gaussian"
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "invprop"):
            raise ConfigError(f"unknown mapping function {self.kind!r}")
        if not self.param > 0:
            raise ConfigError(f"mapping parameter must be > 0, got {self.param}")

    @classmethod
    def gaussian(cls, alpha=1.0):
        return cls("gaussian", float(alpha))

    @classmethod
    def inverse_proportional(cls, beta=1.0):
        return cls("invprop", float(beta))

    @classmethod
    def parse(cls, text):
        """Parse ``gaussian:1``, ``invprop:0.5`` or a bare kind name."""
        kind, _, value = text.partition(":")
        kind = {"gauss": "gaussian", "inverse": "invprop"}.get(kind, kind)
        try:
            return cls(kind, float(value) if value else 1.0)
        except ValueError:
            raise ConfigError(f"bad mapping {text!r} (expected KIND or KIND:PARAM)") from None

    def __str__(self):
        return f"{self.kind}:{self.param:g}"


def psi(mapping, d_hat, z):
    """Lifting weight in (0, 1], equal to 1 exactly where ``z == d_hat``."""
    u = np.asarray(d_hat, dtype=np.float64) - np.asarray(z, dtype=np.float64)
    u2 = u * u
    if mapping.kind == "gaussian":
        return np.exp(-(mapping.param * u2))
    return 1.0 / (1.0 + mapping.param * u2)


@dataclass(frozen=True)
class GridGeom:
    X: int = 64
    Y: int = 64
    Z: int = 32

    def __post_init__(self):
        if min(self.X, self.Y, self.Z) < 2:
            raise ConfigError(f"grid dimensions must be >= 2, got {self.X}x{self.Y}x{self.Z}")

    @property
    def shape(self):
        return (self.X, self.Y, self.Z)


def materialize_nbytes(geom, channels, itemsize=8):
    """Bytes needed to hold a materialized feature + density volume."""
    return geom.X * geom.Y * geom.Z * (channels + 1) * itemsize


class LiftedPartVolume:
    """Lazy 3D feature/density volume of one part."""

    def __init__(self, source, d_hat, mapping, geom):
        H, W, _ = source.shape
        if (geom.X, geom.Y) != (W, H):
            raise ConfigError(f"grid {geom.X}x{geom.Y} does not match part plane {W}x{H}")
        d_hat = np.array(d_hat, dtype=np.float64)
        if d_hat.shape != (H, W):
            raise ConfigError(f"d_hat shape {d_hat.shape} != {(H, W)}")
        d_hat.setflags(write=False)
        self.source = source
        self.d_hat = d_hat
        self.mapping = mapping
        self.geom = geom
        self._feat = source.feature.astype(np.float64)
        self._dens = source.density.astype(np.float64)

    @classmethod
    def from_part(cls, part, face_base_depth, mapping, geom):
        return cls(part, absolute_depth(part, face_base_depth), mapping, geom)

    @property
    def index(self):
        return self.source.id.index

    @property
    def channels(self):
        return self._feat.shape[2]

    def corner_values(self, ix, iy, iz, feature=True):
        """Voxel values at integer index arrays (no bounds checking)."""
        w = psi(self.mapping, self.d_hat[iy, ix], iz)
        dens = w * self._dens[iy, ix]
        feat = w[..., None] * self._feat[iy, ix] if feature else None
        return feat, dens


@dataclass(frozen=True, eq=False)
class MaterializedVolume:
    feature: np.ndarray  # (X, Y, Z, C)
    density: np.ndarray  # (X, Y, Z)

    @property
    def geom(self):
        return GridGeom(*self.density.shape)

    @property
    def channels(self):
        return self.feature.shape[3]

    def corner_values(self, ix, iy, iz, feature=True):
        feat = self.feature[ix, iy, iz] if feature else None
        return feat, self.density[ix, iy, iz]


class FusedVolume:
    """Elementwise sum of the active parts' lifted volumes.

    Parts are always summed in ascending part-index order, so the result does
    not depend on the order in which parts were supplied.
    """

    def __init__(self, parts, active=None):
        parts = sorted(parts, key=lambda p: p.index)
        if not parts:
            raise UsageError("fused volume needs at least one part")
        geoms = {p.geom for p in parts}
        if len(geoms) != 1:
            raise ConfigError("all lifted parts must share one grid geometry")
        self.parts = tuple(parts)
        self.geom = parts[0].geom
        known = {p.index for p in parts}
        active = known if active is None else set(active)
        if not active:
            raise UsageError("active part set is empty")
        if not active <= known:
            raise UsageError(f"unknown active parts {sorted(active - known)}")
        self.active = frozenset(active)

    @property
    def active_parts(self):
        return tuple(p for p in self.parts if p.index in self.active)

    @property
    def channels(self):
        return self.parts[0].channels

    def corner_values(self, ix, iy, iz, feature=True):
        feat_sum = dens_sum = None
        for p in self.active_parts:
            feat, dens = p.corner_values(ix, iy, iz, feature)
            if dens_sum is None:
                feat_sum, dens_sum = feat, dens
            else:
                dens_sum = dens_sum + dens
                if feature:
                    feat_sum = feat_sum + feat
        return feat_sum, dens_sum


def lift_part_set(parts, mapping, geom=None, active=None):
    """Lift every part of a PartSet and fuse the active subset.

    Relative parts are placed against the face base's depth map.
    """
    if geom is None:
        geom = GridGeom(parts.W, parts.H, 32)
    face_depth = parts.face_base.depth.astype(np.float64)
    lifted = [LiftedPartVolume.from_part(p, face_depth, mapping, geom) for p in parts.parts]
    return FusedVolume(lifted, active)


def _check_index(geom, x, y, z):
    for name, v, n in (("x", x, geom.X), ("y", y, geom.Y), ("z", z, geom.Z)):
        if not 0 <= v < n:
            raise IndexError(f"voxel {name}={v} outside [0, {n - 1}]")


def voxel(view, x, y, z):
    """(feature vector, density) of one voxel of any volume view."""
    _check_index(view.geom, x, y, z)
    feat, dens = view.corner_values(np.intp(x), np.intp(y), np.intp(z))
    return feat, float(dens)


def fuse_at(fused, x, y, z):
    if not fused.active:
        raise UsageError("active part set is empty")
    return voxel(fused, x, y, z)


def materialize(part, budget_bytes=DEFAULT_BUDGET_BYTES):
    geom = part.geom
    need = materialize_nbytes(geom, part.channels)
    if need > budget_bytes:
        raise VolumeAllocationError(need, budget_bytes)
    ix, iy, iz = np.meshgrid(
        np.arange(geom.X), np.arange(geom.Y), np.arange(geom.Z), indexing="ij"
    )
    try:
        feat, dens = part.corner_values(ix, iy, iz)
    except MemoryError:
        raise VolumeAllocationError(need, budget_bytes) from None
    return MaterializedVolume(feature=feat, density=dens)


_CORNERS = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]


def cell_coords(points, geom):
    """Clamp points into the grid and split into cell anchor and fraction."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != 3:
        raise UsageError(f"points must have a trailing axis of 3, got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError("sample point is not finite")
    hi = np.array([geom.X - 1, geom.Y - 1, geom.Z - 1], dtype=np.float64)
    p = np.clip(points, 0.0, hi)
    i0 = np.minimum(np.floor(p), hi - 1).astype(np.intp)
    frac = p - i0
    return i0, frac


def corner_table(view, i0, feature=True):
    """Corner values of the cells anchored at ``i0``, keyed by corner offset."""
    return {
        (a, b, c): view.corner_values(i0[..., 0] + a, i0[..., 1] + b, i0[..., 2] + c, feature)
        for a, b, c in _CORNERS
    }


def _lerp(v0, v1, t):
    return v0 * (1.0 - t) + v1 * t


def interpolate(table, frac, feature=True):
    """Trilinear blend of a corner table; x first, then y, then z."""
    fx, fy, fz = frac[..., 0], frac[..., 1], frac[..., 2]

    def blend(slot, wx, wy, wz):
        c00 = _lerp(table[0, 0, 0][slot], table[1, 0, 0][slot], wx)
        c10 = _lerp(table[0, 1, 0][slot], table[1, 1, 0][slot], wx)
        c01 = _lerp(table[0, 0, 1][slot], table[1, 0, 1][slot], wx)
        c11 = _lerp(table[0, 1, 1][slot], table[1, 1, 1][slot], wx)
        return _lerp(_lerp(c00, c10, wy), _lerp(c01, c11, wy), wz)

    dens = blend(1, fx, fy, fz)
    feat = blend(0, fx[..., None], fy[..., None], fz[..., None]) if feature else None
    return feat, dens


def sample_trilinear(view, points, feature=True):
    """Trilinearly interpolate a volume view at continuous grid points.

    ``points`` has shape ``(..., 3)`` in voxel coordinates ``(x, y, z)``;
    points outside the grid are clamped to its boundary. Returns
    ``(feature (..., C) or None, density (...))``. Corner values are pulled
    through ``view.corner_values`` so lazy and materialized views go through
    identical arithmetic.
    """
    i0, frac = cell_coords(points, view.geom)
    return interpolate(corner_table(view, i0, feature), frac, feature)
