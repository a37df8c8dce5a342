"""Per-part 2D maps, the depth convention, a procedural part generator and
the on-disk part-set container.

Every part carries a feature map ``(H, W, C)``, a depth map ``(H, W)`` and a
density map ``(H, W)``, all indexed ``[y, x]`` and stored as float32 so that
the raw tensor files round-trip bit-exactly. Depths are expressed in grid-z
index units. Facial parts store depth relative to the face base; background
and face base store absolute depth.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, PartSetFormatError

FORMAT_VERSION = 1

# Facial part names in generation order; sets with K < 13 take a prefix.
FACIAL_PART_NAMES = (
    "nose",
    "eye_l",
    "eye_r",
    "brow_l",
    "brow_r",
    "ear_l",
    "ear_r",
    "mouth",
    "lip_u",
    "lip_l",
    "hair",
)


class PartKind(str, enum.Enum):
    BACKGROUND = "background"
    FACE_BASE = "face_base"
    FACIAL = "facial"


class DepthMode(str, enum.Enum):
    RELATIVE = "relative"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class PartId:
    index: int
    kind: PartKind
    name: str


def _frozen_f32(arr, name):
    out = np.array(arr, dtype=np.float32, copy=True)
    if not np.all(np.isfinite(out)):
        raise ConfigError(f"{name} contains non-finite values")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PartMaps2D:
    """One semantic part's 2D feature, depth and density maps."""

    id: PartId
    feature: np.ndarray
    depth: np.ndarray
    density: np.ndarray
    depth_mode: DepthMode

    def __post_init__(self):
        tag = f"part {self.id.index} ({self.id.name})"
        feature = _frozen_f32(self.feature, f"{tag} feature")
        depth = _frozen_f32(self.depth, f"{tag} depth")
        density = _frozen_f32(self.density, f"{tag} density")
        if feature.ndim != 3 or feature.shape[2] < 1:
            raise ConfigError(f"{tag}: feature must be H x W x C with C >= 1, got {feature.shape}")
        if depth.shape != feature.shape[:2] or density.shape != feature.shape[:2]:
            raise ConfigError(f"{tag}: depth/density shape must match feature plane {feature.shape[:2]}")
        if np.any(density < 0):
            raise ConfigError(f"{tag}: density must be non-negative")
        mode = DepthMode(self.depth_mode)
        if self.id.kind is not PartKind.FACIAL and mode is not DepthMode.ABSOLUTE:
            raise ConfigError(f"{tag}: {self.id.kind.value} part must use absolute depth")
        object.__setattr__(self, "feature", feature)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "density", density)
        object.__setattr__(self, "depth_mode", mode)

    @property
    def shape(self):
        return self.feature.shape

    def __eq__(self, other):
        if not isinstance(other, PartMaps2D):
            return NotImplemented
        return (
            self.id == other.id
            and self.depth_mode is other.depth_mode
            and _bits_equal(self.feature, other.feature)
            and _bits_equal(self.depth, other.depth)
            and _bits_equal(self.density, other.density)
        )

    __hash__ = None


def _bits_equal(a, b):
    return a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()


@dataclass(frozen=True, eq=False)
class PartSet:
    """An ordered collection of parts sharing H, W and C."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if len(parts) < 2:
            raise ConfigError("a part set needs at least background and face base")
        shape = parts[0].shape
        for p in parts:
            if p.shape != shape:
                raise ConfigError(f"part {p.id.index} has shape {p.shape}, expected {shape}")
        indices = sorted(p.id.index for p in parts)
        if indices != list(range(len(parts))):
            raise ConfigError(f"part indices must be unique and dense 0..K-1, got {indices}")
        kinds = [p.id.kind for p in parts]
        if kinds.count(PartKind.BACKGROUND) != 1 or kinds.count(PartKind.FACE_BASE) != 1:
            raise ConfigError("exactly one background and one face base part required")
        object.__setattr__(self, "parts", parts)

    @property
    def K(self):
        return len(self.parts)

    @property
    def H(self):
        return self.parts[0].shape[0]

    @property
    def W(self):
        return self.parts[0].shape[1]

    @property
    def C(self):
        return self.parts[0].shape[2]

    def by_index(self, index):
        for p in self.parts:
            if p.id.index == index:
                return p
        raise KeyError(index)

    def find(self, kind):
        return next(p for p in self.parts if p.id.kind is kind)

    @property
    def face_base(self):
        return self.find(PartKind.FACE_BASE)

    @property
    def background(self):
        return self.find(PartKind.BACKGROUND)

    def index_of(self, name):
        for p in self.parts:
            if p.id.name == name or p.id.kind.value == name:
                return p.id.index
        raise KeyError(name)

    def depth_stack(self):
        """Stored depth maps in index order, shape ``(K, H, W)`` float64."""
        return np.stack([self.by_index(k).depth for k in range(self.K)]).astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, PartSet):
            return NotImplemented
        return len(self.parts) == len(other.parts) and all(
            a == b for a, b in zip(self.parts, other.parts)
        )

    __hash__ = None


def absolute_depth(part, face_base_depth):
    """Absolute depth of a part in grid-z units.

    ``face_base_depth`` may be a scalar or an ``(H, W)`` map (the face base's
    own depth map). Absolute parts are returned unchanged.
    """
    d = np.asarray(part.depth, dtype=np.float64)
    if part.depth_mode is DepthMode.ABSOLUTE:
        return d.copy()
    return d + np.asarray(face_base_depth, dtype=np.float64)


# ---------------------------------------------------------------------------
# Procedural generator


@dataclass(frozen=True)
class BlobSpec:
    """Elliptical Gaussian-profile density blob in normalized plane coords.

    ``center`` and ``radii`` are fractions of (W, H) with y pointing up the
    face; ``depth_offset`` is in grid-z units at Z = 32 and is rescaled for
    other depth resolutions. Negative offsets sit in front of the face base.
    """

    center: tuple
    radii: tuple
    peak: float
    depth_offset: float


# (center, radii, peak, depth offset) for each facial part name.
_TEMPLATE = {
    "nose": ((0.50, 0.47), (0.06, 0.10), 9.0, -3.0),
    "eye_l": ((0.38, 0.58), (0.06, 0.03), 7.5, -1.0),
    "eye_r": ((0.62, 0.58), (0.06, 0.03), 7.5, -1.0),
    "brow_l": ((0.38, 0.66), (0.08, 0.02), 7.5, -1.5),
    "brow_r": ((0.62, 0.66), (0.08, 0.02), 7.5, -1.5),
    "ear_l": ((0.18, 0.52), (0.04, 0.08), 6.0, 2.0),
    "ear_r": ((0.82, 0.52), (0.04, 0.08), 6.0, 2.0),
    "mouth": ((0.50, 0.32), (0.10, 0.03), 7.5, -1.5),
    "lip_u": ((0.50, 0.35), (0.09, 0.02), 6.0, -1.8),
    "lip_l": ((0.50, 0.29), (0.09, 0.025), 6.0, -1.8),
    "hair": ((0.50, 0.82), (0.32, 0.14), 6.0, 1.5),
}

BLOB_SUPPORT = 2.0  # blob density is zero beyond this normalized radius


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    K: int = 13
    H: int = 64
    W: int = 64
    C: int = 16
    Z: int = 32
    face_base_depth: float | None = None  # defaults to Z / 2
    background_depth: float | None = None  # defaults to Z - 2
    background_density: float = 3.0
    face_density: float = 5.0
    blobs: tuple | None = None
    relative_depth: bool = True

    def resolved(self):
        """Validate and return (face_base_depth, background_depth, blobs)."""
        for name in ("H", "W", "Z"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2")
        if self.C < 1:
            raise ConfigError("C must be >= 1")
        if self.K < 2:
            raise ConfigError("K must be >= 2 (background and face base)")
        if self.H != self.W:
            raise ConfigError("part maps must be square (H == W)")
        fbd = self.Z / 2 if self.face_base_depth is None else float(self.face_base_depth)
        bgd = self.Z - 2 if self.background_depth is None else float(self.background_depth)
        for name, v in (("face_base_depth", fbd), ("background_depth", bgd)):
            if not 0 <= v <= self.Z - 1:
                raise ConfigError(f"{name}={v} outside [0, {self.Z - 1}]")
        if self.background_density < 0 or self.face_density < 0:
            raise ConfigError("densities must be non-negative")
        blobs = self.blobs if self.blobs is not None else self._jittered_blobs()
        if len(blobs) != self.K - 2:
            raise ConfigError(f"expected {self.K - 2} blobs, got {len(blobs)}")
        for b in blobs:
            if min(b.radii) <= 0:
                raise ConfigError("blob radii must be > 0")
            if b.peak < 0:
                raise ConfigError("blob peak density must be non-negative")
        return fbd, bgd, tuple(blobs)

    def _jittered_blobs(self):
        rng = np.random.default_rng([self.seed, 0xB10B])
        out = []
        for k in range(self.K - 2):
            name = _facial_name(k)
            if name in _TEMPLATE:
                (cx, cy), (rx, ry), peak, off = _TEMPLATE[name]
            else:
                cx, cy = rng.uniform(0.3, 0.7, size=2)
                rx, ry, peak, off = 0.06, 0.06, 4.0, -1.0
            jc = rng.uniform(-0.02, 0.02, size=2)
            jr = rng.uniform(0.85, 1.15, size=2)
            jp, jo = rng.uniform(0.8, 1.2, size=2)
            out.append(
                BlobSpec(
                    center=(float(cx + jc[0]), float(cy + jc[1])),
                    radii=(float(rx * jr[0]), float(ry * jr[1])),
                    peak=float(peak * jp),
                    depth_offset=float(off * jo),
                )
            )
        return tuple(out)


def _facial_name(k):
    return FACIAL_PART_NAMES[k] if k < len(FACIAL_PART_NAMES) else f"part{k + 2}"


def _plane(cfg):
    # Normalized pixel-center coordinates, y up (row index = y).
    xs = (np.arange(cfg.W) + 0.5) / cfg.W
    ys = (np.arange(cfg.H) + 0.5) / cfg.H
    return np.meshgrid(xs, ys, indexing="xy")


def blob_rho2(blob, cfg):
    """Squared normalized elliptical radius of every pixel w.r.t. a blob."""
    x, y = _plane(cfg)
    return ((x - blob.center[0]) / blob.radii[0]) ** 2 + ((y - blob.center[1]) / blob.radii[1]) ** 2


def _feature(rng, cfg, x):
    base = rng.uniform(-1.0, 1.0, size=cfg.C)
    grad = rng.uniform(-0.2, 0.2, size=cfg.C)
    return base[None, None, :] + (x - 0.5)[:, :, None] * grad[None, None, :]


def synth_part_set(config):
    """Build a portrait-like part set deterministically from ``config.seed``."""
    fbd, bgd, blobs = config.resolved()
    rng = np.random.default_rng([config.seed, 0xFEA7])
    x, y = _plane(config)
    scale = config.Z / 32.0
    parts = []

    parts.append(
        PartMaps2D(
            PartId(0, PartKind.BACKGROUND, "background"),
            feature=_feature(rng, config, x),
            depth=np.full((config.H, config.W), bgd),
            density=np.full((config.H, config.W), config.background_density),
            depth_mode=DepthMode.ABSOLUTE,
        )
    )

    face_rho2 = ((x - 0.5) / 0.30) ** 2 + ((y - 0.5) / 0.38) ** 2
    face_depth = fbd - 2.0 * scale * np.clip(1.0 - face_rho2, 0.0, None)
    face_density = config.face_density / (1.0 + np.exp(12.0 * (np.sqrt(face_rho2) - 1.0)))
    parts.append(
        PartMaps2D(
            PartId(1, PartKind.FACE_BASE, "face"),
            feature=_feature(rng, config, x),
            depth=np.clip(face_depth, 0, config.Z - 1),
            density=face_density,
            depth_mode=DepthMode.ABSOLUTE,
        )
    )
    face_depth32 = parts[1].depth.astype(np.float64)

    for k, blob in enumerate(blobs):
        rho2 = blob_rho2(blob, config)
        density = np.where(rho2 <= BLOB_SUPPORT**2, blob.peak * np.exp(-2.0 * rho2), 0.0)
        rel = blob.depth_offset * scale * np.exp(-0.5 * rho2)
        # keep absolute depth inside the grid
        rel = np.clip(face_depth32 + rel, 0, config.Z - 1) - face_depth32
        if config.relative_depth:
            depth, mode = rel, DepthMode.RELATIVE
        else:
            depth, mode = face_depth32 + rel, DepthMode.ABSOLUTE
        parts.append(
            PartMaps2D(
                PartId(k + 2, PartKind.FACIAL, _facial_name(k)),
                feature=_feature(rng, config, x),
                depth=depth,
                density=density,
                depth_mode=mode,
            )
        )
    return PartSet(tuple(parts))


def occlusion_scene(
    size=64,
    channels=4,
    depth_levels=32,
    front_depth=None,
    rear_depth=None,
    front_density=150.0,
    rear_density=300.0,
    front_radius=0.3,
):
    """Two-part scene: an opaque face-base disk in front of a denser
    full-plane background.

    With transmittance-weighted masks the disk wins inside its footprint;
    with uniform weights the background's larger integrated density wins.
    Depths default to ``Z / 4`` (disk) and ``5 Z / 8`` (background).
    """
    if front_depth is None:
        front_depth = depth_levels / 4
    if rear_depth is None:
        rear_depth = depth_levels * 5 / 8
    if not (0 <= front_depth < rear_depth <= depth_levels - 1):
        raise ConfigError("need 0 <= front_depth < rear_depth <= Z-1")
    shape = (size, size)
    xs = (np.arange(size) + 0.5) / size - 0.5
    x, y = np.meshgrid(xs, xs, indexing="xy")
    disk = (x**2 + y**2) <= front_radius**2
    feat_bg = np.zeros(shape + (channels,))
    feat_bg[..., 0] = 1.0
    feat_fg = np.zeros(shape + (channels,))
    feat_fg[..., min(1, channels - 1)] = 1.0
    bg = PartMaps2D(
        PartId(0, PartKind.BACKGROUND, "background"),
        feature=feat_bg,
        depth=np.full(shape, rear_depth),
        density=np.full(shape, rear_density),
        depth_mode=DepthMode.ABSOLUTE,
    )
    fg = PartMaps2D(
        PartId(1, PartKind.FACE_BASE, "face"),
        feature=feat_fg,
        depth=np.full(shape, front_depth),
        density=np.where(disk, front_density, 0.0),
        depth_mode=DepthMode.ABSOLUTE,
    )
    return PartSet((bg, fg))


# ---------------------------------------------------------------------------
# On-disk container

_TENSORS = ("feat", "depth", "dens")


def _stems(index):
    return {t: f"part{index}.{t}.f32" for t in _TENSORS}


def save_part_set(parts, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in sorted(parts.parts, key=lambda p: p.id.index):
        files = _stems(p.id.index)
        for tensor, arr in zip(_TENSORS, (p.feature, p.depth, p.density)):
            (path / files[tensor]).write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        entries.append(
            {
                "index": p.id.index,
                "kind": p.id.kind.value,
                "name": p.id.name,
                "depth_mode": p.depth_mode.value,
                "files": files,
            }
        )
    manifest = {
        "version": FORMAT_VERSION,
        "K": parts.K,
        "H": parts.H,
        "W": parts.W,
        "C": parts.C,
        "parts": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _read_tensor(path, shape, where):
    if not path.is_file():
        raise PartSetFormatError(f"{where}: missing tensor file {path.name}")
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise PartSetFormatError(
            f"{where}: tensor file {path.name} has {len(raw)} bytes, expected {expected}"
        )
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise PartSetFormatError(f"{where}: tensor file {path.name} contains non-finite values")
    return arr


def load_part_set(path):
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.is_file():
        raise PartSetFormatError(f"{path}: no manifest.json")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PartSetFormatError(f"{mpath}: unreadable manifest ({exc})") from None
    if manifest.get("version") != FORMAT_VERSION:
        raise PartSetFormatError(
            f"{mpath}: unsupported version {manifest.get('version')!r}, expected {FORMAT_VERSION}"
        )
    try:
        K, H, W, C = (int(manifest[k]) for k in ("K", "H", "W", "C"))
        entries = list(manifest["parts"])
    except (KeyError, TypeError, ValueError) as exc:
        raise PartSetFormatError(f"{mpath}: missing or invalid field ({exc})") from None
    if len(entries) != K:
        raise PartSetFormatError(f"{mpath}: manifest declares K={K} but lists {len(entries)} parts")
    parts = []
    for e in entries:
        try:
            index = int(e["index"])
            kind = PartKind(e["kind"])
            name = str(e["name"])
            mode = DepthMode(e["depth_mode"])
            files = e.get("files") or _stems(index)
        except (KeyError, ValueError) as exc:
            raise PartSetFormatError(f"{mpath}: bad part entry {e!r} ({exc})") from None
        where = f"part {index} ({name})"
        tensors = {}
        for tensor, shape in zip(_TENSORS, ((H, W, C), (H, W), (H, W))):
            tensors[tensor] = _read_tensor(path / files[tensor], shape, f"{where} {tensor}")
        try:
            parts.append(
                PartMaps2D(
                    PartId(index, kind, name),
                    feature=tensors["feat"],
                    depth=tensors["depth"],
                    density=tensors["dens"],
                    depth_mode=mode,
                )
            )
        except ConfigError as exc:
            raise PartSetFormatError(str(exc)) from None
    try:
        return PartSet(tuple(parts))
    except ConfigError as exc:
        raise PartSetFormatError(f"{mpath}: {exc}") from None
