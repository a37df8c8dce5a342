"""Per-part semantic masks from lifted densities.

Each part's initial mask value is its own sampled density accumulated along
the ray, weighted either by the transmittance weights of the *fused* volume
(occlusion-aware) or uniformly. A softmax over parts turns the initial values
into the mask vector of a pixel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UsageError


class MaskWeightMode(str, enum.Enum):
    NERF = "nerf"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class MaskStack:
    m: np.ndarray  # (h, w, K)
    mode: MaskWeightMode = MaskWeightMode.NERF


@dataclass(frozen=True, eq=False)
class HiResMask:
    m_hr: np.ndarray  # (s*h, s*w, K)
    scale: int


def init_mask_pixel(part_densities, weights, mode=MaskWeightMode.NERF):
    """Weighted sum of each part's sampled densities along the ray.

    Args:
        part_densities: ``(..., K, N)`` density of every part at every sample.
        weights: a ``WeightProfile`` or an ``(..., N)`` weight array computed
            from the fused density. Ignored in uniform mode except for shape.
        mode: ``MaskWeightMode``.

    Returns:
        ``(..., K)`` initial mask values.
    """
    sig = np.asarray(part_densities, dtype=np.float64)
    w = np.asarray(getattr(weights, "w", weights), dtype=np.float64)
    if sig.ndim < 2 or w.shape[-1] != sig.shape[-1] or w.shape[:-1] != sig.shape[:-2]:
        raise UsageError(
            f"part densities {sig.shape} do not match weights {w.shape} (expected (..., K, N) vs (..., N))"
        )
    mode = MaskWeightMode(mode)
    out = np.zeros(sig.shape[:-1])
    # fixed accumulation order over samples keeps results batch-independent
    for i in range(sig.shape[-1]):
        if mode is MaskWeightMode.NERF:
            out += w[..., None, i] * sig[..., i]
        else:
            out += sig[..., i]
    return out


def softmax_mask(m_init):
    """Stable softmax over the trailing (part) axis."""
    m = np.asarray(m_init, dtype=np.float64)
    e = np.exp(m - m.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _axis_taps(n, s):
    src = (np.arange(n * s) + 0.5) / s - 0.5
    src = np.clip(src, 0.0, n - 1)
    i0 = np.minimum(np.floor(src).astype(np.intp), max(n - 2, 0))
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, src - i0


def upsample_bilinear(m, s):
    """Channelwise bilinear upsampling by an integer factor (half-pixel centers)."""
    m = np.asarray(getattr(m, "m", m), dtype=np.float64)
    if int(s) != s or s < 1:
        raise UsageError(f"scale must be an integer >= 1, got {s}")
    s = int(s)
    if s == 1:
        return m.copy()
    squeeze = m.ndim == 2
    if squeeze:
        m = m[..., None]
    h, w = m.shape[:2]
    y0, y1, fy = _axis_taps(h, s)
    x0, x1, fx = _axis_taps(w, s)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = m[y0][:, x0] * (1 - fx) + m[y0][:, x1] * fx
    bot = m[y1][:, x0] * (1 - fx) + m[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return out[..., 0] if squeeze else out


def compose_hires_mask(m, delta, s):
    """High-resolution mask: bilinear upsample plus an additive residual."""
    up = upsample_bilinear(m, s)
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != up.shape:
        raise UsageError(f"residual shape {delta.shape} != upsampled mask shape {up.shape}")
    return HiResMask(up + delta, int(s))


def argmax_labels(stack):
    """Per-pixel index of the largest channel; ties go to the lowest index."""
    m = np.asarray(getattr(stack, "m", stack))
    return np.argmax(m, axis=-1)
