"""Transmittance-weighted feature rendering over the fused volume.

Frames are rendered in fixed-size tiles of covered rays. Tile boundaries do
not depend on the worker count and every per-ray reduction runs in a fixed
order, so output is bit-identical for any number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError
from .lifting import GridGeom, MappingFn, cell_coords, corner_table, interpolate, lift_part_set, sample_trilinear
from .maskrender import MaskWeightMode, init_mask_pixel, softmax_mask
from .raycam import CameraConfig, generate_rays, place_samples_batch

THREADS_ENV = "PARTLIFT_THREADS"
TILE_RAYS = 256


@dataclass(frozen=True, eq=False)
class WeightProfile:
    T: np.ndarray
    w: np.ndarray


def _check_profile(sigma, delta):
    sigma = np.asarray(sigma, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if sigma.shape != delta.shape:
        raise UsageError(f"sigma {sigma.shape} and delta {delta.shape} differ in shape")
    if np.any(sigma < 0):
        raise DomainError("density must be non-negative")
    if np.any(delta <= 0):
        raise DomainError("sample spacing must be positive")
    return sigma, delta


def transmittance(sigma, delta):
    """``T_i = exp(-sum_{j<i} sigma_j delta_j)`` along the trailing axis."""
    sigma, delta = _check_profile(sigma, delta)
    tau = sigma * delta
    acc = np.zeros_like(tau)
    acc[..., 1:] = np.cumsum(tau[..., :-1], axis=-1)
    return np.exp(-acc)


def nerf_weights(sigma, delta):
    """Compositing weights ``w_i = T_i (1 - exp(-sigma_i delta_i))``."""
    sigma, delta = _check_profile(sigma, delta)
    T = transmittance(sigma, delta)
    w = T * -np.expm1(-(sigma * delta))
    return WeightProfile(T, w)


def residual_transmittance(sigma, delta):
    """Transmittance past the last sample, ``exp(-sum_j sigma_j delta_j)``."""
    sigma, delta = _check_profile(sigma, delta)
    return np.exp(-np.sum(sigma * delta, axis=-1))


def _weighted_sum(w, f):
    out = np.zeros(f.shape[:-2] + f.shape[-1:])
    for i in range(f.shape[-2]):
        out += w[..., i, None] * f[..., i, :]
    return out


def render_pixel_feature(batch, fused):
    """Rendered feature of one covered ray (or a batch of them)."""
    feat, dens = sample_trilinear(fused, batch.points)
    prof = nerf_weights(dens, batch.delta)
    return _weighted_sum(prof.w, feat)


@dataclass(frozen=True)
class RenderOptions:
    mapping: MappingFn = field(default_factory=MappingFn)
    active: tuple | None = None  # part indices; None means all
    mask_mode: MaskWeightMode = MaskWeightMode.NERF
    depth_levels: int = 32
    threads: int | None = None
    jitter_seed: int | None = None


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    feature: np.ndarray  # (h, w, C)
    mask: np.ndarray  # (h, w, K), zero on inactive parts
    m_init: np.ndarray  # (h, w, K)
    coverage: np.ndarray  # (h, w) bool
    opacity: np.ndarray  # (h, w) sum of weights
    pose: object
    active: tuple
    mask_mode: MaskWeightMode

    @property
    def labels(self):
        return np.argmax(self.mask, axis=-1)


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _render_tile(fused, points, delta, mode):
    i0, frac = cell_coords(points, fused.geom)
    part_dens = []
    fused_table = None
    for part in fused.active_parts:
        table = corner_table(part, i0)
        part_dens.append(interpolate(table, frac, feature=False)[1])
        if fused_table is None:
            fused_table = table
        else:
            fused_table = {
                c: (fused_table[c][0] + table[c][0], fused_table[c][1] + table[c][1]) for c in table
            }
    feat, dens = interpolate(fused_table, frac)
    prof = nerf_weights(dens, delta)
    feature = _weighted_sum(prof.w, feat)
    m_init = init_mask_pixel(np.stack(part_dens, axis=-2), prof, mode)
    opacity = np.zeros(dens.shape[:-1])
    for i in range(dens.shape[-1]):
        opacity += prof.w[..., i]
    return feature, m_init, opacity


def render_frame(parts, pose, cfg=None, opts=None):
    """Render the feature map and mask stack of a part set at a pose."""
    cfg = cfg or CameraConfig()
    opts = opts or RenderOptions()
    mode = MaskWeightMode(opts.mask_mode)
    geom = GridGeom(parts.W, parts.H, opts.depth_levels)
    fused = lift_part_set(parts, opts.mapping, geom, opts.active)
    active = tuple(sorted(fused.active))

    rays = generate_rays(pose, cfg)
    h, w = rays.shape
    rng = np.random.default_rng(opts.jitter_seed) if opts.jitter_seed is not None else None
    batch = place_samples_batch(rays.origins, rays.directions, geom, cfg.n_samples, rng)

    hit = batch.hit.reshape(-1)
    idx = np.flatnonzero(hit)
    points = batch.points.reshape(-1, cfg.n_samples, 3)[idx]
    delta = batch.delta.reshape(-1, cfg.n_samples)[idx]

    C, K, ka = parts.C, parts.K, len(active)
    feat_out = np.zeros((idx.size, C))
    minit_out = np.zeros((idx.size, ka))
    opac_out = np.zeros(idx.size)
    tiles = [slice(s, min(s + TILE_RAYS, idx.size)) for s in range(0, idx.size, TILE_RAYS)]

    def work(sl):
        f, m, o = _render_tile(fused, points[sl], delta[sl], mode)
        feat_out[sl], minit_out[sl], opac_out[sl] = f, m, o

    threads = resolve_threads(opts.threads)
    if threads == 1 or len(tiles) <= 1:
        for sl in tiles:
            work(sl)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, tiles))

    cols = np.array(active)
    feature = np.zeros((h * w, C))
    feature[idx] = feat_out
    m_init = np.zeros((h * w, K))
    m_init[np.ix_(idx, cols)] = minit_out
    mask = np.zeros((h * w, K))
    mask[:, cols] = 1.0 / ka
    mask[np.ix_(idx, cols)] = softmax_mask(minit_out)
    opacity = np.zeros(h * w)
    opacity[idx] = opac_out
    return RenderedFrame(
        feature=feature.reshape(h, w, C),
        mask=mask.reshape(h, w, K),
        m_init=m_init.reshape(h, w, K),
        coverage=hit.reshape(h, w),
        opacity=opacity.reshape(h, w),
        pose=pose,
        active=active,
        mask_mode=mode,
    )
