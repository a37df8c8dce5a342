"""Depth-smoothness regularizer, a finite-difference gradient harness and the
difference-map metrics used to quantify edit leakage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, UsageError

LAMBDA_DS = 0.1

# the 8-neighborhood, (dx, dy)
NEIGHBOR_OFFSETS = tuple((dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0))


@dataclass(frozen=True)
class LossReport:
    l_ds: float
    weighted: float
    lambda_ds: float = LAMBDA_DS


@dataclass(frozen=True)
class GradCheckReport:
    max_abs_err: float
    max_rel_err: float
    n_probes: int
    passed: bool
    tolerance: float

    def as_dict(self):
        return {
            "max_abs_err": self.max_abs_err,
            "max_rel_err": self.max_rel_err,
            "n_probes": self.n_probes,
            "pass": self.passed,
            "tolerance": self.tolerance,
        }


def _depths(parts):
    if hasattr(parts, "depth_stack"):
        return parts.depth_stack()
    d = np.asarray(parts, dtype=np.float64)
    if d.ndim == 2:
        d = d[None]
    if d.ndim != 3:
        raise UsageError(f"depth stack must be (K, H, W), got {d.shape}")
    return d


def _shifted_pairs(d, dx, dy):
    """Views (center, neighbor) over all pixels whose (dx, dy) neighbor exists."""
    _, H, W = d.shape
    ys = slice(max(0, -dy), H - max(0, dy))
    xs = slice(max(0, -dx), W - max(0, dx))
    yn = slice(max(0, dy), H - max(0, -dy))
    xn = slice(max(0, dx), W - max(0, -dx))
    return d[:, ys, xs], d[:, yn, xn], (ys, xs)


def normalizer(K, H, W):
    return 8 * K * H * W


def ds_loss(depths):
    """Mean squared depth difference over 8-neighborhoods.

    Out-of-bounds neighbors are skipped but the normalizer stays
    ``8 * K * H * W``.
    """
    d = _depths(depths)
    total = 0.0
    for dx, dy in NEIGHBOR_OFFSETS:
        c, n, _ = _shifted_pairs(d, dx, dy)
        total += float(np.sum((c - n) ** 2))
    return total / normalizer(*d.shape)


def ds_grad(depths):
    """Analytic gradient of :func:`ds_loss`, shape ``(K, H, W)``.

    Every ordered pair appears twice in the loss (once from each end), which
    gives ``4 / A`` times the summed differences to valid neighbors.
    """
    d = _depths(depths)
    g = np.zeros_like(d)
    for dx, dy in NEIGHBOR_OFFSETS:
        c, n, (ys, xs) = _shifted_pairs(d, dx, dy)
        g[:, ys, xs] += c - n
    return g * (4.0 / normalizer(*d.shape))


def depth_smoothness_loss(parts, lambda_ds=LAMBDA_DS):
    return regularized_loss_term(parts, lambda_ds)


def depth_smoothness_grad(parts):
    """Per-part gradient grids, in part-index order."""
    return list(ds_grad(parts))


def regularized_loss_term(parts, lambda_ds=LAMBDA_DS):
    if lambda_ds < 0:
        raise DomainError("lambda_ds must be non-negative")
    l_ds = ds_loss(parts)
    return LossReport(l_ds=l_ds, weighted=lambda_ds * l_ds, lambda_ds=lambda_ds)


def _probe_indices(size, max_probes):
    if size <= max_probes:
        return np.arange(size)
    return np.unique(np.linspace(0, size - 1, max_probes).round().astype(np.intp))


def finite_diff_check(func, x, grad, h=1e-4, tol=1e-4, max_probes=1024, floor=1e-12):
    """Compare an analytic gradient with central differences.

    Args:
        func: scalar function of an array shaped like ``x``.
        x: point at which to check.
        grad: analytic gradient, as an array or as a callable of ``x``.
        h: finite-difference step.
        tol: maximum allowed relative error.
        max_probes: coordinates probed; a deterministic evenly spaced subset
            is used when ``x`` has more entries.
        floor: lower bound of the relative-error denominator.
    """
    if not h > 0:
        raise DomainError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    analytic = np.asarray(grad(x) if callable(grad) else grad, dtype=np.float64)
    if analytic.shape != x.shape:
        raise UsageError(f"gradient shape {analytic.shape} != input shape {x.shape}")
    flat = x.reshape(-1)
    ga = analytic.reshape(-1)
    probes = _probe_indices(flat.size, max_probes)
    max_abs = max_rel = 0.0
    for j in probes:
        orig = flat[j]
        flat[j] = orig + h
        fp = float(func(x))
        flat[j] = orig - h
        fm = float(func(x))
        flat[j] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"function is not finite near coordinate {j}")
        num = (fp - fm) / (2 * h)
        err = abs(num - ga[j])
        max_abs = max(max_abs, err)
        max_rel = max(max_rel, err / max(abs(num), abs(ga[j]), floor))
    return GradCheckReport(float(max_abs), float(max_rel), int(probes.size), bool(max_rel <= tol), float(tol))


# ---------------------------------------------------------------------------
# Difference metrics


@dataclass(frozen=True, eq=False)
class DiffMetrics:
    map: np.ndarray
    d_mean: float
    d_mean_masked: float
    mask: np.ndarray

    def record(self):
        h, w = self.map.shape
        return {
            "d_mean": self.d_mean,
            "d_mean_masked": self.d_mean_masked,
            "w": int(w),
            "h": int(h),
            "masked_pixel_count": int(np.count_nonzero(self.mask)),
        }


def diff_map(img_a, img_b):
    """Per-pixel mean absolute difference over the three color channels."""
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[-1] != 3:
        raise UsageError(f"images must be (h, w, 3), got {a.shape}")
    diff = np.abs(a - b)
    return (diff[..., 0] + diff[..., 1] + diff[..., 2]) / 3.0


def d_mean(dmap):
    # flattened so the reduction order matches d_mean_masked
    return float(np.mean(np.asarray(dmap, dtype=np.float64).ravel()))


def d_mean_masked(dmap, edited_mask):
    """Mean of the difference map over non-edited pixels."""
    dmap = np.asarray(dmap, dtype=np.float64)
    edited = np.asarray(edited_mask, dtype=bool)
    if edited.shape != dmap.shape:
        raise UsageError(f"mask shape {edited.shape} != map shape {dmap.shape}")
    keep = ~edited
    if not keep.any():
        raise DomainError("every pixel is marked as edited; masked mean is undefined")
    return float(np.mean(dmap[keep]))


def difference_metrics(img_a, img_b, edited_mask=None):
    dmap = diff_map(img_a, img_b)
    if edited_mask is None:
        edited_mask = np.zeros(dmap.shape, dtype=bool)
    edited = np.asarray(edited_mask, dtype=bool)
    return DiffMetrics(dmap, d_mean(dmap), d_mean_masked(dmap, edited), edited)
