"""Independent oracles and small fixtures shared by the test modules.

The oracles here are deliberately naive (scalar loops, ``math`` instead of
numpy) so that they share no code path with the package.
"""

import itertools
import math

import numpy as np
import pytest

from partlift.part_model import DepthMode, PartId, PartKind, PartMaps2D, PartSet


def trilinear_oracle(grid, p):
    """8-term weighted sum over the corners of the cell containing ``p``.

    ``grid`` is indexed ``[x, y, z, ...]``; ``p`` lies inside the grid.
    """
    dims = grid.shape[:3]
    base = [min(int(math.floor(p[a])), dims[a] - 2) for a in range(3)]
    frac = [p[a] - base[a] for a in range(3)]
    total = 0.0
    for cx, cy, cz in itertools.product((0, 1), repeat=3):
        w = 1.0
        for c, f in zip((cx, cy, cz), frac):
            w *= f if c else 1.0 - f
        total = total + w * grid[base[0] + cx, base[1] + cy, base[2] + cz]
    return total


def weights_oracle(sigma, delta):
    """Transmittance and compositing weights by a scalar loop."""
    T, w = [], []
    acc = 0.0
    for s, d in zip(sigma, delta):
        t = math.exp(-acc)
        T.append(t)
        w.append(t * (1.0 - math.exp(-s * d)))
        acc += s * d
    return T, w


def lds_oracle(depths):
    """Depth-smoothness loss by explicit enumeration of ordered neighbor pairs."""
    K, H, W = depths.shape
    total = 0.0
    for k in range(K):
        for y in range(H):
            for x in range(W):
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        if dx == dy == 0:
                            continue
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < H and 0 <= nx < W:
                            total += (depths[k, y, x] - depths[k, ny, nx]) ** 2
    return total / (8 * K * H * W)


def make_part(index, kind, name, feature, depth, density, mode=None):
    if mode is None:
        mode = DepthMode.RELATIVE if kind is PartKind.FACIAL else DepthMode.ABSOLUTE
    return PartMaps2D(PartId(index, kind, name), feature, depth, density, mode)


def random_part_set(rng, H, W, C, Z, n_facial=1):
    """Random but valid part set with depths inside ``[0, Z-1]``."""
    parts = [
        make_part(
            0,
            PartKind.BACKGROUND,
            "background",
            rng.normal(size=(H, W, C)),
            rng.uniform(0, Z - 1, (H, W)),
            rng.uniform(0, 3, (H, W)),
        ),
        make_part(
            1,
            PartKind.FACE_BASE,
            "face",
            rng.normal(size=(H, W, C)),
            rng.uniform(Z / 4, 3 * Z / 4, (H, W)),
            rng.uniform(0, 3, (H, W)),
        ),
    ]
    for k in range(n_facial):
        parts.append(
            make_part(
                2 + k,
                PartKind.FACIAL,
                f"f{k}",
                rng.normal(size=(H, W, C)),
                rng.uniform(-Z / 4, Z / 4, (H, W)),
                rng.uniform(0, 3, (H, W)),
            )
        )
    return PartSet(tuple(parts))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# Acceptance report: one line per criterion, shown in the terminal summary.

ACCEPTANCE_LINES = {}


def record_acceptance(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} :: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
