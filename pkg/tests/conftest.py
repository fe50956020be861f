import numpy as np
import pytest

from artifact import Configuration, build_square


def rect_config(side, rects):
    """All-minus side x side grid with plus rectangles (row, col, h, w)."""
    grid = -np.ones((side, side), dtype=np.int8)
    for r, c, h, w in rects:
        grid[r:r + h, c:c + w] = 1
    return Configuration.from_spins(build_square(side), grid.reshape(-1))


def scatter_rectangles(rng, side, n_rects, min_dim=2, max_dim=4):
    """Random disjoint plus rectangles: pairwise gaps >= 2 and at least one
    row/column clear of every grid border, so the boundary-count
    assumptions hold by construction."""
    placed = []
    attempts = 0
    while len(placed) < n_rects and attempts < 200:
        attempts += 1
        h = int(rng.integers(min_dim, max_dim + 1))
        w = int(rng.integers(min_dim, max_dim + 1))
        if side - h < 2 or side - w < 2:
            continue
        r = int(rng.integers(1, side - h))
        c = int(rng.integers(1, side - w))
        close = any(r < r2 + h2 + 2 and r2 < r + h + 2
                    and c < c2 + w2 + 2 and c2 < c + w + 2
                    for r2, c2, h2, w2 in placed)
        if not close:
            placed.append((r, c, h, w))
    return rect_config(side, placed), placed


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
