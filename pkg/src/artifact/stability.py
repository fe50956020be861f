"""Stable configurations, stripes, absorption paths, and boundary counts.

Zero-temperature stability is local: a configuration is stable when every
site strictly agrees with the majority of its neighbors.  On free-boundary
square grids the stable set is exactly the set of striped configurations
(monochromatic full crossings, every stripe of width >= 2), which this
module can enumerate, count, detect, and reach via explicit flip paths.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DefectError, GeometryError
from .lattice import FREE, SQUARE, Configuration, build_square

HORIZONTAL = "Horizontal"
VERTICAL = "Vertical"
UNIFORM = "Uniform"


def _neighbor_sums(config):
    """Sum of neighbor spins per site, frozen -1 neighbors included."""
    lat = config.lattice
    s = config.spins.astype(np.int32)
    tot = lat.adjacency_matrix().dot(s)
    if lat.frozen_count:
        tot = tot - np.asarray(lat.frozen_neighbor_count, dtype=np.int32)
    return tot


def is_stable(config, field=None):
    """True when no site can flip: m > l everywhere (ties must lean on the
    field when one is given)."""
    s = config.spins.astype(np.int32)
    d = s * _neighbor_sums(config)
    if field is None:
        return bool(np.all(d > 0))
    sign = 1 if field == "Plus" else -1
    return bool(np.all((d > 0) | ((d == 0) & (s == sign))))


@dataclass(frozen=True)
class SiteClassification:
    """Per-site agreement classes.

    codes[v] is one of "a+", "a-", "u+", "u-", "d+", "d-": strict agreement
    with the neighborhood majority (a), a tie (u), or strict disagreement
    (d), tagged by the site's own spin.
    """

    codes: tuple
    counts: dict

    def sites(self, code):
        return tuple(v for v, c in enumerate(self.codes) if c == code)

    @property
    def stable(self):
        return self.counts["u+"] + self.counts["u-"] + \
            self.counts["d+"] + self.counts["d-"] == 0


def classify_sites(config):
    s = config.spins.astype(np.int32)
    d = s * _neighbor_sums(config)
    codes = []
    for v in range(config.lattice.site_count):
        kind = "a" if d[v] > 0 else ("u" if d[v] == 0 else "d")
        codes.append(kind + ("+" if s[v] > 0 else "-"))
    counts = {c: 0 for c in ("a+", "a-", "u+", "u-", "d+", "d-")}
    for c in codes:
        counts[c] += 1
    return SiteClassification(tuple(codes), counts)


# -- stripes ---------------------------------------------------------------


@dataclass(frozen=True)
class StripeDescription:
    """Striped configuration in canonical form.

    cuts are the ascending stripe end positions (the last equals the side);
    consecutive cuts differ by at least 2.  spins holds one +1/-1 per
    stripe, alternating by construction.  A single full-width stripe is
    canonicalized to orientation Uniform.
    """

    side: int
    orientation: str
    cuts: tuple
    spins: tuple


def config_from_stripes(description, boundary=FREE):
    k = description.side
    lat = build_square(k, boundary)
    arr = np.empty(k * k, dtype=np.int8)
    grid = arr.reshape(k, k)
    start = 0
    for cut, spin in zip(description.cuts, description.spins):
        if description.orientation == VERTICAL:
            grid[:, start:cut] = spin
        else:
            grid[start:cut, :] = spin
        start = cut
    return Configuration.from_spins(lat, arr)


def _run_description(signs, side, orientation):
    """Signs of consecutive crossings -> StripeDescription, or None if some
    run is shorter than 2."""
    cuts = []
    spins = []
    run_start = 0
    for pos in range(1, side + 1):
        if pos == side or signs[pos] != signs[run_start]:
            if pos - run_start < 2:
                return None
            cuts.append(pos)
            spins.append(int(signs[run_start]))
            run_start = pos
    if len(cuts) == 1:
        orientation = UNIFORM
    return StripeDescription(side, orientation, tuple(cuts), tuple(spins))


def is_striped(config):
    """StripeDescription when the configuration is striped, else None."""
    lat = config.lattice
    if lat.kind != SQUARE:
        raise GeometryError("stripes are defined on square grids")
    k = lat.side
    grid = config.spins.reshape(k, k)
    if np.all(grid[:, :1] == grid):
        desc = _run_description(grid[:, 0], k, HORIZONTAL)
        if desc is not None:
            return desc
    if np.all(grid[:1, :] == grid):
        desc = _run_description(grid[0, :], k, VERTICAL)
        if desc is not None:
            return desc
    return None


def fibonacci(k):
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def striped_count_formula(k):
    """Closed-form stable-state count 4 * f_{k-1}; counts the two uniform
    configurations once per orientation, hence double."""
    return 4 * fibonacci(k - 1)


def distinct_striped_count(k):
    """Number of distinct striped configurations on a k x k grid."""
    return striped_count_formula(k) - 2


def count_stripe_descriptions(k):
    """Number a_k of single-orientation stripe patterns: +-1 sequences of
    length k whose runs all have length >= 2, counted by direct dynamic
    enumeration over (last spin, run-so-far) states."""
    if k < 2:
        return 0
    # state: run of the current spin so far is 1 (just started) or >= 2
    short, settled = 1, 0   # per current spin value; symmetric, so track one
    for _ in range(k - 1):
        short, settled = settled, short + settled
    return 2 * settled


def enumerate_stable(side, boundary=FREE):
    """All stable configurations by exhaustive scan; needs side^2 <= 25."""
    n = side * side
    if n > 25:
        raise GeometryError("exhaustive enumeration is limited to side^2 <= 25")
    lat = build_square(side, boundary)
    adj = lat.adjacency_matrix().toarray().astype(np.int16)
    fz = np.asarray(lat.frozen_neighbor_count, dtype=np.int16)
    found = []
    chunk = 1 << 18
    for base in range(0, 1 << n, chunk):
        count = min(chunk, (1 << n) - base)
        codes = np.arange(base, base + count, dtype=np.int64)
        bits = (codes[:, None] >> np.arange(n)) & 1
        spins = (2 * bits - 1).astype(np.int16)
        d = spins * (spins @ adj.T - fz)
        stable = np.all(d > 0, axis=1)
        for code in codes[stable]:
            bits_v = (int(code) >> np.arange(n)) & 1
            found.append(Configuration.from_spins(
                lat, (2 * bits_v - 1).astype(np.int8)))
    return found


# -- absorption paths ------------------------------------------------------


def _component(spins, lat, v):
    """Monochromatic connected component of v (iterative flood fill)."""
    target = spins[v]
    comp = {v}
    queue = deque([v])
    dyn = lat.dyn_neighbors
    while queue:
        u = queue.popleft()
        for w in dyn[u]:
            if w not in comp and spins[w] == target:
                comp.add(w)
                queue.append(w)
    return comp


def _ext_boundary(comp, lat):
    out = set()
    dyn = lat.dyn_neighbors
    for u in comp:
        for w in dyn[u]:
            if w not in comp:
                out.add(w)
    return out


def _flip_prob_positive(spins, lat, u):
    """m <= l at u, i.e. one refresh flips u with positive probability."""
    s = spins[u]
    tot = -lat.frozen_neighbor_count[u]
    for w in lat.dyn_neighbors[u]:
        tot += spins[w]
    return s * tot <= 0


class _PathBuilder:
    """Mutable spins plus the growing single-flip witness path."""

    def __init__(self, config, budget=None):
        self.lat = config.lattice
        self.spins = config.spins.tolist()
        self.path = [config]
        self.budget = budget

    def flip(self, u):
        if not _flip_prob_positive(self.spins, self.lat, u):
            raise DefectError(
                f"constructed path tried a zero-probability flip at site {u}")
        if self.budget is not None:
            self.budget -= 1
            if self.budget < 0:
                raise DefectError("absorption path exceeded its flip budget")
        self.spins[u] = -self.spins[u]
        self.path.append(Configuration.from_spins(
            self.lat, np.asarray(self.spins, dtype=np.int8)))

    def config(self):
        return self.path[-1]


def _expand(builder, v):
    """Single-flip expansion: flip tie-or-minority external-boundary sites
    (lowest site index first) until none remain.  Returns the component."""
    lat = builder.lat
    spins = builder.spins
    target = spins[v]
    comp = _component(spins, lat, v)
    ext = _ext_boundary(comp, lat)

    def absorb(u):
        # u just joined; pull in any same-spin region it now connects to
        stack = [u]
        comp.add(u)
        ext.discard(u)
        while stack:
            w = stack.pop()
            for x in lat.dyn_neighbors[w]:
                if x in comp:
                    continue
                if spins[x] == target:
                    comp.add(x)
                    ext.discard(x)
                    stack.append(x)
                else:
                    ext.add(x)

    while True:
        cand = [u for u in ext if _flip_prob_positive(spins, lat, u)]
        if not cand:
            return comp
        u = min(cand)
        builder.flip(u)
        absorb(u)


def expand_component(config, site):
    """Grow the monochromatic component of `site` by single flips of
    flippable boundary sites until the boundary is quiet; for border sites
    the result component is a rectangle pinned to that border."""
    if config.lattice.kind != SQUARE:
        raise GeometryError("component expansion is defined on square grids")
    builder = _PathBuilder(config)
    _expand(builder, site)
    return builder.config()


def _bounding_rect(comp, k):
    rows = [u // k for u in comp]
    cols = [u % k for u in comp]
    r0, r1 = min(rows), max(rows)
    c0, c1 = min(cols), max(cols)
    if (r1 - r0 + 1) * (c1 - c0 + 1) != len(comp):
        raise DefectError("expanded component is not a rectangle")
    return r0, r1, c0, c1


def _flip_rectangle(builder, rect, k):
    """Flip a rectangle via single flips, then square off the surrounding
    corners where that is possible with positive-probability flips."""
    r0, r1, c0, c1 = rect
    lat = builder.lat
    spins = builder.spins
    s = spins[r0 * k + c0]

    corners = [(r0, c0), (r0, c1), (r1, c0), (r1, c1)]
    start = None
    for rr, cc in corners:
        if _flip_prob_positive(spins, lat, rr * k + cc):
            start = (rr, cc)
            break
    if start is None:
        raise DefectError("rectangle flip found no flippable corner")
    rr, cc = start
    rows = range(r0, r1 + 1) if rr == r0 else range(r1, r0 - 1, -1)
    cols = list(range(c0, c1 + 1) if cc == c0 else range(c1, c0 - 1, -1))
    for r in rows:
        for c in cols:
            builder.flip(r * k + c)

    # corner completion: outward triples next to each rectangle corner,
    # flipped near-to-far, skipping any that are absent, already opposite,
    # or not flippable (the next expansion pass absorbs those instead)
    for (rr, cc), (dr, dc) in (
            ((r0, c0), (-1, -1)), ((r0, c1), (-1, 1)),
            ((r1, c0), (1, -1)), ((r1, c1), (1, 1))):
        for r, c in ((rr + 2 * dr, cc + dc), (rr + dr, cc + 2 * dc),
                     (rr + 2 * dr, cc + 2 * dc)):
            if 0 <= r < k and 0 <= c < k:
                u = r * k + c
                if builder.spins[u] == s and \
                        _flip_prob_positive(builder.spins, lat, u):
                    builder.flip(u)


def _merge_width1_stripes(builder, desc, k):
    """Flip each width-1 stripe onto its neighbor, lowest first."""
    orientation = desc.orientation
    start = 0
    for cut, _ in zip(desc.cuts, desc.spins):
        if cut - start == 1:
            for pos in range(k):
                u = start * k + pos if orientation == HORIZONTAL \
                    else pos * k + start
                builder.flip(u)
            return True
        start = cut
    return False


def absorb_path(config):
    """A path of positive-probability single flips from `config` to a
    stable configuration: grow the component at the grid origin into a
    maximal rectangle, flip it when it is no stripe, hop over stripes, and
    finally merge any leftover width-1 stripe into its neighbor.  Every
    step is validated; the total flip count is capped at 8 n^2."""
    lat = config.lattice
    if lat.kind != SQUARE or lat.boundary != FREE:
        raise GeometryError(
            "absorption paths are defined on free-boundary square grids")
    k = lat.side
    n = lat.site_count
    builder = _PathBuilder(config, budget=8 * n * n)
    v = 0
    while not is_stable(builder.config()):
        comp = _expand(builder, v)
        r0, r1, c0, c1 = _bounding_rect(comp, k)
        spans_cols = c0 == 0 and c1 == k - 1
        spans_rows = r0 == 0 and r1 == k - 1
        if spans_cols and spans_rows:
            break
        if spans_cols:
            if r1 + 1 >= k:
                break
            v = (r1 + 1) * k
        elif spans_rows:
            if c1 + 1 >= k:
                break
            v = c1 + 1
        else:
            _flip_rectangle(builder, (r0, r1, c0, c1), k)

    # width-1 first-stripe fix-up (defensive: expansion normally eats these)
    guard = 0
    while not is_stable(builder.config()):
        desc = is_striped_relaxed(builder.config())
        if desc is None or guard > k:
            raise DefectError("absorption path ended in an unstable state")
        if not _merge_width1_stripes(builder, desc, k):
            raise DefectError("absorption path ended in an unstable state")
        guard += 1
    return builder.path


def is_striped_relaxed(config):
    """Stripe description allowing width-1 stripes (None when the rows or
    columns are not monochromatic crossings)."""
    lat = config.lattice
    k = lat.side
    grid = config.spins.reshape(k, k)
    for axis, orientation in ((1, HORIZONTAL), (0, VERTICAL)):
        line = grid[:, 0] if axis == 1 else grid[0, :]
        full = grid[:, :1] if axis == 1 else grid[:1, :]
        if np.all(full == grid):
            cuts = []
            spins = []
            start = 0
            for pos in range(1, k + 1):
                if pos == k or line[pos] != line[start]:
                    cuts.append(pos)
                    spins.append(int(line[start]))
                    start = pos
            return StripeDescription(k, orientation, tuple(cuts),
                                     tuple(spins))
    return None


# -- boundary counting -----------------------------------------------------


@dataclass(frozen=True)
class HopfCounts:
    """Plane-embedded tie/minority counts against component count.

    Counts use the configuration embedded in the infinite minus sea (every
    off-grid site is -1).  When assumptions_ok holds, the combination
    nu_plus - nu_minus + 2 nd_plus - 2 nd_minus equals 4 L.
    """

    nu_plus: int
    nu_minus: int
    nd_plus: int
    nd_minus: int
    L: int
    shard_free: bool
    assumptions_ok: bool

    @property
    def combination(self):
        return (self.nu_plus - self.nu_minus
                + 2 * self.nd_plus - 2 * self.nd_minus)


def hopf_counts(config):
    lat = config.lattice
    if lat.kind != SQUARE:
        raise GeometryError("boundary counts are defined on square grids")
    k = lat.side
    grid = config.spins.reshape(k, k).astype(np.int8)
    pad = -np.ones((k + 2, k + 2), dtype=np.int8)
    pad[1:-1, 1:-1] = grid
    core = pad[1:-1, 1:-1]
    up = pad[2:, 1:-1]
    down = pad[:-2, 1:-1]
    left = pad[1:-1, :-2]
    right = pad[1:-1, 2:]
    tot = up.astype(np.int16) + down + left + right
    d = core * tot
    plus = core == 1
    nu = d == 0
    nd = d < 0
    nu_p = int(np.sum(nu & plus))
    nu_m = int(np.sum(nu & ~plus))
    nd_p = int(np.sum(nd & plus))
    nd_m = int(np.sum(nd & ~plus))

    flanked = ((left == right) & (left == -core)) | \
        ((up == down) & (up == -core))
    shard_free = not bool(flanked.any())

    border_clear = not (plus[0, :].any() or plus[-1, :].any()
                        or plus[:, 0].any() or plus[:, -1].any())

    # plus components via iterative flood fill
    seen = np.zeros((k, k), dtype=bool)
    sizes = []
    for r0 in range(k):
        for c0 in range(k):
            if plus[r0, c0] and not seen[r0, c0]:
                size = 0
                stack = [(r0, c0)]
                seen[r0, c0] = True
                while stack:
                    r, c = stack.pop()
                    size += 1
                    for rr, cc in ((r + 1, c), (r - 1, c),
                                   (r, c + 1), (r, c - 1)):
                        if 0 <= rr < k and 0 <= cc < k and \
                                plus[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            stack.append((rr, cc))
                sizes.append(size)
    L = sum(1 for s in sizes if s >= 2)
    sizes_ok = all(s >= 2 for s in sizes)

    # minus sites not reachable from the outside sea are lakes; a lake sits
    # next to some plus component at distance 1, breaking the separation
    # assumption
    minus_pad = pad == -1
    reach = np.zeros_like(minus_pad)
    stack = [(0, 0)]
    reach[0, 0] = True
    while stack:
        r, c = stack.pop()
        for rr, cc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= rr < k + 2 and 0 <= cc < k + 2 and \
                    minus_pad[rr, cc] and not reach[rr, cc]:
                reach[rr, cc] = True
                stack.append((rr, cc))
    no_lakes = bool(np.all(reach[minus_pad]))

    assumptions_ok = shard_free and sizes_ok and border_clear and no_lakes
    return HopfCounts(nu_p, nu_m, nd_p, nd_m, L, shard_free, assumptions_ok)


def census_rows(sides, brute_force_limit=25):
    """Census data: closed-form count, exhaustive count where feasible, and
    the deduplicated striped count."""
    rows = []
    for k in sides:
        brute = None
        if k * k <= brute_force_limit:
            brute = len(enumerate_stable(k))
        rows.append({
            "side": k,
            "formula_count": striped_count_formula(k),
            "brute_force_count": brute,
            "distinct_striped_count": distinct_striped_count(k),
        })
    return rows
