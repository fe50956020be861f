"""Finite lattices and packed spin configurations.

Sites carry spins in {-1, +1}.  Dynamic sites are indexed row-major:
coordinate (i, j) with i the column and j the row, (1, 1) at the bottom
left, maps to index (j - 1) * width + (i - 1).  A lattice may also own
frozen boundary sites (spin -1 forever); those get indices >= site_count
so they can appear in neighbor lists without ever being update targets.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .errors import ConfigError, GeometryError

SQUARE = "SquareGrid"
HONEYCOMB = "Honeycomb"
FREE = "Free"
MINUS_FRAME = "MinusFrame"

_SCHEMA_VERSION = 1


class Lattice:
    """Immutable adjacency structure plus an optional frozen -1 boundary."""

    __slots__ = (
        "kind", "boundary", "side", "rows", "cols", "width",
        "site_count", "frozen_count", "neighbors", "dyn_neighbors",
        "frozen_neighbor_count", "degrees", "_coords", "_frozen_coords",
        "_adj", "_hash",
    )

    def __init__(self, kind, boundary, side, rows, cols, width,
                 neighbors, frozen_coords):
        self.kind = kind
        self.boundary = boundary
        self.side = side
        self.rows = rows
        self.cols = cols
        self.width = width
        self.site_count = len(neighbors)
        self.frozen_count = len(frozen_coords)
        self.neighbors = neighbors
        n = self.site_count
        self.dyn_neighbors = tuple(
            tuple(w for w in nbrs if w < n) for nbrs in neighbors)
        self.frozen_neighbor_count = tuple(
            sum(1 for w in nbrs if w >= n) for nbrs in neighbors)
        self.degrees = tuple(len(nbrs) for nbrs in neighbors)
        self._coords = None
        self._frozen_coords = tuple(frozen_coords)
        self._adj = None
        self._hash = hash(self._key())

    # -- identity ---------------------------------------------------------

    def _key(self):
        return (self.kind, self.boundary, self.side, self.rows, self.cols)

    def __eq__(self, other):
        return isinstance(other, Lattice) and self._key() == other._key()

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.kind == SQUARE:
            return f"Lattice({self.kind} side={self.side} {self.boundary})"
        return f"Lattice({self.kind} rows={self.rows} cols={self.cols})"

    # -- geometry ---------------------------------------------------------

    def site_index(self, i, j):
        """Map coordinate (column i, row j), 1-based, to a dynamic index."""
        height = self.site_count // self.width
        if not (1 <= i <= self.width and 1 <= j <= height):
            raise GeometryError(f"coordinate ({i}, {j}) outside lattice")
        return (j - 1) * self.width + (i - 1)

    def site_coord(self, v):
        """Inverse of site_index; also resolves frozen indices."""
        if v >= self.site_count:
            return self._frozen_coords[v - self.site_count]
        j, i = divmod(v, self.width)
        return (i + 1, j + 1)

    def degree(self, v):
        return self.degrees[v]

    def is_frozen(self, v):
        return v >= self.site_count

    def adjacency_matrix(self):
        """Sparse dynamic-to-dynamic adjacency (CSR); frozen edges excluded."""
        if self._adj is None:
            from scipy.sparse import csr_matrix
            rows, cols = [], []
            for v, nbrs in enumerate(self.dyn_neighbors):
                rows.extend([v] * len(nbrs))
                cols.extend(nbrs)
            data = np.ones(len(rows), dtype=np.int8)
            self._adj = csr_matrix(
                (data, (rows, cols)),
                shape=(self.site_count, self.site_count))
        return self._adj

    def descriptor(self):
        d = {"kind": self.kind}
        if self.kind == SQUARE:
            d["side"] = self.side
            d["boundary"] = self.boundary
        else:
            d["rows"] = self.rows
            d["cols"] = self.cols
        return d


def build_square(side, boundary=FREE):
    """Square grid of the given side (>= 2), Free or MinusFrame boundary.

    MinusFrame surrounds the grid with a ring of frozen -1 sites (the four
    ring corners are omitted; they touch no dynamic site), so every dynamic
    site has degree 4.
    """
    if side < 2:
        raise GeometryError("square grid needs side >= 2")
    if boundary not in (FREE, MINUS_FRAME):
        raise GeometryError(f"unknown boundary {boundary!r}")
    n = side * side
    frozen_coords = []
    frozen_ids = {}
    if boundary == MINUS_FRAME:
        for i in range(1, side + 1):
            for coord in ((i, 0), (i, side + 1)):
                frozen_ids[coord] = n + len(frozen_coords)
                frozen_coords.append(coord)
        for j in range(1, side + 1):
            for coord in ((0, j), (side + 1, j)):
                frozen_ids[coord] = n + len(frozen_coords)
                frozen_coords.append(coord)

    def resolve(i, j):
        if 1 <= i <= side and 1 <= j <= side:
            return (j - 1) * side + (i - 1)
        return frozen_ids.get((i, j))

    neighbors = []
    for j in range(1, side + 1):
        for i in range(1, side + 1):
            nbrs = []
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                w = resolve(i + di, j + dj)
                if w is not None:
                    nbrs.append(w)
            neighbors.append(tuple(nbrs))
    return Lattice(SQUARE, boundary, side, None, None, side,
                   tuple(neighbors), frozen_coords)


def build_honeycomb(rows, cols):
    """Honeycomb lattice in a brick-wall embedding, free boundary.

    Sites live on a rows x (2 * cols) index grid.  Every site links to its
    horizontal neighbors; site (i, j) links vertically to (i, j + 1) exactly
    when i + j is even.  Interior sites then have degree 3 and each pair of
    adjacent rows tiles into hexagonal faces.
    """
    if rows < 2 or cols < 2:
        raise GeometryError("honeycomb needs rows >= 2 and cols >= 2")
    width = 2 * cols
    n = rows * width

    def idx(i, j):
        return (j - 1) * width + (i - 1)

    neighbors = []
    for j in range(1, rows + 1):
        for i in range(1, width + 1):
            nbrs = []
            if i > 1:
                nbrs.append(idx(i - 1, j))
            if i < width:
                nbrs.append(idx(i + 1, j))
            if (i + j) % 2 == 0 and j < rows:
                nbrs.append(idx(i, j + 1))
            if (i + (j - 1)) % 2 == 0 and j > 1:
                nbrs.append(idx(i, j - 1))
            neighbors.append(tuple(nbrs))
    return Lattice(HONEYCOMB, FREE, None, rows, cols, width,
                   tuple(neighbors), [])


class Configuration:
    """A full spin assignment on a lattice's dynamic sites.

    Stored as a packed bit vector (bit 1 <=> spin +1) so configurations are
    cheap to hash, compare, and serialize.  Instances are value objects:
    mutating operations return new configurations.
    """

    __slots__ = ("lattice", "packed", "_spins")

    def __init__(self, lattice, packed):
        self.lattice = lattice
        self.packed = packed
        self._spins = None

    @classmethod
    def from_spins(cls, lattice, spins):
        arr = np.asarray(spins, dtype=np.int8)
        if arr.shape != (lattice.site_count,):
            raise ConfigError("spin vector length does not match lattice")
        if not np.all(np.abs(arr) == 1):
            raise ConfigError("spins must be +1 or -1")
        bits = ((arr + 1) // 2).astype(np.uint8)
        return cls(lattice, np.packbits(bits).tobytes())

    @classmethod
    def from_bits(cls, lattice, bits):
        arr = np.fromiter((1 if b else -1 for b in bits), dtype=np.int8,
                          count=lattice.site_count)
        return cls.from_spins(lattice, arr)

    @classmethod
    def all_plus(cls, lattice):
        return cls.from_spins(lattice, np.ones(lattice.site_count, np.int8))

    @classmethod
    def all_minus(cls, lattice):
        return cls.from_spins(lattice, -np.ones(lattice.site_count, np.int8))

    @property
    def spins(self):
        """Spins as a read-only int8 array of +1/-1."""
        if self._spins is None:
            n = self.lattice.site_count
            bits = np.unpackbits(
                np.frombuffer(self.packed, dtype=np.uint8), count=n)
            arr = (bits.astype(np.int8) * 2) - 1
            arr.setflags(write=False)
            self._spins = arr
        return self._spins

    def spin(self, v):
        return int(self.spins[v])

    def flip(self, v):
        arr = self.spins.copy()
        arr[v] = -arr[v]
        return Configuration.from_spins(self.lattice, arr)

    @property
    def plus_count(self):
        return int(np.count_nonzero(self.spins == 1))

    def magnetization(self):
        """Average spin as an exact rational."""
        total = int(self.spins.sum(dtype=np.int64))
        return Fraction(total, self.lattice.site_count)

    def to_json(self):
        d = self.lattice.descriptor()
        d["schema_version"] = _SCHEMA_VERSION
        d["spins_hex"] = self.packed.hex()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        lattice = lattice_from_descriptor(d)
        packed = bytes.fromhex(d["spins_hex"])
        expect = (lattice.site_count + 7) // 8
        if len(packed) != expect:
            raise ConfigError("spins_hex length does not match lattice")
        config = cls(lattice, packed)
        # reject stray bits in the final partial byte
        tail = lattice.site_count % 8
        if tail:
            if packed[-1] & ((1 << (8 - tail)) - 1):
                raise ConfigError("padding bits in spins_hex must be zero")
        return config

    def __eq__(self, other):
        return (isinstance(other, Configuration)
                and self.lattice == other.lattice
                and self.packed == other.packed)

    def __hash__(self):
        return hash((self.lattice, self.packed))

    def __repr__(self):
        return f"Configuration({self.lattice!r}, {self.plus_count}+)"


def lattice_from_descriptor(d):
    kind = d.get("kind")
    if kind == SQUARE:
        return build_square(d["side"], d.get("boundary", FREE))
    if kind == HONEYCOMB:
        return build_honeycomb(d["rows"], d["cols"])
    raise GeometryError(f"unknown lattice kind {kind!r}")


def local_counts(config, v):
    """(m, l): neighbors of v agreeing / disagreeing with its spin.

    Frozen boundary sites count as spin -1, so m + l equals the full degree.
    """
    lat = config.lattice
    spins = config.spins
    s = int(spins[v])
    total = -lat.frozen_neighbor_count[v]
    for w in lat.dyn_neighbors[v]:
        total += spins[w]
    deg = lat.degrees[v]
    m = (deg + s * total) // 2
    return m, deg - m


def random_config(lattice, p, rng):
    """i.i.d. spins, +1 with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError("p must lie in [0, 1]")
    arr = np.where(rng.random(lattice.site_count) < p, 1, -1).astype(np.int8)
    return Configuration.from_spins(lattice, arr)
