"""Coding schemes that store bit strings in lattice configurations.

Four schemes with different robustness/capacity trade-offs:

- StripeCodec: one bit per pair of rows; codewords are stable, so they
  survive zero-temperature dynamics forever.  Theta(sqrt(n)) bits.
- DropletCodec: one bit per well-separated square droplet; droplets erode
  in Theta(area) time, giving a Z-channel per block.  Theta(n) bits with a
  retention-time budget.
- DropletCodec with an external field: ties resolve toward the field, so
  2x2 droplets are permanently stable.  Theta(n) bits, zero error.
- BetaStripeCodec: stripe layout tuned for finite-temperature readout
  (width-1 border stripes plus width-2 interior stripes behind width-2
  walls), decoded by per-stripe majority.
- HoneycombCodec: one bit per hexagonal tile on the degree-3 lattice,
  where a 6-cycle of matching spins can never tie.  Theta(n) bits, stable.

Messages are sequences of 0/1; shorter messages are zero-padded up to the
codec capacity.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, GeometryError
from .lattice import FREE, Configuration, build_honeycomb, build_square


def as_bits(bits, capacity):
    """Normalize a 0/1 iterable or string to a zero-padded tuple."""
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ConfigError("message bits must be 0 or 1")
    if len(out) > capacity:
        raise ConfigError(
            f"message of {len(out)} bits exceeds capacity {capacity}")
    return out + (0,) * (capacity - len(out))


def hex_to_bits(hexstr, nbits):
    """Hex message string to an MSB-first bit tuple of length nbits."""
    value = int(hexstr, 16) if hexstr else 0
    if value >> nbits:
        raise ConfigError(f"hex message does not fit in {nbits} bits")
    return tuple((value >> (nbits - 1 - i)) & 1 for i in range(nbits))


def bits_to_hex(bits):
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    width = max(1, (len(bits) + 3) // 4)
    return format(value, f"0{width}x")


class StripeCodec:
    """floor(k/2) bits as horizontal stripes of width >= 2.

    Bit i sets rows 2i-1 and 2i (1-based); a leftover odd row copies the
    last bit so every run keeps width >= 2.  Codewords are stable.
    """

    name = "stripe"

    def __init__(self, side):
        self.side = side
        self.lattice = build_square(side, FREE)
        self.capacity_bits = side // 2
        if self.capacity_bits < 1:
            raise GeometryError("stripe codec needs side >= 2")

    def encode(self, bits):
        bits = as_bits(bits, self.capacity_bits)
        k = self.side
        grid = np.empty((k, k), dtype=np.int8)
        for i, b in enumerate(bits):
            grid[2 * i:2 * i + 2, :] = 1 if b else -1
        if k % 2:
            grid[k - 1, :] = 1 if bits[-1] else -1
        return Configuration.from_spins(self.lattice, grid.reshape(-1))

    def decode(self, config):
        k = self.side
        grid = config.spins.reshape(k, k)
        return tuple(
            1 if int(np.sum(grid[2 * i, :] == 1)) * 2 >= k else 0
            for i in range(self.capacity_bits))

    def descriptor(self):
        return {"codec": self.name, "side": self.side,
                "capacity_bits": self.capacity_bits}


class DropletCodec:
    """K^2 bits as square plus-droplets behind all-minus walls.

    Blocks sit on a pitch of sqrt(a)+2 with walls of width >= 2 between
    and around them, so each block evolves independently.  A set bit is a
    droplet that erodes in Theta(a) time; decode reports 1 while any plus
    spin remains, making each block a Z-channel.  With an external field,
    tie sites resolve toward the field and the droplets never erode.
    """

    name = "droplet"

    def __init__(self, side, area, field=None):
        root = math.isqrt(area)
        if root * root != area or root < 2:
            raise GeometryError("droplet area must be a perfect square >= 4")
        self.side = side
        self.area = area
        self.field = field
        self.block_side = root
        pitch = root + 2
        self.blocks_per_axis = (side - 2) // pitch
        if self.blocks_per_axis < 1:
            raise GeometryError(
                f"side {side} has no room for droplets of area {area}")
        self.capacity_bits = self.blocks_per_axis ** 2
        self.lattice = build_square(side, FREE)
        # 0-based start of block i (1-based): i * pitch - block_side
        self._starts = [i * pitch - root
                        for i in range(1, self.blocks_per_axis + 1)]

    def block_slices(self, bi, bj):
        """Row/col slices of block (bi, bj), 0-based block indices."""
        r = self._starts[bi]
        c = self._starts[bj]
        w = self.block_side
        return slice(r, r + w), slice(c, c + w)

    def encode(self, bits):
        bits = as_bits(bits, self.capacity_bits)
        k = self.side
        grid = -np.ones((k, k), dtype=np.int8)
        K = self.blocks_per_axis
        for idx, b in enumerate(bits):
            if b:
                rs, cs = self.block_slices(idx // K, idx % K)
                grid[rs, cs] = 1
        return Configuration.from_spins(self.lattice, grid.reshape(-1))

    def decode(self, config):
        grid = config.spins.reshape(self.side, self.side)
        K = self.blocks_per_axis
        out = []
        for idx in range(self.capacity_bits):
            rs, cs = self.block_slices(idx // K, idx % K)
            out.append(1 if bool(np.any(grid[rs, cs] == 1)) else 0)
        return tuple(out)

    def descriptor(self):
        return {"codec": self.name, "side": self.side, "area": self.area,
                "field": self.field, "blocks_per_axis": self.blocks_per_axis,
                "capacity_bits": self.capacity_bits,
                "block_starts": list(self._starts)}


def field_droplet_codec(side, field="Plus"):
    """2x2 droplets pinned by an external field: permanently stable."""
    return DropletCodec(side, 4, field=field)


class BetaStripeCodec:
    """Horizontal stripes laid out for finite-temperature readout.

    Data regions bottom-up: row 1 (width 1), rows {4i, 4i+1} while
    4i+1 <= k-3 (width 2), row k (width 1); all other rows are minus
    walls of width >= 2.  Decode by per-stripe majority with threshold
    k/2 plus sites.
    """

    name = "betastripe"

    def __init__(self, side):
        if side < 8:
            raise GeometryError("betastripe codec needs side >= 8")
        self.side = side
        self.lattice = build_square(side, FREE)
        regions = [(1,)]
        i = 1
        while 4 * i + 1 <= side - 3:
            regions.append((4 * i, 4 * i + 1))
            i += 1
        regions.append((side,))
        self.regions = tuple(regions)   # 1-based row tuples
        self.capacity_bits = len(regions)

    def encode(self, bits):
        bits = as_bits(bits, self.capacity_bits)
        k = self.side
        grid = -np.ones((k, k), dtype=np.int8)
        for region, b in zip(self.regions, bits):
            if b:
                for row in region:
                    grid[row - 1, :] = 1
        return Configuration.from_spins(self.lattice, grid.reshape(-1))

    def decode(self, config):
        k = self.side
        grid = config.spins.reshape(k, k)
        out = []
        for region in self.regions:
            plus = sum(int(np.sum(grid[row - 1, :] == 1)) for row in region)
            out.append(1 if 2 * plus >= k else 0)
        return tuple(out)

    def descriptor(self):
        return {"codec": self.name, "side": self.side,
                "capacity_bits": self.capacity_bits,
                "regions": [list(r) for r in self.regions]}


class HoneycombCodec:
    """One bit per hexagonal 6-cycle tile on the degree-3 lattice.

    A tile whose six sites share a spin has two in-tile neighbors per
    site, so no tile site can ever tie; placement requires every outside
    neighbor to have degree 3 and to touch at most one tile, so sea sites
    cannot tie either.  Codewords are exact fixed points.
    """

    name = "honeycomb"

    def __init__(self, rows, cols):
        self.rows = rows
        self.cols = cols
        self.lattice = build_honeycomb(rows, cols)
        self.tiles = _honeycomb_tiles(self.lattice)
        self.capacity_bits = len(self.tiles)
        if self.capacity_bits < 1:
            raise GeometryError(
                f"honeycomb {rows}x{cols} has no room for tiles")

    def encode(self, bits):
        bits = as_bits(bits, self.capacity_bits)
        spins = -np.ones(self.lattice.site_count, dtype=np.int8)
        for tile, b in zip(self.tiles, bits):
            if b:
                for v in tile:
                    spins[v] = 1
        return Configuration.from_spins(self.lattice, spins)

    def decode(self, config):
        spins = config.spins
        return tuple(
            1 if sum(1 for v in tile if spins[v] == 1) >= 3 else 0
            for tile in self.tiles)

    def descriptor(self):
        return {"codec": self.name, "rows": self.rows, "cols": self.cols,
                "capacity_bits": self.capacity_bits,
                "tiles": [list(t) for t in self.tiles]}


def _honeycomb_tiles(lat):
    """Greedy disjoint placement of hexagon tiles with safe surroundings."""
    width = lat.width
    tiles = []
    claimed = set()
    for j in range(1, lat.rows):          # 1-based rows, tile uses j, j+1
        for i in range(1, width - 1):     # tile uses cols i, i+1, i+2
            if (i + j) % 2 != 0:
                continue
            tile = [lat.site_index(i + di, j + dj)
                    for dj in (0, 1) for di in (0, 1, 2)]
            ext = set()
            for v in tile:
                for w in lat.dyn_neighbors[v]:
                    if w not in tile:
                        ext.add(w)
            if any(lat.degree(w) != 3 for w in ext):
                continue
            footprint = set(tile) | ext
            if footprint & claimed:
                continue
            tiles.append(tuple(tile))
            claimed |= footprint
    return tuple(tiles)


# spec-shaped functional entry points


def stripe_encode(bits, side):
    return StripeCodec(side).encode(bits)


def stripe_decode(config):
    return StripeCodec(config.lattice.side).decode(config)


def droplet_encode(bits, side, area):
    return DropletCodec(side, area).encode(bits)


def droplet_decode(config, area):
    return DropletCodec(config.lattice.side, area).decode(config)


def betastripe_encode(bits, side):
    return BetaStripeCodec(side).encode(bits)


def betastripe_decode(config):
    return BetaStripeCodec(config.lattice.side).decode(config)


def honeycomb_encode(bits, dims):
    return HoneycombCodec(*dims).encode(bits)


def honeycomb_decode(config):
    lat = config.lattice
    return HoneycombCodec(lat.rows, lat.cols).decode(config)


def make_codec(name, **params):
    """Codec factory used by the command-line layer."""
    builders = {
        "stripe": lambda: StripeCodec(params["side"]),
        "droplet": lambda: DropletCodec(params["side"], params["area"],
                                        params.get("field")),
        "field_droplet": lambda: field_droplet_codec(
            params["side"], params.get("field", "Plus")),
        "betastripe": lambda: BetaStripeCodec(params["side"]),
        "honeycomb": lambda: HoneycombCodec(params["rows"], params["cols"]),
    }
    if name not in builders:
        raise ConfigError(f"unknown codec {name!r}")
    try:
        return builders[name]()
    except KeyError as missing:
        raise ConfigError(f"codec {name!r} needs parameter {missing}") from None
