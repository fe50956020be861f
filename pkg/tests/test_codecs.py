"""Encoders/decoders: bit plumbing, round trips, and persistence of
codewords under the dynamics they were designed for."""

import itertools

import numpy as np
import pytest

import artifact as a
from artifact import (ConfigError, Configuration, DynamicsParams,
                      GeometryError)


def all_messages(nbits):
    return [bits for bits in itertools.product((0, 1), repeat=nbits)]


# -- bit plumbing ------------------------------------------------------------


def test_as_bits_pads_and_validates():
    # short messages keep their leading position; zeros are appended
    assert a.as_bits([1, 0, 1], 5) == (1, 0, 1, 0, 0)
    assert a.as_bits("101", 5) == (1, 0, 1, 0, 0)
    assert a.as_bits([], 3) == (0, 0, 0)
    with pytest.raises(ConfigError):
        a.as_bits([1, 0, 1, 1], 3)
    with pytest.raises(ConfigError):
        a.as_bits([2, 0], 4)


def test_hex_bits_roundtrip():
    assert a.hex_to_bits("8f", 8) == (1, 0, 0, 0, 1, 1, 1, 1)
    assert a.bits_to_hex((1, 0, 0, 0, 1, 1, 1, 1)) == "8f"
    for nbits in (1, 4, 9, 12):
        for bits in all_messages(min(nbits, 6))[:40]:
            padded = a.as_bits(bits, nbits)
            assert a.hex_to_bits(a.bits_to_hex(padded), nbits) == padded


# -- stripe codec ------------------------------------------------------------


def test_stripe_codec_capacity_and_roundtrip():
    codec = a.StripeCodec(8)
    assert codec.capacity_bits == 4
    for bits in all_messages(4):
        config = codec.encode(bits)
        assert a.is_stable(config)
        assert a.is_striped(config) is not None
        assert codec.decode(config) == bits


def test_stripe_codec_odd_side_copies_last_bit():
    codec = a.StripeCodec(9)
    assert codec.capacity_bits == 4
    config = codec.encode((0, 1, 0, 1))
    grid = config.spins.reshape(9, 9)
    assert np.all(grid[7] == grid[8])        # leftover row extends last bit
    assert a.is_stable(config)
    assert codec.decode(config) == (0, 1, 0, 1)


def test_stripe_codec_survives_majority_noise():
    codec = a.StripeCodec(8)
    config = codec.encode((1, 0, 1, 1))
    grid = config.spins.reshape(8, 8).copy()
    grid[0, :3] *= -1                        # 3 of 16 sites in stripe 0
    noisy = Configuration.from_spins(config.lattice, grid.reshape(-1))
    assert codec.decode(noisy) == (1, 0, 1, 1)


def test_stripe_free_functions_match_class():
    from artifact.codecs import stripe_decode, stripe_encode
    bits = (1, 1, 0, 0)
    assert stripe_decode(stripe_encode(bits, 8)) == bits


# -- droplet codecs ----------------------------------------------------------


def test_droplet_codec_geometry():
    codec = a.DropletCodec(16, 16)
    assert codec.blocks_per_axis == 2 and codec.capacity_bits == 4
    assert codec.block_side == 4
    with pytest.raises(GeometryError):
        a.DropletCodec(16, 15)               # not a perfect square
    with pytest.raises(GeometryError):
        a.DropletCodec(6, 36)                # no block fits


def test_droplet_codec_roundtrip_and_z_asymmetry():
    codec = a.DropletCodec(16, 16)
    for bits in all_messages(4):
        config = codec.encode(bits)
        assert codec.decode(config) == bits
    # all-minus decodes as the all-zero message: a one never appears
    assert codec.decode(Configuration.all_minus(codec.lattice)) == \
        (0, 0, 0, 0)


def test_droplet_erosion_never_grows(rng):
    codec = a.DropletCodec(16, 16)
    config = codec.encode((1, 0, 0, 1))
    params = DynamicsParams()
    count = config.plus_count
    for _ in range(20):
        config = a.run_discrete(config, 500, params, rng)
        assert config.plus_count <= count
        count = config.plus_count


def test_field_droplet_codewords_are_stable_under_field():
    codec = a.field_droplet_codec(14)
    assert codec.capacity_bits == 9
    for bits in ((1,) * 9, (0,) * 9, (1, 0, 1, 0, 1, 0, 1, 0, 1)):
        config = codec.encode(bits)
        assert a.is_stable(config, field="Plus")
        assert codec.decode(config) == bits


# -- betastripe codec --------------------------------------------------------


def test_betastripe_layout_and_roundtrip():
    codec = a.BetaStripeCodec(8)
    assert codec.capacity_bits == 3
    assert codec.regions == ((1,), (4, 5), (8,))
    for bits in all_messages(3):
        assert codec.decode(codec.encode(bits)) == bits
    assert a.BetaStripeCodec(64).capacity_bits == 17
    with pytest.raises(GeometryError):
        a.BetaStripeCodec(7)


def test_betastripe_decode_is_row_majority():
    codec = a.BetaStripeCodec(8)
    config = codec.encode((1, 1, 0))
    grid = config.spins.reshape(8, 8).copy()
    grid[3, :3] *= -1                        # minority damage in region 1
    noisy = Configuration.from_spins(config.lattice, grid.reshape(-1))
    assert codec.decode(noisy) == (1, 1, 0)


# -- honeycomb codec ---------------------------------------------------------


def test_honeycomb_tile_counts():
    assert a.HoneycombCodec(4, 6).capacity_bits == 2
    assert a.HoneycombCodec(8, 16).capacity_bits == 11


def test_honeycomb_codewords_are_stable_and_roundtrip():
    codec = a.HoneycombCodec(4, 6)
    for bits in all_messages(codec.capacity_bits):
        config = codec.encode(bits)
        assert a.is_stable(config)
        assert codec.decode(config) == bits


def test_honeycomb_larger_instance_spot_roundtrip(rng):
    codec = a.HoneycombCodec(8, 16)
    for _ in range(25):
        bits = tuple(int(b) for b in rng.integers(0, 2, codec.capacity_bits))
        config = codec.encode(bits)
        assert a.is_stable(config)
        assert codec.decode(config) == bits


# -- persistence under dynamics ---------------------------------------------


@pytest.mark.parametrize("make,params", [
    (lambda: a.StripeCodec(8), DynamicsParams()),
    (lambda: a.HoneycombCodec(4, 6), DynamicsParams()),
    (lambda: a.field_droplet_codec(10), DynamicsParams(field="Plus")),
])
def test_codewords_persist_under_their_dynamics(make, params, rng):
    codec = make()
    for bits in all_messages(codec.capacity_bits)[:16]:
        config = codec.encode(bits)
        final = a.run_discrete(config, 100000, params, rng)
        assert final == config
        assert codec.decode(final) == bits


def test_codewords_persist_step_by_step(rng):
    # same check without the absorbed-state fast path: drive single steps
    codec = a.StripeCodec(6)
    config = codec.encode((1, 0, 1))
    params = DynamicsParams()
    current = config
    for _ in range(2000):
        current = a.step_discrete(current, params, rng)
    assert current == config


# -- registry ----------------------------------------------------------------


def test_make_codec_dispatch():
    assert a.make_codec("stripe", side=8).name == "stripe"
    assert a.make_codec("droplet", side=16, area=16).name == "droplet"
    fd = a.make_codec("field_droplet", side=10)
    assert fd.name == "droplet" and fd.field == "Plus"
    assert a.make_codec("betastripe", side=8).name == "betastripe"
    assert a.make_codec("honeycomb", rows=4, cols=6).name == "honeycomb"
    with pytest.raises(ConfigError):
        a.make_codec("turbo", side=8)
    with pytest.raises(ConfigError):
        a.make_codec("stripe")               # missing side


def test_descriptors_name_their_geometry():
    d = a.DropletCodec(16, 16).descriptor()
    assert d["codec"] == "droplet" and d["blocks_per_axis"] == 2
    s = a.StripeCodec(8).descriptor()
    assert s["codec"] == "stripe" and s["capacity_bits"] == 4
