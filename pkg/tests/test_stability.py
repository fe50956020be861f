"""Stable-state structure: the striped census, absorption paths, and the
discrete boundary-count identity."""

import numpy as np
import pytest

import artifact as a
from artifact import Configuration, DefectError, GeometryError
from conftest import rect_config, scatter_rectangles


def _grid(rows):
    arr = np.array(rows, dtype=np.int8)
    lat = a.build_square(arr.shape[0])
    return Configuration.from_spins(lat, arr.reshape(-1))


# -- stability predicate -----------------------------------------------------


def test_uniform_configs_are_stable():
    lat = a.build_square(5)
    assert a.is_stable(Configuration.all_plus(lat))
    assert a.is_stable(Configuration.all_minus(lat))


def test_checkerboard_is_unstable():
    c = _grid([[1, -1, 1], [-1, 1, -1], [1, -1, 1]])
    assert not a.is_stable(c)


def test_width_two_stripes_are_stable_width_one_not():
    two = _grid([[1, 1, 1, 1], [1, 1, 1, 1], [-1, -1, -1, -1],
                 [-1, -1, -1, -1]])
    assert a.is_stable(two)
    one = _grid([[1, 1, 1, 1], [-1, -1, -1, -1], [-1, -1, -1, -1],
                 [-1, -1, -1, -1]])
    assert not a.is_stable(one)


def test_field_turns_droplet_ties_stable():
    c = rect_config(4, [(1, 1, 2, 2)])
    assert not a.is_stable(c)                  # corner ties refresh both ways
    assert a.is_stable(c, field="Plus")
    assert not a.is_stable(c, field="Minus")


def test_classify_sites_counts():
    stripe = _grid([[1, 1, 1, 1], [-1, -1, -1, -1], [-1, -1, -1, -1],
                    [-1, -1, -1, -1]])
    cls = a.classify_sites(stripe)
    # width-1 plus stripe: corners are ties, stripe interior still agrees
    assert cls.counts == {"a+": 2, "a-": 12, "u+": 2, "u-": 0,
                          "d+": 0, "d-": 0}
    assert sorted(cls.sites("u+")) == [0, 3]
    assert not cls.stable

    board = _grid([[1, -1, 1], [-1, 1, -1], [1, -1, 1]])
    cls = a.classify_sites(board)
    assert cls.counts["d+"] == 5 and cls.counts["d-"] == 4
    assert not cls.stable

    assert a.classify_sites(
        Configuration.all_plus(a.build_square(3))).stable


# -- striped census ----------------------------------------------------------


def test_enumerate_stable_counts():
    assert len(a.enumerate_stable(2)) == 2
    assert len(a.enumerate_stable(3)) == 2
    assert len(a.enumerate_stable(4)) == 6
    assert len(a.enumerate_stable(5)) == 10


def test_enumerate_stable_guard():
    with pytest.raises(GeometryError):
        a.enumerate_stable(6)


def _min_run_two_strings(k):
    # brute-force oracle: binary strings of length k, every run >= 2
    out = []
    for m in range(2 ** k):
        bits = [(m >> i) & 1 for i in range(k)]
        runs = []
        for b in bits:
            if runs and runs[-1][0] == b:
                runs[-1][1] += 1
            else:
                runs.append([b, 1])
        if all(r[1] >= 2 for r in runs):
            out.append(tuple(bits))
    return out


@pytest.mark.parametrize("k", range(2, 13))
def test_stripe_description_count_matches_brute_force(k):
    assert a.count_stripe_descriptions(k) == len(_min_run_two_strings(k))


def test_fibonacci_and_census_formula():
    assert [a.fibonacci(i) for i in range(1, 8)] == [1, 1, 2, 3, 5, 8, 13]
    assert a.striped_count_formula(4) == 8
    # the two uniform states are counted once per orientation
    assert a.distinct_striped_count(4) == 6
    for k in range(2, 10):
        assert a.distinct_striped_count(k) == a.striped_count_formula(k) - 2


def test_census_rows_reports_both_counts():
    rows = a.census_rows([2, 3, 4, 6], brute_force_limit=25)
    by_side = {r["side"]: r for r in rows}
    assert by_side[4]["formula_count"] == 8
    assert by_side[4]["brute_force_count"] == 6
    assert by_side[4]["distinct_striped_count"] == 6
    assert by_side[6]["brute_force_count"] is None   # above the scan limit
    assert by_side[6]["distinct_striped_count"] == 18


def test_config_from_stripes_roundtrip():
    desc = a.StripeDescription(side=6, orientation=a.HORIZONTAL,
                               cuts=(2, 4, 6), spins=(1, -1, 1))
    c = a.config_from_stripes(desc)
    got = a.is_striped(c)
    assert got is not None
    assert got.cuts == desc.cuts and got.spins == desc.spins
    assert got.orientation == a.HORIZONTAL
    assert a.is_stable(c)


def test_single_stripe_canonicalizes_to_uniform():
    desc = a.StripeDescription(side=4, orientation=a.VERTICAL,
                               cuts=(4,), spins=(-1,))
    got = a.is_striped(a.config_from_stripes(desc))
    assert got.orientation == a.UNIFORM


def test_is_striped_rejects_non_stripes():
    assert a.is_striped(_grid([[1, -1, 1], [-1, 1, -1], [1, -1, 1]])) is None
    width_one = _grid([[1, 1, 1, 1], [-1, -1, -1, -1], [1, 1, 1, 1],
                       [1, 1, 1, 1]])
    assert a.is_striped(width_one) is None
    assert a.is_striped_relaxed(width_one) is not None


def test_every_striped_description_is_stable():
    # full k=5 description set, both orientations
    built = set()
    for orientation in (a.HORIZONTAL, a.VERTICAL):
        for bits in _min_run_two_strings(5):
            cuts, spins, run = [], [], bits[0]
            for pos, b in enumerate(bits):
                if b != run:
                    cuts.append(pos)
                    spins.append(1 if run else -1)
                    run = b
            cuts.append(5)
            spins.append(1 if run else -1)
            c = a.config_from_stripes(a.StripeDescription(
                5, orientation, tuple(cuts), tuple(spins)))
            assert a.is_stable(c)
            built.add(c)
    assert built == set(a.enumerate_stable(5))


# -- absorption paths --------------------------------------------------------


def _check_path(path):
    assert a.is_stable(path[-1])
    for before, after in zip(path, path[1:]):
        delta = np.nonzero(before.spins != after.spins)[0]
        assert len(delta) == 1
        v = int(delta[0])
        assert a.zero_temp_flip_prob(before, v) > 0.0


def test_absorb_path_exhaustive_k3():
    lat = a.build_square(3)
    for code in range(512):
        bits = np.array([(code >> v) & 1 for v in range(9)], dtype=np.uint8)
        path = a.absorb_path(Configuration.from_bits(lat, bits))
        _check_path(path)


@pytest.mark.parametrize("side,cases", [(5, 150), (6, 100), (8, 40)])
def test_absorb_path_random_grids(side, cases, rng):
    lat = a.build_square(side)
    for _ in range(cases):
        path = a.absorb_path(a.random_config(lat, 0.5, rng))
        _check_path(path)


def test_absorb_path_handles_width_one_stripe():
    c = _grid([[1, 1, 1, 1], [-1, -1, -1, -1], [1, 1, 1, 1],
               [1, 1, 1, 1]])
    _check_path(a.absorb_path(c))


def test_absorb_path_fixed_points_are_trivial_paths():
    lat = a.build_square(4)
    for c in a.enumerate_stable(4):
        path = a.absorb_path(c)
        assert len(path) == 1 and path[0] == c


def test_expand_component_fills_its_bounding_rectangle(rng):
    lat = a.build_square(6)
    for _ in range(60):
        c = a.random_config(lat, 0.5, rng)
        v = int(rng.integers(lat.site_count))
        expanded = a.expand_component(c, v)
        # expansion only ever flips sites toward the seed's spin
        target = c.spin(v)
        changed = np.nonzero(expanded.spins != c.spins)[0]
        assert all(expanded.spin(int(u)) == target for u in changed)
        comp = _component_of(expanded, v)
        rows = [s // 6 for s in comp]
        cols = [s % 6 for s in comp]
        area = (max(rows) - min(rows) + 1) * (max(cols) - min(cols) + 1)
        assert len(comp) == area


def _component_of(config, v):
    lat = config.lattice
    target = config.spin(v)
    seen = {v}
    stack = [v]
    while stack:
        w = stack.pop()
        for u in lat.dyn_neighbors[w]:
            if u not in seen and config.spin(u) == target:
                seen.add(u)
                stack.append(u)
    return seen


# -- boundary-count identity -------------------------------------------------


def test_hopf_counts_hand_oracles():
    one = a.hopf_counts(rect_config(8, [(2, 2, 3, 3)]))
    assert (one.nu_plus, one.nu_minus, one.nd_plus, one.nd_minus) == \
        (4, 0, 0, 0)
    assert one.L == 1 and one.assumptions_ok
    assert one.combination == 4

    two = a.hopf_counts(rect_config(8, [(1, 1, 2, 2), (5, 5, 2, 2)]))
    assert two.L == 2 and two.combination == 8

    # L-shaped union: five convex corners, one concave
    ell = a.hopf_counts(rect_config(8, [(1, 1, 2, 4), (3, 1, 2, 2)]))
    assert (ell.nu_plus, ell.nu_minus) == (5, 1)
    assert ell.L == 1 and ell.combination == 4


def test_hopf_assumption_gating():
    assert not a.hopf_counts(
        rect_config(8, [(0, 1, 2, 2)])).assumptions_ok     # touches border
    shard = a.hopf_counts(rect_config(8, [(2, 2, 1, 1), (5, 5, 2, 2)]))
    assert not shard.shard_free and not shard.assumptions_ok
    grid = -np.ones((8, 8), dtype=np.int8)
    grid[2:5, 2:5] = 1
    grid[3, 3] = -1                                        # enclosed lake
    lake = Configuration.from_spins(a.build_square(8), grid.reshape(-1))
    assert not a.hopf_counts(lake).assumptions_ok


def test_hopf_identity_on_scattered_rectangles(rng):
    hits = 0
    for _ in range(200):
        side = int(rng.integers(8, 15))
        c, rects = scatter_rectangles(rng, side, int(rng.integers(1, 4)))
        if not rects:
            continue
        h = a.hopf_counts(c)
        assert h.assumptions_ok
        assert h.L == len(rects)
        assert h.combination == 4 * h.L
        hits += 1
    assert hits > 150
