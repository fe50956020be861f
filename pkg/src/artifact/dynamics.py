"""Single-site spin-flip dynamics, discrete and continuous time.

Update rule: the chosen site refreshes from the conditional Gibbs law of
its neighborhood.  With S = (#minus neighbors) - (#plus neighbors) and
phi(x) = e^(beta x) / (e^(beta x) + e^(-beta x)), the refreshed spin is -1
with probability phi(S).  The probability that a refresh *changes* the
spin works out to phi(l - m) for either current value, where (m, l) count
agreeing/disagreeing neighbors, so at beta = infinity the rule is the
majority vote with ties resolved by a fair coin (or by the external field
when one is set).  Continuous time attaches these as flip rates to
independent exponential clocks, simulated event by event.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .lattice import Configuration

PER_SITE = "PerSiteUnit"
PER_SYSTEM = "PerSystemUnit"
PLUS = "Plus"
MINUS = "Minus"

TIMEOUT = math.inf


def phi(d, beta):
    """P(refreshed spin is -1) when #minus - #plus neighbors equals d."""
    if beta == math.inf:
        return 1.0 if d > 0 else (0.0 if d < 0 else 0.5)
    x = 2.0 * beta * d
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class DynamicsParams:
    beta: float = math.inf
    field: str | None = None
    rate_convention: str = PER_SITE
    freeze_minus: bool = False

    def __post_init__(self):
        if not (self.beta > 0):
            raise ConfigError("beta must be positive (math.inf allowed)")
        if self.field not in (None, PLUS, MINUS):
            raise ConfigError(f"unknown field {self.field!r}")
        if self.field is not None and self.beta != math.inf:
            raise ConfigError("external field is defined only at beta=inf")
        if self.freeze_minus and self.beta == math.inf:
            raise ConfigError("freeze_minus applies to finite beta only")
        if self.rate_convention not in (PER_SITE, PER_SYSTEM):
            raise ConfigError(
                f"unknown rate convention {self.rate_convention!r}")


def _flip_tables(params, max_deg):
    """Flip probability phi(l - m), split for branch-free lookups.

    Returns (tab_pos, tab_neg, tie_plus, tie_minus): tab_pos[d] is the flip
    probability when l - m = d > 0, tab_neg[d] when l - m = -d < 0, and the
    tie entries cover l = m for a +1 / -1 site (where the field matters).
    """
    beta = params.beta
    tab_pos = [0.0] + [phi(d, beta) for d in range(1, max_deg + 1)]
    tab_neg = [0.0] + [phi(-d, beta) for d in range(1, max_deg + 1)]
    if params.field is None:
        tie_plus = tie_minus = phi(0, beta)
    elif params.field == PLUS:
        tie_plus, tie_minus = 0.0, 1.0
    else:
        tie_plus, tie_minus = 1.0, 0.0
    return tab_pos, tab_neg, tie_plus, tie_minus


def _site_flip_prob(spins, u, dyn, fz, tabs, freeze):
    tab_pos, tab_neg, tie_plus, tie_minus = tabs
    s = spins[u]
    if freeze and s < 0:
        return 0.0
    tot = -fz[u]
    for w in dyn[u]:
        tot += spins[w]
    d = -s * tot
    if d > 0:
        return tab_pos[d]
    if d < 0:
        return tab_neg[-d]
    return tie_plus if s > 0 else tie_minus


def minus_update_prob(config, v, beta):
    """P(the refreshed spin at v is -1); phi of #minus - #plus neighbors."""
    lat = config.lattice
    spins = config.spins
    tot = -lat.frozen_neighbor_count[v]
    for w in lat.dyn_neighbors[v]:
        tot += int(spins[w])
    return phi(-tot, beta)


def zero_temp_flip_prob(config, v, field=None):
    """Flip probability of one refresh at beta=inf: 0, 1/2 or 1."""
    params = DynamicsParams(field=field)
    lat = config.lattice
    tabs = _flip_tables(params, max(lat.degrees))
    return _site_flip_prob(config.spins.tolist(), v, lat.dyn_neighbors,
                           lat.frozen_neighbor_count, tabs, False)


def flip_rate(config, v, params):
    """Continuous-time flip rate of site v under the given parameters."""
    lat = config.lattice
    tabs = _flip_tables(params, max(lat.degrees))
    r = _site_flip_prob(config.spins.tolist(), v, lat.dyn_neighbors,
                        lat.frozen_neighbor_count, tabs, params.freeze_minus)
    if params.rate_convention == PER_SYSTEM:
        r /= lat.site_count
    return r


def energy(config):
    """H(sigma) = -sum over edges of sigma(u) sigma(v), frozen edges included."""
    lat = config.lattice
    s = config.spins.astype(np.int64)
    pair = int(s @ lat.adjacency_matrix().dot(s)) // 2
    frozen = int(np.dot(np.asarray(lat.frozen_neighbor_count, np.int64), s))
    return -pair + frozen


class EventLog:
    """Ordered flip records (t, site, new_spin); replayable against an initial
    configuration.  JSONL form is one object per line."""

    def __init__(self, events=None):
        self.events = list(events) if events else []

    def append(self, t, site, spin):
        if self.events and not (t > self.events[-1][0]):
            raise ConfigError("event times must be strictly increasing")
        self.events.append((t, site, spin))

    def __len__(self):
        return len(self.events)

    def replay(self, initial):
        arr = initial.spins.copy()
        for _, site, spin in self.events:
            arr[site] = spin
        return Configuration.from_spins(initial.lattice, arr)

    def to_jsonl(self, fp):
        for t, site, spin in self.events:
            fp.write(json.dumps({"t": t, "site": site, "spin": spin}))
            fp.write("\n")

    @classmethod
    def from_jsonl(cls, fp):
        log = cls()
        for line in fp:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            log.append(d["t"], d["site"], d["spin"])
        return log


class _Draws:
    """Buffered scalar draws from a numpy Generator (hot-loop friendly)."""

    def __init__(self, rng, block=8192):
        self.rng = rng
        self.block = block
        self._uni = None
        self._ui = 0
        self._exp = None
        self._ei = 0
        self._sites = None
        self._si = 0
        self._site_n = None

    def uniform(self):
        if self._uni is None or self._ui >= self.block:
            self._uni = self.rng.random(self.block)
            self._ui = 0
        x = self._uni[self._ui]
        self._ui += 1
        return x

    def exponential(self):
        if self._exp is None or self._ei >= self.block:
            self._exp = self.rng.standard_exponential(self.block)
            self._ei = 0
        x = self._exp[self._ei]
        self._ei += 1
        return x

    def site(self, n):
        if self._sites is None or self._si >= self.block or self._site_n != n:
            self._sites = self.rng.integers(0, n, size=self.block)
            self._si = 0
            self._site_n = n
        v = int(self._sites[self._si])
        self._si += 1
        return v


def step_discrete(config, params, rng):
    """One step of the discrete chain: refresh one uniformly chosen site."""
    lat = config.lattice
    v = int(rng.integers(0, lat.site_count))
    tabs = _flip_tables(params, max(lat.degrees))
    spins = config.spins.tolist()
    p = _site_flip_prob(spins, v, lat.dyn_neighbors,
                        lat.frozen_neighbor_count, tabs, params.freeze_minus)
    flip = p == 1.0 or (p > 0.0 and rng.random() < p)
    return config.flip(v) if flip else config


def run_discrete(config, steps, params, rng, event_log=None):
    """Run the discrete chain for the given number of refresh steps.

    At beta=inf the stable set is absorbing, so once no site has positive
    flip probability the remaining steps are skipped.
    """
    lat = config.lattice
    n = lat.site_count
    dyn = lat.dyn_neighbors
    fz = lat.frozen_neighbor_count
    tabs = _flip_tables(params, max(lat.degrees))
    freeze = params.freeze_minus
    zero_temp = params.beta == math.inf
    spins = config.spins.tolist()

    active = None
    active_count = -1
    if zero_temp:
        active = [_site_flip_prob(spins, u, dyn, fz, tabs, freeze) > 0.0
                  for u in range(n)]
        active_count = sum(active)

    draws = _Draws(rng)
    step = 0
    while step < steps:
        if zero_temp and active_count == 0:
            break
        step += 1
        v = draws.site(n)
        p = _site_flip_prob(spins, v, dyn, fz, tabs, freeze)
        if p == 0.0:
            continue
        if p < 1.0 and draws.uniform() >= p:
            continue
        spins[v] = -spins[v]
        if event_log is not None:
            event_log.append(step, v, spins[v])
        if zero_temp:
            for u in (v, *dyn[v]):
                was = active[u]
                now = _site_flip_prob(spins, u, dyn, fz, tabs, freeze) > 0.0
                if was != now:
                    active[u] = now
                    active_count += 1 if now else -1
    return Configuration.from_spins(lat, spins)


class FenwickSampler:
    """Nonnegative weights with O(log n) point update and weighted sampling."""

    def __init__(self, weights):
        self.n = len(weights)
        self.weights = list(weights)
        self.tree = list(self.weights)
        for i in range(self.n):
            j = i | (i + 1)
            if j < self.n:
                self.tree[j] += self.tree[i]
        self.total = math.fsum(self.weights)

    def set(self, i, w):
        delta = w - self.weights[i]
        if delta == 0.0:
            return
        self.weights[i] = w
        self.total += delta
        j = i
        while j < self.n:
            self.tree[j] += delta
            j |= j + 1

    def rebuild(self):
        self.tree = list(self.weights)
        for i in range(self.n):
            j = i | (i + 1)
            if j < self.n:
                self.tree[j] += self.tree[i]
        self.total = math.fsum(self.weights)

    def find(self, x):
        """Smallest i with weights[0] + ... + weights[i] > x."""
        idx = 0
        bit = 1
        while (bit << 1) <= self.n:
            bit <<= 1
        rem = x
        while bit:
            nxt = idx + bit
            if nxt <= self.n and self.tree[nxt - 1] <= rem:
                rem -= self.tree[nxt - 1]
                idx = nxt
            bit >>= 1
        return min(idx, self.n - 1)


_ABSORBED = "absorbed"
_HORIZON = "horizon"
_HIT = "hit"
_CAP = "cap"


def _kmc(lattice, spins, horizon, params, rng, *, predicate=None,
         event_log=None, max_events=None, snapshot_every=None,
         on_snapshot=None):
    """Event-driven core.  Mutates `spins` (list of +1/-1) in place.

    Returns (t, events, status); status is one of "absorbed" (no positive
    rates left), "horizon", "hit" (predicate satisfied), "cap" (max_events).
    """
    n = lattice.site_count
    dyn = lattice.dyn_neighbors
    fz = lattice.frozen_neighbor_count
    tabs = _flip_tables(params, max(lattice.degrees))
    freeze = params.freeze_minus
    unit = 1.0 if params.rate_convention == PER_SITE else 1.0 / n
    finite_beta = params.beta != math.inf

    rates = [_site_flip_prob(spins, u, dyn, fz, tabs, freeze)
             for u in range(n)]
    fen = FenwickSampler(rates)
    nonzero = sum(1 for r in rates if r > 0.0)

    draws = _Draws(rng)
    t = 0.0
    events = 0
    while nonzero:
        wait = draws.exponential() / (fen.total * unit)
        if t + wait > horizon:
            return horizon, events, _HORIZON
        t += wait
        v = fen.find(draws.uniform() * fen.total)
        if fen.weights[v] == 0.0:
            # float drift pushed the search onto a dead site; resync
            fen.rebuild()
            v = fen.find(draws.uniform() * fen.total)
        spins[v] = -spins[v]
        events += 1
        if event_log is not None:
            event_log.append(t, v, spins[v])
        for u in (v, *dyn[v]):
            old = fen.weights[u]
            new = _site_flip_prob(spins, u, dyn, fz, tabs, freeze)
            if new != old:
                fen.set(u, new)
                if (old > 0.0) != (new > 0.0):
                    nonzero += 1 if new > 0.0 else -1
        if finite_beta and events % 65536 == 0:
            fen.rebuild()
        if predicate is not None and predicate(spins):
            return t, events, _HIT
        if snapshot_every is not None and events % snapshot_every == 0:
            on_snapshot(t, spins)
        if max_events is not None and events >= max_events:
            return t, events, _CAP
    return t, events, _ABSORBED


def run_continuous(config, horizon, params, rng, event_log=None,
                   max_events=None):
    """Simulate until the horizon (or absorption); returns (config, n_events)."""
    if horizon < 0:
        raise ConfigError("horizon must be nonnegative")
    spins = config.spins.tolist()
    _, events, _ = _kmc(config.lattice, spins, horizon, params, rng,
                        event_log=event_log, max_events=max_events)
    return Configuration.from_spins(config.lattice, spins), events


def hitting_time(config, predicate, params, rng, cap, max_events=None,
                 snapshot_every=None, on_snapshot=None):
    """First event time at which the predicate holds, else TIMEOUT (inf).

    predicate(spins) receives the current spin sequence; None means "the
    dynamics absorbed" (no site has positive flip rate).  The cap is a time
    horizon; exceeding it (or max_events) yields TIMEOUT, a value.
    """
    spins = config.spins.tolist()
    if predicate is not None and predicate(spins):
        return 0.0
    t, _, status = _kmc(config.lattice, spins, cap, params, rng,
                        predicate=predicate, max_events=max_events,
                        snapshot_every=snapshot_every,
                        on_snapshot=on_snapshot)
    if status == _HIT:
        return t
    if status == _ABSORBED:
        if predicate is None:
            return t
        return TIMEOUT
    return TIMEOUT


def coupled_run(configs, horizon, params, rng):
    """Evolve several configurations under one shared update stream.

    Every site rings by a shared exponential clock; each ring carries one
    shared uniform.  A chain refreshes the rung site to +1 exactly when the
    uniform falls below its own conditional plus-probability, which is
    monotone in the neighborhood, so coordinatewise order between chains is
    preserved.  Returns the configurations at the horizon.
    """
    if not configs:
        return []
    lat = configs[0].lattice
    if any(c.lattice != lat for c in configs):
        raise ConfigError("coupled chains must share one lattice")
    n = lat.site_count
    dyn = lat.dyn_neighbors
    fz = lat.frozen_neighbor_count
    beta = params.beta
    freeze = params.freeze_minus
    unit = 1.0 if params.rate_convention == PER_SITE else 1.0 / n
    if params.field is None:
        tie_plus_prob = 0.5
    else:
        tie_plus_prob = 1.0 if params.field == PLUS else 0.0

    chains = [c.spins.tolist() for c in configs]
    draws = _Draws(rng)
    ring_rate = n * unit
    t = 0.0
    while True:
        t += draws.exponential() / ring_rate
        if t > horizon:
            break
        v = draws.site(n)
        u = draws.uniform()
        for spins in chains:
            if freeze and spins[v] < 0:
                continue
            tot = -fz[v]
            for w in dyn[v]:
                tot += spins[w]
            if beta == math.inf:
                if tot > 0:
                    p_plus = 1.0
                elif tot < 0:
                    p_plus = 0.0
                else:
                    p_plus = tie_plus_prob
            else:
                p_plus = phi(tot, beta)
            spins[v] = 1 if u < p_plus else -1
    return [Configuration.from_spins(lat, spins) for spins in chains]
