"""Quantitative harnesses: erosion scaling, channel estimation, capacity
formulas, exact small-grid mutual information, and survival statistics.

Every Monte Carlo entry point takes a master seed and derives one child
stream per trial index, so results depend only on (arguments, seed).
Trials map over a process pool when workers > 1; per-trial streams and
order-preserving reduction keep the output identical at any worker count.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .codecs import DropletCodec
from .dynamics import (DynamicsParams, hitting_time, run_continuous,
                       run_discrete, EventLog, TIMEOUT)
from .errors import ConfigError, DefectError, GeometryError
from .lattice import Configuration, build_square, random_config
from .stability import enumerate_stable, hopf_counts, is_stable

_Z95 = 1.959963984540054


def wilson_interval(successes, trials, z=_Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ConfigError("wilson_interval needs trials >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials
                                   + z * z / (4 * trials * trials))
    # at the boundary counts the endpoints are exactly 0/1; keep them free
    # of the cancellation residue of center -+ half
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def binary_entropy(p):
    """h(p) in bits with the 0 log 0 = 0 convention."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError("entropy argument must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def trial_seeds(master_seed, count):
    """Independent child seed sequences, one per trial index."""
    return np.random.SeedSequence(master_seed).spawn(count)


def derived_seeds(master_seed, count):
    """Independent u64 child seeds (for seeding whole sub-experiments)."""
    state = np.random.SeedSequence(master_seed).generate_state(
        count, np.uint64)
    return [int(s) for s in state]


def _trial_rng(master_seed, key):
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=key))


def _pool_map(worker, args_list, workers):
    """Order-preserving map, across a process pool when workers > 1.

    Workers must be module-level functions of one picklable argument;
    each rebuilds its state from the argument, so no memory is shared.
    Fork is preferred where available: it does not reimport __main__, so
    pools work from scripts and interactive sessions alike.
    """
    if workers <= 1:
        return [worker(a) for a in args_list]
    method = ("fork" if "fork" in multiprocessing.get_all_start_methods()
              else "spawn")
    with multiprocessing.get_context(method).Pool(workers) as pool:
        return pool.map(worker, args_list)


# -- erosion ---------------------------------------------------------------


def droplet_box(ell, margin=2):
    """Centered ell x ell plus droplet in a free box with an all-minus
    margin.  Interface growth cannot cross the initial bounding box, so a
    margin of 2 reproduces the infinite-lattice erosion exactly."""
    side = ell + 2 * margin
    lat = build_square(side)
    grid = -np.ones((side, side), dtype=np.int8)
    grid[margin:margin + ell, margin:margin + ell] = 1
    return Configuration.from_spins(lat, grid.reshape(-1))


@dataclass(frozen=True)
class ErosionSummary:
    ell: int
    trials: int
    mean: float
    sd: float
    quantiles: dict
    timeouts: int
    cap: float
    samples: tuple = field(repr=False, default=())
    hopf_snapshots: int = 0
    hopf_checked: int = 0


def _erosion_worker(args, extra_hook=None):
    """One erosion trial; returns (tau, snapshots seen, identity checks).

    When hopf_check is set, every snapshot is screened and, where the
    counting assumptions hold, the weighted boundary-count identity is
    verified; a miss raises DefectError from inside the trial.
    """
    ell, seed, key, cap, snapshot_every, hopf_check = args
    rng = _trial_rng(seed, key)
    start = droplet_box(ell)
    counters = [0, 0]
    hook = None
    if hopf_check or extra_hook is not None:
        lat = start.lattice

        def hook(t, spins):
            config = Configuration.from_spins(
                lat, np.asarray(spins, dtype=np.int8))
            if hopf_check:
                counters[0] += 1
                h = hopf_counts(config)
                if h.assumptions_ok:
                    counters[1] += 1
                    if h.combination != 4 * h.L:
                        raise DefectError(
                            "boundary-count identity violated on a "
                            f"snapshot (ell={ell}, trial key={key})")
            if extra_hook is not None:
                extra_hook(config, t)

    tau = hitting_time(start, None, DynamicsParams(), rng, cap,
                       snapshot_every=snapshot_every if hook else None,
                       on_snapshot=hook)
    return tau, counters[0], counters[1]


def erosion_trials(ell, trials, seed, *, cap=None, pilot_trials=100,
                   snapshot_every=None, on_snapshot=None, hopf_check=False,
                   workers=1):
    """Absorption times of an eroding ell x ell droplet (per-site rates).

    The time cap defaults to 50x the mean of an uncapped pilot; capped
    trials are counted as timeouts and excluded from the moments, never
    silently dropped.  on_snapshot(config, t) fires every snapshot_every
    events when given (workers=1 only); hopf_check verifies the
    boundary-count identity on each snapshot and works under any worker
    count.
    """
    if ell < 1:
        raise GeometryError("droplet side must be >= 1")
    if (hopf_check or on_snapshot is not None) and not snapshot_every:
        raise ConfigError("snapshot checks need snapshot_every")
    if on_snapshot is not None and workers > 1:
        raise ConfigError("snapshot callbacks require workers=1")
    if cap is None:
        pilot = _pool_map(
            _erosion_worker,
            [(ell, seed, (1, i), math.inf, None, False)
             for i in range(pilot_trials)], workers)
        cap = 50.0 * (sum(tau for tau, _, _ in pilot) / pilot_trials)
    if on_snapshot is not None:
        results = [_erosion_worker(
            (ell, seed, (0, i), cap, snapshot_every, hopf_check),
            extra_hook=on_snapshot) for i in range(trials)]
    else:
        results = _pool_map(
            _erosion_worker,
            [(ell, seed, (0, i), cap, snapshot_every, hopf_check)
             for i in range(trials)], workers)
    samples = [tau for tau, _, _ in results]
    finished = [t for t in samples if t != TIMEOUT]
    timeouts = len(samples) - len(finished)
    if not finished:
        raise ConfigError("every erosion trial timed out; raise the cap")
    arr = np.asarray(finished)
    qs = {f"q{int(100 * q):02d}": float(np.quantile(arr, q))
          for q in (0.05, 0.25, 0.5, 0.75, 0.95)}
    return ErosionSummary(ell, trials, float(arr.mean()),
                          float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                          qs, timeouts, cap, tuple(samples),
                          sum(r[1] for r in results),
                          sum(r[2] for r in results))


@dataclass(frozen=True)
class ErosionSweep:
    summaries: tuple
    exponent: float
    intercept: float


def erosion_sweep(ells, trials, seed, **kwargs):
    """Erosion summaries per size plus the least-squares scaling exponent
    of log mean time against log size (needs >= 3 sizes)."""
    if len(ells) < 3:
        raise ConfigError("exponent fit needs at least 3 sizes")
    seeds = derived_seeds(seed, len(ells))
    summaries = [erosion_trials(ell, trials, s, **kwargs)
                 for ell, s in zip(ells, seeds)]
    x = np.log([s.ell for s in summaries])
    y = np.log([s.mean for s in summaries])
    slope, intercept = np.polyfit(x, y, 1)
    return ErosionSweep(tuple(summaries), float(slope), float(intercept))


# -- channel estimation ----------------------------------------------------


@dataclass(frozen=True)
class ChannelEstimate:
    q0_hat: float
    q1_hat: float
    trials: int
    q0_interval: tuple
    q1_interval: tuple


def _crossover_worker(args):
    ell, t, seed, i = args
    rng = _trial_rng(seed, (i,))
    params = DynamicsParams()
    start = droplet_box(ell)
    final, _ = run_continuous(start, t, params, rng)
    eroded = final.plus_count == 0
    minus = Configuration.all_minus(start.lattice)
    final0, events0 = run_continuous(minus, t, params, rng)
    return eroded, bool(events0 or final0.plus_count)


def crossover_estimate(ell, t, trials, seed, *, workers=1):
    """Single-block Z-channel estimate at read-out time t.

    q1: fraction of plus-droplet starts fully eroded by t.  q0: fraction
    of all-minus starts that left the ground state (provably zero, since
    no site behind minus walls has positive rate; measured to confirm).
    """
    results = _pool_map(_crossover_worker,
                        [(ell, t, seed, i) for i in range(trials)], workers)
    eroded = sum(1 for e, _ in results if e)
    zero_up = sum(1 for _, z in results if z)
    return ChannelEstimate(zero_up / trials, eroded / trials, trials,
                           wilson_interval(zero_up, trials),
                           wilson_interval(eroded, trials))


# -- capacity formulas -----------------------------------------------------


def z_capacity(q):
    """Z-channel capacity log2(1 + (1-q) q^(q/(1-q))) in bits."""
    if not 0.0 <= q <= 1.0:
        raise ConfigError("crossover probability must lie in [0, 1]")
    if q == 0.0:
        return 1.0
    if q == 1.0:
        return 0.0
    return math.log2(1.0 + (1.0 - q) * q ** (q / (1.0 - q)))


def binary_channel_capacity(q0, q1):
    """Capacity of the binary asymmetric channel: input 0 flips with
    probability q0, input 1 with probability q1.

    Found by maximizing I(p) = h(p(1-q1) + (1-p) q0) - p h(q1)
    - (1-p) h(q0): stationarity fixes the output law y* in closed form,
    then p is clamped to [0, 1].  Degenerate channels (q0 + q1 = 1)
    carry nothing.
    """
    for q in (q0, q1):
        if not 0.0 <= q <= 1.0:
            raise ConfigError("crossover probabilities must lie in [0, 1]")
    span = 1.0 - q0 - q1
    if span == 0.0:
        return 0.0
    if span < 0.0:
        # relabel the output to restore a nonnegative span
        return binary_channel_capacity(1.0 - q0, 1.0 - q1)

    def mutual_information(p):
        y = p * (1.0 - q1) + (1.0 - p) * q0
        return (binary_entropy(y) - p * binary_entropy(q1)
                - (1.0 - p) * binary_entropy(q0))

    exponent = (binary_entropy(q1) - binary_entropy(q0)) / span
    y_star = 1.0 / (1.0 + 2.0 ** exponent)
    p_star = min(1.0, max(0.0, (y_star - q0) / span))
    return max(0.0, mutual_information(p_star))


def fano_upper(mi_bits, eps):
    """Converse bound (I + h(eps)) / (1 - eps) on log M at error eps."""
    if not 0.0 < eps < 1.0:
        raise ConfigError("error probability must lie in (0, 1)")
    return (mi_bits + binary_entropy(eps)) / (1.0 - eps)


@dataclass(frozen=True)
class CapacityBound:
    blocks_per_axis: int
    q1_hat: float
    bound_bits: float
    interval_bits: tuple
    t: float
    trials: int


def droplet_capacity_lower_bound(k, a, t, trials, seed, *, workers=1):
    """K^2 independent Z-channels: K^2 * C_Z(q1_hat), with the interval
    mapped through the (decreasing) capacity from q1's Wilson interval."""
    codec = DropletCodec(k, a)
    K = codec.blocks_per_axis
    est = crossover_estimate(codec.block_side, t, trials, seed,
                             workers=workers)
    bound = K * K * z_capacity(est.q1_hat)
    lo, hi = est.q1_interval
    return CapacityBound(K, est.q1_hat, bound,
                         (K * K * z_capacity(hi), K * K * z_capacity(lo)),
                         t, trials)


# -- exact mutual information (small grids) --------------------------------


def _state_kernel(k):
    """Dense one-step zero-temperature kernel on all 2^(k*k) states.

    State bit v set means site v is plus.  Each state has at most n+1
    successors: pick a site uniformly, flip it with its refresh flip
    probability.
    """
    n = k * k
    if 2 ** n > 512:
        raise ConfigError("exact kernel is limited to k <= 3")
    lat = build_square(k)
    dyn = lat.dyn_neighbors
    size = 2 ** n
    P = np.zeros((size, size))
    for s in range(size):
        spins = [(1 if (s >> v) & 1 else -1) for v in range(n)]
        stay = 0.0
        for v in range(n):
            tot = sum(spins[u] for u in dyn[v])
            d = spins[v] * tot
            p = 0.0 if d > 0 else (0.5 if d == 0 else 1.0)
            if p:
                P[s, s ^ (1 << v)] += p / n
            stay += (1.0 - p) / n
        P[s, s] += stay
    return P


def _config_state(config):
    bits = (config.spins == 1).astype(np.int64)
    return int(bits @ (1 << np.arange(len(bits), dtype=np.int64)))


def state_config(k, s):
    """Inverse of the state index: state s on the k x k grid."""
    n = k * k
    spins = np.array([1 if (s >> v) & 1 else -1 for v in range(n)],
                     dtype=np.int8)
    return Configuration.from_spins(build_square(k), spins)


def _prior_vector(k, prior):
    size = 2 ** (k * k)
    pi = np.zeros(size)
    for config, p in prior.items():
        if config.lattice.side != k:
            raise ConfigError("prior support must live on the k x k grid")
        if p < 0:
            raise ConfigError("prior probabilities must be nonnegative")
        pi[_config_state(config)] += p
    total = pi.sum()
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ConfigError("prior must sum to 1")
    return pi / total


def _mi_bits(probs, rows):
    """I(X0; Xt) in bits from support probabilities and the matching
    per-state conditional distributions, with compensated summation and
    the 0 log 0 = 0 convention."""
    marginal = probs @ rows
    terms = []
    for p, row in zip(probs, rows):
        # marginal >= p * row, so a zero marginal only happens when the
        # row entry has underflowed; such terms are < 1e-300 and dropped
        nz = (row > 0.0) & (marginal > 0.0)
        contrib = row[nz] * (np.log2(row[nz]) - np.log2(marginal[nz]))
        terms.append(p * math.fsum(contrib.tolist()))
    return max(0.0, math.fsum(terms))


def exact_mi(k, prior, t):
    """Exact I(X0; Xt) in bits for a prior over k x k configurations under
    t zero-temperature refresh steps (k <= 3)."""
    if t < 0:
        raise ConfigError("t must be >= 0")
    P = _state_kernel(k)
    pi = _prior_vector(k, prior)
    support = np.nonzero(pi)[0]
    rows = np.eye(P.shape[0])[support, :]
    for _ in range(t):
        rows = rows @ P
    return _mi_bits(pi[support], rows)


def mi_curve(k, prior, t_max):
    """I(X0; Xt) for every t in 0..t_max (incremental propagation)."""
    P = _state_kernel(k)
    pi = _prior_vector(k, prior)
    support = np.nonzero(pi)[0]
    rows = np.eye(P.shape[0])[support, :]
    out = [_mi_bits(pi[support], rows)]
    for _ in range(t_max):
        rows = rows @ P
        out.append(_mi_bits(pi[support], rows))
    return out


def uniform_prior(k):
    size = 2 ** (k * k)
    return {state_config(k, s): 1.0 / size for s in range(size)}


def stable_prior(k):
    states = enumerate_stable(k)
    return {c: 1.0 / len(states) for c in states}


def extremes_prior(k):
    lat = build_square(k)
    return {Configuration.all_plus(lat): 0.5,
            Configuration.all_minus(lat): 0.5}


def absorbed_mass_curve(k, prior, t_max):
    """Exact probability that the chain has absorbed by step t, per t."""
    P = _state_kernel(k)
    pi = _prior_vector(k, prior)
    absorbing = np.isclose(np.diag(P), 1.0)
    dist = pi.copy()
    out = [float(dist[absorbing].sum())]
    for _ in range(t_max):
        dist = dist @ P
        out.append(float(dist[absorbing].sum()))
    return out


# -- survival --------------------------------------------------------------


@dataclass(frozen=True)
class StripeSurvival:
    k: int
    beta: float
    c: float
    t0: float
    trials: int
    mean_row_plus: float
    majority_fraction: float
    counts: tuple = field(repr=False, default=())


def bottom_stripe_config(k):
    """Row 1 all plus (corners included), every other site minus."""
    lat = build_square(k)
    grid = -np.ones((k, k), dtype=np.int8)
    grid[0, :] = 1
    return Configuration.from_spins(lat, grid.reshape(-1))


def _stripe_worker(args):
    k, beta, c, freeze_minus, seed, i = args
    params = DynamicsParams(beta=beta, freeze_minus=freeze_minus)
    final, _ = run_continuous(bottom_stripe_config(k), math.exp(c * beta),
                              params, _trial_rng(seed, (i,)))
    row = final.spins.reshape(k, k)[0, :]
    return int(np.sum(row == 1))


def stripe_survival(k, beta, c, trials, seed, freeze_minus=True, *,
                    workers=1):
    """Finite-temperature survival of the bottom stripe to t0 = e^(c beta).

    Counts plus sites left in row 1 at t0 and the fraction of trials
    whose count clears the majority threshold k/2.
    """
    if not 0.0 < c < 1.0:
        raise ConfigError("c must lie in (0, 1)")
    if beta == math.inf:
        raise ConfigError("stripe survival is a finite-beta experiment")
    counts = _pool_map(_stripe_worker,
                       [(k, beta, c, freeze_minus, seed, i)
                        for i in range(trials)], workers)
    mean = sum(counts) / trials
    majority = sum(1 for cnt in counts if 2 * cnt >= k) / trials
    return StripeSurvival(k, beta, c, math.exp(c * beta), trials, mean,
                          majority, tuple(counts))


def _survival_worker(args):
    k, t_max, prior, seed, i = args
    rng = _trial_rng(seed, (i,))
    start = random_config(build_square(k), prior, rng)
    log = EventLog()
    final = run_discrete(start, t_max, DynamicsParams(), rng, event_log=log)
    if is_stable(final):
        return log.events[-1][0] if len(log) else 0
    return math.inf


def survival_curve(k, t_max, trials, seed, prior=0.5, checkpoints=None, *,
                   workers=1):
    """Fraction of runs not yet striped at each checkpoint step.

    Zero-temperature runs from i.i.d. Bernoulli(prior) starts; the striped
    set is absorbing, so each trial is summarized by its absorption step.
    """
    if checkpoints is None:
        checkpoints = [t_max]
    absorb_steps = _pool_map(_survival_worker,
                             [(k, t_max, prior, seed, i)
                              for i in range(trials)], workers)
    return [(t, sum(1 for s in absorb_steps if s > t) / trials)
            for t in checkpoints]


def survival_probability(k, t, trials, seed, prior=0.5, *, workers=1):
    """P(X_t not striped) from Bernoulli(prior) starts, Monte Carlo."""
    return survival_curve(k, t, trials, seed, prior, workers=workers)[0][1]


# -- monotone coupling harness ----------------------------------------------


@dataclass(frozen=True)
class CoupledSummary:
    trials: int
    steps: int
    checkpoints: int
    sandwich_violations: int
    pair_violations: int


_COUPLED_CHUNK = 128    # fixed so results never depend on worker count


def _coupled_chunk(args):
    k, chunk_trials, steps, seed, chunk_index, checkpoint_every, \
        pair_flips = args
    lat = build_square(k)
    n = lat.site_count
    # neighbor table padded with a self-loop so every row has 4 entries;
    # the weight column cancels the padding's contribution
    nbr = np.zeros((n, 4), dtype=np.int64)
    wt = np.zeros((n, 4), dtype=np.int8)
    for v in range(n):
        for slot, u in enumerate(lat.dyn_neighbors[v]):
            nbr[v, slot] = u
            wt[v, slot] = 1
        for slot in range(len(lat.dyn_neighbors[v]), 4):
            nbr[v, slot] = v
    rng = _trial_rng(seed, (chunk_index,))
    mid = rng.choice(np.array([-1, 1], dtype=np.int8),
                     size=(chunk_trials, n))
    partner = mid.copy()
    for row in range(chunk_trials):
        minus_sites = np.nonzero(partner[row] == -1)[0]
        if len(minus_sites):
            lift = rng.choice(minus_sites,
                              size=min(pair_flips, len(minus_sites)),
                              replace=False)
            partner[row, lift] = 1
    bottom = -np.ones((chunk_trials, n), dtype=np.int8)
    top = np.ones((chunk_trials, n), dtype=np.int8)
    chains = (bottom, mid, partner, top)
    rows = np.arange(chunk_trials)
    sandwich_violations = 0
    pair_violations = 0
    checkpoints = 0
    for step in range(1, steps + 1):
        v = rng.integers(0, n, size=chunk_trials)
        u = rng.random(chunk_trials)
        weights = wt[v]
        gather = nbr[v]
        for chain in chains:
            tot = np.sum(chain[rows[:, None], gather] * weights, axis=1)
            plus = np.where(tot > 0, True, np.where(tot < 0, False, u < 0.5))
            chain[rows, v] = np.where(plus, 1, -1).astype(np.int8)
        if step % checkpoint_every == 0 or step == steps:
            checkpoints += 1
            bad = np.any(bottom > mid, axis=1) | np.any(mid > top, axis=1)
            sandwich_violations += int(np.sum(bad))
            pair_violations += int(np.sum(np.any(mid > partner, axis=1)))
    return checkpoints, sandwich_violations, pair_violations


def coupled_sandwich_trials(k, trials, steps, seed, checkpoint_every=1000,
                            pair_flips=4, *, workers=1):
    """Vectorized grand-coupling order check at beta = infinity.

    Each trial evolves four chains under one shared (site, uniform)
    stream: the all-minus and all-plus extremes, a middle chain from a
    random start, and a dominating partner (the middle start with
    `pair_flips` extra plus sites).  Every chain applies the same update
    rule; nothing is assumed fixed.  Checkpoints count trials violating
    bottom <= middle <= top or middle <= partner.  Trials run in fixed
    chunks over the worker pool.
    """
    sizes = [_COUPLED_CHUNK] * (trials // _COUPLED_CHUNK)
    if trials % _COUPLED_CHUNK:
        sizes.append(trials % _COUPLED_CHUNK)
    results = _pool_map(
        _coupled_chunk,
        [(k, size, steps, seed, ci, checkpoint_every, pair_flips)
         for ci, size in enumerate(sizes)], workers)
    return CoupledSummary(trials, steps, results[0][0] if results else 0,
                          sum(r[1] for r in results),
                          sum(r[2] for r in results))
