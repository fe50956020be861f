"""Config-driven command line: simulate | erode | codec | capacity | census | mi.

Every run is reproducible from (config, seed): trials draw from per-index
seed streams, results reduce in trial order, and output files carry the
schema version and master seed in their headers.  Reports are written as
JSONL trial logs and CSV summaries plus a rendered PNG figure per command.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import experiments as ex
from .codecs import bits_to_hex, hex_to_bits, make_codec
from .dynamics import (DynamicsParams, EventLog, run_continuous,
                       run_discrete)
from .errors import (EXIT_CONFIG, EXIT_DEFECT, EXIT_GEOMETRY, EXIT_OK,
                     ConfigError, DefectError, GeometryError)
from .lattice import (FREE, Configuration, build_honeycomb, build_square,
                      random_config)
from .stability import census_rows, is_stable

SCHEMA_VERSION = 1

_CODEC_KEYS = {
    "stripe": {"name", "side"},
    "droplet": {"name", "side", "area", "field"},
    "field_droplet": {"name", "side", "field"},
    "betastripe": {"name", "side"},
    "honeycomb": {"name", "rows", "cols"},
}


def _check_keys(mapping, allowed, where):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown {where} keys: {', '.join(sorted(unknown))}")


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing {where} key: {key}")
    return mapping[key]


def _lattice_from_config(cfg):
    _check_keys(cfg, {"kind", "side", "rows", "cols", "boundary"}, "lattice")
    kind = cfg.get("kind", "square")
    if kind == "square":
        return build_square(_require(cfg, "side", "lattice"),
                            cfg.get("boundary", FREE))
    if kind == "honeycomb":
        return build_honeycomb(_require(cfg, "rows", "lattice"),
                               _require(cfg, "cols", "lattice"))
    raise ConfigError(f"unknown lattice kind {kind!r}")


def _beta_from_config(value):
    if value in ("inf", "Inf", "infinity", None):
        return math.inf
    return float(value)


def _dynamics_from_config(cfg):
    _check_keys(cfg, {"beta", "field", "freeze_minus", "rate_convention"},
                "dynamics")
    return DynamicsParams(
        beta=_beta_from_config(cfg.get("beta", "inf")),
        field=cfg.get("field"),
        freeze_minus=bool(cfg.get("freeze_minus", False)),
        rate_convention=cfg.get("rate_convention", "PerSiteUnit"),
    )


def _codec_from_config(cfg):
    name = _require(cfg, "name", "codec")
    if name not in _CODEC_KEYS:
        raise ConfigError(f"unknown codec {name!r}")
    _check_keys(cfg, _CODEC_KEYS[name], "codec")
    return make_codec(name, **{k: v for k, v in cfg.items() if k != "name"})


def _trial_rng(seed, index):
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(index,)))


# -- output plumbing --------------------------------------------------------


class _Out:
    def __init__(self, directory, command, seed):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.seed = seed

    def _header(self):
        return (f"# schema_version={SCHEMA_VERSION} "
                f"command={self.command} seed={self.seed}")

    def csv(self, name, fieldnames, rows):
        path = self.dir / name
        with open(path, "w", newline="") as fp:
            fp.write(self._header() + "\n")
            writer = csv.DictWriter(fp, fieldnames=fieldnames)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        return path

    def jsonl(self, name, records):
        path = self.dir / name
        with open(path, "w") as fp:
            fp.write(json.dumps({"schema_version": SCHEMA_VERSION,
                                 "command": self.command,
                                 "seed": self.seed}, sort_keys=True) + "\n")
            for rec in records:
                fp.write(json.dumps(rec, sort_keys=True) + "\n")
        return path

    def json(self, name, payload):
        path = self.dir / name
        payload = dict(payload)
        payload["schema_version"] = SCHEMA_VERSION
        payload["seed"] = self.seed
        with open(path, "w") as fp:
            json.dump(payload, fp, sort_keys=True, indent=2)
            fp.write("\n")
        return path

    def figure(self, name, fig):
        path = self.dir / name
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path


# -- subcommands -------------------------------------------------------------


def cmd_simulate(cfg, seed, trials, workers, out):
    _check_keys(cfg, {"lattice", "start", "plus_probability", "dynamics",
                      "mode", "steps", "horizon", "codec", "message_hex",
                      "trials", "seed"}, "simulate")
    lat = _lattice_from_config(_require(cfg, "lattice", "simulate"))
    params = _dynamics_from_config(cfg.get("dynamics", {}))
    mode = cfg.get("mode", "discrete")
    start_kind = cfg.get("start", "random")

    def start_config(rng):
        if start_kind == "all_plus":
            return Configuration.all_plus(lat)
        if start_kind == "all_minus":
            return Configuration.all_minus(lat)
        if start_kind == "random":
            return random_config(lat, cfg.get("plus_probability", 0.5), rng)
        if start_kind == "codeword":
            codec = _codec_from_config(_require(cfg, "codec", "simulate"))
            bits = hex_to_bits(cfg.get("message_hex", "0"),
                               codec.capacity_bits)
            return codec.encode(bits)
        raise ConfigError(f"unknown start {start_kind!r}")

    events = []
    finals = []
    rows = []
    mag_traces = []
    for i in range(trials):
        rng = _trial_rng(seed, i)
        start = start_config(rng)
        log = EventLog()
        if mode == "discrete":
            steps = int(_require(cfg, "steps", "simulate"))
            final = run_discrete(start, steps, params, rng, event_log=log)
            span = steps
        elif mode == "continuous":
            horizon = float(_require(cfg, "horizon", "simulate"))
            final, _ = run_continuous(start, horizon, params, rng,
                                      event_log=log)
            span = horizon
        else:
            raise ConfigError(f"unknown mode {mode!r}")
        for t, site, spin in log.events:
            events.append({"trial": i, "t": t, "site": site, "spin": spin})
        finals.append({"trial": i, "config": final.to_json()})
        rows.append({
            "trial": i, "span": span, "events": len(log),
            "magnetization": float(np.mean(final.spins)),
            "stable": is_stable(final) if params.field is None
            else is_stable(final, params.field),
        })
        n = lat.site_count
        times = [0.0]
        mags = [float(np.mean(start.spins))]
        total = int(np.sum(start.spins))
        for t, _site, spin in log.events:
            total += 2 * spin
            times.append(float(t))
            mags.append(total / n)
        mag_traces.append((times, mags))

    out.jsonl("events.jsonl", events)
    out.jsonl("finals.jsonl", finals)
    out.csv("summary.csv",
            ["trial", "span", "events", "magnetization", "stable"], rows)
    fig, ax = plt.subplots(figsize=(7, 4))
    for times, mags in mag_traces:
        ax.step(times, mags, where="post", alpha=0.8)
    ax.set_xlabel("time" if mode == "continuous" else "step")
    ax.set_ylabel("magnetization")
    ax.set_title(f"simulate: {trials} run(s)")
    out.figure("magnetization.png", fig)
    print(f"simulate: {trials} trial(s), "
          f"{sum(r['events'] for r in rows)} events, "
          f"{sum(r['stable'] for r in rows)} stable finals -> {out.dir}")
    return EXIT_OK


def cmd_erode(cfg, seed, trials, workers, out):
    _check_keys(cfg, {"ells", "cap", "snapshot_every", "hopf_check",
                      "trials", "seed"}, "erode")
    ells = _require(cfg, "ells", "erode")
    snapshot_every = cfg.get("snapshot_every", 1000)
    hopf_check = bool(cfg.get("hopf_check", True))

    summaries = []
    trial_rows = []
    for ell, ell_seed in zip(ells, ex.derived_seeds(seed, len(ells))):
        s = ex.erosion_trials(
            ell, trials, ell_seed,
            cap=cfg.get("cap"),
            snapshot_every=snapshot_every if hopf_check else None,
            hopf_check=hopf_check,
            workers=workers)
        summaries.append(s)
        for i, tau in enumerate(s.samples):
            trial_rows.append({"ell": ell, "trial": i,
                               "tau": None if math.isinf(tau) else tau,
                               "timeout": math.isinf(tau)})
    rows = [{
        "ell": s.ell, "trials": s.trials, "mean_tau": s.mean, "sd": s.sd,
        "q05": s.quantiles["q05"], "q50": s.quantiles["q50"],
        "q95": s.quantiles["q95"], "timeouts": s.timeouts, "cap": s.cap,
    } for s in summaries]
    exponent = None
    if len(ells) >= 3:
        x = np.log([s.ell for s in summaries])
        y = np.log([s.mean for s in summaries])
        exponent, intercept = (float(v) for v in np.polyfit(x, y, 1))
        rows.append({"ell": "fit", "trials": "", "mean_tau": "", "sd": "",
                     "q05": "", "q50": "", "q95": "", "timeouts": "",
                     "cap": f"exponent={exponent:.4f}"})

    out.jsonl("trials.jsonl", trial_rows)
    out.csv("summary.csv", ["ell", "trials", "mean_tau", "sd", "q05", "q50",
                            "q95", "timeouts", "cap"], rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog([s.ell for s in summaries], [s.mean for s in summaries], "o")
    if exponent is not None:
        xs = np.array([min(ells), max(ells)], dtype=float)
        ax.loglog(xs, np.exp(intercept) * xs ** exponent, "-",
                  label=f"slope {exponent:.2f}")
        ax.legend()
    ax.set_xlabel("droplet side")
    ax.set_ylabel("mean erosion time")
    out.figure("erosion.png", fig)
    msg = f"erode: ells={list(ells)} trials={trials}"
    if exponent is not None:
        msg += f" exponent={exponent:.3f}"
    if hopf_check:
        snaps = sum(s.hopf_snapshots for s in summaries)
        checked = sum(s.hopf_checked for s in summaries)
        msg += (f" hopf_snapshots={snaps}"
                f" (identity checked on {checked}, 0 violations)")
    print(msg + f" -> {out.dir}")
    return EXIT_OK


def cmd_codec(cfg, seed, trials, workers, out):
    _check_keys(cfg, {"codec", "messages", "dynamics", "mode", "steps",
                      "horizon", "trials", "seed"}, "codec")
    codec = _codec_from_config(_require(cfg, "codec", "codec"))
    params = _dynamics_from_config(cfg.get("dynamics", {}))
    mode = cfg.get("mode", "discrete")
    messages = cfg.get("messages", "all")
    cap = codec.capacity_bits
    if messages == "all":
        if cap > 16:
            raise ConfigError(
                f"exhaustive messages infeasible for {cap} bits; "
                "pass an explicit list or {\"random\": N}")
        bit_lists = [tuple((m >> (cap - 1 - i)) & 1 for i in range(cap))
                     for m in range(2 ** cap)]
    elif isinstance(messages, dict):
        _check_keys(messages, {"random"}, "messages")
        rng = _trial_rng(seed, 2 ** 31)
        bit_lists = [tuple(int(b) for b in rng.integers(0, 2, cap))
                     for _ in range(int(messages["random"]))]
    else:
        bit_lists = [hex_to_bits(m, cap) for m in messages]

    rows = []
    errors = 0
    for i, bits in enumerate(bit_lists):
        rng = _trial_rng(seed, i)
        config = codec.encode(bits)
        if mode == "discrete" and cfg.get("steps"):
            config = run_discrete(config, int(cfg["steps"]), params, rng)
        elif mode == "continuous" and cfg.get("horizon") is not None:
            config, _ = run_continuous(config, float(cfg["horizon"]),
                                       params, rng)
        decoded = codec.decode(config)
        bit_errors = sum(1 for a, b in zip(bits, decoded) if a != b)
        errors += bit_errors
        rows.append({"message": bits_to_hex(bits),
                     "decoded": bits_to_hex(decoded),
                     "bit_errors": bit_errors,
                     "ok": bit_errors == 0})
    out.csv("messages.csv", ["message", "decoded", "bit_errors", "ok"], rows)
    out.json("codec.json", {"descriptor": codec.descriptor(),
                            "messages": len(rows),
                            "total_bit_errors": errors})
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(range(len(rows)), [r["bit_errors"] for r in rows])
    ax.set_xlabel("message index")
    ax.set_ylabel("bit errors")
    ax.set_title(f"{codec.name}: {errors} total bit errors")
    out.figure("codec.png", fig)
    print(f"codec {codec.name}: {len(rows)} messages, {errors} bit errors "
          f"-> {out.dir}")
    return EXIT_OK


def cmd_capacity(cfg, seed, trials, workers, out):
    _check_keys(cfg, {"side", "area", "t", "pilot_fraction", "pilot_trials",
                      "trials", "seed"}, "capacity")
    side = _require(cfg, "side", "capacity")
    area = _require(cfg, "area", "capacity")
    main_seed, pilot_seed = ex.derived_seeds(seed, 2)
    t = cfg.get("t")
    pilot_mean = None
    if t is None:
        pilot = ex.erosion_trials(math.isqrt(area),
                                  int(cfg.get("pilot_trials", 100)),
                                  pilot_seed, workers=workers)
        pilot_mean = pilot.mean
        t = float(cfg.get("pilot_fraction", 0.1)) * pilot.mean
    bound = ex.droplet_capacity_lower_bound(side, area, t, trials,
                                            main_seed, workers=workers)
    est = ex.crossover_estimate(math.isqrt(area), t, trials, main_seed,
                                workers=workers)
    row = {
        "side": side, "area": area, "t": t, "trials": trials,
        "pilot_mean_tau": pilot_mean,
        "q0_hat": est.q0_hat, "q1_hat": est.q1_hat,
        "q1_lo": est.q1_interval[0], "q1_hi": est.q1_interval[1],
        "blocks_per_axis": bound.blocks_per_axis,
        "z_capacity_bits": ex.z_capacity(est.q1_hat),
        "bound_bits": bound.bound_bits,
        "bound_lo": bound.interval_bits[0],
        "bound_hi": bound.interval_bits[1],
    }
    out.csv("summary.csv", list(row), [row])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar([t], [bound.bound_bits],
                yerr=[[bound.bound_bits - bound.interval_bits[0]],
                      [bound.interval_bits[1] - bound.bound_bits]],
                fmt="o")
    ax.axhline(bound.blocks_per_axis ** 2, ls="--", color="gray",
               label="noiseless K^2")
    ax.set_xlabel("read-out time")
    ax.set_ylabel("capacity lower bound (bits)")
    ax.legend()
    out.figure("capacity.png", fig)
    print(f"capacity: K={bound.blocks_per_axis} q1={est.q1_hat:.4f} "
          f"bound={bound.bound_bits:.2f} bits -> {out.dir}")
    return EXIT_OK


def cmd_census(cfg, seed, trials, workers, out):
    _check_keys(cfg, {"sides", "brute_force_limit", "trials", "seed"},
                "census")
    sides = _require(cfg, "sides", "census")
    rows = census_rows(sides, cfg.get("brute_force_limit", 25))
    for row in rows:
        row["discrepancy"] = (
            "formula double-counts the two uniform configurations"
            if row["formula_count"] != row["distinct_striped_count"] else "")
    out.csv("census.csv", ["side", "formula_count", "brute_force_count",
                           "distinct_striped_count", "discrepancy"], rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [r["side"] for r in rows]
    width = 0.35
    xs = np.arange(len(ks))
    ax.bar(xs - width / 2, [r["formula_count"] for r in rows], width,
           label="formula")
    ax.bar(xs + width / 2, [r["distinct_striped_count"] for r in rows],
           width, label="distinct")
    ax.set_xticks(xs, [str(k) for k in ks])
    ax.set_xlabel("grid side")
    ax.set_ylabel("stable configurations")
    ax.set_yscale("log")
    ax.legend()
    out.figure("census.png", fig)
    for row in rows:
        print(f"census k={row['side']}: formula={row['formula_count']} "
              f"brute_force={row['brute_force_count']} "
              f"distinct={row['distinct_striped_count']}"
              + (" (discrepancy flagged)" if row["discrepancy"] else ""))
    print(f"census -> {out.dir}")
    return EXIT_OK


def cmd_mi(cfg, seed, trials, workers, out):
    _check_keys(cfg, {"k", "prior", "t_max", "trials", "seed"}, "mi")
    k = _require(cfg, "k", "mi")
    t_max = int(cfg.get("t_max", 100))
    prior_name = cfg.get("prior", "uniform")
    priors = {"uniform": ex.uniform_prior, "stable": ex.stable_prior,
              "extremes": ex.extremes_prior}
    if prior_name not in priors:
        raise ConfigError(f"unknown prior {prior_name!r}")
    curve = ex.mi_curve(k, priors[prior_name](k), t_max)
    rows = [{"t": t, "bits": bits} for t, bits in enumerate(curve)]
    out.csv("mi.csv", ["t", "bits"], rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(curve)), curve)
    ax.set_xlabel("t (steps)")
    ax.set_ylabel("I(X0; Xt) bits")
    ax.set_title(f"k={k}, prior={prior_name}")
    out.figure("mi.png", fig)
    print(f"mi: k={k} prior={prior_name} I(0)={curve[0]:.4f} "
          f"I({t_max})={curve[-1]:.4f} -> {out.dir}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "erode": cmd_erode,
    "codec": cmd_codec,
    "capacity": cmd_capacity,
    "census": cmd_census,
    "mi": cmd_mi,
}


def _parser():
    parser = argparse.ArgumentParser(
        prog="isingchan",
        description="Glauber-dynamics storage-channel toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (or set \"seed\" in the config)")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        with open(args.config) as fp:
            cfg = json.load(fp)
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise ConfigError("a master seed is required (flag or config)")
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if args.workers < 1:
            raise ConfigError("workers must be >= 1")
        trials = args.trials if args.trials is not None \
            else int(cfg.get("trials", 1))
        if trials < 1:
            raise ConfigError("trials must be >= 1")
        out = _Out(args.out or f"runs/{args.command}", args.command, seed)
        return _COMMANDS[args.command](cfg, seed, trials, args.workers, out)
    except json.JSONDecodeError as err:
        print(f"config parse error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, FileNotFoundError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as err:
        print(f"geometry error: {err}", file=sys.stderr)
        return EXIT_GEOMETRY
    except DefectError as err:
        print(f"internal validation defect: {err}", file=sys.stderr)
        return EXIT_DEFECT


if __name__ == "__main__":
    sys.exit(main())
