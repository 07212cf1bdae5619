"""Command-line front end for the desk-scale experiments.

Subcommands: simulate, couple, uturn-scan, check-stepsize, kstar, bound,
fix.  Flag values take precedence over a plain key=value config file, which
takes precedence over the built-in defaults; the NUTS_GAUSS_SEED environment
variable overrides only the default seed.  Every CSV-producing run writes a
JSON manifest next to its outputs, and identical configurations produce
byte-identical CSVs regardless of the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .coupling import (
    COUPLE_HIST_CSV_HEADER,
    COUPLE_TRACE_CSV_HEADER,
    coupled_experiment,
)
from .dynamics import LeapfrogConfig, PhasePoint
from .geometry import (
    MixingBoundParams,
    default_shell,
    delta_bound,
    k_star,
    mixing_bound,
    stepsize_condition_check,
)
from .orbits import SINE_SCAN_CSV_HEADER, uturn_sine_scan
from .samplers import (
    JitterMode,
    KernelKind,
    SamplerConfig,
    TRANSITION_CSV_HEADER,
    run_chain,
    transition_csv_row,
)
from .streams import chain_rng

SIMULATE_CSV_HEADER = "chain,iter,norm_sq,stop_reason,orbit_k,grad_evals"

_KERNELS = {
    "nuts": KernelKind.NUTS,
    "multinoulli": KernelKind.MULTINOULLI_HMC,
    "uniform": KernelKind.UNIFORM_HMC,
}
_JITTERS = {
    "none": JitterMode.NONE,
    "transition": JitterMode.PER_TRANSITION,
    "leapfrog": JitterMode.PER_LEAPFROG_STEP,
}

# stream index reserved for drawing shared initial states
_INIT_STREAM = 0x7FFFFFFF


def _default_seed() -> int:
    return int(os.environ.get("NUTS_GAUSS_SEED", "0"))


def _read_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"malformed config line (expected key=value): {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(ns: argparse.Namespace, config: dict, key: str, default, cast):
    flag = getattr(ns, key, None)
    if flag is not None:
        return flag
    if key in config:
        return cast(config[key])
    return default


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as handle:
        handle.write(header + "\n")
        for row in rows:
            handle.write(row + "\n")


def _write_manifest(
    out: Path, command: str, config: dict, seed: int, outputs: list[Path], started: float
) -> Path:
    manifest_path = out.with_name(out.stem + "_manifest.json")
    payload = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "seed": seed,
        "version": __version__,
        "duration_seconds": time.perf_counter() - started,
        "outputs": [p.name for p in outputs],
    }
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return manifest_path


def _emit_json(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _sampler_config(ns: argparse.Namespace, config: dict) -> tuple[SamplerConfig, dict]:
    seed = _resolve(ns, config, "seed", _default_seed(), int)
    resolved = {
        "d": _resolve(ns, config, "d", 10000, int),
        "h": _resolve(ns, config, "h", 0.11, float),
        "kmax": _resolve(ns, config, "kmax", 10, int),
        "kernel": _resolve(ns, config, "kernel", "nuts", str),
        "jitter": _resolve(ns, config, "jitter", "none", str),
        "jitter_width": _resolve(ns, config, "jitter_width", 0.1, float),
        "fixed_k": _resolve(ns, config, "fixed_k", None, int),
        "seed": seed,
    }
    if resolved["kernel"] not in _KERNELS:
        raise SystemExit(f"unknown kernel {resolved['kernel']!r}")
    if resolved["jitter"] not in _JITTERS:
        raise SystemExit(f"unknown jitter mode {resolved['jitter']!r}")
    cfg = SamplerConfig(
        h=resolved["h"],
        k_max=resolved["kmax"],
        kernel=_KERNELS[resolved["kernel"]],
        fixed_k=resolved["fixed_k"],
        jitter=_JITTERS[resolved["jitter"]],
        jitter_width=resolved["jitter_width"],
        seed=seed,
    )
    return cfg, resolved


def _initial_states(init: str, d: int, seed: int, n_chains: int) -> list[np.ndarray | None]:
    """Starting positions per chain; None means draw from the chain's stream."""
    if init == "fixed":
        x0 = chain_rng(seed, _INIT_STREAM).standard_normal(d)
        return [x0] * n_chains
    if init == "gaussian":
        return [None] * n_chains
    if init == "zero":
        return [np.zeros(d)] * n_chains
    raise SystemExit(f"unknown init mode {init!r}")


def _chain_worker(seed: int, chain_idx: int, x0, d: int, n_iters: int, cfg: SamplerConfig):
    rng = chain_rng(seed, chain_idx)
    if x0 is None:
        x0 = rng.standard_normal(d)
    records = run_chain(x0, n_iters, cfg, rng)
    return records


def _simulate_rows(seed, chain_idx, x0, d, n_iters, burn_in, cfg):
    rows = []
    for it, rec in enumerate(_chain_worker(seed, chain_idx, x0, d, n_iters, cfg), start=1):
        if it <= burn_in:
            continue
        norm_sq = float(np.dot(rec.end_position, rec.end_position))
        rows.append(
            f"{chain_idx},{it},{norm_sq!r},{rec.stop_reason.value},"
            f"{rec.orbit.log2_length},{rec.gradient_evals}"
        )
    return rows


def cmd_simulate(ns: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _read_config(ns.config)
    cfg, resolved = _sampler_config(ns, config)
    resolved.update(
        n_chains=_resolve(ns, config, "n_chains", 100, int),
        n_iters=_resolve(ns, config, "n_iters", 50, int),
        burn_in=_resolve(ns, config, "burn_in", 0, int),
        init=_resolve(ns, config, "init", "fixed", str),
        workers=_resolve(ns, config, "workers", os.cpu_count() or 1, int),
    )
    out = Path(ns.out)
    starts = _initial_states(resolved["init"], resolved["d"], cfg.seed, resolved["n_chains"])
    chunks = Parallel(n_jobs=resolved["workers"])(
        delayed(_simulate_rows)(
            cfg.seed, c, starts[c], resolved["d"], resolved["n_iters"], resolved["burn_in"], cfg
        )
        for c in range(resolved["n_chains"])
    )
    _write_csv(out, SIMULATE_CSV_HEADER, (row for chunk in chunks for row in chunk))
    _write_manifest(out, "simulate", resolved, cfg.seed, [out], started)
    return 0


def cmd_couple(ns: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _read_config(ns.config)
    cfg, resolved = _sampler_config(ns, config)
    resolved.update(
        n_pairs=_resolve(ns, config, "n_pairs", 100, int),
        n_iters=_resolve(ns, config, "n_iters", 50, int),
        workers=_resolve(ns, config, "workers", os.cpu_count() or 1, int),
    )
    out = Path(ns.out)
    hist_out = out.with_name(out.stem + "_hist" + out.suffix)
    trace = coupled_experiment(
        resolved["n_pairs"], resolved["n_iters"], cfg, resolved["d"], n_jobs=resolved["workers"]
    )
    _write_csv(out, COUPLE_TRACE_CSV_HEADER, trace.trace_rows())
    _write_csv(hist_out, COUPLE_HIST_CSV_HEADER, trace.hist_rows())
    _write_manifest(out, "couple", resolved, cfg.seed, [out, hist_out], started)
    return 0


def _parse_k_range(text: str) -> range:
    lo, _, hi = text.partition(":")
    return range(int(lo), int(hi) + 1)


def cmd_uturn_scan(ns: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _read_config(ns.config)
    seed = _resolve(ns, config, "seed", _default_seed(), int)
    d = _resolve(ns, config, "d", 10000, int)
    h = _resolve(ns, config, "h", 0.11, float)
    shell = default_shell(d, h)
    alpha = _resolve(ns, config, "alpha", shell.alpha, float)
    r = _resolve(ns, config, "r", shell.r, float)
    k_range = _parse_k_range(_resolve(ns, config, "k_range", "0:8", str))
    n_draws = _resolve(ns, config, "n_draws", 1, int)
    out = Path(ns.out)
    lf = LeapfrogConfig(h)
    rows = []
    for draw in range(n_draws):
        rng = chain_rng(seed, draw)
        base = PhasePoint(rng.standard_normal(d), rng.standard_normal(d))
        rows.extend(row.csv_row() for row in uturn_sine_scan(base, lf, k_range))
    _write_csv(out, SINE_SCAN_CSV_HEADER, rows)
    resolved = {
        "d": d,
        "h": h,
        "alpha": alpha,
        "r": r,
        "delta": delta_bound(alpha, r, d, h),
        "k_range": f"{k_range.start}:{k_range.stop - 1}",
        "n_draws": n_draws,
        "seed": seed,
    }
    _write_manifest(out, "uturn-scan", resolved, seed, [out], started)
    return 0


def cmd_fix(ns: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _read_config(ns.config)
    cfg, resolved = _sampler_config(ns, config)
    resolved.update(
        n_chains=_resolve(ns, config, "n_chains", 50, int),
        n_iters=_resolve(ns, config, "n_iters", 20, int),
        init=_resolve(ns, config, "init", "gaussian", str),
        workers=_resolve(ns, config, "workers", os.cpu_count() or 1, int),
    )
    out = Path(ns.out)
    starts = _initial_states(resolved["init"], resolved["d"], cfg.seed, resolved["n_chains"])

    def rows_for(chain_idx: int) -> list[str]:
        records = _chain_worker(
            cfg.seed, chain_idx, starts[chain_idx], resolved["d"], resolved["n_iters"], cfg
        )
        return [
            f"{chain_idx}," + transition_csv_row(it, rec)
            for it, rec in enumerate(records, start=1)
        ]

    chunks = Parallel(n_jobs=resolved["workers"])(
        delayed(rows_for)(c) for c in range(resolved["n_chains"])
    )
    _write_csv(out, "chain," + TRANSITION_CSV_HEADER, (row for chunk in chunks for row in chunk))
    _write_manifest(out, "fix", resolved, cfg.seed, [out], started)
    return 0


def cmd_check_stepsize(ns: argparse.Namespace) -> int:
    report = stepsize_condition_check(ns.h, ns.delta, ns.kmax)
    _emit_json(report.to_json_dict(), ns.out)
    return 0


def cmd_kstar(ns: argparse.Namespace) -> int:
    k = k_star(ns.h, ns.delta)
    _emit_json({"h": ns.h, "delta": ns.delta, "k_star": k}, ns.out)
    return 0


def cmd_bound(ns: argparse.Namespace) -> int:
    report: dict = {"epoch": ns.epoch, "b": ns.b, "eps": ns.eps}
    if None in (ns.rho, ns.c_reg, ns.c, ns.diam, ns.p_reject):
        horizon = ns.epoch * math.ceil(math.log(2.0 / ns.eps) / ns.b)
        report.update(horizon=horizon, feasible=None)
    else:
        params = MixingBoundParams(
            rho=ns.rho,
            c_reg=ns.c_reg,
            c=ns.c,
            b=ns.b,
            epoch=ns.epoch,
            epsilon=ns.eps,
            diameter=ns.diam,
        )
        feasible, horizon = mixing_bound(params, ns.p_reject)
        report.update(horizon=horizon, feasible=feasible)
    _emit_json(report, ns.out)
    return 0


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, help="target dimension")
    p.add_argument("--h", type=float, help="leapfrog step size")
    p.add_argument("--kmax", type=int, help="maximal number of doublings")
    p.add_argument("--kernel", choices=sorted(_KERNELS), help="transition kernel")
    p.add_argument("--jitter", choices=sorted(_JITTERS), help="step-size jitter mode")
    p.add_argument("--jitter-width", dest="jitter_width", type=float)
    p.add_argument("--fixed-k", dest="fixed_k", type=int, help="orbit exponent for reduced kernels")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True, help="output CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nutslab",
        description="NUTS on the canonical Gaussian: samplers, couplings, diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run chains and record per-iteration statistics")
    _add_sampler_flags(p)
    p.add_argument("--n-chains", dest="n_chains", type=int)
    p.add_argument("--n-iters", dest="n_iters", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--init", choices=["fixed", "gaussian", "zero"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("couple", help="synchronously coupled chains, distance trace")
    _add_sampler_flags(p)
    p.add_argument("--n-pairs", dest="n_pairs", type=int)
    p.add_argument("--n-iters", dest="n_iters", type=int)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("uturn-scan", help="U-turn dot products against the sine law")
    p.add_argument("--d", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--k-range", dest="k_range", help="inclusive range, e.g. 0:8")
    p.add_argument("--n-draws", dest="n_draws", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_uturn_scan)

    p = sub.add_parser("fix", help="orbit lengths under step-size randomization")
    _add_sampler_flags(p)
    p.add_argument("--n-chains", dest="n_chains", type=int)
    p.add_argument("--n-iters", dest="n_iters", type=int)
    p.add_argument("--init", choices=["fixed", "gaussian", "zero"])
    p.set_defaults(func=cmd_fix)

    p = sub.add_parser("check-stepsize", help="flag step sizes in the forbidden zones")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_stepsize)

    p = sub.add_parser("kstar", help="the admissible orbit exponent, if any")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_kstar)

    p = sub.add_parser("bound", help="accept/reject mixing horizon calculator")
    p.add_argument("--epoch", type=int, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--rho", type=float)
    p.add_argument("--c-reg", dest="c_reg", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--diam", type=float)
    p.add_argument("--p-reject", dest="p_reject", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
