"""Command line experiment runner.

Every run needs an explicit ``--seed``. Results are printed as JSON on
stdout and written, together with CSV files and a ``manifest.json`` that
echoes the full configuration, to the output directory (``--out``, or the
``CYCLOOP_OUT`` environment variable, default ``cycloop-out``).

CSV layouts:

  mcmc / sample   step, n_bridges, n_objects, len_1 .. len_10 (decreasing, zero padded)
  bridges         edge_u, edge_v, time
  decomposition   cycle_id, length, winding, n_strands
  split-merge     t_or_step, n_parts, p1 .. p10

Floats in CSV files carry 17 significant digits. Exit codes: 0 success,
1 a statistical check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import estimators, mcmc, oracle, pd, splitmerge
from .bridges import sample_rho
from .decomposition import CYCLES, LOOPS, decompose
from .graph import Graph, GraphError, parse_graph_spec

OUT_ENV = "CYCLOOP_OUT"


class UsageError(Exception):
    pass


def _count(text: str) -> int:
    """Integer that may be written in float notation, e.g. ``1e6``."""
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if val != int(val) or val < 0:
        raise argparse.ArgumentTypeError(f"not a nonnegative integer: {text!r}")
    return int(val)


def _positive(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return val


def _pkg_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _replica_seeds(seed: int, workers: int) -> list[np.random.SeedSequence]:
    return [np.random.SeedSequence(seed, spawn_key=(i,)) for i in range(workers)]


def _split(n: int, workers: int) -> list[int]:
    return [n // workers + (1 if i < n % workers else 0) for i in range(workers)]


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _graph(cfg) -> Graph:
    return parse_graph_spec(cfg.graph)


def _check_model(g: Graph, model: str):
    if model == LOOPS and g.bipartition is None:
        raise UsageError("loops need a bipartite graph")


# -- replica workers (module level so they can be pickled) ---------------------------

def _sample_replica(graph_spec, beta, model, n, seedseq):
    g = parse_graph_spec(graph_spec)
    rng = np.random.default_rng(seedseq)
    out = []
    last = None
    for i in range(n):
        w = sample_rho(g, beta, rng)
        d = decompose(w, g, model)
        out.append(mcmc.ChainSample(i, 0.0, w.total_count, d.sorted_lengths(), d.n_strands,
                                    d.windings, d.lengths[d.object_at_zero()]))
        last = (w, d)
    return out, last


def _mcmc_replica(graph_spec, beta, theta, model, steps, burn_in, thin, sampler, seedseq):
    g = parse_graph_spec(graph_spec)
    return list(mcmc.run_chain(g, beta, theta, model, steps, burn_in, thin, seed=seedseq, sampler=sampler))


def _oracle_replica(graph_spec, beta, h, model, n, seedseq):
    g = parse_graph_spec(graph_spec)
    return oracle.identity_samples(g, beta, h, model, n, np.random.default_rng(seedseq))


def _schramm_replica(n, c, theta, n_samples, seedseq):
    return estimators.schramm_samples(n, c, n_samples, np.random.default_rng(seedseq), theta)


# -- subcommands -------------------------------------------------------------------

def cmd_sample(cfg, out):
    g = _graph(cfg)
    _check_model(g, cfg.model)
    jobs = [(cfg.graph, cfg.beta, cfg.model, n, s)
            for n, s in zip(_split(cfg.samples, cfg.workers), _replica_seeds(cfg.seed, cfg.workers))]
    results = _map(_sample_replica, jobs, cfg.workers)
    samples = [s for r, _ in results for s in r]
    out.write("samples.csv", mcmc.samples_csv(samples))
    last = next((r[1] for r in reversed(results) if r[1] is not None), None)
    if last is not None:
        out.write("bridges.csv", last[0].to_csv(g))
        out.write("decomposition.csv", last[1].summary_csv())
    counts = np.array([s.n_objects for s in samples], dtype=float)
    report = {"n_samples": len(samples), "mean_n_objects": float(counts.mean()) if counts.size else math.nan,
              "mean_n_bridges": float(np.mean([s.n_bridges for s in samples])) if samples else math.nan}
    return report, True


def cmd_mcmc(cfg, out):
    g = _graph(cfg)
    _check_model(g, cfg.model)
    steps = cfg.steps
    burn = cfg.burn_in if cfg.burn_in is not None else (
        mcmc.default_burn_in(g, cfg.beta) if cfg.sampler != "ct" else 10.0)
    thin = cfg.thin if cfg.thin is not None else (
        mcmc.default_thin(g, cfg.beta) if cfg.sampler != "ct" else 1.0)
    if not steps > burn:
        raise UsageError("--steps must exceed --burn-in")
    jobs = [(cfg.graph, cfg.beta, cfg.theta, cfg.model, steps, burn, thin, cfg.sampler, s)
            for s in _replica_seeds(cfg.seed, cfg.workers)]
    results = _map(_mcmc_replica, jobs, cfg.workers)
    samples = [s for r in results for s in r]
    out.write("mcmc.csv", mcmc.samples_csv(samples))
    report = {"n_samples": len(samples), "replicas": cfg.workers,
              "mean_n_objects": float(np.mean([s.n_objects for s in samples])),
              "mean_n_bridges": float(np.mean([s.n_bridges for s in samples]))}
    return report, True


def cmd_oracle_check(cfg, out):
    g = _graph(cfg)
    _check_model(g, cfg.model)
    if g.n_vertices > 8:
        raise UsageError("oracle checks are limited to 8 vertices")
    jobs = [(cfg.graph, cfg.beta, cfg.h, cfg.model, n, s)
            for n, s in zip(_split(cfg.samples, cfg.workers), _replica_seeds(cfg.seed, cfg.workers))]
    raws = _map(_oracle_replica, jobs, cfg.workers)
    pooled = {k: np.concatenate([r[k] for r in raws]) for k in raws[0]}
    rep = oracle.identity_report(g, cfg.beta, cfg.h, cfg.model, pooled)
    return rep.to_dict(), abs(rep.z_score) < 3


def cmd_schramm(cfg, out):
    if not cfg.c > 0.5:
        raise UsageError("--c must exceed 1/2")
    seeds = _replica_seeds(cfg.seed, cfg.workers + 1)
    jobs = [(cfg.n, cfg.c, cfg.theta, n, s) for n, s in zip(_split(cfg.samples, cfg.workers), seeds)]
    raws = _map(_schramm_replica, jobs, cfg.workers)
    pooled = {k: np.concatenate([r[k] for r in raws]) for k in raws[0]}
    rep = estimators.schramm_summary(cfg.n, cfg.c, cfg.theta, pooled, np.random.default_rng(seeds[-1]))
    report = rep.to_dict()
    ks_ok = rep.ks_p_value > 0.01
    macro_ok = abs(rep.macro_fraction - rep.eta_limit) <= 0.02
    report.update({"ks_pass": ks_ok, "macro_pass": macro_ok})
    return report, ks_ok and macro_ok


def cmd_split_merge(cfg, out):
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "one":
        p = splitmerge.Partition([1.0])
    else:
        p = pd.sample_pd_stick(cfg.beta_s / cfg.beta_m, rng)
    rows = [(0.0, p)]
    if cfg.horizon is not None:
        step = cfg.horizon / cfg.steps
        for i in range(1, cfg.steps + 1):
            p = splitmerge.run_continuous(p, cfg.beta_s, cfg.beta_m, step, rng)
            rows.append((i * step, p))
    else:
        if cfg.beta_s > 1 or cfg.beta_m > 1:
            raise UsageError("discrete acceptance parameters must lie in (0, 1]")
        for i in range(1, cfg.steps + 1):
            p = splitmerge.step_discrete(p, cfg.beta_s, cfg.beta_m, rng)
            rows.append((i, p))
    out.write("split_merge.csv", splitmerge.trajectory_csv(rows))
    report = {"theta": cfg.beta_s / cfg.beta_m, "final_n_parts": len(p), "final_largest": float(p.parts[0])}
    return report, True


def cmd_pd_test(cfg, out):
    ss = _replica_seeds(cfg.seed, 2)
    pick = pd.size_biased_pick_test(cfg.theta, cfg.n, np.random.default_rng(ss[0]))
    rng = np.random.default_rng(ss[1])
    stick = pd.pd_stick_rows(cfg.theta, cfg.n, rng)[:, 0]
    ppp, _ = pd.pd_ppp_rows(cfg.theta, cfg.n, rng)
    d, p = estimators.ks_test(stick, ppp[:, 0])
    two = {"test": f"largest_part_stick_vs_ppp_{cfg.theta:g}", "n": cfg.n, "statistic": d,
           "p_value": p, "pass": p > 0.01}
    tests = [pick.to_dict(), two]
    ok = all(t["pass"] for t in tests)
    return {"theta": cfg.theta, "tests": tests, "pass": ok}, ok


def cmd_bound(cfg, out):
    if cfg.graph:
        g = _graph(cfg)
        kappa = g.max_degree()
    elif cfg.kappa:
        g, kappa = None, cfg.kappa
    else:
        raise UsageError("give --graph or --kappa")
    report = {"theta": cfg.theta, "beta": cfg.beta, "kappa": kappa, "model": cfg.model, "bounds": []}
    ok = True
    emp = None
    if g is not None and cfg.samples:
        _check_model(g, cfg.model)
        emp = _tail_probabilities(g, cfg, max(cfg.k))
    for k in cfg.k:
        b = estimators.high_temp_bound(cfg.theta, cfg.beta, kappa, k, cfg.model)
        row = {"k": k, "bound": b.value, "a": b.a, "vacuous": b.vacuous}
        if emp is not None:
            p, se = emp[k]
            row.update({"empirical": p, "stderr": se, "pass": p - 3 * se <= b.value})
            ok = ok and row["pass"]
        report["bounds"].append(row)
    return report, ok


def _tail_probabilities(g: Graph, cfg, kmax: int):
    if cfg.theta == 1:
        sampler, steps, burn, thin = "direct", cfg.samples, 0, 1
    else:
        thin = mcmc.default_thin(g, cfg.beta)
        burn = mcmc.default_burn_in(g, cfg.beta)
        sampler, steps = "mh", burn + thin * (cfg.samples - 1)
    vl = np.array([s.vertex_lengths for s in mcmc.run_chain(g, cfg.beta, cfg.theta, cfg.model, steps,
                                                            burn, thin, seed=cfg.seed, sampler=sampler)])
    out = {}
    for k in range(1, kmax + 1):
        per_sample = (vl > cfg.beta * k + 1e-12 * cfg.beta).mean(axis=1)
        out[k] = (float(per_sample.mean()), float(per_sample.std(ddof=1) / math.sqrt(per_sample.size)))
    return out


def cmd_contact(cfg, out):
    g = _graph(cfg)
    _check_model(g, cfg.model)
    rep = estimators.contact_scaling_experiment(g, cfg.beta, cfg.theta, cfg.samples,
                                                np.random.default_rng(cfg.seed), cfg.model)
    return rep.to_dict(), True


# -- plumbing ----------------------------------------------------------------------

class _Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def write(self, name: str, text: str):
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / name).write_text(text)
        self.files.append(name)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="random seed (required)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./cycloop-out)")
    p.add_argument("--config", help="JSON file with option values; explicit flags take precedence")
    p.add_argument("--workers", type=int, default=1, help="independent replicas with derived sub-seeds")


def _add_graph(p):
    p.add_argument("--graph",
                   help="edge | triangle | path:N | cycle:N | complete:N | lattice:D:N[:periodic] | file:PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cycloop", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="independent Poisson bridge configurations and their decompositions")
    _add_graph(p)
    p.add_argument("--beta", type=_positive)
    p.add_argument("--model", choices=[CYCLES, LOOPS], default=CYCLES)
    p.add_argument("--samples", type=_count, default=1000)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mcmc", help="Markov chain for the theta-weighted measure; CSV of sorted lengths")
    _add_graph(p)
    p.add_argument("--beta", type=_positive)
    p.add_argument("--theta", type=_positive, default=2.0)
    p.add_argument("--model", choices=[CYCLES, LOOPS], default=CYCLES)
    p.add_argument("--sampler", choices=["mh", "ct", "direct"], default="mh")
    p.add_argument("--steps", type=float,
                   help="proposals (mh), total time (ct) or proposals-equivalent (direct)")
    p.add_argument("--burn-in", type=float, default=None)
    p.add_argument("--thin", type=float, default=None)
    p.set_defaults(func=cmd_mcmc)

    p = sub.add_parser("oracle-check", help="exact trace vs bridge-process estimate")
    _add_graph(p)
    p.add_argument("--beta", type=_positive)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--model", choices=[CYCLES, LOOPS], default=CYCLES)
    p.add_argument("--samples", type=_count, default=10 ** 6)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("schramm", help="stirring on the complete graph vs PD(1)")
    p.add_argument("--n", type=_count, default=200)
    p.add_argument("--c", type=_positive, default=1.0)
    p.add_argument("--theta", type=_positive, default=1.0)
    p.add_argument("--samples", type=_count, default=10 ** 4)
    p.set_defaults(func=cmd_schramm)

    p = sub.add_parser("split-merge", help="split-merge trajectory; continuous time with --horizon")
    p.add_argument("--beta-s", type=_positive, default=1.0)
    p.add_argument("--beta-m", type=_positive, default=1.0)
    p.add_argument("--steps", type=_count, default=100)
    p.add_argument("--horizon", type=_positive, default=None)
    p.add_argument("--init", choices=["one", "pd"], default="one")
    p.set_defaults(func=cmd_split_merge)

    p = sub.add_parser("pd-test", help="Poisson-Dirichlet sampler self-tests")
    p.add_argument("--theta", type=_positive)
    p.add_argument("--n", type=_count, default=10 ** 5)
    p.set_defaults(func=cmd_pd_test)

    p = sub.add_parser("bound", help="high-temperature tail bound, optionally with an empirical check")
    _add_graph(p)
    p.add_argument("--kappa", type=int, default=None)
    p.add_argument("--beta", type=_positive)
    p.add_argument("--theta", type=_positive, default=1.0)
    p.add_argument("--model", choices=[CYCLES, LOOPS], default=CYCLES)
    p.add_argument("--k", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--samples", type=_count, default=0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("contact", help="contact zones and bridges against lambda * lambda'")
    _add_graph(p)
    p.add_argument("--beta", type=_positive)
    p.add_argument("--theta", type=_positive, default=1.0)
    p.add_argument("--model", choices=[CYCLES, LOOPS], default=CYCLES)
    p.add_argument("--samples", type=_count, default=100)
    p.set_defaults(func=cmd_contact)

    for action in sub.choices.values():
        _add_common(action)
    return parser


REQUIRED = {
    "sample": ("graph", "beta"),
    "mcmc": ("graph", "beta", "steps"),
    "oracle-check": ("graph", "beta"),
    "pd-test": ("theta",),
    "bound": ("beta",),
    "contact": ("graph", "beta"),
}


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        unknown = set(loaded) - set(actions) - {"command"}
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        # scalars go through the flag's own type check
        sub.set_defaults(**{k: str(v) if actions[k].type and isinstance(v, (int, float)) else v
                            for k, v in loaded.items() if k != "command"})
        args = parser.parse_args(argv)
    if args.seed is None:
        parser.error("--seed is required")
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k) is None]
    if missing:
        parser.error("missing required options: " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return parser, args


def main(argv=None) -> int:
    parser, args = _parse(argv)
    cfg_echo = {k: v for k, v in vars(args).items() if k not in ("func", "out", "config")}
    out_dir = Path(args.out or os.environ.get(OUT_ENV) or "cycloop-out")
    out = _Outputs(out_dir)
    try:
        report, ok = args.func(args, out)
    except (UsageError, GraphError, oracle.DimensionError) as exc:
        print(f"cycloop {args.command}: {exc}", file=sys.stderr)
        return 2
    digest = _config_hash(cfg_echo)
    report = {"command": args.command, "seed": args.seed, "config_hash": digest,
              "graph": cfg_echo.get("graph"), "beta": cfg_echo.get("beta"),
              "theta": cfg_echo.get("theta"), **report, "ok": bool(ok)}
    text = json.dumps(report, indent=2, sort_keys=False) + "\n"
    out.write("report.json", text)
    manifest = {"version": _pkg_version(), "command": args.command, "config": cfg_echo,
                "config_hash": digest, "outputs": sorted(out.files)}
    out.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
