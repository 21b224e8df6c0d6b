"""Command-line entry point: ``pareto-outlier {fit,simulate,oracle,reproduce,summarize}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, io, reproduce as repro
from .datasets import BUILTINS
from .exceptions import ConfigError, InvalidParameter, IoError, ParetoOutlierError
from .gibbs import GibbsConfig, run_chains
from .model import ModelParams, simulate_claims
from .oracle import oracle_fixed, oracle_unknown_beta
from .sampling import RandomStream

RUN_CONFIG = "run.cfg"
CLAIMS_FILE = "claims.csv"


def _add_common(p, config=True):
    if config:
        p.add_argument("--config", metavar="FILE", help="key=value configuration file")
        p.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append", default=[],
                       help="override one configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="root seed (same as --set mcmc.seed=N)")
    p.add_argument("--out", metavar="DIR", help="output directory (same as --set out.dir=DIR)")


def build_parser():
    parser = argparse.ArgumentParser(prog="pareto-outlier",
                                     description="Bayesian Pareto scale-inflated outlier model")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("fit", help="run the Gibbs sampler and write trace and report"))
    _add_common(sub.add_parser("simulate", help="write a labeled synthetic claims CSV"))
    _add_common(sub.add_parser("oracle", help="exact posterior by enumeration (small n)"))
    p = sub.add_parser("reproduce", help="re-run the published analyses")
    _add_common(p)
    p.add_argument("--section", type=int, choices=(4, 5, 6), action="append",
                   help="restrict to a section (repeatable; default: all)")
    p = sub.add_parser("summarize", help="re-report from an existing trace CSV")
    p.add_argument("trace", help="trace.csv written by fit")
    _add_common(p)
    return parser


def _overrides(args):
    items = list(getattr(args, "overrides", []) or [])
    if args.seed is not None:
        items.append(f"mcmc.seed={args.seed}")
    if args.out is not None:
        items.append(f"out.dir={args.out}")
    return items


def load_run_config(args, text=None):
    if text is None:
        text = io.read_config_file(args.config) if getattr(args, "config", None) else ""
    return io.parse_config(text, _overrides(args))


def load_data(cfg: io.RunConfig):
    """Claims of the configured source, with truth labels when they are known."""
    if cfg.data_path is not None:
        return io.read_claims_csv(cfg.data_path), None
    if cfg.builtin is not None:
        ds = BUILTINS[cfg.builtin]
        return ds.sample, None if ds.labels is None else ds.labels.delta
    sim = cfg.simulation
    eps = sim.n_out / (sim.n_std + sim.n_out)
    # unspawned stream: distinct from every chain stream of the same seed
    lab = simulate_claims(sim.n_std, sim.n_out, ModelParams(sim.alpha, sim.theta, sim.beta, eps),
                          RandomStream(cfg.gibbs.root_seed))
    return lab.sample, lab.truth.delta


def _out_dir(cfg):
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from None
    return out


def _effective_config(cfg: io.RunConfig):
    """Flat key=value text that rebuilds ``cfg`` (used by ``summarize``)."""
    keys = dict(cfg.raw)
    keys["mcmc.seed"] = cfg.gibbs.root_seed
    if cfg.data_path is not None:
        # summarize reads the copied claims, so point there and keep theta explicit
        keys["data.path"] = CLAIMS_FILE
    return "".join(f"{k}={v}\n" for k, v in sorted(keys.items()))


def _emit(kv, text_path, cfg):
    if cfg.out_format == "kv":
        sys.stdout.write(io.format_kv(kv))
    else:
        sys.stdout.write(Path(text_path).read_text())


def cmd_fit(args):
    cfg = load_run_config(args)
    sample, labels = load_data(cfg)
    trace = run_chains(sample, cfg.priors, cfg.gibbs)
    out = _out_dir(cfg)
    io.write_trace_csv(trace, out / "trace.csv")
    io.write_delta_blocks(trace, out / "delta_blocks.csv")
    io.write_claims_csv(out / CLAIMS_FILE, sample.values, labels)
    with io._open_write(out / RUN_CONFIG) as fh:
        fh.write(_effective_config(cfg))
    kv = _report(trace, sample, cfg, out)
    _emit(kv, out / "report.txt", cfg)
    return 0


def _report(trace, sample, cfg, out):
    rep = analysis.posterior_report(trace, sample, cfg.priors)
    meta = {"source": cfg.builtin or cfg.data_path or "simulation", "n": sample.n,
            "records": len(trace), "chains": cfg.gibbs.chains, "burnin": cfg.gibbs.burn_in,
            "thin": cfg.gibbs.thin, "seed": cfg.gibbs.root_seed,
            "model": "basic" if cfg.priors.basic else "scale-inflated"}
    return io.write_report(out, rep.summaries, rep.prior_pmf, rep.posterior_pmf, rep.outliers,
                           rep.quantiles, trace=trace, hist_names=rep.sampled, meta=meta)


def cmd_simulate(args):
    text = io.read_config_file(args.config) if args.config else ""
    if not any(k.startswith(("data.", "sim.")) for k in
               list(io._parse_lines(text)) + [o.split("=", 1)[0].strip() for o in args.overrides]):
        # no source given: the simulated design of the synthetic builtin
        text = f"sim.n_std={io.SIM_DEFAULTS['sim.n_std']}\n" + text
    cfg = load_run_config(args, text)
    if cfg.simulation is None:
        raise ConfigError("simulate needs a sim.* dataset source", key="sim.n_std")
    sample, labels = load_data(cfg)
    out = _out_dir(cfg)
    path = out / "simulated.csv"
    io.write_claims_csv(path, sample.values, labels)
    print(path)
    return 0


def cmd_oracle(args):
    cfg = load_run_config(args)
    sample, _ = load_data(cfg)
    if cfg.priors.beta_fixed:
        res = oracle_fixed(sample, cfg.priors)
    else:
        res = oracle_unknown_beta(sample, cfg.priors)
    out = _out_dir(cfg)
    text = io.format_kv(res.as_dict())
    with io._open_write(out / "oracle.kv") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_reproduce(args):
    overrides = _overrides(args)
    raw = io._parse_lines(io.read_config_file(args.config)) if args.config else {}
    raw.update(io._split_override(o) for o in overrides)
    allowed = {"mcmc.burnin", "mcmc.kept", "mcmc.thin", "mcmc.chains", "mcmc.seed", "out.dir"}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"reproduce accepts only mcmc.* and out.dir, got {key!r}", key=key)
    cfg = {k: io._convert(k, v) for k, v in raw.items()}
    d = GibbsConfig()
    try:
        gibbs = GibbsConfig(burn_in=cfg.get("mcmc.burnin", d.burn_in), kept=cfg.get("mcmc.kept", d.kept),
                            thin=cfg.get("mcmc.thin", d.thin), chains=cfg.get("mcmc.chains", d.chains),
                            root_seed=cfg.get("mcmc.seed", d.root_seed))
    except InvalidParameter as exc:
        raise ConfigError(f"mcmc: {exc}", key="mcmc") from None
    out = Path(cfg.get("out.dir", "reproduction"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from None
    _, rows = repro.reproduce(args.section, gibbs, out,
                              progress=lambda key: print(f"running {key}", file=sys.stderr))
    sys.stdout.write(repro.format_comparison(rows))
    return 0


def cmd_summarize(args):
    trace_path = Path(args.trace)
    here = trace_path.parent
    text = None
    if not args.config and (here / RUN_CONFIG).exists():
        text = io.read_config_file(here / RUN_CONFIG)
        # relative data.path in run.cfg refers to the run directory
        text = text.replace(f"data.path={CLAIMS_FILE}", f"data.path={here / CLAIMS_FILE}")
    overrides = list(args.overrides)
    if args.out is None and not any(o.startswith("out.dir=") for o in overrides):
        overrides.append(f"out.dir={here}")
    args.overrides = overrides
    cfg = load_run_config(args, text)
    trace = io.read_trace_csv(trace_path)
    if (here / "delta_blocks.csv").exists():
        trace.block_sizes, trace.delta_block_sums = io.read_delta_blocks(here / "delta_blocks.csv")
    if (here / CLAIMS_FILE).exists():
        sample = io.read_claims_csv(here / CLAIMS_FILE)
    else:
        sample, _ = load_data(cfg)
    out = _out_dir(cfg)
    kv = _report(trace, sample, replace(cfg, gibbs=replace(cfg.gibbs, chains=int(trace.chain.max()) + 1)),
                 out)
    _emit(kv, out / "report.txt", cfg)
    return 0


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "oracle": cmd_oracle,
            "reproduce": cmd_reproduce, "summarize": cmd_summarize}


def dispatch(command, args):
    return COMMANDS[command](args)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return dispatch(args.command, args)
    except ParetoOutlierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
