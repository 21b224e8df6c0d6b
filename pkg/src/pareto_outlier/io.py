"""Configuration parsing, claim and trace CSV files, and run reports."""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .datasets import BUILTINS, SYNTHETIC_PRIORS
from .exceptions import (ConfigError, ConfigTypeError, InvalidParameter, IoError,
                         MissingRequired, ParseError, UnknownKey)
from .gibbs import (BetaPrior, Fixed, GammaPrior, GibbsConfig, PriorSpec, ShiftedExpPrior, Trace)
from .model import ClaimSample, validate_dataset

_INT, _FLOAT, _STR = int, float, str

CONFIG_KEYS = {
    "data.path": _STR, "data.builtin": _STR,
    "sim.n_std": _INT, "sim.n_out": _INT, "sim.alpha": _FLOAT, "sim.theta": _FLOAT,
    "sim.beta": _FLOAT,
    "prior.alpha.shape": _FLOAT, "prior.alpha.rate": _FLOAT, "prior.alpha.lower_trunc": _FLOAT,
    "prior.epsilon.a": _FLOAT, "prior.epsilon.b": _FLOAT,
    "theta.mode": _STR, "theta.value": _FLOAT, "theta.shape": _FLOAT, "theta.rate": _FLOAT,
    "beta.mode": _STR, "beta.value": _FLOAT, "beta.lower": _FLOAT, "beta.lambda": _FLOAT,
    "mcmc.burnin": _INT, "mcmc.kept": _INT, "mcmc.thin": _INT, "mcmc.chains": _INT,
    "mcmc.seed": _INT,
    "model.type": _STR,
    "out.dir": _STR, "out.format": _STR,
}

# the simulated-data design of the synthetic builtin
SIM_DEFAULTS = {"sim.n_std": 16, "sim.n_out": 4, "sim.alpha": 2.5, "sim.theta": 50000.0,
                "sim.beta": 3.0}
_MODES = ("fixed", "unknown")
_FORMATS = ("text", "kv")
_MODELS = ("scale-inflated", "basic")


class ConflictingKeys(MissingRequired):
    """More than one dataset source was configured."""


@dataclass(frozen=True)
class SimulationSpec:
    n_std: int
    n_out: int
    alpha: float
    theta: float
    beta: float


@dataclass(frozen=True)
class RunConfig:
    priors: PriorSpec
    gibbs: GibbsConfig
    data_path: Optional[str] = None
    builtin: Optional[str] = None
    simulation: Optional[SimulationSpec] = None
    out_dir: str = "out"
    out_format: str = "text"
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def source(self):
        if self.data_path is not None:
            return "path"
        if self.builtin is not None:
            return "builtin"
        return "sim"


def _parse_lines(text):
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _convert(key, value):
    kind = CONFIG_KEYS[key]
    if isinstance(value, kind) and not isinstance(value, bool):
        return value
    try:
        if kind is _INT:
            if isinstance(value, float) and value.is_integer():
                return int(value)
            return int(str(value).strip())
        if kind is _FLOAT:
            return float(str(value).strip())
    except ValueError:
        raise ConfigTypeError(f"{key}: expected {kind.__name__}, got {value!r}", key=key) from None
    return str(value)


def parse_config(text="", overrides=None) -> RunConfig:
    """Build a RunConfig from ``key=value`` text plus command-line overrides.

    ``overrides`` is a mapping or an iterable of ``"key=value"`` strings; it
    wins over the file.  Exactly one dataset source (``data.path``,
    ``data.builtin`` or any ``sim.*`` key) must be given.
    """
    raw = _parse_lines(text or "")
    if overrides:
        items = overrides.items() if hasattr(overrides, "items") else (
            _split_override(o) for o in overrides)
        for k, v in items:
            raw[k] = v
    for key in raw:
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"unknown configuration key {key!r}", key=key)
    cfg = {k: _convert(k, v) for k, v in raw.items()}

    sources = [name for name, present in (
        ("data.path", "data.path" in cfg), ("data.builtin", "data.builtin" in cfg),
        ("sim.*", any(k.startswith("sim.") for k in cfg))) if present]
    if len(sources) > 1:
        raise ConflictingKeys(f"conflicting dataset sources: {', '.join(sources)}", key=sources[1])
    if not sources:
        raise MissingRequired("no dataset source: set data.path, data.builtin or sim.*",
                              key="data.builtin")

    builtin = cfg.get("data.builtin")
    simulation = None
    if builtin is not None:
        if builtin not in BUILTINS:
            raise ConfigTypeError(f"data.builtin: unknown dataset {builtin!r}; "
                                  f"choose from {', '.join(sorted(BUILTINS))}", key="data.builtin")
        base = BUILTINS[builtin].priors
    else:
        base = SYNTHETIC_PRIORS
    if sources[0] == "sim.*":
        merged = {**SIM_DEFAULTS, **{k: v for k, v in cfg.items() if k.startswith("sim.")}}
        simulation = SimulationSpec(*(merged[f"sim.{f}"] for f in ("n_std", "n_out", "alpha",
                                                                    "theta", "beta")))
    priors = _priors(cfg, base, sources[0], simulation)
    model = cfg.get("model.type", "scale-inflated")
    if model not in _MODELS:
        raise ConfigTypeError(f"model.type: expected one of {_MODELS}, got {model!r}", key="model.type")
    if model == "basic":
        priors = priors.as_basic()
    try:
        gibbs = GibbsConfig(burn_in=cfg.get("mcmc.burnin", 10_000), kept=cfg.get("mcmc.kept", 200_000),
                            thin=cfg.get("mcmc.thin", 1), chains=cfg.get("mcmc.chains", 1),
                            root_seed=cfg.get("mcmc.seed", 0))
    except InvalidParameter as exc:
        raise ConfigError(f"mcmc: {exc}", key="mcmc") from None
    fmt = cfg.get("out.format", "text")
    if fmt not in _FORMATS:
        raise ConfigTypeError(f"out.format: expected one of {_FORMATS}, got {fmt!r}", key="out.format")
    return RunConfig(priors=priors, gibbs=gibbs, data_path=cfg.get("data.path"), builtin=builtin,
                     simulation=simulation, out_dir=cfg.get("out.dir", "out"), out_format=fmt,
                     raw=cfg)


def _split_override(item):
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def _priors(cfg, base: PriorSpec, source, simulation):
    try:
        alpha = GammaPrior(cfg.get("prior.alpha.shape", base.alpha.shape),
                           cfg.get("prior.alpha.rate", base.alpha.rate),
                           cfg.get("prior.alpha.lower_trunc", base.alpha.lower))
        eps = BetaPrior(cfg.get("prior.epsilon.a", base.epsilon.a),
                        cfg.get("prior.epsilon.b", base.epsilon.b))
    except InvalidParameter as exc:
        raise ConfigError(f"prior: {exc}", key="prior") from None

    theta_keys = [k for k in cfg if k.startswith("theta.")]
    if source == "data.path" and not theta_keys:
        raise MissingRequired("theta.mode is required for claims read from a file", key="theta.mode")
    if simulation is not None:
        base_theta = Fixed(simulation.theta)
    else:
        base_theta = base.theta
    theta = _resolve(cfg, "theta", base_theta, {"value": None, "shape": None, "rate": None},
                     unknown_keys=("shape", "rate"))
    beta = _resolve(cfg, "beta", base.beta, {"value": None, "lower": 1.0, "lambda": 1.0},
                    unknown_keys=("lower", "lambda"))
    try:
        theta = Fixed(theta[1]) if theta[0] == "fixed" else GammaPrior(*theta[1:])
        beta = Fixed(beta[1]) if beta[0] == "fixed" else ShiftedExpPrior(*beta[1:])
        return PriorSpec(alpha, eps, theta, beta)
    except InvalidParameter as exc:
        raise ConfigError(f"prior: {exc}", key="prior") from None


def _defaults_from(spec):
    if isinstance(spec, Fixed):
        return "fixed", {"value": spec.value}
    if isinstance(spec, GammaPrior):
        return "unknown", {"shape": spec.shape, "rate": spec.rate}
    return "unknown", {"lower": spec.lower, "lambda": spec.rate}


def _resolve(cfg, name, base_spec, generic, unknown_keys):
    """Mode and parameters of theta or beta; unset keys fall back to ``base_spec``."""
    base_mode, base_vals = _defaults_from(base_spec)
    mode = cfg.get(f"{name}.mode", base_mode)
    if mode not in _MODES:
        raise ConfigTypeError(f"{name}.mode: expected fixed or unknown, got {mode!r}",
                              key=f"{name}.mode")
    defaults = dict(generic)
    if mode == base_mode:
        defaults.update(base_vals)

    def get(field):
        key = f"{name}.{field}"
        value = cfg.get(key, defaults.get(field))
        if value is None:
            raise MissingRequired(f"missing required key {key}", key=key)
        return value

    if mode == "fixed":
        return ("fixed", get("value"))
    return ("unknown",) + tuple(get(f) for f in unknown_keys)


def read_config_file(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None


# -- claims -------------------------------------------------------------------

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_GROUP_HEAD = re.compile(r"^[+-]?\d{1,3}$")
_GROUP_TAIL = re.compile(r"^\d{3}(\.\d*)?$")


def read_claims_csv(path) -> ClaimSample:
    """One claim per row, taken from the first column.

    A single leading header row is recognised by a non-numeric first cell.
    Only a decimal point is accepted: ``1,000`` (quoted, or split by the
    delimiter into ``1`` and ``000``) is rejected, as are underscores.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read claims file {path}: {exc}") from None
    values = []
    for rowno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        cell = row[0].strip()
        if not _NUMBER.match(cell):
            if rowno == 1 and not values:
                continue
            raise ParseError(f"row {rowno}: {cell!r} is not a plain decimal number", row=rowno)
        if len(row) > 1 and _GROUP_HEAD.match(cell) and _GROUP_TAIL.match(row[1].strip()):
            raise ParseError(f"row {rowno}: thousands separators are not allowed "
                             f"({','.join(row[:2])!r})", row=rowno)
        values.append(float(cell))
    return validate_dataset(values)


def write_claims_csv(path, values, labels=None):
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["claim"] if labels is None else ["claim", "outlier"])
        for i, v in enumerate(values):
            w.writerow([_num(v)] if labels is None else [_num(v), int(labels[i])])


# -- traces -------------------------------------------------------------------

TRACE_HEADER = ["chain", "iter", "alpha", "theta", "beta", "epsilon", "k"]


def _num(v):
    return format(float(v), ".17g")


class _open_write:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        try:
            self.fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise IoError(f"cannot write {self.path}: {exc}") from None
        return self.fh

    def __exit__(self, *exc):
        self.fh.close()
        return False


def write_trace_csv(trace: Trace, path):
    """Write one row per record with round-trip exact floats."""
    if len(trace) == 0:
        raise InvalidParameter("refusing to write an empty trace")
    with _open_write(path) as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for row in zip(trace.chain.tolist(), trace.iteration.tolist(), trace.alpha.tolist(),
                       trace.theta.tolist(), trace.beta.tolist(), trace.epsilon.tolist(),
                       trace.k.tolist()):
            fh.write(f"{row[0]},{row[1]},{_num(row[2])},{_num(row[3])},{_num(row[4])},"
                     f"{_num(row[5])},{row[6]}\n")


def read_trace_csv(path) -> Trace:
    try:
        with open(path, newline="") as fh:
            header = fh.readline().strip().split(",")
            if header != TRACE_HEADER:
                raise ParseError(f"{path}: unexpected trace header {header}", row=1)
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoError(f"cannot read trace {path}: {exc}") from None
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return Trace(alpha=data[:, 2].copy(), theta=data[:, 3].copy(), beta=data[:, 4].copy(),
                 epsilon=data[:, 5].copy(), k=data[:, 6].astype(np.int64),
                 chain=data[:, 0].astype(np.int64), iteration=data[:, 1].astype(np.int64))


def write_delta_blocks(trace: Trace, path):
    with _open_write(path) as fh:
        n = trace.delta_block_sums.shape[1]
        fh.write(",".join(["records"] + [f"d{i}" for i in range(n)]) + "\n")
        for size, row in zip(trace.block_sizes.tolist(), trace.delta_block_sums.tolist()):
            fh.write(",".join(str(v) for v in [size] + row) + "\n")


def read_delta_blocks(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.int64)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return data[:, 0], data[:, 1:]


# -- reports ------------------------------------------------------------------

def _display(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    # currency-sized amounts read better in fixed point
    if 1e4 <= abs(v) < 1e15:
        return format(v, ".2f")
    return format(v, ".6g")


def report_values(summaries, prior_pmf, posterior_pmf, outliers, quantiles, meta=None):
    """Flatten everything reported into one ordered key -> value mapping.

    Both the text and the key-value report are rendered from this mapping.
    """
    kv = {}
    for key, value in (meta or {}).items():
        kv[f"meta.{key}"] = value
    for name, s in summaries.items():
        for key, value in s.as_dict().items():
            kv[f"param.{name}.{key}"] = value
    if prior_pmf is not None:
        for k, p in enumerate(prior_pmf.probs):
            kv[f"k_prior.{k}"] = float(p)
    if posterior_pmf is not None:
        kv["k_post.mean"] = posterior_pmf.mean
        kv["k_post.sd"] = posterior_pmf.sd
        kv["k_post.median"] = posterior_pmf.median
        for k, p in enumerate(posterior_pmf.probs):
            kv[f"k_post.{k}"] = float(p)
    if outliers is not None:
        for rank, (i, claim, p, se) in enumerate(outliers.sorted().rows()):
            kv[f"outlier.{rank}.index"] = int(i)
            kv[f"outlier.{rank}.claim"] = float(claim)
            kv[f"outlier.{rank}.prob"] = float(p)
            kv[f"outlier.{rank}.mcse"] = float(se)
    for p, q in quantiles.items():
        kv[f"predictive.q{p:g}"] = float(q)
    return kv


def format_kv(kv):
    lines = []
    for key, value in kv.items():
        if isinstance(value, (bool, str)):
            lines.append(f"{key}={value}")
        elif isinstance(value, (int, np.integer)):
            lines.append(f"{key}={int(value)}")
        else:
            lines.append(f"{key}={_num(value)}")
    return "\n".join(lines) + "\n"


def parse_kv(text):
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, value = line.split("=", 1)
        try:
            out[key] = int(value) if re.fullmatch(r"[+-]?\d+", value) else float(value)
        except ValueError:
            out[key] = value
    return out


def format_text_report(kv, title="Pareto scale-inflated outlier model"):
    lines = [title, "=" * len(title), ""]
    meta = {k[5:]: v for k, v in kv.items() if k.startswith("meta.")}
    for k, v in meta.items():
        lines.append(f"{k}: {v}")
    if meta:
        lines.append("")
    params = sorted({k.split(".")[1] for k in kv if k.startswith("param.")},
                    key=["alpha", "beta", "theta", "epsilon", "k"].index)
    if params:
        lines.append("Posterior summaries")
        lines.append(f"{'param':<8}{'mean':>13}{'sd':>13}{'2.5%':>13}{'median':>13}"
                     f"{'97.5%':>13}{'mcse':>13}")
        for name in params:
            g = lambda key: _display(kv[f"param.{name}.{key}"])  # noqa: E731
            lines.append(f"{name:<8}{g('mean'):>13}{g('sd'):>13}{g('q0.025'):>13}{g('median'):>13}"
                         f"{g('q0.975'):>13}{g('mcse_mean'):>13}")
        lines.append("")
    post = sorted(int(k.split(".")[1]) for k in kv if re.fullmatch(r"k_post\.\d+", k))
    if post:
        lines.append("Number of outliers k")
        lines.append(f"mean {_display(kv['k_post.mean'])}  sd {_display(kv['k_post.sd'])}  "
                     f"median {_display(kv['k_post.median'])}")
        lines.append(f"{'k':>4}{'prior':>13}{'posterior':>13}")
        for k in post:
            prior = kv.get(f"k_prior.{k}")
            lines.append(f"{k:>4}{_display(prior) if prior is not None else '-':>13}"
                         f"{_display(kv[f'k_post.{k}']):>13}")
        lines.append("")
    ranks = sorted(int(k.split(".")[1]) for k in kv if re.fullmatch(r"outlier\.\d+\.index", k))
    if ranks:
        lines.append("Outlier probabilities (descending)")
        lines.append(f"{'obs':>5}{'claim':>15}{'P(outlier)':>13}{'mcse':>13}")
        for r in ranks:
            lines.append(f"{kv[f'outlier.{r}.index']:>5}{_display(kv[f'outlier.{r}.claim']):>15}"
                         f"{_display(kv[f'outlier.{r}.prob']):>13}{_display(kv[f'outlier.{r}.mcse']):>13}")
        lines.append("")
    qs = [k for k in kv if k.startswith("predictive.q")]
    if qs:
        labels = {"0.5": "Median", "0.75": "75%", "0.9": "90%", "0.95": "95%"}
        lines.append("Quantiles of the predictive distribution for standard claims")
        head = "".join(f"{labels.get(k[12:], k[12:]):>14}" for k in qs)
        lines.append(head)
        lines.append("".join(f"{_display(kv[k]):>14}" for k in qs))
        lines.append("")
    return "\n".join(lines)


def write_histograms(out_dir, trace: Trace, names, bins=50):
    paths = []
    for name in names:
        h = analysis.histogram(getattr(trace, name), bins)
        path = Path(out_dir) / f"hist_{name}.csv"
        with _open_write(path) as fh:
            fh.write("param,bin_lo,bin_hi,height\n")
            for lo, hi, y in zip(h.edges[:-1], h.edges[1:], h.heights):
                fh.write(f"{name},{_num(lo)},{_num(hi)},{_num(y)}\n")
        paths.append(path)
    return paths


def write_k_pmf(path, prior_pmf, posterior_pmf):
    with _open_write(path) as fh:
        fh.write("k,prior,posterior\n")
        for k in range(posterior_pmf.probs.size):
            prior = prior_pmf.probs[k] if prior_pmf is not None else float("nan")
            fh.write(f"{k},{_num(prior)},{_num(posterior_pmf.probs[k])}\n")


def write_outliers(path, report):
    with _open_write(path) as fh:
        fh.write("index,claim,probability,mcse\n")
        for i, claim, p, se in report.rows():
            fh.write(f"{i},{_num(claim)},{_num(p)},{_num(se)}\n")


def write_report(out_dir, summaries, prior_pmf, posterior_pmf, outliers, quantiles, trace=None,
                 hist_names=(), meta=None, title="Pareto scale-inflated outlier model"):
    """Write ``report.txt``, ``report.kv`` and the plot-data CSV files.

    Returns the flat value mapping both reports were rendered from.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from None
    kv = report_values(summaries, prior_pmf, posterior_pmf, outliers, quantiles, meta)
    with _open_write(out / "report.kv") as fh:
        fh.write(format_kv(kv))
    with _open_write(out / "report.txt") as fh:
        fh.write(format_text_report(kv, title))
    if trace is not None and hist_names:
        write_histograms(out, trace, hist_names)
    if posterior_pmf is not None:
        write_k_pmf(out / "k_pmf.csv", prior_pmf, posterior_pmf)
    if outliers is not None:
        write_outliers(out / "outliers.csv", outliers)
    return kv
