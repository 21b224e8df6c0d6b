"""Re-run the published analyses and compare against the printed numbers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import analysis
from .datasets import (BUILTINS, MEDICAL_PRIORS, MOTOR_ALPHA, MOTOR_ALPHA_TIGHT, MOTOR_PRIORS,
                       SYNTHETIC_PRIORS)
from .gibbs import Fixed, GibbsConfig, PriorSpec, ShiftedExpPrior, run_chains
from .io import write_delta_blocks, write_report, write_trace_csv
from .model import pareto_quantile

LEVELS = analysis.PREDICTIVE_LEVELS


def _motor(alpha, beta):
    return PriorSpec(alpha, MOTOR_PRIORS.epsilon, MOTOR_PRIORS.theta, beta)


MOTOR_UNKNOWN_BETA = ShiftedExpPrior(1.5, 1.0)


@dataclass(frozen=True)
class Analysis:
    key: str
    section: int
    dataset: str
    priors: PriorSpec
    label: str
    published: dict = field(default_factory=dict)
    published_quantiles: Optional[tuple] = None
    # quantiles of the medical table duplicate the motor table, so they are shown, not compared
    quantiles_asserted: bool = True


ANALYSES = (
    Analysis("s4.outlier", 4, "synthetic-s4", SYNTHETIC_PRIORS, "Scale-shifted",
             {"alpha.mean": 2.193, "alpha.sd": 0.687, "beta.mean": 2.133, "beta.sd": 0.954},
             (69364, 98351, 158719, 232623)),
    Analysis("s4.basic", 4, "synthetic-s4", SYNTHETIC_PRIORS.as_basic(), "Basic",
             {}, (71749, 104260, 174328, 261562)),
    Analysis("s5.a10.beta_fixed", 5, "motor-s5", _motor(MOTOR_ALPHA, Fixed(1.5)),
             "Scale-shifted (beta = 1.5)",
             {"alpha.mean": 1.188, "alpha.sd": 0.145, "epsilon.mean": 0.153, "epsilon.sd": 0.086,
              "outlier_prob.common": 0.221, "k.mean": 4.211, "k.sd": 2.795, "k.median": 4},
             (902218, 1632503, 3598453, 6546247)),
    Analysis("s5.a10.beta_unknown", 5, "motor-s5", _motor(MOTOR_ALPHA, MOTOR_UNKNOWN_BETA),
             "Scale-shifted (beta > 1.5)",
             {"alpha.mean": 1.228, "alpha.sd": 0.176, "beta.mean": 2.498, "beta.sd": 0.962,
              "epsilon.mean": 0.141, "epsilon.sd": 0.078, "k.mean": 3.711, "k.sd": 2.391,
              "k.median": 4},
             (882127, 1571983, 3408270, 6267162)),
    Analysis("s5.a10.basic", 5, "motor-s5", _motor(MOTOR_ALPHA, Fixed(1.5)).as_basic(), "Basic",
             {}, (912938, 1680812, 3757930, 6909201)),
    Analysis("s5.a40.beta_fixed", 5, "motor-s5", _motor(MOTOR_ALPHA_TIGHT, Fixed(1.5)),
             "Scale-shifted (beta = 1.5)", {}, (781865, 1237816, 2271377, 3586312)),
    Analysis("s5.a40.beta_unknown", 5, "motor-s5", _motor(MOTOR_ALPHA_TIGHT, MOTOR_UNKNOWN_BETA),
             "Scale-shifted (beta > 1.5)", {}, (755085, 1142615, 1996918, 3070095)),
    Analysis("s5.a40.basic", 5, "motor-s5", _motor(MOTOR_ALPHA_TIGHT, Fixed(1.5)).as_basic(), "Basic",
             {}, (803536, 1294355, 2460126, 4049355)),
    Analysis("s6.outlier", 6, "medical-s6", MEDICAL_PRIORS, "Scale-shifted",
             {}, (882127, 1571983, 3408270, 6267162), quantiles_asserted=False),
    Analysis("s6.basic", 6, "medical-s6", MEDICAL_PRIORS.as_basic(), "Basic",
             {}, (912938, 1680812, 3757930, 6909201), quantiles_asserted=False),
)

ACTUAL_S4_QUANTILES = (65975, 87055, 125594, 165722)


def analyses_for(sections=None):
    wanted = set(sections) if sections else {4, 5, 6}
    return [a for a in ANALYSES if a.section in wanted]


def get_analysis(key) -> Analysis:
    for a in ANALYSES:
        if a.key == key:
            return a
    raise KeyError(key)


@dataclass
class AnalysisResult:
    analysis: Analysis
    trace: object
    report: analysis.SummaryReport

    def reproduced(self):
        """Reproduced values keyed like ``Analysis.published``."""
        out = {}
        for name, s in self.report.summaries.items():
            out[f"{name}.mean"] = s.mean
            out[f"{name}.sd"] = s.sd
        if self.report.posterior_pmf is not None:
            out["k.median"] = self.report.posterior_pmf.median
        if self.report.outliers is not None and self.analysis.priors.beta_fixed:
            p = self.report.outliers.probability
            cut = self.analysis.priors.beta.value * self.analysis.priors.theta.value
            eligible = self.sample.values >= cut
            out["outlier_prob.common"] = float(p[eligible].mean())
        return out

    @property
    def sample(self):
        return BUILTINS[self.analysis.dataset].sample


def run_analysis(item: Analysis, config: GibbsConfig = GibbsConfig()) -> AnalysisResult:
    sample = BUILTINS[item.dataset].sample
    trace = run_chains(sample, item.priors, config)
    return AnalysisResult(item, trace, analysis.posterior_report(trace, sample, item.priors))


def comparison_rows(results):
    """One row per published number: (section, analysis, quantity, published, reproduced, rel_diff, note)."""
    rows = []
    for res in results:
        a = res.analysis
        got = res.reproduced()
        for q, published in a.published.items():
            val = got.get(q, math.nan)
            rows.append((a.section, a.key, q, published, val, _rel(val, published), ""))
        if a.published_quantiles is not None:
            note = "" if a.quantiles_asserted else "not compared: printed values repeat the motor beta-unknown table"
            for p, published in zip(LEVELS, a.published_quantiles):
                val = res.report.quantiles[p]
                rows.append((a.section, a.key, f"q{p:g}", published, val,
                             _rel(val, published) if a.quantiles_asserted else math.nan, note))
    if any(r.analysis.section == 4 for r in results):
        for p, published in zip(LEVELS, ACTUAL_S4_QUANTILES):
            val = float(pareto_quantile(p, 2.5, 50000.0))
            rows.append((4, "s4.actual", f"q{p:g}", published, val, _rel(val, published), "exact"))
        shape, rate = basic_s4_posterior()
        for p, published in zip(LEVELS, (71749, 104260, 174328, 261562)):
            val = analysis.gamma_shape_predictive_quantile(p, shape, rate, 50000.0)
            rows.append((4, "s4.basic.closed_form", f"q{p:g}", published, val, _rel(val, published), "exact"))
        rows.append((4, "s4.basic.closed_form", "alpha.posterior_rate", 10.23953, rate,
                     _rel(rate, 10.23953), "exact"))
    return rows


def basic_s4_posterior():
    """Shape and rate of the no-outlier alpha posterior for the synthetic data."""
    sample = BUILTINS["synthetic-s4"].sample
    prior = SYNTHETIC_PRIORS.alpha
    theta = SYNTHETIC_PRIORS.theta.value
    return prior.shape + sample.n, prior.rate + sample.sum_log - sample.n * math.log(theta)


def _rel(val, ref):
    return (val - ref) / ref if ref else math.nan


def format_comparison(rows):
    head = f"{'sec':>3}  {'analysis':<22}{'quantity':<22}{'published':>14}{'reproduced':>16}{'rel diff':>10}  note"
    lines = [head, "-" * len(head)]
    for sec, key, q, published, val, rel, note in rows:
        rel_s = "" if math.isnan(rel) else f"{100 * rel:+.2f}%"
        lines.append(f"{sec:>3}  {key:<22}{q:<22}{published:>14g}{val:>16.6g}{rel_s:>10}  {note}")
    return "\n".join(lines) + "\n"


def write_analysis_outputs(res: AnalysisResult, out_dir):
    out = Path(out_dir) / res.analysis.key
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(res.trace, out / "trace.csv")
    if res.trace.delta_block_sums is not None:
        write_delta_blocks(res.trace, out / "delta_blocks.csv")
    r = res.report
    meta = {"analysis": res.analysis.key, "dataset": res.analysis.dataset,
            "model": res.analysis.label}
    return write_report(out, r.summaries, r.prior_pmf, r.posterior_pmf, r.outliers, r.quantiles,
                        trace=res.trace, hist_names=r.sampled, meta=meta,
                        title=f"{res.analysis.key}: {res.analysis.label}")


def reproduce(sections=None, config: GibbsConfig = GibbsConfig(), out_dir=None, progress=None):
    results = []
    for item in analyses_for(sections):
        if progress:
            progress(item.key)
        res = run_analysis(item, config)
        if out_dir is not None:
            write_analysis_outputs(res, out_dir)
        results.append(res)
    rows = comparison_rows(results)
    if out_dir is not None:
        out = Path(out_dir)
        (out / "comparison.txt").write_text(format_comparison(rows))
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["section", "analysis", "quantity", "published", "reproduced", "rel_diff", "note"])
            w.writerows(rows)
    return results, rows
