
import numpy as np
import pytest

from pareto_outlier import (Fixed, GammaPrior, GibbsConfig, ShiftedExpPrior, load_builtin,
                            posterior_report, run_chains, summarize_parameter)
from pareto_outlier import io
from pareto_outlier.exceptions import (ConfigTypeError, IoError, MissingRequired, ParseError,
                                       UnknownKey)


# -- configuration --------------------------------------------------------------

def test_builtin_defaults():
    cfg = io.parse_config("data.builtin=motor-s5\n")
    assert cfg.priors == load_builtin("motor-s5").priors
    assert cfg.gibbs == GibbsConfig(burn_in=10_000, kept=200_000)
    assert cfg.source == "builtin" and cfg.out_format == "text"


def test_comments_blank_lines_and_overrides():
    text = "# motor run\n\ndata.builtin = motor-s5\nmcmc.kept=500  # short\nprior.alpha.shape=40\n"
    cfg = io.parse_config(text, ["mcmc.kept=700", "prior.alpha.rate=16"])
    assert cfg.gibbs.kept == 700
    assert cfg.priors.alpha == GammaPrior(40.0, 16.0, lower=1.0)
    assert io.parse_config(text, {"mcmc.seed": "12"}).gibbs.root_seed == 12


def test_beta_mode_switch():
    cfg = io.parse_config("data.builtin=motor-s5\nbeta.mode=unknown\nbeta.lower=1.5\n")
    assert cfg.priors.beta == ShiftedExpPrior(1.5, 1.0)
    cfg = io.parse_config("data.builtin=synthetic-s4\nbeta.mode=fixed\nbeta.value=3\n")
    assert cfg.priors.beta == Fixed(3.0)
    with pytest.raises(MissingRequired) as err:
        io.parse_config("data.builtin=synthetic-s4\nbeta.mode=fixed\n")
    assert err.value.key == "beta.value"


def test_model_type_basic():
    cfg = io.parse_config("data.builtin=synthetic-s4\nmodel.type=basic\n")
    assert cfg.priors == load_builtin("synthetic-s4").priors.as_basic()
    assert not io.parse_config("data.builtin=synthetic-s4\n").priors.basic


def test_simulation_source():
    cfg = io.parse_config("sim.n_out=2\n")
    assert cfg.source == "sim"
    assert cfg.simulation == io.SimulationSpec(16, 2, 2.5, 50000.0, 3.0)
    assert cfg.priors.theta == Fixed(50000.0)


@pytest.mark.parametrize("text,exc,key", [
    ("data.builtin=motor-s5\nfoo.bar=1\n", UnknownKey, "foo.bar"),
    ("data.builtin=motor-s5\nmcmc.kept=lots\n", ConfigTypeError, "mcmc.kept"),
    ("data.builtin=motor-s5\ntheta.mode=maybe\n", ConfigTypeError, "theta.mode"),
    ("data.builtin=motor-s5\nout.format=xml\n", ConfigTypeError, "out.format"),
    ("data.builtin=motor-s5\nmodel.type=robust\n", ConfigTypeError, "model.type"),
    ("mcmc.kept=5\n", MissingRequired, "data.builtin"),
    ("data.builtin=motor-s5\ndata.path=x.csv\n", io.ConflictingKeys, "data.builtin"),
    ("data.builtin=motor-s5\nsim.n_std=3\n", io.ConflictingKeys, "sim.*"),
    ("data.path=x.csv\n", MissingRequired, "theta.mode"),
])
def test_config_errors_name_the_key(text, exc, key):
    with pytest.raises(exc) as err:
        io.parse_config(text)
    assert err.value.key == key
    assert err.value.exit_code == 2


def test_config_line_without_equals():
    with pytest.raises(Exception) as err:
        io.parse_config("data.builtin motor-s5\n")
    assert getattr(err.value, "exit_code", None) == 2


def test_every_documented_key_is_accepted():
    expected = ({"data.path", "data.builtin", "out.dir", "out.format", "model.type"}
                | {f"sim.{k}" for k in ("n_std", "n_out", "alpha", "theta", "beta")}
                | {f"prior.alpha.{k}" for k in ("shape", "rate", "lower_trunc")}
                | {"prior.epsilon.a", "prior.epsilon.b"}
                | {f"theta.{k}" for k in ("mode", "value", "shape", "rate")}
                | {f"beta.{k}" for k in ("mode", "value", "lower", "lambda")}
                | {f"mcmc.{k}" for k in ("burnin", "kept", "thin", "chains", "seed")})
    assert set(io.CONFIG_KEYS) == expected


# -- claims files ----------------------------------------------------------------

def test_read_claims_with_header(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("claim\n750000\n780000\n")
    assert io.read_claims_csv(p).values.tolist() == [750000.0, 780000.0]
    p.write_text("750000\n780000.5\n\n1e6\n")
    assert io.read_claims_csv(p).values.tolist() == [750000.0, 780000.5, 1e6]


@pytest.mark.parametrize("body,row", [("claim\n\"1,000\"\n", 2), ("claim\n1,000\n", 2),
                                      ("5\n1_000\n", 2), ("claim\n5\nabc\n", 3)])
def test_read_claims_rejects_separators(tmp_path, body, row):
    p = tmp_path / "c.csv"
    p.write_text(body)
    with pytest.raises(ParseError) as err:
        io.read_claims_csv(p)
    assert err.value.row == row and err.value.exit_code == 3


def test_read_claims_missing_file(tmp_path):
    with pytest.raises(IoError):
        io.read_claims_csv(tmp_path / "none.csv")


def test_medical_values_round_trip(tmp_path):
    ds = load_builtin("medical-s6")
    io.write_claims_csv(tmp_path / "m.csv", ds.values)
    s = io.read_claims_csv(tmp_path / "m.csv")
    assert s.n == 25 and np.array_equal(s.values, ds.values)
    io.write_claims_csv(tmp_path / "l.csv", ds.values, np.zeros(25, int))
    assert io.read_claims_csv(tmp_path / "l.csv").n == 25


# -- traces and reports ---------------------------------------------------------------

@pytest.fixture(scope="module")
def run():
    ds = load_builtin("medical-s6")
    trace = run_chains(ds.sample, ds.priors, GibbsConfig(burn_in=100, kept=3000, chains=2, root_seed=5))
    return ds, trace


def test_trace_round_trip_is_bit_exact(tmp_path, run):
    ds, trace = run
    io.write_trace_csv(trace, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "chain,iter,alpha,theta,beta,epsilon,k" and len(lines) == 6001
    back = io.read_trace_csv(tmp_path / "t.csv")
    for name in ("alpha", "theta", "beta", "epsilon", "k", "chain", "iteration"):
        assert np.array_equal(getattr(back, name), getattr(trace, name))
    assert summarize_parameter(back.alpha) == summarize_parameter(trace.alpha)
    sizes, sums = _blocks(tmp_path, trace)
    assert np.array_equal(sums, trace.delta_block_sums) and np.array_equal(sizes, trace.block_sizes)


def _blocks(tmp_path, trace):
    io.write_delta_blocks(trace, tmp_path / "d.csv")
    return io.read_delta_blocks(tmp_path / "d.csv")


def test_three_record_trace(tmp_path, run):
    _, trace = run
    small = type(trace)(**{f: getattr(trace, f)[:3] for f in
                           ("alpha", "theta", "beta", "epsilon", "k", "chain", "iteration")})
    io.write_trace_csv(small, tmp_path / "t.csv")
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 4


def test_bad_trace_header(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ParseError):
        io.read_trace_csv(tmp_path / "t.csv")


def test_report_files_and_kv_round_trip(tmp_path, run):
    ds, trace = run
    rep = posterior_report(trace, ds.sample, ds.priors)
    kv = io.write_report(tmp_path, rep.summaries, rep.prior_pmf, rep.posterior_pmf, rep.outliers,
                         rep.quantiles, trace=trace, hist_names=rep.sampled, meta={"source": "x"})
    files = {p.name for p in tmp_path.iterdir()}
    assert {"report.txt", "report.kv", "k_pmf.csv", "outliers.csv", "hist_alpha.csv",
            "hist_beta.csv", "hist_theta.csv", "hist_epsilon.csv"} <= files
    parsed = io.parse_kv((tmp_path / "report.kv").read_text())
    assert parsed.keys() == kv.keys()
    for key, value in kv.items():
        assert parsed[key] == value, key
    assert parsed["param.alpha.mean"] == rep.summaries["alpha"].mean
    hist = (tmp_path / "hist_alpha.csv").read_text().splitlines()
    assert hist[0] == "param,bin_lo,bin_hi,height" and len(hist) == 51
    assert all(line.startswith("alpha,") for line in hist[1:])


def test_text_report_layout(tmp_path, run):
    ds, trace = run
    rep = posterior_report(trace, ds.sample, ds.priors)
    io.write_report(tmp_path, rep.summaries, rep.prior_pmf, rep.posterior_pmf, rep.outliers,
                    rep.quantiles)
    text = (tmp_path / "report.txt").read_text()
    assert "Median" in text and "75%" in text and "90%" in text and "95%" in text
    # every observation is listed, sorted by descending probability
    body = text.split("Outlier probabilities (descending)")[1].split("\n\n")[0].splitlines()[2:]
    assert len(body) == 25
    probs = [float(line.split()[2]) for line in body]
    assert probs == sorted(probs, reverse=True) and min(probs) >= 0
    # the text numbers are renderings of the key-value numbers
    kv = io.parse_kv((tmp_path / "report.kv").read_text())
    assert io._display(kv["param.alpha.mean"]) in text


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoError):
        io.write_report(blocker / "sub", {}, None, None, None, {})
