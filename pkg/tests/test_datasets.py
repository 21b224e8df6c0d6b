import numpy as np
import pytest

from pareto_outlier import BUILTINS, Fixed, GammaPrior, ShiftedExpPrior, load_builtin
from pareto_outlier.datasets import MOTOR_ALPHA_TIGHT

# sha256 of the comma-joined printed values
DIGESTS = {
    "synthetic-s4": "448f47f21da699c1387df1fa765e7653c605bf972370bfd38eee247e400ff193",
    "motor-s5": "8a742a5a033c63ec9131def239ee754c566d740a45a2b0c26fd27d3def7a303d",
    "medical-s6": "e67c2223c4ca3b0a134656b192e5bbeef5a8aa9d3e55e5fc002a223319c97ea3",
}
SIZES = {"synthetic-s4": 20, "motor-s5": 20, "medical-s6": 25}


@pytest.mark.parametrize("name", sorted(DIGESTS))
def test_builtin_digest_and_size(name):
    ds = load_builtin(name)
    assert ds.digest() == DIGESTS[name]
    assert ds.sample.n == SIZES[name]
    assert np.all(ds.values == np.round(ds.values))


def test_synthetic_labels_mark_last_four():
    ds = load_builtin("synthetic-s4")
    assert ds.labels.k == 4 and np.all(ds.labels.delta[-4:] == 1)
    assert load_builtin("motor-s5").labels is None


def test_default_priors():
    s4, s5, s6 = (BUILTINS[n].priors for n in ("synthetic-s4", "motor-s5", "medical-s6"))
    assert s4.alpha == GammaPrior(0.001, 0.001) and s4.theta == Fixed(50000.0)
    assert s4.beta == ShiftedExpPrior(1.0, 1.0)
    assert (s4.epsilon.a, s4.epsilon.b) == (0.1842, 3.5)
    assert s5.alpha == GammaPrior(10.0, 5.0, lower=1.0)
    assert s5.theta == Fixed(500000.0) and s5.beta == Fixed(1.5)
    assert (s5.epsilon.a, s5.epsilon.b) == (2.17484, 19.57356)
    # the medical analysis reuses the synthetic priors plus a theta prior
    assert (s6.alpha, s6.epsilon, s6.beta) == (s4.alpha, s4.epsilon, s4.beta)
    assert s6.theta == GammaPrior(10.0, 1e-4)
    assert MOTOR_ALPHA_TIGHT == GammaPrior(40.0, 16.0, lower=1.0)


def test_unknown_builtin():
    with pytest.raises(KeyError):
        load_builtin("nope")
