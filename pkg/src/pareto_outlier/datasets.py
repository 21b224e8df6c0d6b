"""Claim samples bundled with the package, with their default priors."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gibbs import BetaPrior, Fixed, GammaPrior, PriorSpec, ShiftedExpPrior
from .model import ClaimSample, IndicatorVector, validate_dataset

SYNTHETIC_S4 = (
    57726, 51806, 82475, 75840, 86115,
    140691, 53960, 57176, 66577, 81512,
    57099, 71053, 56012, 50291, 59197,
    51918, 170781, 161296, 330773, 219582,
)

# Iranian Rials, 2008 motor claims
MOTOR_S5 = (
    750000, 780000, 630000, 1750000, 1450000,
    3000000, 7650000, 4210000, 890000, 950000,
    1240000, 1800000, 1630000, 9020000, 4750000,
    3250000, 1135000, 1326000, 1280000, 760000,
)

# Iranian Rials, 2009 passenger medical claims
MEDICAL_S6 = (
    280870, 110147, 100483, 108729, 142800,
    102108, 107852, 163073, 118722, 108948,
    117307, 180237, 115422, 123086, 113936,
    221617, 112211, 106790, 178104, 101561,
    104325, 110343, 112843, 131537, 138744,
)

DIFFUSE_ALPHA = GammaPrior(0.001, 0.001)
OUTLIER_EPSILON = BetaPrior(0.1842, 3.5)
EXPERT_EPSILON = BetaPrior(2.17484, 19.57356)
MOTOR_ALPHA = GammaPrior(10.0, 5.0, lower=1.0)
MOTOR_ALPHA_TIGHT = GammaPrior(40.0, 16.0, lower=1.0)

SYNTHETIC_PRIORS = PriorSpec(DIFFUSE_ALPHA, OUTLIER_EPSILON, Fixed(50000.0), ShiftedExpPrior(1.0, 1.0))
MOTOR_PRIORS = PriorSpec(MOTOR_ALPHA, EXPERT_EPSILON, Fixed(500000.0), Fixed(1.5))
MEDICAL_PRIORS = PriorSpec(DIFFUSE_ALPHA, OUTLIER_EPSILON, GammaPrior(10.0, 0.0001),
                           ShiftedExpPrior(1.0, 1.0))


@dataclass(frozen=True)
class BuiltinDataset:
    name: str
    values: tuple
    priors: PriorSpec
    description: str
    truth: Optional[tuple] = None

    @property
    def sample(self) -> ClaimSample:
        return validate_dataset(self.values)

    @property
    def labels(self) -> Optional[IndicatorVector]:
        return None if self.truth is None else IndicatorVector(np.array(self.truth))

    def digest(self):
        text = ",".join(str(v) for v in self.values)
        return hashlib.sha256(text.encode("ascii")).hexdigest()


BUILTINS = {
    "synthetic-s4": BuiltinDataset(
        "synthetic-s4", SYNTHETIC_S4, SYNTHETIC_PRIORS,
        "16 Pareto(2.5, 50000) claims followed by 4 Pareto(2.5, 150000) outliers",
        truth=(0,) * 16 + (1,) * 4),
    "motor-s5": BuiltinDataset(
        "motor-s5", MOTOR_S5, MOTOR_PRIORS,
        "20 motor insurance claims; claims below 500,000 are not entertained"),
    "medical-s6": BuiltinDataset(
        "medical-s6", MEDICAL_S6, MEDICAL_PRIORS,
        "25 passenger medical claims; threshold unknown"),
}


def load_builtin(name) -> BuiltinDataset:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin dataset {name!r}; choose from {sorted(BUILTINS)}") from None
