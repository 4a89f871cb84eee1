# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Run configuration file: one JSON object with a section per concern.

Example::

    {
      "seed": 0,
      "network": {"n_antennas": 32},
      "dataset": {"n_train": 5000, "n_val": 500, "n_test": 500},
      "train": {"max_epochs": 200},
      "attack": {"kinds": ["fgsm", "pgdm", "mifgsm", "random"], "epsilons": [0.1, 0.2]},
      "defense": {"epsilon": 0.2},
      "se": {"tau_c": 200, "epsilon": 0.3},
      "paths": {"out": "runs"}
    }

Missing keys take their defaults; unknown keys are rejected at every level. Every
random stream derives from the root seed through labeled sub-seeds.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import json

from . import helpers
from .attacks import ATTACK_KINDS, OBJECTIVES, AttackConfig
from .evalreport import SEConfig
from .geometry import NetworkConfig
from .neuralnet import TrainConfig
from .utils import InvalidConfigError, check_positive, check_unknown_keys


def _section_from_dict(cls, name, data):
    check_unknown_keys(name, data, [f.name for f in fields(cls)])
    return cls(**data)


@dataclass(frozen=True)
class DatasetSection:
    n_train: int = 5000
    n_val: int = 500
    n_test: int = 500
    max_regen_rate: float = 0.01

    def __post_init__(self):
        check_positive("max_regen_rate", self.max_regen_rate, allow_zero=True)
        for name in ("n_train", "n_val", "n_test"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidConfigError(
                    f"Value passed to '{name}' must be a positive integer, got {value}."
                )

    @property
    def n(self):
        return self.n_train + self.n_val + self.n_test

    @property
    def fractions(self):
        return (self.n_train / self.n, self.n_val / self.n, self.n_test / self.n)


@dataclass(frozen=True)
class AttackSection:
    kinds: tuple = ATTACK_KINDS
    epsilons: tuple = (0.05, 0.1, 0.2, 0.3)
    alpha: float = 0.01
    steps: int = 40
    decay: float = 0.1
    iterations: int = 10
    objective: str = "infeasible"

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        for kind in self.kinds:
            if kind not in ATTACK_KINDS:
                raise InvalidConfigError(
                    f"Unknown attack '{kind}', expected one of {ATTACK_KINDS}."
                )
        if self.objective not in OBJECTIVES:
            raise InvalidConfigError(
                f"Value passed to 'objective' must be one of {OBJECTIVES}."
            )
        # validates epsilon, alpha, steps, decay and iterations
        for eps in self.epsilons:
            self.attack_config("pgdm", eps)

    def attack_config(self, kind, epsilon, seed=0, objective=None):
        return AttackConfig(
            kind=kind,
            epsilon=float(epsilon),
            alpha=self.alpha,
            steps=self.steps,
            decay=self.decay,
            iterations=self.iterations,
            objective=self.objective if objective is None else objective,
            seed=seed,
        )


@dataclass(frozen=True)
class DefenseSection:
    epsilon: float = 0.2

    def __post_init__(self):
        check_positive("epsilon", self.epsilon, allow_zero=True)


@dataclass(frozen=True)
class SESection:
    tau_c: int = 200
    tau_d: int = None
    epsilon: float = 0.3
    objective: str = "min_power"

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InvalidConfigError(
                f"Value passed to 'objective' must be one of {OBJECTIVES}."
            )


@dataclass(frozen=True)
class PathsSection:
    out: str = "runs"


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of a pipeline run."""

    seed: int = 0
    network: NetworkConfig = field(default_factory=NetworkConfig)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackSection = field(default_factory=AttackSection)
    defense: DefenseSection = field(default_factory=DefenseSection)
    se: SESection = field(default_factory=SESection)
    paths: PathsSection = field(default_factory=PathsSection)

    def __post_init__(self):
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidConfigError(
                f"Value passed to 'seed' must be a nonnegative integer, got {self.seed}."
            )

    @classmethod
    def from_dict(cls, data):
        check_unknown_keys("run", data, [f.name for f in fields(cls)])
        train = dict(data.get("train", {}))
        check_unknown_keys(
            "train", train, [f.name for f in fields(TrainConfig) if f.name != "seed"]
        )
        return cls(
            seed=data.get("seed", 0),
            network=NetworkConfig.from_dict(data.get("network", {})),
            dataset=_section_from_dict(DatasetSection, "dataset", data.get("dataset", {})),
            train=TrainConfig(**train),
            attack=_section_from_dict(AttackSection, "attack", data.get("attack", {})),
            defense=_section_from_dict(DefenseSection, "defense", data.get("defense", {})),
            se=_section_from_dict(SESection, "se", data.get("se", {})),
            paths=_section_from_dict(PathsSection, "paths", data.get("paths", {})),
        )

    @staticmethod
    def load(path):
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidConfigError(f"Config file {path} is not valid JSON: {e}")
        return RunConfig.from_dict(data)

    def override(self, seed=None, out=None):
        run = self
        if seed is not None:
            run = replace(run, seed=seed)
        if out is not None:
            run = replace(run, paths=PathsSection(out=out))
        return run

    def to_dict(self):
        data = asdict(self)
        data["train"].pop("seed")
        data["attack"]["kinds"] = list(self.attack.kinds)
        data["attack"]["epsilons"] = list(self.attack.epsilons)
        return data

    def sub_seed(self, *labels):
        return helpers._derive_seed(self.seed, *labels)

    def train_config(self):
        return replace(self.train, seed=self.sub_seed("train"))

    def attack_config(self, kind, epsilon, objective=None):
        return self.attack.attack_config(
            kind, epsilon, seed=self.sub_seed("attack"), objective=objective
        )

    def se_config(self):
        if self.se.tau_d is None:
            return SEConfig.default(self.network, tau_c=self.se.tau_c)
        return SEConfig(tau_c=self.se.tau_c, tau_d=self.se.tau_d)

