"""Flat key-value experiment configs.

One ``key = value`` per line, ``#`` starts a comment.  Matrices are given
one row per line by repeating the key::

    A = 1 0.01 0 0
    A = 0 0.999 -0.0098 0

Either ``preset = pendulum`` or all of ``A B C D E F G2`` must be present.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .dos import DoSParams, DoSSchedule
from .errors import ConfigurationError, DimensionError, ValidationError
from .optimal_control import CostWeights
from .plant import (PENDULUM_Q_DIAG, PENDULUM_W0, PENDULUM_X0, InternalModel, LinearPlant,
                    pendulum_plant)

MATRIX_KEYS = ("A", "B", "C", "D", "E", "F", "G2")
VECTOR_KEYS = ("Q_diag", "x0", "z0", "w0", "K0")
BOOL_KEYS = ("explore_during_attack",)
INT_KEYS = ("seed", "learn_k0", "learn_ks", "regulation_horizon", "exploration_waves",
            "max_iter")
FLOAT_KEYS = ("R", "eta", "tau_D", "kappa", "T", "exploration_amplitude", "epsilon0")
STR_KEYS = ("preset", "schedule_file", "output_dir")


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str | None = "pendulum"
    A: tuple | None = None
    B: tuple | None = None
    C: tuple | None = None
    D: tuple | None = None
    E: tuple | None = None
    F: tuple | None = None
    G2: tuple | None = None
    Q_diag: tuple | None = None
    R: float = 1.0
    eta: float = 1.0
    tau_D: float = 15.0
    kappa: float = 40.0
    T: float = 10.0
    seed: int = 0
    schedule_file: str | None = None
    learn_k0: int = 0
    learn_ks: int = 100
    exploration_amplitude: float = 1.0
    exploration_waves: int = 10
    explore_during_attack: bool = True
    epsilon0: float = 0.5
    max_iter: int = 50
    x0: tuple | None = None
    z0: tuple | None = None
    w0: tuple | None = None
    K0: tuple | None = None
    regulation_horizon: int = 2000
    output_dir: str = "runs"

    # -- derived objects -------------------------------------------------
    def plant(self):
        if self.preset is not None:
            if self.preset != "pendulum":
                raise ConfigurationError(f"unknown preset {self.preset!r}")
            return pendulum_plant()
        missing = [k for k in MATRIX_KEYS if getattr(self, k) is None]
        if missing:
            raise ConfigurationError(f"inline plant is missing {', '.join(missing)}")
        plant = LinearPlant(*(np.array(getattr(self, k), dtype=float)
                              for k in ("A", "B", "C", "D", "E", "F")))
        return plant, InternalModel.for_plant(plant, np.array(self.G2, dtype=float).reshape(-1, 1))

    def cost(self, dim: int) -> CostWeights:
        diag = self.Q_diag
        if diag is None:
            if self.preset == "pendulum":
                diag = PENDULUM_Q_DIAG
            else:
                diag = (1.0,) * dim
        if len(diag) != dim:
            raise DimensionError(f"Q_diag has {len(diag)} entries, expected {dim}")
        return CostWeights.diagonal(diag, self.R)

    def dos_params(self) -> DoSParams:
        return DoSParams(self.eta, self.tau_D, self.kappa, self.T)

    def schedule(self, horizon: int, base: Path | None = None) -> DoSSchedule:
        from .dos import generate_schedule

        if self.schedule_file is not None:
            path = Path(self.schedule_file)
            if base is not None and not path.is_absolute():
                path = base / path
            return DoSSchedule.load(path)
        return generate_schedule(self.dos_params(), horizon, self.seed)

    def initial_conditions(self, plant):
        n, q = plant.n, plant.q
        pend = self.preset == "pendulum"
        x0 = self.x0 if self.x0 is not None else (PENDULUM_X0 if pend else (0.0,) * n)
        w0 = self.w0 if self.w0 is not None else (PENDULUM_W0 if pend else (1.0,) * q)
        z0 = self.z0 if self.z0 is not None else (0.0,) * q
        for name, v, size in (("x0", x0, n), ("z0", z0, q), ("w0", w0, q)):
            if len(v) != size:
                raise DimensionError(f"{name} has {len(v)} entries, expected {size}")
        return np.array(x0, float), np.array(z0, float), np.array(w0, float)

    # -- serialization -----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name in MATRIX_KEYS:
                for row in value:
                    lines.append(f"{f.name} = {' '.join(repr(float(v)) for v in row)}")
            elif f.name in VECTOR_KEYS:
                lines.append(f"{f.name} = {' '.join(repr(float(v)) for v in value)}")
            elif f.name in BOOL_KEYS:
                lines.append(f"{f.name} = {'true' if value else 'false'}")
            elif f.name in FLOAT_KEYS:
                lines.append(f"{f.name} = {float(value)!r}")
            else:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        raw: dict[str, list[str]] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            raw.setdefault(key, []).append(value)
        kw = {}
        try:
            for key, values in raw.items():
                if key in MATRIX_KEYS:
                    kw[key] = tuple(tuple(float(v) for v in row.split()) for row in values)
                    if len({len(r) for r in kw[key]}) != 1:
                        raise DimensionError(f"matrix {key} has ragged rows")
                    continue
                if len(values) > 1:
                    raise ConfigurationError(f"key {key!r} given more than once")
                value = values[0]
                if key in VECTOR_KEYS:
                    kw[key] = tuple(float(v) for v in value.split())
                elif key in BOOL_KEYS:
                    if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                        raise ConfigurationError(f"{key} must be a boolean")
                    kw[key] = value.lower() in ("true", "1", "yes")
                elif key in INT_KEYS:
                    kw[key] = int(value)
                elif key in FLOAT_KEYS:
                    kw[key] = float(value)
                elif key == "preset":
                    kw[key] = None if value.lower() in ("none", "") else value
                else:
                    kw[key] = value
        except ValueError as exc:
            raise ConfigurationError(f"bad value in config: {exc}") from exc
        if any(k in kw for k in MATRIX_KEYS) and "preset" not in kw:
            kw["preset"] = None
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        return cls.from_text(path.read_text())

    def save(self, path):
        Path(path).write_text(self.to_text())

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        return self if seed is None else replace(self, seed=seed)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    def validate(self):
        plant, im = self.plant()
        dim = plant.n + plant.q
        self.cost(dim)
        self.dos_params()
        self.initial_conditions(plant)
        if self.K0 is not None and len(self.K0) != dim:
            raise DimensionError(f"K0 has {len(self.K0)} entries, expected {dim}")
        if not 0 <= self.learn_k0 < self.learn_ks:
            raise ValidationError("learning window needs 0 <= learn_k0 < learn_ks")
        if self.regulation_horizon < 1:
            raise ValidationError("regulation_horizon must be at least 1")
        if not self.epsilon0 > 0:
            raise ValidationError("epsilon0 must be positive")
