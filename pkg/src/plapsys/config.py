"""Run configuration: a flat set of sectioned keys read from a TOML file.

Keys are written with dots (``problem.alpha1 = -0.5``); ``[section]`` tables
are accepted too since TOML treats both the same way.  Every key has a
default, listed in :data:`KEYS`, and unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import tomli

from .errors import ConfigError, PlapError
from .mesh import DomainSpec
from .problem import ProblemParams
from .solver import SolveConfig

_NUM = (int, float)


@dataclass(frozen=True)
class Key:
    kind: type | tuple
    default: Any
    doc: str
    seq: bool = False  # list of numbers


KEYS: dict[str, Key] = {
    "domain.dimension": Key(int, 1, "1 (interval) or 2 (rectangle)"),
    "domain.x": Key(_NUM, [0.0, 1.0], "x-axis bounds [lo, hi]", True),
    "domain.y": Key(_NUM, [0.0, 1.0], "y-axis bounds, used when dimension = 2", True),
    "domain.padding": Key(_NUM, None, "padding of the enlarged domain; default 0.25 x shortest side"),
    "mesh.n": Key(int, 256, "subdivisions per axis"),
    "problem.p": Key(_NUM, 2.0, "exponent of the u operator"),
    "problem.q": Key(_NUM, 2.0, "exponent of the v operator"),
    "problem.alpha1": Key(_NUM, -0.5, "power of u in the u equation (< 0)"),
    "problem.beta1": Key(_NUM, 0.5, "power of v in the u equation (> 0)"),
    "problem.alpha2": Key(_NUM, 0.5, "power of u in the v equation (> 0)"),
    "problem.beta2": Key(_NUM, -0.5, "power of v in the v equation (< 0)"),
    "problem.lambda": Key(_NUM, 1.0, "positive parameter"),
    "problem.gamma": Key(_NUM, 2.0, "power of the eigenfunctions in the lower barrier (> 1)"),
    "solve.tol_fixedpoint": Key(_NUM, 1e-9, "sup-norm stop for successive sweeps"),
    "solve.tol_newton": Key(_NUM, 1e-10, "scalar Newton tolerance"),
    "solve.max_sweeps": Key(int, 200, "sweeps per eps stage"),
    "solve.eps_stages": Key(int, 20, "eps schedule eps0 * 2^-j, j = 0..eps_stages"),
    "solve.clamp": Key(bool, True, "project every scalar solve onto the barriers"),
    "solve.residual_tol": Key(_NUM, 1e-6, "final unregularized residual bound"),
    "barrier.theta1": Key(_NUM, None, "auxiliary exponent for u; default max(-1, alpha1)/2"),
    "barrier.theta2": Key(_NUM, None, "auxiliary exponent for v; default max(-1, beta2)/2"),
    "barrier.aux_delta": Key(_NUM, None, "supersolution exponent; default twice the admissible bound"),
    "barrier.k": Key(_NUM, None, "coupling exponent; default midpoint of the admissible interval"),
    "barrier.C": Key(_NUM, None, "fixed amplitude; default searched over 2, 4, ..., 2^30"),
    "barrier.C_homogeneous": Key(_NUM, 2.0, "amplitude used when theta = 0"),
    "barrier.strip_width": Key(_NUM, None, "boundary strip width; default 4 h"),
    "sweep.lambda_min": Key(_NUM, 1.0, "first lambda of the sweep"),
    "sweep.lambda_max": Key(_NUM, 100.0, "last lambda of the sweep"),
    "sweep.count": Key(int, 9, "number of geometrically spaced lambdas"),
    "verify.levels": Key(int, [64, 128, 256], "mesh levels of the manufactured test", True),
    "verify.exponents": Key(_NUM, [1.5, 2.0, 3.0], "operator exponents of the manufactured test", True),
    "verify.threshold_lo": Key(_NUM, None, "lower bisection bracket; default lambda_star / 2"),
    "verify.threshold_hi": Key(_NUM, None, "upper bisection bracket; default 20 lambda_star"),
    "verify.threshold_steps": Key(int, 0, "bisection steps; 0 skips the threshold search"),
    "verify.slack": Key(_NUM, 0.9, "accepted ratio of the empirical threshold to lambda_star"),
    "output.dir": Key(str, "out", "directory for emitted files"),
    "seed": Key(int, 0, "seed for randomized checks"),
}


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for name, value in tree.items():
        key = f"{prefix}{name}"
        if isinstance(value, dict):
            flat.update(_flatten(value, key + "."))
        else:
            flat[key] = value
    return flat


def _coerce(key: str, value: Any) -> Any:
    spec = KEYS[key]
    kinds = spec.kind if isinstance(spec.kind, tuple) else (spec.kind,)

    def one(v):
        # bool is an int subclass; keep the two apart
        if isinstance(v, bool) and bool not in kinds:
            raise ConfigError(f"config key '{key}': expected a number, got {v!r}")
        if not isinstance(v, kinds):
            raise ConfigError(f"config key '{key}': wrong type {type(v).__name__}")
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"config key '{key}': value must be finite")
        return float(v) if float in kinds else v

    if spec.seq:
        if not isinstance(value, list) or not value:
            raise ConfigError(f"config key '{key}': expected a nonempty list")
        return [one(v) for v in value]
    return one(value)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        flat = _flatten(data)
        for key in sorted(flat):
            if key not in KEYS:
                raise ConfigError(f"unknown config key '{key}'")
        values = {k: spec.default for k, spec in KEYS.items()}
        values.update({k: _coerce(k, v) for k, v in flat.items()})
        config = cls(values)
        config.check()
        return config

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        return cls.from_mapping(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    def __getitem__(self, key: str):
        return self.values[key]

    def check(self) -> None:
        """Build the derived objects once so bad values surface as ConfigError."""
        try:
            self.domain_spec()
            self.params()
            self.solve_config()
        except (PlapError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self["domain.dimension"] not in (1, 2):
            raise ConfigError("config key 'domain.dimension' must be 1 or 2")
        if self["mesh.n"] < 2:
            raise ConfigError("config key 'mesh.n' must be at least 2")
        if not 0 < self["sweep.lambda_min"] <= self["sweep.lambda_max"] or self["sweep.count"] < 1:
            raise ConfigError("sweep needs 0 < lambda_min <= lambda_max and count >= 1")

    def canonical(self) -> str:
        """Resolved values, one per line; the output location is left out."""
        return "".join(f"{k} = {self.values[k]!r}\n" for k in sorted(self.values) if k != "output.dir")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def domain_spec(self) -> DomainSpec:
        pad = self["domain.padding"]
        for key in ("domain.x", "domain.y"):
            if len(self[key]) != 2:
                raise ConfigError(f"config key '{key}' needs two entries")
        if self["domain.dimension"] == 1:
            return DomainSpec.interval(*self["domain.x"], padding=pad)
        return DomainSpec.rectangle(tuple(self["domain.x"]), tuple(self["domain.y"]), padding=pad)

    def params(self) -> ProblemParams:
        g = self.values
        return ProblemParams(
            g["problem.p"], g["problem.q"], g["problem.alpha1"], g["problem.beta1"],
            g["problem.alpha2"], g["problem.beta2"], g["problem.lambda"], g["problem.gamma"],
        )

    def solve_config(self, **overrides) -> SolveConfig:
        g = self.values
        kw = dict(
            tol_fixedpoint=g["solve.tol_fixedpoint"],
            tol_newton=g["solve.tol_newton"],
            max_sweeps=g["solve.max_sweeps"],
            eps_stages=g["solve.eps_stages"],
            clamp=g["solve.clamp"],
            residual_tol=g["solve.residual_tol"],
        )
        kw.update(overrides)
        return SolveConfig(**kw)

    def barrier_kwargs(self) -> dict:
        return {
            "theta1": self["barrier.theta1"],
            "theta2": self["barrier.theta2"],
            "aux_delta": self["barrier.aux_delta"],
            "k": self["barrier.k"],
            "strip_width": self["barrier.strip_width"],
        }
