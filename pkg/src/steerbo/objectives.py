"""Black-box objectives for desk-scale runs.

Built-ins cover a classic smooth 2-D benchmark, a hybrid synthetic space,
a tabular lookup, and an external-command adapter.  All objectives are
maximized; scores return together with a (possibly synthetic) cost.
"""
from __future__ import annotations

import hashlib
import json
import math
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .space import HyperparameterDef, SearchSpace


class ObjectiveError(RuntimeError):
    """Raised when an evaluation fails (spawn, timeout, or parse failure)."""


@dataclass
class Objective:
    """An evaluatable target: configuration -> (score, cost seconds).

    `fn` returns a bare score with a fixed synthetic cost; `eval_fn`
    overrides the whole evaluation (score and measured cost) when set.
    """

    name: str
    space: SearchSpace
    fn: Callable[[Mapping[str, Any]], float] | None = None
    eval_fn: Callable[[Mapping[str, Any]], tuple[float, float]] | None = None
    cost: float = 1.0
    noise_sigma: float = 0.0
    noise_seed: int = 0
    known_optimum: dict[str, Any] | None = None
    known_best_score: float | None = None

    def evaluate(self, config: Mapping[str, Any]) -> tuple[float, float]:
        if self.eval_fn is not None:
            score, cost = self.eval_fn(config)
        else:
            assert self.fn is not None, "objective needs fn or eval_fn"
            score, cost = float(self.fn(config)), self.cost
        if self.noise_sigma > 0:
            score += self.noise_sigma * float(_config_rng(config, self.noise_seed).normal())
        return score, cost


def _config_rng(config: Mapping[str, Any], seed: int) -> np.random.Generator:
    """Noise source that is a pure function of (configuration, seed)."""
    digest = hashlib.blake2b(
        json.dumps({"seed": seed, "config": dict(sorted(config.items()))},
                   sort_keys=True, default=str).encode(),
        digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


# ---------------------------------------------------------------------------
# Built-in synthetic objectives


BRANIN_SPACE = SearchSpace(hyperparameters=(
    HyperparameterDef(name="x1", kind="float", lo=-5.0, hi=10.0),
    HyperparameterDef(name="x2", kind="float", lo=0.0, hi=15.0),
))

# Minimizers of the classic form; the objective negates, so these maximize.
BRANIN_OPTIMA = ((-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475))
BRANIN_BEST_SCORE = -0.39788735772973816


def branin(config: Mapping[str, Any]) -> float:
    """Negated 2-D Branin function (maximized; best value ~ -0.397887)."""
    x1, x2 = float(config["x1"]), float(config["x2"])
    a = 1.0
    b = 5.1 / (4.0 * math.pi**2)
    c = 5.0 / math.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * math.pi)
    value = a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * math.cos(x1) + s
    return -value


MIXED_SPACE = SearchSpace(hyperparameters=(
    HyperparameterDef(name="C", kind="cat", labels=("a", "b", "c")),
    HyperparameterDef(name="K", kind="int", lo=0, hi=9),
    HyperparameterDef(name="x", kind="float", lo=0.0, hi=1.0),
))

_MIXED_MODES = {"a": (1.0, 3, 0.2), "b": (0.5, 7, 0.8), "c": (0.0, 0, 0.5)}


def mixed_synthetic(config: Mapping[str, Any]) -> float:
    """Hybrid-space fixture with one optimum per label; global max 1 at (a, 3, 0.2)."""
    base, k_star, x_star = _MIXED_MODES[config["C"]]
    k = int(config["K"])
    x = float(config["x"])
    return base - (k - k_star) ** 2 / 10.0 - 5.0 * (x - x_star) ** 2


# ---------------------------------------------------------------------------
# Tabular lookup objective


@dataclass
class TabularObjective:
    """Lookup objective backed by a table of pre-evaluated configurations.

    Continuous values are rounded to `decimals` before keying, so any
    in-space configuration resolves to a table row on a complete table.
    """

    name: str
    space: SearchSpace
    table: dict[tuple, tuple[float, float]] = field(default_factory=dict)
    decimals: int = 6

    def round_config(self, config: Mapping[str, Any]) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for hp in self.space:
            value = config[hp.name]
            out[hp.name] = round(float(value), self.decimals) if hp.kind == "float" else value
        return out

    def _key(self, config: Mapping[str, Any]) -> tuple:
        rounded = self.round_config(config)
        return tuple(rounded[hp.name] for hp in self.space)

    def add(self, config: Mapping[str, Any], score: float, cost: float = 1.0) -> None:
        self.table[self._key(config)] = (float(score), float(cost))

    def evaluate(self, config: Mapping[str, Any]) -> tuple[float, float]:
        key = self._key(config)
        if key not in self.table:
            raise ObjectiveError(f"{self.name}: configuration {key} not in table")
        return self.table[key]

    def as_objective(self) -> Objective:
        return Objective(name=self.name, space=self.space, eval_fn=self.evaluate)

    @classmethod
    def from_file(cls, path: str, space: SearchSpace, name: str = "tabular",
                  decimals: int = 6) -> "TabularObjective":
        """Load a JSONL table: one {"config": {...}, "score": s, "cost": c} per line."""
        obj = cls(name=name, space=space, decimals=decimals)
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    config = {h.name: h.coerce(rec["config"][h.name]) for h in space}
                    obj.add(config, rec["score"], rec.get("cost", 1.0))
                except (KeyError, ValueError) as exc:
                    raise ObjectiveError(f"{path}:{line_no}: bad table row: {exc}") from exc
        return obj


# ---------------------------------------------------------------------------
# External-command objective


@dataclass
class ExternalCommandObjective:
    """Runs a shell command per evaluation and parses a final "score=" line.

    The template may reference hyperparameters as {name}; cost is measured
    wall-clock time.  Spawn failures, nonzero exits, timeouts, and missing
    score lines each raise a distinct diagnostic.
    """

    name: str
    space: SearchSpace
    template: str
    timeout: float = 60.0

    def evaluate(self, config: Mapping[str, Any]) -> tuple[float, float]:
        try:
            command = self.template.format(**{k: shlex.quote(str(v))
                                              for k, v in config.items()})
        except KeyError as exc:
            raise ObjectiveError(f"{self.name}: template references unknown name {exc}") from exc
        start = time.monotonic()
        try:
            proc = subprocess.run(command, shell=True, capture_output=True,
                                  text=True, timeout=self.timeout)
        except subprocess.TimeoutExpired as exc:
            raise ObjectiveError(f"{self.name}: timed out after {self.timeout}s") from exc
        except OSError as exc:
            raise ObjectiveError(f"{self.name}: failed to spawn: {exc}") from exc
        elapsed = time.monotonic() - start
        if proc.returncode != 0:
            raise ObjectiveError(f"{self.name}: exited with status {proc.returncode}: "
                                 f"{proc.stderr.strip()[:200]}")
        for line in reversed(proc.stdout.strip().splitlines()):
            if line.startswith("score="):
                try:
                    return float(line[len("score="):]), elapsed
                except ValueError as exc:
                    raise ObjectiveError(
                        f"{self.name}: unparseable score line {line!r}") from exc
        raise ObjectiveError(f"{self.name}: no 'score=' line in output")

    def as_objective(self) -> Objective:
        return Objective(name=self.name, space=self.space, eval_fn=self.evaluate)


# ---------------------------------------------------------------------------
# Registry used by the CLI


def builtin_objective(name: str, noise_sigma: float = 0.0, seed: int = 0,
                      cost: float = 1.0) -> Objective:
    if name == "branin":
        return Objective(name="branin", space=BRANIN_SPACE, fn=branin, cost=cost,
                         noise_sigma=noise_sigma, noise_seed=seed,
                         known_optimum={"x1": BRANIN_OPTIMA[1][0], "x2": BRANIN_OPTIMA[1][1]},
                         known_best_score=BRANIN_BEST_SCORE)
    if name == "mixed":
        return Objective(name="mixed", space=MIXED_SPACE, fn=mixed_synthetic, cost=cost,
                         noise_sigma=noise_sigma, noise_seed=seed,
                         known_optimum={"C": "a", "K": 3, "x": 0.2},
                         known_best_score=1.0)
    raise ObjectiveError(f"unknown objective {name!r} (expected branin or mixed)")
