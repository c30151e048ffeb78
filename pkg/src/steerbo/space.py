"""Hybrid hyperparameter search spaces and user-supplied beliefs.

A search space is an ordered collection of named hyperparameters, each
categorical, integer, or continuous (numeric domains may be log-scaled).
User beliefs arrive either as point assignments or as per-hyperparameter
prior distributions over a subset of the space; both are parsed from a
JSON interaction format and validated against the owning space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

import numpy as np

# Integer domains at most this wide are modeled as ordered categoricals;
# wider ones are modeled as continuous and rounded on decoding.
MAX_ORDINAL_CARDINALITY = 32


class SpaceError(ValueError):
    """Raised when a space document or hyperparameter definition is invalid."""


class InteractionError(ValueError):
    """Raised when an interaction record fails parsing or domain validation.

    Messages carry the record index and offending field/hyperparameter so
    callers can surface field-level diagnostics.
    """


@dataclass(frozen=True)
class HyperparameterDef:
    """One named dimension of the search space.

    kind "cat" uses `labels`; kinds "int" and "float" use `lo`/`hi`
    (inclusive bounds) and may set `log` for log-scale sampling/modeling.
    """

    name: str
    kind: str  # "cat" | "int" | "float"
    labels: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 0.0
    log: bool = False

    def __post_init__(self) -> None:
        if self.kind == "cat":
            if len(self.labels) < 1:
                raise SpaceError(f"{self.name}: categorical domain needs at least one label")
            if len(set(self.labels)) != len(self.labels):
                raise SpaceError(f"{self.name}: duplicate labels")
        elif self.kind in ("int", "float"):
            if not self.lo < self.hi:
                raise SpaceError(f"{self.name}: requires lo < hi, got [{self.lo}, {self.hi}]")
            if self.log and self.lo <= 0:
                raise SpaceError(f"{self.name}: log scale requires lo > 0")
            if self.kind == "int" and (self.lo != int(self.lo) or self.hi != int(self.hi)):
                raise SpaceError(f"{self.name}: integer bounds must be integers")
        else:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")

    def contains(self, value: Any) -> bool:
        """Whether a (decoded) value lies in this domain."""
        if self.kind == "cat":
            return value in self.labels
        if self.kind == "int":
            return isinstance(value, (int, np.integer)) and self.lo <= value <= self.hi
        if isinstance(value, bool):
            return False
        return isinstance(value, (int, float, np.floating, np.integer)) and self.lo <= value <= self.hi

    def coerce(self, raw: Any) -> Any:
        """Coerce an external value (e.g. from JSON) into this domain.

        Categorical accepts a label or an integer label index.  Raises
        ValueError when the value cannot be interpreted or is off-domain.
        """
        if self.kind == "cat":
            if isinstance(raw, str):
                if raw not in self.labels:
                    raise ValueError(f"label {raw!r} not in {list(self.labels)}")
                return raw
            if isinstance(raw, (int, np.integer)) and not isinstance(raw, bool):
                if not 0 <= raw < len(self.labels):
                    raise ValueError(f"label index {raw} out of range for {len(self.labels)} labels")
                return self.labels[int(raw)]
            raise ValueError(f"cannot interpret {raw!r} as a label")
        if self.kind == "int":
            if isinstance(raw, bool) or not isinstance(raw, (int, float, np.integer, np.floating)):
                raise ValueError(f"cannot interpret {raw!r} as an integer")
            if float(raw) != int(raw):
                raise ValueError(f"{raw!r} is not an integer")
            value = int(raw)
            if not self.lo <= value <= self.hi:
                raise ValueError(f"{value} outside [{int(self.lo)}, {int(self.hi)}]")
            return value
        if isinstance(raw, bool) or not isinstance(raw, (int, float, np.integer, np.floating)):
            raise ValueError(f"cannot interpret {raw!r} as a real")
        value = float(raw)
        if not self.lo <= value <= self.hi:
            raise ValueError(f"{value} outside [{self.lo}, {self.hi}]")
        return value


@dataclass(frozen=True)
class SearchSpace:
    """Ordered hyperparameter definitions plus the score variable name."""

    hyperparameters: tuple[HyperparameterDef, ...]
    score_name: str = "score"

    def __post_init__(self) -> None:
        names = [h.name for h in self.hyperparameters]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SpaceError(f"duplicate hyperparameter name(s): {', '.join(dup)}")
        if self.score_name in names:
            raise SpaceError(f"score variable {self.score_name!r} collides with a hyperparameter")

    def __iter__(self) -> Iterator[HyperparameterDef]:
        return iter(self.hyperparameters)

    def __getitem__(self, name: str) -> HyperparameterDef:
        for h in self.hyperparameters:
            if h.name == name:
                return h
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [h.name for h in self.hyperparameters]

    def validate_config(self, values: Mapping[str, Any]) -> None:
        """Check a full configuration: every hyperparameter assigned, in-domain."""
        missing = set(self.names) - set(values)
        if missing:
            raise SpaceError(f"configuration missing: {', '.join(sorted(missing))}")
        extra = set(values) - set(self.names)
        if extra:
            raise SpaceError(f"configuration has unknown names: {', '.join(sorted(extra))}")
        for h in self.hyperparameters:
            if not h.contains(values[h.name]):
                raise SpaceError(f"{h.name}: value {values[h.name]!r} outside domain")


@dataclass(frozen=True)
class DistributionSpec:
    """A prior distribution over a single hyperparameter.

    family "cat" carries weights in `parameters`, optionally paired with an
    explicit support in `values` (otherwise weights align with the domain's
    labels / ordered integer values).  "uniform" and "normal" apply to
    continuous domains, "int_uniform" to integer domains.
    """

    family: str  # "cat" | "uniform" | "int_uniform" | "normal"
    parameters: tuple[float, ...]
    values: tuple[Any, ...] | None = None

    def __post_init__(self) -> None:
        if self.family == "cat":
            if len(self.parameters) == 0:
                raise InteractionError("cat prior needs at least one weight")
            if any(w < 0 for w in self.parameters):
                raise InteractionError("cat weights must be non-negative")
            if not any(w > 0 for w in self.parameters):
                raise InteractionError("cat weights must not all be zero")
            if self.values is not None and len(self.values) != len(self.parameters):
                raise InteractionError("cat values and weights differ in length")
        elif self.family in ("uniform", "int_uniform"):
            if len(self.parameters) != 2 or not self.parameters[0] < self.parameters[1]:
                raise InteractionError(f"{self.family} prior needs parameters [lo, hi] with lo < hi")
        elif self.family == "normal":
            if len(self.parameters) != 2 or not self.parameters[1] > 0:
                raise InteractionError("normal prior needs parameters [mu, sigma] with sigma > 0")
        else:
            raise InteractionError(f"unknown distribution family {self.family!r}")

    def validate_against(self, hp: HyperparameterDef) -> None:
        """Reject priors whose support exceeds the hyperparameter's domain.

        Normal priors have unbounded support and are truncated to the domain
        at sampling time instead; their mean must lie inside the domain.
        """
        if self.family == "cat":
            if self.values is not None:
                for v in self.values:
                    try:
                        hp.coerce(v)
                    except ValueError as exc:
                        raise InteractionError(f"{hp.name}: prior value {v!r}: {exc}") from exc
                return
            domain_size = len(hp.labels) if hp.kind == "cat" else (
                int(hp.hi) - int(hp.lo) + 1 if hp.kind == "int" else None)
            if domain_size is None:
                raise InteractionError(f"{hp.name}: cat prior without values on a continuous domain")
            if len(self.parameters) != domain_size:
                raise InteractionError(
                    f"{hp.name}: cat prior has {len(self.parameters)} weights "
                    f"but the domain has {domain_size} values")
        elif self.family == "uniform":
            if hp.kind != "float":
                raise InteractionError(f"{hp.name}: uniform prior on a non-continuous domain")
            lo, hi = self.parameters
            if lo < hp.lo or hi > hp.hi:
                raise InteractionError(
                    f"{hp.name}: uniform support [{lo}, {hi}] exceeds domain [{hp.lo}, {hp.hi}]")
        elif self.family == "int_uniform":
            if hp.kind != "int":
                raise InteractionError(f"{hp.name}: int_uniform prior on a non-integer domain")
            lo, hi = self.parameters
            if lo != int(lo) or hi != int(hi):
                raise InteractionError(f"{hp.name}: int_uniform bounds must be integers")
            if lo < hp.lo or hi > hp.hi:
                raise InteractionError(
                    f"{hp.name}: int_uniform support [{lo}, {hi}] exceeds domain "
                    f"[{int(hp.lo)}, {int(hp.hi)}]")
        elif self.family == "normal":
            if hp.kind != "float":
                raise InteractionError(f"{hp.name}: normal prior on a non-continuous domain")
            mu = self.parameters[0]
            if not hp.lo <= mu <= hp.hi:
                raise InteractionError(
                    f"{hp.name}: normal mean {mu} outside domain [{hp.lo}, {hp.hi}]")

    def sample(self, hp: HyperparameterDef, rng: np.random.Generator) -> Any:
        """Draw one value for `hp`; normals are truncated to the domain."""
        if self.family == "cat":
            weights = np.asarray(self.parameters, dtype=float)
            probs = weights / weights.sum()
            idx = int(rng.choice(len(probs), p=probs))
            if self.values is not None:
                return hp.coerce(self.values[idx])
            if hp.kind == "cat":
                return hp.labels[idx]
            return int(hp.lo) + idx
        if self.family == "uniform":
            return float(rng.uniform(self.parameters[0], self.parameters[1]))
        if self.family == "int_uniform":
            return int(rng.integers(int(self.parameters[0]), int(self.parameters[1]) + 1))
        mu, sigma = self.parameters
        for _ in range(1000):
            draw = float(rng.normal(mu, sigma))
            if hp.lo <= draw <= hp.hi:
                return draw
        # Essentially no prior mass inside the domain; fall back to the
        # nearest boundary rather than loop forever.
        return float(min(max(mu, hp.lo), hp.hi))


@dataclass(frozen=True)
class UserKnowledge:
    """A belief over a subset of hyperparameters, received at some iteration.

    Point beliefs fix values exactly (a degenerate prior); distribution
    beliefs supply a :class:`DistributionSpec` per hyperparameter.
    """

    kind: str  # "point" | "dist"
    entries: Mapping[str, Any]
    received_at: int | None = None
    polarity: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("point", "dist"):
            raise InteractionError(f"unknown knowledge kind {self.kind!r}")
        if not self.entries:
            raise InteractionError("knowledge must cover at least one hyperparameter")
        if self.received_at is not None and self.received_at < 0:
            raise InteractionError(f"iteration must be >= 0, got {self.received_at}")

    @property
    def names(self) -> list[str]:
        return list(self.entries)


@dataclass(frozen=True)
class KnowledgeClear:
    """Sentinel for an interaction that withdraws the active belief."""

    received_at: int | None = None
    polarity: str | None = None


def sample_prior(knowledge: UserKnowledge, space: SearchSpace,
                 rng: np.random.Generator) -> dict[str, Any]:
    """Draw a partial configuration over the knowledge's hyperparameters.

    Entries are drawn independently; point beliefs return their fixed
    values.  Requires knowledge already validated against `space`.
    """
    if knowledge.kind == "point":
        return dict(knowledge.entries)
    return {name: spec.sample(space[name], rng) for name, spec in knowledge.entries.items()}


# ---------------------------------------------------------------------------
# Space file parsing


def parse_space(document: str | Mapping[str, Any]) -> SearchSpace:
    """Parse a space document (JSON text or already-loaded mapping).

    Format: {"score": name?, "hyperparameters": [{"name", "type", and
    either "labels" or "range", optional "log"}]}.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpaceError(f"space document is not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise SpaceError("space document must be a JSON object")
    records = document.get("hyperparameters")
    if not isinstance(records, list) or not records:
        raise SpaceError("space document needs a non-empty 'hyperparameters' list")
    defs = []
    for i, rec in enumerate(records):
        where = f"hyperparameters[{i}]"
        if not isinstance(rec, Mapping):
            raise SpaceError(f"{where}: record must be an object")
        name = rec.get("name")
        if not isinstance(name, str) or not name:
            raise SpaceError(f"{where}: missing or empty 'name'")
        kind = rec.get("type")
        if kind == "cat":
            labels = rec.get("labels")
            if not isinstance(labels, list) or not labels:
                raise SpaceError(f"{where} ({name}): 'cat' needs a non-empty 'labels' list")
            defs.append(HyperparameterDef(name=name, kind="cat",
                                          labels=tuple(str(x) for x in labels)))
        elif kind in ("int", "float"):
            rng_pair = rec.get("range")
            if (not isinstance(rng_pair, list)) or len(rng_pair) != 2:
                raise SpaceError(f"{where} ({name}): '{kind}' needs 'range': [lo, hi]")
            defs.append(HyperparameterDef(name=name, kind=kind,
                                          lo=float(rng_pair[0]), hi=float(rng_pair[1]),
                                          log=bool(rec.get("log", False))))
        else:
            raise SpaceError(f"{where} ({name}): unknown type {kind!r} (expected cat/int/float)")
    return SearchSpace(hyperparameters=tuple(defs),
                       score_name=str(document.get("score", "score")))


def emit_space(space: SearchSpace) -> str:
    """Serialize a space back to its document format (round-trips parse_space)."""
    records = []
    for h in space:
        if h.kind == "cat":
            records.append({"name": h.name, "type": "cat", "labels": list(h.labels)})
        else:
            rec: dict[str, Any] = {"name": h.name, "type": h.kind, "range": [h.lo, h.hi]}
            if h.log:
                rec["log"] = True
            records.append(rec)
    return json.dumps({"score": space.score_name, "hyperparameters": records}, indent=2)


# ---------------------------------------------------------------------------
# Interaction parsing

_KNOWN_FAMILIES = ("cat", "uniform", "int_uniform", "normal")


def _parse_dist_object(obj: Mapping[str, Any], where: str) -> DistributionSpec:
    family = obj.get("dist")
    if family not in _KNOWN_FAMILIES:
        raise InteractionError(f"{where}: unknown distribution family {family!r}")
    params = obj.get("parameters")
    if not isinstance(params, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in params):
        raise InteractionError(f"{where}: 'parameters' must be a list of numbers")
    values = obj.get("values")
    if values is not None and not isinstance(values, list):
        raise InteractionError(f"{where}: 'values' must be a list")
    try:
        return DistributionSpec(family=family, parameters=tuple(float(p) for p in params),
                                values=tuple(values) if values is not None else None)
    except InteractionError as exc:
        raise InteractionError(f"{where}: {exc}") from exc


def parse_interaction(record: Mapping[str, Any], space: SearchSpace | None,
                      index: int = 0, require_iteration: bool = True,
                      ) -> UserKnowledge | KnowledgeClear:
    """Parse one interaction record, optionally validating against a space.

    With `space` given, point values are coerced into their domains and
    prior supports are checked for containment; without it, only the
    structure (keys, families, iteration) is checked.  Live submissions
    set require_iteration=False and leave received_at unset.
    """
    where = f"interaction[{index}]"
    if not isinstance(record, Mapping):
        raise InteractionError(f"{where}: record must be an object")
    iteration = None
    if require_iteration:
        iteration = record.get("iteration")
        if not isinstance(iteration, int) or isinstance(iteration, bool) or iteration < 0:
            raise InteractionError(f"{where}: 'iteration' must be an integer >= 0")
    polarity = record.get("type")
    polarity = str(polarity) if polarity is not None else None
    intervention = record.get("intervention", _MISSING)
    if intervention is _MISSING:
        raise InteractionError(f"{where}: missing 'intervention'")
    if intervention is None:
        return KnowledgeClear(received_at=iteration, polarity=polarity)
    if not isinstance(intervention, Mapping):
        raise InteractionError(
            f"{where}: 'intervention' must be an object mapping hyperparameter names "
            "(list-shaped interventions are not supported; convert to named entries)")
    if not intervention:
        raise InteractionError(f"{where}: 'intervention' must not be empty")
    kind = record.get("kind")
    if kind is None:
        kind = "point"  # flat value maps default to point beliefs
    if kind not in ("point", "dist"):
        raise InteractionError(f"{where}: unknown kind {kind!r}")

    entries: dict[str, Any] = {}
    for name, raw in intervention.items():
        spot = f"{where}: {name}"
        if kind == "dist":
            if not isinstance(raw, Mapping):
                raise InteractionError(f"{spot}: expected a distribution object")
            spec = _parse_dist_object(raw, spot)
            if space is not None:
                hp = _lookup(space, name, spot)
                try:
                    spec.validate_against(hp)
                except InteractionError as exc:
                    raise InteractionError(f"{where}: {exc}") from exc
            entries[name] = spec
        else:
            if isinstance(raw, Mapping):
                raise InteractionError(f"{spot}: point belief must map to plain values")
            if space is not None:
                hp = _lookup(space, name, spot)
                try:
                    entries[name] = hp.coerce(raw)
                except ValueError as exc:
                    raise InteractionError(f"{spot}: {exc}") from exc
            else:
                entries[name] = raw
    return UserKnowledge(kind=kind, entries=entries, received_at=iteration, polarity=polarity)


def parse_interactions(document: str | list, space: SearchSpace | None,
                       ) -> list[UserKnowledge | KnowledgeClear]:
    """Parse an interaction file: a JSON array of scheduled belief records."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InteractionError(f"interaction document is not valid JSON: {exc}") from exc
    if not isinstance(document, list):
        raise InteractionError("interaction document must be a JSON array")
    return [parse_interaction(rec, space, index=i) for i, rec in enumerate(document)]


def _lookup(space: SearchSpace, name: str, where: str) -> HyperparameterDef:
    try:
        return space[name]
    except KeyError:
        raise InteractionError(f"{where}: unknown hyperparameter") from None


class _Missing:
    pass


_MISSING = _Missing()


# ---------------------------------------------------------------------------
# Encoding between external values and the modeled (internal) scale


@dataclass(frozen=True)
class ColumnInfo:
    """Modeling metadata for one variable: categorical code or real."""

    name: str
    kind: str  # "categorical" | "continuous"
    n_values: int = 0  # categorical only
    log: bool = False  # continuous only


class SpaceCodec:
    """Maps configurations to the numeric scale the surrogate models.

    Categoricals and narrow integer domains become ordered codes; wide
    integer and continuous domains become reals (log-transformed when the
    definition is log-scaled).  Decoding clamps/rounds back into domain.
    """

    def __init__(self, space: SearchSpace):
        self.space = space
        self.columns: list[ColumnInfo] = []
        self._cat_values: dict[str, list[Any]] = {}
        for h in space:
            if h.kind == "cat":
                self.columns.append(ColumnInfo(h.name, "categorical", n_values=len(h.labels)))
                self._cat_values[h.name] = list(h.labels)
            elif h.kind == "int" and (h.hi - h.lo + 1) <= MAX_ORDINAL_CARDINALITY:
                values = list(range(int(h.lo), int(h.hi) + 1))
                self.columns.append(ColumnInfo(h.name, "categorical", n_values=len(values)))
                self._cat_values[h.name] = values
            else:
                self.columns.append(ColumnInfo(h.name, "continuous", log=h.log))
        self.score_column = ColumnInfo(space.score_name, "continuous")

    @property
    def variable_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> ColumnInfo:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def encode_value(self, name: str, value: Any) -> float:
        c = self.column(name)
        if c.kind == "categorical":
            return float(self._cat_values[name].index(value))
        return math.log(value) if c.log else float(value)

    def decode_value(self, name: str, internal: float) -> Any:
        c = self.column(name)
        hp = self.space[name]
        if c.kind == "categorical":
            idx = int(round(internal))
            idx = min(max(idx, 0), c.n_values - 1)
            return self._cat_values[name][idx]
        raw = math.exp(internal) if c.log else float(internal)
        raw = min(max(raw, hp.lo), hp.hi)
        if hp.kind == "int":
            return int(min(max(round(raw), hp.lo), hp.hi))
        return raw

    def encode_config(self, values: Mapping[str, Any]) -> dict[str, float]:
        return {name: self.encode_value(name, values[name]) for name in values}

    def decode_config(self, internal: Mapping[str, float]) -> dict[str, Any]:
        return {name: self.decode_value(name, x) for name, x in internal.items()}

    def sample_uniform(self, rng: np.random.Generator) -> dict[str, Any]:
        """Independent uniform draw per hyperparameter, in the modeled scale."""
        out = {}
        for c in self.columns:
            if c.kind == "categorical":
                out[c.name] = self._cat_values[c.name][int(rng.integers(c.n_values))]
            else:
                hp = self.space[c.name]
                lo = math.log(hp.lo) if c.log else hp.lo
                hi = math.log(hp.hi) if c.log else hp.hi
                out[c.name] = self.decode_value(c.name, float(rng.uniform(lo, hi)))
        return out
