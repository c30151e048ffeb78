"""Line-delimited run logs: one JSON record per trial or knowledge event.

Logs are append-only and deterministic for a fixed seed (no timestamps),
so two identical runs produce byte-identical files.  The report command
and the acceptance suite both read this format.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, IO, Iterator

from .optimizer import Trial
from .space import KnowledgeClear, UserKnowledge


def _round_floats(obj: Any) -> Any:
    if isinstance(obj, float):
        return round(obj, 12)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _dump(record: dict[str, Any]) -> str:
    return json.dumps(_round_floats(record), sort_keys=True)


@dataclass
class TrialLogWriter:
    """Writes run headers, trials, and knowledge events as JSONL."""

    stream: IO[str]
    cumulative_cost: float = field(default=0.0, init=False)

    def write_header(self, *, space_doc: dict[str, Any], objective: str,
                     params: dict[str, Any], seed: int) -> None:
        self._emit({"type": "run", "space": space_doc, "objective": objective,
                    "params": params, "seed": seed})

    def write_trial(self, trial: Trial, incumbent_score: float | None) -> None:
        self.cumulative_cost += trial.cost
        record: dict[str, Any] = {
            "type": "trial",
            "iteration": trial.iteration,
            "config": dict(trial.config),
            "score": trial.score,
            "incumbent_score": incumbent_score,
            "cumulative_cost": self.cumulative_cost,
            "used_knowledge": trial.used_knowledge,
            "refit": trial.refit,
            "sampling_variance": trial.sampling_variance,
        }
        if trial.failed:
            record["failed"] = True
        if trial.ei_bound is not None:
            record["ei_bound"] = trial.ei_bound
        self._emit(record)

    def write_knowledge(self, item: UserKnowledge | KnowledgeClear, iteration: int) -> None:
        if isinstance(item, KnowledgeClear):
            record: dict[str, Any] = {"type": "knowledge", "iteration": iteration,
                                      "cleared": True}
        else:
            entries = {}
            for name, entry in item.entries.items():
                if hasattr(entry, "family"):
                    obj: Any = {"dist": entry.family, "parameters": list(entry.parameters)}
                    if entry.values is not None:
                        obj["values"] = list(entry.values)
                    entries[name] = obj
                else:
                    entries[name] = entry
            record = {"type": "knowledge", "iteration": iteration,
                      "kind": item.kind, "entries": entries}
            if item.polarity is not None:
                record["polarity"] = item.polarity
        self._emit(record)

    def _emit(self, record: dict[str, Any]) -> None:
        self.stream.write(_dump(record) + "\n")
        self.stream.flush()


def read_log(path: str) -> Iterator[dict[str, Any]]:
    """Yield records from a trial log file."""
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def load_trials(path: str) -> list[dict[str, Any]]:
    """The trial records of a log, in order."""
    return [r for r in read_log(path) if r.get("type") == "trial"]
