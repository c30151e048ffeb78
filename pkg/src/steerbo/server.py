"""Run controller and HTTP control surface.

The optimizer loop runs in one thread; a small threaded HTTP server lets a
human (or the dashboard) poll status and inject beliefs mid-run.  Live
submissions go through the optimizer's mailbox and take effect at the next
iteration boundary; scripted interactions fire at their recorded iteration.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from .optimizer import Optimizer, gate_probability
from .space import (InteractionError, KnowledgeClear, UserKnowledge, emit_space,
                    parse_interaction)
from .trial_log import TrialLogWriter

RECENT_WINDOW = 20


class RunController:
    """Drives one optimization run and publishes immutable status snapshots."""

    def __init__(self, optimizer: Optimizer,
                 interactions: list[UserKnowledge | KnowledgeClear] | None = None,
                 log_writer: TrialLogWriter | None = None):
        self.optimizer = optimizer
        for item in interactions or []:
            if item.received_at is None:
                raise InteractionError("scripted interactions need an iteration")
        self.scripted = sorted(interactions or [], key=lambda k: k.received_at)
        self.log_writer = log_writer
        self.completed = False
        self._lock = threading.Lock()
        self._trials: list[dict[str, Any]] = []
        self._scripted_cursor = 0
        self._snapshot: dict[str, Any] = self._build_snapshot()

    # -- loop ----------------------------------------------------------------

    def run(self) -> None:
        opt = self.optimizer
        while opt.iteration < opt.params.max_iterations:
            boundary = opt.iteration
            while (self._scripted_cursor < len(self.scripted)
                   and self.scripted[self._scripted_cursor].received_at <= boundary):
                item = self.scripted[self._scripted_cursor]
                self._apply(item, boundary)
                self._scripted_cursor += 1
            for item in opt.apply_pending_knowledge():
                if self.log_writer is not None:
                    self.log_writer.write_knowledge(item, boundary)
            trial = opt.step()
            incumbent = opt.incumbent[1] if opt.incumbent else None
            if self.log_writer is not None:
                self.log_writer.write_trial(trial, incumbent)
            record = {"iteration": trial.iteration, "config": trial.config,
                      "score": trial.score, "incumbent_score": incumbent,
                      "used_knowledge": trial.used_knowledge, "refit": trial.refit,
                      "failed": trial.failed,
                      "sampling_variance": trial.sampling_variance}
            with self._lock:
                self._trials.append(record)
                self._snapshot = self._build_snapshot()
        self.completed = True
        with self._lock:
            self._snapshot = self._build_snapshot()

    def _apply(self, item: UserKnowledge | KnowledgeClear, iteration: int) -> None:
        if isinstance(item, KnowledgeClear):
            self.optimizer.clear_knowledge()
        else:
            self.optimizer.inject_knowledge(item)
        if self.log_writer is not None:
            self.log_writer.write_knowledge(item, iteration)

    # -- status ----------------------------------------------------------------

    def _build_snapshot(self) -> dict[str, Any]:
        opt = self.optimizer
        incumbent = opt.incumbent
        decay = opt.decay
        knowledge = None
        if decay.knowledge is not None:
            knowledge = {
                "kind": decay.knowledge.kind,
                "names": decay.knowledge.names,
                "received_at": decay.received_at,
                "gate_probability": gate_probability(
                    decay, max(opt.iteration, decay.received_at)),
            }
        variance_series = [
            {"iteration": t["iteration"], **t["sampling_variance"]}
            for t in self._trials if t.get("sampling_variance")
        ]
        return {
            "iteration": opt.iteration,
            "max_iterations": opt.params.max_iterations,
            "completed": self.completed,
            "incumbent": None if incumbent is None else
                {"config": incumbent[0], "score": incumbent[1]},
            "recent_trials": list(self._trials[-RECENT_WINDOW:]),
            "knowledge": knowledge,
            "gamma": opt.params.gamma,
            "rho": opt.params.rho_init,
            "refit_iterations": list(opt.refit_iterations),
            "sampling_variance_series": variance_series,
        }

    def snapshot(self) -> dict[str, Any]:
        with self._lock:
            return self._snapshot

    def trials_from(self, start: int) -> list[dict[str, Any]]:
        with self._lock:
            return list(self._trials[start:])

    # -- live knowledge ----------------------------------------------------------

    def submit_knowledge(self, record: dict[str, Any]) -> None:
        """Validate one live interaction object and queue it for the next
        iteration boundary.  Raises InteractionError with field context."""
        if self.completed:
            raise RunCompleted()
        item = parse_interaction(record, self.optimizer.space, require_iteration=False)
        self.optimizer.mailbox.post(item)

    def clear_knowledge(self) -> None:
        if self.completed:
            raise RunCompleted()
        self.optimizer.mailbox.post(KnowledgeClear())


class RunCompleted(RuntimeError):
    """Raised when knowledge arrives after the run has finished."""


class _Handler(BaseHTTPRequestHandler):
    controller: RunController  # set by make_server

    def log_message(self, fmt: str, *args: Any) -> None:  # keep test output quiet
        pass

    def _send(self, status: int, payload: dict[str, Any]) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:
        self._send(204, {})

    def do_GET(self) -> None:
        url = urlparse(self.path)
        if url.path == "/status":
            self._send(200, self.controller.snapshot())
        elif url.path == "/trials":
            params = parse_qs(url.query)
            try:
                start = int(params.get("from", ["0"])[0])
            except ValueError:
                self._send(400, {"error": "'from' must be an integer"})
                return
            trials = self.controller.trials_from(max(start, 0))
            self._send(200, {"from": max(start, 0), "trials": trials,
                             "next": max(start, 0) + len(trials)})
        elif url.path == "/space":
            self._send(200, json.loads(emit_space(self.controller.optimizer.space)))
        else:
            self._send(404, {"error": f"unknown path {url.path}"})

    def do_POST(self) -> None:
        if urlparse(self.path).path != "/knowledge":
            self._send(404, {"error": "unknown path"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            record = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError as exc:
            self._send(400, {"error": f"body is not valid JSON: {exc}"})
            return
        try:
            self.controller.submit_knowledge(record)
        except RunCompleted:
            self._send(409, {"error": "run has completed"})
        except InteractionError as exc:
            self._send(400, {"error": str(exc)})
        else:
            self._send(202, {"status": "accepted", "effective": "next iteration"})

    def do_DELETE(self) -> None:
        if urlparse(self.path).path != "/knowledge":
            self._send(404, {"error": "unknown path"})
            return
        try:
            self.controller.clear_knowledge()
        except RunCompleted:
            self._send(409, {"error": "run has completed"})
        else:
            self._send(202, {"status": "cleared", "effective": "next iteration"})


def make_server(controller: RunController, port: int,
                host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """A threaded HTTP server bound to the controller (not yet serving)."""
    handler = type("BoundHandler", (_Handler,), {"controller": controller})
    return ThreadingHTTPServer((host, port), handler)


def serve_in_background(controller: RunController, port: int,
                        host: str = "127.0.0.1") -> ThreadingHTTPServer:
    server = make_server(controller, port, host)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
