"""Command-line runner: execute optimizations and render reports."""
from __future__ import annotations

import dataclasses
import json
import sys

import click

from .objectives import (ExternalCommandObjective, Objective, ObjectiveError,
                         TabularObjective, builtin_objective)
from .optimizer import Optimizer, OptimizerParams
from .report import render_report
from .server import RunController, serve_in_background
from .space import InteractionError, SpaceError, emit_space, parse_interactions, parse_space
from .trial_log import TrialLogWriter


@click.group()
def main() -> None:
    """Steerable Bayesian hyperparameter optimization."""


def _resolve_objective(selector: str, space_path: str | None, noise_sigma: float,
                       seed: int) -> Objective:
    space = None
    if space_path is not None:
        with open(space_path) as fh:
            space = parse_space(fh.read())
    if selector in ("branin", "mixed"):
        obj = builtin_objective(selector, noise_sigma=noise_sigma, seed=seed)
        if space is not None:
            obj.space = space
        return obj
    if selector.startswith("tabular:"):
        if space is None:
            raise click.ClickException("tabular objectives need --space")
        table = TabularObjective.from_file(selector[len("tabular:"):], space)
        obj = table.as_objective()
    elif selector.startswith("command:"):
        if space is None:
            raise click.ClickException("command objectives need --space")
        obj = ExternalCommandObjective(name="command", space=space,
                                       template=selector[len("command:"):]).as_objective()
    else:
        raise click.ClickException(
            f"unknown objective {selector!r}; use branin, mixed, tabular:PATH, or command:TEMPLATE")
    obj.noise_sigma = noise_sigma
    obj.noise_seed = seed
    return obj


def _negated(obj: Objective) -> Objective:
    inner = obj.evaluate

    def evaluate(config):
        score, cost = inner(config)
        return -score, cost

    return Objective(name=f"-{obj.name}", space=obj.space, eval_fn=evaluate,
                     known_optimum=obj.known_optimum,
                     known_best_score=None if obj.known_best_score is None
                     else -obj.known_best_score)


@main.command()
@click.option("--space", "space_path", type=click.Path(exists=True), default=None,
              help="Space file (JSON); defaults to the objective's own space.")
@click.option("--objective", "selector", default="branin", show_default=True,
              help="branin | mixed | tabular:PATH | command:TEMPLATE")
@click.option("--iterations", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--interactions", "interactions_path", type=click.Path(exists=True),
              default=None, help="Scripted interaction file (JSON array).")
@click.option("--serve", "port", type=int, default=None,
              help="Serve the control API on this port while running.")
@click.option("--gamma", type=float, default=0.9, show_default=True,
              help="Knowledge gate decay per iteration.")
@click.option("--rho", type=float, default=1.0, show_default=True,
              help="Initial knowledge gate probability.")
@click.option("--refit-every", type=int, default=20, show_default=True)
@click.option("--init-samples", type=int, default=5, show_default=True)
@click.option("--n-conditions", type=int, default=20, show_default=True)
@click.option("--b-samples", type=int, default=1, show_default=True)
@click.option("--minimize", is_flag=True, help="Treat objective scores as losses.")
@click.option("--log", "log_path", type=click.Path(), default="steerbo_trials.jsonl",
              show_default=True)
@click.option("--noise-sigma", type=float, default=0.0, show_default=True,
              help="Observation noise added to synthetic objectives.")
def run(space_path, selector, iterations, seed, interactions_path, port, gamma, rho,
        refit_every, init_samples, n_conditions, b_samples, minimize, log_path,
        noise_sigma) -> None:
    """Run one optimization to completion, writing the trial log."""
    if port is not None and not 1 <= port <= 65535:
        raise click.ClickException(f"--serve port {port} outside [1, 65535]")
    try:
        objective = _resolve_objective(selector, space_path, noise_sigma, seed)
        if minimize:
            objective = _negated(objective)
        params = OptimizerParams(init_samples=init_samples, refit_every=refit_every,
                                 gamma=gamma, rho_init=rho, n_conditions=n_conditions,
                                 b_samples=b_samples, max_iterations=iterations,
                                 seed=seed)
        optimizer = Optimizer(objective, params)
        interactions = None
        if interactions_path is not None:
            with open(interactions_path) as fh:
                interactions = parse_interactions(fh.read(), optimizer.space)
    except (SpaceError, InteractionError, ObjectiveError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc

    with open(log_path, "w") as fh:
        writer = TrialLogWriter(stream=fh)
        writer.write_header(
            space_doc=json.loads(emit_space(optimizer.space)),
            objective=objective.name,
            params={k: v for k, v in dataclasses.asdict(params).items() if k != "learn"},
            seed=seed)
        controller = RunController(optimizer, interactions, writer)
        server = serve_in_background(controller, port) if port is not None else None
        try:
            controller.run()
        finally:
            if server is not None:
                server.shutdown()
    incumbent = optimizer.incumbent
    if incumbent is not None:
        click.echo(f"best score {incumbent[1]:.6g} at {incumbent[0]}")
    click.echo(f"trial log written to {log_path}")


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), default="report", show_default=True)
def report(log_path, out_dir) -> None:
    """Render figures and a CSV summary from a trial log."""
    try:
        written = render_report(log_path, out_dir)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    for path in written:
        click.echo(path)


if __name__ == "__main__":
    main()
