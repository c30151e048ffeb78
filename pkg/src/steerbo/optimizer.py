"""The optimization loop and its conditional-sampling selection policy.

Each iteration conditions the circuit surrogate on the incumbent score and
samples the next candidate from the resulting distribution over
hyperparameters; no acquisition function is optimized.  Active user
knowledge gates in through a Bernoulli draw whose probability decays
geometrically from the iteration the knowledge arrived, which lets the
search recover from misleading beliefs.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np
from scipy.special import erf

from .circuit import Circuit, GaussianLeaf, LeafNode, ProductNode
from .learning import LearnParams, ScoreTransform, build_trial_matrix, learn
from .objectives import Objective, ObjectiveError
from .space import KnowledgeClear, SearchSpace, SpaceCodec, UserKnowledge, sample_prior

logger = logging.getLogger(__name__)

# Extra conditional draws per iteration used only to log per-hyperparameter
# sampling variance (exploration diagnostic).
VARIANCE_PROBE_SAMPLES = 16


@dataclass(frozen=True)
class OptimizerParams:
    """Loop configuration; defaults follow the method's reference setup."""

    init_samples: int = 5
    refit_every: int = 20
    gamma: float = 0.9
    rho_init: float = 1.0
    n_conditions: int = 20
    b_samples: int = 1
    max_iterations: int = 200
    seed: int = 0
    learn: LearnParams = field(default_factory=LearnParams)

    def __post_init__(self) -> None:
        if self.init_samples < 1 or self.refit_every < 1:
            raise ValueError("init_samples and refit_every must be >= 1")
        if self.n_conditions < 1 or self.b_samples < 1:
            raise ValueError("n_conditions and b_samples must be >= 1")
        if not 0 < self.gamma <= 1 or not 0 < self.rho_init <= 1:
            raise ValueError("gamma and rho_init must be in (0, 1]")


@dataclass(frozen=True)
class Trial:
    iteration: int
    config: dict[str, Any]
    score: float | None
    cost: float
    used_knowledge: bool
    refit: bool
    failed: bool = False
    sampling_variance: dict[str, float] | None = None
    ei_bound: float | None = None


class TrialHistory:
    """Ordered trial record with the running incumbent under maximization."""

    def __init__(self) -> None:
        self.trials: list[Trial] = []
        self._best: tuple[dict[str, Any], float] | None = None

    def add(self, trial: Trial) -> None:
        if self.trials and trial.iteration <= self.trials[-1].iteration:
            raise ValueError("trial iterations must strictly increase")
        self.trials.append(trial)
        if not trial.failed and trial.score is not None:
            if self._best is None or trial.score > self._best[1]:
                self._best = (dict(trial.config), trial.score)

    @property
    def incumbent(self) -> tuple[dict[str, Any], float] | None:
        return self._best

    def successes(self) -> list[Trial]:
        return [t for t in self.trials if not t.failed]

    def __len__(self) -> int:
        return len(self.trials)


@dataclass
class DecayState:
    """Active belief plus the clock driving its Bernoulli usage gate."""

    knowledge: UserKnowledge | None = None
    received_at: int = 0
    rho: float = 1.0
    gamma: float = 0.9


def gate_probability(state: DecayState, current_iteration: int) -> float:
    """Probability that active knowledge is used at this iteration.

    Decays as gamma^t * rho where t counts iterations since the knowledge
    arrived; clamped into [0, 1].
    """
    if current_iteration < state.received_at:
        raise ValueError("gate queried before the knowledge was received")
    t = current_iteration - state.received_at
    return min(max(state.gamma**t * state.rho, 0.0), 1.0)


@dataclass
class Surrogate:
    """Learned circuit over hyperparameters and score, plus its codecs."""

    circuit: Circuit
    codec: SpaceCodec
    score_transform: ScoreTransform
    _cache: tuple[float, Circuit] | None = None

    def conditioned_at(self, f_star: float) -> Circuit:
        """Circuit over hyperparameters conditioned on the score at f_star."""
        if self._cache is not None and self._cache[0] == f_star:
            return self._cache[1]
        conditioned = self.circuit.condition_on_score(self.score_transform.encode(f_star))
        self._cache = (f_star, conditioned)
        return conditioned


def select_without_knowledge(surrogate: Surrogate, f_star: float,
                             rng: np.random.Generator) -> dict[str, Any]:
    """Sample the next configuration from the score-conditioned surrogate."""
    conditioned = surrogate.conditioned_at(f_star)
    draw = conditioned.sample({}, rng)
    return surrogate.codec.decode_config(draw)


def select_with_knowledge(surrogate: Surrogate, f_star: float,
                          knowledge: UserKnowledge, params: OptimizerParams,
                          rng: np.random.Generator) -> dict[str, Any]:
    """Sample a configuration that carries the user belief exactly.

    Draws n_conditions assignments from the belief; for each, samples
    b_samples configurations from the surrogate conditioned on both the
    assignment and the incumbent score and keeps the most likely one; the
    final candidate is a uniform pick among the survivors.  The believed
    hyperparameters keep their drawn values verbatim.
    """
    codec = surrogate.codec
    conditioned = surrogate.conditioned_at(f_star)
    survivors: list[tuple[dict[str, Any], dict[str, float]]] = []
    for _ in range(params.n_conditions):
        assignment = sample_prior(knowledge, codec.space, rng)
        evidence = {name: codec.encode_value(name, value)
                    for name, value in assignment.items()}
        draws = [conditioned.sample(evidence, rng) for _ in range(params.b_samples)]
        if len(draws) == 1:
            best = draws[0]
        else:
            best = max(draws, key=conditioned.log_density)
        survivors.append((assignment, best))
    assignment, internal = survivors[int(rng.integers(len(survivors)))]
    config = codec.decode_config(internal)
    config.update(assignment)
    return config


class KnowledgeMailbox:
    """Thread-safe hand-off of live belief updates to the loop boundary."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._pending: list[UserKnowledge | KnowledgeClear] = []

    def post(self, item: UserKnowledge | KnowledgeClear) -> None:
        with self._lock:
            self._pending.append(item)

    def drain(self) -> list[UserKnowledge | KnowledgeClear]:
        with self._lock:
            items, self._pending = self._pending, []
            return items


class Optimizer:
    """Sequential optimizer: uniform warm-up, periodic refits, conditional
    sampling with an optional decaying knowledge gate."""

    def __init__(self, objective: Objective, params: OptimizerParams,
                 space: SearchSpace | None = None):
        self.objective = objective
        self.params = params
        self.space = space if space is not None else objective.space
        self.codec = SpaceCodec(self.space)
        self.rng = np.random.default_rng(params.seed)
        self.history = TrialHistory()
        self.surrogate: Surrogate | None = None
        self.decay = DecayState(rho=params.rho_init, gamma=params.gamma)
        self.iteration = 0
        self.refit_iterations: list[int] = []
        self.mailbox = KnowledgeMailbox()

    # -- knowledge ----------------------------------------------------------

    def inject_knowledge(self, knowledge: UserKnowledge) -> None:
        """Activate a belief; replaces any previous one and resets the decay
        clock to the next iteration."""
        for name, entry in knowledge.entries.items():
            hp = self.space[name]
            if knowledge.kind == "dist":
                entry.validate_against(hp)
            else:
                hp.coerce(entry)
        self.decay = DecayState(knowledge=knowledge, received_at=self.iteration,
                                rho=self.params.rho_init, gamma=self.params.gamma)

    def clear_knowledge(self) -> None:
        self.decay = DecayState(knowledge=None, received_at=self.iteration,
                                rho=self.params.rho_init, gamma=self.params.gamma)

    def apply_pending_knowledge(self) -> list[UserKnowledge | KnowledgeClear]:
        """Apply mailbox items in arrival order (later ones supersede)."""
        items = self.mailbox.drain()
        for item in items:
            if isinstance(item, KnowledgeClear):
                self.clear_knowledge()
            else:
                self.inject_knowledge(item)
        return items

    # -- loop ---------------------------------------------------------------

    @property
    def incumbent(self) -> tuple[dict[str, Any], float] | None:
        return self.history.incumbent

    def _refit(self) -> None:
        successes = self.history.successes()
        configs = [t.config for t in successes]
        scores = [t.score for t in successes]
        matrix, transform = build_trial_matrix(configs, scores, self.codec)
        seed = int(np.random.SeedSequence(
            [self.params.seed & 0xFFFFFFFF, 0xF17, len(self.refit_iterations)]
        ).generate_state(1)[0])
        circuit = learn(matrix, replace(self.params.learn, seed=seed))
        self.surrogate = Surrogate(circuit=circuit, codec=self.codec,
                                   score_transform=transform)
        self.refit_iterations.append(self.iteration)
        self._warn_if_score_isolated(circuit)

    def _warn_if_score_isolated(self, circuit: Circuit) -> None:
        root = circuit.nodes[circuit.root]
        if isinstance(root, ProductNode) and any(
                circuit.scope(c) == frozenset((circuit.score_var,))
                for c in root.children):
            logger.warning(
                "learned surrogate models the score independently of every "
                "hyperparameter; conditioning on the score will not steer sampling")

    def _sampling_variance(self, conditioned: Circuit) -> dict[str, float]:
        probe = conditioned.sample_n({}, VARIANCE_PROBE_SAMPLES, self.rng)
        return {name: float(np.var(arr)) for name, arr in probe.items()}

    def step(self) -> Trial:
        """Run one iteration: choose a candidate, evaluate, record."""
        it = self.iteration
        params = self.params
        refit = False
        used = False
        variance = None
        ei_bound = None

        if it < params.init_samples or not self.history.successes():
            config = self.codec.sample_uniform(self.rng)
        else:
            if self.surrogate is None or (it - params.init_samples) % params.refit_every == 0:
                self._refit()
                refit = True
                ei_bound = self._ei_diagnostic()
            f_star = self.incumbent[1]
            if self.decay.knowledge is not None:
                p = gate_probability(self.decay, it)
                used = bool(self.rng.random() < p)
            if used:
                config = select_with_knowledge(self.surrogate, f_star,
                                               self.decay.knowledge, params, self.rng)
            else:
                config = select_without_knowledge(self.surrogate, f_star, self.rng)
            variance = self._sampling_variance(self.surrogate.conditioned_at(f_star))

        try:
            score, cost = self.objective.evaluate(config)
            failed = False
        except ObjectiveError as exc:
            logger.warning("objective evaluation failed at iteration %d: %s", it, exc)
            score, cost, failed = None, 0.0, True

        trial = Trial(iteration=it, config=config, score=score, cost=cost,
                      used_knowledge=used, refit=refit, failed=failed,
                      sampling_variance=variance, ei_bound=ei_bound)
        self.history.add(trial)
        self.iteration += 1
        return trial

    def run(self, iterations: int | None = None):
        """Yield trials until max_iterations (or `iterations`) are done."""
        limit = iterations if iterations is not None else self.params.max_iterations
        while self.iteration < limit:
            yield self.step()

    # -- diagnostics ----------------------------------------------------------

    def _ei_diagnostic(self) -> float | None:
        """Expected-improvement lower bound over continuous dimensions.

        Needs a known optimum on the objective (test fixtures provide one);
        logged with each refit, never used for selection.
        """
        if self.objective.known_optimum is None or self.incumbent is None:
            return None
        cont = [c.name for c in self.codec.columns if c.kind == "continuous"]
        if not cont:
            return None
        try:
            marginal = self.surrogate.circuit.marginal(set(cont))
            components, truncated = extract_induced_mixture(marginal)
            if truncated:
                return None
            mixture = [(w, np.array([leaves[v].mu for v in cont]),
                        np.array([leaves[v].sigma for v in cont]))
                       for w, leaves in components]
            theta_t = np.array([self.codec.encode_value(v, self.incumbent[0][v])
                                for v in cont])
            theta_opt = np.array([self.codec.encode_value(v, self.objective.known_optimum[v])
                                  for v in cont])
            return ei_lower_bound(mixture, theta_t, theta_opt, lipschitz=1.0)
        except Exception:  # diagnostic must never break the loop
            logger.debug("ei diagnostic failed", exc_info=True)
            return None


# ---------------------------------------------------------------------------
# Convergence diagnostics


def ei_lower_bound(components: list[tuple[float, np.ndarray, np.ndarray]],
                   theta_t_star: np.ndarray, theta_star: np.ndarray,
                   lipschitz: float) -> float:
    """Closed-form lower bound on per-iteration expected improvement.

    `components` are (weight, mean vector, diagonal deviation vector)
    triples of the surrogate's induced Gaussian mixture; `theta_t_star` is
    the best configuration so far and `theta_star` the optimum.
    """
    theta_t = np.asarray(theta_t_star, dtype=float)
    theta_o = np.asarray(theta_star, dtype=float)
    if theta_t.shape != theta_o.shape:
        raise ValueError("configuration vectors differ in dimension")
    weights = np.array([w for w, _, _ in components])
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-6:
        raise ValueError("component weights must be positive and sum to 1")
    total = 0.0
    for w, mu, sig in components:
        mu = np.asarray(mu, dtype=float)
        sig = np.asarray(sig, dtype=float)
        if mu.shape != theta_t.shape or sig.shape != theta_t.shape:
            raise ValueError("component dimensions do not match the configurations")
        if np.any(sig <= 0):
            raise ValueError("diagonal deviations must be positive")
        mass_t = float(np.prod(erf((theta_t - mu) / (sig * math.sqrt(2.0)))))
        mass_o = float(np.prod(erf((theta_o - mu) / (sig * math.sqrt(2.0)))))
        alpha = np.minimum(theta_t - mu, theta_o - mu)
        eps = float(np.linalg.norm(mu + alpha * sig - theta_o))
        total += w * (mass_t - mass_o + lipschitz * eps)
    return total


def extract_induced_mixture(circuit: Circuit, cap: int = 10_000,
                            ) -> tuple[list[tuple[float, dict[str, Any]]], bool]:
    """Flatten a circuit into its induced-tree mixture.

    Each induced tree keeps one child per sum node and all children of
    product nodes; it contributes (product of chosen sum weights, one leaf
    per variable).  Enumeration stops at `cap` trees, flagged as truncated.
    """
    truncated = False
    memo: dict[int, list[tuple[float, dict[str, Any]]]] = {}

    def expand(node_id: int) -> list[tuple[float, dict[str, Any]]]:
        nonlocal truncated
        if node_id in memo:
            return memo[node_id]
        node = circuit.nodes[node_id]
        if isinstance(node, LeafNode):
            result = [(1.0, {node.var: node.dist})]
        elif isinstance(node, ProductNode):
            result = [(1.0, {})]
            for child in node.children:
                combined = []
                for w0, leaves0 in result:
                    for w1, leaves1 in expand(child):
                        combined.append((w0 * w1, {**leaves0, **leaves1}))
                        if len(combined) >= cap:
                            truncated = True
                            break
                    if truncated and len(combined) >= cap:
                        break
                result = combined
        else:
            result = []
            for weight, child in zip(node.weights, node.children):
                for w1, leaves1 in expand(child):
                    result.append((weight * w1, leaves1))
                    if len(result) >= cap:
                        truncated = True
                        break
                if truncated and len(result) >= cap:
                    break
        memo[node_id] = result
        return result

    return expand(circuit.root), truncated


def random_search(objective: Objective, iterations: int, seed: int,
                  space: SearchSpace | None = None) -> TrialHistory:
    """Uniform-sampling baseline sharing the optimizer's initial prior."""
    codec = SpaceCodec(space if space is not None else objective.space)
    rng = np.random.default_rng(seed)
    history = TrialHistory()
    for it in range(iterations):
        config = codec.sample_uniform(rng)
        try:
            score, cost = objective.evaluate(config)
            failed = False
        except ObjectiveError:
            score, cost, failed = None, 0.0, True
        history.add(Trial(iteration=it, config=config, score=score, cost=cost,
                          used_knowledge=False, refit=False, failed=failed))
    return history
