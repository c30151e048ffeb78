"""steerbo: steerable Bayesian hyperparameter optimization.

A circuit-based surrogate models the joint distribution of hyperparameters
and scores; candidates come from conditional sampling on the incumbent
score, and a human can inject point values or priors into a running
optimization, with geometric decay for recovering from bad advice.
"""

from .circuit import (CategoricalLeaf, Circuit, CircuitBuilder, CircuitError,
                      GaussianLeaf, LeafNode, ProductNode, SumNode, VarMeta)
from .learning import (DataMatrix, LearnParams, ScoreTransform,
                       build_trial_matrix, fit_leaf, learn, rdc,
                       split_instances, split_variables)
from .objectives import (Objective, ObjectiveError, TabularObjective,
                         ExternalCommandObjective, branin, builtin_objective,
                         mixed_synthetic)
from .optimizer import (DecayState, Optimizer, OptimizerParams, Surrogate,
                        Trial, TrialHistory, ei_lower_bound,
                        extract_induced_mixture, gate_probability,
                        random_search, select_with_knowledge,
                        select_without_knowledge)
from .space import (DistributionSpec, HyperparameterDef, InteractionError,
                    KnowledgeClear, SearchSpace, SpaceCodec, SpaceError,
                    UserKnowledge, emit_space, parse_interaction,
                    parse_interactions, parse_space, sample_prior)

__version__ = "0.1.0"
