"""Causal kinetic models: reaction networks compiled to ODEs by mass action,
interventions on differential equations, simulation, and invariance-based
discovery of parent sets."""

from .discovery import (BasisSpec, CandidateModel, FittedModel, Ranking, enumerate_candidates,
                        fit_candidate, invariance_score, predict_new_environment,
                        predictability_score, rank_models)
from .errors import (DatasetFormatError, DiscoveryError, IntegrationError, ModelError,
                     ParseError, SolvabilityError)
from .experiment import Dataset, Environment, export_csv, import_csv, run_experiment
from .interventions import (Clamp, Forcing, ReplaceOde, SetInitial, SetRate, SetTrajectory,
                            apply_intervention, apply_interventions, parse_directive)
from .model import Graph, KineticModel, build_kinetic_model, causal_graph, rhs_eval
from .modelio import read_model, read_static, write_model, write_static
from .reactions import (Reaction, ReactionNetwork, Species, compile_mass_action,
                        format_network, parse_network, set_rate_effect)
from .scm import (StaticAssignment, StaticScm, intervene_static, linear_scm, observe,
                  sample_stochastic, solve_deterministic)
from .simulate import (NoiseSpec, TimeGrid, Trajectory, add_measurement_noise, integrate_rk4,
                       simulate_sde)
from .terms import Rhs, Term, format_rhs, parse_rhs

__version__ = "0.1.0"
