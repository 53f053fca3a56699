"""Critical percolation on supercritical Galton-Watson trees.

Reproducible quenched environments, percolation runs, IIC sampling and the
closed-form limit laws they are compared against.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .offspring import (ModelConstants, OffspringSpec, Regime, c_alpha_candidates,  # noqa: E402
                        constants, make_spec, sample_offspring)
from .limit_laws import LimitLaw  # noqa: E402
from .tree_store import ROOT, NodeRef, TreeStore, WEstimate  # noqa: E402
from .percolation import (BatchResult, ClusterTrace, connector_diagnostic,  # noqa: E402
                          connector_oracle_annealed, iter_batches, run_annealed, run_batch,
                          run_cluster)
from .iic import (IICSample, WeightedFiniteTree, iic_consistency_check,  # noqa: E402
                  iic_measure_exact, sample_iic, sample_iic_batch)
from .csbp import path_alpha2, step_alpha2  # noqa: E402
from .estimators import (EstimatorSummary, binned_transition_estimate,  # noqa: E402
                         laplace_estimate, survival_estimate, wilson_interval)
