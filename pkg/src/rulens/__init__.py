"""Rule-ensemble predictive learning with sparse fitting and interaction diagnostics."""

__version__ = "0.1.0"

from .data import (BINARY, CATEGORICAL, NUMERIC, REGRESSION, Column, Dataset, WinsorLimits,
                   compute_winsor_limits, load_csv, quantile, winsorize)
from .losses import HUBER, RAMP, SQUARED, LossSpec, constant_minimizer, eval_loss, huber_delta, negative_gradient
from .tree import SplitSpec, TreeGrowthConfig, TreeNode, best_split, grow_tree, predict_tree, sample_tree_size
from .ensemble import EnsembleConfig, TreeEnsemble, default_eta, generate_ensemble, memory_predict
from .rules import Basis, Conjunct, LinearTerm, Rule, build_basis, compute_support, eval_rule, extract_rules
from .sparsefit import (EnsembleModel, FitConfig, PathPoint, assemble_model, fit_path, lambda_max,
                        load_model, model_from_json, model_to_json, predict, save_model, select_lambda)
from .pipeline import PipelineConfig, fit_rule_ensemble
from .interpret import (ImportanceReport, InteractionBudget, InteractionReport, StatRequest,
                        excess_statistics, fit_additive_reference, global_term_importance,
                        h_pair, h_total, h_triple, local_term_importance, null_distribution,
                        partial_dependence, region_importance, variable_importance)
from .bench import (SynthSpec, gen_discrete_target, gen_linear_plus_bumps, metric_aae,
                    metric_comparative, metric_error_rate, metric_target_error, threshold_binary)
