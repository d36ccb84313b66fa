"""LASSO-regularized two-layer ReLU networks: training, parameter recovery
checks and variable selection."""
from .net import DeepNet, TwoLayerNet, canonicalize, forward, forward_batch, forward_deep
from .train import FitResult, Grid, TrainConfig, fit, gradient, grid_search, penalized_loss
from .identify import MatchResult, brute_force_match, check_assumption1, match_networks
from .select import (ImportanceVector, SelectionReport, auc_score, cluster_select, importance,
                     roc_curve, threshold_select, topk_select)
from .synthgen import Dataset, FriedmanSpec, LinearSpec, PlantedSpec, gen_friedman, gen_linear, gen_planted
from .baselines import LinearFit, lasso_cd, linear_importance, omp

__version__ = "0.1.0"
