"""Continual-learning engine and experiment harness for class-incremental protocols."""

from .core import GradientRecord, ParamTensor, cross_entropy_soft, sgd_step_regularized, softmax
from .datasets import LabeledDataset, gen_synthetic, load_csv, load_idx, load_idx_pairs
from .diagnostics import emit_reports, saturation_alarm, weight_change
from .errors import (ConfigError, ContractError, FormatError, OvershootError,
                     TrainingDiverged)
from .network import (InitPolicy, ModelSnapshot, Network, TrainPlan, backward,
                      expand_head, forward, init_network, predict_proba, train_batch)
from .scenario import (AccuracyMatrix, ScenarioSpec, TrainingBatch, backward_transfer,
                       evaluate, run_mt, run_sit, split_nc)
from .strategies import (Ar1, ConsolidatedHead, Cumulative, Cwr, CwrPlus, Ewc,
                         ImportanceState, Lwf, LwfState, Naive, Si, SiTrajectory,
                         STRATEGY_IDS, cwr_consolidate, cwrplus_consolidate,
                         ewc_consolidate, ewc_fisher_diagonal, lwf_capture, lwf_fuse,
                         lwf_lambda, run_strategy_batch, si_batch_importance,
                         si_consolidate, si_observe_step)

__version__ = "0.1.0"
