"""Imbalance-aware adaptive mini-batch selection for multi-label training."""

from .data import Dataset, kfold, load_arff, load_csv, make_synthetic, stats
from .imbalance import ImbalanceProfile, build_profile
from .metrics import MetricReport, evaluate, wilcoxon_signed_rank
from .selector import STRATEGIES, SelectionState, draw_batch, draw_chain_batch, init_state
from .trainer import Split, TrainConfig, Trainer, train

__version__ = "0.1.0"
