"""Diffusion-scheduled denoising autoencoders (DDAE / DDAE-C) for tabular anomaly detection."""
from .data import Dataset, load_csv, make_split, standardize
from .metrics import aggregate_seeds, per_step_curve, pr_auc, roc_auc
from .pipeline import TrainConfig, TrainedModel, auto_batch_size, dump_latent, score, train
from .schedule import build_schedule, forward_diffuse, signal_strength

__version__ = "0.1.0"
