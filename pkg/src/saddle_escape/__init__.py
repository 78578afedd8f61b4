"""Saddle-point escape optimizers, test problems and the experiment harness."""

from .baselines import run_pgd
from .eigs import LanczosResult, lanczos_min_eig, sample_ball, sample_sphere
from .oracle import NoisyGradModel, Problem, make_problem, standard_init, stochastic_grad
from .probe import ProbeParams, probe_params, psd_probe_step, run_psd_probe
from .psd import (EpisodeRecord, PsdConfig, RunTrace, config_for, derive_params, escape_episode,
                  run_psd, sosp_check)
from .psgd import PsgdConfig, batch_size, make_psgd_config, run_psgd
from .stats import StatsSummary, bootstrap_median_ci, wilcoxon_signed_rank

__version__ = "0.1.0"
