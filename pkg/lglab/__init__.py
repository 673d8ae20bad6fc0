from .core import (LTParams, PrecisionMode, INFINITE, make_params, forward,
                   final_output, load_params, save_params)
from .analysis import analyze, logit_margin, hardmax_threshold, complexity
from .simulate import build_joint_sim, suffix_sim, best_markov_sim
from .tasks import SimpleTask, ModPTask, KGram
from .train import TrainConfig, ArchConfig, train, eval_curve, sweep

__all__ = ['LTParams', 'PrecisionMode', 'INFINITE', 'make_params', 'forward',
           'final_output', 'load_params', 'save_params', 'analyze',
           'logit_margin', 'hardmax_threshold', 'complexity',
           'build_joint_sim', 'suffix_sim', 'best_markov_sim', 'SimpleTask',
           'ModPTask', 'KGram', 'TrainConfig', 'ArchConfig', 'train',
           'eval_curve', 'sweep']

__version__ = "0.1.0"
