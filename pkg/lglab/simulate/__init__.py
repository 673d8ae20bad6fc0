from .report import SimReport, measure_discrepancy, report_to_dict
from .counting import (AttentionSets, token_counts, attention_sets,
                       hard_forward, ratio_rounding, bulk_check, dirichlet_seq)
from .joint import build_joint_sim, find_filler
from .suffix import suffix_sim, markov_subsample, best_markov_sim
