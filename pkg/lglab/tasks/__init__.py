from .specs import (SimpleTask, ModPTask, KGram, check_task, task_name,
                    task_param, make_task, n_symbols, out_dim, to_ids)
from .generators import (gen_simple, target_simple, gen_modp, target_modp,
                         gen_kgram, target_kgram, generate, target,
                         sample_batch)
from .constructions import (construct_modp_lt, construct_simple_lt,
                            construct_kgram_lt, sin_interpolant,
                            kgram_boundary_alias)
