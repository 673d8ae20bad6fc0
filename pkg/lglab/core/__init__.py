from .params import (HeadParams, MlpParams, LayerParams, LTParams,
                     PrecisionMode, INFINITE, make_head, make_mlp, zero_mlp,
                     make_params, check_params, check_fclass, as_tokens)
from .forward import (embed, logits_row, attention_logit,
                      attention_distribution, forward, final_output)
from .serialization import (params_to_dict, params_from_dict, dumps_params,
                            loads_params, save_params, load_params)
from .random import random_params, random_grid_params
