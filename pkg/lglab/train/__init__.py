from .config import (ArchConfig, TrainConfig, PE_KINDS, default_arch,
                     default_config)
from .model import LGTransformer, init_model, to_checkpoint, from_checkpoint
from .trainer import (CURVE_HEADER, min_train_len, loss_and_grad, train,
                      eval_curve, attention_profile, write_curve_csv)
from .sweep import max_workers, sweep_jobs, run_job, sweep
