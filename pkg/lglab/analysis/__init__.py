from .linalg import spectral_norm, vector_norm
from .margins import (TIE_TOL, class_vectors, attention_matrix, logit_sets,
                      logit_margin, hardmax_threshold, positional_margin,
                      attention_regime)
from .constants import (MarginReport, lipschitz_constants, complexity,
                        mlp_bounds, analyze)
