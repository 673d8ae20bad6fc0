"""Logit and positional margins of limit transformers.

Query and key classes are ``(token, residue)`` pairs where the residue of
position ``i`` is ``i % delta``; such a position reads positional row
``(residue - 1) % delta``. Classes are flattened as ``(token - 1) * delta +
residue``.
"""
import math
import warnings
import torch

from ..core.params import check_fclass
from ..exceptions import ThresholdOverflowError, UnsupportedDepthError

__all__ = ['TIE_TOL', 'class_vectors', 'attention_matrix', 'logit_sets',
           'logit_margin', 'hardmax_threshold', 'positional_margin',
           'attention_regime', 'distinct_values']

# logits closer than this are treated as equal
TIE_TOL = 1e-12

# largest hardmax threshold representable exactly in float64
MAX_THRESHOLD_EXPONENT = 53


def require_depth(params, depth=1):
    if params.n_layers != depth:
        raise UnsupportedDepthError('expected a {}-layer model, got {} layers'
                                    .format(depth, params.n_layers))


def class_vectors(params):
    """``E_s + p`` for every (token, residue) class, shape ``(S*delta, d)``."""
    residues = torch.arange(params.delta)
    rows = (residues - 1) % params.delta
    vecs = params.embed[:, None, :] + params.pos[rows][None, :, :]
    return vecs.reshape(-1, params.d)


def attention_matrix(params, head=0):
    """Bilinear logits between query and key classes.

    Entry ``[(y, i), (z, j)]`` is the logit of a key of token ``z`` at
    residue ``j`` seen from a query of token ``y`` at residue ``i``.
    """
    require_depth(params, 1)
    vecs = class_vectors(params)
    kq = params.layers[0].heads[head].kq
    return vecs @ kq.T @ vecs.T


def logit_sets(params, head=0, include_far=True):
    """Attainable logits for each query class, shape ``(S*delta, K)``.

    Columns hold the local logits (key at offset ``k <= tau``, all tokens)
    and, with ``include_far``, the logits of keys beyond the window where
    phi vanishes.
    """
    S, D, tau = params.s_vocab, params.delta, params.tau
    A = attention_matrix(params, head).reshape(S, D, S, D)
    phi = params.layers[0].heads[head].phi
    cols = []
    for k in range(tau + 1):
        key_res = (torch.arange(D) - k) % D
        # local[y, c, z] = A[y, c, z, (c - k) % D]
        local = A[:, torch.arange(D), :, key_res]
        cols.append(local.permute(1, 0, 2) + phi[k])
    if include_far:
        cols.append(A.reshape(S, D, S * D))
    return torch.cat(cols, dim=-1).reshape(S * D, -1)


def distinct_values(values, tol=TIE_TOL):
    """Sorted values with near-ties (within ``tol``) collapsed."""
    out = []
    for v in sorted(float(v) for v in values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def _min_gap(values):
    vals = distinct_values(values)
    if len(vals) < 2:
        return math.inf
    return min(b - a for a, b in zip(vals, vals[1:]))


def logit_margin(params, include_far=True):
    """Smallest positive gap between attainable logits of a one-layer model.

    The minimum runs over heads and query classes. ``include_far`` adds the
    logits of keys outside the ``tau`` window, which compete for attention
    at every long input. This departs from the margin taken over offsets
    ``k = 0..tau`` alone: the extra logits can only shrink the margin, and
    ``include_far=False`` recovers the window-only value.
    """
    require_depth(params, 1)
    gamma = math.inf
    for h in range(len(params.layers[0].heads)):
        for row in logit_sets(params, h, include_far):
            gamma = min(gamma, _min_gap(row.tolist()))
    return gamma


def hardmax_threshold(params, p_bits, include_far=True):
    """Length from which finite-precision attention is a hardmax."""
    gamma = logit_margin(params, include_far)
    if math.isinf(gamma):
        return 1
    exponent = p_bits / gamma
    if exponent > MAX_THRESHOLD_EXPONENT:
        raise ThresholdOverflowError(
            'hardmax threshold 2^{:.3g} exceeds 2^{}; use a model with a '
            'larger logit margin'.format(exponent, MAX_THRESHOLD_EXPONENT))
    return math.ceil(2.0 ** exponent)


def positional_margin(params):
    """Gap between the two largest values of ``phi ∪ {1}``, minimized over
    first-layer heads."""
    check_fclass(params)
    margin = math.inf
    for head in params.layers[0].heads:
        vals = distinct_values(head.phi.tolist() + [1.])
        if len(vals) > 1:
            margin = min(margin, vals[-1] - vals[-2])
    if math.isinf(margin):
        warnings.warn('positional margin is undefined (every phi equals 1); '
                      'reporting +inf')
    return margin


def attention_regime(params, layer=0, head=0):
    """Infinite-precision regime of a head from its largest phi value.

    Returns ``'token-dominant'`` when every phi is below 1, ``'balanced'``
    when the largest equals 1 and ``'position-dominant'`` otherwise.
    """
    top = float(params.layers[layer].heads[head].phi.max())
    if abs(top - 1.) <= TIE_TOL:
        return 'balanced'
    return 'token-dominant' if top < 1. else 'position-dominant'
