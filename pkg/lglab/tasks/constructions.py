"""Explicit limit transformers realizing the synthetic tasks.

Infinite logits are replaced by a finite scale ``beta``; outputs approach
the targets as ``beta`` grows, with saturation error of order
``|x| exp(-beta)``. All constructions read 1-based token ids, so a task
symbol ``s`` is fed as ``s + 1``.
"""
import math
import numpy as np
import torch

from ..core.params import DTYPE, make_head, make_mlp, make_params, zero_mlp
from ..exceptions import PreconditionError

__all__ = ['construct_modp_lt', 'construct_simple_lt', 'construct_kgram_lt',
           'sin_interpolant', 'kgram_boundary_alias']


def _eye(d):
    return torch.eye(d, dtype=DTYPE)


def _outer(u, v):
    return torch.outer(u, v)


def _check_beta(beta):
    if not 0 < beta < math.inf:
        raise PreconditionError('beta must be positive and finite, got {}'
                                .format(beta))


def construct_modp_lt(period, k, beta=50.):
    """One-head model averaging the tokens at positions ``t = k (mod period)``.

    Coordinates: two token directions, a constant direction, one direction
    per residue and an output coordinate.
    """
    if period < 2 or not 0 <= k < period:
        raise PreconditionError('need period >= 2 and 0 <= k < period')
    _check_beta(beta)
    d = period + 4
    e = _eye(d)
    tok0, tok1, one, out = 0, 1, 2, period + 3
    embed = torch.stack([e[tok0] + e[one], e[tok1] + e[one]])
    pos = e[3:3 + period]
    kq = beta * _outer(e[3 + (k - 1) % period], e[one])
    v = _outer(e[out], e[tok1])
    head = make_head(kq, v, torch.zeros(1))
    return make_params(2, d, period, 0, embed, pos, [([head], zero_mlp(d))],
                       e[out][None], meta={'task': 'modp'})


def sin_interpolant(omega, eps_mlp):
    """Knots and relu coefficients of a piecewise-linear ``sin(omega z)``.

    Returns ``(knots, const, coefs)`` with ``N + 1`` knots on ``[-1, 1]``
    and ``N + 1`` coefficients multiplying ``relu(z - knot_j)`` for the
    first ``N`` knots and ``relu(z - 1)``.
    """
    if not math.isfinite(omega):
        raise PreconditionError('omega must be finite')
    if not eps_mlp > 0:
        raise PreconditionError('eps_mlp must be positive')
    n = max(1, math.ceil(omega ** 2 / (2 * eps_mlp)))
    knots = np.linspace(-1., 1., n + 1)
    values = np.sin(omega * knots)
    slopes = np.diff(values) / np.diff(knots)
    # slope changes at interior knots, then flatten beyond 1
    coefs = np.concatenate([slopes[:1], np.diff(slopes), -slopes[-1:]])
    return knots, values[0], coefs


def construct_simple_lt(omega, eps_mlp, beta=50.):
    """One-head model with a relu MLP computing ``sin(omega (c0 - c1)/(c0 + c1))``.

    The head attends to symbols 0 and 1 and averages a signed coordinate
    (+1 for symbol 0, -1 for symbol 1); the MLP interpolates ``sin`` on
    ``[-1, 1]`` and saturates outside it.
    """
    _check_beta(beta)
    knots, const, coefs = sin_interpolant(omega, eps_mlp)
    d = 5
    e = _eye(d)
    is01, one, sgn, z, out = range(d)
    embed = torch.stack([e[is01] + e[one] + e[sgn],
                         e[is01] + e[one] - e[sgn],
                         e[one]])
    head = make_head(beta * _outer(e[is01], e[one]), _outer(e[z], e[sgn]),
                     torch.zeros(1))
    n = knots.size - 1
    width = n + 2
    a = torch.zeros(width, d, dtype=DTYPE)
    a[1:, z] = 1.
    bias = torch.zeros(width, dtype=DTYPE)
    bias[0] = 1.
    bias[1:n + 1] = -torch.from_numpy(knots[:-1])
    bias[n + 1] = -1.
    b = torch.zeros(d, width, dtype=DTYPE)
    b[out, 0] = const
    b[out, 1:] = torch.from_numpy(coefs)
    mlp = make_mlp(a, bias, b, 'relu')
    return make_params(3, d, 1, 0, embed, torch.zeros(1, d), [([head], mlp)],
                       e[out][None],
                       meta={'task': 'simple', 'omega': float(omega)})


def construct_kgram_lt(s_vocab, k, beta=30., phi_copy=None):
    """Two-layer induction model for the in-context k-gram.

    The residual stream holds ``k + 2`` blocks of size ``s_vocab``: block 0
    is the current token, block ``h`` (``1 <= h <= k``) the token ``h``
    positions back, copied by first-layer head ``h`` through its positional
    bias ``phi_copy`` (default ``beta``), and the last block the second
    layer's output. The second layer matches key block ``h`` with query
    block ``h - 1`` and averages the keys' current tokens.
    """
    if k < 1 or s_vocab < 2:
        raise PreconditionError('need k >= 1 and s_vocab >= 2')
    _check_beta(beta)
    phi_copy = beta if phi_copy is None else phi_copy
    S = s_vocab
    d = (k + 2) * S
    e = _eye(d)

    def block(b):
        return slice(b * S, (b + 1) * S)

    embed = e[block(0)]
    heads1 = []
    for h in range(1, k + 1):
        v = torch.zeros(d, d, dtype=DTYPE)
        v[block(h), block(0)] = _eye(S)
        phi = torch.zeros(k + 1, dtype=DTYPE)
        phi[h] = phi_copy
        heads1.append(make_head(torch.zeros(d, d), v, phi))
    kq = torch.zeros(d, d, dtype=DTYPE)
    for h in range(1, k + 1):
        # rows of kq index key coordinates, columns query coordinates
        kq[block(h), block(h - 1)] = beta * _eye(S)
    v2 = torch.zeros(d, d, dtype=DTYPE)
    v2[block(k + 1), block(0)] = _eye(S)
    head2 = make_head(kq, v2, torch.zeros(k + 1))
    return make_params(S, d, 1, k, embed, torch.zeros(1, d),
                       [(heads1, zero_mlp(d)), ([head2], zero_mlp(d))],
                       e[block(k + 1)], meta={'task': 'kgram'})


def kgram_boundary_alias(x, k, slack=0.25):
    """Whether an early key spoils :func:`construct_kgram_lt` on ``x``.

    Keys ``t <= k`` have fewer than ``k`` predecessors; their copy blocks
    hold averages over ``x_1..x_t`` instead of a window. Returns True when
    such a key scores within ``slack`` (in units of ``beta``) of a full
    suffix match. ``x`` holds 0-based symbols.
    """
    x = np.asarray(torch.as_tensor(x).reshape(-1), dtype=np.int64)
    T = x.size
    for t in range(1, min(k, T) + 1):
        score = 0.
        for h in range(1, k + 1):
            query = x[T - h]
            if t - h >= 1:
                score += float(x[t - h - 1] == query)
            else:
                score += float(np.mean(x[:t] == query))
        if score >= k - slack:
            return True
    return False
