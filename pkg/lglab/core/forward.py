import math
import torch

from .params import ACTIVATIONS, DTYPE, INFINITE, as_tokens
from ..exceptions import NumericFaultError, PreconditionError

__all__ = ['embed', 'logits_row', 'attention_logit', 'attention_distribution',
           'forward', 'final_output']

# score-matrix entries evaluated per attention chunk
CHUNK_ELEMENTS = 1 << 22

# terms within this relative distance of 2^-p are treated as rounded away
ROUND_SLACK = 1e-9


def _rounder(mode):
    if mode.is_finite and mode.strict_rounding:
        cutoff = mode.cutoff
        return lambda t: t.masked_fill(t.abs() <= cutoff, 0.)
    return lambda t: t


def _identity(t):
    return t


def _as_inputs(layer_inputs):
    if isinstance(layer_inputs, (list, tuple)):
        return torch.stack([torch.as_tensor(y, dtype=DTYPE) for y in layer_inputs])
    return torch.as_tensor(layer_inputs, dtype=DTYPE)


def embed(params, x, mode=INFINITE):
    """Layer-0 vectors ``E_{x_i} + p_i`` for every position."""
    x = as_tokens(x, params.s_vocab)
    rows = torch.arange(x.numel()) % params.delta
    return _rounder(mode)(params.embed[x - 1] + params.pos[rows])


def _head_logits(head, mode, y, rows, rnd=_identity):
    """Logits of query positions ``rows`` (1-based) against keys 1..n.

    Entries with key position after the query are -inf.
    """
    n = y.shape[0]
    tau = head.phi.numel() - 1
    q = rnd(y[rows - 1] @ head.kq.T)
    scores = rnd(q @ y.T)
    cols = torch.arange(1, n + 1)
    offset = rows[:, None] - cols[None, :]
    local = (offset >= 0) & (offset <= tau)
    phi = torch.where(local, head.phi[offset.clamp(0, tau)],
                      scores.new_zeros(()))
    if mode.is_finite:
        logits = scores + phi
    else:
        logits = scores + rows.to(DTYPE).log()[:, None] * phi
    return logits.masked_fill(offset < 0, -math.inf)


def _weights(logits, mode, seq_len, rnd=_identity):
    if not mode.is_finite:
        return rnd(torch.softmax(logits, dim=-1))
    causal = torch.isfinite(logits)
    z = logits.masked_fill(~causal, 0.) * math.log(seq_len)
    z = z - z.masked_fill(~causal, -math.inf).max(dim=-1, keepdim=True).values
    w = torch.exp(z).masked_fill(~causal, 0.)
    w = w.masked_fill(w <= mode.cutoff * (1 + ROUND_SLACK), 0.)
    total = w.sum(dim=-1, keepdim=True)
    assert (total > 0).all(), 'maximal attention term was rounded away'
    return rnd(w / total)


def _attend(head, mode, y, rows, seq_len, rnd):
    """Head output at query positions ``rows``."""
    values = rnd(y @ head.v.T)
    out = y.new_empty(rows.numel(), y.shape[1])
    chunk = max(1, CHUNK_ELEMENTS // y.shape[0])
    for start in range(0, rows.numel(), chunk):
        block = rows[start:start + chunk]
        keys = int(block.max())
        logits = _head_logits(head, mode, y[:keys], block, rnd)
        w = _weights(logits, mode, seq_len, rnd)
        out[start:start + chunk] = rnd(w @ values[:keys])
    return out


def _mlp(mlp, Y, rnd):
    act = ACTIVATIONS[mlp.activation]
    hidden = rnd(act(rnd(Y @ mlp.a.T + mlp.bias)))
    return rnd(hidden @ mlp.b.T)


def _check_layer(params, l, h, i, n):
    if not 0 <= l < params.n_layers:
        raise PreconditionError('layer index {} out of range'.format(l))
    if not 0 <= h < len(params.layers[l].heads):
        raise PreconditionError('head index {} out of range'.format(h))
    if not 1 <= i <= n:
        raise PreconditionError('position {} out of range 1..{}'.format(i, n))


def logits_row(params, mode, layer_inputs, l, h, i):
    """Logits ``a_{i,j}`` for ``j = 1..i`` of head ``h`` in layer ``l``.

    Layers and heads are 0-based list indices; positions are 1-based.
    """
    y = _as_inputs(layer_inputs)
    _check_layer(params, l, h, i, y.shape[0])
    head = params.layers[l].heads[h]
    return _head_logits(head, mode, y[:i], torch.tensor([i]))[0]


def attention_logit(params, mode, layer_inputs, l, h, i, j):
    y = _as_inputs(layer_inputs)
    _check_layer(params, l, h, i, y.shape[0])
    if not 1 <= j <= i:
        raise PreconditionError('key position {} not in 1..{}'.format(j, i))
    head = params.layers[l].heads[h]
    value = float(y[j - 1] @ (head.kq @ y[i - 1]))
    t = i - j
    phi = float(head.phi[t]) if t < head.phi.numel() else 0.
    if mode.is_finite:
        return value + phi
    return value + math.log(i) * phi


def attention_distribution(params, mode, layer_inputs, l, h, i, seq_len):
    """Attention weights of query ``i`` over keys ``1..i``."""
    if seq_len < i:
        raise PreconditionError('seq_len {} is shorter than position {}'
                                .format(seq_len, i))
    logits = logits_row(params, mode, layer_inputs, l, h, i)
    return _weights(logits[None], mode, seq_len)[0]


def forward(params, mode, x, return_hidden=False, last_only=False):
    """Evaluate a limit transformer on ``x``.

    Parameters
    ----------
    params : LTParams
        Model weights.
    mode : PrecisionMode
        Attention semantics.
    x : sequence of int
        Token ids in ``1..params.s_vocab``.
    return_hidden : bool
        Also return the list of residual streams ``y^{(0)}..y^{(L)}``.
    last_only : bool
        Evaluate the last layer at the final position only. The output is
        then a single o-vector and the last hidden entry has one row.

    Returns
    -------
    out : Tensor
        ``(|x|, o)`` outputs, or ``(o,)`` when ``last_only``.
    hidden : list of Tensor
        Only when ``return_hidden``.
    """
    x = as_tokens(x, params.s_vocab)
    n = x.numel()
    rnd = _rounder(mode)
    y = embed(params, x, mode)
    hidden = [y]
    positions = torch.arange(1, n + 1)
    for l, layer in enumerate(params.layers):
        if last_only and l == params.n_layers - 1:
            rows = positions[-1:]
        else:
            rows = positions
        Y = y[rows - 1]
        for head in layer.heads:
            Y = rnd(Y + _attend(head, mode, y, rows, n, rnd))
        y_next = rnd(Y + _mlp(layer.mlp, Y, rnd))
        bad = ~torch.isfinite(y_next).all(dim=-1)
        if bad.any():
            raise NumericFaultError(l, int(rows[bad.nonzero()[0, 0]]))
        y = y_next
        hidden.append(y)
    out = rnd(y @ params.unembed.T)
    if last_only:
        out = out[-1]
    if return_hidden:
        return out, hidden
    return out


def final_output(params, mode, x):
    """Output at the final position of ``x``."""
    return forward(params, mode, x, last_only=True)
