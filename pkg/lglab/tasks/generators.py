"""Sequence generators and ground-truth targets.

Generators are deterministic functions of their arguments and the state of
the ``numpy.random.Generator`` passed as ``rng``. Sequences are 1-D long
tensors of 0-based symbols; batches are ``(batch, length)`` tensors.
"""
import numpy as np
import torch
from numpy.lib.stride_tricks import sliding_window_view

from .specs import KGram, ModPTask, SimpleTask, check_task, out_dim
from ..exceptions import PreconditionError, UndefinedTargetError
from ..rng import make_rng

__all__ = ['gen_simple', 'target_simple', 'gen_modp', 'target_modp',
           'gen_kgram', 'target_kgram', 'generate', 'target', 'sample_batch']


def _symbols(x):
    return np.asarray(torch.as_tensor(x).reshape(-1), dtype=np.int64)


def _check_length(T, minimum=1):
    if T < minimum:
        raise PreconditionError('length must be at least {}, got {}'
                                .format(minimum, T))


# ---------------------------------------------------------------------------
#   simple task: sin(omega * (c0 - c1) / (c0 + c1)) over symbols {0, 1, 2}
# ---------------------------------------------------------------------------

def _simple_batch(batch, T, rng):
    p = rng.dirichlet(np.ones(3), size=batch)
    x = np.empty((batch, T), dtype=np.int64)
    todo = np.arange(batch)
    while todo.size:
        u = rng.random((todo.size, T))
        draw = (u[:, :, None] >= np.cumsum(p[todo], axis=1)[:, None, :2]).sum(-1)
        x[todo] = draw
        # resample sequences without any 0 or 1
        todo = todo[(draw == 2).all(axis=1)]
    return x, p


def gen_simple(T, rng, return_p=False):
    _check_length(T)
    x, p = _simple_batch(1, T, make_rng(rng))
    x = torch.from_numpy(x[0])
    return (x, torch.from_numpy(p[0])) if return_p else x


def _simple_targets(x, omega):
    c0 = (x == 0).sum(-1)
    c1 = (x == 1).sum(-1)
    if (c0 + c1 == 0).any():
        raise UndefinedTargetError('sequence contains no 0 or 1 symbol')
    return np.sin(omega * (c0 - c1) / (c0 + c1))


def target_simple(x, omega):
    return float(_simple_targets(_symbols(x), omega))


# ---------------------------------------------------------------------------
#   mod-p task: mean of x_t over positions t = k (mod p)
# ---------------------------------------------------------------------------

def _modp_batch(batch, T, period, rng):
    q = rng.random((batch, period))
    residues = np.arange(1, T + 1) % period
    x = (rng.random((batch, T)) < q[:, residues]).astype(np.int64)
    return x, q


def gen_modp(T, period, rng, return_q=False):
    _check_length(T)
    x, q = _modp_batch(1, T, period, make_rng(rng))
    x = torch.from_numpy(x[0])
    return (x, torch.from_numpy(q[0])) if return_q else x


def _modp_targets(x, period, k):
    mask = np.arange(1, x.shape[-1] + 1) % period == k
    if not mask.any():
        raise UndefinedTargetError('no position is congruent to {} mod {}'
                                   .format(k, period))
    return x[..., mask].mean(-1)


def target_modp(x, period, k):
    return float(_modp_targets(_symbols(x), period, k))


# ---------------------------------------------------------------------------
#   in-context k-gram: next-symbol distribution after the final k-suffix
# ---------------------------------------------------------------------------

def _next_counts(x, k, s_vocab):
    """Counts of symbols following each earlier occurrence of the suffix."""
    windows = sliding_window_view(x[:-1], k)
    match = (windows == x[-k:]).all(axis=1)
    return np.bincount(x[k:][match], minlength=s_vocab)


def _kgram_batch(batch, T, s_vocab, k, rng):
    # one transition table per sequence, rows uniform on the simplex
    pi = rng.dirichlet(np.ones(s_vocab), size=(batch, s_vocab ** k))
    cdf = np.cumsum(pi, axis=-1)
    x = np.empty((batch, T), dtype=np.int64)
    x[:, :k] = rng.integers(s_vocab, size=(batch, k))
    rows = np.arange(batch)
    weights = s_vocab ** np.arange(k - 1, -1, -1)
    for t in range(k, T):
        context = x[:, t - k:t] @ weights
        u = rng.random(batch)
        nxt = (u[:, None] >= cdf[rows, context, :-1]).sum(-1)
        x[:, t] = nxt
    suffix_start = T - k
    for b in range(batch):
        original = x[b].copy()
        while True:
            # splice the final k-suffix so that it ends at position i
            i = int(rng.integers(k, T))
            seq = original.copy()
            seq[i - k:i] = original[suffix_start:]
            if _next_counts(seq, k, s_vocab).sum() > 0:
                break
        x[b] = seq
    return x


def gen_kgram(T, s_vocab, k, rng):
    _check_length(T, k + 2)
    return torch.from_numpy(_kgram_batch(1, T, s_vocab, k, make_rng(rng))[0])


def target_kgram(x, k, s_vocab=None):
    x = _symbols(x)
    if x.size < k + 1:
        raise UndefinedTargetError('sequence is shorter than k + 1')
    s_vocab = int(x.max()) + 1 if s_vocab is None else s_vocab
    counts = _next_counts(x, k, s_vocab)
    total = counts.sum()
    if total == 0:
        raise UndefinedTargetError('the final {}-suffix does not occur earlier'
                                   .format(k))
    return torch.from_numpy(counts / total)


# ---------------------------------------------------------------------------
#   dispatch
# ---------------------------------------------------------------------------

def generate(task, T, rng):
    check_task(task)
    if isinstance(task, SimpleTask):
        return gen_simple(T, rng)
    if isinstance(task, ModPTask):
        return gen_modp(T, task.period, rng)
    return gen_kgram(T, task.s_vocab, task.k, rng)


def target(task, x):
    """Target of ``x`` as a float64 tensor of size ``out_dim(task)``."""
    if isinstance(task, SimpleTask):
        return torch.tensor([target_simple(x, task.omega)], dtype=torch.float64)
    if isinstance(task, ModPTask):
        return torch.tensor([target_modp(x, task.period, task.k)],
                            dtype=torch.float64)
    return target_kgram(x, task.k, task.s_vocab)


def sample_batch(task, batch, length, rng):
    """Fresh inputs and targets, shapes ``(batch, length)`` and
    ``(batch, out_dim(task))``."""
    check_task(task)
    rng = make_rng(rng)
    if isinstance(task, SimpleTask):
        _check_length(length)
        x, _ = _simple_batch(batch, length, rng)
        y = _simple_targets(x, task.omega)[:, None]
    elif isinstance(task, ModPTask):
        _check_length(length)
        x, _ = _modp_batch(batch, length, task.period, rng)
        y = _modp_targets(x, task.period, task.k)[:, None]
    elif isinstance(task, KGram):
        _check_length(length, task.k + 2)
        x = _kgram_batch(batch, length, task.s_vocab, task.k, rng)
        counts = np.stack([_next_counts(row, task.k, task.s_vocab) for row in x])
        y = counts / counts.sum(-1, keepdims=True)
    y = np.asarray(y, dtype=np.float64).reshape(batch, out_dim(task))
    assert np.isfinite(y).all(), 'generated targets must be finite'
    return torch.from_numpy(x), torch.from_numpy(y)
