"""Token counting, attended sets and the hard-attention formula."""
from collections import namedtuple
import torch

from ..analysis.margins import (TIE_TOL, class_vectors, hardmax_threshold,
                                require_depth)
from ..core.forward import embed, logits_row
from ..core.params import ACTIVATIONS, DTYPE, PrecisionMode, as_tokens
from ..exceptions import (InvalidDistributionError, NotInHardmaxRegimeError,
                          PreconditionError)
from ..rng import make_rng

__all__ = ['AttentionSets', 'token_counts', 'attention_sets', 'hard_forward',
           'ratio_rounding', 'bulk_check', 'dirichlet_seq']

AttentionSets = namedtuple('AttentionSets', [
    'prefix_positions', 'prefix_pairs', 'suffix_positions', 'suffix_pairs'])


def token_counts(x, delta, tau, s_vocab=None):
    """Counts ``n[s-1, r]`` of token ``s`` at positions ``j <= |x| - tau``
    with ``j % delta == r``."""
    x = as_tokens(x, s_vocab)
    if x.numel() <= tau:
        raise PreconditionError('sequence of length {} has an empty prefix for '
                                'tau={}'.format(x.numel(), tau))
    S = int(x.max()) if s_vocab is None else s_vocab
    prefix = x[:x.numel() - tau]
    residues = torch.arange(1, prefix.numel() + 1) % delta
    flat = (prefix - 1) * delta + residues
    return torch.bincount(flat, minlength=S * delta).reshape(S, delta)


def _final_logits(params, x, head):
    y = embed(params, x)
    return logits_row(params, PrecisionMode.finite(1), y, 0, head, x.numel())


def attention_sets(params, p_bits, x, head=0, force=False):
    """Positions attended by the final query of a one-layer model.

    Raises :class:`NotInHardmaxRegimeError` when ``|x|`` is below the
    hardmax threshold unless ``force`` is set.
    """
    require_depth(params, 1)
    x = as_tokens(x, params.s_vocab)
    n = x.numel()
    if not force:
        threshold = hardmax_threshold(params, p_bits)
        if n < threshold:
            raise NotInHardmaxRegimeError(
                'length {} is below the hardmax threshold {}'.format(n, threshold))
    logits = _final_logits(params, x, head)
    attended = (logits >= logits.max() - TIE_TOL).nonzero()[:, 0] + 1
    cut = n - params.tau
    prefix = attended[attended <= cut]
    suffix = attended[attended > cut]
    tokens = x.tolist()
    prefix_pairs = frozenset((tokens[j - 1], j % params.delta)
                             for j in prefix.tolist())
    suffix_pairs = frozenset((tokens[j - 1], j) for j in suffix.tolist())
    return AttentionSets(prefix, prefix_pairs, suffix, suffix_pairs)


def hard_forward(params, x):
    """Final-position output of a one-layer model under hard attention.

    Each head returns the average of ``V(E_s + p)`` over the attended
    positions. Keys ``j <= |x| - tau - 1`` carry no offset bias and are
    summarized by (token, residue) counts; the last ``tau + 1`` keys are
    taken one by one.
    """
    require_depth(params, 1)
    x = as_tokens(x, params.s_vocab)
    n, delta, tau = x.numel(), params.delta, params.tau
    cut = n - tau - 1
    if cut > 0:
        counts = token_counts(x, delta, tau + 1, params.s_vocab)
    else:
        counts = torch.zeros(params.s_vocab, delta, dtype=torch.long)
    vecs = class_vectors(params)
    tokens = x.tolist()
    y_last = vecs[(tokens[-1] - 1) * delta + n % delta]
    Y = y_last.clone()
    for h, head in enumerate(params.layers[0].heads):
        logits = _final_logits(params, x, h)
        top = (logits >= logits.max() - TIE_TOL).nonzero()[:, 0]
        attended = (top + 1).tolist()
        bulk = sorted({(tokens[j - 1], j % delta)
                       for j in attended if j <= cut})
        total = torch.zeros(params.d, dtype=DTYPE)
        size = 0
        for s, r in bulk:
            c = int(counts[s - 1, r])
            total += c * (head.v @ vecs[(s - 1) * delta + r])
            size += c
        for j in attended:
            if j > cut:
                total += head.v @ vecs[(tokens[j - 1] - 1) * delta + j % delta]
                size += 1
        Y = Y + total / size
    mlp = params.layers[0].mlp
    hidden = ACTIVATIONS[mlp.activation](mlp.a @ Y + mlp.bias)
    return params.unembed @ (Y + mlp.b @ hidden)


def ratio_rounding(p, N):
    """Integers ``m`` with ``sum(m) == N`` and ``|m_i - p_i N| <= 1``.

    ``m_i = floor(p_i N)``, and the ``N - sum(floor(p N))`` leftover units
    go to the lowest indices.
    """
    p = torch.as_tensor(p, dtype=DTYPE).reshape(-1)
    if (p < 0).any():
        raise InvalidDistributionError('probabilities must be nonnegative')
    if abs(float(p.sum()) - 1.) > 1e-9:
        raise InvalidDistributionError('probabilities sum to {}, not 1'
                                       .format(float(p.sum())))
    if N < 1:
        raise PreconditionError('N must be positive, got {}'.format(N))
    m = torch.floor(p * N).to(torch.long)
    rest = min(max(N - int(m.sum()), 0), m.numel())
    m[:rest] += 1
    return m


def bulk_check(x, p, delta, tau, d_tol):
    """Whether every (token, residue) frequency is within ``d_tol`` of p."""
    p = torch.as_tensor(p, dtype=DTYPE).reshape(-1)
    x = as_tokens(x, p.numel())
    counts = token_counts(x, delta, tau, p.numel()).to(DTYPE)
    freq = counts / (x.numel() / delta)
    return bool(((freq - p[:, None]).abs() <= d_tol).all())


def dirichlet_seq(alpha, T, rng):
    """Draw ``p ~ Dirichlet(alpha)`` by normalized Gamma draws, then ``T``
    iid tokens from ``p``. Returns ``(tokens, p)``."""
    rng = make_rng(rng)
    alpha = torch.as_tensor(alpha, dtype=DTYPE).numpy()
    if (alpha <= 0).any():
        raise PreconditionError('Dirichlet parameters must be positive')
    g = rng.gamma(alpha)
    while g.sum() == 0:
        g = rng.gamma(alpha)
    p = g / g.sum()
    tokens = rng.choice(len(p), size=T, p=p) + 1
    return torch.from_numpy(tokens).to(torch.long), torch.from_numpy(p)
