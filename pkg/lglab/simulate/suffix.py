"""Suffix and Markov-chain subsampling simulations."""
import numpy as np
import torch

from .report import SimReport
from ..core.forward import final_output
from ..core.params import INFINITE, as_tokens, check_fclass
from ..exceptions import PreconditionError
from ..rng import make_rng

__all__ = ['suffix_sim', 'markov_subsample', 'best_markov_sim']


def suffix_sim(x, N, delta, tau=0):
    """Last ``N'`` tokens of ``x``, with ``N'`` the smallest length
    ``>= N`` congruent to ``|x|`` modulo ``delta``."""
    x = as_tokens(x)
    T = x.numel()
    if not tau <= N <= T:
        raise PreconditionError('need tau <= N <= |x|, got N={}, tau={}, |x|={}'
                                .format(N, tau, T))
    length = N + (T - N) % delta
    if length > T:
        raise PreconditionError('input of length {} is too short for a suffix '
                                'of length >= {} congruent mod {}'
                                .format(T, N, delta))
    return x[T - length:]


def _chain(length, p, q, r, rng):
    """Two-state chain with ``P(1 -> 0) = q``, ``P(0 -> 1) = r`` started at
    its stationary law, sampled as alternating geometric runs."""
    if length <= 0:
        return np.zeros(0, dtype=bool)
    state = bool(rng.random() < p)
    runs, states, covered = [], [], 0
    # expected number of full 1/0 cycles needed, plus slack
    chunk = int(length * q * r / (q + r)) + 16
    while covered < length:
        first = rng.geometric(q if state else r, size=chunk)
        second = rng.geometric(r if state else q, size=chunk)
        pair = np.stack([first, second], axis=1).reshape(-1)
        runs.append(pair)
        states.append(np.tile([state, not state], chunk))
        covered += int(pair.sum())
    runs = np.concatenate(runs)
    states = np.concatenate(states)
    return np.repeat(states, runs)[:length]


def markov_subsample(x, n, tau, rng, max_draws=1000):
    """Random index set of mean size ``n + (tau + 1)(1 - n/|x|)``.

    Positions ``1..|x| - tau - 1`` are kept while a two-state Markov chain
    with stationary probability ``n/|x|`` and exit rate ``n^{-1/3}`` is in
    state 1; the last ``tau + 1`` positions are always kept. Chains are
    redrawn until the size lands in the window; after ``max_draws`` misses
    the closest draw is returned. The window is ``2 n^{1/3}`` around the
    mean size; ``max_draws=1`` gives the raw chain. Returns sorted 1-based
    positions.
    """
    rng = make_rng(rng)
    T = as_tokens(x).numel()
    if not tau + 1 <= n <= T:
        raise PreconditionError('need tau + 1 <= n <= |x|, got n={}, tau={}, '
                                '|x|={}'.format(n, tau, T))
    if n == T:
        return torch.arange(1, T + 1)
    p = n / T
    q = n ** (-1. / 3)
    r = p * q / (1 - p)
    if r > 1:
        # keep the stationary law p with a valid entry rate
        r, q = 1., (1 - p) / p
    mean = (T - tau - 1) * p + tau + 1
    slack = 2 * n ** (1. / 3)
    best_miss, body = None, None
    for _ in range(max_draws):
        kept = np.flatnonzero(_chain(T - tau - 1, p, q, r, rng)) + 1
        miss = abs(kept.size + tau + 1 - mean)
        if best_miss is None or miss < best_miss:
            best_miss, body = miss, kept
        if miss <= slack:
            break
    tail = np.arange(T - tau, T + 1)
    return torch.from_numpy(np.concatenate([body, tail])).to(torch.long)


def best_markov_sim(f, x, n, tau, k_tries=32, rng=None, seed=None, disp=0):
    """Best of ``k_tries`` Markov subsamples of ``x`` for model ``f``.

    Discrepancies are measured with infinite-precision attention.
    """
    check_fclass(f, depth=None)
    if n < tau + 1:
        raise PreconditionError('n must be at least tau + 1')
    rng = make_rng(seed if rng is None else rng)
    x = as_tokens(x, f.s_vocab)
    fx = final_output(f, INFINITE, x)
    best_err, best_z = None, None
    for k in range(k_tries):
        idx = markov_subsample(x, n, tau, rng)
        z = x[idx - 1]
        err = float((fx - final_output(f, INFINITE, z)).norm())
        if best_err is None or err < best_err:
            best_err, best_z = err, z
        if disp > 1:
            print('try %3d - |z| = %d, err = %.3e' % (k, z.numel(), err))
    if disp:
        print('best of %d tries: err = %.3e, |z| = %d'
              % (k_tries, best_err, best_z.numel()))
    return SimReport(best_z, best_err, None, best_z.numel(), 'markov',
                     n ** (-1. / 3), seed)
