"""Joint simulation strings for two one-layer models in the hardmax regime.

The input is split into a bulk (positions ``j <= |x| - tau - 1``), whose
keys sit beyond every model's phi window, and the last ``tau + 1``
positions, which are copied verbatim. Bulk keys are summarized by their
(token, residue) class; the construction rebuilds a short bulk whose class
counts preserve, up to ``eps``, the attended proportions of both models.
"""
from fractions import Fraction
import math
import torch

from .counting import ratio_rounding, token_counts
from .report import SimReport, measure_discrepancy
from ..analysis.margins import TIE_TOL, attention_matrix, hardmax_threshold
from ..core.forward import embed, logits_row
from ..core.params import PrecisionMode, as_tokens
from ..exceptions import (ConstructionInfeasibleError, NotInHardmaxRegimeError,
                          PreconditionError)

__all__ = ['build_joint_sim', 'find_filler']


def _check_pair(f, g):
    for name, model in (('f', f), ('g', g)):
        if model.n_layers != 1 or len(model.layers[0].heads) != 1:
            raise PreconditionError('{} must be a one-layer single-head model'
                                    .format(name))
    if (f.s_vocab, f.delta, f.tau) != (g.s_vocab, g.delta, g.tau):
        raise PreconditionError('models disagree on vocabulary, period or '
                                'locality')


class _QueryView(object):
    """Logits of the final query of ``x`` under one model."""

    def __init__(self, model, x):
        n, delta = x.numel(), model.delta
        logits = logits_row(model, PrecisionMode.finite(1), embed(model, x),
                            0, 0, n)
        self.top = float(logits.max())
        query = (int(x[-1]) - 1) * delta + n % delta
        # bulk keys lie beyond the window, so their logit is the class entry
        self.class_logits = attention_matrix(model)[query]

    def attends(self, u):
        return float(self.class_logits[u]) >= self.top - TIE_TOL

    def submaximal(self, token, delta):
        row = self.class_logits[(token - 1) * delta:token * delta]
        bad = (row >= self.top - TIE_TOL).nonzero()[:, 0]
        return None if bad.numel() == 0 else int(bad[0])


def find_filler(f, g, x):
    """Smallest token id that is sub-maximal at every residue for both
    models' final query of ``x``."""
    _check_pair(f, g)
    x = as_tokens(x, f.s_vocab)
    views = [_QueryView(f, x), _QueryView(g, x)]
    for token in range(1, f.s_vocab + 1):
        if all(v.submaximal(token, f.delta) is None for v in views):
            return token
    raise ConstructionInfeasibleError(
        'no admissible filler token: every token attains the maximal logit at '
        'some residue for one of the models')


def _add_remainder(m, units, keys):
    for u in keys[:max(units, 0)]:
        m[u] += 1


def _bulk_counts(n_u, A_f, A_g, eps):
    """Class counts of the rebuilt bulk, with ``|P_f| <= |P_g|``."""
    K = math.ceil(1 / eps)
    K2 = math.ceil(1 / eps ** 2)
    inter = sorted(A_f & A_g)
    only_f = sorted(A_f - A_g)
    only_g = sorted(A_g - A_f)
    P_f = sum(n_u[u] for u in A_f)
    P_g = sum(n_u[u] for u in A_g)
    P_fg = sum(n_u[u] for u in inter)
    m = {}
    if P_f <= 1 / eps:
        for u in A_f:
            m[u] = n_u[u]
    else:
        for u in A_f:
            m[u] = K * n_u[u] // P_f
        _add_remainder(m, K * P_fg // P_f - sum(m[u] for u in inter), inter)
        _add_remainder(m, K - sum(m[u] for u in A_f), only_f)
    if P_g == 0 or not only_g:
        return m
    if P_g <= 1 / eps:
        for u in only_g:
            m[u] = n_u[u]
    elif P_fg <= eps * P_g:
        keys = sorted(A_g)
        counts = ratio_rounding([n_u[u] / P_g for u in keys], K2)
        for u, c in zip(keys, counts.tolist()):
            if u in only_g:
                m[u] = c
    elif P_f <= 1 / eps:
        for u in only_g:
            m[u] = n_u[u]
    else:
        # scale A_g \ A_f by the ratio realized on the most frequent A_f class
        anchor = max(sorted(A_f), key=lambda u: n_u[u])
        ratio = Fraction(m[anchor], n_u[anchor])
        for u in only_g:
            m[u] = math.floor(ratio * n_u[u])
        target = math.floor(ratio * sum(n_u[u] for u in only_g))
        _add_remainder(m, target - sum(m[u] for u in only_g), only_g)
    return m


def _layout(blocks, delta, filler):
    """Place class counts so each token lands on its residue.

    Within a block the classes of each residue lane are emitted in
    ascending token order; positions whose lane is exhausted take the
    filler.
    """
    z = []
    for block in blocks:
        lanes = [[] for _ in range(delta)]
        for u in sorted(block):
            token, r = divmod(u, delta)
            lanes[r].extend([token + 1] * block[u])
        heads = [0] * delta
        remaining = sum(len(lane) for lane in lanes)
        while remaining:
            r = (len(z) + 1) % delta
            if heads[r] < len(lanes[r]):
                z.append(lanes[r][heads[r]])
                heads[r] += 1
                remaining -= 1
            else:
                z.append(filler)
    return z


def build_joint_sim(f, g, p_bits, x, eps, filler=None, disp=0):
    """Build one short string simulating ``x`` for two models at once.

    Parameters
    ----------
    f, g : LTParams
        One-layer single-head models sharing vocabulary, period and tau.
    p_bits : int
        Precision of the finite attention semantics.
    x : sequence of int
        Input at or above both hardmax thresholds.
    eps : float
        Target proportion error, ``0 < eps < 1``.
    filler : int, optional
        Token used for residue and length padding. It must be sub-maximal
        at every residue for both models; required whenever padding occurs.
    disp : int
        Verbosity level.

    Returns
    -------
    report : SimReport
    """
    _check_pair(f, g)
    if not 0 < eps < 1:
        raise PreconditionError('eps must lie in (0, 1), got {}'.format(eps))
    x = as_tokens(x, f.s_vocab)
    n, delta, tau = x.numel(), f.delta, f.tau
    threshold = max(hardmax_threshold(f, p_bits), hardmax_threshold(g, p_bits))
    if n < threshold:
        raise NotInHardmaxRegimeError('length {} is below the hardmax threshold '
                                      '{}'.format(n, threshold))
    if n <= tau + 1:
        raise PreconditionError('input must be longer than tau + 1')
    views = {'f': _QueryView(f, x), 'g': _QueryView(g, x)}
    if filler is not None:
        if not 1 <= filler <= f.s_vocab:
            raise PreconditionError('filler {} is not a token id'.format(filler))
        for name, view in views.items():
            r = view.submaximal(filler, delta)
            if r is not None:
                raise ConstructionInfeasibleError(
                    'filler (token {}, residue {}) attains the maximal logit '
                    'of {}'.format(filler, r, name))

    n_u = token_counts(x[:n - 1], delta, tau, f.s_vocab).reshape(-1).tolist()
    present = {u for u, c in enumerate(n_u) if c > 0}
    A = {name: {u for u in present if view.attends(u)}
         for name, view in views.items()}
    P = {name: sum(n_u[u] for u in A[name]) for name in A}
    first, second = ('f', 'g') if P['f'] <= P['g'] else ('g', 'f')
    m = _bulk_counts(n_u, A[first], A[second], eps)
    blocks = [{u: m[u] for u in A[first]},
              {u: m[u] for u in A[second] - A[first] if u in m}]
    bulk = _layout(blocks, delta, filler)

    pad = max(0, threshold - (len(bulk) + tau + 1))
    pad += (n - tau - 1 - len(bulk) - pad) % delta
    bulk.extend([filler] * pad)
    if None in bulk:
        raise ConstructionInfeasibleError('padding is needed but no filler '
                                          'token was supplied')
    z = torch.cat([torch.tensor(bulk, dtype=torch.long), x[n - tau - 1:]])

    mode = PrecisionMode.finite(p_bits)
    err_f = measure_discrepancy(f, mode, x, z)
    err_g = measure_discrepancy(g, mode, x, z)
    if disp:
        print('joint simulation: |x| = %d, |z| = %d, |P_f| = %d, |P_g| = %d'
              % (n, z.numel(), P['f'], P['g']))
        print('         err_f = %.3e, err_g = %.3e' % (err_f, err_g))
    return SimReport(z, err_f, err_g, z.numel(), 'joint_hard', eps, None)
