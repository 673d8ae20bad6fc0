"""Norm-based constants of limit transformers.

Universal constants hidden in asymptotic bounds are fixed to 1, so every
quantity here is meaningful up to universal constants only.
"""
from collections import namedtuple
import math
import warnings

from .linalg import spectral_norm, vector_norm
from .margins import (class_vectors, hardmax_threshold, logit_margin,
                      positional_margin, require_depth)
from ..core.params import check_fclass
from ..exceptions import FClassError, ThresholdOverflowError

__all__ = ['MarginReport', 'LipschitzConstants', 'MlpBounds',
           'lipschitz_constants', 'complexity', 'mlp_bounds', 'analyze']

# exp() of larger arguments overflows float64
_MAX_EXP = 709.


MarginReport = namedtuple('MarginReport', [
    'logit_margin', 'hardmax_threshold', 'positional_margin', 'complexity',
    'l_mlp', 'm_v', 'm_e', 'm_f', 'g_f', 'lip_f', 'h_f'])

LipschitzConstants = namedtuple('LipschitzConstants', ['g_f', 'lip_f', 'h_f'])

MlpBounds = namedtuple('MlpBounds', ['l_mlp', 'm_v', 'm_e', 'm_f'])


def _exp(t):
    return math.exp(t) if t < _MAX_EXP else math.inf


def _mlp_gain(mlp):
    return spectral_norm(mlp.b) * spectral_norm(mlp.a)


def lipschitz_constants(params):
    """``(G_f, L_f, H_f)`` of a two-layer model from its first layer."""
    check_fclass(params)
    layer = params.layers[0]
    v_norms = [spectral_norm(h.v) for h in layer.heads]
    kq_norms = [spectral_norm(h.kq) for h in layer.heads]
    gain = 1 + _mlp_gain(layer.mlp)
    g_f = (1 + sum(v_norms)) * gain
    lip_f = 2 * params.s_vocab * gain * sum(
        v * _exp(4 * k) for v, k in zip(v_norms, kq_norms))
    h_f = gain * (params.tau ** 2 + 1) * sum(_exp(4 * k) for k in kq_norms)
    return LipschitzConstants(g_f, lip_f, h_f)


def complexity(params):
    """Complexity of a two-layer model; +inf when it overflows."""
    check_fclass(params)
    if (params.embed.norm(dim=1) > 1 + 1e-12).any():
        warnings.warn('token embeddings with norm above 1; the complexity '
                      'bound assumes unit-bounded embeddings')
    first, second = params.layers
    v1 = [spectral_norm(h.v) for h in first.heads]
    kq1 = [spectral_norm(h.kq) for h in first.heads]
    head2 = second.heads[0]
    gain1 = 1 + _mlp_gain(first.mlp)
    exponent = (1 + sum(v1)) ** 2 * gain1 ** 2 * spectral_norm(head2.kq)
    factor = ((1 + spectral_norm(head2.v))
              * sum(v * _exp(4 * k) for v, k in zip(v1, kq1))
              * (1 + _mlp_gain(second.mlp))
              * spectral_norm(params.unembed)
              * (params.tau ** 2 + 1) * params.s_vocab)
    if factor == 0:
        return 0.
    if math.isinf(factor) or exponent + math.log(factor) > _MAX_EXP:
        warnings.warn('complexity overflows float64; reporting +inf')
        return math.inf
    return math.exp(exponent + math.log(factor))


def mlp_bounds(params):
    """Lipschitz constant of the readout and the output bound of a
    one-layer model."""
    require_depth(params, 1)
    layer = params.layers[0]
    vecs = class_vectors(params)
    l_mlp = spectral_norm(params.unembed) * (1 + _mlp_gain(layer.mlp))
    # each head outputs a convex combination of its value vectors
    m_v = sum(float((vecs @ h.v.T).norm(dim=1).max()) for h in layer.heads)
    m_e = float(vecs.norm(dim=1).max())
    m_f = l_mlp * (m_e + m_v + vector_norm(layer.mlp.bias))
    return MlpBounds(l_mlp, m_v, m_e, m_f)


def analyze(params, p_bits=16):
    """Build a :class:`MarginReport`.

    One-layer fields are ``None`` for deeper models and two-layer class
    fields are ``None`` for models outside that class.
    """
    fields = dict.fromkeys(MarginReport._fields)
    if params.n_layers == 1:
        fields['logit_margin'] = logit_margin(params)
        try:
            fields['hardmax_threshold'] = hardmax_threshold(params, p_bits)
        except ThresholdOverflowError as e:
            warnings.warn(str(e))
        fields.update(mlp_bounds(params)._asdict())
    try:
        check_fclass(params)
    except FClassError:
        pass
    else:
        fields['positional_margin'] = positional_margin(params)
        fields['complexity'] = complexity(params)
        fields.update(lipschitz_constants(params)._asdict())
    return MarginReport(**fields)
