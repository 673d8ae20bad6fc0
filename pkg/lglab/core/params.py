from collections import namedtuple
import torch

from ..exceptions import FClassError, PreconditionError, ShapeError

__all__ = ['HeadParams', 'MlpParams', 'LayerParams', 'LTParams',
           'PrecisionMode', 'INFINITE', 'ACTIVATIONS', 'make_head',
           'make_mlp', 'zero_mlp', 'make_params', 'check_params',
           'as_tokens', 'check_fclass']

DTYPE = torch.float64

ACTIVATIONS = {
    'relu': torch.relu,
    'tanh': torch.tanh,
    'identity': lambda t: t,
}

# per-head weights; kq is the combined product K^T Q
HeadParams = namedtuple('HeadParams', ['kq', 'v', 'phi'])

MlpParams = namedtuple('MlpParams', ['a', 'bias', 'b', 'activation'])

LayerParams = namedtuple('LayerParams', ['heads', 'mlp'])


class LTParams(namedtuple('LTParams', ['s_vocab', 'd', 'delta', 'tau',
                                       'embed', 'pos', 'layers', 'unembed',
                                       'meta'])):
    """Weights of a limit transformer.

    Token ids run over ``1..s_vocab`` and positions are 1-based; position
    ``i`` reads positional row ``(i - 1) % delta``. ``meta`` holds extra
    document fields (e.g. ``pe_kind``) carried through serialization.
    """
    __slots__ = ()

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def out_dim(self):
        return self.unembed.shape[0]


class PrecisionMode(namedtuple('PrecisionMode', ['p_bits', 'strict_rounding'])):
    """Attention semantics. ``p_bits=None`` is the infinite-precision mode."""
    __slots__ = ()

    @classmethod
    def finite(cls, p_bits, strict_rounding=False):
        if isinstance(p_bits, bool) or not isinstance(p_bits, int) or p_bits < 1:
            raise PreconditionError('p_bits must be a positive integer, got {!r}'
                                    .format(p_bits))
        return cls(p_bits, bool(strict_rounding))

    @classmethod
    def infinite(cls):
        return cls(None, False)

    @property
    def is_finite(self):
        return self.p_bits is not None

    @property
    def cutoff(self):
        return 2.0 ** -self.p_bits

    def __str__(self):
        if not self.is_finite:
            return 'infinite'
        return 'finite(p={}{})'.format(
            self.p_bits, ', strict' if self.strict_rounding else '')


INFINITE = PrecisionMode.infinite()


def _tensor(value, name):
    t = torch.as_tensor(value, dtype=DTYPE)
    if not torch.isfinite(t).all():
        raise PreconditionError('{} contains non-finite entries'.format(name))
    return t


def make_head(kq, v, phi):
    return HeadParams(_tensor(kq, 'kq'), _tensor(v, 'v'),
                      _tensor(phi, 'phi').reshape(-1))


def make_mlp(a, bias, b, activation='relu'):
    if activation not in ACTIVATIONS:
        raise PreconditionError('unknown activation {!r}; expected one of {}'
                                .format(activation, sorted(ACTIVATIONS)))
    return MlpParams(_tensor(a, 'a'), _tensor(bias, 'bias').reshape(-1),
                     _tensor(b, 'b'), activation)


def zero_mlp(d, width=1, activation='relu'):
    """An MLP whose output is identically zero."""
    return make_mlp(torch.zeros(width, d), torch.zeros(width),
                    torch.zeros(d, width), activation)


def make_params(s_vocab, d, delta, tau, embed, pos, layers, unembed,
                meta=None):
    """Build and validate an :class:`LTParams`.

    ``layers`` may hold :class:`LayerParams` or ``(heads, mlp)`` pairs.
    """
    layers = [LayerParams(tuple(heads), mlp) for heads, mlp in layers]
    params = LTParams(int(s_vocab), int(d), int(delta), int(tau),
                      _tensor(embed, 'embed'), _tensor(pos, 'pos'),
                      tuple(layers), _tensor(unembed, 'unembed'),
                      dict(meta or {}))
    check_params(params)
    return params


def _expect(t, shape, name):
    if tuple(t.shape) != tuple(shape):
        raise ShapeError('{} has shape {}, expected {}'
                         .format(name, tuple(t.shape), tuple(shape)))


def check_params(params):
    """Raise :class:`ShapeError` unless all dimensions agree."""
    S, d, delta, tau = params.s_vocab, params.d, params.delta, params.tau
    if S < 1 or d < 1 or delta < 1 or tau < 0:
        raise ShapeError('need s_vocab >= 1, d >= 1, delta >= 1, tau >= 0; '
                         'got {}, {}, {}, {}'.format(S, d, delta, tau))
    if not params.layers:
        raise ShapeError('model has no layers')
    _expect(params.embed, (S, d), 'embed')
    _expect(params.pos, (delta, d), 'pos')
    if params.unembed.dim() != 2 or params.unembed.shape[1] != d:
        raise ShapeError('unembed has shape {}, expected (o, {})'
                         .format(tuple(params.unembed.shape), d))
    for l, layer in enumerate(params.layers):
        if not layer.heads:
            raise ShapeError('layers[{}] has no heads'.format(l))
        for h, head in enumerate(layer.heads):
            name = 'layers[{}].heads[{}]'.format(l, h)
            _expect(head.kq, (d, d), name + '.kq')
            _expect(head.v, (d, d), name + '.v')
            _expect(head.phi, (tau + 1,), name + '.phi')
        mlp = layer.mlp
        name = 'layers[{}].mlp'.format(l)
        if mlp.a.dim() != 2 or mlp.a.shape[1] != d:
            raise ShapeError('{}.a has shape {}, expected (m, {})'
                             .format(name, tuple(mlp.a.shape), d))
        m = mlp.a.shape[0]
        _expect(mlp.bias, (m,), name + '.bias')
        _expect(mlp.b, (d, m), name + '.b')
        if mlp.activation not in ACTIVATIONS:
            raise ShapeError('{}.activation {!r} is not one of {}'
                             .format(name, mlp.activation, sorted(ACTIVATIONS)))
    return params


def as_tokens(x, s_vocab=None):
    """Validate a token sequence and return it as a 1-D long tensor."""
    x = torch.as_tensor(x)
    if x.dtype.is_floating_point:
        if not torch.equal(x, x.round()):
            raise PreconditionError('token ids must be integers')
    x = x.to(torch.long).reshape(-1)
    if x.numel() < 1:
        raise PreconditionError('token sequence is empty')
    lo, hi = int(x.min()), int(x.max())
    if lo < 1 or (s_vocab is not None and hi > s_vocab):
        raise PreconditionError('token ids must lie in 1..{}; found range {}..{}'
                                .format(s_vocab if s_vocab else 'S', lo, hi))
    return x


def check_fclass(params, depth=2):
    """Raise :class:`FClassError` unless ``params`` has the two-layer shape.

    The class requires a zero positional table, nonnegative first-layer
    phi, a single second-layer head and zero second-layer phi. With
    ``depth=None`` only the positional and phi conditions are checked.
    """
    if depth is not None and params.n_layers != depth:
        raise FClassError('layers', 'has {} layers, expected {}'
                          .format(params.n_layers, depth))
    if params.pos.abs().max() != 0:
        raise FClassError('pos', 'must be all zero')
    for h, head in enumerate(params.layers[0].heads):
        if (head.phi < 0).any():
            raise FClassError('layers[0].heads[{}].phi'.format(h),
                              'must be nonnegative')
    for l, layer in enumerate(params.layers[1:], 1):
        if depth is not None and len(layer.heads) != 1:
            raise FClassError('layers[{}].heads'.format(l),
                              'must hold exactly one head')
        for h, head in enumerate(layer.heads):
            if head.phi.abs().max() != 0:
                raise FClassError('layers[{}].heads[{}].phi'.format(l, h),
                                  'must be all zero')
    return params
