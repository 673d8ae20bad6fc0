"""JSON documents for :class:`LTParams`.

A document is a single object with fields ``s_vocab, d, delta, tau, embed,
pos, layers, unembed``; matrices are row-major arrays of arrays and each
layer is ``{"heads": [{"kq", "v", "phi"}], "mlp": {"a", "bias", "b",
"activation"}}``. Any other top-level field is kept in ``params.meta``.
"""
import json
import numbers

from .params import ACTIVATIONS, make_head, make_mlp, make_params
from ..exceptions import SchemaError

__all__ = ['params_to_dict', 'params_from_dict', 'dumps_params',
           'loads_params', 'save_params', 'load_params']

_FIELDS = ('s_vocab', 'd', 'delta', 'tau', 'layers', 'embed', 'pos', 'unembed')


def _rows(t):
    return [[float(v) for v in row] for row in t.tolist()]


def params_to_dict(params):
    layers = []
    for layer in params.layers:
        heads = [dict(kq=_rows(h.kq), v=_rows(h.v),
                      phi=[float(v) for v in h.phi.tolist()])
                 for h in layer.heads]
        mlp = layer.mlp
        layers.append(dict(heads=heads, mlp=dict(
            a=_rows(mlp.a), bias=[float(v) for v in mlp.bias.tolist()],
            b=_rows(mlp.b), activation=mlp.activation)))
    doc = dict(params.meta)
    doc.update(s_vocab=params.s_vocab, d=params.d, delta=params.delta,
               tau=params.tau, layers=layers, embed=_rows(params.embed),
               pos=_rows(params.pos), unembed=_rows(params.unembed))
    return doc


def _int(doc, key, minimum):
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError('expected an integer, got {!r}'.format(value), key)
    if value < minimum:
        raise SchemaError('must be >= {}, got {}'.format(minimum, value), key)
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise SchemaError('expected a number, got {!r}'.format(value), path)
    return float(value)


def _vector(value, path, size):
    if not isinstance(value, list):
        raise SchemaError('expected an array', path)
    if size is not None and len(value) != size:
        raise SchemaError('expected {} entries, got {}'.format(size, len(value)),
                          path)
    return [_number(v, '{}[{}]'.format(path, i)) for i, v in enumerate(value)]


def _matrix(value, path, rows, cols):
    if not isinstance(value, list):
        raise SchemaError('expected an array of rows', path)
    if rows is not None and len(value) != rows:
        raise SchemaError('expected {} rows, got {}'.format(rows, len(value)),
                          path)
    if cols is None and value:
        cols = len(value[0]) if isinstance(value[0], list) else None
    return [_vector(row, '{}[{}]'.format(path, i), cols)
            for i, row in enumerate(value)]


def params_from_dict(doc):
    """Validate a decoded document and build :class:`LTParams`.

    Raises :class:`SchemaError` naming the path of the first bad field.
    """
    if not isinstance(doc, dict):
        raise SchemaError('model document must be a JSON object', '$')
    for key in _FIELDS:
        if key not in doc:
            raise SchemaError('missing field', key)
    S = _int(doc, 's_vocab', 1)
    d = _int(doc, 'd', 1)
    delta = _int(doc, 'delta', 1)
    tau = _int(doc, 'tau', 0)
    embed = _matrix(doc['embed'], 'embed', S, d)
    pos = _matrix(doc['pos'], 'pos', delta, d)
    unembed = _matrix(doc['unembed'], 'unembed', None, d)
    if not unembed:
        raise SchemaError('needs at least one row', 'unembed')
    if not isinstance(doc['layers'], list) or not doc['layers']:
        raise SchemaError('expected a nonempty array', 'layers')
    layers = []
    for l, layer in enumerate(doc['layers']):
        path = 'layers[{}]'.format(l)
        if not isinstance(layer, dict) or 'heads' not in layer or 'mlp' not in layer:
            raise SchemaError('expected an object with heads and mlp', path)
        if not isinstance(layer['heads'], list) or not layer['heads']:
            raise SchemaError('expected a nonempty array', path + '.heads')
        heads = []
        for h, head in enumerate(layer['heads']):
            hpath = '{}.heads[{}]'.format(path, h)
            if not isinstance(head, dict):
                raise SchemaError('expected an object', hpath)
            for key in ('kq', 'v', 'phi'):
                if key not in head:
                    raise SchemaError('missing field', hpath + '.' + key)
            heads.append(make_head(_matrix(head['kq'], hpath + '.kq', d, d),
                                   _matrix(head['v'], hpath + '.v', d, d),
                                   _vector(head['phi'], hpath + '.phi', tau + 1)))
        mlp = layer['mlp']
        mpath = path + '.mlp'
        if not isinstance(mlp, dict):
            raise SchemaError('expected an object', mpath)
        for key in ('a', 'bias', 'b', 'activation'):
            if key not in mlp:
                raise SchemaError('missing field', mpath + '.' + key)
        a = _matrix(mlp['a'], mpath + '.a', None, d)
        if not a:
            raise SchemaError('needs at least one row', mpath + '.a')
        m = len(a)
        bias = _vector(mlp['bias'], mpath + '.bias', m)
        b = _matrix(mlp['b'], mpath + '.b', d, m)
        if mlp['activation'] not in ACTIVATIONS:
            raise SchemaError('expected one of {}'.format(sorted(ACTIVATIONS)),
                              mpath + '.activation')
        layers.append((heads, make_mlp(a, bias, b, mlp['activation'])))
    meta = {k: v for k, v in doc.items() if k not in _FIELDS}
    return make_params(S, d, delta, tau, embed, pos, layers, unembed, meta)


def dumps_params(params):
    return json.dumps(params_to_dict(params), sort_keys=True)


def loads_params(data):
    """Parse a model document from ``str`` or ``bytes``."""
    if isinstance(data, bytes):
        try:
            text = data.decode('utf-8')
        except UnicodeDecodeError as e:
            raise SchemaError('invalid UTF-8', '$', offset=e.start) from e
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode('utf-8'))
        raise SchemaError('invalid JSON: {}'.format(e.msg), '$',
                          offset=offset) from e
    return params_from_dict(doc)


def save_params(params, path):
    with open(path, 'w') as f:
        f.write(dumps_params(params))
        f.write('\n')


def load_params(path):
    with open(path, 'rb') as f:
        return loads_params(f.read())
