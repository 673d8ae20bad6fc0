import json
import pytest
import torch

from lglab.core import (dumps_params, load_params, loads_params,
                        params_from_dict, params_to_dict, random_params,
                        save_params)
from lglab.exceptions import SchemaError


def assert_same_params(f, g):
    assert (f.s_vocab, f.d, f.delta, f.tau) == (g.s_vocab, g.d, g.delta, g.tau)
    torch.testing.assert_close(f.embed, g.embed)
    torch.testing.assert_close(f.pos, g.pos)
    torch.testing.assert_close(f.unembed, g.unembed)
    for la, lb in zip(f.layers, g.layers):
        for ha, hb in zip(la.heads, lb.heads):
            for a, b in zip(ha, hb):
                torch.testing.assert_close(a, b)
        torch.testing.assert_close(la.mlp.a, lb.mlp.a)
        torch.testing.assert_close(la.mlp.b, lb.mlp.b)
        assert la.mlp.activation == lb.mlp.activation


@pytest.mark.parametrize('activation', ['relu', 'tanh', 'identity'])
def test_save_load(tmp_path, activation):
    f = random_params(0, delta=2, tau=1, n_layers=2, n_heads=2,
                      activation=activation)
    path = tmp_path / 'model.json'
    save_params(f, path)
    assert_same_params(f, load_params(path))


def test_dumps_is_deterministic():
    f = random_params(1)
    assert dumps_params(f) == dumps_params(loads_params(dumps_params(f)))


def test_extra_fields_are_kept():
    doc = params_to_dict(random_params(2))
    doc['pe_kind'] = 'periodic'
    doc['attn_scaling'] = 'standard'
    f = params_from_dict(doc)
    assert f.meta == {'pe_kind': 'periodic', 'attn_scaling': 'standard'}
    assert json.loads(dumps_params(f))['pe_kind'] == 'periodic'


@pytest.mark.parametrize('mutate,path', [
    (lambda d: d.pop('tau'), 'tau'),
    (lambda d: d.__setitem__('s_vocab', 0), 's_vocab'),
    (lambda d: d['embed'].pop(), 'embed'),
    (lambda d: d['layers'][0]['heads'][0].__setitem__('phi', [0., 0.]),
     'layers[0].heads[0].phi'),
    (lambda d: d['layers'][0]['mlp'].__setitem__('activation', 'gelu'),
     'layers[0].mlp.activation'),
    (lambda d: d['pos'][0].__setitem__(1, 'x'), 'pos[0][1]'),
])
def test_schema_errors_name_the_field(mutate, path):
    doc = params_to_dict(random_params(3))
    mutate(doc)
    with pytest.raises(SchemaError) as info:
        params_from_dict(doc)
    assert info.value.path == path
    assert info.value.exit_code == 2


@pytest.mark.parametrize('position', [0, 4, 6])
def test_corrupted_json_reports_offset(position):
    data = bytearray(dumps_params(random_params(4)).encode())
    data[position] = ord('}')
    with pytest.raises(SchemaError) as info:
        loads_params(bytes(data))
    assert info.value.offset is not None
    assert 'byte offset' in str(info.value)


def test_invalid_utf8():
    with pytest.raises(SchemaError) as info:
        loads_params(b'{"s_vocab": \xff}')
    assert info.value.offset == 12
