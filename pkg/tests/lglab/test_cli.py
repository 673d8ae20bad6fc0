import hashlib
import json
import pytest
import torch

from lglab import verify
from lglab.cli import build_parser, main
from lglab.core import save_params
from lglab.verify import histogram_model
from .models import tied_model, two_token_model


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / 'model.json'
    save_params(two_token_model(0.), path)
    return str(path)


def test_analyze_prints_infinite_margin(model_file, capsys):
    assert main(['analyze', model_file]) == 0
    out = capsys.readouterr().out
    report = json.loads(out)
    assert 'Infinity' in out
    assert report['hardmax_threshold'] == 1
    assert report['complexity'] is None


def test_stdout_run_writes_manifest_in_workdir(model_file, tmp_path):
    assert main(['analyze', model_file]) == 0
    with open(tmp_path / 'lglab-analyze.manifest.json') as fh:
        manifest = json.load(fh)
    assert manifest['command'] == 'analyze'
    assert manifest['inputs'] == [model_file]
    assert manifest['outputs'] == []


def test_analyze_writes_manifest(model_file, tmp_path):
    out = str(tmp_path / 'report.json')
    assert main(['analyze', model_file, '--out', out]) == 0
    with open(out + '.manifest.json') as fh:
        manifest = json.load(fh)
    with open(model_file, 'rb') as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    assert manifest['command'] == 'analyze'
    assert manifest['inputs'] == [model_file]
    assert manifest['input_hash'] == 'sha256:' + digest
    assert manifest['outputs'] == [out]
    assert manifest['finished'] is not None


def test_corrupt_model_is_an_input_error(tmp_path, capsys):
    path = tmp_path / 'broken.json'
    path.write_text('{"s_vocab": 2,,}')
    assert main(['analyze', str(path)]) == 2
    assert 'byte offset 14' in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(['analyze', str(tmp_path / 'absent.json')]) == 2


def test_require_fclass(model_file, capsys):
    assert main(['analyze', model_file, '--require-fclass']) == 3
    assert 'two-layer class' in capsys.readouterr().err


def test_verify_output_is_reproducible(tmp_path):
    a, b = str(tmp_path / 'a.json'), str(tmp_path / 'b.json')
    assert main(['verify', 'rounding', '--quick', '--seed', '4',
                 '--out', a]) == 0
    assert main(['verify', 'rounding', '--quick', '--seed', '4',
                 '--out', b]) == 0
    with open(a, 'rb') as fa, open(b, 'rb') as fb:
        assert fa.read() == fb.read()
    with open(a) as fh:
        report = json.load(fh)
    assert report['passed'] and report['reports'][0]['suite'] == 'rounding'


def test_verify_failure_names_checks(monkeypatch, capsys):
    monkeypatch.setitem(verify.TOLERANCES, 'rounding_deviation', 0.)
    assert main(['verify', 'rounding', '--quick']) == 1
    err = capsys.readouterr().err
    assert 'each count is within one unit of its share' in err


def test_unknown_suite_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(['verify', 'nonexistent'])
    assert info.value.code == 2


def test_gen_with_config(tmp_path):
    config = tmp_path / 'gen.json'
    config.write_text(json.dumps({'len': 5, 'count': 3, 'param': 2}))
    out = str(tmp_path / 'seqs.txt')
    assert main(['gen', '--task', 'modp', '--config', str(config), '--len',
                 '7', '--out', out]) == 0
    with open(out) as fh:
        lines = fh.read().splitlines()
    assert len(lines) == 3
    assert all(len(line.split()) == 7 for line in lines)
    assert all(t in ('1', '2') for line in lines for t in line.split())
    with open(out + '.targets.json') as fh:
        sidecar = json.load(fh)
    assert sidecar['task'] == {'period': 2, 'k': 0}
    assert len(sidecar['targets']) == 3
    with open(out + '.manifest.json') as fh:
        manifest = json.load(fh)
    assert manifest['input_hash'] == 'sha256:' + hashlib.sha256(
        config.read_bytes()).hexdigest()
    assert manifest['outputs'] == [out, out + '.targets.json']


def test_gen_is_seeded(capsys):
    args = ['gen', '--task', 'kgram', '--len', '12', '--count', '2',
            '--seed', '3']
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first


def test_invalid_config(tmp_path):
    config = tmp_path / 'bad.json'
    config.write_text('[1, 2]')
    assert main(['gen', '--task', 'simple', '--config', str(config)]) == 2


def test_markov_sim(tmp_path):
    model = tmp_path / 'hist.json'
    save_params(histogram_model(3), model)
    tokens = tmp_path / 'x.txt'
    tokens.write_text(' '.join(str(1 + i % 3) for i in range(600)))
    out = str(tmp_path / 'sim.json')
    assert main(['markov-sim', '--model', str(model), '--input', str(tokens),
                 '--n', '60', '--tries', '4', '--out', out]) == 0
    with open(out) as fh:
        report = json.load(fh)
    assert report['method'] == 'markov'
    assert report['len_z'] == len(report['z'])
    assert report['err_f'] >= 0


@pytest.fixture
def joint_files(tmp_path):
    f_path, g_path = tmp_path / 'f.json', tmp_path / 'g.json'
    save_params(tied_model([1, 2], s_vocab=4), f_path)
    save_params(tied_model([2, 3], s_vocab=4), g_path)
    gen = torch.Generator().manual_seed(0)
    x = torch.randint(1, 5, (700,), generator=gen)
    tokens = tmp_path / 'x.json'
    tokens.write_text(json.dumps(x.tolist()))
    return str(f_path), str(g_path), str(tokens), x


def test_simulate(joint_files, tmp_path):
    f_path, g_path, tokens, x = joint_files
    out = str(tmp_path / 'joint.json')
    assert main(['simulate', '--f', f_path, '--g', g_path, '--input', tokens,
                 '--eps', '0.1', '--p-bits', '8', '--out', out]) == 0
    with open(out) as fh:
        report = json.load(fh)
    assert report['method'] == 'joint_hard'
    assert report['z'][-1] == x[-1].item()
    # token 4 is the only token below the top logit of both models
    assert set(report['z'][:-1]) == {1, 2, 3, 4}
    assert 256 <= report['len_z'] <= 2100


@pytest.mark.parametrize('method,extra', [
    ('suffix', ['--n', '50']),
    ('markov', ['--n', '100', '--tries', '4']),
])
def test_simulate_methods(joint_files, tmp_path, method, extra):
    f_path, _, tokens, x = joint_files
    out = str(tmp_path / 'sim.json')
    assert main(['simulate', '--method', method, '--f', f_path, '--input',
                 tokens, '--out', out] + extra) == 0
    with open(out) as fh:
        report = json.load(fh)
    assert report['method'] == method
    assert report['err_g'] is None and report['err_f'] >= 0
    assert report['z'][-1] == x[-1].item()
    if method == 'suffix':
        assert report['z'] == x[-50:].tolist()


@pytest.mark.parametrize('args,missing', [
    (['--eps', '0.1'], '--g'),
    (['--g', 'G'], '--eps'),
    (['--method', 'suffix'], '--n'),
])
def test_simulate_needs_method_options(joint_files, capsys, args, missing):
    f_path, g_path, tokens, _ = joint_files
    args = [g_path if a == 'G' else a for a in args]
    assert main(['simulate', '--f', f_path, '--input', tokens] + args) == 2
    assert missing in capsys.readouterr().err


def test_undecodable_tokens_are_an_input_error(tmp_path, capsys):
    model = tmp_path / 'hist.json'
    save_params(histogram_model(3), model)
    tokens = tmp_path / 'x.txt'
    tokens.write_bytes(b'1 2 \xff 3')
    assert main(['markov-sim', '--model', str(model), '--input', str(tokens),
                 '--n', '2']) == 2
    err = capsys.readouterr().err
    assert 'invalid UTF-8' in err and 'byte offset 4' in err



def test_train_writes_curve(tmp_path):
    out = str(tmp_path / 'curve.csv')
    ckpt = str(tmp_path / 'model.json')
    assert main(['train', '--task', 'modp', '--param', '2', '--train-len',
                 '8', '--d', '4', '--batch', '4', '--max-steps', '2',
                 '--test-lens', '8,16', '--eval-batches', '1',
                 '--checkpoint', ckpt, '--out', out]) == 0
    with open(out) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == 'task,param,train_len,test_len,seed,test_loss'
    assert len(lines) == 3
    assert main(['analyze', ckpt]) == 0


def test_parser_suppresses_unset_flags():
    ns = build_parser().parse_args(['gen', '--task', 'simple'])
    assert not hasattr(ns, 'len') and not hasattr(ns, 'seed')
