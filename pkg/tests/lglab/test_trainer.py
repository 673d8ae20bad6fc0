import csv
import io
import numpy as np
import pytest
import torch

from lglab.core import INFINITE, final_output, params_from_dict
from lglab.exceptions import DivergenceError, PreconditionError
from lglab.tasks import KGram, ModPTask, SimpleTask, sample_batch, to_ids
from lglab.train import (CURVE_HEADER, ArchConfig, TrainConfig,
                         attention_profile, default_config, eval_curve,
                         from_checkpoint, init_model, loss_and_grad,
                         max_workers, min_train_len, sweep, sweep_jobs,
                         to_checkpoint, train, write_curve_csv)

TASKS = [SimpleTask(3.), ModPTask(3, 1), KGram(2, 2)]


def small_config(task, **kwargs):
    kwargs.setdefault('train_len', 12)
    return default_config(task, d=4, batch=8, max_steps=5, **kwargs)


def task_id(task):
    return type(task).__name__


@pytest.mark.parametrize('task', TASKS, ids=task_id)
def test_init_is_deterministic(task):
    cfg = small_config(task, seed=3)
    a, b = init_model(cfg, task), init_model(cfg, task)
    for (name, p), (_, q) in zip(a.state_dict().items(),
                                 b.state_dict().items()):
        torch.testing.assert_close(p, q, msg=name)
    x, _ = sample_batch(task, 4, 10, 0)
    assert torch.isfinite(a(x)).all()
    c = init_model(cfg._replace(seed=4), task)
    assert not torch.equal(a.embed, c.embed)


def test_default_architectures():
    assert default_config(SimpleTask(1.)).arch.pe == 'none'
    arch = default_config(ModPTask(5, 0)).arch
    assert (arch.pe, arch.period) == ('periodic', 5)
    arch = default_config(KGram(3, 2)).arch
    assert (arch.depth, arch.heads_l1, arch.tau) == (2, 3, 3)
    assert arch.d >= 5 * 2
    assert min_train_len(default_config(KGram(3, 2)), KGram(3, 2)) == 5


def test_zero_loss_gives_zero_gradients():
    task = ModPTask(3, 1)
    model = init_model(small_config(task), task)
    x, _ = sample_batch(task, 4, 9, 0)
    loss, grads = loss_and_grad(model, x, model(x).detach())
    assert loss == 0.
    assert all(float(g.abs().max()) == 0. for g in grads)


@pytest.mark.parametrize('task', TASKS, ids=task_id)
def test_gradients_match_finite_differences(task):
    model = init_model(small_config(task, seed=1), task)
    x, y = sample_batch(task, 3, 8, 1)
    _, grads = loss_and_grad(model, x, y)
    rng = np.random.default_rng(0)
    h = 1e-6
    with torch.no_grad():
        for p, g in zip(model.parameters(), grads):
            flat = p.view(-1)
            for i in rng.choice(flat.numel(), size=min(3, flat.numel()),
                                replace=False):
                old = float(flat[i])
                flat[i] = old + h
                up = float(torch.nn.functional.mse_loss(model(x), y))
                flat[i] = old - h
                down = float(torch.nn.functional.mse_loss(model(x), y))
                flat[i] = old
                fd = (up - down) / (2 * h)
                assert abs(float(g.view(-1)[i]) - fd) <= 1e-8 + 1e-4 * abs(fd)


def test_nan_loss_raises():
    task = SimpleTask(1.)
    model = init_model(small_config(task), task)
    x, y = sample_batch(task, 2, 6, 0)
    with pytest.raises(DivergenceError):
        loss_and_grad(model, x, torch.full_like(y, float('nan')), step=7)


def test_unpositioned_model_ignores_prefix_order():
    task = SimpleTask(2.)
    model = init_model(small_config(task), task)
    x = torch.tensor([0, 1, 2, 2, 0, 1, 1])
    perm = torch.cat([x[:-1].flip(0), x[-1:]])
    torch.testing.assert_close(model(x[None]), model(perm[None]))


def test_zero_learning_rates_leave_parameters():
    task = ModPTask(2, 0)
    cfg = small_config(task).replace(lr_hidden=0., lr_embed=0.)
    before = init_model(cfg, task).state_dict()
    result = train(cfg, task)
    for name, value in result.model.state_dict().items():
        torch.testing.assert_close(value, before[name], msg=name)


def test_stop_loss_ends_training():
    task = ModPTask(2, 0)
    cfg = small_config(task).replace(stop_loss=1e9)
    result = train(cfg, task)
    assert result.success and result.status == 0
    assert result.nit == 0 and len(result.log) == 1


@pytest.mark.parametrize('task', TASKS, ids=task_id)
def test_training_is_reproducible(task):
    cfg = small_config(task, seed=2)
    steps = []
    a = train(cfg, task, callback=lambda step, loss: steps.append(step))
    b = train(cfg, task)
    assert a.log == b.log
    assert a.nit == len(a.log) == cfg.max_steps
    assert steps == list(range(cfg.max_steps))
    assert not a.success and 'Maximum' in a.message


def test_train_length_must_cover_window():
    task = KGram(3, 2)
    cfg = small_config(task, train_len=4)
    with pytest.raises(PreconditionError):
        train(cfg, task)


def test_eval_curve():
    task = SimpleTask(3.)
    model = init_model(small_config(task), task)
    rows = eval_curve(model, task, [8, 16, 8], eval_batches=2, batch=4,
                      seed=5, train_len=12)
    assert [r['test_len'] for r in rows] == [8, 16, 8]
    assert all(set(r) == set(CURVE_HEADER) for r in rows)
    assert rows[0]['task'] == 'simple' and rows[0]['param'] == 3.
    assert rows[0]['train_len'] == 12 and rows[0]['seed'] == 5
    # the evaluation stream advances between rows
    assert rows[0]['test_loss'] != rows[2]['test_loss']
    again = eval_curve(model, task, [8, 16, 8], eval_batches=2, batch=4,
                       seed=5, train_len=12)
    assert rows == again


@pytest.mark.parametrize('task', TASKS, ids=task_id)
def test_checkpoint_round_trip(task):
    model = init_model(small_config(task, seed=6), task)
    doc = to_checkpoint(model)
    assert doc['pe_kind'] == model.arch.pe
    assert doc['attn_scaling'] == 'standard'
    params = params_from_dict(doc)
    rebuilt = from_checkpoint(doc)
    x, _ = sample_batch(task, 3, 10, 2)
    with torch.no_grad():
        expected = model(x)
        torch.testing.assert_close(rebuilt(x), expected)
    if model.arch.pe == 'relative_local':
        # limit transformers scale offset biases by log i
        return
    for row, out in zip(x, expected):
        torch.testing.assert_close(final_output(params, INFINITE, to_ids(row)),
                                   out)


def test_checkpoint_needs_standard_scaling():
    task = SimpleTask(1.)
    doc = to_checkpoint(init_model(small_config(task), task))
    doc['attn_scaling'] = 'log_length'
    with pytest.raises(PreconditionError):
        from_checkpoint(doc)


def test_attention_profile():
    task = ModPTask(3, 1)
    model = init_model(small_config(task), task)
    x = torch.tensor([1, 0, 1, 1, 0, 0, 1, 0, 1])
    profile = attention_profile(model, x, 3, 1)
    assert profile['on_mass'] + profile['off_mass'] == pytest.approx(1.)
    assert profile['min_ratio'] <= profile['max_ratio']
    with pytest.raises(PreconditionError):
        attention_profile(model, x[:2], 5, 4)


def test_sweep_writes_one_csv(tmp_path):
    out = tmp_path / 'curve.csv'
    rows = sweep('modp', [2], [8], [8, 12], [0, 1], out=out,
                 overrides=dict(d=4, batch=4, max_steps=2), eval_batches=1,
                 eval_batch=4, workers=1)
    assert len(rows) == 4
    assert [r['seed'] for r in rows] == [0, 0, 1, 1]
    with open(out, newline='') as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == CURVE_HEADER
    assert len(table) == 5
    again = sweep('modp', [2], [8], [8, 12], [0, 1],
                  overrides=dict(d=4, batch=4, max_steps=2), eval_batches=1,
                  eval_batch=4, workers=1)
    assert [r['test_loss'] for r in rows] == [r['test_loss'] for r in again]


def test_sweep_jobs_have_distinct_streams():
    jobs = sweep_jobs('simple', [1., 2.], [8, 16], [0, 1, 2], base_seed=9)
    assert len(jobs) == 12
    assert len({job['stream'] for job in jobs}) == 12


def test_max_workers(monkeypatch):
    monkeypatch.setenv('LGLAB_THREADS', '2')
    assert max_workers(10) == 2
    assert max_workers(1) == 1
    monkeypatch.delenv('LGLAB_THREADS')
    assert max_workers(1) == 1


def test_write_curve_csv_to_buffer():
    buf = io.StringIO()
    write_curve_csv([dict(task='modp', param=3, train_len=None, test_len=8,
                          seed=0, test_loss=0.25)], buf)
    assert buf.getvalue() == ('task,param,train_len,test_len,seed,test_loss\n'
                              'modp,3,,8,0,0.25\n')


@pytest.mark.parametrize('change', [
    dict(train_len=0),
    dict(stop_loss=0.),
    dict(lr_hidden=-1.),
    dict(arch=dict(depth=3, heads_l1=1, d=4, mlp_width=4, pe='none')),
    dict(arch=dict(depth=1, heads_l1=1, d=4, mlp_width=4, pe='rotary')),
])
def test_invalid_configs(change):
    cfg = small_config(SimpleTask(1.))
    with pytest.raises(PreconditionError):
        cfg.replace(**change)


def test_config_dicts():
    cfg = small_config(KGram(2, 2))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    assert ArchConfig.from_dict(dict(depth=1, heads_l1=1, d=4, mlp_width=4,
                                     pe='none')).pe_param == 0
    with pytest.raises(PreconditionError):
        ArchConfig.from_dict(dict(depth=1, heads=1))
    with pytest.raises(PreconditionError):
        TrainConfig.from_dict(dict(train_len=4))
