import csv
import math
import numpy as np
import torch
import torch.nn.functional as F
from scipy.optimize import OptimizeResult

from .model import init_model
from ..exceptions import DivergenceError, PreconditionError
from ..rng import make_rng, spawn_seed
from ..tasks.generators import sample_batch
from ..tasks.specs import KGram, check_task, task_name, task_param

__all__ = ['CURVE_HEADER', 'min_train_len', 'loss_and_grad', 'train',
           'eval_curve', 'attention_profile', 'write_curve_csv']

CURVE_HEADER = ('task', 'param', 'train_len', 'test_len', 'seed', 'test_loss')

_status_message = {
    'success': 'Training terminated successfully.',
    'maxiter': 'Maximum number of steps has been exceeded.',
}


def min_train_len(cfg, task):
    """Shortest training length: ``max(tau + 1, 4)``, raised to ``k + 2``
    for the k-gram task."""
    lower = max(cfg.arch.tau + 1, 4)
    if isinstance(task, KGram):
        lower = max(lower, task.k + 2)
    return lower


def _mse(model, x, y):
    return F.mse_loss(model(x), y)


def loss_and_grad(model, x, y, step=None):
    """Mean squared error of ``model`` on a batch and its gradients.

    Gradients follow parameter order of ``model.parameters()``.
    """
    if x.dim() != 2 or x.shape[0] == 0:
        raise PreconditionError('batch must be a nonempty (batch, T) tensor')
    params = [p for p in model.parameters()]
    loss = _mse(model, x, y)
    if not torch.isfinite(loss):
        raise DivergenceError(step, [])
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g
             for p, g in zip(params, grads)]
    return float(loss), grads


def _optimizer(model, cfg):
    groups = [dict(params=model.hidden_groups(), lr=cfg.lr_hidden),
              dict(params=model.embedding_groups(), lr=cfg.lr_embed)]
    return torch.optim.Adam(groups, betas=(0.9, 0.999), eps=1e-8)


def train(cfg, task, rng=None, callback=None, disp=0):
    """Train a transformer online on ``task``.

    Every step draws a fresh batch whose length is uniform on
    ``[min_train_len(cfg, task), cfg.train_len]``.

    Parameters
    ----------
    cfg : TrainConfig
        Architecture and optimization settings. ``cfg.seed`` seeds the
        initialization and, unless ``rng`` is given, the batch stream.
    task : SimpleTask, ModPTask or KGram
        Task to learn.
    rng : numpy.random.Generator, optional
        Batch stream.
    callback : callable, optional
        Called as ``callback(step, loss)`` after each update.
    disp : int
        Display (verbosity) level. Set to >0 to print status messages.

    Returns
    -------
    result : OptimizeResult
        ``model`` holds the trained module, ``fun`` the last training loss,
        ``nit`` the number of updates and ``log`` the per-step losses.
    """
    cfg.validate()
    check_task(task)
    disp = int(disp)
    lower = min_train_len(cfg, task)
    if cfg.train_len < lower:
        raise PreconditionError('train_len {} is below the shortest training '
                                'length {}'.format(cfg.train_len, lower))
    rng = make_rng(spawn_seed(cfg.seed, 1) if rng is None else rng)
    model = init_model(cfg, task)
    optimizer = _optimizer(model, cfg)
    log = []
    loss = math.inf
    warnflag = 1
    for step in range(cfg.max_steps):
        length = int(rng.integers(lower, cfg.train_len + 1))
        x, y = sample_batch(task, cfg.batch, length, rng)
        optimizer.zero_grad()
        out = _mse(model, x, y)
        loss = float(out)
        if not math.isfinite(loss):
            raise DivergenceError(step, log)
        log.append(loss)
        if loss < cfg.stop_loss:
            warnflag = 0
            break
        out.backward()
        optimizer.step()
        if callback is not None:
            callback(step, loss)
        if disp > 1:
            print('step %5d - T = %4d, loss: %0.6e' % (step, length, loss))
    msg = _status_message['success' if warnflag == 0 else 'maxiter']
    nit = len(log) - 1 if warnflag == 0 else len(log)
    if disp:
        print(msg)
        print("         Current training loss: %e" % loss)
        print("         Steps: %d" % nit)
    return OptimizeResult(model=model, fun=loss, nit=nit, status=warnflag,
                          success=(warnflag == 0), message=msg, log=log)


@torch.no_grad()
def eval_curve(model, task, test_lens, eval_batches=8, batch=256, rng=None,
               seed=0, train_len=None):
    """Mean squared test loss per test length.

    Returns a list of rows keyed by :data:`CURVE_HEADER`.
    """
    check_task(task)
    rng = make_rng(spawn_seed(seed, 2) if rng is None else rng)
    rows = []
    for T in test_lens:
        losses = []
        for _ in range(eval_batches):
            x, y = sample_batch(task, batch, T, rng)
            losses.append(float(_mse(model, x, y)))
        loss = float(np.mean(losses))
        if not math.isfinite(loss):
            raise DivergenceError(None, losses)
        rows.append(dict(task=task_name(task), param=task_param(task),
                         train_len=train_len, test_len=int(T), seed=seed,
                         test_loss=loss))
    return rows


@torch.no_grad()
def attention_profile(model, x, period, k, layer=0, head=0):
    """Final-position attention of a mod-p model on residue ``k`` positions.

    Returns a dict with the total mass on and off positions ``t = k (mod
    period)`` and the extreme ratios of on-residue weights to the uniform
    weight over those positions.
    """
    x = torch.as_tensor(x).reshape(1, -1)
    _, maps = model(x, return_attention=True)
    w = maps[layer][0, head, -1]
    on = torch.arange(1, w.numel() + 1) % period == k
    if not on.any():
        raise PreconditionError('no position is congruent to {} mod {}'
                                .format(k, period))
    ratios = w[on] / (1. / int(on.sum()))
    return dict(on_mass=float(w[on].sum()), off_mass=float(w[~on].sum()),
                min_ratio=float(ratios.min()),
                max_ratio=float(ratios.max()))


def _write_rows(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=CURVE_HEADER, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ('' if row[k] is None else
                             repr(row[k]) if isinstance(row[k], float)
                             else row[k]) for k in CURVE_HEADER})


def write_curve_csv(rows, path):
    """Write curve rows to a path or an open text file."""
    if hasattr(path, 'write'):
        _write_rows(rows, path)
        return
    with open(path, 'w', newline='') as fh:
        _write_rows(rows, fh)
