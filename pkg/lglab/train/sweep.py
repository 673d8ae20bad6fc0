"""Grid sweeps over (task parameter, train length, seed)."""
from multiprocessing import Pool
import os

from .config import default_config
from .trainer import eval_curve, train, write_curve_csv
from ..rng import spawn_seed
from ..tasks.specs import make_task

__all__ = ['max_workers', 'sweep_jobs', 'run_job', 'sweep']


def max_workers(n_jobs):
    """Worker count capped by ``LGLAB_THREADS`` and the CPU count."""
    limit = os.environ.get('LGLAB_THREADS')
    cap = int(limit) if limit else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def sweep_jobs(task, params, train_lens, seeds, base_seed=0, task_kwargs=None,
               overrides=None):
    jobs = []
    for param in params:
        for train_len in train_lens:
            for seed in seeds:
                jobs.append(dict(
                    task=task, param=param, task_kwargs=dict(task_kwargs or {}),
                    train_len=train_len, seed=seed,
                    stream=spawn_seed(base_seed, len(jobs)),
                    overrides=dict(overrides or {})))
    return jobs


def run_job(job, test_lens, eval_batches=8, eval_batch=256):
    task = make_task(job['task'], job['param'], **job['task_kwargs'])
    overrides = dict(job['overrides'])
    d = overrides.pop('d', 16)
    cfg = default_config(task, train_len=job['train_len'], seed=job['stream'],
                         d=d)
    if overrides:
        cfg = cfg.replace(**overrides)
    result = train(cfg, task)
    rows = eval_curve(result.model, task, test_lens, eval_batches, eval_batch,
                      seed=job['stream'], train_len=job['train_len'])
    for row in rows:
        row['seed'] = job['seed']
    return rows


def _run(args):
    return run_job(*args)


def sweep(task, params, train_lens, test_lens, seeds, out=None, base_seed=0,
          task_kwargs=None, overrides=None, eval_batches=8, eval_batch=256,
          workers=None, disp=0):
    """Train and evaluate every (param, train_len, seed) combination.

    Job ``i`` draws its randomness from ``spawn_seed(base_seed, i)``, so
    results do not depend on the worker count. Rows are returned in job
    order and, when ``out`` is given, written to one CSV file.
    """
    jobs = sweep_jobs(task, params, train_lens, seeds, base_seed, task_kwargs,
                      overrides)
    args = [(job, list(test_lens), eval_batches, eval_batch) for job in jobs]
    workers = max_workers(len(jobs)) if workers is None else workers
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_run, args)
    else:
        results = [_run(a) for a in args]
    rows = [row for job_rows in results for row in job_rows]
    if disp:
        print('sweep finished: %d jobs, %d rows, %d workers'
              % (len(jobs), len(rows), workers))
    if out is not None:
        write_curve_csv(rows, out)
    return rows
