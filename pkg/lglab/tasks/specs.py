"""Synthetic task descriptions.

Task sequences are written over 0-based symbols; ``to_ids`` maps them to the
1-based token ids used by limit transformers.
"""
from collections import namedtuple
import math

from ..exceptions import PreconditionError

__all__ = ['SimpleTask', 'ModPTask', 'KGram', 'check_task', 'task_name',
           'task_param', 'make_task', 'n_symbols', 'out_dim', 'to_ids']

SimpleTask = namedtuple('SimpleTask', ['omega'])

ModPTask = namedtuple('ModPTask', ['period', 'k'])

KGram = namedtuple('KGram', ['k', 's_vocab'])

_NAMES = {SimpleTask: 'simple', ModPTask: 'modp', KGram: 'kgram'}


def check_task(task):
    if isinstance(task, SimpleTask):
        if not math.isfinite(task.omega):
            raise PreconditionError('omega must be finite')
    elif isinstance(task, ModPTask):
        if task.period < 2 or not 0 <= task.k < task.period:
            raise PreconditionError('need period >= 2 and 0 <= k < period, got '
                                    '{}'.format(task))
    elif isinstance(task, KGram):
        if task.k < 1 or task.s_vocab < 2:
            raise PreconditionError('need k >= 1 and s_vocab >= 2, got {}'
                                    .format(task))
    else:
        raise PreconditionError('unknown task {!r}'.format(task))
    return task


def task_name(task):
    return _NAMES[type(task)]


def task_param(task):
    """The swept parameter: omega, period or k."""
    if isinstance(task, SimpleTask):
        return task.omega
    if isinstance(task, ModPTask):
        return task.period
    return task.k


def make_task(name, param=None, **kwargs):
    """Build a task from its CLI name and swept parameter.

    ``modp`` takes ``k`` (default 0) and ``kgram`` takes ``s_vocab``
    (default 2) as keywords.
    """
    if name == 'simple':
        task = SimpleTask(float(3. if param is None else param))
    elif name == 'modp':
        task = ModPTask(int(3 if param is None else param), int(kwargs.get('k', 0)))
    elif name == 'kgram':
        task = KGram(int(2 if param is None else param),
                     int(kwargs.get('s_vocab', 2)))
    else:
        raise PreconditionError('unknown task {!r}; expected simple, modp or '
                                'kgram'.format(name))
    return check_task(task)


def n_symbols(task):
    if isinstance(task, SimpleTask):
        return 3
    if isinstance(task, ModPTask):
        return 2
    return task.s_vocab


def out_dim(task):
    return task.s_vocab if isinstance(task, KGram) else 1


def to_ids(x):
    return x + 1
