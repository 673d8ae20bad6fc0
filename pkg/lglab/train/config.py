from collections import namedtuple

from ..exceptions import PreconditionError
from ..tasks.specs import KGram, ModPTask, SimpleTask

__all__ = ['ArchConfig', 'TrainConfig', 'PE_KINDS', 'default_arch',
           'default_config']

PE_KINDS = ('none', 'periodic', 'relative_local')


class ArchConfig(namedtuple('ArchConfig', ['depth', 'heads_l1', 'd',
                                           'mlp_width', 'pe', 'pe_param'])):
    """Architecture of a trainable transformer.

    ``pe_param`` is the period for ``'periodic'`` and the window ``tau``
    for ``'relative_local'``; it is ignored for ``'none'``.
    """
    __slots__ = ()

    @property
    def tau(self):
        return self.pe_param if self.pe == 'relative_local' else 0

    @property
    def period(self):
        return self.pe_param if self.pe == 'periodic' else 1

    def validate(self):
        if self.depth not in (1, 2):
            raise PreconditionError('depth must be 1 or 2, got {}'
                                    .format(self.depth))
        for name in ('heads_l1', 'd', 'mlp_width'):
            if getattr(self, name) < 1:
                raise PreconditionError('{} must be positive'.format(name))
        if self.pe not in PE_KINDS:
            raise PreconditionError('pe must be one of {}, got {!r}'
                                    .format(PE_KINDS, self.pe))
        if self.pe == 'periodic' and self.pe_param < 1:
            raise PreconditionError('periodic encodings need a period >= 1')
        if self.pe == 'relative_local' and self.pe_param < 0:
            raise PreconditionError('relative_local needs tau >= 0')
        return self

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc.setdefault('pe_param', 0)
        unknown = set(doc) - set(cls._fields)
        if unknown:
            raise PreconditionError('unknown arch fields {}'.format(sorted(unknown)))
        try:
            return cls(**doc).validate()
        except TypeError as e:
            raise PreconditionError('incomplete arch config: {}'.format(e))

    def to_dict(self):
        return dict(self._asdict())


class TrainConfig(namedtuple('TrainConfig', ['arch', 'train_len', 'batch',
                                             'max_steps', 'stop_loss',
                                             'lr_hidden', 'lr_embed',
                                             'seed'])):
    __slots__ = ()

    def validate(self):
        self.arch.validate()
        if self.train_len < 1 or self.batch < 1 or self.max_steps < 0:
            raise PreconditionError('train_len and batch must be positive and '
                                    'max_steps nonnegative')
        if not self.stop_loss > 0:
            raise PreconditionError('stop_loss must be positive')
        if self.lr_hidden < 0 or self.lr_embed < 0:
            raise PreconditionError('learning rates must be nonnegative')
        return self

    def replace(self, **kwargs):
        if 'arch' in kwargs and isinstance(kwargs['arch'], dict):
            kwargs['arch'] = ArchConfig.from_dict(kwargs['arch'])
        return self._replace(**kwargs).validate()

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        unknown = set(doc) - set(cls._fields)
        if unknown:
            raise PreconditionError('unknown train fields {}'
                                    .format(sorted(unknown)))
        if 'arch' not in doc:
            raise PreconditionError('train config needs an arch section')
        doc['arch'] = ArchConfig.from_dict(doc['arch'])
        try:
            return cls(**doc).validate()
        except TypeError as e:
            raise PreconditionError('incomplete train config: {}'.format(e))

    def to_dict(self):
        doc = dict(self._asdict())
        doc['arch'] = self.arch.to_dict()
        return doc


def default_arch(task, d=16):
    """Positional scheme per task: none for the simple task, a learned
    periodic table for mod-p and relative logit biases for the k-gram."""
    if isinstance(task, SimpleTask):
        return ArchConfig(1, 1, d, 4 * d, 'none', 0)
    if isinstance(task, ModPTask):
        return ArchConfig(1, 1, d, 4 * d, 'periodic', task.period)
    if isinstance(task, KGram):
        return ArchConfig(2, task.k, max(d, (task.k + 2) * task.s_vocab), 4 * d,
                          'relative_local', task.k)
    raise PreconditionError('unknown task {!r}'.format(task))


def default_config(task, train_len=64, seed=0, d=16, batch=256,
                   max_steps=20000, stop_loss=1e-5):
    return TrainConfig(default_arch(task, d), train_len, batch, max_steps,
                       stop_loss, 1e-2 / d, 1e-2, seed).validate()
