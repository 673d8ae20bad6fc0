"""Command line entry point.

Option precedence: explicit flags, then values from ``--config FILE.json``,
then built-in defaults. Exit codes: 0 success, 1 verification failure,
2 usage or input error, 3 model-shape error. Each run writes a JSON manifest
next to its first output file, or to ``lglab-COMMAND.manifest.json`` in the
working directory when everything goes to stdout.
"""
import argparse
import datetime
import hashlib
import json
import sys
import warnings

import torch

from . import __version__
from .analysis import analyze
from .core import PrecisionMode, check_fclass, loads_params
from .exceptions import LGLabError, PreconditionError, SchemaError
from .plot import plot_csv
from .rng import make_rng
from .simulate import (SimReport, best_markov_sim, build_joint_sim,
                       find_filler, measure_discrepancy, report_to_dict,
                       suffix_sim)
from .tasks import generate, make_task, target, task_param, to_ids
from .train import (default_config, eval_curve, sweep, to_checkpoint, train,
                    write_curve_csv)
from .verify import SUITES, run_suites

__all__ = ['main', 'build_parser', 'RunManifest']

DEFAULTS = {
    'analyze': dict(p_bits=16, require_fclass=False, out=None),
    'simulate': dict(method='joint', g=None, eps=None, n=None, tries=32,
                     p_bits=16, filler=None, out=None),
    'markov-sim': dict(tries=32, out=None),
    'gen': dict(param=None, k=0, s_vocab=2, len=64, count=1, out=None),
    'train': dict(param=None, k=0, s_vocab=2, train_len=64, d=16, batch=256,
                  max_steps=20000, stop_loss=1e-5, lr_hidden=None,
                  lr_embed=1e-2, test_lens=[64, 128, 256, 512, 1024],
                  eval_batches=8, checkpoint=None, out=None),
    'sweep': dict(k=0, s_vocab=2, param_grid=None, train_lens=[16, 32, 64],
                  test_lens=[64, 128, 256, 512, 1024], seeds=[0, 1, 2, 3],
                  eval_batches=8, workers=None, out='results.csv'),
    'verify': dict(quick=False, out=None),
    'plot': dict(group=None, log_y=False, log_x=False, title=None),
}


class RunManifest(object):
    """Record of one command: inputs and their hash, seed, times, outputs."""

    def __init__(self, command, config_path=None, base_seed=0):
        self.command = command
        self.config_path = config_path
        self.base_seed = base_seed
        self.inputs = []
        self.outputs = []
        self._hash = hashlib.sha256()
        self.started = self._now()
        self.finished = None
        if config_path:
            self.read(config_path)

    @staticmethod
    def _now():
        return datetime.datetime.now(datetime.timezone.utc).isoformat()

    def read(self, path):
        """Bytes of an input file, folded into the content hash."""
        with open(path, 'rb') as fh:
            data = fh.read()
        self.inputs.append(path)
        self._hash.update(data)
        return data

    def output(self, path):
        if path is not None:
            self.outputs.append(path)
        return path

    def to_dict(self):
        return dict(command=self.command, config_path=self.config_path,
                    base_seed=self.base_seed, inputs=self.inputs,
                    input_hash='sha256:' + self._hash.hexdigest(),
                    started=self.started, finished=self.finished,
                    outputs=self.outputs)

    def write(self, path):
        self.finished = self._now()
        with open(path, 'w') as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write('\n')


# ---------------------------------------------------------------------------
#   helpers
# ---------------------------------------------------------------------------

def _int_list(text):
    try:
        return [int(v) for v in text.replace(',', ' ').split()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected integers, got {!r}'
                                         .format(text))


def _float_list(text):
    try:
        return [float(v) for v in text.replace(',', ' ').split()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected numbers, got {!r}'
                                         .format(text))


def _load_model(manifest, path):
    return loads_params(manifest.read(path))


def _parse_tokens(data, path):
    try:
        text = data.decode('utf-8').strip()
    except UnicodeDecodeError as e:
        raise SchemaError('invalid UTF-8', path, offset=e.start) from e
    try:
        if text.startswith('['):
            values = json.loads(text)
        else:
            values = [int(v) for v in text.split()]
    except ValueError as e:
        raise SchemaError('cannot parse token ids: {}'.format(e), path)
    return torch.tensor(values, dtype=torch.long)


def _emit(doc, out, manifest):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        with open(manifest.output(out), 'w') as fh:
            fh.write(text + '\n')


def _task(opts):
    return make_task(opts['task'], opts.get('param'), k=opts.get('k', 0),
                     s_vocab=opts.get('s_vocab', 2))


# ---------------------------------------------------------------------------
#   commands
# ---------------------------------------------------------------------------

def cmd_analyze(opts, manifest):
    params = _load_model(manifest, opts['model'])
    if opts['require_fclass']:
        check_fclass(params)
    report = analyze(params, opts['p_bits'])
    _emit(report._asdict(), opts['out'], manifest)
    return 0


def _require(opts, key, method):
    if opts[key] is None:
        raise PreconditionError('--{} is required for the {} method'
                                .format(key, method))
    return opts[key]


def cmd_simulate(opts, manifest):
    method = opts['method']
    f = _load_model(manifest, opts['f'])
    g = None if opts['g'] is None else _load_model(manifest, opts['g'])
    x = _parse_tokens(manifest.read(opts['input']), opts['input'])
    if method == 'joint':
        if g is None:
            raise PreconditionError('--g is required for the joint method')
        eps = _require(opts, 'eps', method)
        filler = opts['filler']
        if filler is None:
            filler = find_filler(f, g, x)
        report = build_joint_sim(f, g, opts['p_bits'], x, eps, filler=filler,
                                 disp=opts['disp'])
    elif method == 'suffix':
        z = suffix_sim(x, _require(opts, 'n', method), f.delta, f.tau)
        mode = PrecisionMode.finite(opts['p_bits'])
        err_g = None if g is None else measure_discrepancy(g, mode, x, z)
        report = SimReport(z, measure_discrepancy(f, mode, x, z), err_g,
                           z.numel(), 'suffix', None, None)
    else:
        report = best_markov_sim(f, x, _require(opts, 'n', method), f.tau,
                                 opts['tries'], seed=opts['seed'],
                                 disp=opts['disp'])
    _emit(report_to_dict(report), opts['out'], manifest)
    return 0


def cmd_markov_sim(opts, manifest):
    f = _load_model(manifest, opts['model'])
    x = _parse_tokens(manifest.read(opts['input']), opts['input'])
    report = best_markov_sim(f, x, opts['n'], f.tau, opts['tries'],
                             seed=opts['seed'], disp=opts['disp'])
    _emit(report_to_dict(report), opts['out'], manifest)
    return 0


def cmd_gen(opts, manifest):
    task = _task(opts)
    rng = make_rng(opts['seed'])
    seqs = [generate(task, opts['len'], rng) for _ in range(opts['count'])]
    lines = [' '.join(str(int(t)) for t in to_ids(x)) for x in seqs]
    targets = [target(task, x).tolist() for x in seqs]
    if opts['out'] is None:
        print('\n'.join(lines))
        return 0
    with open(manifest.output(opts['out']), 'w') as fh:
        fh.write('\n'.join(lines) + '\n')
    sidecar = manifest.output(opts['out'] + '.targets.json')
    with open(sidecar, 'w') as fh:
        json.dump(dict(task=task._asdict(), kind=type(task).__name__,
                       targets=targets), fh, sort_keys=True)
        fh.write('\n')
    return 0


def cmd_train(opts, manifest):
    task = _task(opts)
    cfg = default_config(task, train_len=opts['train_len'], seed=opts['seed'],
                         d=opts['d'], batch=opts['batch'],
                         max_steps=opts['max_steps'],
                         stop_loss=opts['stop_loss'])
    lr_hidden = opts['lr_hidden']
    cfg = cfg.replace(lr_embed=opts['lr_embed'],
                      lr_hidden=cfg.lr_hidden if lr_hidden is None else lr_hidden)
    result = train(cfg, task, disp=opts['disp'])
    rows = eval_curve(result.model, task, opts['test_lens'],
                      opts['eval_batches'], cfg.batch, seed=opts['seed'],
                      train_len=cfg.train_len)
    if opts['checkpoint']:
        with open(manifest.output(opts['checkpoint']), 'w') as fh:
            json.dump(to_checkpoint(result.model), fh, sort_keys=True)
            fh.write('\n')
    write_curve_csv(rows, manifest.output(opts['out']) or sys.stdout)
    return 0


def cmd_sweep(opts, manifest):
    grid = opts['param_grid']
    if grid is None:
        grid = [task_param(_task(opts))]
    sweep(opts['task'], grid, opts['train_lens'], opts['test_lens'],
          opts['seeds'], out=manifest.output(opts['out']),
          base_seed=opts['seed'],
          task_kwargs=dict(k=opts['k'], s_vocab=opts['s_vocab']),
          eval_batches=opts['eval_batches'], workers=opts['workers'],
          disp=opts['disp'])
    return 0


def cmd_verify(opts, manifest):
    report = run_suites(opts['suite'], opts['seed'], opts['quick'],
                        opts['disp'])
    _emit(report, opts['out'], manifest)
    if not report['passed']:
        failed = [c['name'] for r in report['reports'] for c in r['checks']
                  if not c['passed']]
        print('verification failed: {}'.format('; '.join(failed)),
              file=sys.stderr)
        return 1
    return 0


def cmd_plot(opts, manifest):
    manifest.read(opts['csv'])
    plot_csv(opts['csv'], opts['x'], opts['y'], opts['group'],
             manifest.output(opts['out']), opts['log_y'], opts['log_x'],
             opts['title'])
    return 0


COMMANDS = {
    'analyze': cmd_analyze,
    'simulate': cmd_simulate,
    'markov-sim': cmd_markov_sim,
    'gen': cmd_gen,
    'train': cmd_train,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
    'plot': cmd_plot,
}


# ---------------------------------------------------------------------------
#   parser
# ---------------------------------------------------------------------------

def _add_task_args(p):
    p.add_argument('--task', required=True, choices=['simple', 'modp', 'kgram'])
    p.add_argument('--k', type=int, help='residue for modp')
    p.add_argument('--s-vocab', type=int, help='alphabet size for kgram')


def build_parser():
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument('-v', '--verbose', action='count', dest='disp',
                        help='increase verbosity (repeatable)')
    common.add_argument('--config', help='JSON file of option values; '
                        'explicit flags take precedence')
    common.add_argument('--seed', type=int, help='base seed (default 0)')
    common.add_argument('--manifest', help='run manifest path (default: '
                        'next to the first output file, or lglab-COMMAND.'
                        'manifest.json in the working directory)')

    parser = argparse.ArgumentParser(
        prog='lglab', description='Length-generalization laboratory.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name, help):
        return sub.add_parser(name, parents=[common], help=help,
                              argument_default=S)

    p = add('analyze', 'margins and norm constants of a model')
    p.add_argument('model')
    p.add_argument('--p-bits', type=int)
    p.add_argument('--require-fclass', action='store_true',
                   help='fail with exit code 3 unless the model has the '
                   'two-layer class shape')
    p.add_argument('--out')

    p = add('simulate', 'simulation string for one or two models')
    p.add_argument('--method', choices=['joint', 'suffix', 'markov'],
                   help='joint hard-attention string for --f and --g '
                   '(default), last N tokens, or best Markov subsample')
    p.add_argument('--f', required=True)
    p.add_argument('--g', help='second model; required for joint')
    p.add_argument('--input', required=True, help='token ids, whitespace '
                   'separated or a JSON list')
    p.add_argument('--eps', type=float, help='target error for joint')
    p.add_argument('--n', type=int, help='length for suffix and markov')
    p.add_argument('--tries', type=int, help='draws for markov')
    p.add_argument('--p-bits', type=int)
    p.add_argument('--filler', type=int)
    p.add_argument('--out')

    p = add('markov-sim', 'best Markov subsample simulation')
    p.add_argument('--model', required=True)
    p.add_argument('--input', required=True)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--tries', type=int)
    p.add_argument('--out')

    p = add('gen', 'generate task sequences')
    _add_task_args(p)
    p.add_argument('--param', type=float)
    p.add_argument('--len', type=int)
    p.add_argument('--count', type=int)
    p.add_argument('--out', help='sequence file; targets go to '
                   'OUT.targets.json')

    p = add('train', 'train one model and evaluate its length curve')
    _add_task_args(p)
    p.add_argument('--param', type=float)
    for flag, kind in (('--train-len', int), ('--d', int), ('--batch', int),
                       ('--max-steps', int), ('--stop-loss', float),
                       ('--lr-hidden', float), ('--lr-embed', float),
                       ('--eval-batches', int)):
        p.add_argument(flag, type=kind)
    p.add_argument('--test-lens', type=_int_list)
    p.add_argument('--checkpoint')
    p.add_argument('--out')

    p = add('sweep', 'train/test length sweep to CSV')
    _add_task_args(p)
    p.add_argument('--param-grid', type=_float_list)
    p.add_argument('--train-lens', type=_int_list)
    p.add_argument('--test-lens', type=_int_list)
    p.add_argument('--seeds', type=_int_list)
    p.add_argument('--eval-batches', type=int)
    p.add_argument('--workers', type=int)
    p.add_argument('--out')

    p = add('verify', 'run verification suites')
    p.add_argument('suite', choices=sorted(SUITES) + ['all'])
    p.add_argument('--quick', action='store_true')
    p.add_argument('--out')

    p = add('plot', 'SVG line plot from a CSV file')
    p.add_argument('csv')
    p.add_argument('--x', required=True)
    p.add_argument('--y', required=True)
    p.add_argument('--group')
    p.add_argument('--log-y', action='store_true')
    p.add_argument('--log-x', action='store_true')
    p.add_argument('--title')
    p.add_argument('--out', required=True)
    return parser


def _options(ns):
    """Merge defaults, config file values and explicit flags."""
    flags = dict(vars(ns))
    command = flags.pop('command')
    config = {}
    path = flags.get('config')
    if path:
        with open(path, 'rb') as fh:
            data = fh.read()
        try:
            config = json.loads(data.decode('utf-8'))
        except ValueError as e:
            raise SchemaError('invalid config JSON: {}'.format(e), path)
        if not isinstance(config, dict):
            raise SchemaError('config must be a JSON object', path)
        config = {k.replace('-', '_'): v for k, v in config.items()}
    opts = dict(seed=0, disp=0, config=None, manifest=None)
    opts.update(DEFAULTS[command])
    opts.update(config)
    opts.update(flags)
    return command, opts


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        command, opts = _options(ns)
        manifest = RunManifest(command, opts['config'], opts['seed'])
        with warnings.catch_warnings():
            if not opts['disp']:
                warnings.simplefilter('ignore')
            code = COMMANDS[command](opts, manifest)
        target_path = opts['manifest'] or (
            manifest.outputs[0] + '.manifest.json' if manifest.outputs
            else 'lglab-{}.manifest.json'.format(command))
        manifest.write(target_path)
        return code
    except LGLabError as e:
        print('lglab {}: error: {}'.format(ns.command, e), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print('lglab {}: error: {}'.format(ns.command, e), file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
