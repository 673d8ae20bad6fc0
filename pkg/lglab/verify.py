"""Verification suites for the properties the library relies on.

Each suite returns a JSON-ready report::

    {"suite": ..., "seed": ..., "passed": ..., "checks": [...]}

with one entry per named check. Reports contain no timestamps, so equal
seeds give byte-identical JSON. Numerical bounds live in :data:`TOLERANCES`.
"""
from multiprocessing import Pool
import math
import numpy as np
import torch
from scipy.stats import linregress

from .analysis import complexity, hardmax_threshold, mlp_bounds
from .core import (INFINITE, PrecisionMode, attention_distribution, embed,
                   final_output, logits_row, make_head, make_params,
                   random_grid_params, zero_mlp)
from .analysis.margins import TIE_TOL
from .exceptions import ConstructionInfeasibleError, PreconditionError
from .rng import make_rng, spawn_seed
from .simulate import (best_markov_sim, build_joint_sim, bulk_check,
                       find_filler, hard_forward, ratio_rounding)
from .tasks import (ModPTask, construct_kgram_lt, construct_modp_lt,
                    construct_simple_lt, gen_kgram, gen_modp, gen_simple,
                    kgram_boundary_alias, target_kgram, target_modp,
                    target_simple, to_ids)
from .train import (ArchConfig, LGTransformer, attention_profile,
                    default_config, eval_curve, max_workers, train)

__all__ = ['TOLERANCES', 'SUITES', 'OPT_IN', 'histogram_model', 'run_suite',
           'run_suites']

TOLERANCES = {
    'hardmax_attention': 1e-9,
    'hardmax_output': 1e-8,
    'rounding_deviation': 1.,
    'markov_slope_low': -0.55,
    'markov_slope_high': -0.18,
    'bulk_fraction': 0.05,
    'gradient_rtol': 1e-4,
    'gradient_atol': 1e-8,
    'modp_error': 1e-6,
    'simple_error': 2e-3,
    'kgram_error': 1e-4,
    'kgram_slope': 1e-6,
    'joint_length_factor': 20.,
    # err / (M_f (|S| + tau) eps) stays below about 1.2 for pairs with two tied
    # classes per model
    'joint_constant': 4.,
    'joint_median_growth': 1.5,
    'joint_error_floor': 1e-9,
    'plateau_flatness': 0.25,
    'off_residue_mass': 0.1,
    'on_residue_ratio': 2.,
}

# full-size and quick problem sizes
_SIZES = {
    'hardmax_models': (200, 8),
    'rounding_instances': (10000, 500),
    'markov_length': (100000, 50000),
    'markov_ns': ((100, 1000, 10000), (100, 1000, 10000)),
    'markov_seeds': (20, 8),
    'markov_tries': (32, 16),
    'bulk_sequences': (10000, 400),
    'construction_inputs': (100, 8),
    'joint_pairs': (20, 12),
    'joint_length': (10000, 2000),
    'training_train_lens': ((16, 32, 64), (8, 12)),
    'training_seeds': (4, 1),
    'training_steps': (3000, 10),
    'training_batch': (256, 16),
    'training_test_lens': ((64, 128, 256, 512), (16, 32)),
    'training_eval_batches': (4, 1),
}


def _size(name, quick):
    return _SIZES[name][1 if quick else 0]


def _check(name, passed, value=None, bound=None):
    return dict(name=name, passed=bool(passed), value=value, bound=bound)


def _float(v):
    return None if v is None else float(v)


# ---------------------------------------------------------------------------
#   suites
# ---------------------------------------------------------------------------

def _suite_hardmax(seed, quick):
    rng = make_rng(spawn_seed(seed, 0))
    p_bits = 16
    mode = PrecisionMode.finite(p_bits)
    worst_attn = worst_out = 0.
    for _ in range(_size('hardmax_models', quick)):
        f = random_grid_params(rng, s_vocab=3, delta=int(rng.integers(1, 4)),
                               tau=int(rng.integers(0, 3)), kq_range=2,
                               phi_range=2)
        n = hardmax_threshold(f, p_bits)
        x = torch.from_numpy(rng.integers(1, 4, size=n))
        y = embed(f, x)
        logits = logits_row(f, mode, y, 0, 0, n)
        top = logits >= logits.max() - TIE_TOL
        expected = top.to(torch.float64) / top.sum()
        attn = attention_distribution(f, mode, y, 0, 0, n, n)
        worst_attn = max(worst_attn, float((attn - expected).abs().max()))
        out = final_output(f, mode, x)
        worst_out = max(worst_out, float((out - hard_forward(f, x)).abs().max()))
    return [
        _check('finite attention is uniform over the argmax', worst_attn
               <= TOLERANCES['hardmax_attention'], worst_attn,
               TOLERANCES['hardmax_attention']),
        _check('forward output matches the hard-attention formula', worst_out
               <= TOLERANCES['hardmax_output'], worst_out,
               TOLERANCES['hardmax_output']),
    ]


def _suite_rounding(seed, quick):
    rng = make_rng(spawn_seed(seed, 1))
    sums_ok = True
    worst = 0.
    for _ in range(_size('rounding_instances', quick)):
        n = int(rng.integers(1, 51))
        N = int(rng.integers(1, 10001))
        p = rng.dirichlet(np.ones(n))
        m = ratio_rounding(p, N)
        sums_ok &= int(m.sum()) == N
        dev = float((m.to(torch.float64) - torch.from_numpy(p) * N).abs().max())
        worst = max(worst, dev)
    return [
        _check('rounded counts sum to N', sums_ok),
        _check('each count is within one unit of its share', worst
               <= TOLERANCES['rounding_deviation'], worst,
               TOLERANCES['rounding_deviation']),
    ]


def histogram_model(s_vocab):
    """One-layer model whose output is the current one-hot token plus the
    empirical token histogram."""
    eye = torch.eye(s_vocab, dtype=torch.float64)
    head = make_head(torch.zeros(s_vocab, s_vocab), eye, torch.zeros(1))
    return make_params(s_vocab, s_vocab, 1, 0, eye, torch.zeros(1, s_vocab),
                       [([head], zero_mlp(s_vocab))], eye)


def _drifting_sequence(rng, s_vocab, length, segments=10):
    bounds = np.linspace(0, length, segments + 1).astype(int)
    parts = [rng.choice(s_vocab, size=b - a, p=rng.dirichlet(np.ones(s_vocab)))
             for a, b in zip(bounds[:-1], bounds[1:])]
    return torch.from_numpy(np.concatenate(parts) + 1)


def _suite_markov(seed, quick):
    s_vocab = 3
    f = histogram_model(s_vocab)
    ns = _size('markov_ns', quick)
    length = _size('markov_length', quick)
    errors = {n: [] for n in ns}
    for s in range(_size('markov_seeds', quick)):
        rng = make_rng(spawn_seed(seed, 100 + s))
        x = _drifting_sequence(rng, s_vocab, length)
        for n in ns:
            report = best_markov_sim(f, x, n, 0, _size('markov_tries', quick),
                                     rng=rng)
            errors[n].append(report.err_f)
    medians = [float(np.median(errors[n])) for n in ns]
    fit = linregress(np.log(ns), np.log(np.maximum(medians, 1e-300)))
    lo, hi = TOLERANCES['markov_slope_low'], TOLERANCES['markov_slope_high']
    return [_check('best-of-k error decays with the subsample size',
                   lo <= fit.slope <= hi, float(fit.slope), [lo, hi])]


def _suite_bulk(seed, quick):
    rng = make_rng(spawn_seed(seed, 2))
    s_vocab, delta, d_tol, rho = 3, 2, 0.05, 0.05
    T = math.ceil(delta * d_tol ** -2 * math.log(2 * s_vocab * delta / rho))
    p = rng.dirichlet(np.ones(s_vocab))
    trials = _size('bulk_sequences', quick)
    outside = 0
    for _ in range(trials):
        x = torch.from_numpy(rng.choice(s_vocab, size=T, p=p) + 1)
        outside += not bulk_check(x, p, delta, 0, d_tol)
    frac = outside / trials
    return [_check('out-of-bulk fraction at the concentration length',
                   frac <= TOLERANCES['bulk_fraction'], frac,
                   TOLERANCES['bulk_fraction'])]


def _finite_difference_gap(model, x, y, h=1e-5):
    loss_fn = lambda: torch.nn.functional.mse_loss(model(x), y)
    params = list(model.parameters())
    grads = torch.autograd.grad(loss_fn(), params)
    rtol, atol = TOLERANCES['gradient_rtol'], TOLERANCES['gradient_atol']
    worst = 0.
    with torch.no_grad():
        for p, g in zip(params, grads):
            flat, gflat = p.view(-1), g.reshape(-1)
            for i in range(flat.numel()):
                old = float(flat[i])
                flat[i] = old + h
                up = float(loss_fn())
                flat[i] = old - h
                down = float(loss_fn())
                flat[i] = old
                fd = (up - down) / (2 * h)
                gap = abs(float(gflat[i]) - fd) / (atol + rtol * abs(fd))
                worst = max(worst, gap)
    return worst


def _suite_gradients(seed, quick):
    checks = []
    for depth, pe, pe_param in ((1, 'periodic', 3), (2, 'relative_local', 2)):
        gen = torch.Generator()
        gen.manual_seed(spawn_seed(seed, 10 + depth))
        arch = ArchConfig(depth, 2, 4, 4, pe, pe_param)
        model = LGTransformer(arch, 3, 2, gen)
        x = torch.randint(0, 3, (3, 6), generator=gen)
        y = torch.randn(3, 2, generator=gen, dtype=torch.float64)
        gap = _finite_difference_gap(model, x, y)
        checks.append(_check('depth-{} gradients match finite differences'
                             .format(depth), gap <= 1., gap, 1.))
    return checks


def _kgram_inputs(rng, count, T=512, k=2, s_vocab=2):
    out = []
    for _ in range(200 * count):
        x = gen_kgram(T, s_vocab, k, rng)
        windows = x.unfold(0, k, 1)[:-1]
        matches = int((windows == x[-k:]).all(dim=1).sum())
        if matches >= T // 8 and not kgram_boundary_alias(x, k):
            out.append(x)
            if len(out) == count:
                return out
    raise ConstructionInfeasibleError('could not draw enough match-rich inputs')


def _suite_constructions(seed, quick):
    rng = make_rng(spawn_seed(seed, 3))
    count = _size('construction_inputs', quick)
    checks = []

    lt = construct_modp_lt(3, 1, beta=50.)
    err = 0.
    for _ in range(count):
        x = gen_modp(1000, 3, rng)
        out = final_output(lt, INFINITE, to_ids(x))
        err = max(err, abs(float(out[0]) - target_modp(x, 3, 1)))
    checks.append(_check('mod-p construction error', err
                         <= TOLERANCES['modp_error'], err,
                         TOLERANCES['modp_error']))

    lt = construct_simple_lt(3., 1e-3)
    err = 0.
    for _ in range(count):
        x = gen_simple(1000, rng)
        out = final_output(lt, INFINITE, to_ids(x))
        err = max(err, abs(float(out[0]) - target_simple(x, 3.)))
    checks.append(_check('simple construction error', err
                         <= TOLERANCES['simple_error'], err,
                         TOLERANCES['simple_error']))

    lt = construct_kgram_lt(2, 2, beta=30.)
    err = 0.
    for x in _kgram_inputs(rng, count):
        out = final_output(lt, INFINITE, to_ids(x))
        err = max(err, float((out - target_kgram(x, 2, 2)).norm()))
    checks.append(_check('k-gram construction error', err
                         <= TOLERANCES['kgram_error'], err,
                         TOLERANCES['kgram_error']))

    k = 2
    eps = np.array([1e-1, 1e-2, 1e-3])
    logc = [math.log(complexity(construct_kgram_lt(2, k, beta=math.log(1 / e))))
            for e in eps]
    slope = float(linregress(np.log(eps), logc).slope)
    gap = abs(slope + (k + 1) ** 2)
    checks.append(_check('k-gram complexity grows as a power of 1/eps', gap
                         <= TOLERANCES['kgram_slope'], slope,
                         -(k + 1) ** 2))
    return checks


def _joint_pair(rng, length, s_vocab=4):
    """Two one-layer models whose attended classes overlap in one token.

    ``f`` ties two tokens at the top logit and ``g`` ties the second of
    them with a third, so on long inputs both patterns are far larger than
    ``1/eps`` and the rebuilt proportions need rounding. The fourth token
    is sub-maximal for both and serves as filler.
    """
    order = [int(t) for t in rng.permutation(s_vocab)]
    tau = int(rng.integers(0, 2))
    eye = torch.eye(s_vocab, dtype=torch.float64)
    models = []
    for attended in (order[:2], order[1:3]):
        kq = torch.zeros(s_vocab, s_vocab, dtype=torch.float64)
        kq[attended] = 1.
        v = torch.from_numpy(rng.normal(size=(s_vocab, s_vocab)) / 2)
        head = make_head(kq, v, torch.zeros(tau + 1))
        models.append(make_params(s_vocab, s_vocab, 1, tau, eye,
                                  torch.zeros(1, s_vocab),
                                  [([head], zero_mlp(s_vocab))], eye))
    p = rng.dirichlet(2 * np.ones(s_vocab))
    x = torch.from_numpy(rng.choice(s_vocab, size=length, p=p) + 1)
    f, g = models
    return f, g, x, find_filler(f, g, x)


def _joint_ratios(rng, pairs, length, eps_grid, p_bits):
    ratios = {e: [] for e in eps_grid}
    errors = {e: [] for e in eps_grid}
    lengths_ok = True
    for _ in range(pairs):
        f, g, x, filler = _joint_pair(rng, length)
        m_f = max(mlp_bounds(f).m_f, mlp_bounds(g).m_f)
        for e in eps_grid:
            rep = build_joint_sim(f, g, p_bits, x, e, filler=filler)
            err = max(rep.err_f, rep.err_g)
            bound = TOLERANCES['joint_length_factor'] / e ** 2 + f.tau + f.delta
            lengths_ok &= rep.len_z <= bound
            errors[e].append(err)
            ratios[e].append(err / (m_f * (f.s_vocab + f.tau) * e))
    return ratios, errors, lengths_ok


def _suite_joint(seed, quick):
    p_bits = 8
    eps_grid = (0.1, 0.05, 0.02)
    ratios, errors, lengths_ok = _joint_ratios(
        make_rng(spawn_seed(seed, 5)), _size('joint_pairs', quick),
        _size('joint_length', quick), eps_grid, p_bits)
    constant = TOLERANCES['joint_constant']
    growth = TOLERANCES['joint_median_growth']
    floor = TOLERANCES['joint_error_floor']
    worst = max(max(v) for v in ratios.values())
    medians = [float(np.median(errors[e])) for e in eps_grid]
    shrinks = (medians[-1] < medians[0] and
               all(b <= growth * a for a, b in zip(medians, medians[1:])))
    return [
        _check('simulation strings are short', lengths_ok),
        _check('attended proportions need rounding', medians[0] > floor,
               medians[0], floor),
        _check('normalized error is within the frozen constant',
               worst <= constant, worst, constant),
        _check('median error shrinks with eps', shrinks, medians),
    ]


def _training_job(args):
    train_len, seed, quick = args
    task = ModPTask(3, 1)
    cfg = default_config(task, train_len=train_len, seed=seed, d=16,
                         batch=_size('training_batch', quick),
                         max_steps=_size('training_steps', quick))
    model = train(cfg, task).model
    rows = eval_curve(model, task, _size('training_test_lens', quick),
                      _size('training_eval_batches', quick), cfg.batch,
                      seed=seed, train_len=train_len)
    rng = make_rng(spawn_seed(seed, 3))
    length = _size('training_test_lens', quick)[-1]
    profiles = [attention_profile(model, gen_modp(length, 3, rng), 3, 1)
                for _ in range(4)]
    return [r['test_loss'] for r in rows], profiles


def _suite_training(seed, quick):
    train_lens = _size('training_train_lens', quick)
    jobs = [(train_len, spawn_seed(seed, 200 + i), quick)
            for train_len in train_lens
            for i in range(_size('training_seeds', quick))]
    workers = 1 if quick else max_workers(len(jobs))
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_training_job, jobs)
    else:
        results = [_training_job(job) for job in jobs]

    flatness, plateaus = [], {t: [] for t in train_lens}
    profiles = []
    for (train_len, _, _), (losses, prof) in zip(jobs, results):
        plateau = losses[-1]
        flatness.append(abs(losses[-1] - losses[-2]) / max(plateau, 1e-12))
        plateaus[train_len].append(plateau)
        profiles.extend(prof)
    medians = [float(np.median(plateaus[t])) for t in train_lens]
    flat = float(np.median(flatness))
    off = float(np.median([p['off_mass'] for p in profiles]))
    lo = float(np.median([p['min_ratio'] for p in profiles]))
    hi = float(np.median([p['max_ratio'] for p in profiles]))
    ratio = TOLERANCES['on_residue_ratio']
    return [
        _check('test loss flattens in test length',
               flat <= TOLERANCES['plateau_flatness'], flat,
               TOLERANCES['plateau_flatness']),
        _check('plateau does not grow with the training length',
               all(b <= a for a, b in zip(medians, medians[1:])), medians),
        _check('little attention off the target residue',
               off <= TOLERANCES['off_residue_mass'], off,
               TOLERANCES['off_residue_mass']),
        _check('on-residue weights are near uniform',
               1 / ratio <= lo and hi <= ratio, [lo, hi], [1 / ratio, ratio]),
    ]


SUITES = {
    'hardmax': _suite_hardmax,
    'rounding': _suite_rounding,
    'markov': _suite_markov,
    'bulk': _suite_bulk,
    'gradients': _suite_gradients,
    'constructions': _suite_constructions,
    'joint': _suite_joint,
    'training': _suite_training,
}

# too slow for 'all'; run by name
OPT_IN = ('training',)


def run_suite(name, seed=0, quick=False, disp=0):
    if name not in SUITES:
        raise PreconditionError('unknown suite {!r}; expected one of {} or all'
                                .format(name, sorted(SUITES)))
    checks = SUITES[name](seed, quick)
    for c in checks:
        c['value'] = (_float(c['value']) if not isinstance(c['value'], list)
                      else c['value'])
        if disp:
            print('%-8s %-14s %s' % ('PASS' if c['passed'] else 'FAIL', name,
                                     c['name']))
    return dict(suite=name, seed=seed, passed=all(c['passed'] for c in checks),
                checks=checks)


def run_suites(name, seed=0, quick=False, disp=0):
    """Run one suite, or every suite outside :data:`OPT_IN` for
    ``name='all'``."""
    names = ([n for n in sorted(SUITES) if n not in OPT_IN] if name == 'all'
             else [name])
    reports = [run_suite(n, seed, quick, disp) for n in names]
    return dict(suite=name, seed=seed,
                passed=all(r['passed'] for r in reports), reports=reports)
