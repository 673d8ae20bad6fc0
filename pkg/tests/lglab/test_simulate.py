import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from lglab.analysis import hardmax_threshold
from lglab.core import (PrecisionMode, embed, final_output, logits_row,
                        random_grid_params)
from lglab.exceptions import (ConstructionInfeasibleError, FClassError,
                              InvalidDistributionError,
                              NotInHardmaxRegimeError, PreconditionError)
from lglab.simulate import (attention_sets, best_markov_sim, build_joint_sim,
                            bulk_check, dirichlet_seq, find_filler,
                            hard_forward, markov_subsample, ratio_rounding,
                            report_to_dict, suffix_sim, token_counts)
from lglab.verify import histogram_model
from .models import histogram_tokens, tied_model, two_token_model


def test_token_counts():
    counts = token_counts([1, 2, 1, 1], 2, 0)
    assert counts.tolist() == [[1, 2], [1, 0]]


def test_token_counts_skip_window():
    # with tau=1 the last position is left out
    counts = token_counts([1, 2, 1, 1], 2, 1)
    assert counts.tolist() == [[0, 2], [1, 0]]
    with pytest.raises(PreconditionError):
        token_counts([1], 1, 1)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=30)
       .filter(lambda w: sum(w) > 0),
       st.integers(1, 10000))
def test_ratio_rounding(weights, N):
    p = np.array(weights, dtype=float) / sum(weights)
    m = ratio_rounding(p, N)
    assert int(m.sum()) == N
    assert (m >= 0).all()
    assert float((m.double() - torch.from_numpy(p) * N).abs().max()) <= 1.


def test_ratio_rounding_rejects_bad_input():
    with pytest.raises(InvalidDistributionError):
        ratio_rounding([0.5, 0.6], 10)
    with pytest.raises(InvalidDistributionError):
        ratio_rounding([1.5, -0.5], 10)
    with pytest.raises(PreconditionError):
        ratio_rounding([1.], 0)


@pytest.mark.parametrize('delta,length', [(1, 4), (3, 4), (4, 6), (10, 10)])
def test_suffix_sim(delta, length):
    x = torch.arange(1, 11)
    z = suffix_sim(x, 4, delta)
    assert z.numel() == length
    assert z.numel() % delta == x.numel() % delta
    torch.testing.assert_close(z, x[-length:])


def test_suffix_sim_errors():
    with pytest.raises(PreconditionError):
        suffix_sim([1, 2, 3], 5, 1)
    with pytest.raises(PreconditionError):
        suffix_sim([1, 2, 3], 1, 1, tau=2)


@pytest.mark.parametrize('n,tau', [(10, 0), (50, 2), (200, 1)])
def test_markov_subsample(n, tau):
    rng = np.random.default_rng(0)
    x = torch.ones(1000, dtype=torch.long)
    expected = n + (tau + 1) * (1 - n / 1000)
    for _ in range(200):
        idx = markov_subsample(x, n, tau, rng)
        assert (idx[1:] > idx[:-1]).all()
        assert idx[0] >= 1
        assert idx[-(tau + 1):].tolist() == list(range(1000 - tau, 1001))
        assert abs(idx.numel() - expected) <= 2 * n ** (1. / 3)


@pytest.mark.parametrize('n,tau', [(100, 0), (1000, 2)])
def test_markov_subsample_sizes_concentrate(n, tau):
    rng = np.random.default_rng(1)
    x = torch.ones(20000, dtype=torch.long)
    slack = tau + 1 + 4 * n ** (1. / 3)
    misses = sum(abs(markov_subsample(x, n, tau, rng).numel() - n) > slack
                 for _ in range(1000))
    assert misses <= 150


def test_raw_chain_size_is_unbiased():
    rng = np.random.default_rng(2)
    x = torch.ones(1000, dtype=torch.long)
    sizes = np.array([markov_subsample(x, 50, 2, rng, max_draws=1).numel()
                      for _ in range(4000)])
    expected = 50 + 3 * (1 - 50 / 1000)
    assert abs(sizes.mean() - expected) <= 4 * sizes.std() / np.sqrt(4000)


def test_markov_subsample_keeps_everything_at_full_size():
    idx = markov_subsample(torch.ones(7, dtype=torch.long), 7, 0, 0)
    assert idx.tolist() == list(range(1, 8))


def test_best_markov_sim_is_reproducible():
    f = histogram_model(3)
    x, _ = dirichlet_seq([1., 1., 1.], 2000, 0)
    a = best_markov_sim(f, x, 100, 0, k_tries=4, seed=5)
    b = best_markov_sim(f, x, 100, 0, k_tries=4, seed=5)
    torch.testing.assert_close(a.z, b.z)
    assert a.err_f == b.err_f
    assert a.method == 'markov' and a.err_g is None
    assert a.err_f == pytest.approx(float(
        (histogram_tokens(x, 3) - histogram_tokens(a.z, 3)).norm()))
    doc = report_to_dict(a)
    assert doc['len_z'] == len(doc['z']) == a.z.numel()


def test_more_tries_do_not_hurt():
    f = histogram_model(3)
    x, _ = dirichlet_seq([1., 1., 1.], 3000, 0)

    def median_err(k_tries):
        return np.median([best_markov_sim(f, x, 100, 0, k_tries=k_tries,
                                          seed=s).err_f for s in range(50)])

    assert median_err(32) <= median_err(1)


def test_best_markov_sim_needs_fclass_shape():
    f = random_grid_params(0, delta=2)
    with pytest.raises(FClassError):
        best_markov_sim(f, [1, 2, 3, 1], 2, 0, seed=0)


def test_attention_sets():
    f = two_token_model(2.)
    x = [2, 1, 2, 2, 1, 2, 2, 2]
    with pytest.raises(NotInHardmaxRegimeError):
        attention_sets(f, 16, x)
    sets = attention_sets(f, 16, x, force=True)
    assert sets.prefix_positions.tolist() == [2, 5]
    assert sets.prefix_pairs == frozenset({(1, 0)})
    assert sets.suffix_positions.numel() == 0


@pytest.mark.parametrize('seed', range(6))
def test_hard_forward_matches_finite_forward(seed):
    rng = np.random.default_rng(seed)
    delta, tau = int(rng.integers(1, 4)), int(rng.integers(0, 3))
    f = random_grid_params(rng, s_vocab=3, delta=delta, tau=tau)
    n = hardmax_threshold(f, 16)
    x = torch.from_numpy(rng.integers(1, 4, size=max(n, tau + 2)))
    out = final_output(f, PrecisionMode.finite(16), x)
    torch.testing.assert_close(out, hard_forward(f, x), rtol=0, atol=1e-8)


def test_hard_forward_counts_a_boosted_window_key():
    # the query reaches the top logit through phi; its token class stays out
    f = two_token_model(1., phi=torch.tensor([1.]))
    x = torch.tensor([1, 2] * 200)
    expected = torch.tensor([200 / 201, 1 + 1 / 201], dtype=torch.float64)
    torch.testing.assert_close(hard_forward(f, x), expected)
    out = final_output(f, PrecisionMode.finite(8), x)
    torch.testing.assert_close(out, expected, rtol=0, atol=1e-8)


def test_bulk_check():
    p = np.array([0.5, 0.5])
    x = torch.tensor([1, 2] * 50 + [2, 1] * 50)
    assert bulk_check(x, p, 2, 0, 0.05)
    assert not bulk_check(torch.tensor([1, 2] * 100), p, 2, 0, 0.05)


def test_dirichlet_seq():
    x, p = dirichlet_seq([1., 2., 3.], 500, 3)
    assert x.shape == (500,)
    assert int(x.min()) >= 1 and int(x.max()) <= 3
    assert float(p.sum()) == pytest.approx(1.)
    y, q = dirichlet_seq([1., 2., 3.], 500, 3)
    torch.testing.assert_close(x, y)
    torch.testing.assert_close(p, q)
    with pytest.raises(PreconditionError):
        dirichlet_seq([1., 0.], 5, 0)


def joint_pair(seed, length=1000):
    rng = np.random.default_rng(seed)
    while True:
        f = random_grid_params(rng, s_vocab=3, delta=2, tau=1)
        g = random_grid_params(rng, s_vocab=3, delta=2, tau=1)
        x = torch.from_numpy(rng.integers(1, 4, size=length))
        try:
            return f, g, x, find_filler(f, g, x)
        except ConstructionInfeasibleError:
            continue


@pytest.mark.parametrize('seed', range(4))
@pytest.mark.parametrize('eps', [0.1, 0.02])
def test_build_joint_sim(seed, eps):
    f, g, x, filler = joint_pair(seed)
    report = build_joint_sim(f, g, 8, x, eps, filler=filler)
    z = report.z
    threshold = max(hardmax_threshold(f, 8), hardmax_threshold(g, 8))
    assert report.method == 'joint_hard'
    assert report.len_z == z.numel()
    assert z.numel() >= threshold
    assert z.numel() <= 20 / eps ** 2 + f.tau + f.delta
    assert z.numel() % f.delta == x.numel() % f.delta
    torch.testing.assert_close(z[-(f.tau + 1):], x[-(f.tau + 1):])
    assert int(z.min()) >= 1 and int(z.max()) <= 3


def test_build_joint_sim_checks_regime():
    f, g, x, filler = joint_pair(0)
    threshold = max(hardmax_threshold(f, 16), hardmax_threshold(g, 16))
    if threshold <= 2:
        pytest.skip('threshold too small to undercut')
    with pytest.raises(NotInHardmaxRegimeError):
        build_joint_sim(f, g, 16, x[:threshold - 1], 0.1, filler=filler)


def test_build_joint_sim_rejects_bad_eps():
    f, g, x, filler = joint_pair(1)
    for eps in (0., 1., 2.):
        with pytest.raises(PreconditionError):
            build_joint_sim(f, g, 8, x, eps, filler=filler)


def test_build_joint_sim_keeps_filler_below_the_top():
    for seed in range(4):
        f, g, x, filler = joint_pair(seed)
        z = build_joint_sim(f, g, 8, x, 0.05, filler=filler).z
        bulk = z[:-(f.tau + 1)]
        mode = PrecisionMode.finite(1)
        for model in (f, g):
            top = logits_row(model, mode, embed(model, x), 0, 0,
                             x.numel()).max()
            logits = logits_row(model, mode, embed(model, z), 0, 0, z.numel())
            slots = logits[:bulk.numel()][bulk == filler]
            assert (slots < top - 1e-9).all()


def test_small_patterns_are_copied_exactly():
    f = tied_model([1, 2])
    g = tied_model([1])
    x = torch.full((300,), 3, dtype=torch.long)
    x[[9, 49, 89, 129]] = 1
    x[[19, 59, 99]] = 2
    assert find_filler(f, g, x) == 3
    report = build_joint_sim(f, g, 8, x, 0.1, filler=3)
    assert int((report.z == 1).sum()) == 4
    assert int((report.z == 2).sum()) == 3
    assert report.len_z == hardmax_threshold(f, 8)
    assert report.err_f <= 1e-12 and report.err_g <= 1e-12


@pytest.mark.parametrize('seed', range(3))
def test_identical_models_share_the_error(seed):
    f, _, x, filler = joint_pair(seed)
    report = build_joint_sim(f, f, 8, x, 0.1, filler=filler)
    assert report.err_f == report.err_g
