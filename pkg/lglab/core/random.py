"""Random model builders used by tests and verification suites."""
import numpy as np
import torch

from .params import make_head, make_mlp, make_params
from ..rng import make_rng

__all__ = ['random_params', 'random_grid_params']


def _normal(rng, *shape, scale=1.):
    return torch.from_numpy(rng.normal(scale=scale, size=shape))


def random_params(rng, s_vocab=3, d=4, delta=1, tau=0, n_layers=1, n_heads=1,
                  mlp_width=4, out_dim=None, activation='relu', scale=1.,
                  fclass=False):
    """Gaussian limit transformer.

    With ``fclass=True`` the model has the two-layer shape analyzed by the
    positional margin and complexity: zero positional table, nonnegative
    first-layer phi and a single phi-free second-layer head.
    """
    rng = make_rng(rng)
    if fclass:
        n_layers = 2
    out_dim = d if out_dim is None else out_dim
    s = scale / np.sqrt(d)
    layers = []
    for l in range(n_layers):
        heads = []
        for _ in range(1 if fclass and l == 1 else n_heads):
            phi = _normal(rng, tau + 1)
            if fclass:
                phi = phi.abs() if l == 0 else torch.zeros(tau + 1)
            heads.append(make_head(_normal(rng, d, d, scale=s),
                                   _normal(rng, d, d, scale=s), phi))
        mlp = make_mlp(_normal(rng, mlp_width, d, scale=scale),
                       _normal(rng, mlp_width, scale=s),
                       _normal(rng, d, mlp_width, scale=scale / np.sqrt(mlp_width)),
                       activation)
        layers.append((heads, mlp))
    pos = torch.zeros(delta, d) if fclass else _normal(rng, delta, d, scale=s)
    return make_params(s_vocab, d, delta, tau, _normal(rng, s_vocab, d, scale=s),
                       pos, layers, _normal(rng, out_dim, d, scale=s))


def random_grid_params(rng, s_vocab=3, delta=1, tau=0, n_heads=1, kq_range=2,
                       phi_range=2, mlp_width=4, out_dim=None,
                       activation='relu'):
    """One-layer model whose attention logits are integers.

    Tokens and residues get orthonormal directions, so every logit is a sum
    of integer ``kq`` and ``phi`` entries and the logit margin is at least 1.
    """
    rng = make_rng(rng)
    d = s_vocab + delta
    eye = torch.eye(d, dtype=torch.float64)
    out_dim = d if out_dim is None else out_dim
    heads = []
    for _ in range(n_heads):
        kq = rng.integers(-kq_range, kq_range + 1, size=(d, d))
        phi = rng.integers(0, phi_range + 1, size=tau + 1)
        heads.append(make_head(kq, _normal(rng, d, d, scale=1 / np.sqrt(d)), phi))
    mlp = make_mlp(_normal(rng, mlp_width, d),
                   _normal(rng, mlp_width, scale=1 / np.sqrt(d)),
                   _normal(rng, d, mlp_width, scale=1 / np.sqrt(mlp_width)),
                   activation)
    return make_params(s_vocab, d, delta, tau, eye[:s_vocab], eye[s_vocab:],
                       [(heads, mlp)],
                       _normal(rng, out_dim, d, scale=1 / np.sqrt(d)))
