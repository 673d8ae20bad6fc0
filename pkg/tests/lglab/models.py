import torch

from lglab.core import make_head, make_params, zero_mlp


def two_token_model(top=1., delta=1, tau=0, phi=None):
    """One-layer model over tokens {1, 2}: keys of token 1 score ``top``,
    keys of token 2 score 0, values copy the embedding."""
    eye = torch.eye(2, dtype=torch.float64)
    kq = torch.tensor([[top, top], [0., 0.]])
    phi = torch.zeros(tau + 1) if phi is None else phi
    head = make_head(kq, eye, phi)
    return make_params(2, 2, delta, tau, eye, torch.zeros(delta, 2),
                       [([head], zero_mlp(2))], eye)


def histogram_tokens(x, s_vocab):
    """One-hot of the last token plus the token histogram of ``x``."""
    x = torch.as_tensor(x)
    eye = torch.eye(s_vocab, dtype=torch.float64)
    return eye[x[-1] - 1] + eye[x - 1].mean(0)


def tied_model(tokens, s_vocab=3, tau=0, v=None):
    """One-layer model whose keys of ``tokens`` share the top logit 1 for
    every query; all other keys score 0."""
    eye = torch.eye(s_vocab, dtype=torch.float64)
    kq = torch.zeros(s_vocab, s_vocab, dtype=torch.float64)
    kq[[t - 1 for t in tokens]] = 1.
    head = make_head(kq, eye if v is None else v, torch.zeros(tau + 1))
    return make_params(s_vocab, s_vocab, 1, tau, eye,
                       torch.zeros(1, s_vocab),
                       [([head], zero_mlp(s_vocab))], eye)
