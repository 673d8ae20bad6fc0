"""Trainable softmax transformers and their export to limit-transformer form.

Trained models use standard softmax attention: logits are
``(W_k y_j) . (W_q y_i) / sqrt(d)`` plus an optional additive bias on the
offsets ``0..tau``, with no length-dependent scaling.
"""
import math
import torch
import torch.nn as nn

from .config import ArchConfig
from ..core.params import DTYPE, make_head, make_mlp, make_params
from ..core.serialization import params_from_dict, params_to_dict
from ..exceptions import PreconditionError
from ..tasks.specs import n_symbols, out_dim

__all__ = ['LGTransformer', 'init_model', 'to_checkpoint', 'from_checkpoint']


def _normal(gen, *shape, std=1.):
    return nn.Parameter(torch.randn(*shape, generator=gen, dtype=DTYPE) * std)


class _Layer(nn.Module):
    def __init__(self, d, n_heads, mlp_width, tau, gen, relative=True):
        super().__init__()
        std = 1 / math.sqrt(d)
        self.wq = _normal(gen, n_heads, d, d, std=std)
        self.wk = _normal(gen, n_heads, d, d, std=std)
        self.wv = _normal(gen, n_heads, d, d, std=std)
        bias = torch.zeros(n_heads, tau + 1, dtype=DTYPE)
        if relative:
            self.bias = nn.Parameter(bias)
        else:
            self.register_buffer('bias', bias)
        self.w1 = _normal(gen, mlp_width, d, std=std)
        self.b1 = nn.Parameter(torch.zeros(mlp_width, dtype=DTYPE))
        self.w2 = _normal(gen, d, mlp_width, std=1 / math.sqrt(mlp_width))
        self.scale = 1 / math.sqrt(d)

    @property
    def tau(self):
        return self.bias.shape[1] - 1

    def logits(self, y):
        """Attention logits, shape ``(batch, heads, T, T)``."""
        T = y.shape[1]
        q = torch.einsum('hed,btd->bhte', self.wq, y)
        k = torch.einsum('hed,btd->bhte', self.wk, y)
        logits = q @ k.transpose(-1, -2) * self.scale
        offset = torch.arange(T)[:, None] - torch.arange(T)[None, :]
        local = (offset >= 0) & (offset <= self.tau)
        bias = self.bias[:, offset.clamp(0, self.tau)] * local
        logits = logits + bias[None]
        return logits.masked_fill(offset < 0, -math.inf)

    def forward(self, y, return_attention=False):
        attn = torch.softmax(self.logits(y), dim=-1)
        values = torch.einsum('hed,btd->bhte', self.wv, y)
        Y = y + (attn @ values).sum(1)
        out = Y + torch.relu(Y @ self.w1.T + self.b1) @ self.w2.T
        return (out, attn) if return_attention else out


class LGTransformer(nn.Module):
    """Residual transformer with a linear readout at the final position.

    Inputs are ``(batch, T)`` tensors of 0-based symbols. Depth-2 models
    have ``arch.heads_l1`` heads in the first layer and one head in the
    second.
    """
    def __init__(self, arch, s_vocab, out_dim, generator=None):
        super().__init__()
        arch.validate()
        gen = generator if generator is not None else torch.Generator()
        d = arch.d
        self.arch = arch
        self.s_vocab = s_vocab
        self.embed = _normal(gen, s_vocab, d, std=1.)
        if arch.pe == 'periodic':
            self.pos = _normal(gen, arch.period, d, std=1.)
        else:
            self.register_parameter('pos', None)
        heads = [arch.heads_l1] + [1] * (arch.depth - 1)
        self.layers = nn.ModuleList(
            _Layer(d, h, arch.mlp_width, arch.tau, gen,
                   relative=arch.pe == 'relative_local') for h in heads)
        self.readout = _normal(gen, out_dim, d, std=1 / math.sqrt(d))

    @property
    def out_dim(self):
        return self.readout.shape[0]

    def embed_inputs(self, x):
        if x.dim() == 1:
            x = x[None]
        if x.min() < 0 or x.max() >= self.s_vocab:
            raise PreconditionError('symbols must lie in 0..{}'
                                    .format(self.s_vocab - 1))
        y = self.embed[x]
        if self.pos is not None:
            rows = torch.arange(x.shape[1]) % self.pos.shape[0]
            y = y + self.pos[rows]
        return y

    def forward(self, x, return_attention=False):
        """Final-position outputs, shape ``(batch, out_dim)``."""
        y = self.embed_inputs(x)
        maps = []
        for layer in self.layers:
            y, attn = layer(y, return_attention=True)
            maps.append(attn)
        out = y[:, -1] @ self.readout.T
        return (out, maps) if return_attention else out

    def hidden_groups(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def embedding_groups(self):
        return [p for p in (self.embed, self.pos, self.readout) if p is not None]


def init_model(cfg, task, rng=None):
    """Fan-in scaled Gaussian initialization seeded from ``cfg.seed``.

    Hidden matrices have variance ``1/fan_in``; embeddings and positional
    tables have unit variance.
    """
    gen = torch.Generator()
    gen.manual_seed(int(cfg.seed if rng is None else rng.integers(2 ** 62)))
    return LGTransformer(cfg.arch, n_symbols(task), out_dim(task), gen)


def to_checkpoint(model):
    """Export a trained model as a limit-transformer parameter document.

    Each head's key-query product becomes ``W_k^T W_q / sqrt(d)`` and its
    offset biases become ``phi``. The document carries ``pe_kind`` and
    ``attn_scaling: "standard"``.
    """
    arch = model.arch
    with torch.no_grad():
        d = arch.d
        layers = []
        for layer in model.layers:
            heads = [make_head(layer.wk[h].T @ layer.wq[h] * layer.scale,
                               layer.wv[h].detach(), layer.bias[h].detach())
                     for h in range(layer.wq.shape[0])]
            mlp = make_mlp(layer.w1.detach(), layer.b1.detach(),
                           layer.w2.detach(), 'relu')
            layers.append((heads, mlp))
        pos = (model.pos if model.pos is not None
               else torch.zeros(1, d, dtype=DTYPE))
        meta = {'pe_kind': arch.pe, 'attn_scaling': 'standard',
                'arch': arch.to_dict()}
        params = make_params(model.s_vocab, d, pos.shape[0], arch.tau,
                             model.embed.detach(), pos.detach(), layers,
                             model.readout.detach(), meta=meta)
    return params_to_dict(params)


def from_checkpoint(doc):
    """Rebuild a :class:`LGTransformer` computing the same function.

    Query maps are set to ``sqrt(d)`` times the identity and key maps to
    the transposed key-query products.
    """
    params = params_from_dict(doc) if isinstance(doc, dict) else doc
    meta = params.meta
    if meta.get('attn_scaling') != 'standard':
        raise PreconditionError('checkpoint is not a standard-softmax model')
    arch = ArchConfig.from_dict(meta['arch'])
    model = LGTransformer(arch, params.s_vocab, params.out_dim)
    eye = torch.eye(arch.d, dtype=DTYPE)
    with torch.no_grad():
        model.embed.copy_(params.embed)
        if model.pos is not None:
            model.pos.copy_(params.pos)
        for layer, lt_layer in zip(model.layers, params.layers):
            for h, head in enumerate(lt_layer.heads):
                layer.wq[h].copy_(eye / layer.scale)
                layer.wk[h].copy_(head.kq.T)
                layer.wv[h].copy_(head.v)
                layer.bias[h].copy_(head.phi)
            layer.w1.copy_(lt_layer.mlp.a)
            layer.b1.copy_(lt_layer.mlp.bias)
            layer.w2.copy_(lt_layer.mlp.b)
        model.readout.copy_(params.unembed)
    return model
