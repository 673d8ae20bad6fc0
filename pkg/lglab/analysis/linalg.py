import torch

from ..core.params import DTYPE
from ..exceptions import NumericalError

__all__ = ['spectral_norm', 'vector_norm']


def spectral_norm(M, tol=1e-9, max_iter=10000, seed=0):
    """Largest singular value of ``M`` by power iteration on ``M^T M``.

    The start vector is drawn from a generator seeded with ``seed`` so the
    result is reproducible. Iteration stops once the estimate changes by
    at most ``tol`` relative.
    """
    M = torch.as_tensor(M, dtype=DTYPE)
    if M.dim() == 1:
        M = M[None]
    if M.numel() == 0 or M.abs().max() == 0:
        return 0.
    gen = torch.Generator().manual_seed(seed)
    v = torch.randn(M.shape[1], generator=gen, dtype=DTYPE)
    v /= v.norm()
    sigma = 0.
    for _ in range(max_iter):
        u = M @ v
        sigma_new = float(u.norm())
        if sigma_new == 0:
            # start vector in the null space; redraw
            v = torch.randn(M.shape[1], generator=gen, dtype=DTYPE)
            v /= v.norm()
            continue
        w = M.T @ u
        v = w / w.norm()
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return sigma_new
        sigma = sigma_new
    raise NumericalError('power iteration did not converge in {} iterations'
                         .format(max_iter))


def vector_norm(v):
    return float(torch.linalg.vector_norm(torch.as_tensor(v, dtype=DTYPE)))
