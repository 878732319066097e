"""Ridge-regularized Hermitian normal-equation solve shared by FCP and Wiener filters."""

import torch

from ..errors import RankDeficientError

# A Cholesky pivot below this fraction of the mean diagonal counts as singular.
_PIVOT_FLOOR = 1e-13


def solve_normal_equations(
    gram: torch.Tensor,
    rhs: torch.Tensor,
    ridge: float | None = None,
    relative_ridge: float = 1e-6,
) -> torch.Tensor:
    """Solve ``(gram + eps * I) x = rhs`` for a batch of Hermitian PSD systems.

    Args:
        gram: ``(..., n, n)`` Hermitian positive semi-definite matrices.
        rhs: ``(..., n)`` right-hand sides.
        ridge: Absolute ridge eps. ``None`` uses ``relative_ridge`` times the
            mean diagonal of each system.
        relative_ridge: Relative ridge used when ``ridge`` is None.

    Returns:
        ``(..., n)`` solutions. Systems whose Gram matrix is exactly zero (no
        signal energy) get a zero solution.

    Raises:
        RankDeficientError: a system is singular for the requested ridge.
    """
    size = gram.shape[-1]
    scale = torch.diagonal(gram, dim1=-2, dim2=-1).real.mean(dim=-1)
    silent = scale <= 0
    eps = relative_ridge * scale if ridge is None else torch.full_like(scale, ridge)

    eye = torch.eye(size, dtype=gram.dtype)
    system = gram + eps[..., None, None] * eye
    system = torch.where(silent[..., None, None], eye, system)
    target = torch.where(silent[..., None], torch.zeros_like(rhs), rhs)

    factor, info = torch.linalg.cholesky_ex(system)
    pivots = torch.diagonal(factor, dim1=-2, dim2=-1).real ** 2
    floor = _PIVOT_FLOOR * torch.where(silent, torch.ones_like(scale), scale)
    failed = ((info > 0) | (pivots < floor[..., None]).any(dim=-1)) & ~silent
    if bool(failed.any()):
        raise RankDeficientError()

    return torch.cholesky_solve(target.unsqueeze(-1), factor).squeeze(-1)
