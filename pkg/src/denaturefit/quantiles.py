"""Student t and F quantiles."""

from __future__ import annotations

import math

from scipy.special import fdtri, stdtrit

__all__ = ["t_quantile", "f_quantile"]


def t_quantile(p: float, dof: float) -> float:
    """Inverse CDF of Student's t with ``dof`` degrees of freedom."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not dof > 0:
        raise ValueError(f"dof must be positive, got {dof}")
    if p == 0.5:
        return 0.0
    # closed forms where the library inverse is only good to ~1e-11
    if dof == 1:
        return math.tan(math.pi * (p - 0.5))
    if dof == 2:
        a = 4.0 * p * (1.0 - p)
        return (2.0 * p - 1.0) * math.sqrt(2.0 / a)
    return float(stdtrit(dof, p))


def f_quantile(p: float, dfn: float, dfd: float) -> float:
    """Inverse CDF of the F distribution."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    if not (dfn > 0 and dfd > 0):
        raise ValueError("degrees of freedom must be positive")
    if p == 0.0:
        return 0.0
    return float(fdtri(dfn, dfd, p))
