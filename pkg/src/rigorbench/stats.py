"""Correlation tests for metric-vs-support analyses.

Pearson and Spearman coefficients are computed from first principles. The
two-tailed p-value uses the exact relationship between the t statistic and
the regularized incomplete beta function,

    p = I_{df/(df+t^2)}(df/2, 1/2),

with the beta integral evaluated by scipy.special.betainc. For tiny samples
a full-permutation Spearman test is available as a cross-check on the
t-approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.special import betainc

from .errors import BadDf, ConstantInput, LengthMismatch


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int
    method: str  # "pearson" | "spearman" | "spearman_exact"

    def to_json_obj(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "p_value": self.p_value,
            "n": self.n,
            "method": self.method,
        }


def _as_vectors(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.ndim != 1 or yv.ndim != 1 or xv.size != yv.size:
        raise LengthMismatch(f"paired vectors required, got sizes {xv.size} and {yv.size}")
    if xv.size < 3:
        raise LengthMismatch(f"need at least 3 points, got {xv.size}")
    return xv, yv


def t_two_tailed_p(t: float, df: int) -> float:
    """Two-tailed tail probability of Student's t with df degrees of freedom."""
    if not isinstance(df, (int, np.integer)) or df < 1:
        raise BadDf(f"degrees of freedom must be a positive integer, got {df!r}")
    t = float(t)
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def _t_test_p(r: float, n: int) -> float:
    # |r| = 1 means the t statistic diverges; the tail probability is 0
    if 1.0 - r * r < 1e-15:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return t_two_tailed_p(t, n - 2)


def pearson(x, y) -> CorrelationResult:
    """Pearson product-moment correlation with a t-based two-tailed p.

    Both vectors must have at least 3 points and nonzero variance.
    """
    xv, yv = _as_vectors(x, y)
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0:
        raise ConstantInput("first vector is constant, correlation undefined")
    if sy == 0.0:
        raise ConstantInput("second vector is constant, correlation undefined")
    r = float((xc * yc).sum() / (sx * sy))
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(
        coefficient=r, p_value=_t_test_p(r, xv.size), n=int(xv.size), method="pearson"
    )


def rankdata(values) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their ranks."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> CorrelationResult:
    """Spearman rank correlation: Pearson on average ranks, t-based p."""
    xv, yv = _as_vectors(x, y)
    rx = rankdata(xv)
    ry = rankdata(yv)
    if np.all(rx == rx[0]):
        raise ConstantInput("first vector is constant, correlation undefined")
    if np.all(ry == ry[0]):
        raise ConstantInput("second vector is constant, correlation undefined")
    inner = pearson(rx, ry)
    return CorrelationResult(
        coefficient=inner.coefficient, p_value=inner.p_value, n=inner.n, method="spearman"
    )


_EXACT_LIMIT = 10


def spearman_exact(x, y) -> CorrelationResult:
    """Exact permutation two-tailed p for the Spearman coefficient, n <= 10.

    Enumerates all n! pairings of the y-ranks and counts coefficients at
    least as extreme (in absolute value) as observed. Mainly a cross-check
    for the t-approximation at the small n where the approximation is worst.
    """
    xv, yv = _as_vectors(x, y)
    n = xv.size
    if n > _EXACT_LIMIT:
        raise LengthMismatch(f"exact permutation test supports n <= {_EXACT_LIMIT}, got {n}")
    observed = spearman(xv, yv)
    rx = rankdata(xv)
    ry = rankdata(yv)
    rx_c = rx - rx.mean()
    sx = math.sqrt(float((rx_c * rx_c).sum()))
    threshold = abs(observed.coefficient) - 1e-12
    count = 0
    total = 0
    for perm in permutations(range(n)):
        ry_p = ry[list(perm)]
        ry_c = ry_p - ry_p.mean()
        sy = math.sqrt(float((ry_c * ry_c).sum()))
        rho = float((rx_c * ry_c).sum()) / (sx * sy)
        if abs(rho) >= threshold:
            count += 1
        total += 1
    return CorrelationResult(
        coefficient=observed.coefficient,
        p_value=count / total,
        n=n,
        method="spearman_exact",
    )


def correlate(x, y, method: str = "pearson") -> CorrelationResult:
    if method == "pearson":
        return pearson(x, y)
    if method == "spearman":
        return spearman(x, y)
    if method == "spearman_exact":
        return spearman_exact(x, y)
    raise ValueError(f"unknown correlation method {method!r}")
