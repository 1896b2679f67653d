# backend/app/stopping/ols.py

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.linalg import qr, solve_triangular
from scipy.special import betainc

logger = logging.getLogger(__name__)

# relative to the largest pivot of R
RANK_TOLERANCE = 1e-10


class OLSError(Exception):
    """Regression cannot be fit (too few rows, singular design)."""

    pass


class OLSResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    columns: List[str]  # kept columns, in design order
    coefficients: List[float]
    standard_errors: List[float]
    t_values: List[float]
    p_values: List[float]
    dof: int
    dropped: List[str] = []

    def coefficient(self, column: str) -> Optional[float]:
        try:
            return self.coefficients[self.columns.index(column)]
        except ValueError:
            return None

    def p_value(self, column: str) -> Optional[float]:
        try:
            return self.p_values[self.columns.index(column)]
        except ValueError:
            return None


def t_two_sided_p(t: float, dof: int) -> float:
    """P(|T| >= |t|) for Student's t with `dof` degrees of freedom (regularized incomplete beta)."""
    if dof < 1:
        raise OLSError(f"t distribution needs dof >= 1, got {dof}")
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    return float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def _independent_columns(X: np.ndarray) -> List[int]:
    """Column indices spanning X, found by QR with column pivoting, in design order."""
    _, R, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return []
    rank = int(np.sum(diag > RANK_TOLERANCE * diag[0]))
    return sorted(int(c) for c in piv[:rank])


def ols_fit(
    X: np.ndarray,
    y: np.ndarray,
    columns: Optional[Sequence[str]] = None,
) -> OLSResult:
    """
    Least squares through QR. Linearly dependent columns are dropped with a
    warning; standard errors come from sigma^2 (X'X)^-1 and two-sided p-values
    from the exact t distribution with n - k degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise OLSError(f"design must be 2-D, got shape {X.shape}")
    n, k = X.shape
    if y.shape[0] != n:
        raise OLSError(f"design has {n} rows, response has {y.shape[0]}")
    names = list(columns) if columns is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise OLSError(f"{len(names)} column names for {k} columns")
    if n <= k:
        raise OLSError(f"OLS needs more rows than columns (n={n}, k={k})")

    keep = _independent_columns(X)
    if not keep:
        raise OLSError("design matrix is zero")
    dropped = [names[j] for j in range(k) if j not in keep]
    if dropped:
        logger.warning("dropping %d linearly dependent columns: %s", len(dropped), ", ".join(dropped))

    Xk = X[:, keep]
    Q, R = np.linalg.qr(Xk)
    diag = np.abs(np.diag(R))
    if np.any(diag <= RANK_TOLERANCE * diag.max()):
        raise OLSError("design is singular after dropping dependent columns")

    beta = solve_triangular(R, Q.T @ y)
    resid = y - Xk @ beta
    dof = n - len(keep)
    sigma2 = float(resid @ resid) / dof

    R_inv = solve_triangular(R, np.eye(len(keep)))
    cov = sigma2 * (R_inv @ R_inv.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    t_values: List[float] = []
    for b, s in zip(beta, se):
        if s > 0:
            t_values.append(float(b / s))
        elif b == 0:
            t_values.append(0.0)
        else:
            # exact fit
            t_values.append(math.copysign(math.inf, b))
    p_values = [t_two_sided_p(t, dof) for t in t_values]

    return OLSResult(
        columns=[names[j] for j in keep],
        coefficients=[float(b) for b in beta],
        standard_errors=[float(s) for s in se],
        t_values=t_values,
        p_values=p_values,
        dof=dof,
        dropped=dropped,
    )
