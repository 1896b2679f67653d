# backend/app/environments/welfare.py

"""
Group-welfare bound U_max for the exchange economy.

Maximizes U = sum_i prod_k a_ik ** theta_ik subject to every good column
summing to 100. The main optimizer is multi-start projected-gradient ascent;
`grid_oracle` is the independent block-coordinate grid search (plus SLSQP
polish) used to certify it.
"""

from __future__ import annotations

import itertools
import logging
from functools import lru_cache
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize

from app.environments.economy import (
    GOOD_QUANTITY,
    UtilitySetPreset,
    even_split,
    preset_thetas,
)

logger = logging.getLogger(__name__)

# floor for the log-space gradient at the simplex boundary
_EPS = 1e-12


class OptimizerError(Exception):
    """No start converged; carries the best value seen so far."""

    def __init__(self, message: str, best_value: float, best_allocation: np.ndarray):
        super().__init__(message)
        self.best_value = best_value
        self.best_allocation = best_allocation


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    starts: int = Field(default=32, ge=1)
    max_iter: int = Field(default=10_000, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    initial_step: float = Field(default=10.0, gt=0)
    min_step: float = Field(default=1e-12, gt=0)
    seed: int = 0
    # grid oracle
    grid_step: float = Field(default=2.0, gt=0)
    certify_tolerance: float = Field(default=0.005, ge=0)


class UMaxResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: float
    allocation: List[List[float]]
    optimizer_value: float
    oracle_value: Optional[float] = None
    certified: bool = False
    converged_starts: int


# ----------------------------------------------------------------------
# Objective
# ----------------------------------------------------------------------


def _row_utilities(alloc: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    # 0 ** 0 == 1 falls out of np.power; zero amounts with positive exponent give 0
    return np.prod(np.power(alloc, thetas), axis=1)


def welfare(alloc: np.ndarray, thetas: np.ndarray) -> float:
    return float(_row_utilities(np.clip(alloc, 0.0, None), thetas).sum())


def welfare_gradient(alloc: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """dU/da_ik = theta_ik * u_i / a_ik, evaluated on an epsilon-floored copy."""
    safe = np.maximum(alloc, _EPS)
    u = _row_utilities(safe, thetas)
    return thetas * u[:, None] / safe


def project_columns(matrix: np.ndarray, total: float = GOOD_QUANTITY) -> np.ndarray:
    """
    Euclidean projection of every column onto {y >= 0, sum(y) = total}.
    Sort-based simplex projection applied along axis 0.
    """
    v = matrix.T
    n = v.shape[1]
    u = np.sort(v, axis=1)[:, ::-1]
    cssv = np.cumsum(u, axis=1) - total
    ind = np.arange(n) + 1
    cond = u - cssv / ind > 0
    rho = np.count_nonzero(cond, axis=1)
    theta = cssv[np.arange(len(v)), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0).T


# ----------------------------------------------------------------------
# Projected-gradient ascent
# ----------------------------------------------------------------------


def _ascend(start: np.ndarray, thetas: np.ndarray, cfg: OptimizerConfig):
    x = project_columns(start)
    f = welfare(x, thetas)
    step = cfg.initial_step

    for _ in range(cfg.max_iter):
        grad = welfare_gradient(x, thetas)
        while step >= cfg.min_step:
            candidate = project_columns(x + step * grad)
            f_c = welfare(candidate, thetas)
            if f_c > f:
                break
            step *= 0.5
        else:
            # no ascent direction left at this resolution: stationary
            return x, f, True

        gain = f_c - f
        x, f = candidate, f_c
        if gain < cfg.tol:
            return x, f, True
        step = min(step * 2.0, cfg.initial_step)

    return x, f, False


def _starts(k: int, cfg: OptimizerConfig) -> List[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    starts = [even_split(k)]
    while len(starts) < cfg.starts:
        shares = rng.dirichlet(np.ones(k), size=k).T
        starts.append(shares * GOOD_QUANTITY)
    return starts


def optimize_welfare(thetas: np.ndarray, cfg: Optional[OptimizerConfig] = None):
    """Best (value, allocation, converged_starts) over all starts."""
    cfg = cfg or OptimizerConfig()
    k = thetas.shape[0]

    best_f = -np.inf
    best_x = even_split(k)
    converged = 0
    for start in _starts(k, cfg):
        x, f, ok = _ascend(start, thetas, cfg)
        converged += int(ok)
        if ok and f > best_f:
            best_f, best_x = f, x

    if converged == 0:
        fallback = max((_ascend(s, thetas, cfg) for s in _starts(k, cfg)), key=lambda r: r[1])
        raise OptimizerError(
            f"Projected-gradient ascent did not converge from any of {cfg.starts} starts",
            best_value=float(fallback[1]),
            best_allocation=fallback[0],
        )
    return float(best_f), best_x, converged


# ----------------------------------------------------------------------
# Grid oracle
# ----------------------------------------------------------------------


@lru_cache(maxsize=16)
def _compositions(k: int, units: int) -> np.ndarray:
    """All ways to split `units` grid steps among k agents (stars and bars)."""
    rows = []
    for bars in itertools.combinations(range(units + k - 1), k - 1):
        edges = (-1,) + bars + (units + k - 1,)
        rows.append([edges[j + 1] - edges[j] - 1 for j in range(k)])
    return np.asarray(rows, dtype=float)


def grid_oracle(
    thetas: np.ndarray, step: float = 2.0, max_sweeps: int = 50, polish: bool = True
) -> tuple[float, np.ndarray]:
    """
    Block-coordinate search: each sweep re-splits one good at a time over a
    `step`-unit grid holding the other goods fixed, until no sweep improves.
    The grid optimum is then polished with SLSQP under the column constraints.
    """
    k = thetas.shape[0]
    units = int(round(GOOD_QUANTITY / step))
    splits = _compositions(k, units) * step  # (n_splits, k)

    x = even_split(k)
    f = welfare(x, thetas)
    for _ in range(max_sweeps):
        improved = False
        for good in range(k):
            others = np.delete(np.arange(k), good)
            # utility from the fixed goods per agent
            fixed = np.prod(np.power(x[:, others], thetas[:, others]), axis=1)
            values = (np.power(splits, thetas[:, good]) * fixed).sum(axis=1)
            best = int(np.argmax(values))
            if values[best] > f + 1e-12:
                x = x.copy()
                x[:, good] = splits[best]
                f = float(values[best])
                improved = True
        if not improved:
            break

    if not polish:
        return f, x

    polished_f, polished_x = _polish(x, thetas)
    if polished_f > f:
        return polished_f, polished_x
    return f, x


def _polish(x0: np.ndarray, thetas: np.ndarray) -> tuple[float, np.ndarray]:
    k = thetas.shape[0]
    constraints = [
        {"type": "eq", "fun": (lambda v, j=j: v.reshape(k, k)[:, j].sum() - GOOD_QUANTITY)}
        for j in range(k)
    ]
    res = minimize(
        lambda v: -welfare(v.reshape(k, k), thetas),
        x0.ravel(),
        jac=lambda v: -welfare_gradient(v.reshape(k, k), thetas).ravel(),
        method="SLSQP",
        bounds=[(0.0, GOOD_QUANTITY)] * (k * k),
        constraints=constraints,
        options={"maxiter": 500, "ftol": 1e-12},
    )
    x = project_columns(np.clip(res.x.reshape(k, k), 0.0, None))
    return welfare(x, thetas), x


# ----------------------------------------------------------------------
# Public entry point
# ----------------------------------------------------------------------


def u_max(
    preset: UtilitySetPreset | str,
    k: int,
    cfg: Optional[OptimizerConfig] = None,
    *,
    certify: bool = True,
) -> UMaxResult:
    """
    Largest achievable group total utility for a preset with K agents.

    With `certify`, the optimizer must land within `certify_tolerance` of the
    grid oracle; the reported value is the larger of the two so that every
    normalized U_r stays in [0, 1].
    """
    if k < 2:
        raise ValueError(f"u_max needs K >= 2, got {k}")
    cfg = cfg or OptimizerConfig()
    thetas = preset_thetas(UtilitySetPreset(preset), k)

    value, alloc, converged = optimize_welfare(thetas, cfg)
    logger.debug("u_max %s K=%s optimizer=%.10f (%s/%s starts converged)", preset, k, value, converged, cfg.starts)

    if not certify:
        return UMaxResult(
            value=value,
            allocation=alloc.tolist(),
            optimizer_value=value,
            converged_starts=converged,
        )

    oracle_value, oracle_alloc = grid_oracle(thetas, step=cfg.grid_step)
    if value < oracle_value * (1.0 - cfg.certify_tolerance):
        raise OptimizerError(
            f"Optimizer value {value:.6f} is more than {cfg.certify_tolerance:.1%} below "
            f"the grid oracle {oracle_value:.6f}",
            best_value=max(value, oracle_value),
            best_allocation=alloc if value >= oracle_value else oracle_alloc,
        )

    best_value, best_alloc = (value, alloc) if value >= oracle_value else (oracle_value, oracle_alloc)
    return UMaxResult(
        value=best_value,
        allocation=best_alloc.tolist(),
        optimizer_value=value,
        oracle_value=oracle_value,
        certified=True,
        converged_starts=converged,
    )
