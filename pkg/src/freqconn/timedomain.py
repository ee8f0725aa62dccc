"""Generalized impulse responses, the horizon-H generalized forecast-error
variance decomposition, and the classical connectedness measures built on it.

Identification is generalized (order-invariant): shocks are one own standard
deviation in size and never orthogonalized, so raw decomposition rows need
not sum to one and are row-standardized for the connectedness table.

Horizon convention: an H-period decomposition sums MA terms h = 0..H-1,
so H = 1 is the one-step-ahead decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .varcore import VarModel, WoldSequence

ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class ConnectednessTable:
    """k x k standardized variance-decomposition shares.

    Row i gives the shares of variable i's forecast-error variance
    attributed to shocks in each column variable; rows sum to one.
    ``raw`` keeps the unstandardized shares for diagnostics.
    """

    theta: np.ndarray
    raw: np.ndarray
    horizon_tag: int | str
    variable_names: tuple[str, ...]

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        k = len(self.variable_names)
        if th.shape != (k, k):
            raise DataError("theta must be k x k matching variable_names")
        if np.abs(th.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise NumericError("standardized rows must sum to 1 within 1e-10")
        if th.min() < -1e-12 or th.max() > 1.0 + 1e-12:
            raise NumericError("standardized shares must lie in [0, 1]")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        raw = np.asarray(self.raw, dtype=float)
        raw.setflags(write=False)
        object.__setattr__(self, "raw", raw)

    @property
    def k(self) -> int:
        return len(self.variable_names)

    def to_csv_text(self) -> str:
        lines = ["," + ",".join(self.variable_names)]
        for i, name in enumerate(self.variable_names):
            lines.append(name + "," + ",".join(repr(float(v)) for v in self.theta[i]))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            "format: freqconn-connectedness-table-v1",
            f"horizon: {self.horizon_tag}",
            "variable_names: " + " ".join(self.variable_names),
            "theta: " + " ; ".join(" ".join(repr(float(v)) for v in row) for row in self.theta),
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DyMeasures:
    """Total, directional, net, and pairwise connectedness derived from a
    standardized table."""

    total: float
    from_others: np.ndarray
    to_others: np.ndarray
    net: np.ndarray
    pairwise: np.ndarray
    variable_names: tuple[str, ...]

    def __post_init__(self):
        for name in ("from_others", "to_others", "net", "pairwise"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        asym = np.abs(self.pairwise + self.pairwise.T).max()
        if asym > 1e-12:
            raise NumericError("pairwise matrix must be antisymmetric within 1e-12")


def girf(model: VarModel, wold_seq: WoldSequence, j: int, h: int) -> np.ndarray:
    """Generalized impulse response of all variables at horizon ``h`` to a
    one-standard-deviation shock in variable ``j``:
    ``sigma_jj**-0.5 * psi_h @ sigma @ e_j``."""
    if not 0 <= h <= wold_seq.truncation:
        raise DataError(f"horizon {h} outside 0..{wold_seq.truncation}")
    if not 0 <= j < model.k:
        raise DataError(f"variable index {j} outside 0..{model.k - 1}")
    s_jj = model.sigma[j, j]
    if s_jj <= 0:
        raise NumericError(f"non-positive innovation variance for variable {j}")
    return wold_seq.psi[h] @ model.sigma[:, j] / np.sqrt(s_jj)


def gfevd(model: VarModel, wold_seq: WoldSequence, horizon: int) -> ConnectednessTable:
    """Generalized H-step forecast-error variance decomposition.

    Unstandardized share (i, j):
    ``sigma_jj**-1 * sum_h (psi_h sigma)_{ij}**2 / sum_h (psi_h sigma psi_h')_{ii}``
    with sums over h = 0..H-1. The standardized table divides each row by
    its sum.
    """
    if not 1 <= horizon <= wold_seq.truncation + 1:
        raise DataError(f"horizon {horizon} outside 1..{wold_seq.truncation + 1}")
    psi = wold_seq.psi[:horizon]
    diag = np.diag(model.sigma)
    if (diag <= 0).any():
        raise NumericError("innovation covariance has a non-positive diagonal entry")
    b = psi @ model.sigma                               # (H, k, k)
    numer = (b**2).sum(axis=0) / diag[np.newaxis, :]
    denom = np.einsum("hij,hij->i", b, psi)             # forecast-error variances
    if (denom <= 0).any():
        raise NumericError("zero forecast-error variance in decomposition denominator")
    raw = numer / denom[:, np.newaxis]
    theta = raw / raw.sum(axis=1, keepdims=True)
    return ConnectednessTable(theta=theta, raw=raw, horizon_tag=horizon,
                              variable_names=model.variable_names)


def dy_measures(table: ConnectednessTable) -> DyMeasures:
    """Classical spillover measures on a standardized table: total is the
    off-diagonal share ``1 - trace/k``; from/to are off-diagonal row/column
    sums; net = to - from; pairwise (i, j) = theta[j, i] - theta[i, j]."""
    th = table.theta
    k = table.k
    diag = np.diag(th)
    from_others = th.sum(axis=1) - diag
    to_others = th.sum(axis=0) - diag
    return DyMeasures(
        total=float(1.0 - diag.sum() / k),
        from_others=from_others,
        to_others=to_others,
        net=to_others - from_others,
        pairwise=th.T - th,
        variable_names=table.variable_names,
    )
