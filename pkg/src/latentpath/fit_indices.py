"""Goodness-of-fit indices against an independence baseline.

The baseline (null) model frees every variance and fixes every covariance
to zero, so its discrepancy has the closed form sum(log s_ii) - log|S|.
Incremental indices compare the fitted chi-square to that baseline;
absolute indices compare the implied and sample covariances directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import NotPositiveDefiniteError

# Table thresholds used for the pass/fail column of reports. The model
# p-value row follows the source convention (significant chi-square counted
# as meeting the standard); see README.
THRESHOLDS = {
    "chisq_df": ("<", 5.0),
    "p": ("<", 0.05),
    "rmsea": ("<", 0.08),
    "gfi": (">", 0.9),
    "agfi": (">", 0.9),
    "tli": (">", 0.9),
    "nfi": (">", 0.9),
    "cfi": (">", 0.9),
    "pnfi": (">", 0.5),
    "pcfi": (">", 0.5),
    "pgfi": (">", 0.5),
}


def baseline(S: np.ndarray, n: int, multiplier: str = "n-1") -> tuple[float, int]:
    """Chi-square and df of the independence model, in closed form."""
    S = np.asarray(S, dtype=float)
    p = S.shape[0]
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise NotPositiveDefiniteError("sample covariance is not positive definite")
    diag = np.diag(S)
    if np.any(diag <= 0):
        raise NotPositiveDefiniteError("sample covariance has nonpositive variances")
    f_null = float(np.log(diag).sum() - logdet)
    mult = (n - 1) if multiplier == "n-1" else n
    chisq_null = mult * f_null
    df_null = p * (p - 1) // 2
    return chisq_null, df_null


@dataclass
class FitIndexReport:
    """All indices plus pass flags; None marks an undefined index."""

    chisq: float
    df: int
    p: float
    chisq_df: float | None
    rmsea: float | None
    gfi: float
    agfi: float | None
    nfi: float | None
    tli: float | None
    cfi: float
    pnfi: float | None
    pcfi: float | None
    pgfi: float
    chisq_null: float
    df_null: int
    passed: dict[str, bool | None] = field(default_factory=dict)

    def values(self) -> dict[str, float | None]:
        return {
            "chisq": self.chisq, "df": self.df, "p": self.p,
            "chisq_df": self.chisq_df, "rmsea": self.rmsea,
            "gfi": self.gfi, "agfi": self.agfi, "nfi": self.nfi,
            "tli": self.tli, "cfi": self.cfi, "pnfi": self.pnfi,
            "pcfi": self.pcfi, "pgfi": self.pgfi,
            "chisq_null": self.chisq_null, "df_null": self.df_null,
        }


def indices(
    chisq: float,
    df: int,
    chisq_null: float,
    df_null: int,
    n: int,
    S: np.ndarray,
    sigma_hat: np.ndarray,
    p: int | None = None,
) -> FitIndexReport:
    """Compute the full index suite; guarded divisions become None."""
    S = np.asarray(S, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if p is None:
        p = S.shape[0]

    chisq_df = chisq / df if df > 0 else None
    rmsea = float(np.sqrt(max(chisq - df, 0.0) / (df * (n - 1)))) if df > 0 else None
    p_value = float(stats.chi2.sf(chisq, df)) if df > 0 else 1.0

    # absolute fit from Sigma_hat^-1 S
    W = np.linalg.solve(sigma_hat, S)
    resid = W - np.eye(p)
    gfi = float(1.0 - np.trace(resid @ resid) / np.trace(W @ W))
    agfi = (
        float(1.0 - (1.0 - gfi) * (p * (p + 1)) / (2.0 * df)) if df > 0 else None
    )

    if chisq_null > 0:
        nfi = min(max((chisq_null - chisq) / chisq_null, 0.0), 1.0)
    else:
        nfi = None
    if chisq_null <= df_null or df_null <= 0:
        cfi = 1.0
    else:
        cfi = 1.0 - max(chisq - df, 0.0) / max(chisq_null - df_null, 1e-12)
        cfi = min(max(cfi, 0.0), 1.0)
    if df_null > 0 and df > 0 and abs(chisq_null / df_null - 1.0) > 1e-12:
        tli = ((chisq_null / df_null) - (chisq / df)) / ((chisq_null / df_null) - 1.0)
    else:
        tli = None

    pnfi = (df / df_null) * nfi if (nfi is not None and df_null > 0) else None
    pcfi = (df / df_null) * cfi if df_null > 0 else None
    pgfi = (df / (p * (p + 1) / 2.0)) * gfi

    report = FitIndexReport(
        chisq=float(chisq), df=int(df), p=p_value,
        chisq_df=chisq_df, rmsea=rmsea, gfi=gfi, agfi=agfi,
        nfi=nfi, tli=tli, cfi=float(cfi), pnfi=pnfi, pcfi=pcfi,
        pgfi=float(pgfi), chisq_null=float(chisq_null), df_null=int(df_null),
    )
    report.passed = _pass_flags(report)
    return report


def _pass_flags(report: FitIndexReport) -> dict[str, bool | None]:
    flags: dict[str, bool | None] = {}
    values = report.values()
    for key, (op, bound) in THRESHOLDS.items():
        value = values.get(key)
        if value is None:
            flags[key] = None
        elif op == "<":
            flags[key] = bool(value < bound)
        else:
            flags[key] = bool(value > bound)
    return flags


def from_fit(result) -> FitIndexReport:
    """Index report for a FitResult, with its own independence baseline."""
    if result.S is None:
        raise ValueError("FitResult carries no sample covariance")
    multiplier = result.options.chisq_multiplier if result.options else "n-1"
    chisq_null, df_null = baseline(result.S, result.n, multiplier)
    return indices(
        result.chisq, result.df, chisq_null, df_null,
        result.n, result.S, result.implied, result.p,
    )
