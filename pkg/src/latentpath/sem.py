"""Covariance-structure estimation by maximum likelihood.

The implied covariance of the observed vector is assembled from the
compiled parameter matrices with A = (I - B)^-1::

    yy block   Ly A (G Phi G' + Psi) A' Ly' + Theta_eps
    yx block   Ly A G Phi Lx'
    xx block   Lx Phi Lx' + Theta_delta

The discrepancy minimized is F = log|Sigma| + tr(S Sigma^-1) - log|S| - p,
driven by a BFGS iteration with an Armijo backtracking line search; a
proposal that leaves Sigma non-positive-definite is rejected by step
halving. Standard errors come from the inverse of the numerically
differentiated Hessian of (n-1)/2 * F at the solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Dataset, SampleMoments
from .errors import (
    EstimationError,
    NotPositiveDefiniteError,
    UnderIdentifiedError,
)
from .model import ModelSpec, ParamMatrices, build_matrices, count_df

_LN_2PI = math.log(2.0 * math.pi)


@dataclass
class EstimationOptions:
    """Optimizer and reporting knobs for :func:`fit`."""

    max_iter: int = 500
    gtol: float = 1e-6
    ftol: float = 1e-14
    start_values: str = "conventional"
    seed: int | None = None
    chisq_multiplier: str = "n-1"  # or "n"

    def __post_init__(self):
        if self.max_iter <= 0:
            raise ValueError("max_iter must be positive")
        if self.gtol <= 0 or self.ftol <= 0:
            raise ValueError("tolerances must be positive")
        if self.chisq_multiplier not in ("n-1", "n"):
            raise ValueError("chisq_multiplier must be 'n-1' or 'n'")


def _chol_logdet(M: np.ndarray):
    """Cholesky factor and log-determinant, or (None, None) when not PD."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None, None
    diag = np.diag(L)
    if not np.all(diag > 0):
        return None, None
    return L, 2.0 * float(np.log(diag).sum())


def _assemble_blocks(mats: dict[str, np.ndarray]):
    """Sigma in block order (y first) plus the pieces the gradient reuses."""
    lam_y, lam_x = mats["lambda_y"], mats["lambda_x"]
    beta, gamma = mats["beta"], mats["gamma"]
    phi, psi = mats["phi"], mats["psi"]
    m_eta = beta.shape[0]
    A = np.linalg.inv(np.eye(m_eta) - beta) if m_eta else np.zeros((0, 0))
    C = gamma @ phi @ gamma.T + psi
    E = A @ C @ A.T  # cov(eta)
    AGP = A @ gamma @ phi  # cov(eta, xi)
    yy = lam_y @ E @ lam_y.T + mats["theta_eps"]
    yx = lam_y @ AGP @ lam_x.T
    xx = lam_x @ phi @ lam_x.T + mats["theta_delta"]
    sigma = np.block([[yy, yx], [yx.T, xx]])
    sigma = (sigma + sigma.T) / 2.0
    return sigma, A, E, AGP


def implied_covariance(m: ParamMatrices, theta: np.ndarray) -> np.ndarray:
    """Model-implied covariance of the observed variables, in their order."""
    mats = m.matrices_at(theta)
    sigma, _, _, _ = _assemble_blocks(mats)
    perm = m.permutation
    return sigma[np.ix_(perm, perm)]


def latent_covariance(m: ParamMatrices, theta: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Implied covariance of the latent vector, ordered eta then xi."""
    mats = m.matrices_at(theta)
    _, A, E, AGP = _assemble_blocks(mats)
    phi = mats["phi"]
    top = np.hstack([E, AGP])
    bottom = np.hstack([AGP.T, phi])
    return np.vstack([top, bottom]), m.eta_names + m.xi_names


def f_ml(sigma: np.ndarray, S: np.ndarray, p: int | None = None) -> float:
    """ML discrepancy log|Sigma| + tr(S Sigma^-1) - log|S| - p.

    Zero iff Sigma equals S. Raises NotPositiveDefiniteError when either
    matrix is not positive definite (for Sigma this is the signal an
    optimizer uses to backtrack; for S it is a hard error).
    """
    sigma = np.asarray(sigma, dtype=float)
    S = np.asarray(S, dtype=float)
    if p is None:
        p = S.shape[0]
    _, logdet_S = _chol_logdet(S)
    if logdet_S is None:
        raise NotPositiveDefiniteError("sample covariance is not positive definite")
    L, logdet = _chol_logdet(sigma)
    if L is None:
        raise NotPositiveDefiniteError("implied covariance is not positive definite")
    Z = np.linalg.solve(L, S)
    tr = float(np.trace(np.linalg.solve(L.T, Z)))
    return logdet + tr - logdet_S - p


def log_likelihood(sigma: np.ndarray, S: np.ndarray, n: int, p: int | None = None) -> float:
    """Normal-theory log-likelihood -(n/2)[log|Sigma| + tr(S Sigma^-1) + p log 2pi]."""
    sigma = np.asarray(sigma, dtype=float)
    S = np.asarray(S, dtype=float)
    if p is None:
        p = S.shape[0]
    _, logdet_S = _chol_logdet(S)
    if logdet_S is None:
        raise NotPositiveDefiniteError("sample covariance is not positive definite")
    L, logdet = _chol_logdet(sigma)
    if L is None:
        raise NotPositiveDefiniteError("implied covariance is not positive definite")
    Z = np.linalg.solve(L, S)
    tr = float(np.linalg.solve(L.T, Z).trace())
    return -(n / 2.0) * (logdet + tr + p * _LN_2PI)


class _Objective:
    """F_ML and its analytic gradient over the free-parameter vector."""

    def __init__(self, m: ParamMatrices, S: np.ndarray):
        self.m = m
        perm = m.permutation
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        self.S_block = S[np.ix_(inv, inv)]
        _, logdet_S = _chol_logdet(self.S_block)
        if logdet_S is None:
            raise NotPositiveDefiniteError("sample covariance is not positive definite")
        self.logdet_S = logdet_S
        self.p = S.shape[0]
        self.ny = len(m.y_names)
        # free-cell coordinates per template, for fast gradient scatter
        self._slots = []
        for key in ("lambda_y", "lambda_x", "beta", "gamma",
                    "phi", "psi", "theta_eps", "theta_delta"):
            template = getattr(m, key)
            rows, cols = np.nonzero(template.index >= 0)
            self._slots.append((key, rows, cols, template.index[rows, cols]))

    def value(self, theta: np.ndarray) -> float:
        f, _ = self.value_and_grad(theta, need_grad=False)
        return f

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        f, g = self.value_and_grad(theta)
        if not np.isfinite(f):
            raise NotPositiveDefiniteError("implied covariance is not positive definite")
        return g

    def value_and_grad(self, theta: np.ndarray, need_grad: bool = True):
        m = self.m
        mats = m.matrices_at(theta)
        sigma, A, E, AGP = _assemble_blocks(mats)
        L, logdet = _chol_logdet(sigma)
        if L is None:
            return np.inf, None
        Linv = np.linalg.inv(L)
        sigma_inv = Linv.T @ Linv
        SiS = sigma_inv @ self.S_block
        f = logdet + float(np.trace(SiS)) - self.logdet_S - self.p
        if not need_grad:
            return f, None

        # dF/dSigma = Sigma^-1 - Sigma^-1 S Sigma^-1
        G = sigma_inv - SiS @ sigma_inv
        G = (G + G.T) / 2.0
        ny = self.ny
        G_yy, G_yx, G_xx = G[:ny, :ny], G[:ny, ny:], G[ny:, ny:]
        lam_y, lam_x = mats["lambda_y"], mats["lambda_x"]
        gamma, phi = mats["gamma"], mats["phi"]

        LxAGPt = lam_x @ AGP.T                      # = Lx Phi Gamma' A'
        d_lam_y = 2.0 * (G_yy @ lam_y @ E + G_yx @ LxAGPt)
        W_yy = A.T @ (lam_y.T @ G_yy @ lam_y) @ A   # unconstrained dF/dPsi
        K = A.T @ (lam_y.T @ G_yx @ lam_x)          # eta x xi coupling
        d_lam_x = 2.0 * (G_xx @ lam_x @ phi + G_yx.T @ lam_y @ AGP)
        d_beta = A.T @ lam_y.T @ d_lam_y
        d_gamma = 2.0 * (W_yy @ gamma + K) @ phi
        d_phi = gamma.T @ W_yy @ gamma + gamma.T @ K + K.T @ gamma \
            + lam_x.T @ G_xx @ lam_x

        dmats = {
            "lambda_y": d_lam_y, "lambda_x": d_lam_x,
            "beta": d_beta, "gamma": d_gamma,
            "phi": d_phi, "psi": W_yy,
            "theta_eps": G_yy, "theta_delta": G_xx,
        }
        g = np.zeros(m.n_free)
        # symmetric templates list each off-diagonal parameter at (i,j) and
        # (j,i); accumulating both cells yields the correct chain-rule sum
        for key, rows, cols, pos in self._slots:
            if rows.size:
                np.add.at(g, pos, dmats[key][rows, cols])
        return f, g


def start_values(m: ParamMatrices, S: np.ndarray) -> np.ndarray:
    """Conventional starting vector.

    Free loadings 0.7, paths 0, latent and error variances at half the
    relevant sample variance (the marker's for latents, the indicator's
    own for errors), covariances 0.
    """
    spec = m.spec
    markers = {lat.name: lat.indicators[0] for lat in spec.latents} if spec else {}
    var_pos = {name: i for i, name in enumerate(m.variable_order)}
    diag = np.diag(S)
    theta0 = np.zeros(m.n_free)
    latent_names = set(m.eta_names) | set(m.xi_names)
    for label, k in m.theta_index.items():
        if "=~" in label:
            theta0[k] = 0.7
        elif "~~" in label:
            a, b = label.split("~~")
            if a != b:
                theta0[k] = 0.0
            elif a in latent_names:
                marker = markers.get(a)
                theta0[k] = 0.5 * diag[var_pos[marker]] if marker else 0.5
            else:
                theta0[k] = 0.5 * diag[var_pos[a]]
        # plain paths stay 0
    return theta0


@dataclass
class _OptimResult:
    theta: np.ndarray
    f: float
    grad: np.ndarray
    history: list[float]
    iterations: int
    converged: bool


def _minimize(objective: _Objective, theta0: np.ndarray, opts: EstimationOptions) -> _OptimResult:
    """BFGS with Armijo backtracking; trial steps that break positive
    definiteness evaluate to +inf and are halved away."""
    theta = np.asarray(theta0, dtype=float).copy()
    f, g = objective.value_and_grad(theta)
    if not np.isfinite(f):
        raise EstimationError("starting values give a non-positive-definite implied covariance")
    t = theta.size
    H = np.eye(t)
    history = [f]
    iterations = 0
    converged = bool(np.max(np.abs(g), initial=0.0) < opts.gtol)
    first_update = True
    stalls = 0
    for it in range(1, opts.max_iter + 1):
        if converged:
            break
        d = -H @ g
        gd = float(g @ d)
        if gd >= 0:  # curvature gone bad; restart from steepest descent
            H = np.eye(t)
            d = -g
            gd = float(g @ d)
        step = 1.0
        f_new = g_new = None
        for _ in range(60):
            trial = theta + step * d
            f_try, _ = objective.value_and_grad(trial, need_grad=False)
            if np.isfinite(f_try) and f_try <= f + 1e-4 * step * gd:
                f_new = f_try
                break
            step *= 0.5
        if f_new is None:
            break  # no acceptable step; report whatever we have
        theta_new = theta + step * d
        _, g_new = objective.value_and_grad(theta_new)
        s = theta_new - theta
        y = g_new - g
        theta, f_prev, f, g = theta_new, f, f_new, g_new
        history.append(f)
        iterations = it
        converged = bool(np.max(np.abs(g)) < opts.gtol)
        sy = float(s @ y)
        if sy > 1e-12 * max(1.0, float(np.linalg.norm(s)) * float(np.linalg.norm(y))):
            if first_update:
                H *= sy / float(y @ y)
                first_update = False
            rho = 1.0 / sy
            Hy = H @ y
            H = (
                H
                - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                + rho * (1.0 + rho * float(y @ Hy)) * np.outer(s, s)
            )
        # give up only after the objective stalls repeatedly; near an
        # optimum BFGS keeps shrinking the gradient for a few more steps
        stalls = stalls + 1 if abs(f_prev - f) < opts.ftol * max(1.0, abs(f_prev)) else 0
        if stalls >= 3:
            break
    return _OptimResult(theta, f, g, history, iterations, converged)


@dataclass
class FitResult:
    """Estimates, inference, and diagnostics from one ML fit."""

    theta: np.ndarray
    labels: list[str]
    se: np.ndarray
    f_min: float
    chisq: float
    df: int
    chisq_p: float
    n: int
    p: int
    iterations: int
    gradient_norm: float
    converged: bool
    standardized: dict[str, float]
    implied: np.ndarray
    crit_ratio: np.ndarray
    p_values: np.ndarray
    heywood: list[str]
    f_history: list[float] = field(repr=False, default_factory=list)
    matrices: ParamMatrices | None = field(repr=False, default=None)
    options: EstimationOptions | None = field(repr=False, default=None)
    S: np.ndarray | None = field(repr=False, default=None)

    @property
    def estimates(self) -> dict[str, float]:
        return dict(zip(self.labels, self.theta))

    def parameter_table(self, kind: str | None = None) -> list[dict]:
        """Per-parameter records; kind filters to 'loading', 'path' or 'covariance'."""
        spec_labels = {}
        if self.matrices is not None and self.matrices.spec is not None:
            spec_labels = {
                (dep, pred): lab
                for lab, (dep, pred) in self.matrices.spec.labels.items()
            }
        rows = []
        for i, label in enumerate(self.labels):
            if "=~" in label:
                k = "loading"
            elif "~~" in label:
                k = "covariance"
            else:
                k = "path"
            if kind is not None and k != kind:
                continue
            hyp = None
            if k == "path":
                dep, pred = label.split("~")
                hyp = spec_labels.get((dep, pred))
            rows.append({
                "label": label,
                "kind": k,
                "estimate": float(self.theta[i]),
                "se": float(self.se[i]),
                "crit_ratio": float(self.crit_ratio[i]),
                "p": float(self.p_values[i]),
                "standardized": self.standardized.get(label),
                "hypothesis": hyp,
            })
        return rows


def standardize(result_or_matrices, theta=None) -> dict[str, float]:
    """Rescale estimates by model-implied latent and indicator SDs.

    Accepts either a FitResult or a (ParamMatrices, theta) pair. Loadings
    become ``lambda * sd(latent) / sd(indicator)``, paths
    ``b * sd(predictor) / sd(dependent)``, covariances correlations, and
    variance entries proportions of their variable's implied variance.
    """
    if isinstance(result_or_matrices, FitResult):
        m = result_or_matrices.matrices
        theta = result_or_matrices.theta
    else:
        m = result_or_matrices
    if m is None:
        raise EstimationError("no parameter matrices attached to the result")
    theta = np.asarray(theta, dtype=float)
    mats = m.matrices_at(theta)
    sigma, A, E, AGP = _assemble_blocks(mats)
    lat_cov = np.block([[E, AGP], [AGP.T, mats["phi"]]])
    lat_names = m.eta_names + m.xi_names
    lat_var = np.diag(lat_cov)
    obs_var = np.diag(sigma)  # block order: y then x
    if np.any(lat_var <= 0) or np.any(obs_var <= 0):
        raise EstimationError("nonpositive implied variance; cannot standardize")
    lat_sd = dict(zip(lat_names, np.sqrt(lat_var)))
    obs_sd = dict(zip(m.y_names + m.x_names, np.sqrt(obs_var)))

    out: dict[str, float] = {}

    def visit(template, handler):
        for i in range(template.values.shape[0]):
            for j in range(template.values.shape[1]):
                free = template.index[i, j] >= 0
                value = (
                    theta[template.index[i, j]] if free else template.values[i, j]
                )
                handler(i, j, value, free)

    def loading(row_names, col_names):
        def h(i, j, value, free):
            if free or value != 0.0:
                lab = f"{col_names[j]}=~{row_names[i]}"
                out[lab] = value * lat_sd[col_names[j]] / obs_sd[row_names[i]]
        return h

    visit(m.lambda_y, loading(m.y_names, m.eta_names))
    visit(m.lambda_x, loading(m.x_names, m.xi_names))

    def path(col_names):
        def h(i, j, value, free):
            if free or value != 0.0:
                dep = m.eta_names[i]
                pred = col_names[j]
                out[f"{dep}~{pred}"] = value * lat_sd[pred] / lat_sd[dep]
        return h

    visit(m.beta, path(m.eta_names))
    visit(m.gamma, path(m.xi_names))

    def sym(names, scale):
        def h(i, j, value, free):
            if j > i:
                return
            if free or value != 0.0 or i == j:
                a, b = sorted((names[i], names[j]))
                out[f"{a}~~{b}"] = value / (scale[names[i]] * scale[names[j]])
        return h

    visit(m.phi, sym(m.xi_names, lat_sd))
    visit(m.psi, sym(m.eta_names, lat_sd))
    visit(m.theta_eps, sym(m.y_names, obs_sd))
    visit(m.theta_delta, sym(m.x_names, obs_sd))
    return out


def _numerical_hessian(objective: _Objective, theta: np.ndarray) -> np.ndarray:
    """Central differences on the analytic gradient."""
    t = theta.size
    H = np.zeros((t, t))
    for j in range(t):
        h = 1e-5 * max(1.0, abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        _, g_up = objective.value_and_grad(up)
        _, g_down = objective.value_and_grad(down)
        if g_up is None or g_down is None:
            H[:, j] = np.nan
        else:
            H[:, j] = (g_up - g_down) / (2.0 * h)
    return (H + H.T) / 2.0


def align_moments(spec: ModelSpec, moments: SampleMoments) -> tuple[np.ndarray, list[str]]:
    """Restrict S to the model's indicators, keeping the moments' order."""
    wanted = set(spec.indicator_names)
    names = [v for v in moments.names if v in wanted]
    missing = wanted - set(names)
    if missing:
        raise EstimationError(f"data lacks model indicators: {sorted(missing)}")
    idx = [moments.names.index(v) for v in names]
    return moments.S[np.ix_(idx, idx)], names


def fit(
    spec: ModelSpec,
    moments: SampleMoments,
    opts: EstimationOptions | None = None,
    *,
    standardize_latents: bool = False,
    compute_se: bool = True,
) -> FitResult:
    """Estimate a model against sample moments by maximum likelihood.

    Returns a FitResult even when the iteration limit is hit (flagged via
    ``converged``); raises UnderIdentifiedError when the model has more
    free parameters than sample moments and NotPositiveDefiniteError for
    a non-PD sample covariance.
    """
    opts = opts or EstimationOptions()
    S, names = align_moments(spec, moments)
    m = build_matrices(spec, names, standardize_latents=standardize_latents)
    dfres = count_df(m)
    if dfres.under_identified:
        raise UnderIdentifiedError(
            f"{dfres.n_free} free parameters exceed {dfres.n_moments} sample moments"
        )
    objective = _Objective(m, S)
    theta0 = start_values(m, S)
    opt = _minimize(objective, theta0, opts)

    n = moments.n
    mult = (n - 1) if opts.chisq_multiplier == "n-1" else n
    chisq = mult * opt.f
    chisq_p = float(stats.chi2.sf(chisq, dfres.value)) if dfres.value > 0 else 1.0

    t = m.n_free
    se = np.full(t, np.nan)
    if compute_se and t:
        H = ((n - 1) / 2.0) * _numerical_hessian(objective, opt.theta)
        try:
            cov = np.linalg.inv(H)
            diag = np.diag(cov)
            se = np.where(diag > 0, np.sqrt(np.abs(diag)), np.nan)
        except np.linalg.LinAlgError:
            pass
    with np.errstate(divide="ignore", invalid="ignore"):
        crit = opt.theta / se
    p_values = 2.0 * stats.norm.sf(np.abs(crit))

    labels = m.labels
    heywood = [
        lab for lab, k in m.theta_index.items()
        if "~~" in lab and lab.split("~~")[0] == lab.split("~~")[1] and opt.theta[k] < 0
    ]
    try:
        standardized = standardize(m, opt.theta)
    except EstimationError:
        standardized = {}

    return FitResult(
        theta=opt.theta,
        labels=labels,
        se=se,
        f_min=opt.f,
        chisq=chisq,
        df=dfres.value,
        chisq_p=chisq_p,
        n=n,
        p=len(names),
        iterations=opt.iterations,
        gradient_norm=float(np.max(np.abs(opt.grad), initial=0.0)),
        converged=opt.converged,
        standardized=standardized,
        implied=implied_covariance(m, opt.theta),
        crit_ratio=crit,
        p_values=p_values,
        heywood=heywood,
        f_history=opt.history,
        matrices=m,
        options=opts,
        S=S,
    )


def simulate(m: ParamMatrices, theta: np.ndarray, n: int, seed: int) -> Dataset:
    """Draw n rows from a zero-mean normal with covariance Sigma(theta)."""
    sigma = implied_covariance(m, theta)
    L, _ = _chol_logdet(sigma)
    if L is None:
        raise NotPositiveDefiniteError(
            "Sigma(theta) is not positive definite; check the parameter values"
        )
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, sigma.shape[0])) @ L.T
    return Dataset(list(m.variable_order), X, np.zeros_like(X, dtype=bool), [])


def classify_parameter(m: ParamMatrices, label: str) -> str:
    """Kind of a free parameter: loading, path, or a (co)variance class."""
    if "=~" in label:
        return "loading"
    if "~~" not in label:
        return "path"
    a, b = label.split("~~")
    latents = set(m.eta_names) | set(m.xi_names)
    if a == b:
        if a in m.xi_names:
            return "latent_variance"
        if a in m.eta_names:
            return "disturbance_variance"
        return "error_variance"
    if a in latents and b in latents:
        return "latent_covariance"
    return "error_covariance"


def theta_from_config(
    m: ParamMatrices,
    values: dict[str, float] | None = None,
    defaults: dict[str, float] | None = None,
) -> np.ndarray:
    """Build a full parameter vector from per-label values plus per-kind defaults."""
    values = values or {}
    defaults = defaults or {}
    unknown = set(values) - set(m.theta_index)
    if unknown:
        raise EstimationError(f"config names unknown parameters: {sorted(unknown)}")
    theta = np.zeros(m.n_free)
    missing = []
    for label, k in m.theta_index.items():
        if label in values:
            theta[k] = float(values[label])
            continue
        kind = classify_parameter(m, label)
        if kind in defaults:
            theta[k] = float(defaults[kind])
        else:
            missing.append(label)
    if missing:
        raise EstimationError(
            f"no value or default for parameters: {sorted(missing)[:8]}"
            + ("..." if len(missing) > 8 else "")
        )
    return theta
