"""Model-specification language: parsing, matrix compilation, df accounting.

The language is line-oriented. ``#`` starts a comment, blank lines are
ignored, and each remaining line is one statement::

    ConsEth =~ CE1 + CE3 + CE4     # latent and its indicators
    PB ~ H1*ConsEth + PerVa        # regression among latents
    ConsEth ~~ 0.3*EnvSt           # (co)variance, optionally fixed

A ``value*`` prefix fixes the loading/path/covariance to ``value``; a
non-numeric prefix on a regression term is a hypothesis label. Statement
order never matters: parsing canonicalizes latents by name, regressions by
(dependent, predictor), covariances by sorted pair.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ModelSpecificationError, ModelSyntaxError

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


@dataclass(frozen=True)
class Latent:
    """A latent variable and its indicator list (first listed = marker)."""

    name: str
    indicators: tuple[str, ...]


@dataclass(frozen=True)
class Regression:
    """One directed path ``dependent <- predictor`` among latents."""

    dependent: str
    predictor: str
    fixed: float | None = None
    label: str | None = None


@dataclass(frozen=True)
class Covariance:
    """A (co)variance statement between two names (a == b fixes a variance)."""

    a: str
    b: str
    fixed: float | None = None


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model: measurement, regression, and covariance statements.

    Canonical by construction: permuting statements in the source text
    yields an equal ModelSpec.
    """

    latents: tuple[Latent, ...]
    regressions: tuple[Regression, ...]
    covariances: tuple[Covariance, ...]
    fixed_loadings: tuple[tuple[str, float], ...] = ()

    @property
    def latent_names(self) -> list[str]:
        return [lat.name for lat in self.latents]

    @property
    def indicator_names(self) -> list[str]:
        return [ind for lat in self.latents for ind in lat.indicators]

    @property
    def endogenous(self) -> list[str]:
        """Latents that appear as a dependent in some regression, sorted."""
        deps = {r.dependent for r in self.regressions}
        return [name for name in self.latent_names if name in deps]

    @property
    def exogenous(self) -> list[str]:
        deps = {r.dependent for r in self.regressions}
        return [name for name in self.latent_names if name not in deps]

    @property
    def labels(self) -> dict[str, tuple[str, str]]:
        """Hypothesis label -> (dependent, predictor)."""
        return {r.label: (r.dependent, r.predictor) for r in self.regressions if r.label}

    def fixed_loading_map(self) -> dict[str, float]:
        return dict(self.fixed_loadings)

    def indicators_of(self, latent: str) -> tuple[str, ...]:
        for lat in self.latents:
            if lat.name == latent:
                return lat.indicators
        raise KeyError(latent)

    def to_text(self) -> str:
        """Serialize back to model-language source; reparsing round-trips."""
        fixed = self.fixed_loading_map()
        lines = []
        for lat in self.latents:
            terms = []
            for ind in lat.indicators:
                terms.append(f"{fixed[ind]:g}*{ind}" if ind in fixed else ind)
            lines.append(f"{lat.name} =~ " + " + ".join(terms))
        by_dep: dict[str, list[Regression]] = {}
        for reg in self.regressions:
            by_dep.setdefault(reg.dependent, []).append(reg)
        for dep in sorted(by_dep):
            terms = []
            for reg in by_dep[dep]:
                prefix = ""
                if reg.fixed is not None:
                    prefix = f"{reg.fixed:g}*"
                elif reg.label is not None:
                    prefix = f"{reg.label}*"
                terms.append(prefix + reg.predictor)
            lines.append(f"{dep} ~ " + " + ".join(terms))
        for cov in self.covariances:
            rhs = f"{cov.fixed:g}*{cov.b}" if cov.fixed is not None else cov.b
            lines.append(f"{cov.a} ~~ {rhs}")
        return "\n".join(lines) + "\n"

    def without_regressions(self) -> "ModelSpec":
        """Measurement-only variant: all latents exogenous, freely covarying."""
        return ModelSpec(
            latents=self.latents,
            regressions=(),
            covariances=self.covariances,
            fixed_loadings=self.fixed_loadings,
        )


@dataclass(frozen=True)
class _Term:
    name: str
    fixed: float | None
    label: str | None
    column: int


def _split_terms(rhs: str, line_no: int, offset: int) -> list[_Term]:
    terms = []
    pos = 0
    for chunk in rhs.split("+"):
        column = offset + pos + (len(chunk) - len(chunk.lstrip())) + 1
        pos += len(chunk) + 1
        text = chunk.strip()
        if not text:
            raise ModelSyntaxError("empty term", line_no, column)
        fixed = label = None
        if "*" in text:
            prefix, _, name = text.partition("*")
            prefix, name = prefix.strip(), name.strip()
            try:
                fixed = float(prefix)
            except ValueError:
                label = prefix
        else:
            name = text
        if not _NAME_RE.match(name):
            raise ModelSyntaxError(f"invalid name {name!r}", line_no, column)
        if label is not None and not _NAME_RE.match(label):
            raise ModelSyntaxError(f"invalid label {label!r}", line_no, column)
        terms.append(_Term(name, fixed, label, column))
    return terms


def parse_model(text: str) -> ModelSpec:
    """Parse model-language source into a canonical :class:`ModelSpec`.

    Raises
    ------
    ModelSyntaxError
        Malformed statement, with line and column.
    ModelSpecificationError
        Duplicate indicator or latent, undeclared latent, cyclic
        regression graph, name used as both latent and indicator.
    """
    latents: dict[str, tuple[str, ...]] = {}
    regressions: list[Regression] = []
    covariances: list[Covariance] = []
    fixed_loadings: dict[str, float] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        # operator detection: =~ before ~~ before ~
        for op in ("=~", "~~", "~"):
            idx = line.find(op)
            if idx != -1:
                break
        else:
            raise ModelSyntaxError("no operator (=~, ~~, ~) found", line_no, 1)
        lhs = line[:idx].strip()
        rhs = line[idx + len(op):]
        if not _NAME_RE.match(lhs):
            raise ModelSyntaxError(f"invalid left-hand side {lhs!r}", line_no, 1)
        if not rhs.strip():
            raise ModelSyntaxError("empty right-hand side", line_no, idx + len(op) + 1)
        terms = _split_terms(rhs, line_no, idx + len(op))

        if op == "=~":
            if lhs in latents:
                raise ModelSpecificationError(
                    f"latent {lhs!r} declared more than once (line {line_no}); "
                    "merging would make the marker depend on statement order"
                )
            names = []
            for term in terms:
                if term.label is not None:
                    raise ModelSyntaxError(
                        "labels are only supported on regression terms", line_no, term.column
                    )
                if term.fixed is not None:
                    fixed_loadings[term.name] = term.fixed
                names.append(term.name)
            latents[lhs] = tuple(names)
        elif op == "~~":
            if len(terms) != 1:
                raise ModelSyntaxError("covariance takes exactly one right-hand term", line_no, 1)
            term = terms[0]
            if term.label is not None:
                raise ModelSyntaxError(
                    "labels are only supported on regression terms", line_no, term.column
                )
            a, b = sorted((lhs, term.name))
            covariances.append(Covariance(a, b, term.fixed))
        else:
            for term in terms:
                regressions.append(Regression(lhs, term.name, term.fixed, term.label))

    if not latents:
        raise ModelSpecificationError("model declares no latent variables")

    indicator_owner: dict[str, str] = {}
    for name, inds in latents.items():
        for ind in inds:
            if ind in indicator_owner:
                raise ModelSpecificationError(
                    f"indicator {ind!r} appears under both "
                    f"{indicator_owner[ind]!r} and {name!r}"
                )
            indicator_owner[ind] = name
    overlap = set(latents) & set(indicator_owner)
    if overlap:
        raise ModelSpecificationError(
            f"name(s) used as both latent and indicator: {sorted(overlap)}"
        )

    seen_pairs = set()
    for reg in regressions:
        for name in (reg.dependent, reg.predictor):
            if name not in latents:
                raise ModelSpecificationError(f"regression names undeclared latent {name!r}")
        pair = (reg.dependent, reg.predictor)
        if pair in seen_pairs:
            raise ModelSpecificationError(f"duplicate path {reg.dependent} ~ {reg.predictor}")
        seen_pairs.add(pair)

    seen_covs = set()
    for cov in covariances:
        for name in (cov.a, cov.b):
            if name not in latents and name not in indicator_owner:
                raise ModelSpecificationError(f"covariance names undeclared variable {name!r}")
        if (cov.a, cov.b) in seen_covs:
            raise ModelSpecificationError(f"duplicate covariance {cov.a} ~~ {cov.b}")
        seen_covs.add((cov.a, cov.b))

    _check_acyclic(regressions)

    spec = ModelSpec(
        latents=tuple(Latent(name, latents[name]) for name in sorted(latents)),
        regressions=tuple(sorted(regressions, key=lambda r: (r.dependent, r.predictor))),
        covariances=tuple(sorted(covariances, key=lambda c: (c.a, c.b))),
        fixed_loadings=tuple(sorted(fixed_loadings.items())),
    )
    return spec


def _check_acyclic(regressions: list[Regression]) -> None:
    """Reject directed cycles among latents so I - B is always invertible."""
    graph: dict[str, set[str]] = {}
    for reg in regressions:
        graph.setdefault(reg.predictor, set()).add(reg.dependent)
        graph.setdefault(reg.dependent, set())
    state: dict[str, int] = {}  # 0 visiting, 1 done
    stack: list[str] = []

    def visit(node: str) -> None:
        state[node] = 0
        stack.append(node)
        for nxt in graph[node]:
            if state.get(nxt) == 0:
                cycle = stack[stack.index(nxt):] + [nxt]
                raise ModelSpecificationError(
                    "regression graph contains a cycle: " + " -> ".join(cycle)
                )
            if nxt not in state:
                visit(nxt)
        stack.pop()
        state[node] = 1

    for node in graph:
        if node not in state:
            visit(node)


# ---------------------------------------------------------------------------
# Matrix compilation


@dataclass
class MatrixTemplate:
    """One parameter matrix: fixed baseline values plus free-entry indices.

    ``index[i, j]`` is the position of the free parameter occupying that
    cell, or -1 when the cell is a fixed constant from ``values``.
    """

    values: np.ndarray
    index: np.ndarray

    def materialize(self, theta: np.ndarray) -> np.ndarray:
        out = self.values.copy()
        mask = self.index >= 0
        out[mask] = theta[self.index[mask]]
        return out


@dataclass
class ParamMatrices:
    """Compiled parameter matrices with a flat free-parameter index map."""

    lambda_y: MatrixTemplate
    lambda_x: MatrixTemplate
    beta: MatrixTemplate
    gamma: MatrixTemplate
    phi: MatrixTemplate
    psi: MatrixTemplate
    theta_eps: MatrixTemplate
    theta_delta: MatrixTemplate
    theta_index: dict[str, int]
    eta_names: list[str]
    xi_names: list[str]
    y_names: list[str]
    x_names: list[str]
    variable_order: list[str]
    permutation: np.ndarray  # variable_order[i] = block_order[permutation[i]]
    standardized_latents: bool = False
    spec: ModelSpec | None = None

    @property
    def n_free(self) -> int:
        return len(self.theta_index)

    @property
    def n_observed(self) -> int:
        return len(self.variable_order)

    @property
    def labels(self) -> list[str]:
        ordered = sorted(self.theta_index, key=self.theta_index.get)
        return ordered

    def matrices_at(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_free,):
            raise ValueError(f"theta must have length {self.n_free}, got {theta.shape}")
        return {
            "lambda_y": self.lambda_y.materialize(theta),
            "lambda_x": self.lambda_x.materialize(theta),
            "beta": self.beta.materialize(theta),
            "gamma": self.gamma.materialize(theta),
            "phi": self.phi.materialize(theta),
            "psi": self.psi.materialize(theta),
            "theta_eps": self.theta_eps.materialize(theta),
            "theta_delta": self.theta_delta.materialize(theta),
        }


class _Builder:
    """Accumulates free-parameter slots in a fixed, documented order."""

    def __init__(self):
        self.theta_index: dict[str, int] = {}

    def slot(self, label: str) -> int:
        if label in self.theta_index:
            raise ModelSpecificationError(f"parameter {label!r} assigned twice")
        self.theta_index[label] = len(self.theta_index)
        return self.theta_index[label]


def build_matrices(
    spec: ModelSpec,
    variable_order: list[str],
    standardize_latents: bool = False,
) -> ParamMatrices:
    """Compile a ModelSpec into parameter matrices over ``variable_order``.

    Default identification fixes each latent's marker loading (first listed
    indicator) to 1. With ``standardize_latents`` the markers are freed and
    every latent variance scale (exogenous variance and structural
    disturbance variance alike) is fixed to 1 instead.

    Free-parameter order: endogenous loadings, exogenous loadings, latent
    paths (beta then gamma), exogenous (co)variances, disturbance
    (co)variances, then measurement-error entries.
    """
    indicators = spec.indicator_names
    if sorted(variable_order) != sorted(indicators):
        raise ModelSpecificationError(
            "variable_order must cover exactly the model's indicators; "
            f"expected {sorted(indicators)}, got {sorted(variable_order)}"
        )

    eta_names = spec.endogenous
    xi_names = spec.exogenous
    owner = {ind: lat.name for lat in spec.latents for ind in lat.indicators}
    y_names = [v for v in variable_order if owner[v] in eta_names]
    x_names = [v for v in variable_order if owner[v] in xi_names]
    fixed_loadings = spec.fixed_loading_map()
    markers = {lat.name: lat.indicators[0] for lat in spec.latents}

    ny, nx = len(y_names), len(x_names)
    m_eta, m_xi = len(eta_names), len(xi_names)
    eta_pos = {name: i for i, name in enumerate(eta_names)}
    xi_pos = {name: i for i, name in enumerate(xi_names)}
    y_pos = {name: i for i, name in enumerate(y_names)}
    x_pos = {name: i for i, name in enumerate(x_names)}

    b = _Builder()

    def new(shape):
        return MatrixTemplate(np.zeros(shape), np.full(shape, -1, dtype=int))

    lam_y, lam_x = new((ny, m_eta)), new((nx, m_xi))
    beta, gamma = new((m_eta, m_eta)), new((m_eta, m_xi))
    phi, psi = new((m_xi, m_xi)), new((m_eta, m_eta))
    th_eps, th_delta = new((ny, ny)), new((nx, nx))

    def loading_slot(latent: str, indicator: str, template, row, col):
        if indicator in fixed_loadings:
            template.values[row, col] = fixed_loadings[indicator]
        elif not standardize_latents and indicator == markers[latent]:
            template.values[row, col] = 1.0
        else:
            template.index[row, col] = b.slot(f"{latent}=~{indicator}")

    for lat in spec.latents:
        if lat.name in eta_pos:
            for ind in lat.indicators:
                loading_slot(lat.name, ind, lam_y, y_pos[ind], eta_pos[lat.name])
    for lat in spec.latents:
        if lat.name in xi_pos:
            for ind in lat.indicators:
                loading_slot(lat.name, ind, lam_x, x_pos[ind], xi_pos[lat.name])

    for reg in spec.regressions:
        i = eta_pos[reg.dependent]
        if reg.predictor in eta_pos:
            template, j = beta, eta_pos[reg.predictor]
        else:
            template, j = gamma, xi_pos[reg.predictor]
        if reg.fixed is not None:
            template.values[i, j] = reg.fixed
        else:
            template.index[i, j] = b.slot(f"{reg.dependent}~{reg.predictor}")

    # covariance statements, classified by operand kind
    cov_fixed: dict[tuple[str, str], float | None] = {}
    for cov in spec.covariances:
        cov_fixed[(cov.a, cov.b)] = cov.fixed

    def sym_slot(template, i, j, label, fixed):
        if fixed is not None:
            template.values[i, j] = template.values[j, i] = fixed
        else:
            k = b.slot(label)
            template.index[i, j] = template.index[j, i] = k

    # exogenous latent covariance: free by default, overridable by statement
    for ai in range(m_xi):
        a = xi_names[ai]
        pair = (a, a)
        if standardize_latents and pair not in cov_fixed:
            phi.values[ai, ai] = 1.0
        else:
            sym_slot(phi, ai, ai, f"{a}~~{a}", cov_fixed.pop(pair, None))
    for ai in range(m_xi):
        for bi in range(ai + 1, m_xi):
            a, c = sorted((xi_names[ai], xi_names[bi]))
            sym_slot(phi, xi_pos[a], xi_pos[c], f"{a}~~{c}", cov_fixed.pop((a, c), None))

    # disturbance covariances: diagonal by default, off-diagonals by statement
    for ai in range(m_eta):
        a = eta_names[ai]
        pair = (a, a)
        if standardize_latents and pair not in cov_fixed:
            psi.values[ai, ai] = 1.0
        else:
            sym_slot(psi, ai, ai, f"{a}~~{a}", cov_fixed.pop(pair, None))

    # measurement-error matrices: diagonal free, off-diagonals by statement
    for names, pos, template in ((y_names, y_pos, th_eps), (x_names, x_pos, th_delta)):
        for v in names:
            sym_slot(template, pos[v], pos[v], f"{v}~~{v}", cov_fixed.pop((v, v), None))

    for (a, c), fixed in sorted(cov_fixed.items()):
        if a in eta_pos and c in eta_pos:
            sym_slot(psi, eta_pos[a], eta_pos[c], f"{a}~~{c}", fixed)
        elif a in y_pos and c in y_pos:
            sym_slot(th_eps, y_pos[a], y_pos[c], f"{a}~~{c}", fixed)
        elif a in x_pos and c in x_pos:
            sym_slot(th_delta, x_pos[a], x_pos[c], f"{a}~~{c}", fixed)
        elif (a in eta_pos and c in xi_pos) or (a in xi_pos and c in eta_pos):
            raise ModelSpecificationError(
                f"covariance {a} ~~ {c} links an exogenous and an endogenous "
                "latent; the disturbance form cannot represent it"
            )
        elif (a in eta_pos or a in xi_pos) or (c in eta_pos or c in xi_pos):
            raise ModelSpecificationError(
                f"covariance {a} ~~ {c} between a latent and an indicator is "
                "not supported"
            )
        else:
            raise ModelSpecificationError(
                f"covariance {a} ~~ {c} crosses the endogenous/exogenous "
                "indicator blocks and cannot be represented"
            )

    block_order = y_names + x_names
    block_pos = {name: i for i, name in enumerate(block_order)}
    permutation = np.array([block_pos[v] for v in variable_order], dtype=int)

    return ParamMatrices(
        lambda_y=lam_y, lambda_x=lam_x, beta=beta, gamma=gamma,
        phi=phi, psi=psi, theta_eps=th_eps, theta_delta=th_delta,
        theta_index=b.theta_index,
        eta_names=eta_names, xi_names=xi_names,
        y_names=y_names, x_names=x_names,
        variable_order=list(variable_order), permutation=permutation,
        standardized_latents=standardize_latents, spec=spec,
    )


class DegreesOfFreedom(NamedTuple):
    """df accounting: value = n_moments - n_free, flagged when negative."""

    value: int
    n_moments: int
    n_free: int
    under_identified: bool


def count_df(matrices: ParamMatrices, p: int | None = None) -> DegreesOfFreedom:
    """Degrees of freedom p(p+1)/2 - t for p observed variables, t free params."""
    if p is None:
        p = matrices.n_observed
    n_moments = p * (p + 1) // 2
    t = matrices.n_free
    df = n_moments - t
    return DegreesOfFreedom(df, n_moments, t, under_identified=df < 0)
