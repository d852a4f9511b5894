"""Command-line interface.

Subcommands: fit, cfa, efa, reliability, mediate, simulate, report.
Exit status 0 on success, 1 on a domain error (non-convergence,
under-identification, estimation failure), 2 on a usage error (bad flags,
missing files, model syntax problems). Every run emits a provenance
header with input hashes, the seed, and the options in effect; the
``LATENTPATH_SEED`` environment variable supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import efa as efa_mod
from . import fit_indices
from .data import Dataset, covariance, load_table, save_table
from .effects import bootstrap_ci, classify_hypotheses, delta_ci
from .errors import (
    DataError,
    EstimationError,
    LatentPathError,
    ModelSpecificationError,
    ModelSyntaxError,
    NotPositiveDefiniteError,
    UnderIdentifiedError,
)
from .model import ModelSpec, build_matrices, parse_model
from .reliability import (
    average_variance_extracted,
    bartlett,
    composite_reliability,
    cronbach_alpha,
    fornell_larcker,
    kmo,
)
from .report import Report, file_sha256, provenance, render_report
from .sem import (
    EstimationOptions,
    FitResult,
    fit,
    latent_covariance,
    simulate,
    theta_from_config,
)

_USAGE_ERRORS = (ModelSyntaxError, ModelSpecificationError, DataError, FileNotFoundError)
_DOMAIN_ERRORS = (UnderIdentifiedError, EstimationError, NotPositiveDefiniteError)


def _default_seed() -> int:
    return int(os.environ.get("LATENTPATH_SEED", "0"))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("text", "json"), default="text")
    parser.add_argument("--output", help="write the report here instead of stdout")
    parser.add_argument(
        "--stars", choices=("survey", "conventional"), default="survey",
        help="significance-star convention (default: * <0.1, ** <0.05, *** <0.001)",
    )
    parser.add_argument(
        "--divisor", choices=("n-1", "n"), default="n-1",
        help="sample-covariance divisor (stated in the provenance header)",
    )


def _add_estimation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-iter", type=int, default=500)
    parser.add_argument("--gtol", type=float, default=1e-6)
    parser.add_argument("--chisq-n", choices=("n", "n-1"), default="n-1",
                        help="chi-square multiplier")
    parser.add_argument("--std-lv", action="store_true",
                        help="standardize latents instead of marker fixing")


def _options(args) -> EstimationOptions:
    return EstimationOptions(
        max_iter=args.max_iter, gtol=args.gtol,
        chisq_multiplier=args.chisq_n,
    )


def _read_model(path: str) -> ModelSpec:
    text = Path(path).read_text(encoding="utf-8")
    return parse_model(text)


def _emit(report: Report, args) -> None:
    rendered = render_report(report, args.format)
    if args.output:
        Path(args.output).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)


def _fit_payload(result: FitResult) -> dict:
    return {
        "estimates": result.estimates,
        "se": dict(zip(result.labels, result.se)),
        "crit_ratio": dict(zip(result.labels, result.crit_ratio)),
        "p_values": dict(zip(result.labels, result.p_values)),
        "standardized": result.standardized,
        "f_min": result.f_min,
        "chisq": result.chisq,
        "df": result.df,
        "chisq_p": result.chisq_p,
        "n": result.n,
        "p": result.p,
        "iterations": result.iterations,
        "gradient_norm": result.gradient_norm,
        "converged": result.converged,
        "heywood": result.heywood,
        "implied_covariance": result.implied,
        "variables": result.matrices.variable_order if result.matrices else [],
    }


def _indices_payload(report: fit_indices.FitIndexReport) -> dict:
    return {"values": report.values(), "passed": report.passed}


def _regression_payload(result: FitResult) -> dict:
    return {"paths": result.parameter_table(kind="path")}


def _convergent_payload(result: FitResult, spec: ModelSpec) -> dict:
    table = {row["label"]: row for row in result.parameter_table(kind="loading")}
    constructs = []
    for lat in spec.latents:
        loadings, p_values = [], []
        for ind in lat.indicators:
            label = f"{lat.name}=~{ind}"
            std = result.standardized.get(label)
            loadings.append(std)
            p_values.append(table[label]["p"] if label in table else None)
        lam = np.array([v for v in loadings if v is not None])
        constructs.append({
            "name": lat.name,
            "items": list(lat.indicators),
            "loadings": loadings,
            "p_values": p_values,
            "cr": composite_reliability(lam) if lam.size else None,
            "ave": average_variance_extracted(lam) if lam.size else None,
        })
    return {"constructs": constructs}


def _discriminant_payload(result: FitResult, spec: ModelSpec) -> dict:
    cov_lat, lat_names = latent_covariance(result.matrices, result.theta)
    sd = np.sqrt(np.diag(cov_lat))
    corr = cov_lat / np.outer(sd, sd)
    conv = _convergent_payload(result, spec)["constructs"]
    ave = {c["name"]: c["ave"] for c in conv}
    order = [c["name"] for c in conv]
    idx = [lat_names.index(nm) for nm in order]
    corr_ordered = corr[np.ix_(idx, idx)]
    fl = fornell_larcker({nm: ave[nm] for nm in order}, corr_ordered, order)
    return {
        "names": fl.names,
        "matrix": fl.matrix,
        "passed": fl.passed,
        "ave": [ave[nm] for nm in order],
        "all_passed": fl.all_passed,
    }


def _reliability_payload(dataset: Dataset, constructs: list[tuple[str, list[str]]],
                         divisor: str = "n-1") -> dict:
    blocks = []
    for name, items in constructs:
        sub = dataset.subset(items)
        X = sub.complete_rows()
        alpha = cronbach_alpha(X)
        moments = covariance(sub, divisor=divisor)
        kmo_val = kmo(moments.R)
        chi2, df, p = bartlett(moments.R, moments.n)
        cr = ave = None
        loadings = None
        try:
            one_factor = parse_model(f"{name} =~ " + " + ".join(items))
            res = fit(one_factor, moments, compute_se=False)
            loadings = [
                res.standardized.get(f"{name}=~{item}") for item in items
            ]
            lam = np.array(loadings, dtype=float)
            cr = composite_reliability(lam)
            ave = average_variance_extracted(lam)
        except (LatentPathError, ValueError):
            pass
        blocks.append({
            "name": name, "items": items, "alpha": alpha,
            "kmo": kmo_val, "bartlett_chi2": chi2,
            "bartlett_df": df, "bartlett_p": p,
            "loadings": loadings, "cr": cr, "ave": ave,
        })
    return {"constructs": blocks}


def _derive_mediation_triples(spec: ModelSpec) -> list[tuple[str, str, str]]:
    """Single-edge chains src -> med -> dst among the model's latents."""
    edges = {(r.predictor, r.dependent) for r in spec.regressions}
    triples = []
    for src in spec.exogenous:
        for med in spec.endogenous:
            for dst in spec.endogenous:
                if med != dst and (src, med) in edges and (med, dst) in edges:
                    triples.append((src, med, dst))
    return triples


def _parse_effect(text: str) -> tuple[str, str, str]:
    parts = text.split(":")
    if len(parts) != 3:
        raise DataError(f"--effect wants SRC:MED:DST, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


def _parse_construct(text: str) -> tuple[str, list[str]]:
    if "=" not in text:
        raise DataError(f"--construct wants NAME=item1,item2,..., got {text!r}")
    name, _, items = text.partition("=")
    items = [item.strip() for item in items.split(",") if item.strip()]
    if not items:
        raise DataError(f"--construct {name!r} lists no items")
    return name.strip(), items


# --- subcommand handlers ----------------------------------------------------


def _cmd_fit(args) -> int:
    spec = _read_model(args.model)
    dataset = load_table(args.data, delimiter=args.delimiter)
    moments = covariance(dataset, divisor=args.divisor)
    opts = _options(args)
    result = fit(spec, moments, opts, standardize_latents=args.std_lv)
    prov = provenance(args.model, args.data, seed=_default_seed(), options=opts)
    prov["covariance_divisor"] = args.divisor
    report = Report(prov, args.stars)
    report.add("fit", "fit", _fit_payload(result))
    report.add("regression_weights", "regression_weights", _regression_payload(result))
    report.add("fit_indices", "fit_indices",
               _indices_payload(fit_indices.from_fit(result)))
    if spec.labels:
        verdicts = classify_hypotheses(result)
        report.add("hypotheses", "hypotheses",
                   {"verdicts": [v.__dict__ for v in verdicts]})
    _emit(report, args)
    return 0 if result.converged else 1


def _cmd_cfa(args) -> int:
    spec = _read_model(args.model).without_regressions()
    dataset = load_table(args.data, delimiter=args.delimiter)
    moments = covariance(dataset, divisor=args.divisor)
    opts = _options(args)
    result = fit(spec, moments, opts, standardize_latents=args.std_lv)
    prov = provenance(args.model, args.data, seed=_default_seed(), options=opts)
    prov["covariance_divisor"] = args.divisor
    report = Report(prov, args.stars)
    report.add("fit", "cfa_fit", _fit_payload(result))
    report.add("convergent_validity", "convergent_validity",
               _convergent_payload(result, spec))
    report.add("discriminant_validity", "discriminant_validity",
               _discriminant_payload(result, spec))
    report.add("fit_indices", "fit_indices",
               _indices_payload(fit_indices.from_fit(result)))
    _emit(report, args)
    return 0 if result.converged else 1


def _cmd_efa(args) -> int:
    dataset = load_table(args.data, delimiter=args.delimiter)
    moments = covariance(dataset, divisor=args.divisor)
    loadings = efa_mod.extract(moments.R, retention=args.retain,
                               names=moments.names, method=args.method)
    rotation = args.rotation
    if rotation == "varimax" and loadings.n_factors >= 1:
        loadings = efa_mod.varimax(loadings)
    table = efa_mod.rotated_component_table(loadings, suppress_below=args.suppress)
    prov = provenance(data_path=args.data, seed=_default_seed(), options={
        "retain": args.retain, "suppress": args.suppress,
        "rotation": args.rotation, "method": args.method,
    })
    prov["covariance_divisor"] = args.divisor
    report = Report(prov, args.stars)
    report.add("efa", "efa", {
        "items": table.names,
        "cells": table.cells,
        "dominant": table.dominant,
        "threshold": table.threshold,
        "rotation": rotation,
        "eigenvalues": loadings.eigenvalues,
        "eigenvalues_retained": loadings.eigenvalues[:loadings.n_factors],
        "communalities": loadings.communalities,
        "n_factors": loadings.n_factors,
    })
    _emit(report, args)
    return 0


def _cmd_reliability(args) -> int:
    dataset = load_table(args.data, delimiter=args.delimiter)
    constructs = [_parse_construct(c) for c in args.construct]
    payload = _reliability_payload(dataset, constructs, divisor=args.divisor)
    prov = provenance(data_path=args.data, seed=_default_seed(),
                      options={"constructs": args.construct})
    prov["covariance_divisor"] = args.divisor
    report = Report(prov, args.stars)
    report.add("reliability", "reliability", payload)
    report.add("sampling_adequacy", "sampling_adequacy", payload)
    report.add("convergent_validity", "convergent_validity", {
        "constructs": [
            {
                "name": blk["name"], "items": blk["items"],
                "loadings": blk["loadings"] or [None] * len(blk["items"]),
                "p_values": [None] * len(blk["items"]),
                "cr": blk["cr"], "ave": blk["ave"],
            }
            for blk in payload["constructs"]
        ]
    })
    _emit(report, args)
    return 0


def _cmd_mediate(args) -> int:
    spec = _read_model(args.model)
    dataset = load_table(args.data, delimiter=args.delimiter)
    opts = _options(args)
    effects = [_parse_effect(e) for e in args.effect]
    seed = args.seed if args.seed is not None else _default_seed()
    if args.boot > 0:
        decs = bootstrap_ci(
            dataset, spec, effects, replicates=args.boot,
            level=args.level, seed=seed, opts=opts,
            standardize_latents=args.std_lv, workers=args.workers,
        )
    else:
        moments = covariance(dataset, divisor=args.divisor)
        result = fit(spec, moments, opts, standardize_latents=args.std_lv)
        decs = delta_ci(result, effects, level=args.level)
    payload = {
        "effects": [
            {**{k: getattr(d, k) for k in (
                "source", "target", "mediator", "total", "direct", "indirect",
                "total_bounds", "direct_bounds", "indirect_bounds",
                "level", "method", "n_replicates", "n_dropped")},
             "verdict": d.mediation_verdict()}
            for d in decs
        ],
        "additivity_tolerance": 0.002,
    }
    prov = provenance(args.model, args.data, seed=seed, options=opts)
    prov["covariance_divisor"] = args.divisor
    prov["bootstrap"] = {"replicates": args.boot, "level": args.level}
    report = Report(prov, args.stars)
    report.add("mediation", "mediation", payload)
    _emit(report, args)
    return 0


def _cmd_simulate(args) -> int:
    spec = _read_model(args.model)
    config = json.loads(Path(args.params).read_text(encoding="utf-8"))
    std_lv = bool(config.get("standardize_latents", False))
    m = build_matrices(spec, spec.indicator_names, standardize_latents=std_lv)
    theta = theta_from_config(m, config.get("values"), config.get("defaults"))
    seed = args.seed if args.seed is not None else _default_seed()
    dataset = simulate(m, theta, args.n, seed)
    save_table(dataset, args.out)
    prov = provenance(args.model, seed=seed)
    prov["params"] = str(args.params)
    prov["params_sha256"] = file_sha256(args.params)
    prov["rows"] = args.n
    prov["written"] = str(args.out)
    report = Report(prov, args.stars)
    report.add("dataset", "dataset", {
        "n": dataset.n, "p": dataset.p, "n_complete": dataset.n,
        "zero_variance": [],
    })
    _emit(report, args)
    return 0


def _cmd_report(args) -> int:
    spec = _read_model(args.model)
    dataset = load_table(args.data, delimiter=args.delimiter)
    moments = covariance(dataset, divisor=args.divisor)
    opts = _options(args)
    seed = args.seed if args.seed is not None else _default_seed()
    prov = provenance(args.model, args.data, seed=seed, options=opts)
    prov["covariance_divisor"] = args.divisor
    prov["bootstrap"] = {"replicates": args.boot, "level": args.level}
    report = Report(prov, args.stars)
    report.add("dataset", "dataset", {
        "n": dataset.n, "p": dataset.p,
        "n_complete": int((~dataset.missing.any(axis=1)).sum()),
        "zero_variance": moments.zero_variance,
    })
    constructs = [(lat.name, list(lat.indicators)) for lat in spec.latents]
    rel = _reliability_payload(dataset, constructs, divisor=args.divisor)
    report.add("reliability", "reliability", rel)
    report.add("sampling_adequacy", "sampling_adequacy", rel)

    model_vars = spec.indicator_names
    sub_moments = covariance(dataset.subset(model_vars), divisor=args.divisor)
    loadings = efa_mod.extract(sub_moments.R, retention="kaiser", names=model_vars)
    if loadings.n_factors >= 1:
        loadings = efa_mod.varimax(loadings)
    table = efa_mod.rotated_component_table(loadings, suppress_below=0.4)
    report.add("efa", "efa", {
        "items": table.names, "cells": table.cells, "dominant": table.dominant,
        "threshold": table.threshold, "rotation": "varimax",
        "eigenvalues": loadings.eigenvalues,
        "eigenvalues_retained": loadings.eigenvalues[:loadings.n_factors],
        "communalities": loadings.communalities,
        "n_factors": loadings.n_factors,
    })

    cfa_spec = spec.without_regressions()
    cfa_result = fit(cfa_spec, moments, opts, standardize_latents=args.std_lv)
    report.add("convergent_validity", "convergent_validity",
               _convergent_payload(cfa_result, cfa_spec))
    report.add("discriminant_validity", "discriminant_validity",
               _discriminant_payload(cfa_result, cfa_spec))
    report.add("fit_indices", "cfa_fit_indices",
               _indices_payload(fit_indices.from_fit(cfa_result)))

    result = fit(spec, moments, opts, standardize_latents=args.std_lv)
    report.add("fit", "fit", _fit_payload(result))
    report.add("regression_weights", "regression_weights", _regression_payload(result))
    report.add("fit_indices", "sem_fit_indices",
               _indices_payload(fit_indices.from_fit(result)))

    triples = [_parse_effect(e) for e in args.effect] if args.effect \
        else _derive_mediation_triples(spec)
    decs = []
    if triples and args.boot > 0:
        decs = bootstrap_ci(
            dataset, spec, triples, replicates=args.boot, level=args.level,
            seed=seed, opts=opts, standardize_latents=args.std_lv,
            workers=args.workers,
        )
        report.add("mediation", "mediation", {
            "effects": [
                {**{k: getattr(d, k) for k in (
                    "source", "target", "mediator", "total", "direct", "indirect",
                    "total_bounds", "direct_bounds", "indirect_bounds",
                    "level", "method", "n_replicates", "n_dropped")},
                 "verdict": d.mediation_verdict()}
                for d in decs
            ],
            "additivity_tolerance": 0.002,
        })
    if spec.labels:
        verdicts = classify_hypotheses(result)
        report.add("hypotheses", "hypotheses",
                   {"verdicts": [v.__dict__ for v in verdicts]})
    _emit(report, args)
    ok = result.converged and cfa_result.converged
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentpath",
        description="Latent-variable path models: ML estimation, fit indices, "
                    "psychometrics, EFA, and bootstrap mediation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        _add_common(p)
        p.add_argument("--delimiter", default=",",
                       help="field delimiter of the data file (default comma)")
        return p

    p = add("fit", _cmd_fit, "estimate a structural model by ML")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_estimation(p)

    p = add("cfa", _cmd_cfa, "measurement-only fit with freely covarying latents")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_estimation(p)

    p = add("efa", _cmd_efa, "exploratory factor analysis")
    p.add_argument("--data", required=True)
    p.add_argument("--retain", default="kaiser",
                   help="'kaiser' or 'm=<k>' (default kaiser)")
    p.add_argument("--suppress", type=float, default=0.4)
    p.add_argument("--rotation", choices=("varimax", "none"), default="varimax")
    p.add_argument("--method", choices=("principal", "principal-axis"),
                   default="principal")

    p = add("reliability", _cmd_reliability, "alpha, KMO, Bartlett, CR/AVE per construct")
    p.add_argument("--data", required=True)
    p.add_argument("--construct", action="append", required=True,
                   help="NAME=item1,item2,... (repeatable)")

    p = add("mediate", _cmd_mediate, "effect decomposition with bootstrap intervals")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--effect", action="append", required=True,
                   help="SRC:MED:DST (repeatable)")
    p.add_argument("--boot", type=int, default=2000,
                   help="bootstrap replicates; 0 switches to the delta method")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_estimation(p)

    p = add("simulate", _cmd_simulate, "draw a dataset from a parameterized model")
    p.add_argument("--model", required=True)
    p.add_argument("--params", required=True,
                   help="JSON with 'values', 'defaults', 'standardize_latents'")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="CSV file to write")

    p = add("report", _cmd_report, "full pipeline: psychometrics, EFA, CFA, SEM, mediation")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--effect", action="append", default=None,
                   help="SRC:MED:DST (repeatable; default: derived from the model)")
    p.add_argument("--boot", type=int, default=500)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_estimation(p)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    """Parse argv and run the selected subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
