"""Mediation analysis: effect decomposition and bootstrap intervals.

Total effects factor as (I - B)^-1 Gamma; subtracting the direct edge
leaves the mediated part. Percentile bootstrap (case resampling, refit
per replicate) gives the interval bounds the verdicts are read from.
"""

import json
from pathlib import Path

import latentpath as lp
from latentpath.report import Report, render_report

ASSETS = Path(lp.__file__).parent / "assets"
spec = lp.parse_model((ASSETS / "wuliangye.model").read_text())
config = json.loads((ASSETS / "wuliangye_sim.json").read_text())
m = lp.build_matrices(spec, spec.indicator_names, standardize_latents=True)
theta = lp.theta_from_config(m, config["values"], config["defaults"])
data = lp.simulate(m, theta, n=519, seed=42)

# Point decomposition first: no resampling, just the fitted path matrices.
result = lp.fit(spec, lp.covariance(data), compute_se=False)
effects = lp.decompose_fit(result)
for src in spec.exogenous:
    tot, dire, ind = effects.effect(src, "PB")
    print(f"{src:>8} -> PB   total={tot: .3f} direct={dire: .3f} indirect={ind: .3f}")

# Bootstrap intervals; 400 replicates keeps the demo quick, reports
# normally use 2000. The seed pins every replicate, so reruns match.
triples = [("ConsEth", "PerVa", "PB"), ("EnvSt", "PerVa", "PB"),
           ("PBC", "PerVa", "PB")]
decs = lp.bootstrap_ci(data, spec, triples, replicates=400, level=0.95, seed=2024)

report = Report()
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
print()
print(render_report(report, "text"))

# The same intervals are reproducible with more workers; replicate r
# always draws from a generator seeded seed + r.
again = lp.bootstrap_ci(data, spec, triples[:1], replicates=400, level=0.95,
                        seed=2024, workers=4)
assert again[0].indirect_bounds == decs[0].indirect_bounds
print("worker-count invariance holds")
