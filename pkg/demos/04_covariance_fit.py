"""Maximum-likelihood estimation of the full structural model.

Minimizes log|Sigma(theta)| + tr(S Sigma(theta)^-1) - log|S| - p by BFGS
with an analytic gradient, then reports regression weights with standard
errors, the goodness-of-fit index suite, and the standardized solution.
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

result = lp.fit(spec, lp.covariance(data))
print(f"converged: {result.converged} after {result.iterations} iterations")
print(f"F_min = {result.f_min:.6f}, chisq = {result.chisq:.2f}, df = {result.df}")
print(f"monotone descent: {all(b <= a for a, b in zip(result.f_history, result.f_history[1:]))}")

report = Report()
report.add("regression_weights", "regression_weights",
           {"paths": result.parameter_table(kind="path")})
report.add("fit_indices", "fit_indices", {
    "values": lp.from_fit(result).values(),
    "passed": lp.from_fit(result).passed,
})
print()
print(render_report(report, "text"))

print("standardized structural paths:")
for row in result.parameter_table(kind="path"):
    print(f"  {row['label']:<16} raw={row['estimate']: .3f}  "
          f"std={row['standardized']: .3f}")

# The hypothesis verdicts follow the labeled paths in the model file.
for v in lp.classify_hypotheses(result):
    print(f"{v.label}: {v.path:<16} -> {v.verdict} ({v.detail})")
