"""A contorsion that is not skew in its last two slots: gated checks step aside, ungated ones still hold."""

from ngtbochner.verifycli.fixtures import builtin
from ngtbochner.verifycli.runner import run_fixture

run = run_fixture(builtin("negcontrol_T4"), sample=64, timings=False)
for c in run.checks:
    hyp = ", ".join(f"{k}={v:.2e}" for k, v in c.hypotheses.items()) or "-"
    res = "-" if c.residual is None else f"{c.residual:.2e}"
    print(f"{c.verdict:<15} {c.id:<42} residual {res:<9} {hyp}")

gated = [c for c in run.checks if "r_condE2" in c.hypotheses]
print(f"\n{sum(c.verdict == 'not_applicable' for c in gated)} of {len(gated)} checks gated on r_condE2 "
      f"are not applicable; r_condE2 = {gated[0].hypotheses['r_condE2']:.3f}")
