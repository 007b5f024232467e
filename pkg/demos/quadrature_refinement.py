"""Integral identities on a Kaehler 4-torus at increasing grid resolution."""

from ngtbochner.verifycli import checks as C
from ngtbochner.verifycli.fixtures import builtin
from ngtbochner.verifycli.runner import run_fixture

ids = [c.id for c in C.REGISTRY if c.kind == "integral"]
print("resolution  " + "  ".join(f"{i[:14]:>14}" for i in ids))
for N in (4, 6, 8, 12):
    run = run_fixture(builtin("kaehler_T4"), ids, resolution=N, timings=False)
    cells = ["n/a" if c.residual is None else f"{c.residual:.2e}" for c in run.checks]
    print(f"{N:>10}  " + "  ".join(f"{s:>14}" for s in cells))
