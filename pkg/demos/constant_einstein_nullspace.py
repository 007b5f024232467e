"""Solve the constant Einstein system on a flat 4-torus and inspect the solution.

The nullspace is nontrivial but meets the K-skew subspace only in zero, so the
resulting connection is Einstein without being metric.
"""

import sys

from ngtbochner.verifycli.fixtures import fixture_from_dict, nullspace_fixture
from ngtbochner.verifycli.report import to_markdown
from ngtbochner.verifycli.runner import run_fixture

planes = tuple(float(a) for a in sys.argv[1:]) or (0.5, 0.75)
data, info = nullspace_fixture(4, planes)
print(f"F on coordinate planes {planes}: nullspace dim {info['nullspace_dim']}, "
      f"skew part dim {info['skew_intersection_dim']}")

spec = fixture_from_dict(data)
run = run_fixture(spec, ["einstein_condition", "einstein_connection_from_torsion", "nabla_g_from_nabla_F",
                         "metric_compatibility_equivalences", "curvature_symmetries"], sample=64, timings=False)
print(to_markdown([run]))
