"""
Divergence between a mixture family and an exponential family
=============================================================

min over P in a mixture family of D(P || e-projection of P) is what the em
algorithm computes.  Here it is the same iteration as everything else, with
Psi[P] = ln P - ln(e-projection of P), and at gamma = 1 it coincides step for
step with the classical alternation of e- and m-projections.
"""

import numpy as np

import mixfam as mf
from mixfam.oracle import GridSpec, classical_em_reference, em_divergence_oracle, grid_minimize

rng = np.random.default_rng(1)

# Mixture family {P : E_P[x] = 0.9} on {0, 1, 2}; exponential family of tilts of a base.
fam = mf.MixtureFamily(3, [[0.0, 1.0, 2.0]], [0.9])
efam = mf.ExponentialFamily([0.6, 0.3, 0.1], [[1.0, -1.0, 0.5]])
inst = mf.em_problem(fam, efam)

res = mf.solve_exact(inst.psi, fam, cfg=mf.SolverConfig(max_iter=30, stop_tol=1e-300))
ref = classical_em_reference(fam, efam, res.trace.iterates[0], len(res.trace) - 1)
diff = max(np.abs(a - b).max() for a, b in zip(ref, res.trace.iterates))
print(f"largest iterate difference from textbook em over {len(ref)} steps: {diff:.1e}")

grid = grid_minimize(em_divergence_oracle(efam), fam, GridSpec(400, mode="slice", refine=3))
print(f"minimum divergence {res.objective:.3e} nats (grid {grid.value:.3e}); the two families meet")
print(f"minimiser {np.round(res.minimizer, 6)}")

# em is not convex in general, so the instance asks for several random starts.
_, headline = mf.run_instance(inst, seed=7)
print("best of restarts:", headline)

# Reversing the sign gives the maximum divergence problem.
rev = mf.reverse_em(fam, efam)
r, h = mf.run_instance(rev, seed=7)
print(f"max divergence {h['max_divergence_nats']:.8f} nats at {np.round(r.minimizer, 4)}")
