"""
Error exponents, secrecy and the information bottleneck
=======================================================

Three more objectives in the same mould.  The Renyi-type exponent objectives
approach the capacity problem as alpha -> 1; the wiretap objective trades the
legitimate receiver's information against the eavesdropper's; the
information bottleneck compresses X into T while keeping information about Y.
"""

import numpy as np

import mixfam as mf

w = mf.Channel([[0.8, 0.2], [0.3, 0.7]])
cap, _ = mf.run_instance(mf.channel_capacity(w), cfg=mf.SolverConfig(stop_tol=1e-15))
print("capacity-achieving input", np.round(cap.minimizer, 8))

# For two inputs and alpha = 1/2 the uniform input is exactly optimal.
for alpha in (0.5, 0.9):
    r, h = mf.run_instance(mf.reliability_exponent(w, alpha))
    print(f"reliability  alpha={alpha:<8.5g} input {np.round(r.minimizer, 6)}  I_alpha = {h['renyi_mutual_information']:.8f}")
for alpha in (2.0, 1.1):
    r, h = mf.run_instance(mf.strong_converse_exponent(w, alpha))
    print(f"strong conv. alpha={alpha:<8.5g} input {np.round(r.minimizer, 6)}  I_alpha = {h['renyi_mutual_information']:.8f}")

# Near alpha = 1 the objective is flat to first order, so gamma must shrink with |1 - alpha|.
alpha = 1 - 1e-5
g = abs(1 - alpha)
r, _ = mf.run_instance(mf.reliability_exponent(w, alpha, gamma=g), cfg=mf.SolverConfig(gamma=g, stop_tol=1e-20))
print(f"alpha=1-1e-5 with gamma={g:g}: total variation to capacity input {0.5 * np.abs(r.minimizer - cap.minimizer).sum():.1e}")

# Wiretap channel: Bob sees BSC(0.05), Eve sees BSC(0.2).
bob, eve = mf.Channel.bsc(0.05), mf.Channel.bsc(0.2)
r, h = mf.run_instance(mf.wiretap_general(bob, eve, 2), seed=3)
z_cap = -mf.solve_exact(mf.channel_capacity(eve).psi, mf.MixtureFamily.simplex(2)).objective
y_cap = -mf.solve_exact(mf.channel_capacity(bob).psi, mf.MixtureFamily.simplex(2)).objective
print(f"\nsecrecy capacity {h['secrecy_capacity_nats']:.8f} nats "
      f"(C_Bob - C_Eve = {y_cap - z_cap:.8f} for these degraded symmetric channels)")

# Information bottleneck on a correlated pair, alpha = 0.5, increasing beta.
src = mf.JointSource(np.array([[0.45, 0.05], [0.05, 0.45]]), 2)
print("\nbeta   objective     encoder P(T|X)")
for beta in (1.0, 1.5, 2.0, 4.0):
    r, h = mf.run_instance(mf.information_bottleneck(src, 0.5, beta), seed=0)
    enc = r.minimizer.reshape(2, 2) / src.p_x[None, :]
    print(f"{beta:4.1f}  {h['ib_objective_nats']:+.8f}  {np.round(enc.T, 4).tolist()}")
