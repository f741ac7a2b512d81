"""Generate coefficient/solution pairs with the classical forward solvers.

Shows one sample per family and checks each against its residual operator.

Run:  python3 demos/02_classical_solvers.py
"""

import numpy as np

from sparsepde import (GrfSpec, binarize_darcy, pde_spec, pde_loss,
                       residual_for, sample_grf, sample_grf_1d,
                       simulate_burgers, simulate_ns_vorticity, solve_darcy,
                       solve_helmholtz)

rng = np.random.default_rng(1)

print("== Darcy flow (binary medium, constant force) ==")
mu = sample_grf(GrfSpec(3.0, 2.0), 32, rng)
a = binarize_darcy(mu, 12.0, 3.0)
u = solve_darcy(a, q=1.0)
res = residual_for(pde_spec("darcy"), np.stack([a, u]))
print(f"  u range [{u.min():.4f}, {u.max():.4f}], boundary max {np.abs(u[0]).max()}")
print(f"  residual mean-square: {pde_loss(res):.2e}")

print("\n== Helmholtz (k = 1, mollified solution) ==")
a2 = sample_grf(GrfSpec(3.0, 2.0), 32, rng)
u2 = solve_helmholtz(a2, k=1.0, mollify=True)
res2 = residual_for(pde_spec("helmholtz"), np.stack([a2, u2]))
print(f"  residual mean-square: {pde_loss(res2):.2e}")

print("\n== Vorticity (nu = 1e-3, fixed trig forcing, 10 snapshots) ==")
w0 = sample_grf(GrfSpec(7.0, 2.5, 7.0**1.5), 32, rng)
snaps = simulate_ns_vorticity(w0, pde_spec("ns-vorticity"))
print(f"  w0 std {w0.std():.4f} -> w_T std {snaps[-1].std():.4f} "
      f"({len(snaps)} snapshots over 1 s)")

print("\n== Burgers (nu = 0.01, space-time field) ==")
u0 = sample_grf_1d(GrfSpec(5.0, 2.0, 625.0), 32, rng)
U = simulate_burgers(u0, pde_spec("burgers"))
mass = U.sum(axis=1)
print(f"  u range [{U.min():.2f}, {U.max():.2f}], "
      f"mass drift {np.abs(mass - mass[0]).max():.2e}")
res4 = residual_for(pde_spec("burgers"), U[np.newaxis])
print(f"  finite-difference residual mean-square: {pde_loss(res4):.3f} "
      f"(discretization floor, not round-off)")
