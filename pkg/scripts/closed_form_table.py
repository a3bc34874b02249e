"""Compare RK4 flow eigenvalues with the closed-form solution and check the RK4 order.

    python scripts/closed_form_table.py
"""

import numpy as np

from gfol.lie_model import heisenberg
from gfol.ricci_flow import FlowConfig, closed_form_mu, integrate_flow


def max_error(traj, mu0s):
    worst = 0.0
    for s in traj.samples:
        exact = sorted(closed_form_mu(m, 1.0, s.t) for m in mu0s)
        worst = max(worst, float(np.max(np.abs(np.array(s.ric_eigs) - exact))))
    return worst


def main():
    model = heisenberg(2, 3)
    mu0s = [4.0, 4.0, 9.0, 9.0]
    print("t        mu(4)          mu(9)")
    for t in (0.0, -0.25, -0.5, -1.0, -2.0, -5.0):
        print(f"{t:<8g} {closed_form_mu(4, 1, t):.12g}  {closed_form_mu(9, 1, t):.12g}")
    prev = None
    print("\ndt        max |RK4 - closed form|   ratio")
    for dt in (1e-2, 5e-3, 2.5e-3, 1e-3, 5e-4):
        traj = integrate_flow(model, FlowConfig(phi_const=1.0, t_end=-5.0, dt=dt, diagnostics=False))
        err = max_error(traj, mu0s)
        ratio = f"{prev / err:.3f}" if prev else ""
        print(f"{dt:<9g} {err:.6e}              {ratio}")
        prev = err


if __name__ == "__main__":
    main()
