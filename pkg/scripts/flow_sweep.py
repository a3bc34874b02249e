"""Integrate the normalized flow for several Phi values and tabulate the outcome.

    python scripts/flow_sweep.py --model heisenberg:2,3 --phi 0.5 1 2 --out-dir runs/sweep
"""

import argparse
import json
from pathlib import Path

from gfol.lie_model import parse_ref
from gfol.ricci_flow import FlowConfig, integrate_flow, limit_metric


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="heisenberg:2,3")
    ap.add_argument("--phi", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--out-dir", type=Path)
    args = ap.parse_args()

    model = parse_ref(args.model)
    rows = []
    print(f"{'phi':>6} {'t_end':>8} {'converged':>9} {'rate':>10} {'4 phi':>6} {'|G - G_hat|':>12}")
    for phi in args.phi:
        cfg = FlowConfig(phi_const=phi, dt=args.dt, diagnostics=False)
        traj = integrate_flow(model, cfg)
        gap = float(abs(traj.final.G - limit_metric(model, phi)).max())
        rows.append({"phi": phi, "t_end": cfg.t_end, "converged": traj.converged,
                     "rate": traj.rate_estimate, "limit_gap": gap})
        rate = f"{traj.rate_estimate:.6g}" if traj.rate_estimate is not None else "n/a"
        print(f"{phi:6g} {cfg.t_end:8g} {str(traj.converged):>9} {rate:>10} {4 * phi:6g} {gap:12.3e}")
        if args.out_dir:
            args.out_dir.mkdir(parents=True, exist_ok=True)
            (args.out_dir / f"trajectory_phi{phi:g}.csv").write_text(traj.to_csv(), encoding="utf-8")
    if args.out_dir:
        (args.out_dir / "summary.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
