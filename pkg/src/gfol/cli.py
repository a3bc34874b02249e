"""Command-line front end: ``gfol models|verify|geometry|flow|closed-form``.

Exit codes: 0 success/converged, 1 expectation failed, 2 not converged,
3 flow error, 64 usage error, 65 input or validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import lie_model, ricci_flow, tensor_geometry, weak_structures
from .errors import BadParams, FlowError, GfolError, KindMismatch, NotCompatible, ParseError

EXIT_OK, EXIT_EXPECT, EXIT_NOT_CONVERGED, EXIT_FLOW = 0, 1, 2, 3
EXIT_USAGE, EXIT_INPUT = 64, 65


def fmt(x) -> str:
    if x is None:
        return "n/a"
    return f"{float(x):.12g}"


@dataclass
class RunManifest:
    command: str
    inputs: dict
    config: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    seed: int | None = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def record(self, path) -> str:
        self.outputs.append(str(path))
        return str(path)

    def write(self, path):
        path = Path(path)
        self.outputs.append(str(path))
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def resolve_seed(cli_seed: int | None) -> int:
    env = os.environ.get("GFOL_SEED")
    if env is not None and env.strip():
        return int(env)
    return 0 if cli_seed is None else int(cli_seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_model_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--builtin", metavar="NAME:PARAMS", help="built-in model, e.g. heisenberg:2,3")
    g.add_argument("--model", metavar="PATH", help="model file (JSON)")


def _load(args):
    """Return (model, embedded structure dict or None, input description)."""
    if args.builtin:
        return lie_model.parse_ref(args.builtin), None, {"builtin": args.builtin}
    try:
        raw = Path(args.model).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {args.model}: {exc}") from None
    model = lie_model.load_model(raw)
    return model, model.structure, {"model": str(args.model)}


def _write_json(path, payload, manifest=None):
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    if manifest is not None:
        manifest.record(path)


# --- models ----------------------------------------------------------------------

def cmd_models(args) -> int:
    rows = [{"name": name, "params": sig, "class": cls} for name, (_, sig, cls) in lie_model.BUILTINS.items()]
    if args.json:
        print(json.dumps(rows, indent=2, ensure_ascii=False))
    else:
        for r in rows:
            print(f"{r['name']:<16} ({r['params']})  {r['class']}")
    return EXIT_OK


# --- verify --------------------------------------------------------------------------

def _structure(model, embedded, kind):
    if embedded is not None and kind is None:
        return weak_structures.structure_from_dict(embedded, model)
    return weak_structures.induced_structure(model, kind)


def _label_matches(cls, expect: str) -> bool:
    e = expect.strip()
    return e == cls.label or weak_structures.slugify(e) == cls.slug


def _perturbation_suite(model, s, n, seed, scale):
    rng = np.random.default_rng(seed)
    worst = {}
    failures = 0
    for _ in range(n):
        dphi = weak_structures.random_commuting_perturbation(s, model, rng, scale)
        sp = weak_structures.perturb_structure(s, dphi, model)
        res = dict(weak_structures.check_axioms(sp, model).residuals)
        res.update({f"metric.{k}": v for k, v in weak_structures.check_metric_compat(sp, model).residuals.items()})
        if max(res.values()) > weak_structures.PASS_TOL:
            failures += 1
        for k, v in res.items():
            worst[k] = max(worst.get(k, 0.0), v)
    return {"count": n, "seed": seed, "scale": scale, "failures": failures, "worst": worst}


def cmd_verify(args) -> int:
    model, embedded, inputs = _load(args)
    s = _structure(model, embedded, args.kind)
    cls = weak_structures.classify(s, model)
    report = {"model": model.name, "kind": s.kind, **cls.to_json()}
    if s.kind == "p_contact":
        report["composition_table"] = weak_structures.p_contact_composition(s).tolist()
    manifest = RunManifest("verify", inputs, {"kind": s.kind, "expect": args.expect})
    print(f"model: {model.name}")
    print(f"kind: {s.kind}")
    print(f"label: {cls.label}")
    for k, v in cls.residuals.items():
        print(f"  {k:<36} {fmt(v)}")
    status = EXIT_OK
    if args.perturb:
        if s.kind != "contact":
            raise KindMismatch("--perturb needs a contact structure")
        seed = resolve_seed(args.seed)
        manifest.seed = seed
        manifest.config.update({"perturb": args.perturb, "scale": args.scale})
        suite = _perturbation_suite(model, s, args.perturb, seed, args.scale)
        report["perturbations"] = suite
        print(f"perturbations: {suite['count']} (seed {seed}), failures: {suite['failures']}")
        for k, v in suite["worst"].items():
            print(f"  max {k:<32} {fmt(v)}")
        if suite["failures"]:
            status = EXIT_EXPECT
    if args.expect is not None:
        ok = _label_matches(cls, args.expect)
        print(f"expect {args.expect!r}: {'ok' if ok else 'FAILED'}")
        if not ok:
            status = EXIT_EXPECT
    if args.json:
        _write_json(args.json, report, manifest)
    if args.manifest:
        manifest.write(args.manifest)
    return status


# --- geometry -------------------------------------------------------------------------

def cmd_geometry(args) -> int:
    model, _, inputs = _load(args)
    rep = tensor_geometry.geometry_report(model)
    out = rep.to_json()
    print(f"model: {model.name}")
    print("ric_perp (curvature route):")
    for row in np.atleast_2d(rep.ric_perp):
        print("  " + " ".join(fmt(x) for x in row))
    print(f"ric_route_discrepancy: {fmt(rep.residuals.get('ric_route_discrepancy'))}")
    for k, v in rep.residuals.items():
        if k != "ric_route_discrepancy":
            print(f"  {k:<28} {fmt(v)}")
    manifest = RunManifest("geometry", inputs)
    if args.json:
        _write_json(args.json, {"model": model.name, **out}, manifest)
    if args.manifest:
        manifest.write(args.manifest)
    return EXIT_OK


# --- flow -------------------------------------------------------------------------------

def _flow_config(args, phi):
    return ricci_flow.FlowConfig(
        phi_const=phi, t_end=args.t_end, dt=args.dt, tol=args.tol,
        record_every=args.record_every, diagnostics=not args.no_diagnostics,
        diagnostics_every=args.diagnostics_every, kind=args.kind)


def _run_flow(model, cfg, out_dir: Path | None, retract: bool, tag: str):
    traj = ricci_flow.integrate_flow(model, cfg)
    summary = {
        "phi": cfg.phi_const,
        "t_end": cfg.t_end,
        "converged": traj.converged,
        "final_ric_eigs": traj.final.ric_eigs,
        "rate_estimate": traj.rate_estimate,
        "expected_rate": 4 * cfg.phi_const,
        "max_residuals": {k: traj.max_residual(k) for k in traj.samples[0].residuals},
        "outputs": [],
    }
    if out_dir is not None:
        jp, cp = out_dir / f"trajectory{tag}.json", out_dir / f"trajectory{tag}.csv"
        jp.write_text(json.dumps(traj.to_json()) + "\n", encoding="utf-8")
        cp.write_text(traj.to_csv(), encoding="utf-8")
        summary["outputs"] += [str(jp), str(cp)]
    if retract and traj.converged:
        summary["retraction"] = ricci_flow.retract_and_verify(model, cfg, traj).to_json()
    return summary


def _print_flow(model, s):
    print(f"model: {model.name}  phi: {fmt(s['phi'])}  t_end: {fmt(s['t_end'])}")
    print(f"converged: {'yes' if s['converged'] else 'no'}")
    print("final ric_eigs: " + " ".join(fmt(x) for x in s["final_ric_eigs"]))
    print(f"rate: {fmt(s['rate_estimate'])} (expected {fmt(s['expected_rate'])})")
    for k, v in s["max_residuals"].items():
        print(f"  max {k:<14} {fmt(v)}")
    if "retraction" in s:
        r = s["retraction"]
        print(f"retraction: limit label {r['label_limit']!r}, |Q - id| = {fmt(r['q_deviation'])}, "
              f"normality = {fmt(r['normality_limit'])}")
        print("  K(xi_i, X) at limit: " + " ".join(fmt(k) for k in r["mixed_sectional"]))


def cmd_flow(args) -> int:
    model, _, inputs = _load(args)
    phis = args.sweep if args.sweep else [args.phi]
    cfgs = [_flow_config(args, phi) for phi in phis]
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("flow", inputs, {"configs": [asdict(c) for c in cfgs], "retract": args.retract})
    tags = [f"_phi{fmt(c.phi_const)}" if len(cfgs) > 1 else "" for c in cfgs]
    try:
        if len(cfgs) > 1:
            with ThreadPoolExecutor() as pool:
                summaries = list(pool.map(lambda ct: _run_flow(model, ct[0], out_dir, args.retract, ct[1]),
                                          zip(cfgs, tags)))
        else:
            summaries = [_run_flow(model, cfgs[0], out_dir, args.retract, tags[0])]
    except (FlowError, NotCompatible) as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FLOW
    for s in summaries:
        _print_flow(model, s)
        manifest.outputs.extend(s["outputs"])
    if args.json:
        _write_json(args.json, {"model": model.name, "runs": summaries}, manifest)
    if out_dir is not None:
        manifest.write(out_dir / "manifest.json")
    elif args.manifest:
        manifest.write(args.manifest)
    return EXIT_OK if all(s["converged"] for s in summaries) else EXIT_NOT_CONVERGED


# --- closed-form ---------------------------------------------------------------------

def cmd_closed_form(args) -> int:
    rows = []
    if args.psi1 is not None or args.psi2 is not None:
        spec = ricci_flow.ScalarOdeSpec(args.psi1 or 0.0, args.psi2 or 0.0)
        mu_p, mu_m = spec.stationary
        if args.stationary or not args.mu0:
            rows.append({"mu_plus": mu_p, "mu_minus": mu_m})
        for mu0 in args.mu0 or []:
            for t in args.t or [-3.0]:
                res = ricci_flow.scalar_case_i(ricci_flow.ScalarOdeSpec(spec.psi1, spec.psi2, mu0=mu0), t, args.dt)
                rows.append({"mu0": mu0, "t": t, "mu": res.final, "mu_plus": mu_p, "mu_minus": mu_m})
    else:
        if not args.mu0 or not args.t:
            raise BadParams("closed-form needs --mu0 and --t (or --psi1/--psi2)")
        rate = args.phi if args.phi is not None else args.p
        if rate is None:
            raise BadParams("closed-form needs --p or --phi")
        for mu0 in args.mu0:
            for t in args.t:
                if args.alpha is not None:
                    mu = ricci_flow.comparison_closed_form(mu0, args.alpha, rate, t)
                    rows.append({"mu0": mu0, "phi": rate, "alpha": args.alpha, "t": t, "mu": mu})
                else:
                    rows.append({"mu0": mu0, "p": rate, "t": t, "mu": ricci_flow.closed_form_mu(mu0, rate, t)})
    keys = list(rows[0]) if rows else []
    if args.csv:
        lines = [",".join(keys)] + [",".join(fmt(r[k]) for k in keys) for r in rows]
        Path(args.csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for r in rows:
        print("  ".join(f"{k}={fmt(v)}" for k, v in r.items()))
    return EXIT_OK


# --- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gfol", description="Weak metric structures and partial Ricci flow on Lie models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("models", help="list built-in model families")
    p.add_argument("--json", action="store_true", help="machine-readable listing")
    p.set_defaults(func=cmd_models)

    p = sub.add_parser("verify", help="classify the structure on a model")
    _add_model_args(p)
    p.add_argument("--kind", choices=weak_structures.KINDS)
    p.add_argument("--expect", metavar="LABEL", help="exit 1 unless this label (or slug) is reached")
    p.add_argument("--perturb", type=int, default=0, metavar="N", help="run N seeded commuting perturbations")
    p.add_argument("--scale", type=float, default=0.3, help="operator-norm bound of perturbations")
    p.add_argument("--seed", type=int)
    p.add_argument("--json", metavar="PATH")
    p.add_argument("--manifest", metavar="PATH")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("geometry", help="connection, curvature and partial Ricci data")
    _add_model_args(p)
    p.add_argument("--json", metavar="PATH")
    p.add_argument("--manifest", metavar="PATH")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("flow", help="integrate the normalized partial Ricci flow")
    _add_model_args(p)
    p.add_argument("--phi", type=float, default=1.0)
    p.add_argument("--sweep", type=float, nargs="+", metavar="PHI", help="run several Phi values concurrently")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--diagnostics-every", type=int, default=10)
    p.add_argument("--no-diagnostics", action="store_true")
    p.add_argument("--kind", choices=weak_structures.KINDS)
    p.add_argument("--retract", action="store_true", help="classify the limit structure")
    p.add_argument("--out-dir", metavar="DIR", help="write trajectory JSON/CSV and manifest here")
    p.add_argument("--json", metavar="PATH")
    p.add_argument("--manifest", metavar="PATH")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("closed-form", help="evaluate closed-form and scalar solutions")
    p.add_argument("--mu0", type=float, nargs="+")
    p.add_argument("--p", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", type=float, nargs="+")
    p.add_argument("--psi1", type=float)
    p.add_argument("--psi2", type=float)
    p.add_argument("--stationary", action="store_true")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--csv", metavar="PATH")
    p.set_defaults(func=cmd_closed_form)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GfolError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
