"""Draw seeded commuting perturbations of a classical contact structure and check the weak axioms.

    python scripts/perturbation_suite.py --model heisenberg:1,1 --count 500 --seed 3
"""

import argparse

import numpy as np

from gfol.lie_model import parse_ref
from gfol.weak_structures import (
    check_metric_compat,
    check_weak_almost_contact,
    classify,
    induced_structure,
    perturb_structure,
    random_commuting_perturbation,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="heisenberg:1")
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--scale", type=float, default=0.4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = parse_ref(args.model)
    s = induced_structure(model)
    rng = np.random.default_rng(args.seed)
    worst, labels = {}, {}
    for _ in range(args.count):
        sp = perturb_structure(s, random_commuting_perturbation(s, model, rng, args.scale), model)
        for rep in (check_weak_almost_contact(sp, model), check_metric_compat(sp, model)):
            for k, v in rep.residuals.items():
                if k != "rank":
                    worst[k] = max(worst.get(k, 0.0), v)
        label = classify(sp, model).label
        labels[label] = labels.get(label, 0) + 1
    print(f"{args.count} perturbations of {model.name} (seed {args.seed}, scale {args.scale})")
    for k, v in worst.items():
        print(f"  max {k:<24} {v:.3e}")
    for label, n in sorted(labels.items(), key=lambda kv: -kv[1]):
        print(f"  {n:5d}  {label}")


if __name__ == "__main__":
    main()
