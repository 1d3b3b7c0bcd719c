"""Generate the committed convex fixtures with frozen oracle outputs.

Run from the repo root:

    python tools/gen_fixtures.py

Writes tests/fixtures/<name>.txt. Each file carries the full instance
(data, dims, bounds) plus the oracle's primal value, multipliers, and
solution vector, so the test suite asserts against frozen numbers without
re-deriving them. Regenerating after an intentional oracle change is
explicit, never accidental.
"""

import os
import sys

import numpy as np

from shapecast import oracle

OUT_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                       "tests", "fixtures")

# name -> (builder kwargs, expected active bound indices)
TIED = {
    "tied_one_active": (
        dict(seed=11, pred_len=3,
             step_targets=[[1.0, 0.2], [1.0, 0.2], [-0.8, 0.9]],
             eps_scale=0.6),
        (2,)),
    "tied_two_active": (
        dict(seed=23, pred_len=4, n_windows=40,
             step_targets=[[0.9, -0.3], [0.9, -0.3], [-0.5, 0.8], [0.7, 1.1]],
             eps_scale=0.65),
        (1, 2)),
    "tied_inactive": (
        dict(seed=7, pred_len=3, eps_scale=10.0),
        ()),
    "tied_exponential": (
        dict(seed=31, pred_len=3,
             step_targets=[[-0.6, 1.0], [1.0, 0.3], [1.0, 0.3]],
             eps_scale=0.55, eps_growth=1.5),
        (0,)),
}


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    failures = []
    instances = []
    for name, (kwargs, expect_active) in TIED.items():
        instances.append((oracle.make_tied_instance(name, **kwargs), expect_active))
    instances.append((oracle.make_direct_instance("direct_inactive", seed=5), ()))

    for inst, expect_active in instances:
        sol = oracle.solve_projected(inst)
        active = tuple(int(i) for i in np.flatnonzero(sol.lam_star > 1e-4))
        line = (f"{inst.name:<18} eps={np.round(inst.spec.epsilon, 4)} "
                f"lam={np.round(sol.lam_star, 6)} P*={sol.primal_value:.9f} "
                f"kkt={max(sol.residuals.values()):.2e} iters={sol.iterations}")
        print(line)
        if active != expect_active:
            failures.append(f"{inst.name}: active {active} != expected {expect_active}")
            continue
        gap = oracle.duality_gap(inst, sol.theta_star, sol.lam_star)
        if abs(gap.gap) > 1e-6:
            failures.append(f"{inst.name}: duality gap {gap.gap!r}")
            continue
        oracle.save_instance(inst, os.path.join(OUT_DIR, f"{inst.name}.txt"), sol)

    if failures:
        print("FAILED:")
        for f in failures:
            print(" ", f)
        return 1
    print(f"wrote {len(instances)} fixtures to {OUT_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
