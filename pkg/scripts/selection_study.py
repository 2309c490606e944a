"""Monte Carlo check of the large-dof conversion step in model selection.

Simulates Gaussian AR(1) data, fits StMAR(1,1), and records whether the
fitted dof exceeds the threshold and the procedure ends at G-StMAR(1,1,0).

    python scripts/selection_study.py --reps 20 --length 30000
"""

import argparse

from gstmar.diagnostics import SelectionConfig, select_model
from gstmar.genetic import GaConfig
from gstmar.model import GStmarModel, ModelOrder
from gstmar.simulation import simulate


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--length", type=int, default=30_000)
    ap.add_argument("--seed", type=int, default=300)
    args = ap.parse_args()

    gmar = GStmarModel.from_arrays(1, 1, 0, [0.3], [[0.6]], [1.0], [1.0])
    cfg = SelectionConfig(n_rounds=1, ga=GaConfig(population_size=20, generations=20, seed=10))
    good = 0
    for rep in range(args.reps):
        y = simulate(gmar, args.length, seed=args.seed + rep).paths[:, 0]
        trace = select_model(y, [1], [1], cfg)
        nu = trace.cells[0].model.nus[0] if trace.cells[0].model is not None else float("nan")
        rec = trace.recommended.order if trace.recommended is not None else None
        ok = nu > 100 and rec == ModelOrder(1, 1, 0)
        good += ok
        print(f"rep {rep:3d}  nu_hat {nu:12.4g}  recommended {rec}  {'ok' if ok else 'miss'}")
    print(f"{good}/{args.reps} replications reached G-StMAR(1,1,0) with nu_hat > 100")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
