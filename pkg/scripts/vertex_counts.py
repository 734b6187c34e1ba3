"""Count the vertices of the one-step martingale polytope as the number of assets grows."""
import argparse
import time

import numpy as np

from multibinom import MarketParams
from multibinom.errors import BudgetExceeded
from multibinom.linprog import enumerate_vertices
from multibinom.measures import martingale_constraints


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-assets", type=int, default=6)
    ap.add_argument("--max-seconds", type=float, default=60.0)
    args = ap.parse_args(argv)
    print("m,vertices,seconds")
    for m in range(1, args.max_assets + 1):
        i = np.arange(m)
        p = MarketParams.from_arrays(np.full(m, 100.0), 1.1 + 0.01 * i, 0.9 - 0.005 * i, 1.0, 1)
        A, d = martingale_constraints(p)
        t0 = time.perf_counter()
        try:
            count = str(len(enumerate_vertices(A, d, max_seconds=args.max_seconds)))
        except BudgetExceeded as exc:
            count = f"budget exceeded ({exc})"
        print(f"{m},{count},{time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
