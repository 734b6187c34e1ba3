"""Time the LP induction and the closed form on the m = 5, n = 8 recombinant graph."""
import time

import numpy as np

from multibinom import MarketParams, PayoffFn, backward_induction_bounds, closed_form_surface


def main():
    m, n = 5, 8
    i = np.arange(m)
    p = MarketParams.from_arrays(np.full(m, 100.0), 1.1 + 0.01 * i, 0.9 - 0.005 * i, 1.0, n)
    pay = PayoffFn.basket_call(np.full(m, 1 / m), 100.0)
    t0 = time.perf_counter()
    lp = backward_induction_bounds(p, pay, keep_measures=False)
    t1 = time.perf_counter()
    cf = closed_form_surface(p, pay, need_lower=False)
    t2 = time.perf_counter()
    print(f"lp root [{lp.root.lower:.10f}, {lp.root.upper:.10f}] in {t1 - t0:.2f} s")
    print(f"closed-form upper {cf.root.upper:.10f} in {t2 - t1:.2f} s")


if __name__ == "__main__":
    main()
