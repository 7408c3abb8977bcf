"""Newton projection histories and measured orders for several perturbation sizes.

Compares the differenced (current) Jacobian with the frozen base-point operator.
"""

import argparse

import numpy as np

from affleg.errors import ConvergenceError
from affleg.immersion import great_circle
from affleg.moduli import ModuliOperators, newton_project


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--N", type=int, default=64)
    parser.add_argument("--sizes", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    args = parser.parse_args()

    base = great_circle(args.N)
    ops = ModuliOperators(base)
    u = base.grid.axis_nodes
    g, a = ops.kernel_direction((np.cos(u) + 0.5 * np.sin(2 * u) + 0.3 * np.cos(3 * u) + 1.0)[:, None])
    for jac in ("current", "frozen"):
        for t in args.sizes:
            try:
                st = newton_project(base, t * g, t * a, jacobian=jac, ops=ops)
                hist = " ".join(f"{r:.1e}" for r in st.history)
                orders = " ".join(f"{o:.2f}" for o in st.orders)
                print(f"{jac:8s} t={t:<5g} history [{hist}] orders [{orders}]")
            except ConvergenceError as exc:
                print(f"{jac:8s} t={t:<5g} {exc}")


if __name__ == "__main__":
    main()
