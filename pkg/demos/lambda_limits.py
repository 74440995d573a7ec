"""Follow J r^2 and the minimum of J/f as the outer branch is scaled up.

For growing lambda the glued problem is integrated from a fixed initial
value.  The value of J r^2 at the top kink should not move, the value at
the lower kink should settle, and the minimiser s_lambda of J/f below the
breakpoint should drift toward its limit.
"""

import argparse

import numpy as np

from radial_shooter import experiments as ex
from radial_shooter.nonlinearity import PowerDifference, PurePower


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha1", type=float, default=3.0, help="lower breakpoint")
    ap.add_argument("--eps", type=float, default=0.1, help="bridge width")
    ap.add_argument("--alpha-x", type=float, default=4.0, help="initial value")
    ap.add_argument("--n", type=int, default=13, help="lambda grid points over 10..1e4")
    args = ap.parse_args()

    f1, f2 = PowerDifference(3.0), PurePower(3.0)
    grid = np.logspace(1, 4, args.n)
    paso = ex.paso_e_check(f1, f2, args.alpha1, args.eps, 1.0, grid, args.alpha_x)
    sweep = ex.s_lambda_sweep(f1, f2, args.alpha1, args.eps, 1.0, args.alpha_x, grid)
    print(f"zeta = {paso['zeta']:.6f}, lower bound zeta - (N-2) eps = {paso['target']:.6f}")
    print("\n   lambda   Jr2(top)    Jr2(alpha1)   s_lambda    J/f(s_lambda)   r(s_lambda)")
    for a, b in zip(paso["rows"], sweep["rows"]):
        print(f"  {a['lambda']:8.1f}  {a['jr2_top']:.6f}   {a['jr2_alpha1']:.7f}    "
              f"{b['s']:.6f}    {b['J_over_f']:.6f}        {b['r']:.5f}")
    print(f"\nmeasured limit of Jr2(alpha1): {paso['eta_measured']:.6f}")
    print(f"s_lambda limit from it: {sweep['s_limit']:.6f}; J/f limit 1/N = {sweep['J_over_f_limit']:.6f}")
    for name, ok in {**paso["checks"], **sweep["checks"]}.items():
        print(f"  {name:<24} {'ok' if ok else 'FAILED'}")


if __name__ == "__main__":
    main()
