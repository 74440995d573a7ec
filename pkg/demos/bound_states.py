"""Locate the first bound states of u'' + (N-1)u'/r + u^3 - u = 0.

The initial value alpha is scanned, every change of the nodal verdict is
bracketed, and each bracket is bisected down to a numerical double zero.
Run ``python demos/bound_states.py --help`` for options.
"""

import argparse

from radial_shooter import classify as cl
from radial_shooter.nonlinearity import PowerDifference, make_nonlinearity


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=3.0, help="exponent of s^p - s")
    ap.add_argument("--k-max", type=int, default=3, help="highest bound state to locate")
    ap.add_argument("--hi", type=float, default=40.0, help="upper end of the alpha scan")
    ap.add_argument("--n", type=int, default=400, help="scan points")
    args = ap.parse_args()

    nl = make_nonlinearity(PowerDifference(args.p))
    params = cl.classification_params()
    print(f"b = {nl.b:.6f}, beta = {nl.beta:.6f}")

    rows = cl.scan_range(nl, params, 1.05 * nl.beta, args.hi, args.n)
    labels = {}
    for row in rows:
        labels.setdefault(row.label, []).append(row.alpha)
    print("\nverdicts on the scan (first and last alpha of each label):")
    for label, alphas in labels.items():
        print(f"  {label:>12}: {alphas[0]:9.4f} .. {alphas[-1]:9.4f}  ({len(alphas)} points)")

    print("\n k   alpha_*^k              bracket width   |u|, |u'| at closest approach")
    for k in range(1, args.k_max + 1):
        brackets = cl.brackets_for(rows, k)
        if not brackets:
            print(f" {k}   no flip of N_{k} below alpha = {args.hi}")
            continue
        a_in, a_out = min(brackets, key=min)
        rec = cl.find_boundary(nl, params, a_in, a_out, k)
        width = rec.bracket[1] - rec.bracket[0]
        print(f" {k}   {rec.alpha_star:.15f}   {width:.1e}        "
              f"{abs(rec.final_u):.1e}, {abs(rec.final_du):.1e}")


if __name__ == "__main__":
    main()
