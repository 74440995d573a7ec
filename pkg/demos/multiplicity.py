"""Count ground states of a glued nonlinearity over a (mu, lambda) grid.

The shipped experiment configuration glues s^3 - s below a breakpoint to a
rescaled pure power above it.  For each grid cell every converged bound
state is listed; cells with two or more ground states are marked.
"""

import argparse

from radial_shooter import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for the scans")
    args = ap.parse_args()

    config, expected = ex.split_experiment_file(ex.load_golden("golden_a.json"))
    report = ex.run_theorem_a(config, jobs=args.jobs)
    print(f"alpha_1 = {report.info['alpha1']:.6f}, d = {report.info['d']:.4f}")
    print("\n   mu   lambda   ground states")
    for cell in report.cells:
        alphas = [rec["alpha_star"] for rec in cell["inventory"][1]]
        mark = "  <- several" if len(alphas) >= 2 else ""
        listed = ", ".join(f"{a:.6f}" for a in alphas)
        print(f"  {cell['mu']:4g}  {cell['lambda']:6g}   {listed}{mark}")
    print("\nchecks:")
    for name, ok in report.checks.items():
        print(f"  {name:<14} {'ok' if ok else 'FAILED'}")
    cmp = ex.compare_to_golden(report, expected)
    print(f"\nshipped golden reproduced: {cmp['match']} (max deviation {cmp['max_dev']:.1e})")
    print(f"wall clock {report.timing['wall_clock_s']:.1f} s")


if __name__ == "__main__":
    main()
