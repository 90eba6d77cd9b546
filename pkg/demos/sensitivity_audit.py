"""Empirical per-iteration sensitivity audit on one adjacent problem pair.

Runs the coupled-transcript replay for all four audited dynamics on a shared
noise stream, prints the worst observed state gap per iteration next to the
flat envelope delta * alpha_k, and then the pairwise ordering and recursion
checks. Two of the comparison dynamics behave differently from the flat
envelope by construction: the true-consensus variant retains a W_ii fraction
of the previous gap on top of each fresh injection (so it overshoots the flat
line but satisfies its recursion), and the true-gradient variant contracts
below the flat line from the second iteration on, which breaks the orderings
that would place it above the noisy dynamics. The printout shows both rather
than hiding them.
"""

import argparse

import numpy as np

from dpdopt.analysis import AUDIT_ALGORITHMS, compare_sensitivities
from dpdopt.objective import make_adjacent, random_problem
from dpdopt.schedule import ScheduleParams, stepsize
from dpdopt.topology import connected_erdos_renyi, metropolis_weights


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--iterations", type=int, default=30)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    wm = metropolis_weights(connected_erdos_renyi(10, 0.35, args.seed))
    pr = random_problem(10, 3, 2, (0.5, 1.5), args.seed)
    pair = make_adjacent(pr, args.seed % 10, 1.0, args.seed)
    sp = ScheduleParams(0.01, 1.0, 0.97, 0.99, 10.0, 1.0)

    report = compare_sensitivities(pair, wm, sp, args.iterations, args.trials, args.seed)
    alphas = np.asarray(stepsize(sp, np.arange(1, args.iterations + 1)))

    print(f"adjacent pair: agent {args.seed % 10}, gradient gap delta = {pair.delta:g}")
    print(f"{args.trials} trials, {args.iterations} iterations, shared noise streams")
    print()
    header = f"{'k':>4} {'bound':>12} " + " ".join(f"{alg:>20}" for alg in AUDIT_ALGORITHMS)
    print(header)
    for idx in range(args.iterations):
        row = " ".join(
            f"{report.envelopes[alg].delta_hat[idx]:>20.6e}" for alg in AUDIT_ALGORITHMS
        )
        print(f"{idx + 1:>4} {pair.delta * alphas[idx]:>12.6e} {row}")

    print()
    print("per-dynamic envelope check (max over k of delta_hat - delta*alpha_k):")
    for alg in AUDIT_ALGORITHMS:
        env = report.envelopes[alg]
        overshoot = float(np.max(env.delta_hat - env.bound))
        tag = "holds" if overshoot <= 1e-12 else "VIOLATED"
        print(f"  {alg:>20}: {overshoot:+.3e}  {tag}")
        if env.off_target_max != 0.0:
            print(f"  {alg:>20}: off-target rows moved by {env.off_target_max:.3e}")

    print()
    print("pairwise ordering (max over k of lhs - rhs, holds when <= 1e-12):")
    for key, gap in report.ordering_gap.items():
        tag = "holds" if gap <= 1e-12 else "VIOLATED"
        print(f"  {key:>40}: {gap:+.3e}  {tag}")

    print()
    print("recursive envelopes (worst violation, holds when <= 1e-12):")
    for key, gap in report.recursion_gap.items():
        tag = "holds" if gap <= 1e-12 else "VIOLATED"
        print(f"  {key:>20}: {gap:+.3e}  {tag}")

    print()
    print("note: the true-consensus overshoot and the broken true-gradient")
    print("orderings are properties of those comparison dynamics, not bugs in")
    print("the replay; both recursion lines above are the bounds they do satisfy,")
    print("and the two noisy dynamics sit exactly on the flat envelope.")


if __name__ == "__main__":
    main()
