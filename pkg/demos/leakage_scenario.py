"""Colluding-neighbor leakage measured as max normalized mutual information.

Three agents on a line: agents 1 and 2 collude against agent 0, replay the
public update rule on the messages they receive, and form a per-iteration
estimate of the target's private gradient. The script scores the attack with
the max over iterations of I(private gradient, estimate) normalized by the
self-information of the private gradient, estimated with a kNN estimator.

Two anchor rows calibrate the scale: with the noise switched off the
reconstruction is exact and the score sits at 1, and replacing the estimate
with an independent Laplace stream drives it to the estimator's noise floor
near 0. Between those anchors the score should fall as the privacy budget
tightens. Default sizes keep the run under a minute; --full raises the trial
count and horizon for smoother estimates.
"""

import argparse
import dataclasses

import numpy as np

from dpdopt.objective import random_problem
from dpdopt.privacy_eval import collect_attacker_view, mnmi_report
from dpdopt.schedule import ScheduleParams
from dpdopt.topology import metropolis_weights, ring


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true",
                        help="5000 trials over 300 iterations (slow)")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--seed", type=int, default=9)
    args = parser.parse_args()

    trials = args.trials or (5000 if args.full else 500)
    T = args.iterations or (300 if args.full else 150)

    wm = metropolis_weights(ring(3))
    pr = random_problem(3, 2, 1, (0.5, 1.5), 2)

    def schedule(eps: float, noisy: bool = True) -> ScheduleParams:
        return ScheduleParams(0.01, 100.0, 0.5, 0.99, eps, 1.0 if noisy else 0.0)

    print(f"{trials} trials, {T} iterations scored per budget")
    print()
    print(f"{'scenario':>24} {'M-NMI':>8} {'argmax k':>9} {'skipped':>8}")

    datasets = {}
    for eps in (10.0, 1.0, 0.1):
        ds = collect_attacker_view(pr, wm, schedule(eps), T, trials, args.seed)
        datasets[eps] = ds
        rep = mnmi_report(ds)
        print(f"{'epsilon = %g' % eps:>24} {rep.value:>8.4f} "
              f"{rep.argmax_k:>9} {len(rep.skipped):>8}")

    noiseless = collect_attacker_view(pr, wm, schedule(1.0, noisy=False),
                                      T, trials, args.seed)
    rep = mnmi_report(noiseless)
    print(f"{'noiseless (anchor ~1)':>24} {rep.value:>8.4f} "
          f"{rep.argmax_k:>9} {len(rep.skipped):>8}")

    base = datasets[10.0]
    fake = np.random.default_rng(4242).laplace(0.0, 1.0, base.V.shape)
    independent = dataclasses.replace(base, estimate_reconstruction=fake)
    rep = mnmi_report(independent)
    print(f"{'independent (anchor ~0)':>24} {rep.value:>8.4f} "
          f"{rep.argmax_k:>9} {len(rep.skipped):>8}")

    print()
    vals = [mnmi_report(datasets[eps]).value for eps in (10.0, 1.0, 0.1)]
    ordered = all(a > b for a, b in zip(vals, vals[1:]))
    print(f"leakage falls as the budget tightens (10 > 1 > 0.1): {ordered}")
    print("the verbatim estimate ignores the k+1 message and scores lower:")
    for eps in (10.0, 1.0, 0.1):
        rep = mnmi_report(datasets[eps], variant="verbatim")
        print(f"  epsilon = {eps:g}: verbatim M-NMI = {rep.value:.4f}")


if __name__ == "__main__":
    main()
