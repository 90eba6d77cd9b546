"""Schedule design from the mixing spectrum of a small ring.

Walks through the design chain on a 4-agent ring with Metropolis weights:
measure the consensus contraction factor sigma and ||W - I||, certify the
largest stepsize decay rate q1 the limiting 2x2 gain block tolerates, sweep
rho(A~) over q1 to show where contraction is lost, cross-check the
determinant test against an eigensolve on the sweep, and finally tune
(gamma, q1, q2) for a sample budget and evaluate the resulting accuracy
bound.
"""

import argparse

import numpy as np

from dpdopt.analysis import accuracy_bound, atilde, q1_bound, rho_less_than, tune
from dpdopt.topology import metropolis_weights, ring, spectral_constants


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--theta", type=float, default=2.0)
    parser.add_argument("--epsilon", type=float, default=1.0)
    parser.add_argument("--delta", type=float, default=0.1)
    args = parser.parse_args()

    wm = metropolis_weights(ring(4))
    sigma, w_minus_i = spectral_constants(wm)
    print(f"ring(4) with Metropolis weights: sigma = {sigma:.12g}, "
          f"||W - I|| = {w_minus_i:.12g}")

    print()
    print(f"certified q1 ceiling over theta (safety margin on the mean-error row):")
    for theta in (1.5, 2.0, 4.0, 8.0):
        print(f"  theta = {theta:>4g}: q1 <= {q1_bound(sigma, theta, w_minus_i):.8g}")

    qcert = q1_bound(sigma, args.theta, w_minus_i)
    print()
    print(f"rho(A~) over q1 (certified ceiling at theta={args.theta:g} "
          f"is {qcert:.6g}):")
    print(f"{'q1':>10} {'rho(A~)':>12} {'det test':>9} {'eigensolve':>11}")
    agree = True
    for q1 in (0.25 * qcert, 0.5 * qcert, 0.999 * qcert, 2 * qcert,
               8 * qcert, 0.2, 0.5):
        block = atilde(sigma, q1, w_minus_i)
        rho = float(np.max(np.abs(np.linalg.eigvals(block))))
        det_ok = rho_less_than(block, 1.0)
        eig_ok = rho < 1.0
        agree = agree and (det_ok == eig_ok)
        print(f"{q1:>10.6f} {rho:>12.6f} {str(det_ok):>9} {str(eig_ok):>11}")
    print(f"determinant test matches the eigensolve on every row: {agree}")

    print()
    mu, L, n, p, c1, c2 = 1.0, 2.0, 4, 2, 10.0, 1.0
    gamma, q1, q2, bound = tune(args.epsilon, args.delta, mu, L, n, p, c1, c2)
    print(f"tuned schedule for epsilon = {args.epsilon:g}, "
          f"delta = {args.delta:g} (mu={mu:g}, L={L:g}, n={n}, p={p}, "
          f"c1={c1:g}, c2={c2:g}):")
    print(f"  gamma = {gamma:.6g} (cap 2/(mu+L) = {2.0 / (mu + L):.6g}), "
          f"q1 = {q1:.6g}, q2 = {q2:.6g}")
    print(f"  accuracy bound = {bound:.6g}")
    recomputed = accuracy_bound(gamma, q1, q2, args.epsilon, args.delta,
                                mu, L, n, p, c1, c2)
    print(f"  bound recomputed at the tuned point = {recomputed:.6g}")
    for scale in (0.5, 0.9):
        nudged = accuracy_bound(gamma * scale, q1, q2, args.epsilon,
                                args.delta, mu, L, n, p, c1, c2)
        print(f"  scaling gamma by {scale:g} moves the bound to {nudged:.6g}")


if __name__ == "__main__":
    main()
