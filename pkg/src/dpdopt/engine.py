"""Iteration kernels and trajectory simulation.

Six dynamics share one interface. States live in (n, p) matrices (or
(trials, n, p) batches; every kernel broadcasts over leading axes):

  alg1                 noisy tracking: agents share z = x + xi, keep a
                       correction state y driven by the consensus defect,
                       and step against gradients AT THE OWN NOISY STATE
  dp-dgd               noisy diffusion: x <- W z - alpha_k grad F(z)
  dgd-true-consensus   like dp-dgd but each agent mixes its own TRUE state
                       on the diagonal (only neighbors see noise)
  dgd-true-gradient    like dp-dgd but gradients at the true previous state
  gt-noiseless         classic gradient tracking, constant stepsize
  alg1-noiseless-constant   the tracking dynamics with xi = 0 and constant
                       alpha; converges exactly when alpha*beta = 1
  dgd-noiseless-constant    plain DGD with constant alpha (biased floor)

The three *-constant/noiseless tags require delta = 0 schedules and use
alpha = gamma at every iteration; the rest follow the geometric schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ScheduleError
from .objective import Problem, optimum
from .rng import substream
from .schedule import ScheduleParams, laplace_from_uniform, noise_scale, stepsize

__all__ = [
    "ALGORITHMS",
    "NetworkState",
    "Observation",
    "Trace",
    "step_alg1",
    "step_dpdgd",
    "step_dgd_true_consensus",
    "step_dgd_true_gradient",
    "step_gt",
    "run",
    "monte_carlo",
    "trial_seed",
]

ALGORITHMS = (
    "alg1",
    "dp-dgd",
    "dgd-true-consensus",
    "dgd-true-gradient",
    "gt-noiseless",
    "alg1-noiseless-constant",
    "dgd-noiseless-constant",
)

_CONSTANT_STEP = {"gt-noiseless", "alg1-noiseless-constant", "dgd-noiseless-constant"}


@dataclass
class NetworkState:
    """Agent states X and correction/tracker states Y after iteration k."""

    X: np.ndarray
    Y: np.ndarray
    k: int


@dataclass
class Observation:
    """What went over the wire during one iteration."""

    Z: np.ndarray


def _mat(W) -> np.ndarray:
    return np.asarray(getattr(W, "W", W), dtype=float)


def _obs_step(algorithm: str, X, Y, Z, W: np.ndarray, pr: Problem, a_k: float, beta: float):
    """Advance one iteration given the shared observation matrix Z.

    This is the single source of truth for the four observation-driven
    dynamics. The sensitivity audit replays a recorded Z into two coupled
    systems; routing both the simulator and the audit through this function
    makes the untouched agents bitwise identical across the pair.
    """
    if algorithm == "alg1":
        Zbar = W @ Z
        Ynew = Y + beta * (Z - Zbar)
        # 1^T y = 0 is an invariant of the exact update (columns of I - W sum
        # to zero), but the beta-scaled matmul rounding would otherwise leak
        # into the mean and compound over thousands of iterations; re-project
        # onto the invariant manifold each step.
        Ynew = Ynew - Ynew.mean(axis=-2, keepdims=True)
        return Zbar - a_k * (Ynew + pr.gradients(Z)), Ynew
    if algorithm == "dp-dgd":
        return W @ Z - a_k * pr.gradients(Z), Y
    if algorithm == "dgd-true-consensus":
        d = np.diag(W)
        if Z.ndim == 3:
            d = d[None, :, None]
        else:
            d = d[:, None]
        return d * X + (W @ Z - d * Z) - a_k * pr.gradients(Z), Y
    if algorithm == "dgd-true-gradient":
        return W @ Z - a_k * pr.gradients(X), Y
    raise ValueError(f"no observation-driven dynamic named {algorithm!r}")


def step_alg1(st: NetworkState, W, pr: Problem, alpha_k: float, beta: float, Xi):
    """One noisy tracking step; returns (new state, shared observation)."""
    Z = st.X + Xi
    X, Y = _obs_step("alg1", st.X, st.Y, Z, _mat(W), pr, alpha_k, beta)
    return NetworkState(X, Y, st.k + 1), Observation(Z)


def step_dpdgd(st: NetworkState, W, pr: Problem, alpha_k: float, Xi):
    Z = st.X + Xi
    X, Y = _obs_step("dp-dgd", st.X, st.Y, Z, _mat(W), pr, alpha_k, 0.0)
    return NetworkState(X, Y, st.k + 1), Observation(Z)


def step_dgd_true_consensus(st: NetworkState, W, pr: Problem, alpha_k: float, Xi):
    """Diffusion where the self-weight multiplies the true state: only the
    off-diagonal (neighbor) part of the average sees noise."""
    Z = st.X + Xi
    X, Y = _obs_step("dgd-true-consensus", st.X, st.Y, Z, _mat(W), pr, alpha_k, 0.0)
    return NetworkState(X, Y, st.k + 1), Observation(Z)


def step_dgd_true_gradient(st: NetworkState, W, pr: Problem, alpha_k: float, Xi):
    """Diffusion with gradients evaluated at the true previous state."""
    Z = st.X + Xi
    X, Y = _obs_step("dgd-true-gradient", st.X, st.Y, Z, _mat(W), pr, alpha_k, 0.0)
    return NetworkState(X, Y, st.k + 1), Observation(Z)


def step_gt(st: NetworkState, W, pr: Problem, alpha: float):
    """Gradient tracking: x <- Wx - alpha y, then the tracker absorbs the
    gradient increment. Requires Y(0) = grad F(X(0))."""
    W = _mat(W)
    X = W @ st.X - alpha * st.Y
    Y = W @ st.Y + pr.gradients(X) - pr.gradients(st.X)
    return NetworkState(X, Y, st.k + 1), Observation(st.X)


@dataclass
class Trace:
    """Per-iteration scalar series for one trial (index 0 is the initial
    state; step_norm[0] is defined as 0)."""

    algorithm: str
    iterations: int
    residual: np.ndarray  # ||X - 1 x*^T||_F^2
    consensus_err: np.ndarray  # ||X - 1 xbar^T||_F^2
    mean_err: np.ndarray  # ||xbar - x*||^2
    step_norm: np.ndarray  # ||X(k) - X(k-1)||_F^2
    xstar: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)  # retain=True: X, Y lists and Z list


def trial_seed(seed: int, t: int) -> int:
    """Master seed for trial t of an ensemble rooted at seed."""
    return int(substream(seed, "trial", t).integers(2**63))


def _validate(pr: Problem, W: np.ndarray, sp: ScheduleParams, algorithm: str, T: int):
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if W.shape != (pr.n, pr.n):
        raise ValueError(f"weight matrix shape {W.shape} does not match n={pr.n}")
    if T < 0:
        raise ValueError(f"iteration count must be >= 0, got {T}")
    if algorithm in _CONSTANT_STEP and sp.delta != 0.0:
        raise ScheduleError(f"{algorithm} is a noiseless dynamic; needs delta = 0")


def _batched(pr, W, sp, algorithm, T, seeds, x0, retain, xstar):
    """Simulate len(seeds) coupled-shape trials at once. Returns traces."""
    W = _mat(W)
    n, p = pr.n, pr.p
    trials = len(seeds)
    ones_mean = 1.0 / n

    if x0 is None:
        X = np.stack([substream(s, "init").standard_normal((n, p)) for s in seeds])
    else:
        X = np.broadcast_to(np.asarray(x0, dtype=float), (trials, n, p)).copy()

    noisy = algorithm not in _CONSTANT_STEP and sp.delta > 0.0
    if noisy:
        U = np.stack([substream(s, "noise").random((T, n, p)) for s in seeds])

    if algorithm == "gt-noiseless":
        Y = pr.gradients(X)
    else:
        Y = np.zeros_like(X)

    ks = np.arange(1, T + 1)
    if algorithm in _CONSTANT_STEP:
        alphas = np.full(T, sp.gamma)
        nus = np.zeros(T)
    else:
        alphas = np.atleast_1d(stepsize(sp, ks)) if T else np.zeros(0)
        nus = np.atleast_1d(noise_scale(sp, ks)) if T else np.zeros(0)

    residual = np.empty((trials, T + 1))
    consensus = np.empty((trials, T + 1))
    mean_err = np.empty((trials, T + 1))
    step_norm = np.zeros((trials, T + 1))

    def metrics(col, Xc, Xprev):
        diff = Xc - xstar
        residual[:, col] = np.sum(diff * diff, axis=(1, 2))
        xbar = Xc.mean(axis=1, keepdims=True)
        dev = Xc - xbar
        consensus[:, col] = np.sum(dev * dev, axis=(1, 2))
        mdiff = xbar[:, 0, :] - xstar
        mean_err[:, col] = np.sum(mdiff * mdiff, axis=1)
        if Xprev is not None:
            sd = Xc - Xprev
            step_norm[:, col] = np.sum(sd * sd, axis=(1, 2))

    metrics(0, X, None)

    y_mean_max = 0.0
    mean_dyn_max = 0.0
    tracking_max = 0.0
    runsum_max = 0.0
    if algorithm == "gt-noiseless":
        g0 = pr.gradients(X)
        tracking_max = float(np.max(np.abs(Y.mean(axis=1) - g0.mean(axis=1))))
    if algorithm == "alg1-noiseless-constant":
        S = np.zeros_like(X)  # running sum of (W - I) X(l), l = 0..k-1

    snaps_X, snaps_Y, snaps_Z = [], [], []
    if retain:
        snaps_X.append(X.copy())
        snaps_Y.append(Y.copy())

    for idx in range(T):
        a_k = float(alphas[idx])
        if noisy:
            # column idx of the preallocated uniform block drives this step,
            # so base/perturbed twins consume identical noise by design
            Xi = laplace_from_uniform(U[:, idx], nus[idx])
        else:
            Xi = 0.0

        Xprev = X
        if algorithm in ("alg1", "alg1-noiseless-constant"):
            Z = Xprev + Xi
            if algorithm == "alg1-noiseless-constant":
                # y(k+1) = -beta * sum_{l<=k} (W - I) x(l), so the sum must
                # include the current state before predicting x(k+1)
                S = S + (W @ X - X)
                predicted = W @ X - a_k * pr.gradients(X) + a_k * sp.beta * S
            X, Y = _obs_step("alg1", Xprev, Y, Z, W, pr, a_k, sp.beta)
            if algorithm == "alg1-noiseless-constant":
                runsum_max = max(runsum_max, float(np.max(np.abs(X - predicted))))
            y_mean_max = max(y_mean_max, float(np.max(np.abs(Y.mean(axis=1)))))
            # mean dynamics: xbar(k) = xbar(k-1) - (a_k/n) 1^T grad F(z) + mean(xi)
            xi_mean = Xi.mean(axis=1) if noisy else 0.0
            rhs = Xprev.mean(axis=1) - a_k * pr.gradients(Z).mean(axis=1) + xi_mean
            mean_dyn_max = max(mean_dyn_max, float(np.max(np.abs(X.mean(axis=1) - rhs))))
        elif algorithm in ("dp-dgd", "dgd-true-consensus", "dgd-true-gradient"):
            X, Y = _obs_step(algorithm, Xprev, Y, Xprev + Xi, W, pr, a_k, 0.0)
        elif algorithm == "dgd-noiseless-constant":
            X, Y = _obs_step("dp-dgd", Xprev, Y, Xprev, W, pr, a_k, 0.0)
        elif algorithm == "gt-noiseless":
            st, _obs = step_gt(NetworkState(X, Y, idx), W, pr, a_k)
            X, Y = st.X, st.Y
            tracking_max = max(
                tracking_max,
                float(np.max(np.abs(Y.mean(axis=1) - pr.gradients(X).mean(axis=1)))),
            )

        metrics(idx + 1, X, Xprev)
        if retain:
            snaps_X.append(X.copy())
            snaps_Y.append(Y.copy())
            snaps_Z.append((Xprev + Xi).copy() if noisy else Xprev.copy())

    diagnostics = {"y_mean_abs_max": y_mean_max}
    if algorithm in ("alg1", "alg1-noiseless-constant"):
        diagnostics["mean_dynamics_resid_max"] = mean_dyn_max
    if algorithm == "alg1-noiseless-constant":
        diagnostics["unrolled_runsum_resid_max"] = runsum_max
    if algorithm == "gt-noiseless":
        diagnostics["tracking_resid_max"] = tracking_max

    traces = []
    for t in range(trials):
        snaps = {}
        if retain:
            snaps = {
                "X": [s[t] for s in snaps_X],
                "Y": [s[t] for s in snaps_Y],
                "Z": [s[t] for s in snaps_Z],
            }
        traces.append(
            Trace(
                algorithm=algorithm,
                iterations=T,
                residual=residual[t].copy(),
                consensus_err=consensus[t].copy(),
                mean_err=mean_err[t].copy(),
                step_norm=step_norm[t].copy(),
                xstar=xstar.copy(),
                diagnostics=dict(diagnostics),
                snapshots=snaps,
            )
        )
    return traces


def _batched_job(args):
    # picklable pool entry point; resolves the module global in the worker so
    # an instrumented _batched (e.g. under test) stays in effect there too
    return _batched(*args)


def run(
    pr: Problem,
    W,
    sp: ScheduleParams,
    algorithm: str,
    T: int,
    seed: int,
    x0: np.ndarray | None = None,
    retain: bool = False,
) -> Trace:
    """Simulate one trial for T iterations and return its trace."""
    Wm = _mat(W)
    _validate(pr, Wm, sp, algorithm, T)
    xstar = optimum(pr)
    return _batched(pr, Wm, sp, algorithm, T, [seed], x0, retain, xstar)[0]


def monte_carlo(
    pr: Problem,
    W,
    sp: ScheduleParams,
    algorithm: str,
    T: int,
    trials: int,
    seed: int,
    x0: np.ndarray | None = None,
    jobs: int = 1,
    chunk: int | None = None,
) -> list[Trace]:
    """Simulate an ensemble. Trial t reproduces run(..., seed=trial_seed(seed, t))
    exactly, whatever the chunking or job count.

    jobs > 1 distributes trial chunks over processes; results are identical
    to the serial path because every trial derives its own streams.
    """
    Wm = _mat(W)
    _validate(pr, Wm, sp, algorithm, T)
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    xstar = optimum(pr)
    seeds = [trial_seed(seed, t) for t in range(trials)]

    if chunk is None:
        # keep the preallocated noise block under ~256 MB
        per_trial = max(1, T * pr.n * pr.p * 8)
        chunk = max(1, min(trials, (256 << 20) // per_trial))
    pieces = [seeds[i : i + chunk] for i in range(0, trials, chunk)]

    if jobs <= 1 or len(pieces) == 1:
        out: list[Trace] = []
        for piece in pieces:
            out.extend(_batched(pr, Wm, sp, algorithm, T, piece, x0, False, xstar))
        return out

    from concurrent.futures import ProcessPoolExecutor

    out = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(_batched_job, (pr, Wm, sp, algorithm, T, piece, x0, False, xstar))
            for piece in pieces
        ]
        for fut in futures:
            out.extend(fut.result())
    return out
