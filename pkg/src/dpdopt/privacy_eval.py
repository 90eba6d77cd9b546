"""Empirical privacy leakage for the noisy tracking dynamic.

Three agents on a triangle solve a scalar problem; agent 0 is the target,
the other two collude. Across every trial they record the target's private
gradient V(k) = grad f_0(z_0(k)) and what the pair can compute from public
information: the received z_0(k), the replayed correction state y_0(k), and
a gradient estimate backed out of the update rule. The leakage score is the
worst iteration's normalized mutual information between V(k) and the
estimate, with the same kNN estimator in the numerator and denominator.

Two gradient estimates are carried side by side: `verbatim` divides the
consensus defect at k by alpha_k, and `reconstruction` uses the next
received message z_0(k+1) in place of z_0(k), which recovers V(k) exactly
when no noise is injected. The reconstruction is the default leakage input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .engine import _mat, _obs_step, trial_seed
from .objective import Problem
from .rng import substream
from .schedule import ScheduleParams, laplace_from_uniform, noise_scale, stepsize

__all__ = [
    "AttackerDataset",
    "collect_attacker_view",
    "knn_mutual_information",
    "MnmiReport",
    "mnmi_report",
    "mnmi",
]

_JITTER = 1e-10


@dataclass(frozen=True)
class AttackerDataset:
    """Aligned (trial, k) samples for k = 1..K of the target's private
    gradient and everything the colluding pair can reconstruct."""

    V: np.ndarray  # private gradient grad f_0(z_0(k))
    z0: np.ndarray  # message received from the target
    y0: np.ndarray  # correction state, replayed from public updates
    estimate_verbatim: np.ndarray  # (zbar_0(k) - z_0(k))/alpha_k - y_0(k)
    estimate_reconstruction: np.ndarray  # (zbar_0(k) - z_0(k+1))/alpha_k - y_0(k)
    trials: int
    K: int

    def __post_init__(self):
        shape = (self.trials, self.K)
        for name in ("V", "z0", "y0", "estimate_verbatim", "estimate_reconstruction"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite samples")

    def estimate(self, variant: str = "reconstruction") -> np.ndarray:
        if variant == "reconstruction":
            return self.estimate_reconstruction
        if variant == "verbatim":
            return self.estimate_verbatim
        raise ValueError(f"unknown estimate variant {variant!r}")

    def triple(self, variant: str = "reconstruction") -> np.ndarray:
        """The full observable triple, stacked as (trials, K, 3)."""
        return np.stack([self.z0, self.y0, self.estimate(variant)], axis=-1)


def collect_attacker_view(
    pr: Problem, W, sp: ScheduleParams, T: int, trials: int, seed: int
) -> AttackerDataset:
    """Simulate the three-agent scenario and collect per-iteration samples.

    Runs the noisy tracking dynamic for T+1 iterations per trial (the
    reconstruction estimate at k needs the message sent at k+1) and returns
    samples for k = 1..T. Deterministic given the seed; trials share the
    substream layout of the simulator.
    """
    if pr.n != 3 or pr.p != 1:
        raise ValueError(
            f"attacker scenario needs 3 agents with scalar states, got n={pr.n}, p={pr.p}"
        )
    if T < 1:
        raise ValueError(f"need at least one iteration, got {T}")
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    Wm = _mat(W)
    if Wm.shape != (3, 3):
        raise ValueError(f"weight matrix shape {Wm.shape}, expected (3, 3)")

    ks = np.arange(1, T + 2)
    alphas = stepsize(sp, ks)
    nus = noise_scale(sp, ks)

    out = {
        name: np.empty((trials, T))
        for name in ("V", "z0", "y0", "estimate_verbatim", "estimate_reconstruction")
    }

    # chunk trials so the preallocated uniform block stays modest
    per_trial = (T + 1) * 3 * 8
    chunk = max(1, min(trials, (256 << 20) // per_trial))
    for start in range(0, trials, chunk):
        seeds = [trial_seed(seed, t) for t in range(start, min(start + chunk, trials))]
        X = np.stack([substream(s, "init").standard_normal((3, 1)) for s in seeds])
        U = np.stack([substream(s, "noise").random((T + 1, 3, 1)) for s in seeds])
        Y = np.zeros_like(X)
        sl = slice(start, start + len(seeds))

        zbar_prev = None
        for idx in range(T + 1):
            Z = X + laplace_from_uniform(U[:, idx], nus[idx])
            # same update the simulator runs; Zbar and the gradients are
            # recomputed here only because the step keeps them internal
            Zbar = Wm @ Z
            grads = pr.gradients(Z)
            X, Y = _obs_step("alg1", X, Y, Z, Wm, pr, alphas[idx], sp.beta)
            z0 = Z[:, 0, 0]
            if idx < T:
                out["V"][sl, idx] = grads[:, 0, 0]
                out["z0"][sl, idx] = z0
                out["y0"][sl, idx] = Y[:, 0, 0]
                out["estimate_verbatim"][sl, idx] = (
                    (Zbar[:, 0, 0] - z0) / alphas[idx] - Y[:, 0, 0]
                )
            if idx >= 1:
                out["estimate_reconstruction"][sl, idx - 1] = (
                    (zbar_prev - z0) / alphas[idx - 1] - out["y0"][sl, idx - 1]
                )
            zbar_prev = Zbar[:, 0, 0]

    return AttackerDataset(trials=trials, K=T, **out)


def _as_samples(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"samples must be 1-D or 2-D, got shape {a.shape}")
    return a


def knn_mutual_information(xs, ys, k_neighbors: int = 3) -> float:
    """kNN mutual information in nats (Kraskov et al. variant 1, max-norm).

    I = psi(k) + psi(N) - <psi(n_x + 1) + psi(n_y + 1)>, where n_x and n_y
    count marginal neighbors strictly inside the joint kth-neighbor radius.
    Slightly negative outputs are possible; callers clamp where needed.
    A deterministic jitter of amplitude 1e-10 breaks distance ties.
    """
    xs = _as_samples(xs)
    ys = _as_samples(ys)
    n = len(xs)
    if len(ys) != n:
        raise ValueError(f"sample counts differ: {n} vs {len(ys)}")
    if n < 50:
        raise ValueError(f"need at least 50 samples, got {n}")
    if not 1 <= k_neighbors <= n - 1:
        raise ValueError(f"k_neighbors must be in [1, {n - 1}], got {k_neighbors}")

    rng = substream(0, "mi-jitter")
    xs = xs + rng.uniform(-_JITTER, _JITTER, xs.shape)
    ys = ys + rng.uniform(-_JITTER, _JITTER, ys.shape)

    joint = np.hstack([xs, ys])
    radius, _ = cKDTree(joint).query(joint, k=k_neighbors + 1, p=np.inf)
    radius = np.maximum(radius[:, k_neighbors] - 1e-15, 0.0)

    # counts include the point itself, supplying KSG's n+1 directly
    nx = cKDTree(xs).query_ball_point(xs, radius, p=np.inf, return_length=True)
    ny = cKDTree(ys).query_ball_point(ys, radius, p=np.inf, return_length=True)
    return float(
        digamma(k_neighbors) + digamma(n) - np.mean(digamma(nx) + digamma(ny))
    )


@dataclass(frozen=True)
class MnmiReport:
    """Per-iteration leakage ratios and their maximum."""

    ratios: np.ndarray  # (K,), clamped to [0, 1]; NaN where k was skipped
    raw_ratios: np.ndarray  # pre-clamp values
    argmax_k: int  # 1-based iteration attaining the max
    value: float
    skipped: tuple  # 1-based iterations skipped as degenerate


def mnmi_report(
    ds: AttackerDataset,
    k_neighbors: int = 3,
    variant: str = "reconstruction",
    joint: bool = False,
) -> MnmiReport:
    """Normalized leakage per iteration: I(V(k), estimate(k)) over
    I(V(k), V(k)), both from the same estimator.

    joint=True scores the full observable triple instead of the gradient
    estimate alone. Iterations whose private samples are degenerate (zero
    spread) or whose self-information is nonpositive are skipped with a
    warning; if every iteration is skipped the dataset is unusable.
    """
    est = ds.triple(variant) if joint else ds.estimate(variant)
    ratios = np.full(ds.K, np.nan)
    raw = np.full(ds.K, np.nan)
    skipped = []
    for idx in range(ds.K):
        v = ds.V[:, idx]
        if np.ptp(v) == 0.0:
            skipped.append(idx + 1)
            continue
        denom = knn_mutual_information(v, v, k_neighbors)
        if denom <= 0.0:
            skipped.append(idx + 1)
            continue
        num = knn_mutual_information(v, est[:, idx], k_neighbors)
        raw[idx] = num / denom
        ratios[idx] = min(max(raw[idx], 0.0), 1.0)
    if skipped:
        warnings.warn(
            f"skipped {len(skipped)} degenerate iteration(s): {skipped[:5]}...",
            stacklevel=2,
        )
    if len(skipped) == ds.K:
        raise ValueError("every iteration degenerate; nothing to score")
    best = int(np.nanargmax(ratios))
    return MnmiReport(
        ratios=ratios,
        raw_ratios=raw,
        argmax_k=best + 1,
        value=float(ratios[best]),
        skipped=tuple(skipped),
    )


def mnmi(
    ds: AttackerDataset,
    k_neighbors: int = 3,
    variant: str = "reconstruction",
    joint: bool = False,
) -> float:
    """Max over iterations of the normalized leakage ratio, in [0, 1]."""
    return mnmi_report(ds, k_neighbors, variant, joint).value
