"""High-dimensional sparse Fourier transform by correlated random
projections, plus probability amplification by repeated runs and greedy
clustering.

The driver picks a random unit direction r and d perturbed copies
r_l = r + eps1 * b_l along an orthonormal basis. Each projected 1-D signal
x(t * r_l), t in [-T/2, T/2], goes through the 1-D transform; because the
perturbations are small the ordering of the projected means survives with
constant probability, and the means are recovered from the telescoping
differences of the sorted projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .sft1d import ScheduleError, Sft1Config, _sft1_batch
from .signal import SignalOracle, Tone

__all__ = [
    "ProjectionFrame",
    "BoostFailure",
    "make_frame",
    "sft_d",
    "solve_means_from_projections",
    "order_preservation_check",
    "match_tones",
    "boost",
    "boost_rounds",
]

DELTA0 = 1.0 / 3.0
# d-dimensional duration precondition constant in
# T >= C * d^{5/2} * log(2 + k/theta) / gamma; implies the 1-D precondition
# for the projected separation gamma_1 = delta0 * gamma / (4 d^{5/2}), and
# calibrated so that unluckily small projected gaps (which scale like
# gamma/sqrt(d) for typical directions) stay resolvable in most rounds.
DURATION_CONST_D = 3.0


class BoostFailure(RuntimeError):
    """Fewer than k dense clusters survived boosting; statistically
    improbable under the per-round success contract, so surfaced."""


@dataclass(frozen=True)
class ProjectionFrame:
    """Random direction r plus d perturbed copies r + eps1 * b_l."""

    r: np.ndarray
    basis: np.ndarray  # rows b_1..b_d, orthonormal
    eps1: float

    def __post_init__(self):
        d = self.r.shape[0]
        if self.basis.shape != (d, d):
            raise ValueError("basis must be d x d")
        if not np.allclose(self.basis @ self.basis.T, np.eye(d), atol=1e-12):
            raise ValueError("basis rows must be orthonormal")
        if not (0 < self.eps1 <= 1.0):
            raise ValueError("eps1 must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return self.r.shape[0]

    @property
    def directions(self) -> np.ndarray:
        """(d+1, d) array: row 0 is r itself (b_0 = 0), rows 1..d perturbed."""
        return np.vstack([self.r, self.r + self.eps1 * self.basis])


def make_frame(
    d: int,
    gamma: float,
    B: float,
    rng: np.random.Generator,
    delta0: float = DELTA0,
    basis: np.ndarray | None = None,
    eps1: float | None = None,
) -> ProjectionFrame:
    """Draw the random direction and build the perturbed frame with
    eps1 = delta0 * gamma / (8 B d^{5/2}), capped at 1."""
    r = rng.standard_normal(d)
    r /= np.linalg.norm(r)
    if basis is None:
        basis = np.eye(d)
    if eps1 is None:
        eps1 = delta0 * gamma / (8.0 * B * d**2.5)
    return ProjectionFrame(r=r, basis=basis, eps1=min(float(eps1), 1.0))


def solve_means_from_projections(proj: np.ndarray, frame: ProjectionFrame) -> np.ndarray:
    """Means from sorted projection estimates: row 0 is the base direction,
    rows 1..d the perturbed ones; mu_j = sum_l b_l (proj[l,j] - proj[0,j]) / eps1."""
    proj = np.asarray(proj, dtype=float)
    d = frame.dim
    if proj.shape[0] != d + 1:
        raise ValueError(f"expected {d + 1} projection rows, got {proj.shape[0]}")
    coef = (proj[1:] - proj[0]) / frame.eps1  # (d, k)
    return coef.T @ frame.basis  # (k, d)


def order_preservation_check(frame: ProjectionFrame, means) -> bool:
    """True iff sorting by <mu_j, r_l> gives the same permutation for every
    direction of the frame (test-only diagnostic; needs the true means)."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    projections = frame.directions @ means.T  # (d+1, k)
    orders = np.argsort(-projections, axis=1, kind="stable")
    return bool(np.all(orders == orders[0]))


def _sftd_rounds(
    oracle: SignalOracle,
    k: int,
    T: float,
    B: float,
    gamma: float,
    theta: float,
    seed: int,
    n_rounds: int,
    delta0: float = DELTA0,
    basis: np.ndarray | None = None,
    eps1: float | None = None,
    sft1_options: dict | None = None,
    duration_const: float = DURATION_CONST_D,
):
    """Run ``n_rounds`` independent copies of the projection transform in one
    batched pass (rounds x (d+1) parallel 1-D instances). Each round draws
    its own frame; results are identical in distribution to looping sft_d
    with independent seeds. Returns a list of length-k tone lists."""
    d = oracle.dim
    bound = duration_const * d**2.5 * math.log(2 + max(k, 1) / theta) / gamma
    if k > 1 and T < bound:
        raise ScheduleError(
            f"T={T} below the d-dimensional duration precondition {bound:.4g} "
            f"(d={d}, k={k}, theta={theta}, gamma={gamma})"
        )
    rng = np.random.default_rng(seed)
    frames = [
        make_frame(d, gamma, B, rng, delta0=delta0, basis=basis, eps1=eps1)
        for _ in range(n_rounds)
    ]
    dirs = np.concatenate([fr.directions for fr in frames], axis=0)  # (R*(d+1), d)
    gamma1 = delta0 * gamma / (4.0 * d**2.5)
    options = dict(sft1_options or {})
    options.setdefault("duration_const", 0.999 * duration_const * delta0 / 4.0)
    options.setdefault("share_group", d + 1)
    cfg = Sft1Config(
        k=k,
        T=T,
        B=2.0 * B + 3.0 * gamma1,
        gamma=gamma1,
        theta=theta,
        delta=delta0 / (2.0 * (d + 1)),
        seed=seed,
        **options,
    )

    half = T / 2.0

    def eval_batch(times, rows=None):
        sel = np.arange(times.shape[0]) if rows is None else np.asarray(rows)
        taus = times - half  # remap [0, T] -> [-T/2, T/2]
        pts = taus[:, :, None] * dirs[sel][:, None, :]
        flat = oracle.query(pts.reshape(-1, d))
        return flat.reshape(times.shape)

    freqs, weights, _ = _sft1_batch(eval_batch, n_rounds * (d + 1), cfg, rng)
    # Undo the interval remap's per-tone phase, then sort each projection's
    # tones by frequency in decreasing order.
    weights = weights * np.exp(1j * freqs * half)
    order = np.argsort(-freqs, axis=1, kind="stable")
    freqs = np.take_along_axis(freqs, order, axis=1)
    weights = np.take_along_axis(weights, order, axis=1)

    out = []
    for i, frame in enumerate(frames):
        rows = slice(i * (d + 1), (i + 1) * (d + 1))
        means = solve_means_from_projections(freqs[rows], frame)
        out.append(
            [Tone(weight=complex(w), freq=mu) for w, mu in zip(weights[rows][0], means)]
        )
    return out


def sft_d(
    oracle: SignalOracle,
    k: int,
    T: float,
    B: float,
    gamma: float,
    theta: float,
    seed: int,
    delta0: float = DELTA0,
    basis: np.ndarray | None = None,
    eps1: float | None = None,
    sft1_options: dict | None = None,
    duration_const: float = DURATION_CONST_D,
):
    """Recover k (weight, mean) tones of a d-dimensional signal with success
    probability >= 2/3; boost() amplifies. Returns exactly k tones."""
    return _sftd_rounds(
        oracle, k, T, B, gamma, theta, seed, 1,
        delta0=delta0, basis=basis, eps1=eps1, sft1_options=sft1_options,
        duration_const=duration_const,
    )[0]


def sft_d_runner(
    oracle: SignalOracle,
    k: int,
    T: float,
    B: float,
    gamma: float,
    theta: float,
    seed: int,
    chunk: int = 24,
    **kwargs,
):
    """Seeded round supplier for boost(): equivalent to calling sft_d with a
    fresh seed per round, but rounds are precomputed in batched chunks so
    repeated boosting stays affordable."""
    state = {"buf": [], "next_seed": seed}

    def runner(_sub_seed: int):
        if not state["buf"]:
            state["buf"] = _sftd_rounds(
                oracle, k, T, B, gamma, theta, state["next_seed"], chunk, **kwargs
            )
            state["next_seed"] += 1
        return state["buf"].pop(0)

    return runner


def match_tones(estimates, truth):
    """Minimum-cost bipartite matching of two equal-size tone lists under
    Euclidean mean distance; returns (permutation, max mean error,
    max weight error)."""
    if len(estimates) != len(truth):
        raise ValueError("tone lists must have equal cardinality")
    est_mu = np.array([np.atleast_1d(t.freq) for t in estimates], dtype=float)
    tru_mu = np.array([np.atleast_1d(t.freq) for t in truth], dtype=float)
    cost = np.linalg.norm(tru_mu[:, None, :] - est_mu[None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty_like(cols)
    perm[rows] = cols
    max_mu = float(cost[rows, cols].max())
    w_est = np.array([estimates[c].weight for c in cols])
    w_tru = np.array([truth[r].weight for r in rows])
    max_w = float(np.abs(w_est - w_tru).max())
    return perm, max_mu, max_w


def boost_rounds(delta: float) -> int:
    """Round count (225/2) ln(1/delta) from the Hoeffding gap between the
    2/3 per-round success rate and the 3/5 cluster-density threshold."""
    return math.ceil(112.5 * math.log(1.0 / delta))


def boost(
    runner,
    k: int,
    gamma: float,
    eps: float,
    eps_w: float,
    delta: float,
    seed: int,
    rounds: int | None = None,
):
    """Amplify a 2/3-success tone estimator to confidence 1 - delta.

    Runs R independent copies of ``runner`` (called with a sub-seed; must
    return a length-k list of tones with real weights), keeps the rounds
    whose means are pairwise > gamma/2 apart, then repeatedly picks a pooled
    mean whose 2 eps'-ball holds at least (3/5)R pooled points, takes the
    median weight among pooled tones within 4 eps', and removes everything
    within 6 eps'. ``rounds`` overrides the default (225/2) ln(1/delta)
    schedule for callers whose per-round success is far above 2/3.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    R = boost_rounds(delta) if rounds is None else int(rounds)
    eps_p = min(eps / 3.0, gamma / 16.0)
    rng = np.random.default_rng(seed)

    pooled_mu = []
    pooled_w = []
    for _ in range(R):
        sub_seed = int(rng.integers(0, 2**63 - 1))
        tones = runner(sub_seed)
        mus = np.array([np.atleast_1d(t.freq) for t in tones], dtype=float)
        ws = np.array([float(np.real(t.weight)) for t in tones])
        if len(tones) != k or not np.all(np.isfinite(mus)):
            continue
        if k > 1:
            dist = np.linalg.norm(mus[:, None, :] - mus[None, :, :], axis=-1)
            if dist[np.triu_indices(k, 1)].min() <= gamma / 2.0:
                continue
        pooled_mu.append(mus)
        pooled_w.append(ws)

    if not pooled_mu:
        raise BoostFailure("no boosting round passed the separation gate")
    M = np.concatenate(pooled_mu, axis=0)
    W = np.concatenate(pooled_w, axis=0)
    need = 0.6 * R

    dist = np.linalg.norm(M[:, None, :] - M[None, :, :], axis=-1)
    alive = np.ones(M.shape[0], dtype=bool)
    out = []
    for _ in range(k):
        counts = (dist[:, alive] <= 2 * eps_p).sum(axis=1)
        counts[~alive] = -1
        pick = int(np.argmax(counts))
        if counts[pick] < need:
            raise BoostFailure(
                f"only {len(out)} of {k} clusters reached the 3/5 density "
                f"threshold (best count {counts[pick]}, needed {need:.0f})"
            )
        sel_w = W[alive & (dist[pick] <= 4 * eps_p)]
        out.append(Tone(weight=float(np.median(sel_w)), freq=M[pick].copy()))
        alive &= dist[pick] > 6 * eps_p
    return out
