"""Statistical estimators on top of the sparse transforms: separation-free
parameter learning for slow-Fourier-decay mixtures, and consistent mean
estimation under noise-oblivious contamination.

Both reduce to tone recovery on an empirical-characteristic-function ratio
signal. The mixture learner queries a ball shifted by ||v|| = 2T so the
division floor is controlled at radius 3T and any fast-decay component
washes out; the contamination estimators query the unshifted ball (the
adversarial term is bounded by alpha pointwise).

The theory-facing duration/sample formulas keep their structural shape with
sweepable leading constants; the defaults target desk-scale experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec, Kind, sfd_floor
from .signal import SignalOracle, Tone, empirical_cf_signal
from .sft1d import ScheduleError, Sft1Config, _sft1_batch
from .sftd import boost, sft_d_runner

__all__ = [
    "SfdLearnConfig",
    "learn_sfd_mixture",
    "robust_mean_noise_oblivious",
    "robust_mean_per_coordinate",
    "rough_center",
    "coordinate_schedule_eps",
]

ALPHA0_DEFAULT = 0.05


@dataclass(frozen=True)
class SfdLearnConfig:
    """Parameter schedule for SFD mixture learning.

    theta = eps^2 / 100 (weight energy bounded above by 1), the duration is
    C_T * max{FFD-vanishing term, d^3 B / (gamma w_min),
    d^{5/2} log(k/theta) / gamma}, and the sample budget is
    C_n * d^{2 c1} T^{2 c2} (log(k/delta) + loglog(.)) / eps^2.
    """

    k: int
    dim: int
    gamma: float
    w_min: float
    B: float
    eps: float
    delta: float
    c1: float = 0.0
    c2: float = 2.0
    c1p: float = 0.0
    c2p: float = math.inf
    C_T: float = 4.0
    C_n: float = 8.0
    boost_rounds: int | None = None
    sft1_options: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.eps < 1) or not (0 < self.delta < 1):
            raise ValueError("eps and delta must lie in (0, 1)")
        if self.eps > self.w_min:
            raise ScheduleError(
                f"eps={self.eps} must be <= w_min={self.w_min} "
                "(weights below the noise admissibility threshold cannot be "
                "distinguished from zero)"
            )
        if self.k < 1 or self.dim < 1:
            raise ValueError("k and dim must be >= 1")
        if math.isfinite(self.c2p) and self.c2p <= self.c2:
            raise ValueError("mixed SFD/FFD learning needs c2p > c2")

    @property
    def theta(self) -> float:
        return self.eps**2 / 100.0

    @property
    def T(self) -> float:
        d = self.dim
        terms = [
            d**3 * self.B / (self.gamma * self.w_min),
            d**2.5 * math.log(2 + self.k / self.theta) / self.gamma,
        ]
        if math.isfinite(self.c2p):
            terms.append(
                (d ** (self.c1 - self.c1p) / self.eps) ** (1.0 / (self.c2p - self.c2))
            )
        return self.C_T * max(terms)

    @property
    def n(self) -> int:
        d = self.dim
        loglog = math.log(
            1 + math.log(1 + self.B / (self.gamma * self.w_min * self.eps))
        )
        tail = math.log(max(self.k / self.delta, 2.0)) + loglog
        return math.ceil(
            self.C_n * d ** (2 * self.c1) * self.T ** (2 * self.c2) * tail / self.eps**2
        )

    def shift_vector(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed ^ 0x5EED)
        v = rng.standard_normal(self.dim)
        return 2.0 * self.T * v / np.linalg.norm(v)


def learn_sfd_mixture(samples: np.ndarray, base: DistributionSpec, cfg: SfdLearnConfig):
    """Means and weights of a k-component translated-SFD mixture.

    Builds the shifted-ball empirical CF ratio signal, runs the
    high-dimensional transform, amplifies with boosting, and reports
    modulus weights (the shift phase exp(i <v, mu_j>) carries no
    information about w_j).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != cfg.dim:
        raise ValueError(f"samples have dim {samples.shape[1]}, cfg.dim={cfg.dim}")
    if samples.shape[0] < cfg.n:
        raise ScheduleError(
            f"sample budget violation: n={samples.shape[0]} below the "
            f"schedule's {cfg.n} (T={cfg.T:.4g}, eps={cfg.eps})"
        )
    T = cfg.T
    v = cfg.shift_vector()
    floor = 0.9 * sfd_floor(base, 3.0 * T * 1.0001)
    oracle = empirical_cf_signal(samples, base, v, floor, T)

    raw_runner = sft_d_runner(
        oracle,
        cfg.k,
        T,
        cfg.B,
        cfg.gamma,
        cfg.theta,
        seed=cfg.seed,
        sft1_options=cfg.sft1_options,
        duration_const=0.999 * cfg.C_T,
    )

    def runner(sub_seed):
        tones = raw_runner(sub_seed)
        return [Tone(weight=abs(t.weight), freq=t.freq) for t in tones]

    return boost(
        runner,
        cfg.k,
        cfg.gamma,
        cfg.eps,
        cfg.eps,
        cfg.delta,
        seed=cfg.seed + 1,
        rounds=cfg.boost_rounds,
    )


def rough_center(samples: np.ndarray) -> np.ndarray:
    """Coordinate-wise median: a coarse location estimate whose breakdown
    point 1/2 dominates any contamination rate alpha <= 1/4, letting the
    main estimator run with its mean bound reduced to O(1)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    return np.median(samples, axis=0)


def robust_mean_noise_oblivious(
    samples,
    base: DistributionSpec,
    B: float,
    eps: float,
    delta: float,
    seed: int = 0,
    C_T: float = 0.05,
    C_n: float = 10.0,
    boost_rounds: int | None = None,
    recenter: bool = True,
    sft1_options: dict | None = None,
) -> np.ndarray:
    """Mean estimation under noise-oblivious contamination, d-dimensional
    route: a 1-sparse signal x*(t) = (1-alpha) exp(i <t, mu>) recovered from
    the unshifted empirical CF ratio, amplified by boosting.

    Contamination above the working threshold alpha_0 (~0.05) is
    undetectable by construction and remains the caller's responsibility.
    ``B`` bounds ||mu||; with ``recenter`` the coordinate-wise median is
    subtracted first so the effective bound is O(1) regardless of B.
    """
    pts = samples.points if hasattr(samples, "points") else samples
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, d = pts.shape
    if recenter:
        center = rough_center(pts)
        B_eff = 3.0
    else:
        center = np.zeros(d)
        B_eff = float(B)
    shifted = pts - center

    T = max(C_T * d**3 * B_eff / eps, 1.0)
    floor = 0.9 * sfd_floor(base, T * 1.0001)
    n_req = math.ceil(C_n * math.log(40.0 / delta) / floor**2)
    if n < n_req:
        raise ScheduleError(
            f"sample budget violation: n={n} below the R(T)^2 schedule "
            f"{n_req} at T={T:.4g}"
        )
    oracle = empirical_cf_signal(shifted, base, np.zeros(d), floor, T)

    options = dict(stages=2, votes=1, bins=8, window_terms=32, probe_points=8,
                   ladder_probes=6, final_probes=8, refine_rounds=1,
                   refine_votes=3, gn_iters=3, max_attempts=1, split_rescue=False)
    options.update(sft1_options or {})
    theta = min(0.05, eps**2 / 4 + 1e-4)
    runner = sft_d_runner(
        oracle, 1, T, B_eff, 1.0, theta, seed=seed, eps1=0.5,
        sft1_options=options,
    )

    def real_runner(sub_seed):
        tones = runner(sub_seed)
        return [Tone(weight=abs(t.weight), freq=t.freq) for t in tones]

    rounds = boost_rounds if boost_rounds is not None else 9
    est = boost(real_runner, 1, 1.0, eps, eps, delta, seed=seed + 1, rounds=rounds)
    return est[0].freq + center


def coordinate_schedule_eps(
    n: int, d: int, kind: Kind, delta: float, C_T1: float = 0.6, C_n1: float = 11.0
) -> float:
    """Invert the per-coordinate sample schedule: the accuracy eps at which
    n samples satisfy n ~ C_n1 * R(T)^2 log(1/delta) with T = C_T1 sqrt(d)/eps
    per coordinate (accuracy eps/sqrt(d) each)."""
    tail = math.log(max(40.0 / delta, 2.0))
    r_max = math.sqrt(max(n / (C_n1 * tail), 1.26))
    if kind is Kind.LAPLACE:
        T = math.sqrt(max(2.0 * r_max - 2.0, 1e-4))
    elif kind is Kind.GAUSSIAN:
        T = math.sqrt(max(2.0 * math.log(r_max), 1e-4))
    else:
        raise NotImplementedError(kind)
    return C_T1 * d / T  # eps = sqrt(d) * (C_T1 sqrt(d) / T)


def _estimate_mean_1d(
    values: np.ndarray,
    kind: Kind,
    eps1d: float,
    seed: int,
    C_T1: float = 0.6,
    sft1_options: dict | None = None,
) -> float:
    """One-coordinate mean estimate through the 1-sparse CF ratio signal."""
    base = DistributionSpec(kind, 1, np.zeros(1))
    center = float(np.median(values))
    vals = (values - center)[:, None]
    B1 = 3.0
    T = max(C_T1 / eps1d, 0.75)
    floor = 0.5 * sfd_floor(base, T * 1.0001)
    oracle = empirical_cf_signal(vals, base, np.zeros(1), floor, T)
    options = dict(stages=2, votes=1, bins=8, window_terms=24, probe_points=8,
                   ladder_probes=8, final_probes=8, refine_rounds=1,
                   refine_votes=3, gn_iters=2, max_attempts=1, split_rescue=False)
    options.update(sft1_options or {})
    cfg = Sft1Config(k=1, T=T, B=B1, gamma=1.0, theta=0.05, delta=0.2,
                     seed=seed, **options)
    rng = np.random.default_rng(seed)
    freqs, weights, _ = _sft1_batch(_wrap_single(oracle), 1, cfg, rng)
    return center + float(freqs[0][0])


def _wrap_single(oracle: SignalOracle):
    def eval_batch(times, rows=None):
        out = np.empty(times.shape, dtype=complex)
        for i in range(times.shape[0]):
            out[i] = oracle.query(times[i])
        return out

    return eval_batch


def robust_mean_per_coordinate(
    samples,
    base1d: Kind,
    eps: float,
    delta: float,
    seed: int = 0,
    reps: int = 5,
    C_T1: float = 0.6,
    sft1_options: dict | None = None,
) -> np.ndarray:
    """Per-coordinate reduction: estimate each coordinate to eps/sqrt(d) at
    confidence delta/d and take the median over repetitions (the d = 1
    boosting step); a union bound gives ||mu_hat - mu|| <= eps."""
    pts = samples.points if hasattr(samples, "points") else samples
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, d = pts.shape
    eps1d = eps / math.sqrt(d)
    rng = np.random.default_rng(seed)
    out = np.empty(d)
    for j in range(d):
        ests = [
            _estimate_mean_1d(
                pts[:, j], base1d, eps1d,
                seed=int(rng.integers(0, 2**63 - 1)),
                C_T1=C_T1, sft1_options=sft1_options,
            )
            for _ in range(max(1, reps))
        ]
        out[j] = float(np.median(ests))
    return out
