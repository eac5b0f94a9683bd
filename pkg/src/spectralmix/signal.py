"""Query oracles x(t) = x*(t) + g(t): exact tone sums, empirical-CF ratio
signals (with the shifted-ball option), and bounded noise injection.

Oracles are deterministic closures over immutable data; all randomness lives
in where the transform chooses to query. 1-D oracles are defined on the
interval [0, T]; d-dimensional oracles on the closed ball of radius T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DistributionSpec, cf_eval

__all__ = [
    "Tone",
    "SignalOracle",
    "NoiseBudget",
    "FloorViolation",
    "NoiseContractViolation",
    "exact_signal",
    "empirical_cf_signal",
    "inject_noise",
    "centered_interval_oracle",
    "project_oracle",
]

_DOMAIN_SLACK = 1 + 1e-9


class FloorViolation(RuntimeError):
    """|phi_D(t+v)| fell below the supplied division floor at a queried t.

    Signals a parameter-schedule bug; the oracle never divides silently.
    """


class NoiseContractViolation(RuntimeError):
    """Observed |noise(t)| exceeded the caller-asserted bound."""


@dataclass(frozen=True)
class Tone:
    """One complex weight and one real frequency vector (scalar when d=1)."""

    weight: complex
    freq: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.freq, dtype=float))
        if not np.all(np.isfinite(f)):
            raise ValueError("tone frequency must be finite")
        object.__setattr__(self, "freq", f)

    @property
    def dim(self) -> int:
        return self.freq.shape[0]


def _check_tone_set(tones):
    if not tones:
        raise ValueError("tone set must be nonempty")
    dims = {t.dim for t in tones}
    if len(dims) != 1:
        raise ValueError("tones have inconsistent dimensions")
    freqs = np.array([t.freq for t in tones])
    if len(tones) > 1:
        dist = np.linalg.norm(freqs[:, None, :] - freqs[None, :, :], axis=-1)
        if dist[np.triu_indices(len(tones), k=1)].min() <= 0:
            raise ValueError("tone frequencies must be pairwise distinct")
    return freqs


class SignalOracle:
    """Opaque evaluator t -> complex with query accounting.

    ``domain`` is "interval" ([0, T], 1-D core convention) or "ball"
    (Euclidean ball of radius T). ``query_count`` increments by exactly one
    per evaluated point; batch queries add their length.
    """

    def __init__(self, fn, T: float, dim: int, domain: str = "ball"):
        if not T > 0:
            raise ValueError("duration T must be positive")
        if domain not in ("ball", "interval"):
            raise ValueError(f"unknown domain {domain!r}")
        if domain == "interval" and dim != 1:
            raise ValueError("interval domain is for 1-D oracles")
        self._fn = fn
        self.T = float(T)
        self.dim = int(dim)
        self.domain = domain
        self.query_count = 0

    def _validate(self, pts: np.ndarray):
        if self.domain == "interval":
            lo, hi = pts.min(initial=0.0), pts.max(initial=0.0)
            if lo < -self.T * 1e-9 or hi > self.T * _DOMAIN_SLACK:
                raise ValueError(
                    f"query time outside [0, T={self.T}]: range [{lo}, {hi}]"
                )
        else:
            r = np.linalg.norm(pts, axis=-1)
            rmax = float(r.max(initial=0.0))
            if rmax > self.T * _DOMAIN_SLACK:
                raise ValueError(f"query point norm {rmax} exceeds T={self.T}")

    def query(self, t):
        """Evaluate at one point or a batch of points."""
        if self.dim == 1:
            t = np.asarray(t, dtype=float)
            single = t.ndim == 0
            pts = np.atleast_1d(t)
        else:
            t = np.asarray(t, dtype=float)
            single = t.ndim == 1
            pts = np.atleast_2d(t)
            if pts.shape[-1] != self.dim:
                raise ValueError(f"query dim {pts.shape[-1]} != oracle dim {self.dim}")
        self._validate(pts)
        self.query_count += pts.shape[0]
        vals = np.asarray(self._fn(pts), dtype=complex)
        return complex(vals[0]) if single else vals


@dataclass(frozen=True)
class NoiseBudget:
    """Noise level N with N^2 = g_max^2 + theta * sum |w_l|^2."""

    g_max: float
    theta: float
    weight_energy: float

    @property
    def level(self) -> float:
        return math.sqrt(self.g_max**2 + self.theta * self.weight_energy)


def exact_signal(tones, T: float) -> SignalOracle:
    """Noiseless oracle for x*(t) = sum_j w_j exp(i <mu_j, t>); g == 0."""
    freqs = _check_tone_set(tones)
    weights = np.array([t.weight for t in tones], dtype=complex)
    dim = tones[0].dim

    if dim == 1:
        f = freqs[:, 0]

        def fn(pts):
            return np.exp(1j * np.outer(pts, f)) @ weights

        return SignalOracle(fn, T, 1, domain="interval")

    def fn(pts):
        return np.exp(1j * pts @ freqs.T) @ weights

    return SignalOracle(fn, T, dim, domain="ball")


def empirical_cf_signal(
    samples: np.ndarray,
    base: DistributionSpec,
    v: np.ndarray,
    floor: float,
    T: float,
    chunk: int = 1 << 22,
) -> SignalOracle:
    """Oracle x(t) = phi_D(t+v)^{-1} * (1/n) sum_l exp(i <t+v, Y_l>).

    ``v`` implements the shifted-ball trick (||v|| = 2T) for SFD mixtures;
    v = 0 is the noise-oblivious mode. ``floor`` must lower-bound
    |phi_D(t+v)| over the query region; a violation raises FloorViolation
    rather than dividing.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = samples.shape
    if d != base.dim:
        raise ValueError(f"samples dim {d} != base dim {base.dim}")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (d,):
        raise ValueError("shift vector has wrong dimension")
    if not floor > 0:
        raise ValueError("floor must be positive")

    def fn(pts):
        pts = np.atleast_2d(pts) if d > 1 else np.asarray(pts)[:, None]
        u = pts + v
        phi = np.asarray(cf_eval(base, u))
        bad = np.abs(phi) < floor
        if np.any(bad):
            i = int(np.argmax(bad))
            raise FloorViolation(
                f"|phi_D(t+v)|={abs(phi[i]):.3e} < floor={floor:.3e} at ||t+v||="
                f"{np.linalg.norm(u[i]):.4g}; schedule supplied an invalid floor"
            )
        out = np.empty(u.shape[0], dtype=complex)
        rows_per_chunk = max(1, chunk // max(n, 1))
        for s in range(0, u.shape[0], rows_per_chunk):
            block = u[s : s + rows_per_chunk]
            out[s : s + rows_per_chunk] = np.exp(1j * block @ samples.T).mean(axis=1)
        return out / phi

    if d == 1:
        def fn1(pts):
            return fn(np.asarray(pts, dtype=float))
        return SignalOracle(fn1, T, 1, domain="interval")
    return SignalOracle(fn, T, d, domain="ball")


class _NoiseInjected(SignalOracle):
    def __init__(self, oracle: SignalOracle, noise, bound: float):
        self._base = oracle
        self._noise = noise
        self.bound = float(bound)
        self.g_max_seen = 0.0
        super().__init__(None, oracle.T, oracle.dim, oracle.domain)

    def query(self, t):
        base_vals = self._base.query(t)
        pts = np.atleast_1d(np.asarray(t, dtype=float)) if self.dim == 1 else np.atleast_2d(t)
        g = np.asarray(self._noise(pts), dtype=complex)
        gmax = float(np.abs(g).max(initial=0.0))
        if gmax > self.bound * (1 + 1e-9):
            raise NoiseContractViolation(
                f"|noise|={gmax:.6g} exceeds declared bound {self.bound:.6g}"
            )
        self.g_max_seen = max(self.g_max_seen, gmax)
        self.query_count += pts.shape[0]
        return base_vals + (g if np.ndim(base_vals) else complex(g[0]))


def inject_noise(oracle: SignalOracle, noise, bound: float) -> SignalOracle:
    """New oracle returning oracle(t) + noise(t); records max |noise| seen
    at queried points and enforces the declared bound."""
    return _NoiseInjected(oracle, noise, bound)


def centered_interval_oracle(fn, T: float) -> SignalOracle:
    """1-D oracle over [0, T] from an evaluator on [-T/2, T/2].

    The affine remap t -> t - T/2 multiplies each tone's weight by
    exp(-i f T/2), which callers undo after estimating frequencies.
    """
    half = T / 2.0

    def remapped(pts):
        return fn(pts - half)

    return SignalOracle(remapped, T, 1, domain="interval")


def project_oracle(oracle: SignalOracle, direction: np.ndarray, T1d: float) -> SignalOracle:
    """1-D view x^r(t) = x(t * r) for t in [-T1d/2, T1d/2], remapped to
    [0, T1d]. Queries pass through to (and are counted by) the base oracle."""
    r = np.asarray(direction, dtype=float)

    def fn(taus):
        return oracle.query(np.outer(taus, r))

    return centered_interval_oracle(fn, T1d)
