"""Base distributions, characteristic functions, mixtures, and contamination.

Conventions: every distribution has identity-scaled covariance (scale 1
unless stated) and is identified by its characteristic function (CF).
The multivariate Laplace is the Gaussian scale mixture X = mu + sqrt(W) * G
with W ~ Exp(1), whose centered CF is exactly 2 / (2 + ||t||^2) in every
dimension.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Kind",
    "DistributionSpec",
    "MixtureModel",
    "SfdFfdParams",
    "ContaminatedSample",
    "cf_eval",
    "sfd_floor",
    "sample_mixture",
    "sample_noise_oblivious",
]


class Kind(enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"
    POINT_MASS = "point_mass"


@dataclass(frozen=True)
class DistributionSpec:
    """A translated base distribution with a closed-form CF and a sampler."""

    kind: Kind
    dim: int
    mean: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.shape != (self.dim,):
            raise ValueError(f"mean has shape {mean.shape}, expected ({self.dim},)")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")
        object.__setattr__(self, "mean", mean)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n i.i.d. rows. The Laplace sampler uses the exponential
        scale-mixture representation so its CF matches the closed form."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        d = self.dim
        if self.kind is Kind.POINT_MASS:
            return np.tile(self.mean, (n, 1))
        g = rng.standard_normal((n, d)) * self.scale
        if self.kind is Kind.GAUSSIAN:
            return self.mean + g
        if self.kind is Kind.LAPLACE:
            w = rng.exponential(scale=1.0, size=(n, 1))
            return self.mean + np.sqrt(w) * g
        raise NotImplementedError(self.kind)


def centered_cf_modulus(kind: Kind, r, scale: float = 1.0):
    """|phi_0| at radius r for the centered distribution; radially monotone
    non-increasing for every supported kind."""
    r = np.asarray(r, dtype=float)
    s2 = scale * scale
    if kind is Kind.LAPLACE:
        return 2.0 / (2.0 + s2 * r * r)
    if kind is Kind.GAUSSIAN:
        return np.exp(-0.5 * s2 * r * r)
    if kind is Kind.POINT_MASS:
        return np.ones_like(r)
    raise NotImplementedError(kind)


def cf_eval(spec: DistributionSpec, t) -> complex | np.ndarray:
    """Characteristic function E[exp(i <t, X>)] at t (single vector or rows).

    Returns exp(i <t, mean>) * phi_0(||t||); |result| <= 1 always.
    """
    t = np.asarray(t, dtype=float)
    single = t.ndim == 1
    pts = np.atleast_2d(t)
    if pts.shape[-1] != spec.dim:
        raise ValueError(f"t has dimension {pts.shape[-1]}, spec.dim={spec.dim}")
    r = np.linalg.norm(pts, axis=-1)
    vals = np.exp(1j * pts @ spec.mean) * centered_cf_modulus(spec.kind, r, spec.scale)
    return complex(vals[0]) if single else vals


def sfd_floor(spec: DistributionSpec, T: float, params: "SfdFfdParams | None" = None) -> float:
    """inf over the ball of radius T of |phi_D|.

    By radial monotonicity the infimum is attained at ||t|| = T for every
    supported kind, so this is a closed form. ``params`` is accepted so
    callers can keep the declared SFD/FFD exponents alongside the floor; the
    value itself never depends on them.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if spec.kind not in (Kind.LAPLACE, Kind.GAUSSIAN, Kind.POINT_MASS):
        raise NotImplementedError(f"no closed-form CF floor for {spec.kind}")
    return float(centered_cf_modulus(spec.kind, T, spec.scale))


@dataclass(frozen=True)
class SfdFfdParams:
    """Declared Fourier-decay exponents: slow decay (c1, c2) means
    inf_{||t||<=T} |phi| >~ d^-c1 T^-c2; fast decay (c1p, c2p) bounds the
    sup outside radius T from above. c2p = inf means 'decays faster than
    any polynomial' (e.g. Gaussian)."""

    c1: float = 0.0
    c2: float = 0.0
    c1p: float = 0.0
    c2p: float = math.inf

    def __post_init__(self):
        for name in ("c1", "c2", "c1p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.c2p < 0:
            raise ValueError("c2p must be >= 0")

    @property
    def has_ffd_part(self) -> bool:
        return math.isfinite(self.c2p)


LAPLACE_SFD = SfdFfdParams(c1=0.0, c2=2.0)


@dataclass(frozen=True)
class MixtureModel:
    """Weighted translations of one base kind; weights sum to 1."""

    base: Kind
    components: tuple  # of (weight, mean vector)
    dim: int
    scale: float = 1.0

    def __post_init__(self):
        comps = []
        total = 0.0
        for w, mu in self.components:
            mu = np.atleast_1d(np.asarray(mu, dtype=float))
            if mu.shape != (self.dim,):
                raise ValueError(f"component mean shape {mu.shape} != ({self.dim},)")
            if not (0.0 < w <= 1.0):
                raise ValueError(f"component weight {w} outside (0, 1]")
            comps.append((float(w), mu))
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, expected 1")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([mu for _, mu in self.components])

    def separation(self) -> float:
        """Minimum pairwise mean distance (computed, not assumed)."""
        mus = self.means
        if len(mus) < 2:
            return math.inf
        d = np.linalg.norm(mus[:, None, :] - mus[None, :, :], axis=-1)
        return float(d[np.triu_indices(len(mus), k=1)].min())

    def max_mean_norm(self) -> float:
        return float(np.linalg.norm(self.means, axis=1).max())


def sample_mixture(model: MixtureModel, n: int, seed: int):
    """n i.i.d. rows from the mixture plus the generating component labels.

    Deterministic given the seed (bit-identical across calls).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(model.k, size=n, p=model.weights)
    out = np.empty((n, model.dim))
    for j, (_, mu) in enumerate(model.components):
        idx = np.flatnonzero(labels == j)
        if idx.size:
            spec = DistributionSpec(model.base, model.dim, mu, model.scale)
            out[idx] = spec.sample(idx.size, rng)
    return out, labels


@dataclass
class ContaminatedSample:
    """Sample under noise-oblivious contamination. ``inlier_mask`` exists for
    test harnesses only; estimators must never read it."""

    points: np.ndarray
    inlier_mask: np.ndarray
    alpha: float

    @property
    def n(self) -> int:
        return self.points.shape[0]


def sample_noise_oblivious(
    spec: DistributionSpec,
    mu: np.ndarray,
    adversary_means: list,
    alpha: float,
    n: int,
    seed: int,
) -> ContaminatedSample:
    """ceil(alpha*n) rows drawn from D(z) with z cycled through
    adversary_means, the rest from D(mu); corrupted positions shuffled."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must be in [0, 1)")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (spec.dim,):
        raise ValueError("mu has wrong dimension")
    n_bad = math.ceil(alpha * n)
    if n_bad > 0 and len(adversary_means) == 0:
        raise ValueError("alpha > 0 requires at least one adversary mean")
    rng = np.random.default_rng(seed)
    clean_spec = DistributionSpec(spec.kind, spec.dim, mu, spec.scale)
    points = clean_spec.sample(n, rng)
    mask = np.ones(n, dtype=bool)
    if n_bad:
        pos = rng.permutation(n)[:n_bad]
        mask[pos] = False
        for i, p in enumerate(pos):
            z = np.atleast_1d(np.asarray(adversary_means[i % len(adversary_means)], dtype=float))
            if z.shape != (spec.dim,):
                raise ValueError("adversary mean has wrong dimension")
            bad_spec = DistributionSpec(spec.kind, spec.dim, z, spec.scale)
            points[p] = bad_spec.sample(1, rng)[0]
    return ContaminatedSample(points=points, inlier_mask=mask, alpha=alpha)
