"""Dense symmetric tensor toolkit: symmetrization, Frobenius identities,
closed-form Laplace moment tensors, Monte-Carlo moment oracles, and a
moment-closeness search over random mixture pairs.

Dense storage is deliberate: at order <= 6 and dim <= 6 a tensor holds at
most 6^6 entries, and correctness (oracle role) beats compression here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "SymTensor",
    "FeasibilityError",
    "sym",
    "kron_identity_norm_check",
    "laplace_moment_tensor",
    "mixture_moment_tensor",
    "empirical_moment_tensor",
    "moment_distance",
    "parameter_distance",
]

MAX_ORDER = 6
MAX_DIM = 6


class FeasibilityError(ValueError):
    """Requested tensor exceeds the dense-feasibility envelope."""


def _check_feasible(order: int, dim: int):
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > MAX_ORDER or dim > MAX_DIM:
        raise FeasibilityError(
            f"dense tensors limited to order <= {MAX_ORDER}, dim <= {MAX_DIM}; "
            f"got order={order}, dim={dim}"
        )


@dataclass(frozen=True)
class SymTensor:
    """Dense order-r tensor over R^d. Entries of a symmetrized tensor are
    invariant under every index permutation; order 0 is a scalar."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        dims = set(arr.shape)
        if len(dims) > 1:
            raise ValueError(f"entries must be hypercubic, got shape {arr.shape}")
        _check_feasible(arr.ndim, arr.shape[0] if arr.ndim else 1)
        object.__setattr__(self, "entries", arr)

    @property
    def order(self) -> int:
        return self.entries.ndim

    @property
    def dim(self) -> int:
        return self.entries.shape[0] if self.order else 1

    def frobenius(self) -> float:
        return float(np.sqrt((self.entries**2).sum()))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        arr = self.entries
        for perm in itertools.permutations(range(self.order)):
            if np.abs(arr - arr.transpose(perm)).max() > tol:
                return False
        return True


def _as_array(t) -> np.ndarray:
    return t.entries if isinstance(t, SymTensor) else np.asarray(t, dtype=float)


def sym(t) -> SymTensor:
    """Symmetrize: average of all r! axis permutations. Idempotent."""
    arr = _as_array(t)
    _check_feasible(arr.ndim, arr.shape[0] if arr.ndim else 1)
    if arr.ndim <= 1:
        return SymTensor(arr)
    acc = np.zeros_like(arr)
    count = 0
    for perm in itertools.permutations(range(arr.ndim)):
        acc += arr.transpose(perm)
        count += 1
    return SymTensor(acc / count)


def _identity_tensor(dim: int, pairs: int) -> np.ndarray:
    """I_d^{tensor pairs}: product of Kronecker deltas on consecutive pairs."""
    if pairs == 0:
        return np.array(1.0)
    eye = np.eye(dim)
    out = eye
    for _ in range(pairs - 1):
        out = np.multiply.outer(out, eye)
    return out


def _tensor_power(v: np.ndarray, r: int) -> np.ndarray:
    if r == 0:
        return np.array(1.0)
    out = v
    for _ in range(r - 1):
        out = np.multiply.outer(out, v)
    return out


def kron_identity_norm_check(t, ell: int):
    """Return (lhs, rhs) for ||T (x) I_d^{(x)ell}||_F = d^{ell/2} ||T||_F."""
    arr = _as_array(t)
    dim = arr.shape[0] if arr.ndim else 1
    _check_feasible(arr.ndim + 2 * ell, max(dim, 1))
    big = np.multiply.outer(arr, _identity_tensor(dim, ell)) if ell else arr
    lhs = float(np.sqrt((big**2).sum()))
    rhs = dim ** (ell / 2.0) * float(np.sqrt((arr**2).sum()))
    return lhs, rhs


def laplace_moment_tensor(mu, r: int) -> SymTensor:
    """Closed-form E[X^{(x)r}] for X ~ Lap(mu, I_d):
    sum over even s of r!/(r-s)! (1/sqrt(2))^s Sym(mu^{(x)(r-s)} (x) I^{(x)s/2}).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    d = mu.shape[0]
    _check_feasible(r, d)
    if r == 0:
        return SymTensor(np.array(1.0))
    acc = np.zeros((d,) * r)
    for s in range(0, r + 1, 2):
        coef = math.factorial(r) / math.factorial(r - s) * (0.5 ** (s / 2))
        block = _tensor_power(mu, r - s)
        if s:
            block = np.multiply.outer(block, _identity_tensor(d, s // 2))
        if block.ndim == 0:
            block = block * np.ones((d,) * r) if r == 0 else block
        acc += coef * sym(block).entries
    return SymTensor(acc)


def mixture_moment_tensor(means, weights, r: int) -> SymTensor:
    """sum_j w_j E[Lap(mu_j, I)^{(x)r}] for a Laplace mixture."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {weights.sum()}, expected 1")
    acc = None
    for w, mu in zip(weights, means):
        t = laplace_moment_tensor(mu, r).entries
        acc = w * t if acc is None else acc + w * t
    return SymTensor(acc)


def empirical_moment_tensor(samples: np.ndarray, r: int, chunk: int = 200_000) -> SymTensor:
    """(1/n) sum_i x_i^{(x)r}, accumulated in chunks; symmetric by construction."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = samples.shape
    _check_feasible(r, d)
    if r == 0:
        return SymTensor(np.array(1.0))
    letters = "abcdef"[:r]
    spec = ",".join(f"z{c}" for c in letters) + "->z" + letters
    acc = np.zeros((d,) * r)
    for s in range(0, n, chunk):
        block = samples[s : s + chunk]
        acc += np.einsum(spec, *([block] * r)).sum(axis=0)
    return SymTensor(acc / n)


def parameter_distance(meansA, meansB) -> float:
    """min over matchings of sum_j ||mu_j - mu'_{pi(j)}||_2 (exact assignment)."""
    a = np.atleast_2d(np.asarray(meansA, dtype=float))
    b = np.atleast_2d(np.asarray(meansB, dtype=float))
    if a.shape != b.shape:
        raise ValueError("mean lists must have equal shape")
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def moment_distance(meansA, meansB, weightsA, weightsB, R: int):
    """Frobenius distances ||E Y^{(x)r} - E Y'^{(x)r}||_F for r = 1..R plus
    the parameter distance between the two mean sets."""
    dists = np.empty(R)
    for r in range(1, R + 1):
        ta = mixture_moment_tensor(meansA, weightsA, r).entries
        tb = mixture_moment_tensor(meansB, weightsB, r).entries
        dists[r - 1] = np.sqrt(((ta - tb) ** 2).sum())
    return dists, parameter_distance(meansA, meansB)
