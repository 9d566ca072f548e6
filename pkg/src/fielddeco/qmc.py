"""Generalized Faure sequences and a deterministic quasi-Monte Carlo integrator.

Coordinate ``j`` of point ``n`` is the base-``b`` radical inverse of
``A_j P^j a(n) + e_j (mod b)``. Here ``a(n)`` is the digit vector of ``n + skip``,
``P`` is the Pascal matrix, ``A_j`` is a seeded nonsingular lower-triangular
scrambling matrix and ``e_j`` is a digital shift. Seed 0 gives the classical
Faure sequence: ``A_j = I`` and no shift.

Integration splits the index range into fixed blocks. Each block sum is
computed independently, and the sums are combined in block order, so the
result does not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .specfun import inv_norm_cdf

__all__ = [
    "FaureConfig",
    "QmcEstimate",
    "IntegrandError",
    "smallest_prime_at_least",
    "faure_point",
    "faure_points",
    "map_to_gaussian",
    "to_complex_modes",
    "integrate",
    "integrate_vector",
]

DEFAULT_BLOCK = 4096
# the index range is cut into this many consecutive groups for the error estimate
N_GROUPS = 4
_MAX_DIGITS = 32


class IntegrandError(ArithmeticError):
    """The integrand produced a non-finite value."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


def smallest_prime_at_least(n: int) -> int:
    n = max(2, int(n))
    while not _is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class FaureConfig:
    dimension: int
    base: int | None = None
    scramble_seed: int = 0
    skip: int | None = None

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        base = smallest_prime_at_least(self.dimension) if self.base is None else int(self.base)
        if not _is_prime(base):
            raise ValueError(f"base must be prime, got {base}")
        if base < self.dimension:
            raise ValueError(f"base {base} is smaller than dimension {self.dimension}")
        object.__setattr__(self, "base", base)
        seed = int(self.scramble_seed)
        if not 0 <= seed < 2**64:
            raise ValueError("scramble_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "scramble_seed", seed)
        skip = base**4 if self.skip is None else int(self.skip)
        if skip < 0:
            raise ValueError("skip must be non-negative")
        object.__setattr__(self, "skip", skip)

    @property
    def output_digits(self) -> int:
        """Digits kept in each coordinate: the largest w with base**w <= 2**53."""
        return max(1, int(53 * math.log(2) / math.log(self.base) + 1e-12))

    @property
    def max_digits(self) -> int:
        """Index digit capacity, limited by int64 arithmetic."""
        return min(_MAX_DIGITS, int(63 * math.log(2) / math.log(self.base) - 1e-12))

    @property
    def capacity(self) -> int:
        return self.base**self.max_digits

    @cached_property
    def _generators(self) -> tuple[np.ndarray, np.ndarray]:
        """Generator matrices (dimension, w, m_max) and shifts (dimension, w)."""
        b, w, m = self.base, self.output_digits, self.max_digits
        binom = np.zeros((w, m), dtype=np.int64)
        for r in range(w):
            for s in range(r, m):
                binom[r, s] = math.comb(s, r) % b
        gens = np.zeros((self.dimension, w, m), dtype=np.int64)
        shifts = np.zeros((self.dimension, w), dtype=np.int64)
        if self.scramble_seed:
            rng = np.random.Generator(np.random.Philox(key=self.scramble_seed))
        for j in range(self.dimension):
            pascal = np.zeros((w, m), dtype=np.int64)
            for r in range(w):
                for s in range(r, m):
                    pascal[r, s] = binom[r, s] * pow(j, s - r, b) % b
            if self.scramble_seed:
                scramble = np.tril(rng.integers(0, b, size=(w, w)), -1)
                scramble[np.diag_indices(w)] = rng.integers(1, b, size=w)
                pascal = (scramble @ pascal) % b
                shifts[j] = rng.integers(0, b, size=w)
            gens[j] = pascal
        gens.setflags(write=False)
        shifts.setflags(write=False)
        return gens, shifts


def _digits(indices: np.ndarray, base: int, n_digits: int) -> np.ndarray:
    out = np.empty((len(indices), n_digits), dtype=np.int64)
    rem = indices.copy()
    for d in range(n_digits):
        out[:, d] = rem % base
        rem //= base
    return out


def faure_points(cfg: FaureConfig, start: int, count: int) -> np.ndarray:
    """Points ``start .. start+count-1`` of the sequence, shape (count, dimension)."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    last = cfg.skip + start + count - 1
    if count and last >= cfg.capacity:
        raise OverflowError(
            f"index {last} exceeds digit capacity {cfg.base}**{cfg.max_digits}"
        )
    b, w = cfg.base, cfg.output_digits
    n_digits = 1
    while b**n_digits <= last:
        n_digits += 1
    idx = np.arange(cfg.skip + start, cfg.skip + start + count, dtype=np.int64)
    digits = _digits(idx, b, n_digits)
    gens, shifts = cfg._generators
    place = np.array([b ** (w - 1 - r) for r in range(w)], dtype=np.int64)
    scale = float(b**w)
    out = np.empty((count, cfg.dimension))
    for j in range(cfg.dimension):
        y = (digits @ gens[j, :, :n_digits].T + shifts[j]) % b
        out[:, j] = (y @ place) / scale
    out[out == 0.0] = 0.5 / scale
    return out


def faure_point(cfg: FaureConfig, index: int) -> np.ndarray:
    return faure_points(cfg, index, 1)[0]


def map_to_gaussian(u: np.ndarray) -> np.ndarray:
    """Map uniforms to normals with variance 1/2 per coordinate.

    Consecutive coordinate pairs then form unit complex Gaussians,
    ``eta = x_{2j} + i x_{2j+1}`` with ``<|eta|^2> = 1``, distributed with
    density ``exp(-|eta|^2) / pi``.
    """
    return inv_norm_cdf(u) / math.sqrt(2.0)


def to_complex_modes(x: np.ndarray, n_modes: int) -> np.ndarray:
    x = np.asarray(x)
    return x[..., 0 : 2 * n_modes : 2] + 1j * x[..., 1 : 2 * n_modes : 2]


@dataclass(frozen=True)
class QmcEstimate:
    value: float
    n_points: int
    error_estimate: float

    def __post_init__(self):
        if self.n_points <= 0:
            raise ValueError("n_points must be positive")
        if not self.error_estimate >= 0:
            raise ValueError("error_estimate must be non-negative")


def _block_bounds(n_points: int, block_size: int):
    bounds = []
    for g in range(N_GROUPS):
        lo = n_points * g // N_GROUPS
        hi = n_points * (g + 1) // N_GROUPS
        for s in range(lo, hi, block_size):
            bounds.append((s, min(s + block_size, hi), g))
    return bounds


def _split_coordinates(u, n_modes, leading_extra=0):
    """Split raw uniforms into Gaussian mode amplitudes and leftover uniforms.

    The first ``leading_extra`` coordinates and everything after the mode
    block are returned as ``extra`` (leading ones first).
    """
    lead = int(leading_extra)
    x = map_to_gaussian(u[:, lead : lead + 2 * n_modes])
    eta = to_complex_modes(x, n_modes)
    extra = np.concatenate([u[:, :lead], u[:, lead + 2 * n_modes :]], axis=1)
    return eta, extra


def _run_block(integrand, cfg, n_modes, start, stop, leading_extra=0):
    u = faure_points(cfg, start, stop - start)
    eta, extra = _split_coordinates(u, n_modes, leading_extra)
    vals = np.asarray(integrand(eta, extra), dtype=float)
    if vals.shape[0] != stop - start:
        raise ValueError("integrand must return one value (or row) per point")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        row = int(np.nonzero(bad.reshape(len(vals), -1).any(axis=1))[0][0])
        raise IntegrandError(
            f"non-finite integrand value at point index {start + row} "
            f"(sequence index {cfg.skip + start + row}), eta={eta[row]!r}"
        )
    return vals.sum(axis=0)


def _integrate(integrand, cfg, n_points, n_modes, block_size, workers, leading_extra=0):
    if n_points < 2 * N_GROUPS:
        raise ValueError(f"n_points must be at least {2 * N_GROUPS}")
    if n_modes is None:
        n_modes = cfg.dimension // 2
    if 2 * n_modes + leading_extra > cfg.dimension:
        raise ValueError("dimension too small for the requested number of modes")
    bounds = _block_bounds(int(n_points), int(block_size))

    def job(bound):
        return _run_block(integrand, cfg, n_modes, bound[0], bound[1], leading_extra)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(job, bounds))
    else:
        sums = [job(b) for b in bounds]

    sums_by_group = [0.0] * N_GROUPS
    for (lo, hi, g), s in zip(bounds, sums):
        sums_by_group[g] = sums_by_group[g] + s
    sizes = [n_points * (g + 1) // N_GROUPS - n_points * g // N_GROUPS for g in range(N_GROUPS)]
    means = np.array([np.asarray(s) / c for s, c in zip(sums_by_group, sizes)])
    total = np.asarray(sum(sums_by_group)) / n_points
    err = means.std(axis=0, ddof=1) / math.sqrt(N_GROUPS)
    return total, err


def integrate(integrand, cfg: FaureConfig, n_points: int, n_modes=None,
              block_size=DEFAULT_BLOCK, workers=1, leading_extra=0) -> QmcEstimate:
    """QMC mean of ``integrand(eta, extra)`` over Gaussian-mapped Faure points.

    ``eta`` has shape (n, n_modes) and follows ``prod_k exp(-|eta_k|^2)/pi``.
    ``extra`` holds the remaining ``dimension - 2 n_modes`` raw uniforms; the
    first ``leading_extra`` coordinates are routed there instead of to ``eta``.
    The error estimate is the standard error of the means over four
    consecutive index groups (2**14 points each for 2**16 points).
    """
    value, err = _integrate(integrand, cfg, n_points, n_modes, block_size, workers, leading_extra)
    if value.ndim:
        raise ValueError("integrand is vector-valued; use integrate_vector")
    return QmcEstimate(float(value), int(n_points), float(err))


def integrate_vector(integrand, cfg: FaureConfig, n_points: int, n_modes=None,
                     block_size=DEFAULT_BLOCK, workers=1, leading_extra=0) -> list[QmcEstimate]:
    """Like :func:`integrate` for integrands returning a row of values per point."""
    value, err = _integrate(integrand, cfg, n_points, n_modes, block_size, workers, leading_extra)
    return [QmcEstimate(float(v), int(n_points), float(e))
            for v, e in zip(np.atleast_1d(value), np.atleast_1d(err))]
