"""
Complex Ornstein-Uhlenbeck colored noise z*_t with correlation
M[z_t z*_s] = (Gamma*gamma/2) exp(-gamma|t - s|) and M[z_t z_s] = 0.

Random numbers: numpy's PCG64 bit generator, Gaussians from
Generator.standard_normal. A trajectory seed is derived from
(master_seed, index) through numpy's SeedSequence hash, so seeds are
portable across platforms and worker layouts.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd

from numerics import TimeGrid, mean_and_stderr

# Test hook: scales the variance of the innovation xi_k (1.0 = correct noise)
NOISE_VARIANCE_SCALE = 1.0

# Minimum ensemble size accepted by estimate_correlation
MIN_PATHS = 100


@dataclass(frozen=True)
class CorrelationSpec:
    """Bath parameters of the OU correlation (rates in units of Gamma)"""

    Gamma: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.Gamma >= 0:
            raise ValueError(f"Gamma must be >= 0, got {self.Gamma}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    @property
    def strength(self):
        """alpha(t, t) = Gamma*gamma/2"""
        return 0.5 * self.Gamma * self.gamma

    def alpha(self, t, s):
        """alpha(t, s), vectorised over t and s"""
        return self.strength * np.exp(-self.gamma * np.abs(np.asarray(t) - np.asarray(s)))


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One realisation of z*_t sampled on a grid"""

    grid: TimeGrid
    samples: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.samples) != self.grid.size:
            raise ValueError("a noise path needs one sample per grid point")


def mix_seed(master_seed, index):
    """64-bit seed of trajectory `index` under `master_seed` (SeedSequence hash)"""
    sequence = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def recursion_coefficients(corr: CorrelationSpec, steps):
    """
    Exact OU update z_{k+1} = decay_k z_k + xi_k over local spacings.

    Returns:
        (decay, innovation_variance) arrays, one entry per step
    """
    steps = np.asarray(steps, dtype=float)
    decay = np.exp(-corr.gamma * steps)
    innovation = corr.strength * (1.0 - np.exp(-2.0 * corr.gamma * steps))
    return decay, innovation


def recursion_covariance(corr: CorrelationSpec, delta):
    """
    Covariance M[z_1 z_0*] and variance of z_1 implied by one recursion step
    of length delta started from the stationary variance.
    """
    decay, innovation = recursion_coefficients(corr, [delta])
    variance0 = corr.strength
    return decay[0] * variance0, decay[0] ** 2 * variance0 + innovation[0]


def _circular_gaussians(rng, count):
    """Circular complex Gaussians with unit total variance"""
    pairs = rng.standard_normal((count, 2))
    return (pairs[:, 0] + 1j * pairs[:, 1]) * np.sqrt(0.5)


def _draw(seed, count):
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return _circular_gaussians(rng, count)


def sample_paths(corr: CorrelationSpec, grid: TimeGrid, seeds, variance_scale=None):
    """
    Noise samples for several seeds at once, shape (len(seeds), grid.size).
    Row b is identical to sample_path(corr, grid, seeds[b]).samples.
    variance_scale defaults to NOISE_VARIANCE_SCALE read at call time.
    """
    seeds = list(seeds)
    size = grid.size
    out = np.zeros((len(seeds), size), dtype=complex)
    if corr.Gamma == 0 or not seeds:
        return out
    normals = np.stack([_draw(seed, size) for seed in seeds])
    decay, innovation = recursion_coefficients(corr, grid.steps)
    scale = NOISE_VARIANCE_SCALE if variance_scale is None else variance_scale
    kick = np.sqrt(scale * innovation)
    z = np.sqrt(corr.strength) * normals[:, 0]
    out[:, 0] = z
    for k in range(size - 1):
        z = decay[k] * z + kick[k] * normals[:, k + 1]
        out[:, k + 1] = z
    # samples hold z*_t
    return np.conj(out)


def sample_path(corr: CorrelationSpec, grid: TimeGrid, seed):
    """One stationary OU path on `grid` (Gamma = 0 gives the all-zero path)"""
    return NoisePath(grid, sample_paths(corr, grid, [seed])[0], int(seed))


def estimate_correlation(paths, i, j, conjugate=True):
    """
    Ensemble estimate of M[z_{t_i} z*_{t_j}] (or M[z_{t_i} z_{t_j}] when
    conjugate is False) with its standard error.
    """
    paths = list(paths)
    if len(paths) < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths, got {len(paths)}")
    grid = paths[0].grid
    if any(not p.grid.same_as(grid) for p in paths):
        raise ValueError("all paths must share one grid")
    samples = np.stack([p.samples for p in paths])
    return correlation_from_samples(samples, i, j, conjugate)


def correlation_from_samples(samples, i, j, conjugate=True):
    """Same as estimate_correlation on a (paths, points) array of z* samples"""
    z_i = np.conj(samples[:, i])
    z_j = np.conj(samples[:, j])
    products = z_i * (np.conj(z_j) if conjugate else z_j)
    mean, stderr = mean_and_stderr(products)
    return complex(mean), float(stderr)


def dump_path_csv(path: NoisePath, file_path):
    """Write a noise path as CSV with columns t, re_z_star, im_z_star"""
    frame = pd.DataFrame({
        "t": path.grid.points,
        "re_z_star": np.real(path.samples),
        "im_z_star": np.imag(path.samples),
    })
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# seed: {path.seed}\n")
        frame.to_csv(f, index=False, float_format="%.9g")
    return file_path
