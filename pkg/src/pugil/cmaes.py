"""CMA-ES with external seed injection, built for per-frame re-use.

Standard non-elitist (mu/mu_w, lambda) CMA-ES with cumulative step-size
adaptation and rank-one plus rank-mu covariance updates, using the canonical
constants for the given dimension and population size.  Fitness is maximized.

Two departures from a plain library optimizer, both needed by the rolling
horizon loop:

* :func:`ask` can replace the first few samples of a generation with
  externally seeded candidates (Gaussian around a supplied mean with a
  supplied per-coordinate std).  Seeded members interact with the update only
  through ranking; :func:`tell` treats every member identically.
* :class:`CmaState` is a plain value.  ``tell`` returns a new state, so a
  caller can keep one state per character, carry it across frames, and reset
  it when the task changes.

The covariance is re-symmetrized and its eigenvalues floored after every
update; with a small population and a couple of dozen dimensions the matrix
otherwise degenerates after enough generations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EIGENVALUE_FLOOR = 1e-12

ORIGIN_CMA = "cma"
ORIGIN_LAST_BEST = "last-best-seed"
ORIGIN_DEFAULT_POSE = "default-pose-seed"


@dataclass
class Seed:
    """An externally supplied sampling mean for one part of the population."""

    mean: np.ndarray
    std: np.ndarray | float
    origin: str = ORIGIN_LAST_BEST


@dataclass
class Candidate:
    vector: np.ndarray
    fitness: float = math.nan
    origin: str = ORIGIN_CMA


@dataclass(frozen=True)
class CmaState:
    dim: int
    lam: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_cov_path: float
    c_rank1: float
    c_rankmu: float
    chi_n: float
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    eigvecs: np.ndarray  # B
    eigstds: np.ndarray  # sqrt of C's eigenvalues (D)
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int = 0


def init_cma(dim: int, mean: np.ndarray, sigma0: float, lam: int) -> CmaState:
    """Fresh optimizer state: identity covariance, zero paths.

    Weights and learning rates follow the canonical defaults for (dim, lam).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if lam < 4:
        raise ValueError("population size must be >= 4")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    mean = np.asarray(mean, dtype=float).copy()
    if mean.shape != (dim,):
        raise ValueError(f"mean must have shape ({dim},)")

    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / np.sum(weights**2)

    c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
    c_cov_path = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
    c_rank1 = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
    c_rankmu = min(
        1.0 - c_rank1,
        2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff),
    )
    chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim**2))

    return CmaState(
        dim=dim,
        lam=lam,
        mu=mu,
        weights=weights,
        mu_eff=float(mu_eff),
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_cov_path=c_cov_path,
        c_rank1=c_rank1,
        c_rankmu=c_rankmu,
        chi_n=chi_n,
        mean=mean,
        sigma=float(sigma0),
        cov=np.eye(dim),
        eigvecs=np.eye(dim),
        eigstds=np.ones(dim),
        path_sigma=np.zeros(dim),
        path_cov=np.zeros(dim),
        generation=0,
    )


def ask(
    state: CmaState,
    rng: np.random.Generator,
    injected: Sequence[Seed] = (),
) -> list[Candidate]:
    """Sample one generation of ``state.lam`` candidates.

    The first ``len(injected)`` members are drawn componentwise from
    N(seed.mean, seed.std^2); the rest from the adapted distribution
    N(mean, sigma^2 C).
    """
    if len(injected) > state.lam:
        raise ValueError("more injected seeds than population slots")
    out: list[Candidate] = []
    for seed in injected:
        mean = np.asarray(seed.mean, dtype=float)
        if mean.shape != (state.dim,):
            raise ValueError("seed mean has wrong dimension")
        std = np.broadcast_to(np.asarray(seed.std, dtype=float), (state.dim,))
        x = mean + std * rng.standard_normal(state.dim)
        out.append(Candidate(vector=x, origin=seed.origin))
    n_free = state.lam - len(out)
    scaled = state.eigvecs * (state.sigma * state.eigstds)  # B * (sigma D)
    for _ in range(n_free):
        z = rng.standard_normal(state.dim)
        out.append(Candidate(vector=state.mean + scaled @ z, origin=ORIGIN_CMA))
    return out


def _ranking(population: Sequence[Candidate]) -> list[int]:
    # Descending fitness; non-finite last; ties broken by lower index.
    def key(i: int):
        f = population[i].fitness
        if f is None or not math.isfinite(f):
            return (1, 0.0, i)
        return (0, -f, i)

    return sorted(range(len(population)), key=key)


def best_of(population: Sequence[Candidate]) -> Candidate:
    """The highest-fitness member; ties go to the lowest index."""
    if not population:
        raise ValueError("empty population")
    return population[_ranking(population)[0]]


def tell(state: CmaState, population: Sequence[Candidate]) -> CmaState:
    """One distribution update from an evaluated generation."""
    if len(population) != state.lam:
        raise ValueError(f"population size must be {state.lam}")
    d = state.dim
    order = _ranking(population)
    elite = np.stack([population[i].vector for i in order[: state.mu]])

    mean_old = state.mean
    y = (elite - mean_old) / state.sigma  # (mu, d)
    y_w = state.weights @ y
    mean = mean_old + state.sigma * y_w

    # Step-size path uses C^(-1/2) y_w from the cached eigendecomposition.
    inv_sqrt_yw = state.eigvecs @ ((state.eigvecs.T @ y_w) / state.eigstds)
    c_s = state.c_sigma
    path_sigma = (1.0 - c_s) * state.path_sigma + math.sqrt(
        c_s * (2.0 - c_s) * state.mu_eff
    ) * inv_sqrt_yw

    gen = state.generation + 1
    norm_ps = float(np.linalg.norm(path_sigma))
    hsig = norm_ps / math.sqrt(1.0 - (1.0 - c_s) ** (2 * gen)) / state.chi_n < (
        1.4 + 2.0 / (d + 1.0)
    )

    c_c = state.c_cov_path
    path_cov = (1.0 - c_c) * state.path_cov
    if hsig:
        path_cov = path_cov + math.sqrt(c_c * (2.0 - c_c) * state.mu_eff) * y_w

    rank1 = np.outer(path_cov, path_cov)
    if not hsig:
        rank1 = rank1 + c_c * (2.0 - c_c) * state.cov  # variance loss correction
    rankmu = (y * state.weights[:, None]).T @ y
    cov = (
        (1.0 - state.c_rank1 - state.c_rankmu) * state.cov
        + state.c_rank1 * rank1
        + state.c_rankmu * rankmu
    )

    sigma = state.sigma * math.exp(
        (c_s / state.d_sigma) * (norm_ps / state.chi_n - 1.0)
    )

    # Repair: symmetrize, floor the spectrum, refresh the cached decomposition.
    cov = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, EIGENVALUE_FLOOR)
    cov = (eigvecs * eigvals) @ eigvecs.T
    cov = 0.5 * (cov + cov.T)

    return CmaState(
        dim=d,
        lam=state.lam,
        mu=state.mu,
        weights=state.weights,
        mu_eff=state.mu_eff,
        c_sigma=state.c_sigma,
        d_sigma=state.d_sigma,
        c_cov_path=state.c_cov_path,
        c_rank1=state.c_rank1,
        c_rankmu=state.c_rankmu,
        chi_n=state.chi_n,
        mean=mean,
        sigma=float(sigma),
        cov=cov,
        eigvecs=eigvecs,
        eigstds=np.sqrt(eigvals),
        path_sigma=path_sigma,
        path_cov=path_cov,
        generation=gen,
    )
