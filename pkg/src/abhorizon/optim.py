"""Seeded differential evolution (best/1/bin) for boxed minimization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InitializationError


@dataclass(frozen=True)
class DEResult:
    x: np.ndarray
    fun: float
    nit: int
    converged: bool
    population: np.ndarray
    energies: np.ndarray


def differential_evolution(
    func: Callable[[np.ndarray], float | np.ndarray],
    bounds,
    *,
    popsize: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-8,
    atol: float = 0.0,
    mutation: tuple[float, float] = (0.5, 1.0),
    crossover: float = 0.7,
    seed=None,
    vectorized: bool = False,
) -> DEResult:
    """Minimize ``func`` over the box ``bounds`` (sequence of ``(lo, hi)``).

    Population size is ``max(15 * dim, popsize)``.  The mutation factor is
    redrawn uniformly from ``mutation`` every generation.  Trial vectors are
    evaluated as a batch and selected greedily, so with ``vectorized=True``
    ``func`` receives an ``(n, dim)`` array and returns ``n`` values.
    Coordinates with ``lo == hi`` stay pinned.  Iteration stops once
    ``std(energies) <= atol + tol * |mean(energies)|``.
    """
    b = np.asarray(bounds, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] > b[:, 1]):
        raise ValueError("bounds must be a sequence of (lo, hi) with lo <= hi")
    lo, hi = b[:, 0], b[:, 1]
    dim = lo.size
    npop = max(15 * dim, int(popsize), 5)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    def evaluate(x: np.ndarray) -> np.ndarray:
        if vectorized:
            e = np.asarray(func(x), dtype=float).reshape(len(x))
        else:
            e = np.array([func(row) for row in x], dtype=float)
        return np.where(np.isfinite(e), e, np.inf)

    pop = lo + rng.random((npop, dim)) * (hi - lo)
    energies = evaluate(pop)
    if not np.isfinite(energies).any():
        raise InitializationError("objective is non-finite at every initial point")

    def spread_ok() -> bool:
        if not np.all(np.isfinite(energies)):
            return False
        return bool(np.std(energies) <= atol + tol * abs(np.mean(energies)))

    nit = 0
    converged = spread_ok()
    idx = np.arange(npop)
    while not converged and nit < max_iter:
        nit += 1
        best = pop[np.argmin(energies)]
        f = rng.uniform(*mutation)
        # two distinct partners, both different from the target row
        r1 = (idx + rng.integers(1, npop, npop)) % npop
        r2 = (idx + rng.integers(1, npop, npop)) % npop
        clash = r2 == r1
        while clash.any():
            r2[clash] = (idx[clash] + rng.integers(1, npop, clash.sum())) % npop
            clash = r2 == r1
        mutant = best + f * (pop[r1] - pop[r2])
        cross = rng.random((npop, dim)) < crossover
        cross[idx, rng.integers(0, dim, npop)] = True
        trial = np.where(cross, mutant, pop)
        bad = (trial < lo) | (trial > hi)
        if bad.any():
            fresh = lo + rng.random((npop, dim)) * (hi - lo)
            trial = np.where(bad, fresh, trial)
        e_trial = evaluate(trial)
        better = e_trial <= energies
        pop[better] = trial[better]
        energies[better] = e_trial[better]
        converged = spread_ok()

    i = int(np.argmin(energies))
    return DEResult(pop[i].copy(), float(energies[i]), nit, converged, pop, energies)
