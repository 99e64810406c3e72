"""Independent grid oracle for the stopping problem.

The OBM is on natural scale, so the standard birth-death approximation on a
uniform grid keeps symmetric jump probabilities 1/2 and encodes the
volatility entirely in the holding times:

    dt_i = h^2 / sigma(x_i)^2,
    dt at 0 = (h^2 / 2) (1/sigma1^2 + 1/sigma2^2),

the interface clock being the average of the one-sided clocks (the speed
measure has no atom at 0).  The discrete problem

    V_i = max(g_i, e^{-r dt_i} (V_{i-1} + V_{i+1}) / 2)

is solved by Howard policy iteration (greedy stop set, tridiagonal solve on
the continuation set, repeat), with plain value iteration kept as a slower
cross-check.  Nothing here touches the closed-form machinery: this module
only needs the grid, the reward and max/solve, which is what makes it a
trustworthy oracle for the analytic boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .core import ConvergenceError, DomainError, ObmParams, Reward, as_rate
from .solver import Interval, Region

__all__ = ["GridModel", "build_chain", "solve_stopping", "extract_region"]

_LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class GridModel:
    """Uniform-grid chain: nodes, per-node holding times, sigma per node."""

    params: ObmParams
    x: np.ndarray
    h: float
    dt: np.ndarray

    @property
    def n(self) -> int:
        return self.x.size


def build_chain(params: ObmParams, xmin: float, xmax: float, h: float) -> GridModel:
    """Build the birth-death approximation on [xmin, xmax] with spacing h.

    Requires xmin < 0 < xmax and both 0 and xmin on the lattice (so the
    interface is a node and no cell straddles it).  The bottom node is
    killed (V = g there), the top node is absorbing.
    """
    if not (h > 0.0 and math.isfinite(h)):
        raise DomainError(f"grid spacing must be positive, got {h}")
    if not (xmin < 0.0 < xmax):
        raise DomainError(f"need xmin < 0 < xmax, got [{xmin}, {xmax}]")
    n_cells = (xmax - xmin) / h
    if abs(n_cells - round(n_cells)) > _LATTICE_TOL * max(1.0, abs(n_cells)):
        raise DomainError(f"(xmax - xmin) = {xmax - xmin} is not a multiple of h = {h}")
    k0 = -xmin / h
    if abs(k0 - round(k0)) > _LATTICE_TOL * max(1.0, abs(k0)):
        raise DomainError(f"interface 0 is not on the lattice (xmin = {xmin}, h = {h})")
    n = int(round(n_cells)) + 1
    x = xmin + h * np.arange(n)
    x[int(round(k0))] = 0.0  # exact node at the interface
    sig = params.sigma(x)
    dt = h**2 / sig**2
    i0 = int(round(k0))
    dt[i0] = 0.5 * h**2 * (1.0 / params.sigma1**2 + 1.0 / params.sigma2**2)
    return GridModel(params=params, x=x, h=float(h), dt=dt)


def _bellman_residual(model: GridModel, r: float, g: np.ndarray, v: np.ndarray) -> float:
    gamma = np.exp(-r * model.dt)
    cont = np.empty_like(v)
    cont[1:-1] = 0.5 * gamma[1:-1] * (v[:-2] + v[2:])
    cont[0] = g[0]
    cont[-1] = g[-1]
    target = np.maximum(g, cont)
    return float(np.max(np.abs(v - target) / np.maximum(1.0, np.abs(target))))


def solve_stopping(model: GridModel, r, reward: Reward, method: str = "policy",
                   tol: float = 1e-12, max_iter: int | None = 0):
    """Solve the discrete stopping problem; returns (V, stop_flags, info).

    method "policy" (default) is Howard iteration: alternate a greedy stop
    set with an exact tridiagonal solve on the continuation set.  The stop
    frontier can advance as slowly as one node per sweep, so iteration
    counts scale with the grid, but each sweep is a single banded solve and
    the final Bellman residual is verified against tol.  method "vi" is
    plain value iteration from V = g (monotone nondecreasing iterates),
    practical only on coarse grids.
    """
    rate = as_rate(r)
    g = np.asarray(reward.value(model.x), dtype=float)
    gamma = np.exp(-rate * model.dt)
    n = model.n

    if method == "vi":
        iters = max_iter or 2_000_000
        v = g.copy()
        for it in range(iters):
            cont = np.empty_like(v)
            cont[1:-1] = 0.5 * gamma[1:-1] * (v[:-2] + v[2:])
            cont[0] = g[0]
            cont[-1] = g[-1]
            v_new = np.maximum(g, cont)
            delta = float(np.max(np.abs(v_new - v)))
            v = v_new
            if delta < tol * 0.1:
                break
        else:
            raise ConvergenceError(
                f"value iteration did not reach tol={tol} in {iters} sweeps"
            )
        flags = _greedy_flags(g, gamma, v)
        res = _bellman_residual(model, rate, g, v)
        if res > tol:
            raise ConvergenceError(f"Bellman residual {res:.3e} above {tol}")
        return v, flags, {"iterations": it + 1, "residual": res, "method": "vi"}

    if method != "policy":
        raise DomainError(f"unknown method {method!r}")

    # the frontier can move as little as one node per sweep, so the cap
    # must scale with the grid; each sweep is a single banded solve
    iters = max_iter or (g.size + 50)
    flags = g > 0.0  # start from "stop wherever the reward pays"
    flags[0] = True
    flags[-1] = True
    v = g.copy()
    for it in range(iters):
        v = _policy_value(model, gamma, g, flags)
        new_flags = _greedy_flags(g, gamma, v)
        if np.array_equal(new_flags, flags):
            break
        flags = new_flags
    res = _bellman_residual(model, rate, g, v)
    if res > tol:
        raise ConvergenceError(
            f"policy iteration stalled: Bellman residual {res:.3e} above {tol}"
        )
    return v, flags, {"iterations": it + 1, "residual": res, "method": "policy"}


def _greedy_flags(g: np.ndarray, gamma: np.ndarray, v: np.ndarray) -> np.ndarray:
    cont = np.empty_like(v)
    cont[1:-1] = 0.5 * gamma[1:-1] * (v[:-2] + v[2:])
    cont[0] = -np.inf
    cont[-1] = -np.inf
    flags = g >= cont - 1e-15 * np.maximum(1.0, np.abs(cont))
    flags[0] = True
    flags[-1] = True
    return flags


def _policy_value(model: GridModel, gamma: np.ndarray, g: np.ndarray,
                  flags: np.ndarray) -> np.ndarray:
    """Exact value of the policy 'stop on flags': tridiagonal linear solve."""
    n = g.size
    # rows: stopped -> V_i = g_i ; continuation -> V_i - gamma_i/2 (V_{i-1}+V_{i+1}) = 0
    diag = np.ones(n)
    lower = np.zeros(n - 1)
    upper = np.zeros(n - 1)
    rhs = np.where(flags, g, 0.0)
    cont = ~flags
    idx = np.nonzero(cont)[0]
    upper[idx] = -0.5 * gamma[idx]      # couples V_i to V_{i+1}
    lower[idx - 1] = -0.5 * gamma[idx]  # couples V_i to V_{i-1}
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def extract_region(model: GridModel, flags: np.ndarray, reward: Reward) -> Region:
    """Stopping region from the flag vector, boundaries at cell midpoints.

    Components on which the reward vanishes identically are artifacts of the
    killed bottom node and are dropped.
    """
    g = np.asarray(reward.value(model.x), dtype=float)
    flags = np.asarray(flags, dtype=bool)
    n = flags.size
    comps: list[Interval] = []
    i = 0
    while i < n:
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and flags[j + 1]:
            j += 1
        if g[i:j + 1].max() > 0.0:
            lo = model.x[i] if i == 0 else 0.5 * (model.x[i - 1] + model.x[i])
            hi = math.inf if j == n - 1 else 0.5 * (model.x[j] + model.x[j + 1])
            comps.append(Interval(lo, hi))
        i = j + 1
    return Region(tuple(comps))
