"""Black-box hyper-parameter search: GP surrogate, EI acquisition, grid baseline.

The search space is a finite product of discrete dimensions. Each dimension
embeds into [0, 1] (by index for categoricals, log-scaled for rates, with a
pinned zero for rates that include 0), and a squared-exponential GP models
the objective over the encoded cube. Candidates are always snapped to the
grid, so every proposal is a valid configuration and no point repeats.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from .seeds import derive_rng

Theta = tuple


class SpaceExhausted(RuntimeError):
    """Raised when every configuration has already been tried."""


@dataclass(frozen=True)
class Dimension:
    """One discrete search dimension with a fixed [0, 1] embedding."""

    name: str
    values: tuple
    scale: str = "index"  # index | log | log_zero

    def __post_init__(self):
        if len(self.values) < 1:
            raise ValueError(f"dimension {self.name} has no values")
        if self.scale not in ("index", "log", "log_zero"):
            raise ValueError(f"unknown scale {self.scale}")

    def encode_value(self, v) -> float:
        try:
            idx = self.values.index(v)
        except ValueError:
            raise ValueError(f"{v!r} not in dimension {self.name}") from None
        if len(self.values) == 1:
            return 0.0
        if self.scale == "index":
            return idx / (len(self.values) - 1)
        positives = [x for x in self.values if x > 0]
        lo, hi = math.log(min(positives)), math.log(max(positives))
        span = hi - lo if hi > lo else 1.0
        if self.scale == "log":
            return (math.log(v) - lo) / span
        # log_zero: 0 pins to 0, positives fill (gap, 1] log-scaled.
        if v == 0:
            return 0.0
        gap = 1.0 / (len(self.values) - 1)
        return gap + (1.0 - gap) * (math.log(v) - lo) / span


@dataclass(frozen=True)
class SearchSpace:
    """Ordered product of dimensions; thetas are value tuples in dim order."""

    dims: tuple[Dimension, ...]

    @property
    def num_dims(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        n = 1
        for d in self.dims:
            n *= len(d.values)
        return n

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(len(d.values) for d in self.dims)

    def encode(self, theta: Theta) -> np.ndarray:
        if len(theta) != self.num_dims:
            raise ValueError(f"theta has {len(theta)} entries, space has {self.num_dims}")
        return np.array([d.encode_value(v) for d, v in zip(self.dims, theta)])

    def theta_at(self, flat_index: int) -> Theta:
        """Lexicographic order: the first dimension varies slowest."""
        idx = np.unravel_index(flat_index, self.cards)
        return tuple(d.values[i] for d, i in zip(self.dims, idx))

    def all_thetas(self):
        for i in range(self.size):
            yield self.theta_at(i)

    def random_theta(self, rng: np.random.Generator) -> Theta:
        return tuple(d.values[rng.integers(len(d.values))] for d in self.dims)

    def neighbors(self, theta: Theta) -> list[Theta]:
        """Configurations differing in exactly one dimension by one index step."""
        out = []
        for i, d in enumerate(self.dims):
            idx = d.values.index(theta[i])
            for j in (idx - 1, idx + 1):
                if 0 <= j < len(d.values):
                    out.append(theta[:i] + (d.values[j],) + theta[i + 1 :])
        return out

    def snap(self, point: np.ndarray) -> Theta:
        """Nearest grid theta to an encoded point (per-dimension)."""
        theta = []
        for coord, d in zip(point, self.dims):
            encs = np.array([d.encode_value(v) for v in d.values])
            theta.append(d.values[int(np.argmin(np.abs(encs - coord)))])
        return tuple(theta)


# §-free defaults: the tuning grid used throughout the experiments.
DROPOUT_CHOICES = (0.0, 0.5)
L2_CHOICES = (0.0, 5e-4, 1e-3, 5e-3, 1e-2)
DEPTH_CHOICES = (1, 2, 3, 4, 5)
LR_CHOICES = (5e-4, 1e-3, 5e-3, 1e-2)
DIM_CHOICES = (64, 128, 256, 512)


def build_space(
    num_groups: int,
    *,
    dropouts: Sequence[float] = DROPOUT_CHOICES,
    l2s: Sequence[float] = L2_CHOICES,
    depths: Sequence[int] = DEPTH_CHOICES,
    lrs: Sequence[float] = LR_CHOICES,
    dims: Sequence[int] = DIM_CHOICES,
) -> SearchSpace:
    """Per-group (dropout, l2, depth, lr) knobs plus one shared hidden dim.

    num_groups = number of clients for per-client tuning, or 1 when every
    client shares a single hyper-parameter set.
    """
    dimensions: list[Dimension] = []
    for g in range(num_groups):
        dimensions.append(Dimension(f"c{g}.dropout", tuple(dropouts), "index"))
        dimensions.append(Dimension(f"c{g}.l2", tuple(l2s), "log_zero"))
        dimensions.append(Dimension(f"c{g}.depth", tuple(depths), "index"))
        dimensions.append(Dimension(f"c{g}.lr", tuple(lrs), "log"))
    dimensions.append(Dimension("dim", tuple(dims), "index"))
    return SearchSpace(dims=tuple(dimensions))


def theta_assignments(space: SearchSpace, theta: Theta) -> dict:
    return {d.name: v for d, v in zip(space.dims, theta)}


# ---------------------------------------------------------------------------
# Gaussian process surrogate


@dataclass
class GpModel:
    x: np.ndarray  # (n, D) encoded trials
    y: np.ndarray  # (n,)
    y_mean: float
    lengthscales: np.ndarray  # (D,)
    signal_var: float
    noise_var: float
    chol: np.ndarray
    alpha: np.ndarray  # solve(K + noise I, y - mean)


def _kernel(xa: np.ndarray, xb: np.ndarray, ls: np.ndarray, signal_var: float) -> np.ndarray:
    da = xa[:, None, :] / ls
    db = xb[None, :, :] / ls
    sq = ((da - db) ** 2).sum(axis=2)
    return signal_var * np.exp(-0.5 * sq)


_LS_LATTICE = (0.08, 0.15, 0.3, 0.6, 1.2)
_NOISE_LATTICE = (1e-6, 1e-4, 1e-2)
_SIGNAL_FACTORS = (0.5, 1.0, 2.0)
NOISE_FLOOR = 1e-6
MAX_JITTER = 1e-2


def _chol_with_jitter(k: np.ndarray) -> tuple[np.ndarray, float]:
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(k + jitter * np.eye(k.shape[0])), jitter
        except np.linalg.LinAlgError:
            jitter = max(NOISE_FLOOR, jitter * 10.0)
            if jitter > MAX_JITTER:
                raise


def gp_fit(x: np.ndarray, y: np.ndarray) -> GpModel:
    """Fit the SE-kernel GP, picking hyper-params by marginal likelihood.

    The lattice shares one length-scale across dimensions; the model stores
    it per-dimension so anisotropic variants slot in without surface changes.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size < 1:
        raise ValueError("need at least one trial to fit")
    n, num_dims = x.shape
    y_mean = float(y.mean())
    resid = y - y_mean
    base_var = max(float(resid.var()), 1e-6)

    best = None
    for ls in _LS_LATTICE:
        ls_vec = np.full(num_dims, ls)
        for sf in _SIGNAL_FACTORS:
            signal = base_var * sf
            k_base = _kernel(x, x, ls_vec, signal)
            for noise in _NOISE_LATTICE:
                noise_var = max(noise * signal, NOISE_FLOOR)
                try:
                    chol, jitter = _chol_with_jitter(k_base + noise_var * np.eye(n))
                except np.linalg.LinAlgError:
                    continue
                alpha = scipy.linalg.cho_solve((chol, True), resid)
                ll = (
                    -0.5 * float(resid @ alpha)
                    - float(np.log(np.diag(chol)).sum())
                    - 0.5 * n * math.log(2.0 * math.pi)
                )
                if best is None or ll > best[0]:
                    best = (ll, ls_vec, signal, noise_var + jitter, chol, alpha)
    if best is None:
        raise np.linalg.LinAlgError("no GP hyper-parameter candidate was positive definite")
    _, ls_vec, signal, noise_var, chol, alpha = best
    return GpModel(
        x=x,
        y=y,
        y_mean=y_mean,
        lengthscales=ls_vec,
        signal_var=signal,
        noise_var=noise_var,
        chol=chol,
        alpha=alpha,
    )


def gp_fit_trials(trials: list["Trial"], space: SearchSpace) -> GpModel:
    x = np.stack([space.encode(t.theta) for t in trials])
    y = np.array([t.value for t in trials])
    return gp_fit(x, y)


def gp_predict(model: GpModel, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance (clamped at 0) at query points."""
    xq = np.atleast_2d(np.asarray(xq, dtype=np.float64))
    k_star = _kernel(xq, model.x, model.lengthscales, model.signal_var)
    mean = model.y_mean + k_star @ model.alpha
    v = scipy.linalg.solve_triangular(model.chol, k_star.T, lower=True)
    var = model.signal_var - (v**2).sum(axis=0)
    return mean, np.maximum(var, 0.0)


def expected_improvement(
    mean: np.ndarray, var: np.ndarray, best: float, xi: float = 0.01
) -> np.ndarray:
    """EI for maximization; deterministic limit max(0, mu - best - xi)."""
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.sqrt(np.asarray(var, dtype=np.float64))
    improve = mean - best - xi
    out = np.maximum(improve, 0.0)
    pos = sigma > 0
    if np.any(pos):
        z = improve[pos] / sigma[pos]
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        out = np.array(out, dtype=np.float64)
        out[pos] = improve[pos] * ndtr(z) + sigma[pos] * pdf
    return out


MAX_CANDIDATES = 2048


def propose_next(
    model: GpModel, space: SearchSpace, rng: np.random.Generator, xi: float = 0.01
) -> Theta:
    """Argmax of EI over sampled grid candidates plus the incumbent's neighbors.

    Already-tried configurations are excluded; ties break toward the
    lexicographically smallest encoding. Raises SpaceExhausted when no
    untried configuration remains.
    """
    tried = {tuple(row) for row in np.round(model.x, 12)}

    def is_tried(theta: Theta) -> bool:
        return tuple(np.round(space.encode(theta), 12)) in tried

    candidates: dict[Theta, None] = {}
    if space.size <= MAX_CANDIDATES:
        for theta in space.all_thetas():
            candidates[theta] = None
    else:
        for idx in rng.integers(space.size, size=MAX_CANDIDATES):
            candidates[space.theta_at(int(idx))] = None
    incumbent = space.snap(model.x[int(np.argmax(model.y))])
    for nbr in space.neighbors(incumbent):
        candidates[nbr] = None

    fresh = [theta for theta in candidates if not is_tried(theta)]
    if not fresh:
        fresh = [theta for theta in space.all_thetas() if not is_tried(theta)]
        if not fresh:
            raise SpaceExhausted(f"all {space.size} configurations tried")

    encs = np.stack([space.encode(t) for t in fresh])
    order = np.lexsort(encs.T[::-1])
    fresh = [fresh[i] for i in order]
    encs = encs[order]

    mean, var = gp_predict(model, encs)
    ei = expected_improvement(mean, var, best=float(model.y.max()), xi=xi)
    return fresh[int(np.argmax(ei))]


def initial_design(space: SearchSpace, n0: int, seed: int | np.random.Generator) -> list[Theta]:
    """Latin-hypercube draw in the encoded cube, snapped to the grid, deduped."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if n0 > space.size:
        raise ValueError(f"n0 {n0} exceeds space size {space.size}")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "lhs")
    cube = np.empty((n0, space.num_dims))
    for j in range(space.num_dims):
        strata = (np.arange(n0) + rng.random(n0)) / n0
        cube[:, j] = rng.permutation(strata)
    seen: dict[Theta, None] = {}
    for row in cube:
        seen.setdefault(space.snap(row), None)
    return list(seen)


@dataclass
class Trial:
    """One evaluated configuration."""

    theta: Theta
    value: float
    wall_time_s: float = 0.0


def grid_search(
    objective: Callable[[Theta], float], space: SearchSpace, budget: int | None = None
) -> list[Trial]:
    """Exhaustive (or budget-capped) lexicographic enumeration."""
    limit = space.size if budget is None else min(budget, space.size)
    trials = []
    for i in range(limit):
        theta = space.theta_at(i)
        t0 = time.process_time()
        value = objective(theta)
        trials.append(Trial(theta=theta, value=value, wall_time_s=time.process_time() - t0))
    return trials


def run_bo(
    objective: Callable[[Theta], float],
    space: SearchSpace,
    budget: int = 30,
    n0: int = 5,
    seed: int = 0,
    xi: float = 0.01,
) -> list[Trial]:
    """GP + EI loop: space-filling init, then sequential proposals.

    budget counts total evaluations (init included) and is capped at the
    space size, so the loop always terminates with no repeated theta.
    """
    budget = min(budget, space.size)
    rng = derive_rng(seed, "bo")
    trials: list[Trial] = []

    def evaluate(theta: Theta) -> None:
        t0 = time.process_time()
        value = objective(theta)
        trials.append(Trial(theta=theta, value=value, wall_time_s=time.process_time() - t0))

    for theta in initial_design(space, min(n0, budget), rng):
        evaluate(theta)
    while len(trials) < budget:
        model = gp_fit_trials(trials, space)
        try:
            theta = propose_next(model, space, rng, xi=xi)
        except SpaceExhausted:
            break
        evaluate(theta)
    return trials
