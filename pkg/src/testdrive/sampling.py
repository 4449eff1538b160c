"""Representative subset selection: proportion-preserving sampler plus
random and k-medoids baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PrecisConfig:
    alpha: float = 0.5      # representation/diversity tradeoff
    K: int = 1
    swap_passes: int = 50
    restarts: int = 8       # greedy starts with different forced first picks
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError("alpha must be in [0, 1]")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")


@dataclass(frozen=True)
class SampleSet:
    indices: tuple[int, ...]
    objective: float
    method: str  # precis | random | kmedoids

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ConfigError("selected indices must be distinct")


def _sqdist_matrix(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    return np.clip(d2, 0.0, None)


def rep_cost(S, X: np.ndarray) -> float:
    """Partition-based squared representation error.

    Each row of X is assigned to its nearest selected row (ties broken by the
    lowest selected index); the cost sums squared distances within partitions.
    """
    S = sorted(set(int(i) for i in S))
    if not S:
        raise ConfigError("S must be nonempty")
    X = np.asarray(X, dtype=float)
    d2 = np.sum((X[:, None, :] - X[None, S, :]) ** 2, axis=2)
    return float(np.min(d2, axis=1).sum())


def div_cost(S, X: np.ndarray) -> float:
    """Scatter of the selected rows about their own mean."""
    S = sorted(set(int(i) for i in S))
    if not S:
        raise ConfigError("S must be nonempty")
    F = np.asarray(X, dtype=float)[S]
    return float(np.sum((F - F.mean(axis=0)) ** 2))


def _total_scatter(X: np.ndarray) -> float:
    return float(np.sum((X - X.mean(axis=0)) ** 2))


def precis_objective(S, X: np.ndarray, alpha: float) -> float:
    """Scale-free objective: alpha * rep~ - (1 - alpha) * div~, both terms
    normalized by the total scatter of X. Lower is better; diversity of the
    selected set is rewarded."""
    scat = _total_scatter(X)
    if scat <= 0.0:
        return 0.0
    return (alpha * rep_cost(S, X) - (1.0 - alpha) * div_cost(S, X)) / scat


def _greedy_swap(X, alpha, K, swap_passes, scat, d2, sq, first):
    """One greedy construction plus swap local search. `first` forces the
    initial element; None leaves the first pick to the greedy rule."""
    n = X.shape[0]

    # State: selected list, per-row min distance to selection, sum / sumsq of
    # selected rows for the diversity term (div = sumsq - |sum|^2 / K).
    selected: list[int] = []
    in_sel = np.zeros(n, dtype=bool)
    mind2 = np.full(n, np.inf)
    s1 = np.zeros(X.shape[1])
    ssq = 0.0

    if first is not None:
        selected.append(first)
        in_sel[first] = True
        mind2 = d2[:, first].copy()
        s1 = X[first].copy()
        ssq = float(sq[first])

    while len(selected) < K:
        k_new = len(selected) + 1
        # Evaluate every candidate at once.
        rep_j = np.minimum(mind2[:, None], d2).sum(axis=0)       # (n,)
        s1n = s1[None, :] + X                                    # (n, dim)
        div_j = ssq + sq - np.einsum("ij,ij->i", s1n, s1n) / k_new
        val = (alpha * rep_j - (1.0 - alpha) * div_j) / scat
        val[in_sel] = np.inf
        best_j = int(np.argmin(val))  # argmin takes the lowest index on ties
        selected.append(best_j)
        in_sel[best_j] = True
        mind2 = np.minimum(mind2, d2[:, best_j])
        s1 += X[best_j]
        ssq += sq[best_j]

    selected.sort()
    cur = precis_objective(selected, X, alpha)

    for _ in range(swap_passes):
        d2sel = d2[:, selected]                       # (n, K)
        order = np.argsort(d2sel, axis=1, kind="stable")
        first = order[:, 0]
        f_val = d2sel[np.arange(n), first]
        s_val = d2sel[np.arange(n), order[:, 1]] if K > 1 else np.full(n, np.inf)
        sel_arr = np.array(selected)
        s1 = X[sel_arr].sum(axis=0)
        ssq = float(sq[sel_arr].sum())
        best = (1e-12, None)  # (improvement, (pos, j))
        for pos in range(K):
            # Min distance to selection excluding the element at `pos`.
            excl = np.where(first == pos, s_val, f_val)
            rep_j = np.minimum(excl[:, None], d2).sum(axis=0)
            s1n = (s1 - X[selected[pos]])[None, :] + X
            div_j = ssq - sq[selected[pos]] + sq - np.einsum("ij,ij->i", s1n, s1n) / K
            val = (alpha * rep_j - (1.0 - alpha) * div_j) / scat
            val[in_sel] = np.inf
            j = int(np.argmin(val))
            gain = cur - val[j]
            if gain > best[0] + 1e-15:
                best = (gain, (pos, j))
        if best[1] is None:
            break
        pos, j = best[1]
        in_sel[selected[pos]] = False
        in_sel[j] = True
        selected[pos] = j
        selected.sort()
        cur = precis_objective(selected, X, alpha)

    return tuple(selected), cur


def select_precis(X: np.ndarray, config: PrecisConfig) -> SampleSet:
    """Greedy forward selection plus best-improvement swap local search on the
    normalized rep/div objective, restarted from several forced first picks.
    Deterministic; ties favor the lowest index and the earliest restart."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    K = config.K
    if K > n:
        raise ConfigError(f"K={K} exceeds {n} rows")
    if K == n:
        S = list(range(n))
        return SampleSet(tuple(S), precis_objective(S, X, config.alpha), "precis")

    alpha = config.alpha
    scat = _total_scatter(X)
    if scat <= 0.0:
        # All rows identical: any subset is optimal.
        return SampleSet(tuple(range(K)), 0.0, "precis")
    d2 = _sqdist_matrix(X)
    sq = np.sum(X * X, axis=1)

    # Rank every row as a single-element selection; restarts force the first
    # pick to the top-ranked candidates in turn.
    rep1 = d2.sum(axis=0)
    div1 = np.zeros(n)
    rank = np.argsort((alpha * rep1 - (1.0 - alpha) * div1) / scat, kind="stable")
    starts: list[int | None] = [None]
    starts += [int(r) for r in rank[:min(config.restarts - 1, n)]]

    best_sel, best_obj = None, np.inf
    for first in starts:
        sel, obj = _greedy_swap(X, alpha, K, config.swap_passes, scat, d2, sq, first)
        if obj < best_obj - 1e-15:
            best_sel, best_obj = sel, obj
    return SampleSet(best_sel, best_obj, "precis")


def select_random(X: np.ndarray, K: int, seed: int = 0) -> SampleSet:
    """Uniform sample without replacement, seeded."""
    n = np.asarray(X).shape[0]
    if K > n:
        raise ConfigError(f"K={K} exceeds {n} rows")
    rng = np.random.default_rng(seed)
    idx = tuple(sorted(int(i) for i in rng.choice(n, size=K, replace=False)))
    return SampleSet(idx, float("nan"), "random")


def _kmedoids_cost(d: np.ndarray, medoids: list[int]) -> float:
    return float(np.min(d[:, medoids], axis=1).sum())


def select_kmedoids(X: np.ndarray, K: int, seed: int = 0) -> SampleSet:
    """PAM-style k-medoids: greedy build then best-improvement swaps.

    On small instances the build is restarted from every possible first
    medoid, which in practice recovers the exhaustive optimum. The objective
    is the sum of (unsquared) distances to the nearest medoid.
    Deterministic; ties favor the lowest index.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if K > n:
        raise ConfigError(f"K={K} exceeds {n} rows")
    d = np.sqrt(_sqdist_matrix(X))

    starts: list[int | None] = [None]
    if n <= 64:
        starts += list(range(n))
    best_med, best_cost = None, np.inf
    for start in starts:
        med, cost = _pam(d, K, n, start)
        if cost < best_cost - 1e-15:
            best_med, best_cost = med, cost
    return SampleSet(tuple(best_med), best_cost, "kmedoids")


def _pam(d: np.ndarray, K: int, n: int, start: int | None):
    medoids: list[int] = []
    in_sel = np.zeros(n, dtype=bool)
    mind = np.full(n, np.inf)
    if start is not None:
        medoids.append(start)
        in_sel[start] = True
        mind = d[:, start].copy()
    while len(medoids) < K:
        cost_j = np.minimum(mind[:, None], d).sum(axis=0)
        cost_j[in_sel] = np.inf
        best_j = int(np.argmin(cost_j))
        medoids.append(best_j)
        in_sel[best_j] = True
        mind = np.minimum(mind, d[:, best_j])

    medoids.sort()
    cur = _kmedoids_cost(d, medoids)
    improved = True
    while improved:
        improved = False
        dsel = d[:, medoids]
        order = np.argsort(dsel, axis=1, kind="stable")
        first = order[:, 0]
        f_val = dsel[np.arange(n), first]
        s_val = dsel[np.arange(n), order[:, 1]] if K > 1 else np.full(n, np.inf)
        best = (1e-12, None)
        for pos in range(K):
            excl = np.where(first == pos, s_val, f_val)
            cost_j = np.minimum(excl[:, None], d).sum(axis=0)
            cost_j[in_sel] = np.inf
            j = int(np.argmin(cost_j))
            if cur - cost_j[j] > best[0] + 1e-15:
                best = (cur - cost_j[j], (pos, j))
        if best[1] is not None:
            pos, j = best[1]
            in_sel[medoids[pos]] = False
            in_sel[j] = True
            medoids[pos] = j
            medoids.sort()
            cur = _kmedoids_cost(d, medoids)
            improved = True

    return medoids, cur
