"""Sequential inverse-binomial pooled testing: stop after n positive pools and
estimate prevalence from the number of pools it took."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Label
from .errors import ConfigError, SessionError


def estimate_prevalence(n: int, T: int, s: int) -> float:
    """Maximum-likelihood prevalence from n positive pools out of T, pool size s:
    p_hat = 1 - (1 - n/T)^(1/s)."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    if n < 0 or n > T:
        raise ConfigError(f"need 0 <= n <= T, got n={n} T={T}")
    if s < 1:
        raise ConfigError("pool size must be >= 1")
    return 1.0 - (1.0 - n / T) ** (1.0 / s)


def false_negative_count(p_hat: float, complement_size: int) -> int:
    """Estimated missed objects: prevalence times complement size, rounded."""
    if not (0.0 <= p_hat <= 1.0):
        raise ConfigError("prevalence must be in [0, 1]")
    return int(np.floor(p_hat * complement_size + 0.5))


@dataclass(frozen=True)
class GroupTestConfig:
    s: int = 2            # pool size
    n: int = 2            # target positive pools
    seed: int = 0
    max_pools: int | None = None  # None: limited only by the patch supply

    def __post_init__(self):
        if self.s < 1 or self.n < 1:
            raise ConfigError("s and n must be >= 1")
        if self.max_pools is not None and self.max_pools < self.n:
            raise ConfigError("max_pools must allow at least n pools")


@dataclass(frozen=True)
class PrevalenceEstimate:
    p_hat: float
    T: int
    n: int
    s: int
    exhausted: bool  # stopped by supply/cap before reaching n positives


@dataclass
class GroupTestState:
    T: int = 0
    positives: int = 0
    consumed: list[int] = field(default_factory=list)
    stopped: bool = False
    exhausted: bool = False


class GroupTestRun:
    """One sequential run over a fixed supply of patch ids.

    Patches are consumed without replacement; the run stops when `n` positive
    pools are found, the pool cap is hit, or the supply cannot fill a pool.
    """

    def __init__(self, n_patches: int, config: GroupTestConfig = GroupTestConfig()):
        self.config = config
        self.n_patches = n_patches
        self.state = GroupTestState()
        self._rng = np.random.default_rng(config.seed)
        self._available = list(range(n_patches))
        self._pending: tuple[int, ...] | None = None

    @property
    def stopped(self) -> bool:
        return self.state.stopped

    def next_pool(self) -> tuple[int, ...] | None:
        """Draw the next pool of s distinct unconsumed patch ids, or mark the
        run exhausted and return None when the supply cannot fill one.

        The same pool is returned again until its answer is recorded.
        """
        if self.state.stopped:
            raise SessionError("group test already stopped")
        if self._pending is not None:
            return self._pending
        s = self.config.s
        if len(self._available) < s:
            self.state.stopped = True
            self.state.exhausted = True
            return None
        pick = self._rng.choice(len(self._available), size=s, replace=False)
        pool = tuple(sorted(self._available[i] for i in pick))
        for pid in pool:
            self._available.remove(pid)
        self.state.consumed.extend(pool)
        self._pending = pool
        return pool

    def record_answer(self, answer: Label):
        if self.state.stopped:
            raise SessionError("answer recorded after the group test stopped")
        if self._pending is None:
            raise SessionError("no pool outstanding")
        self._pending = None
        self.state.T += 1
        if answer.value == 1:
            self.state.positives += 1
        cfg = self.config
        if self.state.positives >= cfg.n:
            self.state.stopped = True
        elif cfg.max_pools is not None and self.state.T >= cfg.max_pools:
            self.state.stopped = True
            self.state.exhausted = True

    def estimate(self) -> PrevalenceEstimate:
        """Prevalence from the pools answered so far. With zero pools the
        estimate is 0 and flagged exhausted."""
        st = self.state
        if st.T == 0:
            return PrevalenceEstimate(0.0, 0, self.config.n, self.config.s, True)
        p = estimate_prevalence(st.positives, st.T, self.config.s)
        exhausted = st.exhausted or (st.stopped and st.positives < self.config.n)
        return PrevalenceEstimate(p, st.T, self.config.n, self.config.s, exhausted)
