"""Learn a linear transform that separates object-like from background-like
patches (Mahalanobis metric with hinge constraints, PSD-projected gradient)."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .features import FeatureMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProxySets:
    """Stand-ins for labeled object / background rows of a feature matrix."""

    o_t: tuple[int, ...]  # high-confidence detections
    o_f: tuple[int, ...]  # complement patches at a low threshold

    def __post_init__(self):
        if not self.o_t or not self.o_f:
            raise DataError("proxy sets must both be nonempty; adjust gamma_H/gamma_L")
        if set(self.o_t) & set(self.o_f):
            raise DataError("proxy sets must be disjoint")


@dataclass(frozen=True)
class MetricConfig:
    u: float | None = None      # similarity upper bound; None -> 5th pct of pair distances
    ell: float | None = None    # dissimilarity lower bound; None -> 95th pct
    lam: float = 1.0            # hinge weight
    max_iter: int = 200
    step_size: float = 1.0
    pair_cap: int = 2000        # per constraint kind
    pca_dim: int = 128
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.u is not None and self.ell is not None and not (0 < self.u < self.ell):
            raise ConfigError("need 0 < u < ell")


@dataclass
class Transform:
    """Learned metric stored via its PSD Gram form M (distance^2 = d^T M d),
    with an optional PCA stage applied before the metric."""

    M: np.ndarray
    pca_mean: np.ndarray | None = None
    pca_basis: np.ndarray | None = None  # (d, k), columns orthonormal
    converged: bool = True
    min_eig_history: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)

    MAGIC = b"TDRIVETF1"

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if not np.all(np.isfinite(M)) or not np.allclose(M, M.T):
            raise DataError("M must be finite and symmetric")
        self.M = (M + M.T) / 2.0

    @property
    def components(self) -> np.ndarray:
        """Symmetric square root T with M = T^T T."""
        w, V = np.linalg.eigh(self.M)
        w = np.clip(w, 0.0, None)
        return (V * np.sqrt(w)) @ V.T

    def reduce(self, X: np.ndarray) -> np.ndarray:
        if self.pca_basis is None:
            return X
        return (X - self.pca_mean) @ self.pca_basis

    def apply(self, X: np.ndarray) -> np.ndarray:
        Z = self.reduce(np.atleast_2d(X))
        if Z.shape[1] != self.M.shape[0]:
            raise DataError(f"dimension mismatch: rows have {Z.shape[1]}, metric has {self.M.shape[0]}")
        return Z @ self.components.T

    def save(self, path: str | Path):
        with open(path, "wb") as f:
            f.write(self.MAGIC)
            has_pca = self.pca_basis is not None
            d = self.pca_basis.shape[0] if has_pca else self.M.shape[0]
            k = self.M.shape[0]
            f.write(struct.pack("<qqb?", d, k, int(self.converged), has_pca))
            if has_pca:
                f.write(self.pca_mean.astype("<f8").tobytes())
                f.write(self.pca_basis.astype("<f8").tobytes())
            f.write(self.M.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Transform":
        with open(path, "rb") as f:
            if f.read(len(cls.MAGIC)) != cls.MAGIC:
                raise DataError(f"{path}: not a transform file")
            d, k, converged, has_pca = struct.unpack("<qqb?", f.read(18))
            pca_mean = pca_basis = None
            if has_pca:
                pca_mean = np.frombuffer(f.read(8 * d), dtype="<f8").copy()
                pca_basis = np.frombuffer(f.read(8 * d * k), dtype="<f8").reshape(d, k).copy()
            M = np.frombuffer(f.read(8 * k * k), dtype="<f8").reshape(k, k).copy()
        return cls(M, pca_mean, pca_basis, converged=bool(converged))


def build_proxy_sets(det_features: FeatureMatrix, det_scores: np.ndarray, gamma_h: float,
                     complement_features: FeatureMatrix, cap: int = 500,
                     seed: int = 0) -> tuple[np.ndarray, ProxySets]:
    """Stack detection and complement rows and mark the proxy index sets.

    O_T = detections scoring >= gamma_h; O_F = a seeded uniform subsample
    (at most `cap`) of the complement rows.
    """
    det_scores = np.asarray(det_scores, dtype=float)
    if det_scores.shape[0] != len(det_features):
        raise DataError("scores must align with detection features")
    o_t = np.flatnonzero(det_scores >= gamma_h)
    if o_t.size == 0:
        raise DataError("gamma_H leaves O_T empty; lower it")
    if o_t.size == len(det_features):
        log.warning("gamma_H is below every score; O_T is the entire detection set")
    n_f = len(complement_features)
    if n_f == 0:
        raise DataError("complement is empty; raise gamma_L or check tiling")
    rng = np.random.default_rng(seed)
    if n_f > cap:
        f_idx = np.sort(rng.choice(n_f, size=cap, replace=False))
    else:
        f_idx = np.arange(n_f)
    X = np.vstack([det_features.X[o_t], complement_features.X[f_idx]])
    proxy = ProxySets(tuple(range(o_t.size)),
                      tuple(range(o_t.size, o_t.size + f_idx.size)))
    return X, proxy


def _draw_pairs(rng: np.random.Generator, o_t: np.ndarray, o_f: np.ndarray,
                cap: int) -> tuple[np.ndarray, np.ndarray]:
    """Similar pairs within O_T and dissimilar pairs across O_T x O_F."""
    nt = o_t.size
    n_sim = min(cap, nt * (nt - 1) // 2)
    if n_sim == nt * (nt - 1) // 2:
        sim = np.array([(o_t[i], o_t[j]) for i in range(nt) for j in range(i + 1, nt)])
    else:
        i = rng.integers(0, nt, size=2 * cap)
        j = rng.integers(0, nt, size=2 * cap)
        keep = i < j
        sim = np.unique(np.stack([o_t[i[keep]], o_t[j[keep]]], axis=1), axis=0)[:cap]
    n_dis = min(cap, nt * o_f.size)
    if n_dis == nt * o_f.size:
        dis = np.array([(a, b) for a in o_t for b in o_f])
    else:
        a = rng.choice(o_t, size=cap)
        b = rng.choice(o_f, size=cap)
        dis = np.stack([a, b], axis=1)
    # Tiny proxy sets can yield no pairs at all; keep the (n, 2) shape.
    sim = sim.reshape(-1, 2).astype(int)
    dis = dis.reshape(-1, 2).astype(int)
    return sim, dis


def _pair_dists(Z: np.ndarray, pairs: np.ndarray, M: np.ndarray) -> np.ndarray:
    d = Z[pairs[:, 0]] - Z[pairs[:, 1]]
    q = np.einsum("ni,ij,nj->n", d, M, d)
    return np.sqrt(np.clip(q, 0.0, None))


def _psd_project(M: np.ndarray) -> tuple[np.ndarray, float]:
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    min_eig = float(w.min())
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T, min_eig


def learn_transform(X: np.ndarray, proxy: ProxySets,
                    config: MetricConfig = MetricConfig()) -> Transform:
    """Fit the metric M minimizing ||M - I||_F^2 + lambda * sum of hinge losses
    over sampled similar/dissimilar pairs, projected to the PSD cone each step.

    Rows are first reduced to `config.pca_dim` principal components (computed
    on the pooled proxy rows) when the descriptor dimension is larger.
    """
    X = np.asarray(X, dtype=float)
    o_t = np.asarray(proxy.o_t)
    o_f = np.asarray(proxy.o_f)
    rng = np.random.default_rng(config.seed)

    pca_mean = pca_basis = None
    Z = X
    if X.shape[1] > config.pca_dim:
        rows = X[np.concatenate([o_t, o_f])]
        pca_mean = rows.mean(axis=0)
        _, s, Vt = np.linalg.svd(rows - pca_mean, full_matrices=False)
        k = min(config.pca_dim, int(np.sum(s > 1e-10 * s[0])) or 1)
        pca_basis = Vt[:k].T
        Z = (X - pca_mean) @ pca_basis

    dim = Z.shape[1]
    sim, dis = _draw_pairs(rng, o_t, o_f, config.pair_cap)

    I = np.eye(dim)
    d0 = np.concatenate([_pair_dists(Z, sim, I), _pair_dists(Z, dis, I)])
    if d0.size == 0:
        # Not enough proxies to form any constraint; keep the identity metric.
        log.warning("no metric constraints available; using identity metric")
        return Transform(I, pca_mean, pca_basis, converged=True,
                         min_eig_history=[], objective_history=[0.0])
    u = config.u if config.u is not None else float(np.percentile(d0, 5))
    ell = config.ell if config.ell is not None else float(np.percentile(d0, 95))
    if not (0 < u < ell):
        # Degenerate distance spread; fall back to a fixed split.
        mid = max(float(np.median(d0)), 1e-6)
        u, ell = 0.5 * mid, 1.5 * mid

    lam = config.lam

    def objective(M):
        ds = _pair_dists(Z, sim, M)
        dd = _pair_dists(Z, dis, M)
        hinge = np.maximum(0.0, ds - u).sum() + np.maximum(0.0, ell - dd).sum()
        return float(np.sum((M - I) ** 2) + lam * hinge), ds, dd

    def gradient(M, ds, dd):
        G = 2.0 * (M - I)
        act_s = ds > u
        if act_s.any():
            v = Z[sim[act_s, 0]] - Z[sim[act_s, 1]]
            G += lam * np.einsum("n,ni,nj->ij", 0.5 / np.maximum(ds[act_s], 1e-12), v, v)
        act_d = dd < ell
        if act_d.any():
            v = Z[dis[act_d, 0]] - Z[dis[act_d, 1]]
            G -= lam * np.einsum("n,ni,nj->ij", 0.5 / np.maximum(dd[act_d], 1e-12), v, v)
        return G

    M = I.copy()
    obj, ds, dd = objective(M)
    step = config.step_size
    min_eigs: list[float] = []
    objs = [obj]
    converged = False
    for _ in range(config.max_iter):
        G = gradient(M, ds, dd)
        gnorm = np.linalg.norm(G)
        if gnorm < config.tol:
            converged = True
            break
        accepted = False
        while step > 1e-12:
            cand, min_eig = _psd_project(M - step * G)
            cobj, cds, cdd = objective(cand)
            if cobj <= obj:
                M, obj, ds, dd = cand, cobj, cds, cdd
                min_eigs.append(min_eig)
                objs.append(obj)
                accepted = True
                step *= 1.5
                break
            step *= 0.5
        if not accepted:
            # No further descent direction at any step size.
            converged = gnorm < 1e-3 * (1 + abs(obj))
            break
        if len(objs) > 2 and objs[-2] - objs[-1] < config.tol * (1 + abs(objs[-1])):
            converged = True
            break
    if not converged:
        log.warning("metric learning did not converge in %d iterations", config.max_iter)
    return Transform(M, pca_mean, pca_basis, converged=converged,
                     min_eig_history=min_eigs, objective_history=objs)


def apply_transform(transform: Transform, features: FeatureMatrix) -> FeatureMatrix:
    """Map descriptor rows through the learned transform (PCA then T = M^1/2)."""
    return FeatureMatrix(transform.apply(features.X), list(features.provenance))
