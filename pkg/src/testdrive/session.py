"""Orchestrate a full test-drive: per-threshold precision sampling, pooled
group testing for recall, query sequencing, estimates, and persistence."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sampling
from .complement import ComplementSet, average_box, build_complement
from .core import Detection, Label, build_sweep, iou, sort_detections
from .errors import ConfigError, DataError, SessionError
from .features import FeatureMatrix, HogConfig, PATCH_H, PATCH_W, featurize
from .grouptest import GroupTestConfig, GroupTestRun, false_negative_count
from .homogenize import MetricConfig, Transform, apply_transform, build_proxy_sets, learn_transform
from .ingest import DatasetManifest, GroundTruthBox, extract_patch, load_image
from .pooling import pool_average, pool_gradient

log = logging.getLogger(__name__)

REPORT_HEADER = ["gamma", "N", "K", "fp_hat", "p_hat", "T", "positives",
                 "beta_hat", "fn_hat", "recall_hat", "flags"]


@dataclass
class SessionConfig:
    gammas: list[float] | None = None     # explicit sweep; None -> quantiles
    quantile_count: int = 5
    sample_fraction: float = 0.10
    k_min: int = 8
    k_max: int = 500
    sampler: str = "precis"               # precis | random | kmedoids
    alpha: float = 0.5
    swap_passes: int = 50
    pool_size: int = 2
    target_positives: int = 2
    max_pools: int | None = None
    gamma_h: float | None = None          # None -> score percentile below
    gamma_l: float | None = None
    gamma_h_pct: float = 90.0
    gamma_l_pct: float = 10.0
    exclusion_threshold: float = 0.2
    proxy_cap: int = 500
    lam: float = 1.0
    pca_dim: int = 128
    metric_max_iter: int = 200
    pooling_method: str = "average"       # average | gradient
    transform_path: str | None = None
    seed: int = 0
    oracle: str = "human"                 # human | simulated
    iou_precision: float = 0.5
    iou_pool: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.sample_fraction <= 1.0):
            raise ConfigError("sample_fraction must be in (0, 1]")
        if self.sampler not in ("precis", "random", "kmedoids"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.oracle not in ("human", "simulated"):
            raise ConfigError(f"unknown oracle mode {self.oracle!r}")
        if self.pooling_method not in ("average", "gradient"):
            raise ConfigError(f"unknown pooling method {self.pooling_method!r}")

    def to_text(self, extra: dict | None = None) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "gammas":
                v = ",".join(f"{g:.12g}" for g in v)
            lines.append(f"{f.name} = {v}")
        for k, v in (extra or {}).items():
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> tuple["SessionConfig", dict]:
        """Parse a key = value snapshot; unknown keys come back as extras."""
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict = {}
        extra: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in known:
                extra[key] = val
                continue
            if key == "gammas":
                kwargs[key] = [float(v) for v in val.split(",") if v]
            elif val == "None":
                kwargs[key] = None
            else:
                target = str(known[key].type)
                if "int" in target:
                    kwargs[key] = int(val)
                elif "float" in target:
                    kwargs[key] = float(val)
                else:
                    kwargs[key] = val
        return cls(**kwargs), extra


@dataclass(frozen=True)
class Query:
    id: str
    kind: str          # "precision-sample" | "recall-pool"
    gamma: float
    payload: tuple     # precision: (detection index,); recall: complement patch ids


@dataclass
class EstimateRecord:
    gamma: float
    n_detections: int
    k: int                     # precision samples answered so far
    fp_hat: int
    p_hat: float               # nan until a sample is answered
    t_pools: int
    positives: int
    beta_hat: float
    fn_hat: int
    recall_hat: float          # nan when undefined
    flags: tuple[str, ...]

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["flags"] = list(self.flags)
        return d


def recall_estimate(p_hat: float, n_detections: int, fn_count: int) -> float:
    """Recall from estimated precision, detection count, and missed-object
    count: (P*N) / (P*N + FN). Returns nan for the 0/0 case."""
    if not (0.0 <= p_hat <= 1.0):
        raise ConfigError("precision must be in [0, 1]")
    if n_detections < 0 or fn_count < 0:
        raise ConfigError("counts must be nonnegative")
    num = p_hat * n_detections
    denom = num + fn_count
    if denom == 0.0:
        return float("nan")
    return num / denom


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


@dataclass
class _GammaState:
    index: int
    gamma: float
    det_indices: tuple[int, ...]
    k_target: int
    sample_rows: tuple[int, ...]        # positions within det_indices
    precision_queries: list[Query]
    cset: ComplementSet
    run: GroupTestRun
    answers: dict[str, Label] = field(default_factory=dict)
    pool_queries: list[Query] = field(default_factory=list)

    @property
    def precision_done(self) -> bool:
        return all(q.id in self.answers for q in self.precision_queries)

    @property
    def complete(self) -> bool:
        return self.precision_done and self.run.stopped


class Session:
    """One estimation run over a dataset + detections, driven by answers."""

    def __init__(self, manifest: DatasetManifest, detections: list[Detection],
                 config: SessionConfig, groundtruth: list[GroundTruthBox] | None = None,
                 out_dir: str | Path | None = None, sources: dict | None = None):
        if not detections:
            raise DataError("no detections")
        if config.oracle == "simulated" and groundtruth is None:
            raise ConfigError("simulated oracle requires ground truth")
        self.manifest = manifest
        self.detections = sort_detections(detections)
        self.config = config
        self.groundtruth = groundtruth
        self.sources = dict(sources or {})
        self.out_dir = Path(out_dir) if out_dir else None
        self._images: dict[str, np.ndarray] = {}
        self._queries: dict[str, Query] = {}
        self._log_fh = None

        self.sweep = build_sweep(self.detections, gammas=config.gammas,
                                 quantile_count=config.quantile_count)
        self._scores = np.array([d.score for d in self.detections])
        self._hog = HogConfig()
        self._prepare()
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            snap = self.config.to_text(extra=self.sources)
            (self.out_dir / "config").write_text(snap)
            self._log_fh = open(self.out_dir / "answers.log", "a")

    # -- construction ------------------------------------------------------

    def _image(self, image_id: str) -> np.ndarray:
        img = self._images.get(image_id)
        if img is None:
            img = load_image(self.manifest.entry(image_id))
            self._images[image_id] = img
        return img

    def _det_patch(self, det: Detection, w: int = PATCH_W, h: int = PATCH_H):
        return extract_patch(self._image(det.image_id), det.box, w, h, det.image_id)

    def _featurize_detections(self) -> FeatureMatrix:
        patches = [self._det_patch(d) for d in self.detections]
        return featurize(patches, self._hog)

    def _prepare(self):
        cfg = self.config
        gamma_h = cfg.gamma_h if cfg.gamma_h is not None else float(
            np.percentile(self._scores, cfg.gamma_h_pct))
        gamma_l = cfg.gamma_l if cfg.gamma_l is not None else float(
            np.percentile(self._scores, cfg.gamma_l_pct))
        self.gamma_h, self.gamma_l = gamma_h, gamma_l

        self.det_features = self._featurize_detections()
        self.transform = self._obtain_transform(gamma_h, gamma_l)

        self._gamma_states: dict[float, _GammaState] = {}
        for gi, (gamma, det_idx) in enumerate(zip(self.sweep.gammas, self.sweep.index_sets)):
            self._gamma_states[gamma] = self._init_gamma(gi, gamma, det_idx)

    def _obtain_transform(self, gamma_h: float, gamma_l: float) -> Transform:
        cfg = self.config
        if cfg.transform_path and Path(cfg.transform_path).exists():
            return Transform.load(cfg.transform_path)
        dets_l = [self.detections[i] for i in range(len(self.detections))
                  if self.detections[i].score >= gamma_l]
        tile = average_box(dets_l)
        cset = build_complement(self.manifest, dets_l, tile, cfg.exclusion_threshold)
        if len(cset) == 0:
            raise DataError("complement at gamma_L is empty; cannot build proxy sets")
        rng = np.random.default_rng(_derived_seed(cfg.seed, 101))
        n_pick = min(cfg.proxy_cap, len(cset))
        picks = np.sort(rng.choice(len(cset), size=n_pick, replace=False))
        comp_patches = [extract_patch(self._image(cset.patches[i][0]), cset.patches[i][1],
                                      PATCH_W, PATCH_H, cset.patches[i][0]) for i in picks]
        comp_features = featurize(comp_patches, self._hog)
        X, proxy = build_proxy_sets(self.det_features, self._scores, gamma_h,
                                    comp_features, cap=cfg.proxy_cap,
                                    seed=_derived_seed(cfg.seed, 102))
        mc = MetricConfig(lam=cfg.lam, pca_dim=cfg.pca_dim, max_iter=cfg.metric_max_iter,
                          seed=_derived_seed(cfg.seed, 103))
        transform = learn_transform(X, proxy, mc)
        if cfg.transform_path:
            transform.save(cfg.transform_path)
        return transform

    def _init_gamma(self, gi: int, gamma: float, det_idx: tuple[int, ...]) -> _GammaState:
        cfg = self.config
        n = len(det_idx)
        k = min(n, min(cfg.k_max, max(cfg.k_min, math.ceil(cfg.sample_fraction * n))))
        Z = self.transform.apply(self.det_features.X[list(det_idx)])
        seed = _derived_seed(cfg.seed, 200, gi)
        if cfg.sampler == "precis":
            ss = sampling.select_precis(Z, sampling.PrecisConfig(
                alpha=cfg.alpha, K=k, swap_passes=cfg.swap_passes, seed=seed))
        elif cfg.sampler == "random":
            ss = sampling.select_random(Z, k, seed)
        else:
            ss = sampling.select_kmedoids(Z, k, seed)
        queries = [Query(f"g{gi}-p{j}", "precision-sample", gamma, (det_idx[row],))
                   for j, row in enumerate(ss.indices)]
        for q in queries:
            self._queries[q.id] = q

        dets_g = [self.detections[i] for i in det_idx]
        tile = average_box(dets_g)
        cset = build_complement(self.manifest, dets_g, tile, cfg.exclusion_threshold)
        gt_cfg = GroupTestConfig(s=cfg.pool_size, n=cfg.target_positives,
                                 seed=_derived_seed(cfg.seed, 300, gi),
                                 max_pools=cfg.max_pools)
        run = GroupTestRun(len(cset), gt_cfg)
        return _GammaState(gi, gamma, det_idx, k, ss.indices, queries, cset, run)

    # -- query flow --------------------------------------------------------

    def _state(self, gamma: float | None) -> _GammaState:
        if gamma is None:
            for g in self.sweep.gammas:
                if not self._gamma_states[g].complete:
                    return self._gamma_states[g]
            return self._gamma_states[self.sweep.gammas[-1]]
        gs = self._gamma_states.get(float(gamma))
        if gs is None:
            raise SessionError(f"gamma {gamma} is not part of this session")
        return gs

    def next_query(self, gamma: float | None = None) -> Query | None:
        """Next unanswered query for a threshold: all precision samples first,
        then recall pools generated lazily until the group test stops."""
        gs = self._state(gamma)
        for q in gs.precision_queries:
            if q.id not in gs.answers:
                return q
        if gs.run.stopped:
            return None
        if gs.pool_queries and gs.pool_queries[-1].id not in gs.answers:
            return gs.pool_queries[-1]
        pool = gs.run.next_pool()
        if pool is None:
            return None
        q = Query(f"g{gs.index}-r{len(gs.pool_queries)}", "recall-pool", gs.gamma, pool)
        gs.pool_queries.append(q)
        self._queries[q.id] = q
        return q

    def submit_answer(self, query_id: str, label: Label) -> EstimateRecord:
        """Record one answer (append-only log first) and return the refreshed
        estimate for the query's threshold."""
        q = self._queries.get(query_id)
        if q is None:
            raise SessionError(f"unknown query id {query_id!r}")
        gs = self._gamma_states[q.gamma]
        if query_id in gs.answers:
            raise SessionError(f"query {query_id!r} already answered")
        if q.kind == "recall-pool":
            if not gs.pool_queries or gs.pool_queries[-1].id != query_id:
                raise SessionError(f"pool query {query_id!r} is not outstanding")
        self._log(q, label)
        gs.answers[query_id] = label
        if q.kind == "recall-pool":
            gs.run.record_answer(label)
        return self.estimate(q.gamma)

    def _log(self, q: Query, label: Label):
        if self._log_fh is None:
            return
        rec = {"query_id": q.id, "kind": q.kind, "gamma": q.gamma,
               "label": label.value, "ts": time.time(), "source": label.source}
        self._log_fh.write(json.dumps(rec) + "\n")
        self._log_fh.flush()

    # -- estimates ---------------------------------------------------------

    def estimate(self, gamma: float) -> EstimateRecord:
        gs = self._state(gamma)
        answered = [gs.answers[q.id] for q in gs.precision_queries if q.id in gs.answers]
        k = len(answered)
        fp = sum(1 for a in answered if a.value == 0)
        p_hat = 1.0 - fp / k if k else float("nan")
        est = gs.run.estimate()
        fn = false_negative_count(est.p_hat, len(gs.cset))
        flags: list[str] = []
        if not gs.precision_done:
            flags.append("precision-pending")
        if not gs.run.stopped:
            flags.append("recall-pending")
        if gs.run.stopped and est.exhausted:
            flags.append("low-confidence")
        if k:
            r_hat = recall_estimate(p_hat, len(gs.det_indices), fn)
            if math.isnan(r_hat):
                flags.append("undefined-recall")
        else:
            r_hat = float("nan")
        return EstimateRecord(gs.gamma, len(gs.det_indices), k, fp, p_hat,
                              est.T, gs.run.state.positives, est.p_hat, fn, r_hat,
                              tuple(flags))

    def estimates(self) -> list[EstimateRecord]:
        return [self.estimate(g) for g in self.sweep.gammas]

    @property
    def complete(self) -> bool:
        return all(gs.complete for gs in self._gamma_states.values())

    # -- payload rendering -------------------------------------------------

    def render_query(self, q: Query) -> np.ndarray:
        """Pixels the human should look at for this query."""
        if q.kind == "precision-sample":
            det = self.detections[q.payload[0]]
            w = max(1, int(round(det.box.w)))
            h = max(1, int(round(det.box.h)))
            return self._det_patch(det, w, h).pixels
        gs = self._gamma_states[q.gamma]
        tw, th = gs.cset.tile
        tiles = []
        members = []
        for pid in q.payload:
            image_id, box = gs.cset.patches[pid]
            tiles.append(extract_patch(self._image(image_id), box, tw, th, image_id).pixels)
            members.append((image_id, box))
        if self.config.pooling_method == "gradient":
            return pool_gradient(tiles, tuple(members)).pixels
        return pool_average(tiles, tuple(members)).pixels

    # -- oracle ------------------------------------------------------------

    def simulated_oracle(self, q: Query) -> Label:
        """Ground-truth answer: a precision sample is positive when its source
        box overlaps any true box at IoU >= iou_precision (duplicates count as
        true); a pool is positive when any member tile reaches iou_pool."""
        if self.groundtruth is None:
            raise SessionError("simulated oracle needs ground truth")
        if q.kind == "precision-sample":
            det = self.detections[q.payload[0]]
            hit = any(iou(det.box, g.box) >= self.config.iou_precision
                      for g in self.groundtruth if g.image_id == det.image_id)
            return Label(int(hit), "simulated")
        gs = self._gamma_states[q.gamma]
        for pid in q.payload:
            image_id, box = gs.cset.patches[pid]
            if any(iou(box, g.box) >= self.config.iou_pool
                   for g in self.groundtruth if g.image_id == image_id):
                return Label(1, "simulated")
        return Label(0, "simulated")

    def run_simulated(self):
        """Drive every threshold to completion with the simulated oracle."""
        if self.config.oracle != "simulated":
            raise ConfigError("session is not in simulated-oracle mode")
        for gamma in self.sweep.gammas:
            while (q := self.next_query(gamma)) is not None:
                self.submit_answer(q.id, self.simulated_oracle(q))

    # -- ground-truth reference values --------------------------------------

    def true_pr(self, gamma: float) -> tuple[float, float]:
        """Reference precision/recall at gamma using standard greedy IoU >= 0.5
        matching (duplicate detections on one object count as false)."""
        if self.groundtruth is None:
            raise SessionError("no ground truth available")
        gs = self._state(gamma)
        matched: set[int] = set()
        tp = 0
        for i in gs.det_indices:  # already ordered by image, score desc
            det = self.detections[i]
            best_j, best_iou = -1, 0.0
            for j, g in enumerate(self.groundtruth):
                if j in matched or g.image_id != det.image_id:
                    continue
                v = iou(det.box, g.box)
                if v > best_iou:
                    best_iou, best_j = v, j
            if best_j >= 0 and best_iou >= self.config.iou_precision:
                matched.add(best_j)
                tp += 1
        n = len(gs.det_indices)
        p = tp / n if n else float("nan")
        r = tp / len(self.groundtruth) if self.groundtruth else float("nan")
        return p, r

    # -- reporting -----------------------------------------------------------

    def export_report(self, path: str | Path | None = None, plot: bool = False) -> Path:
        """Write report.csv (one row per complete threshold); optionally an SVG
        of the estimate curves next to it."""
        done = [g for g in self.sweep.gammas if self._gamma_states[g].complete]
        if not done:
            raise SessionError("no complete gamma to report")
        if path is None:
            if self.out_dir is None:
                raise SessionError("no output location for the report")
            path = self.out_dir / "report.csv"
        path = Path(path)
        with_truth = self.groundtruth is not None
        header = REPORT_HEADER + (["true_p", "true_r"] if with_truth else [])
        lines = [",".join(header)]
        for g in done:
            r = self.estimate(g)
            row = [_fmt(r.gamma), str(r.n_detections), str(r.k), str(r.fp_hat),
                   _fmt(r.p_hat), str(r.t_pools), str(r.positives), _fmt(r.beta_hat),
                   str(r.fn_hat), _fmt(r.recall_hat), ";".join(r.flags)]
            if with_truth:
                tp, tr = self.true_pr(g)
                row += [_fmt(tp), _fmt(tr)]
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")
        if plot:
            _plot_report(self, done, path.with_suffix(".svg"))
        return path

    def close(self):
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def _plot_report(session: Session, gammas: list[float], path: Path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    recs = [session.estimate(g) for g in gammas]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(gammas, [r.p_hat for r in recs], "o-", label="estimated precision")
    ax.plot(gammas, [r.recall_hat for r in recs], "s-", label="estimated recall")
    if session.groundtruth is not None:
        truths = [session.true_pr(g) for g in gammas]
        ax.plot(gammas, [t[0] for t in truths], "o--", label="true precision")
        ax.plot(gammas, [t[1] for t in truths], "s--", label="true recall")
    ax.set_xlabel("detection threshold")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def start_session(manifest: DatasetManifest, detections: list[Detection],
                  config: SessionConfig, groundtruth=None, out_dir=None,
                  sources=None) -> Session:
    return Session(manifest, detections, config, groundtruth, out_dir, sources)


def replay_session(session_dir: str | Path, manifest: DatasetManifest,
                   detections: list[Detection], groundtruth=None) -> Session:
    """Rebuild a session from its directory and answer log.

    A corrupt final line is treated as a crash artifact (warn + stop); a
    corrupt line earlier in the log is an error.
    """
    session_dir = Path(session_dir)
    config, _ = SessionConfig.from_text((session_dir / "config").read_text())
    session = Session(manifest, detections, config, groundtruth, out_dir=None)
    log_path = session_dir / "answers.log"
    if not log_path.exists():
        return session
    raw_lines = log_path.read_text().splitlines()
    for i, line in enumerate(raw_lines):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            qid = rec["query_id"]
            label = Label(int(rec["label"]), rec.get("source", "human"))
            gamma = float(rec["gamma"])
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
            if i == len(raw_lines) - 1:
                log.warning("answers.log line %d is truncated/corrupt; replay stops there", i + 1)
                break
            raise DataError(f"answers.log line {i + 1} is corrupt: {e}") from e
        if qid not in session._queries:
            q = session.next_query(gamma)
            if q is None or q.id != qid:
                raise DataError(f"answers.log line {i + 1}: query {qid!r} does not "
                                "match the session's query sequence")
        session.submit_answer(qid, label)
    # A live session requests the next query right after each answer, which is
    # where pool-supply exhaustion is discovered. Reproduce that probe so the
    # replayed estimates (stop state, flags) match the originals.
    for g in session.sweep.gammas:
        session.next_query(g)
    return session
