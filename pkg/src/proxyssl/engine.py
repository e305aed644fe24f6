"""The five proxy-label algorithms over a labeled/unlabeled/test split.

Abbreviations used throughout: TBST (threshold-based self-training), CBST
(count-based self-training), CT (co-training), TT (tri-training), TTWD
(tri-training with disagreement).

Shared loop shape: train on the labeled pool D, predict the unlabeled pool
U, select a pseudo-label batch, retrain on D plus the batch, repeat. The
batch is rebuilt from all of U every iteration; samples are never removed
from U. Warm start (continuing from the previous iteration's parameters and
optimizer state) is the default; the fresh-model switch re-initializes
before each retraining instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import MlpModel, TrainConfig, fit, forward, init_model, predict
from .dataset import Dataset, SamplingStrategy, SemiSplit, bootstrap_sample, split_features
from .errors import ConfigError

ALGORITHMS = ("TBST", "CBST", "CT", "TT", "TTWD")
EVAL_MODES = ("ensemble", "best_single")

# engine-internal child-stream ids
_STREAM_BOOTSTRAP = 90


@dataclass
class SslConfig:
    algorithm: str
    tau1: float = 0.9
    tau2: float = 1.0
    count_lo: int = 0
    count_hi: int = 100
    max_iterations: int = 20
    fresh_model_each_iteration: bool = False
    sampling: SamplingStrategy = field(default_factory=SamplingStrategy)
    eval_mode: str = "ensemble"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if not (0.0 <= self.tau1 < self.tau2 <= 1.0):
            raise ConfigError(f"need 0 <= tau1 < tau2 <= 1, got tau1={self.tau1} tau2={self.tau2}")
        if not (0 <= self.count_lo < self.count_hi):
            raise ConfigError(f"need 0 <= count_lo < count_hi, got {self.count_lo}, {self.count_hi}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.eval_mode not in EVAL_MODES:
            raise ConfigError(f"unknown eval_mode {self.eval_mode!r}, expected one of {EVAL_MODES}")


@dataclass
class PseudoLabelBatch:
    """Selected positions into U, their assigned labels and the teacher id."""

    indices: np.ndarray
    labels: np.ndarray
    source: str = ""

    def __len__(self):
        return len(self.indices)

    def same_as(self, other):
        return (
            other is not None
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass
class SslOutcome:
    """Accuracy trace over iteration boundaries plus per-iteration batch sizes.

    ``iteration_accuracy[0]`` is the initial training; each later entry is
    one pseudo-label iteration. ``pseudo_label_counts[k]`` holds the batch
    size per model for iteration k+1.
    """

    iteration_accuracy: list[float]
    max_test_accuracy: float
    pseudo_label_counts: list[list[int]]
    final_models: list[MlpModel] = field(repr=False)

    @property
    def iterations_run(self):
        return len(self.pseudo_label_counts)


def select_by_threshold(conf, labels, tau1, tau2):
    """Samples whose confidence lies strictly inside (tau1, tau2)."""
    conf = np.asarray(conf)
    idx = np.where((conf > tau1) & (conf < tau2))[0]
    return PseudoLabelBatch(idx, np.asarray(labels)[idx])


def select_by_count(conf, labels, count_lo, count_hi):
    """Samples ranked [count_lo, count_hi) by descending confidence.

    Ties are broken by sample position ascending; a window reaching past the
    pool is truncated to the pool size.
    """
    conf = np.asarray(conf)
    order = np.argsort(-conf, kind="stable")
    idx = np.sort(order[count_lo:count_hi])
    return PseudoLabelBatch(idx, np.asarray(labels)[idx])


def tri_training_batches(preds, disagreement):
    """Per-model pseudo-label batches from three label vectors over U.

    Model i receives the samples where the other two models agree; with
    ``disagreement`` set, only if model i itself predicts differently.
    """
    batches = []
    for i in range(3):
        j, k = [o for o in range(3) if o != i]
        mask = preds[j] == preds[k]
        if disagreement:
            mask = mask & (preds[i] != preds[j])
        idx = np.where(mask)[0]
        batches.append(PseudoLabelBatch(idx, preds[j][idx], source=f"m{j}m{k}"))
    return batches


def majority_vote(preds, probs):
    """Modal label of three predictions per sample.

    A three-way split falls back to the candidate label with the highest
    probability summed across the models, then the lowest class index.
    """
    p = np.stack(preds)  # (3, n)
    n = p.shape[1]
    summed = probs[0] + probs[1] + probs[2]
    out = np.empty(n, dtype=np.int64)
    for s in range(n):
        a, b, c = p[0, s], p[1, s], p[2, s]
        if a == b or a == c:
            out[s] = a
        elif b == c:
            out[s] = b
        else:
            cands = sorted({a, b, c})
            out[s] = max(cands, key=lambda lbl: (summed[s, lbl], -lbl))
    return out


def _assert_sound(split: SemiSplit, global_ids):
    u = set(split.unlabeled_idx.tolist())
    t = set(split.test_idx.tolist())
    ids = set(np.asarray(global_ids).tolist())
    assert ids <= u and not (ids & t), "pseudo-labeled ids must come from U, never test"


def _train_sets(ds: Dataset, split: SemiSplit, batch: PseudoLabelBatch, cols=None):
    """D plus a pseudo-label batch as concrete arrays, soundness-checked."""
    u_ids = split.unlabeled_idx[batch.indices]
    _assert_sound(split, u_ids)
    x = np.concatenate([ds.features[split.labeled_idx], ds.features[u_ids]])
    y = np.concatenate([ds.labels[split.labeled_idx], batch.labels])
    if cols is not None:
        x = x[:, cols[0] : cols[1]]
    return x, y


def run_supervised(ds: Dataset, split: SemiSplit, train_cfg: TrainConfig, rng):
    """Labeled-only baseline: one model, one fit, U ignored.

    Rate-0 splits make this the fully-labeled upper-bound condition.
    """
    model = init_model(ds.d, ds.n_classes, rng.child(0).child(0).child(0))
    rec = fit(
        model,
        ds.features[split.labeled_idx],
        ds.labels[split.labeled_idx],
        ds.features[split.test_idx],
        ds.labels[split.test_idx],
        train_cfg,
        rng.child(0).child(0).child(1),
    )
    return SslOutcome([rec.max_test_accuracy], rec.max_test_accuracy, [], [model])


def run_self_training(ds: Dataset, split: SemiSplit, cfg: SslConfig, train_cfg: TrainConfig, rng):
    """TBST / CBST: one model teaching itself its confident predictions.

    Stops when the selection covers all of U in an iteration or after
    ``max_iterations``. An empty U degenerates to the supervised fit.
    """
    if cfg.algorithm not in ("TBST", "CBST"):
        raise ConfigError(f"run_self_training got algorithm {cfg.algorithm!r}")
    if len(split.unlabeled_idx) == 0:
        return run_supervised(ds, split, train_cfg, rng)

    test_x, test_y = ds.features[split.test_idx], ds.labels[split.test_idx]
    u_x = ds.features[split.unlabeled_idx]
    model = init_model(ds.d, ds.n_classes, rng.child(0).child(0).child(0))
    rec = fit(model, ds.features[split.labeled_idx], ds.labels[split.labeled_idx],
              test_x, test_y, train_cfg, rng.child(0).child(0).child(1))
    trace = [rec.max_test_accuracy]
    counts = []
    for it in range(1, cfg.max_iterations + 1):
        labels, conf = predict(model, u_x)
        if cfg.algorithm == "TBST":
            batch = select_by_threshold(conf, labels, cfg.tau1, cfg.tau2)
        else:
            batch = select_by_count(conf, labels, cfg.count_lo, cfg.count_hi)
        if cfg.fresh_model_each_iteration:
            model = init_model(ds.d, ds.n_classes, rng.child(it).child(0).child(0))
        x, y = _train_sets(ds, split, batch)
        rec = fit(model, x, y, test_x, test_y, train_cfg, rng.child(it).child(0).child(1))
        trace.append(rec.max_test_accuracy)
        counts.append([len(batch)])
        if len(batch) == len(split.unlabeled_idx):
            break
    return SslOutcome(trace, max(trace), counts, [model])


def _ct_eval(models, views, test_x, test_y, recs, eval_mode):
    if eval_mode == "best_single":
        return max(rec.max_test_accuracy for rec in recs)
    avg = sum(forward(m, test_x[:, v[0] : v[1]]) for m, v in zip(models, views)) / len(models)
    return float(np.mean(avg.argmax(axis=1) == test_y))


def run_co_training(ds: Dataset, split: SemiSplit, fs, cfg: SslConfig, train_cfg: TrainConfig, rng):
    """CT: two models on disjoint feature halves teach each other.

    A sample moves when exactly one model clears the single threshold
    ``tau1``; the confident model's label trains the other model. The loop
    ends when neither side produces a batch.
    """
    if cfg.algorithm != "CT":
        raise ConfigError(f"run_co_training got algorithm {cfg.algorithm!r}")
    if len(split.unlabeled_idx) == 0:
        return run_supervised(ds, split, train_cfg, rng)

    views = [fs.view_a, fs.view_b]
    tau = cfg.tau1
    test_x, test_y = ds.features[split.test_idx], ds.labels[split.test_idx]
    u_x = ds.features[split.unlabeled_idx]
    d_x, d_y = ds.features[split.labeled_idx], ds.labels[split.labeled_idx]

    models, recs = [], []
    for s, (lo, hi) in enumerate(views):
        m = init_model(hi - lo, ds.n_classes, rng.child(0).child(s).child(0))
        recs.append(fit(m, d_x[:, lo:hi], d_y, test_x[:, lo:hi], test_y,
                        train_cfg, rng.child(0).child(s).child(1)))
        models.append(m)
    trace = [_ct_eval(models, views, test_x, test_y, recs, cfg.eval_mode)]
    counts = []
    for it in range(1, cfg.max_iterations + 1):
        labeled, confs = zip(*(predict(m, u_x[:, v[0] : v[1]]) for m, v in zip(models, views)))
        batch1 = PseudoLabelBatch(*_one_sided(confs[0], confs[1], labeled[0], tau), source="m1")
        batch2 = PseudoLabelBatch(*_one_sided(confs[1], confs[0], labeled[1], tau), source="m2")
        if len(batch1) == 0 and len(batch2) == 0:
            break
        recs = []
        # each model trains on its own view of D plus the *other* model's batch
        for s, (m, (lo, hi), batch) in enumerate(zip(models, views, (batch2, batch1))):
            if cfg.fresh_model_each_iteration:
                m = init_model(hi - lo, ds.n_classes, rng.child(it).child(s).child(0))
                models[s] = m
            x, y = _train_sets(ds, split, batch, cols=(lo, hi))
            recs.append(fit(m, x, y, test_x[:, lo:hi], test_y,
                            train_cfg, rng.child(it).child(s).child(1)))
        trace.append(_ct_eval(models, views, test_x, test_y, recs, cfg.eval_mode))
        counts.append([len(batch1), len(batch2)])
    return SslOutcome(trace, max(trace), counts, models)


def _one_sided(conf_hi, conf_lo, labels, tau):
    idx = np.where((conf_hi > tau) & (conf_lo < tau))[0]
    return idx, labels[idx]


def _tt_eval(models, test_x, test_y, recs, eval_mode):
    if eval_mode == "best_single":
        return max(rec.max_test_accuracy for rec in recs)
    preds, probs = [], []
    for m in models:
        p = forward(m, test_x)
        probs.append(p)
        preds.append(p.argmax(axis=1))
    return float(np.mean(majority_vote(preds, probs) == test_y))


def run_tri_training(ds: Dataset, split: SemiSplit, cfg: SslConfig, train_cfg: TrainConfig, rng):
    """TT / TTWD: three bootstrap-diversified models cross-teaching.

    Each model receives the samples its two peers agree on (TTWD adds the
    requirement that the receiver currently disagrees). Stops when all three
    batches repeat the previous iteration exactly, or at ``max_iterations``.
    """
    if cfg.algorithm not in ("TT", "TTWD"):
        raise ConfigError(f"run_tri_training got algorithm {cfg.algorithm!r}")
    if len(split.unlabeled_idx) == 0:
        return run_supervised(ds, split, train_cfg, rng)

    disagreement = cfg.algorithm == "TTWD"
    test_x, test_y = ds.features[split.test_idx], ds.labels[split.test_idx]
    u_x = ds.features[split.unlabeled_idx]
    boot_rng = rng.child(_STREAM_BOOTSTRAP)

    models, recs = [], []
    for s in range(3):
        sample = bootstrap_sample(split.labeled_idx, cfg.sampling, s, boot_rng)
        m = init_model(ds.d, ds.n_classes, rng.child(0).child(s).child(0))
        recs.append(fit(m, ds.features[sample], ds.labels[sample], test_x, test_y,
                        train_cfg, rng.child(0).child(s).child(1)))
        models.append(m)
    trace = [_tt_eval(models, test_x, test_y, recs, cfg.eval_mode)]
    counts = []
    prev = [None, None, None]
    for it in range(1, cfg.max_iterations + 1):
        preds = [predict(m, u_x)[0] for m in models]
        batches = tri_training_batches(preds, disagreement)
        if all(b.same_as(p) for b, p in zip(batches, prev)):
            break
        recs = []
        for s, batch in enumerate(batches):
            m = models[s]
            if cfg.fresh_model_each_iteration:
                m = init_model(ds.d, ds.n_classes, rng.child(it).child(s).child(0))
                models[s] = m
            x, y = _train_sets(ds, split, batch)
            recs.append(fit(m, x, y, test_x, test_y, train_cfg, rng.child(it).child(s).child(1)))
        trace.append(_tt_eval(models, test_x, test_y, recs, cfg.eval_mode))
        counts.append([len(b) for b in batches])
        prev = batches
    return SslOutcome(trace, max(trace), counts, models)


def run_algorithm(ds: Dataset, split: SemiSplit, cfg: SslConfig, train_cfg: TrainConfig, rng):
    """Dispatch one SSL run by configured algorithm."""
    if cfg.algorithm in ("TBST", "CBST"):
        return run_self_training(ds, split, cfg, train_cfg, rng)
    if cfg.algorithm == "CT":
        return run_co_training(ds, split, split_features(ds), cfg, train_cfg, rng)
    return run_tri_training(ds, split, cfg, train_cfg, rng)
