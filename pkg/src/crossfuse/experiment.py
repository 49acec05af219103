"""End-to-end experiments: configuration, data loading, the two-phase training
procedure and result export."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import DegenerateClusterError, DivergenceError, ParameterError, ParseError
from .graph import SparseGraph, build_graph, load_graph, normalize_filter
from .metrics import evaluate
from .model import (ABLATIONS, ArchitectureSpec, ModelParams, bind, cae_forward,
                    forward, init_params, default_dims)
from .selfsup import (LOSS_NAMES, gae_soft_assign, hard_assign, kmeans,
                      loss_terms, student_t_assign, target_distribution)

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("epoch",) + LOSS_NAMES + ("total",)


@dataclass
class ExperimentConfig:
    features: str | None = None
    clusters: int = 0
    labels: str | None = None
    graph: str | None = None
    similarity: str = "heat"
    k: int | None = None
    heat_t: float | None = None
    dims: list[int] | None = None
    heads: int = 8
    gamma: float = 0.5
    lr: float = 0.001
    pretrain_epochs: int = 50
    epochs: int = 200
    kmeans_iters: int = 1000
    seed: int = 0
    ablation: str = "full"
    out: str | None = None

    def validate(self):
        if self.graph is not None and self.k is not None:
            raise ParameterError("give either a graph file or K for a KNN graph, not both")
        if self.graph is None and self.k is None:
            raise ParameterError("no graph file given: K is required to build a KNN graph")
        if self.similarity not in ("heat", "inner"):
            raise ParameterError(f"similarity must be 'heat' or 'inner', got {self.similarity!r}")
        if self.clusters < 1:
            raise ParameterError(f"cluster count must be positive, got {self.clusters}")
        if self.ablation not in ABLATIONS:
            raise ParameterError(f"unknown ablation {self.ablation!r}; expected one of {ABLATIONS}")
        for name in ("pretrain_epochs", "epochs"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.kmeans_iters < 1:
            raise ParameterError("kmeans_iters must be >= 1")
        if self.lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {self.lr}")
        return self

    def architecture(self, input_dim: int) -> ArchitectureSpec:
        dims = self.dims
        if dims is None:
            dims = default_dims(input_dim, self.clusters)
        elif not (dims[0] == input_dim and dims[-1] == input_dim):
            # hidden widths only
            dims = [input_dim, *dims, input_dim]
        return ArchitectureSpec(tuple(dims), self.clusters, self.heads, self.gamma)


@dataclass
class RunReport:
    config: dict
    losses: list[dict]
    pretrain_losses: list[float]
    labels: np.ndarray
    cae_embedding: np.ndarray
    gae_embedding: np.ndarray
    metrics: dict | None = None
    wall_clock: float = 0.0
    params: ModelParams | None = field(default=None, repr=False)


# -------------------------------------------------------------------- data

def load_features(path) -> np.ndarray:
    path = Path(path)
    rows, width = [], None
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ParseError(path, lineno, f"expected {width} columns, got {len(record)}")
            try:
                rows.append([float(c) for c in record])
            except ValueError:
                bad = next(c for c in record if not _is_float(c))
                raise ParseError(path, lineno, f"non-numeric cell {bad!r}") from None
    if not rows:
        raise ParseError(path, None, "no samples found")
    X = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        r = int(np.argwhere(~np.isfinite(X))[0, 0])
        raise ParseError(path, r + 1, "non-finite value")
    return X


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_labels(path, n=None) -> np.ndarray:
    path = Path(path)
    labels = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                value = int(line)
            except ValueError:
                raise ParseError(path, lineno, f"label {line!r} is not an integer") from None
            if value < 0:
                raise ParseError(path, lineno, f"label {value} is negative")
            labels.append(value)
    if n is not None and len(labels) != n:
        raise ParseError(path, None, f"{len(labels)} labels for {n} samples")
    return np.array(labels, dtype=np.int64)


def load_dataset(config: ExperimentConfig):
    """Return ``(X, y or None, graph or None)`` as described by ``config``."""
    X = load_features(config.features)
    y = load_labels(config.labels, X.shape[0]) if config.labels else None
    graph = load_graph(config.graph, n=X.shape[0]) if config.graph else None
    return X, y, graph


# ---------------------------------------------------------------- training

def cae_embed(X, params: ModelParams, spec: ArchitectureSpec) -> list[np.ndarray]:
    tape = ad.Tape()
    hs = cae_forward(tape.constant(X), params.weights, spec)
    return [h.value for h in hs]


def pretrain_cae(X, params: ModelParams, spec: ArchitectureSpec, epochs=50, lr=0.001):
    """Fit the content auto-encoder alone on half the squared reconstruction error.

    Updates the ``cae.*`` entries of ``params`` in place and returns the loss
    recorded before each update.
    """
    X = np.asarray(X, dtype=np.float64)
    opt = ad.Adam(lr=lr)
    history = []
    for epoch in range(epochs):
        tape = ad.Tape()
        x = tape.constant(X)
        weights = bind(tape, params, "cae.")
        hs = cae_forward(x, weights, spec)
        loss = ad.scale(ad.sum_squares(ad.sub(x, hs[-1])), 0.5)
        value = float(loss.value[0, 0])
        if not np.isfinite(value):
            raise DivergenceError("pretrain", epoch, value)
        history.append(value)
        opt.step(params.weights, tape.backward(loss))
    return history


def joint_step(X, filter_, adjacency, params, spec, ablation="full"):
    """One full-batch epoch of joint training; returns the loss breakdown."""
    tape = ad.Tape()
    x = tape.constant(X)
    prefix_skip = "att" if ablation == "no-attention" else None
    weights = {k: tape.param(v, name=k) for k, v in params.weights.items()
               if prefix_skip is None or not k.startswith(prefix_skip)}
    out = forward(x, filter_, weights, spec, ablation)
    # target refreshed once per epoch from the current soft assignment
    target = target_distribution(student_t_assign(out.cae_mid.value, params.centers))
    terms = loss_terms(x, out, adjacency, target, params.centers, ablation)
    values = terms.values()
    grads = tape.backward(terms.total)
    return values, grads


def predict(X, filter_, params: ModelParams, spec: ArchitectureSpec, ablation="full"):
    """Forward pass without gradients; returns (labels, H_mid, Z_mid)."""
    tape = ad.Tape()
    weights = {k: tape.constant(v) for k, v in params.weights.items()}
    out = forward(tape.constant(X), filter_, weights, spec, ablation)
    z_mid = out.gae_mid.value
    return hard_assign(gae_soft_assign(z_mid, spec.n_clusters)), out.cae_mid.value, z_mid


def fit(X, graph: SparseGraph, spec: ArchitectureSpec, *, lr=0.001, pretrain_epochs=50,
        epochs=200, kmeans_iters=1000, seed=0, ablation="full", callback=None):
    """Pretrain, initialise centers with K-means, then train jointly.

    Returns ``(params, pretrain_history, joint_history, filter)``.  Neither ``X`` nor
    ``graph`` is modified.
    """
    X = np.array(X, dtype=np.float64)
    filter_ = normalize_filter(graph)
    adjacency = graph.todense()
    params = init_params(spec, seed)

    pre = pretrain_cae(X, params, spec, pretrain_epochs, lr)
    h_mid = cae_embed(X, params, spec)[spec.middle - 1]
    params.centers = kmeans(h_mid, spec.n_clusters, kmeans_iters, seed).centers

    opt = ad.Adam(lr=lr)
    history = []
    for epoch in range(1, epochs + 1):
        try:
            values, grads = joint_step(X, filter_, adjacency, params, spec, ablation)
        except DegenerateClusterError as exc:
            raise DegenerateClusterError(f"epoch {epoch}: {exc}") from exc
        bad = [k for k, v in values.items() if not np.isfinite(v)]
        if bad:
            raise DivergenceError("train", epoch, values[bad[0]])
        history.append({"epoch": epoch, **values})
        opt.step(params.weights, grads)
        if callback is not None:
            callback(epoch, values)
    return params, pre, history, filter_


def train(config: ExperimentConfig, X=None, y=None, graph=None) -> RunReport:
    """Run one experiment.  Arrays may be passed directly instead of file paths."""
    config.validate()
    start = time.perf_counter()
    if X is None:
        X, y_file, g_file = load_dataset(config)
        y = y if y is not None else y_file
        graph = graph if graph is not None else g_file
    X = np.asarray(X, dtype=np.float64)
    if graph is None:
        graph = build_graph(X, config.k, config.similarity, config.heat_t)
    spec = config.architecture(X.shape[1])

    def progress(epoch, values):
        if epoch % 25 == 0 or epoch == config.epochs:
            log.info("epoch %d total %.6g", epoch, values["total"])

    params, pre, history, filter_ = fit(
        X, graph, spec, lr=config.lr, pretrain_epochs=config.pretrain_epochs,
        epochs=config.epochs, kmeans_iters=config.kmeans_iters, seed=config.seed,
        ablation=config.ablation, callback=progress)
    labels, h_mid, z_mid = predict(X, filter_, params, spec, config.ablation)
    metrics = evaluate(y, labels) if y is not None else None
    return RunReport(asdict(config), history, pre, labels, h_mid, z_mid, metrics,
                     time.perf_counter() - start, params)


# ------------------------------------------------------------------ export

def _fmt(v: float) -> str:
    return repr(float(v))


def _write_matrix(path: Path, M: np.ndarray):
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [f"d{j}" for j in range(M.shape[1])])
        for i, row in enumerate(M):
            w.writerow([i] + [_fmt(v) for v in row])


def export_results(report: RunReport, outdir) -> list[Path]:
    """Write metrics.json, config.json, assignments.csv, embeddings and losses."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir}: {exc}") from exc

    metrics = {
        "n_samples": int(len(report.labels)),
        "n_clusters": int(report.config.get("clusters", 0)),
        "epochs": len(report.losses),
        "ablation": report.config.get("ablation"),
        "seed": report.config.get("seed"),
        "wall_clock_seconds": round(report.wall_clock, 3),
    }
    if report.losses:
        metrics["final_total_loss"] = report.losses[-1]["total"]
    if report.metrics:
        metrics.update({k: float(v) for k, v in report.metrics.items()})

    written = []
    try:
        p = outdir / "metrics.json"
        p.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(p)

        p = outdir / "config.json"
        p.write_text(json.dumps(report.config, indent=2, sort_keys=True, default=str) + "\n",
                     encoding="utf-8")
        written.append(p)

        p = outdir / "assignments.csv"
        with p.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "label"])
            w.writerows(enumerate(int(l) for l in report.labels))
        written.append(p)

        for name, M in (("cae", report.cae_embedding), ("gae", report.gae_embedding)):
            p = outdir / f"embeddings_{name}.csv"
            _write_matrix(p, M)
            written.append(p)

        p = outdir / "losses.csv"
        with p.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOSS_COLUMNS)
            for row in report.losses:
                w.writerow([row["epoch"]] + [_fmt(row[c]) for c in LOSS_COLUMNS[1:]])
        written.append(p)
    except OSError as exc:
        raise OSError(f"failed writing results to {outdir}: {exc}") from exc
    return written
