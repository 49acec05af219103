"""Self-supervision: K-means centers, Student-t soft assignments, the sharpened
target distribution, KL terms, the five-part training objective and the final
hard assignment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import (ContractError, DegenerateClusterError, DimensionError,
                     ParameterError)
from .model import ABLATIONS

LOSS_NAMES = ("l_cae_content", "l_gae_graph", "l_gae_content", "l_cae_kl", "l_gae_kl")


# ------------------------------------------------------------------ k-means

@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia_history: list[float]
    n_iter: int
    converged: bool

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _sq_dists(X, centers):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plus_plus(X, n_clusters, rng) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((n_clusters, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1]).ravel()
    for c in range(1, n_clusters):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[c] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[c:c + 1]).ravel())
    return centers


def kmeans(X, n_clusters, max_iters=1000, seed=0) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding.

    Stops when the assignment no longer changes or after ``max_iters``
    updates.  A cluster that loses all its points is re-seeded at the point
    farthest from its current center.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n_clusters < 1:
        raise ParameterError(f"cluster count must be >= 1, got {n_clusters}")
    if n < n_clusters:
        raise ParameterError(f"need at least {n_clusters} samples, got {n}")
    if max_iters < 1:
        raise ParameterError(f"max_iters must be >= 1, got {max_iters}")
    rng = np.random.default_rng(seed)

    centers = kmeans_plus_plus(X, n_clusters, rng)
    d = _sq_dists(X, centers)
    labels = d.argmin(axis=1)
    history = [float(d[np.arange(n), labels].sum())]
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        for c in range(n_clusters):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
            else:
                far = d[np.arange(n), labels].argmax()
                centers[c] = X[far]
                labels[far] = c
                d[far] = _sq_dists(X[far:far + 1], centers).ravel()
        d = _sq_dists(X, centers)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    return KMeansResult(centers, labels, history, it, converged)


# -------------------------------------------------------- soft assignments

def student_t_assign(H, centers) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if H.ndim != 2 or centers.ndim != 2 or H.shape[1] != centers.shape[1]:
        raise DimensionError("student_t_assign", H.shape, centers.shape)
    kernel = 1.0 / (1.0 + _sq_dists_exact(H, centers))
    return kernel / kernel.sum(axis=1, keepdims=True)


def _sq_dists_exact(H, centers):
    diff = H[:, None, :] - centers[None, :, :]
    return np.einsum("ikd,ikd->ik", diff, diff)


def target_distribution(T) -> np.ndarray:
    """Square, divide by soft cluster frequency, renormalise each row."""
    T = np.asarray(T, dtype=np.float64)
    freq = T.sum(axis=0)
    if np.any(freq <= 0):
        dead = np.flatnonzero(freq <= 0).tolist()
        raise DegenerateClusterError(f"clusters {dead} have no soft assignment mass")
    weight = T * T / freq
    return weight / weight.sum(axis=1, keepdims=True)


def kl_divergence(P, Q) -> float:
    """``sum p * log(p / q)`` with both arguments floored at 1e-12 in the log."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise DimensionError("kl_divergence", P.shape, Q.shape)
    floor = ad.LOG_FLOOR
    logs = np.log(np.maximum(P, floor)) - np.log(np.maximum(Q, floor))
    return float(np.where(P > 0, P * logs, 0.0).sum())


def gae_soft_assign(Z_mid, n_clusters=None) -> np.ndarray:
    Z_mid = np.asarray(Z_mid, dtype=np.float64)
    if n_clusters is not None and Z_mid.shape[1] != n_clusters:
        raise ContractError(
            f"middle representation has width {Z_mid.shape[1]}, expected {n_clusters} clusters")
    return ad.softmax_rows(Z_mid)


def hard_assign(Q) -> np.ndarray:
    """Row-wise argmax; ties resolve to the smallest cluster index."""
    return np.asarray(Q).argmax(axis=1)


# ------------------------------------------------------------------- losses

@dataclass
class LossTerms:
    l_cae_content: ad.Var
    l_gae_graph: ad.Var
    l_gae_content: ad.Var
    l_cae_kl: ad.Var
    l_gae_kl: ad.Var
    total: ad.Var

    def values(self) -> dict[str, float]:
        out = {name: float(getattr(self, name).value[0, 0]) for name in LOSS_NAMES}
        out["total"] = float(self.total.value[0, 0])
        return out


def included_terms(ablation: str) -> tuple[str, ...]:
    if ablation not in ABLATIONS:
        raise ParameterError(f"unknown ablation {ablation!r}; expected one of {ABLATIONS}")
    drop = {"no-graph-loss": "l_gae_graph", "no-content-loss": "l_gae_content"}.get(ablation)
    return tuple(n for n in LOSS_NAMES if n != drop)


def loss_terms(x, outputs, adjacency, target, centers, ablation="full") -> LossTerms:
    """Build all five loss terms on the tape and their ablation-specific sum.

    ``x`` is the feature Var, ``adjacency`` the dense input graph, ``target``
    the current target distribution (held fixed) and ``centers`` the fixed
    cluster centers.  Terms excluded by the ablation are still computed so
    they can be reported, but do not enter ``total``.
    """
    keep = included_terms(ablation)
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.shape != outputs.adjacency.shape:
        raise DimensionError("graph loss", adjacency.shape, outputs.adjacency.shape)

    soft_cae = ad.student_t(outputs.cae_mid, centers)
    soft_gae = ad.row_softmax(outputs.gae_mid)
    terms = {
        "l_cae_content": ad.scale(ad.sum_squares(ad.sub(x, outputs.x_hat)), 0.5),
        "l_gae_graph": ad.sum_squares(ad.sub(adjacency, outputs.adjacency)),
        "l_gae_content": ad.sum_squares(ad.sub(x, outputs.z_out)),
        "l_cae_kl": ad.kl_div(target, soft_cae),
        "l_gae_kl": ad.kl_div(target, soft_gae),
    }
    total = terms[keep[0]]
    for name in keep[1:]:
        total = ad.add(total, terms[name])
    return LossTerms(**terms, total=total)
