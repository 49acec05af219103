"""Input graph construction: similarity kernels, KNN graphs, file loading and
the symmetric-normalised convolution filter."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import pdist, squareform

from .errors import ContractError, DimensionError, ParameterError, ParseError


@dataclass(frozen=True)
class SparseGraph:
    """Unweighted-or-weighted graph on ``n`` nodes in CSR form.

    Rows are sorted, duplicates are merged and self-loops are never stored.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    symmetric: bool = True

    @classmethod
    def from_edges(cls, n, rows, cols, weights=None, symmetrize=True):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if weights is None:
            weights = np.ones(len(rows))
        weights = np.asarray(weights, dtype=np.float64)
        keep = rows != cols
        rows, cols, weights = rows[keep], cols[keep], weights[keep]
        if symmetrize:
            rows, cols = np.concatenate([rows, cols]), np.concatenate([cols, rows])
            weights = np.concatenate([weights, weights])
        # duplicate (i, j) entries keep their largest weight rather than summing
        mat = _max_duplicates(rows, cols, weights, n)
        return cls.from_scipy(mat, symmetric=symmetrize)

    @classmethod
    def from_scipy(cls, mat, symmetric=True):
        mat = sp.csr_matrix(mat, dtype=np.float64)
        mat.setdiag(0)
        mat.eliminate_zeros()
        mat.sort_indices()
        return cls(mat.shape[0], mat.indptr.copy(), mat.indices.copy(),
                   mat.data.copy(), symmetric)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def todense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def edges(self) -> set[tuple[int, int]]:
        """Undirected edge set as ``(i, j)`` pairs with ``i < j``."""
        coo = self.to_scipy().tocoo()
        return {(int(min(i, j)), int(max(i, j))) for i, j in zip(coo.row, coo.col)}

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def nnz(self) -> int:
        return len(self.indices)


def _max_duplicates(rows, cols, weights, n):
    order = np.lexsort((weights, cols, rows))
    r, c, w = rows[order], cols[order], weights[order]
    last = np.ones(len(r), dtype=bool)
    last[:-1] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    return sp.csr_matrix((w[last], (r[last], c[last])), shape=(n, n))


@dataclass(frozen=True)
class GraphFilter:
    """The filter ``D^-1/2 (A + I) D^-1/2`` as a sparse symmetric matrix."""

    n: int
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    def todense(self) -> np.ndarray:
        return self.matrix.toarray()


# ------------------------------------------------------------- similarities

def median_heat_scale(X) -> float:
    """Median of the squared pairwise distances (1.0 if they are all zero)."""
    d2 = pdist(np.asarray(X, dtype=np.float64), "sqeuclidean")
    t = float(np.median(d2)) if len(d2) else 0.0
    return t if t > 0 else 1.0


def heat_kernel_similarity(X, t=None) -> np.ndarray:
    """``S_ij = exp(-|x_i - x_j|^2 / t)``; ``t`` defaults to the median heuristic."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ContractError(f"need at least two samples, got shape {X.shape}")
    if t is None:
        t = median_heat_scale(X)
    if not t > 0:
        raise ParameterError(f"heat kernel scale t must be positive, got {t}")
    # squareform mirrors the condensed upper triangle, so S is exactly symmetric
    S = squareform(np.exp(-pdist(X, "sqeuclidean") / t))
    np.fill_diagonal(S, 1.0)
    return S


def inner_product_similarity(X) -> np.ndarray:
    """``S_ij = x_j . x_i``, mirrored from the upper triangle."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ContractError(f"need at least two samples, got shape {X.shape}")
    G = X @ X.T
    upper = np.triu(G, 1)
    return upper + upper.T + np.diag(np.einsum("ij,ij->i", X, X))


def knn_out_neighbors(S, k) -> np.ndarray:
    """Indices of the ``k`` most similar nodes per row (self excluded).

    Ties go to the smaller node index.
    """
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    if S.ndim != 2 or S.shape[1] != n:
        raise DimensionError("knn_graph", S.shape)
    if not 1 <= k < n:
        raise ParameterError(f"K must satisfy 1 <= K < N={n}, got {k}")
    ranked = -S.copy()
    np.fill_diagonal(ranked, np.inf)
    return np.argsort(ranked, axis=1, kind="stable")[:, :k]


def knn_graph(S, k) -> SparseGraph:
    """Symmetrised (union) KNN graph with unit weights."""
    nbrs = knn_out_neighbors(S, k)
    n = nbrs.shape[0]
    rows = np.repeat(np.arange(n), k)
    return SparseGraph.from_edges(n, rows, nbrs.ravel())


def build_graph(X, k, similarity="heat", t=None) -> SparseGraph:
    if similarity == "heat":
        S = heat_kernel_similarity(X, t)
    elif similarity == "inner":
        S = inner_product_similarity(X)
    else:
        raise ParameterError(f"unknown similarity {similarity!r}; expected 'heat' or 'inner'")
    return knn_graph(S, k)


# ------------------------------------------------------------------- filter

def normalize_filter(graph: SparseGraph) -> GraphFilter:
    A = graph.to_scipy()
    if A.diagonal().any():
        raise ContractError("adjacency must not store self-loops")
    if (A != A.T).nnz:
        raise ContractError("normalize_filter requires a symmetric adjacency")
    A_hat = (A + sp.identity(graph.n, format="csr")).tocoo()
    deg = np.asarray(A_hat.sum(axis=1)).ravel()
    # deg[i] * deg[j] is commutative, so entries (i, j) and (j, i) agree bit-for-bit
    vals = A_hat.data / np.sqrt(deg[A_hat.row] * deg[A_hat.col])
    F = sp.csr_matrix((vals, (A_hat.row, A_hat.col)), shape=A_hat.shape)
    F.sort_indices()
    return GraphFilter(graph.n, F)


# ------------------------------------------------------------------ loading

def load_graph(path, n=None) -> SparseGraph:
    """Read a whitespace-separated edge list of 0-based node ids.

    Blank lines and anything after ``#`` are ignored.  Edges are undirected,
    duplicates collapse and self-loops are dropped.  When ``n`` is given,
    every id must be below it; otherwise the node count is ``max id + 1``.
    """
    path = Path(path)
    rows, cols = [], []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected two node ids, got {len(parts)} fields")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer node id in {line!r}") from None
            for node in (i, j):
                if node < 0 or (n is not None and node >= n):
                    bound = f"[0, {n})" if n is not None else "non-negative"
                    raise ParseError(path, lineno, f"node id {node} out of range {bound}")
            rows.append(i)
            cols.append(j)
    if n is None:
        n = max(max(rows, default=-1), max(cols, default=-1)) + 1
    return SparseGraph.from_edges(n, rows, cols)
