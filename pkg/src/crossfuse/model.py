"""The coupled content / graph auto-encoder with cross-attention fusion.

Samples are rows throughout: features are ``N x D`` and every layer output
is ``N x D_l``.  A content layer is ``act(H W + b)``; a graph layer is
``act(F R W)`` with ``F`` the normalised filter.  Between layers ``l`` and
``l + 1`` the two streams are mixed as ``gamma * Z_l + (1 - gamma) * H_l``
and passed through multi-head attention before feeding the next graph layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DimensionError, ParameterError

ABLATIONS = ("full", "no-attention", "no-graph-loss", "no-content-loss")


def default_dims(input_dim: int, n_clusters: int) -> list[int]:
    """Default layer widths: input-500-10-clusters-500-500-input."""
    return [input_dim, 500, 10, n_clusters, 500, 500, input_dim]


@dataclass(frozen=True)
class ArchitectureSpec:
    dims: tuple[int, ...]
    n_clusters: int
    heads: int = 8
    gamma: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        dims = self.dims
        if len(dims) < 3 or (len(dims) - 1) % 2:
            raise ParameterError(f"need an even number of layers, got dims {dims}")
        if dims[0] != dims[-1]:
            raise ParameterError(f"output width {dims[-1]} must equal input width {dims[0]}")
        if any(d < 1 for d in dims):
            raise ParameterError(f"layer widths must be positive, got {dims}")
        if dims[self.middle] != self.n_clusters:
            raise ParameterError(
                f"middle layer width {dims[self.middle]} must equal cluster count {self.n_clusters}")
        if self.heads < 1:
            raise ParameterError(f"heads must be >= 1, got {self.heads}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def middle(self) -> int:
        return self.n_layers // 2

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    def activation(self, layer: int) -> str:
        """ReLU on hidden layers; the clustering layer and the output are linear."""
        return "linear" if layer in (self.middle, self.n_layers) else "relu"


@dataclass
class ModelParams:
    """Named weight matrices plus the (fixed) cluster centers.

    Keys: ``cae.W{l}``, ``cae.b{l}``, ``gae.W{l}`` for l = 1..L, and for each
    fusion layer l = 1..L-1 ``att{l}.q{m}``, ``att{l}.k{m}``, ``att{l}.v{m}``
    (one triple per head) and ``att{l}.out``.
    """

    weights: dict[str, np.ndarray]
    centers: np.ndarray | None = None

    def copy(self) -> "ModelParams":
        centers = None if self.centers is None else self.centers.copy()
        return ModelParams({k: v.copy() for k, v in self.weights.items()}, centers)

    def names(self, prefix: str = "") -> list[str]:
        return [k for k in self.weights if k.startswith(prefix)]

    def check(self, spec: ArchitectureSpec):
        for name, shape in expected_shapes(spec).items():
            got = self.weights.get(name)
            if got is None:
                raise ContractError(f"missing parameter {name!r}")
            if got.shape != shape:
                raise DimensionError(f"param {name}", shape, got.shape)
        if self.centers is not None:
            want = (spec.n_clusters, spec.dims[spec.middle])
            if self.centers.shape != want:
                raise DimensionError("centers", want, self.centers.shape)


def expected_shapes(spec: ArchitectureSpec) -> dict[str, tuple[int, int]]:
    dims = spec.dims
    shapes = {}
    for l in range(1, spec.n_layers + 1):
        shapes[f"cae.W{l}"] = (dims[l - 1], dims[l])
        shapes[f"cae.b{l}"] = (1, dims[l])
    for l in range(1, spec.n_layers + 1):
        shapes[f"gae.W{l}"] = (dims[l - 1], dims[l])
    for l in range(1, spec.n_layers):
        d = dims[l]
        for m in range(spec.heads):
            for kind in "qkv":
                shapes[f"att{l}.{kind}{m}"] = (d, d)
        shapes[f"att{l}.out"] = (spec.heads * d, d)
    return shapes


def init_params(spec: ArchitectureSpec, seed=0) -> ModelParams:
    """Xavier-uniform weights, zero biases, drawn in a fixed order from one RNG."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, (r, c) in expected_shapes(spec).items():
        if name.startswith("cae.b"):
            weights[name] = np.zeros((r, c))
        else:
            weights[name] = ad.xavier_init(r, c, rng)
    return ModelParams(weights)


# ------------------------------------------------------------------ layers

def cae_layer(h, weight, bias, activation="relu"):
    return _activate(ad.add_bias(ad.matmul(h, weight), bias), activation)


def gae_layer(r, graph_filter, weight, activation="relu"):
    matrix = getattr(graph_filter, "matrix", graph_filter)
    if matrix.shape[1] != r.shape[0]:
        raise DimensionError("gae_layer", matrix.shape, r.shape)
    return _activate(ad.matmul(ad.spmm(matrix, r), weight), activation)


def _activate(x, activation):
    if activation == "relu":
        return ad.relu(x)
    if activation == "sigmoid":
        return ad.sigmoid(x)
    if activation in (None, "linear"):
        return x
    raise ParameterError(f"unknown activation {activation!r}")


def fuse_raw(z, h, gamma):
    if z.shape != h.shape:
        raise DimensionError("fuse_raw", z.shape, h.shape)
    return ad.add(ad.scale(z, gamma), ad.scale(h, 1.0 - gamma))


def attention_weights(y, w_query, w_key):
    """Row-stochastic attention matrix: row a is softmax_b(q_a . k_b)."""
    if w_query.shape[0] != y.shape[1] or w_key.shape[0] != y.shape[1]:
        raise DimensionError("attention_head", y.shape, w_query.shape, w_key.shape)
    q = ad.matmul(y, w_query)
    k = ad.matmul(y, w_key)
    return ad.row_softmax(ad.matmul(q, ad.transpose(k)))


def attention_head(y, w_query, w_key, w_value):
    if w_value.shape[0] != y.shape[1]:
        raise DimensionError("attention_head", y.shape, w_value.shape)
    alpha = attention_weights(y, w_query, w_key)
    return ad.matmul(alpha, ad.matmul(y, w_value))


def multi_head_fusion(y, heads, w_out):
    """``Concat(head_1(y), ..., head_M(y)) @ w_out``; ``heads`` is a list of (q, k, v)."""
    if not heads:
        raise ContractError("multi_head_fusion needs at least one head")
    if w_out.shape != (len(heads) * y.shape[1], y.shape[1]):
        raise DimensionError("multi_head_fusion", (len(heads) * y.shape[1], y.shape[1]),
                             w_out.shape)
    outs = [attention_head(y, q, k, v) for q, k, v in heads]
    cat = outs[0] if len(outs) == 1 else ad.concat_cols(outs)
    return ad.matmul(cat, w_out)


def reconstruct_adjacency(z):
    return ad.sigmoid(ad.matmul(z, ad.transpose(z)))


# ----------------------------------------------------------------- forward

@dataclass
class ForwardOutputs:
    cae: list  # H_1..H_L
    gae: list  # Z_1..Z_L
    fused: list  # R_1..R_{L-1}
    adjacency: object  # sigmoid(Z_L Z_L^T)
    middle: int = field(default=0)

    @property
    def x_hat(self):
        return self.cae[-1]

    @property
    def z_out(self):
        return self.gae[-1]

    @property
    def cae_mid(self):
        return self.cae[self.middle - 1]

    @property
    def gae_mid(self):
        return self.gae[self.middle - 1]


def bind(tape: ad.Tape, params: ModelParams, prefix: str = "") -> dict[str, ad.Var]:
    """Register (a subset of) the weights on ``tape`` as trainable leaves."""
    return {k: tape.param(v, name=k) for k, v in params.weights.items() if k.startswith(prefix)}


def cae_forward(x, weights, spec: ArchitectureSpec) -> list:
    """Content stream only; returns H_1..H_L."""
    hs, h = [], x
    for l in range(1, spec.n_layers + 1):
        h = cae_layer(h, weights[f"cae.W{l}"], weights[f"cae.b{l}"], spec.activation(l))
        hs.append(h)
    return hs


def forward(x, graph_filter, weights, spec: ArchitectureSpec, ablation="full") -> ForwardOutputs:
    """Full forward pass over Vars.

    ``x`` is a Var (usually a constant) on the same tape as ``weights``.
    Under ``no-attention`` the raw convex mix feeds the next graph layer.
    """
    if ablation not in ABLATIONS:
        raise ParameterError(f"unknown ablation {ablation!r}; expected one of {ABLATIONS}")
    if x.shape[1] != spec.input_dim:
        raise DimensionError("forward", x.shape, (x.shape[0], spec.input_dim))
    hs = cae_forward(x, weights, spec)

    zs, fused = [], []
    z = gae_layer(x, graph_filter, weights["gae.W1"], spec.activation(1))
    zs.append(z)
    for l in range(2, spec.n_layers + 1):
        y = fuse_raw(zs[-1], hs[l - 2], spec.gamma)
        if ablation == "no-attention":
            r = y
        else:
            prev = l - 1
            heads = [(weights[f"att{prev}.q{m}"], weights[f"att{prev}.k{m}"],
                      weights[f"att{prev}.v{m}"]) for m in range(spec.heads)]
            r = multi_head_fusion(y, heads, weights[f"att{prev}.out"])
        fused.append(r)
        zs.append(gae_layer(r, graph_filter, weights[f"gae.W{l}"], spec.activation(l)))

    return ForwardOutputs(hs, zs, fused, reconstruct_adjacency(zs[-1]), spec.middle)
