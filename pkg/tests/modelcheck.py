"""Small random model instances and a loss closure for gradient checks."""
from dataclasses import dataclass

import numpy as np

from crossfuse import autodiff as ad
from crossfuse.graph import SparseGraph, normalize_filter
from crossfuse.model import ArchitectureSpec, forward, init_params
from crossfuse.selfsup import loss_terms, student_t_assign, target_distribution


@dataclass
class Instance:
    spec: ArchitectureSpec
    X: np.ndarray
    filter_: object
    adjacency: np.ndarray
    weights: dict
    centers: np.ndarray
    target: np.ndarray


def random_graph(n, rng, density=0.4):
    rows, cols = np.nonzero(np.triu(rng.random((n, n)) < density, 1))
    return SparseGraph.from_edges(n, rows, cols)


def random_instance(seed, hidden=(3, 3, 2, 3, 3), heads=2) -> Instance:
    """N <= 10, D <= 8, C = 2, six layers by default."""
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(4, 11)), int(rng.integers(3, 9))
    spec = ArchitectureSpec((d, *hidden, d), hidden[len(hidden) // 2], heads,
                            float(rng.uniform(0.2, 0.8)))
    weights = init_params(spec, seed).weights
    for name, w in weights.items():
        if name.startswith("cae.b"):
            # nonzero biases so their gradients are exercised away from zero
            weights[name] = rng.normal(scale=0.3, size=w.shape)
    graph = random_graph(n, rng)
    X = rng.normal(size=(n, d))
    centers = rng.normal(size=(spec.n_clusters, spec.dims[spec.middle]))
    inst = Instance(spec, X, normalize_filter(graph), graph.todense(), weights, centers, None)
    # target is held fixed within an epoch, so it is a constant for the check
    _, outs = run(inst, inst.weights)
    inst.target = target_distribution(student_t_assign(outs.cae_mid.value, centers))
    return inst


def run(inst: Instance, weights, ablation="full", target=None):
    tape = ad.Tape()
    bound = {k: tape.param(v, name=k) for k, v in weights.items()}
    x = tape.constant(inst.X)
    outs = forward(x, inst.filter_, bound, inst.spec, ablation)
    if target is None:
        return tape, outs
    terms = loss_terms(x, outs, inst.adjacency, target, inst.centers, ablation)
    return tape, terms


def loss_and_grads(inst: Instance, ablation="full"):
    tape, terms = run(inst, inst.weights, ablation, inst.target)
    grads = tape.backward(terms.total)
    return terms.values(), grads


def loss_value(inst: Instance, ablation="full"):
    def fn(weights):
        _, terms = run(inst, weights, ablation, inst.target)
        return float(terms.total.value[0, 0])
    return fn
