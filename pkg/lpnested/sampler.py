"""Exact sampling from L_p-nested symmetric distributions.

Uniform samples in the unit ball are built top-down: the root radius is
Beta(n, 1); at every inner node the children's shares of v_I^p follow a
Dirichlet law with parameters n_child / p; signs are flipped independently.
Dividing by f gives uniform points on the sphere, which are then scaled by
radii from the model's radial law.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .density import LpNestedModel
from .radial import log_gamma_variates
from .tree import LpTree, NodeVisitCounter, evaluate_batch

logger = logging.getLogger(__name__)


def sample_uniform_ball(
    tree: LpTree,
    rng: np.random.Generator,
    count: int,
    counter: Optional[NodeVisitCounter] = None,
) -> np.ndarray:
    """Uniform samples from the unit ball {f(x) <= 1}.

    Args:
        tree: The L_p-nested function
        rng: Random generator owned by the caller
        count: Number of samples

    Returns:
        (count, n) sample matrix
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    n = tree.n
    log_v = {(): np.log(1.0 - rng.random(count)) / n}
    out = np.empty((count, n))
    if counter is not None:
        counter.add(count)
    for path in tree.inner_paths:
        p = tree.p(path)
        children = tree.children(path)
        shapes = np.array([tree.leaf_count(c) for c in children], dtype=float) / p
        log_g = log_gamma_variates(rng, shapes, size=(count, len(children)))
        log_share = (log_g - logsumexp(log_g, axis=1, keepdims=True)) / p
        for k, child in enumerate(children):
            lv = log_v[path] + log_share[:, k]
            if tree.is_inner(child):
                log_v[child] = lv
            else:
                out[:, tree.leaf_range(child)[0]] = np.exp(lv)
        if counter is not None:
            counter.add(count * len(children))
    signs = rng.integers(0, 2, size=(count, n)) * 2 - 1
    return out * signs


def sample_uniform_sphere(
    tree: LpTree,
    rng: np.random.Generator,
    count: int,
    counter: Optional[NodeVisitCounter] = None,
) -> np.ndarray:
    """Uniform samples on the unit sphere {f(x) = 1}."""
    ball = sample_uniform_ball(tree, rng, count, counter)
    f = evaluate_batch(tree, ball)[()]
    return ball / f[:, None]


def sample(
    model: LpNestedModel,
    rng: np.random.Generator,
    count: int,
    counter: Optional[NodeVisitCounter] = None,
) -> np.ndarray:
    """Samples x such that W (x - mean) follows the symmetric law of the model."""
    directions = sample_uniform_sphere(model.tree, rng, count, counter)
    radii = model.radial.sample(rng, count)
    return model.mix(directions * radii[:, None])


def sample_chunked(
    model: LpNestedModel,
    seed: int,
    count: int,
    chunk_size: int = 50000,
    threads: int = 1,
) -> np.ndarray:
    """Sample in chunks, each with its own generator spawned from ``seed``.

    The result depends on ``seed`` and ``chunk_size`` only, not on the
    number of threads.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    sizes = [chunk_size] * (count // chunk_size)
    if count % chunk_size:
        sizes.append(count % chunk_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job):
        child, size = job
        return sample(model, np.random.default_rng(child), size)

    logger.debug(f"Sampling {count} points in {len(sizes)} chunk(s) on {threads} thread(s)")
    if threads <= 1 or len(sizes) == 1:
        parts = [run(job) for job in zip(children, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, zip(children, sizes)))
    return np.concatenate(parts, axis=0)
