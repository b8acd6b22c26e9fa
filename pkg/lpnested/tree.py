"""L_p-nested functions as trees: parsing, evaluation and gradients.

A tree is made of inner nodes carrying an exponent ``p`` and leaves carrying a
0-based dimension index. Leaves cover ``0..n-1`` from left to right, so every
subtree spans a contiguous block of coordinates. Nodes are addressed by paths,
tuples of 0-based child positions, with the root at ``()``.
"""
import logging
import re
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DimensionError, DomainError, TreeStructureError, TreeSyntaxError

logger = logging.getLogger(__name__)

Path = Tuple[int, ...]

P_MIN = 1e-3
P_MAX = 1e3


@dataclass(frozen=True)
class Leaf:
    """Leaf node holding one coordinate index."""
    index: int


@dataclass(frozen=True)
class Inner:
    """Inner node: L_p norm of its children's values."""
    p: float
    children: Tuple["Node", ...]


Node = Union[Leaf, Inner]


class NodeVisitCounter:
    """Counts node visits (one visit = one node for one sample row)."""

    def __init__(self):
        self.count = 0

    def add(self, visits: int) -> None:
        self.count += int(visits)

    def reset(self) -> None:
        self.count = 0


@dataclass(frozen=True)
class _InnerInfo:
    p: float
    child_paths: Tuple[Path, ...]
    start: int
    stop: int


class LpTree:
    """Immutable L_p-nested function.

    Args:
        root: Root node; must be an inner node.
    """

    def __init__(self, root: Node):
        if not isinstance(root, Inner):
            raise TreeStructureError("root must be an inner node with at least two children")
        self._root = root
        self._inner: Dict[Path, _InnerInfo] = {}
        self._leaf_paths: List[Path] = []
        self._build(root, ())
        self._n = len(self._leaf_paths)
        for i, path in enumerate(self._leaf_paths):
            leaf = self.node(path)
            if leaf.index != i:
                raise TreeStructureError(
                    f"leaf at position {i} has index {leaf.index}; "
                    f"leaves must cover 0..n-1 in left-to-right order"
                )
        self._inner_paths: Tuple[Path, ...] = tuple(self._inner.keys())
        self._post_order: Tuple[Path, ...] = tuple(reversed(self._inner_paths))

    def _build(self, node: Node, path: Path) -> None:
        if isinstance(node, Leaf):
            if node.index < 0:
                raise TreeStructureError(f"negative leaf index {node.index}")
            self._leaf_paths.append(path)
            return
        if len(node.children) < 2:
            raise TreeStructureError(
                f"inner node at {path} has {len(node.children)} child(ren); at least two required"
            )
        if not (node.p > 0 and np.isfinite(node.p)):
            raise TreeStructureError(f"exponent at {path} must be positive and finite, got {node.p}")
        start = len(self._leaf_paths)
        # reserve the slot so pre-order is kept
        self._inner[path] = None  # type: ignore[assignment]
        for k, child in enumerate(node.children):
            self._build(child, path + (k,))
        self._inner[path] = _InnerInfo(
            p=float(node.p),
            child_paths=tuple(path + (k,) for k in range(len(node.children))),
            start=start,
            stop=len(self._leaf_paths),
        )

    # ------------------------------------------------------------------
    # Structure
    # ------------------------------------------------------------------

    @property
    def root(self) -> Inner:
        return self._root

    @property
    def n(self) -> int:
        """Number of leaves (ambient dimension)."""
        return self._n

    @property
    def inner_paths(self) -> Tuple[Path, ...]:
        """Inner node paths in pre-order; the order used by exponent vectors."""
        return self._inner_paths

    @property
    def n_inner(self) -> int:
        return len(self._inner_paths)

    def node(self, path: Path) -> Node:
        node: Node = self._root
        for k in path:
            if not isinstance(node, Inner) or k >= len(node.children):
                raise TreeStructureError(f"no node at path {path}")
            node = node.children[k]
        return node

    def is_inner(self, path: Path) -> bool:
        return path in self._inner

    def p(self, path: Path) -> float:
        return self._inner[path].p

    def children(self, path: Path) -> Tuple[Path, ...]:
        return self._inner[path].child_paths

    def leaf_range(self, path: Path) -> Tuple[int, int]:
        """Half-open coordinate range covered by the subtree at ``path``."""
        if path in self._inner:
            info = self._inner[path]
            return info.start, info.stop
        leaf = self.node(path)
        return leaf.index, leaf.index + 1

    def leaf_count(self, path: Path) -> int:
        start, stop = self.leaf_range(path)
        return stop - start

    def leaf_counts(self) -> Dict[Path, int]:
        """n_I for every inner node."""
        return {path: info.stop - info.start for path, info in self._inner.items()}

    def children_counts(self) -> Dict[Path, int]:
        """l_I for every inner node."""
        return {path: len(info.child_paths) for path, info in self._inner.items()}

    def exponents(self) -> np.ndarray:
        """Exponents in pre-order of inner nodes."""
        return np.array([self._inner[path].p for path in self._inner_paths])

    def with_exponents(self, p: Sequence[float]) -> "LpTree":
        """Copy of this tree with new exponents given in pre-order."""
        p = [float(v) for v in p]
        if len(p) != self.n_inner:
            raise DimensionError(f"expected {self.n_inner} exponents, got {len(p)}")
        lookup = dict(zip(self._inner_paths, p))

        def rebuild(node: Node, path: Path) -> Node:
            if isinstance(node, Leaf):
                return node
            return Inner(
                p=lookup[path],
                children=tuple(rebuild(c, path + (k,)) for k, c in enumerate(node.children)),
            )

        return LpTree(rebuild(self._root, ()))

    def subtree(self, path: Path) -> "LpTree":
        """Subtree at ``path`` re-indexed to start at leaf 0."""
        node = self.node(path)
        if not isinstance(node, Inner):
            raise TreeStructureError(f"node at {path} is a leaf")
        offset = self.leaf_range(path)[0]

        def shift(n: Node) -> Node:
            if isinstance(n, Leaf):
                return Leaf(n.index - offset)
            return Inner(p=n.p, children=tuple(shift(c) for c in n.children))

        return LpTree(shift(node))

    def last_leaf_path(self) -> List[Path]:
        """Paths from the root down to the rightmost leaf, root included."""
        path: Path = ()
        out = [path]
        while path in self._inner:
            path = self._inner[path].child_paths[-1]
            out.append(path)
        return out

    def iter_post_order(self) -> Iterator[Path]:
        """Inner paths with children before parents."""
        return iter(self._post_order)

    def leaf_parent_exponents(self) -> np.ndarray:
        """Exponent of each leaf's parent node, indexed by coordinate."""
        out = np.empty(self._n)
        for path in self._leaf_paths:
            out[self.node(path).index] = self._inner[path[:-1]].p
        return out

    def __call__(self, x: np.ndarray) -> Union[float, np.ndarray]:
        return evaluate(self, x)[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, LpTree) and self._root == other._root

    def __hash__(self) -> int:
        return hash(self._root)

    def __repr__(self) -> str:
        return f"LpTree({serialize_tree(self)!r})"


# ----------------------------------------------------------------------
# Constructors
# ----------------------------------------------------------------------

def flat_tree(n: int, p: float) -> LpTree:
    """Plain L_p norm over n coordinates."""
    if n < 2:
        raise TreeStructureError("a tree needs at least two leaves")
    return LpTree(Inner(p=float(p), children=tuple(Leaf(i) for i in range(n))))


def full_binary_tree(n: int, p: float) -> LpTree:
    """Balanced binary tree over n leaves with every exponent equal to p."""
    if n < 2:
        raise TreeStructureError("a tree needs at least two leaves")

    def build(lo: int, hi: int) -> Node:
        if hi - lo == 1:
            return Leaf(lo)
        mid = (lo + hi + 1) // 2
        return Inner(p=float(p), children=(build(lo, mid), build(mid, hi)))

    return LpTree(build(0, n))


# ----------------------------------------------------------------------
# DSL
# ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<open>\()|(?P<close>\))|"
    r"(?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<bad>\S))"
)
_UINT = re.compile(r"\d+")


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        kind = m.lastgroup
        if kind is None:
            break
        value = m.group(kind)
        start = m.start(kind)
        if kind == "bad":
            raise TreeSyntaxError(f"unexpected character {value!r}", start)
        tokens.append((kind, value, start))
        pos = m.end()
    return tokens


def parse_tree(
    text: str,
    p_min: float = P_MIN,
    p_max: float = P_MAX,
) -> LpTree:
    """Parse tree DSL text such as ``"(2.0 0 (1.0 1 2))"``.

    Args:
        text: Tree in the DSL grammar
        p_min: Exponents below this are clamped (with a warning)
        p_max: Exponents above this are clamped (with a warning)

    Returns:
        Parsed tree
    """
    tokens = _tokenize(text)
    if not tokens:
        raise TreeSyntaxError("empty tree text", 0)
    pos = 0

    def parse_node() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise TreeSyntaxError("unexpected end of input", len(text))
        kind, value, at = tokens[pos]
        if kind == "number":
            if not _UINT.fullmatch(value):
                raise TreeSyntaxError(f"leaf index must be a non-negative integer, got {value!r}", at)
            pos += 1
            return Leaf(int(value))
        if kind != "open":
            raise TreeSyntaxError(f"expected '(' or a leaf index, got {value!r}", at)
        pos += 1
        if pos >= len(tokens) or tokens[pos][0] != "number":
            where = tokens[pos][2] if pos < len(tokens) else len(text)
            raise TreeSyntaxError("expected exponent after '('", where)
        _, p_text, p_at = tokens[pos]
        pos += 1
        p = float(p_text)
        if not p > 0 or not np.isfinite(p):
            raise TreeStructureError(f"exponent must be positive and finite, got {p_text} at position {p_at}")
        if p < p_min or p > p_max:
            clamped = min(max(p, p_min), p_max)
            logger.warning(f"Exponent {p} at position {p_at} clamped to {clamped}")
            p = clamped
        children = []
        while pos < len(tokens) and tokens[pos][0] != "close":
            children.append(parse_node())
        if pos >= len(tokens):
            raise TreeSyntaxError("missing ')'", len(text))
        if len(children) < 2:
            raise TreeSyntaxError(
                f"inner node has {len(children)} child(ren); at least two required", at
            )
        pos += 1
        return Inner(p=p, children=tuple(children))

    root = parse_node()
    if pos != len(tokens):
        raise TreeSyntaxError("trailing input after tree", tokens[pos][2])
    if isinstance(root, Leaf):
        raise TreeStructureError("root must be an inner node with at least two children")
    _check_leaf_indices(root)
    return LpTree(root)


def _check_leaf_indices(root: Inner) -> None:
    indices: List[int] = []

    def collect(node: Node) -> None:
        if isinstance(node, Leaf):
            indices.append(node.index)
        else:
            for child in node.children:
                collect(child)

    collect(root)
    seen = set()
    for idx in indices:
        if idx in seen:
            raise TreeStructureError(f"duplicate leaf index {idx}")
        seen.add(idx)
    missing = sorted(set(range(len(indices))) - seen)
    if missing:
        raise TreeStructureError(f"leaf indices must be contiguous from 0; missing {missing}")


def serialize_tree(tree: LpTree) -> str:
    """Canonical DSL text: single spaces, shortest round-trip exponents."""

    def fmt(node: Node) -> str:
        if isinstance(node, Leaf):
            return str(node.index)
        return "(" + " ".join([repr(float(node.p))] + [fmt(c) for c in node.children]) + ")"

    return fmt(tree.root)


# ----------------------------------------------------------------------
# Evaluation and gradients
# ----------------------------------------------------------------------

class NodeValues:
    """Values v_I for every node, keyed by path. Leaves hold |x_i|."""

    def __init__(self, values: Dict[Path, np.ndarray], single: bool = False):
        self._values = values
        self._single = single

    def __getitem__(self, path: Path):
        v = self._values[path]
        return float(v[0]) if self._single else v

    def __contains__(self, path: Path) -> bool:
        return path in self._values

    def keys(self):
        return self._values.keys()

    def items(self):
        for k in self._values:
            yield k, self[k]

    def raw(self, path: Path) -> np.ndarray:
        """Batched value array regardless of input shape."""
        return self._values[path]

    @property
    def root(self):
        return self[()]


def _as_batch(tree: LpTree, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != tree.n:
        raise DimensionError(f"expected vectors of length {tree.n}, got shape {x.shape}")
    return X, single


def lp_norm_rows(V: np.ndarray, p: float) -> np.ndarray:
    """Row-wise L_p norm of non-negative values with max-scaling."""
    M = V.max(axis=1)
    safe = np.where(M > 0, M, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        s = np.power(V / safe[:, None], p).sum(axis=1)
        return M * np.power(s, 1.0 / p)


def evaluate_batch(
    tree: LpTree,
    X: np.ndarray,
    counter: Optional[NodeVisitCounter] = None,
) -> Dict[Path, np.ndarray]:
    A = np.abs(X)
    values: Dict[Path, np.ndarray] = {}
    for path in tree.iter_post_order():
        cols = []
        for child in tree.children(path):
            if tree.is_inner(child):
                cols.append(values[child])
            else:
                idx = tree.leaf_range(child)[0]
                values[child] = A[:, idx]
                cols.append(values[child])
        values[path] = lp_norm_rows(np.column_stack(cols), tree.p(path))
    if counter is not None:
        counter.add(X.shape[0] * (tree.n + tree.n_inner))
    return values


def evaluate(
    tree: LpTree,
    x: np.ndarray,
    counter: Optional[NodeVisitCounter] = None,
):
    """Evaluate f and all node values.

    Args:
        tree: The L_p-nested function
        x: Vector of length n, or an (m, n) batch
        counter: Optional node-visit counter

    Returns:
        (f(x), NodeValues); f is a float for a single vector, an array for a batch
    """
    X, single = _as_batch(tree, x)
    values = evaluate_batch(tree, X, counter)
    root = values[()]
    return (float(root[0]) if single else root), NodeValues(values, single)


def _chain(tree: LpTree, values: Dict[Path, np.ndarray]) -> Dict[Path, np.ndarray]:
    """df/dv_I for every node, top-down."""
    m = values[()].shape[0]
    chain: Dict[Path, np.ndarray] = {(): np.ones(m)}
    for path in tree.inner_paths:
        p = tree.p(path)
        v = values[path]
        safe_v = np.where(v > 0, v, 1.0)
        for child in tree.children(path):
            vc = values[child]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                factor = np.power(vc / safe_v, p - 1.0)
            chain[child] = np.where(vc > 0, chain[path] * factor, 0.0)
    return chain


def gradient_x(
    tree: LpTree,
    y: np.ndarray,
    counter: Optional[NodeVisitCounter] = None,
) -> np.ndarray:
    """Gradient of f with respect to the input; zero where a coordinate is zero."""
    Y, single = _as_batch(tree, y)
    values = evaluate_batch(tree, Y, counter)
    chain = _chain(tree, values)
    grad = np.zeros_like(Y)
    for path in chain:
        if not tree.is_inner(path):
            idx = tree.leaf_range(path)[0]
            grad[:, idx] = chain[path] * np.sign(Y[:, idx])
    if counter is not None:
        counter.add(Y.shape[0] * (tree.n + tree.n_inner))
    return grad[0] if single else grad


def _exponent_partials(tree: LpTree, values: Dict[Path, np.ndarray]) -> Dict[Path, np.ndarray]:
    """dv_J/dp_J at every inner node, with 0 log 0 = 0."""
    out = {}
    for path in tree.inner_paths:
        p = tree.p(path)
        v = values[path]
        safe_v = np.where(v > 0, v, 1.0)
        acc = np.zeros_like(v)
        for child in tree.children(path):
            ratio = values[child] / safe_v
            pos = ratio > 0
            safe_ratio = np.where(pos, ratio, 1.0)
            acc += np.where(pos, np.power(safe_ratio, p) * np.log(safe_ratio), 0.0)
        out[path] = np.where(v > 0, v / p * acc, 0.0)
    return out


def gradient_p(
    tree: LpTree,
    x: np.ndarray,
    counter: Optional[NodeVisitCounter] = None,
) -> np.ndarray:
    """Gradient of f with respect to the exponents (pre-order of inner nodes)."""
    X, single = _as_batch(tree, x)
    values = evaluate_batch(tree, X, counter)
    chain = _chain(tree, values)
    partial = _exponent_partials(tree, values)
    grad = np.column_stack([chain[path] * partial[path] for path in tree.inner_paths])
    if counter is not None:
        counter.add(X.shape[0] * (tree.n + tree.n_inner))
    return grad[0] if single else grad


def value_and_gradients(
    tree: LpTree,
    x: np.ndarray,
    counter: Optional[NodeVisitCounter] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """f, gradient in x and gradient in p for a batch from one evaluation pass."""
    X, _ = _as_batch(tree, x)
    values = evaluate_batch(tree, X, counter)
    chain = _chain(tree, values)
    partial = _exponent_partials(tree, values)
    gx = np.zeros_like(X)
    for path in chain:
        if not tree.is_inner(path):
            idx = tree.leaf_range(path)[0]
            gx[:, idx] = chain[path] * np.sign(X[:, idx])
    gp = np.column_stack([chain[path] * partial[path] for path in tree.inner_paths])
    if counter is not None:
        counter.add(X.shape[0] * (tree.n + tree.n_inner))
    return values[()], gx, gp


# ----------------------------------------------------------------------
# Pruning
# ----------------------------------------------------------------------

def simplify_tree(tree: LpTree, tol: float) -> LpTree:
    """Splice inner nodes whose exponent is within ``tol`` of the parent's.

    Children are promoted into the parent, which keeps its own exponent.
    Chains are merged bottom-up.
    """
    if tol < 0:
        raise DomainError(f"tol must be non-negative, got {tol}")

    def merge(node: Node) -> Node:
        if isinstance(node, Leaf):
            return node
        children: List[Node] = []
        for child in node.children:
            child = merge(child)
            if isinstance(child, Inner) and abs(child.p - node.p) <= tol:
                children.extend(child.children)
            else:
                children.append(child)
        return Inner(p=node.p, children=tuple(children))

    merged = LpTree(merge(tree.root))
    if merged.n_inner != tree.n_inner:
        logger.debug(f"Pruned {tree.n_inner - merged.n_inner} inner node(s): {serialize_tree(merged)}")
    return merged
