"""Regression trees over residuals and binary rule features.

The tree is plain CART: greedy splits minimising the summed child SSE,
candidate thresholds at midpoints between consecutive distinct sorted
values, followed by post-pruning that collapses any split whose SSE
reduction, normalised by the root SSE, falls below a threshold.

A terminal node's root-to-leaf path converts into a :class:`RuleFeature`:
a conjunction of conditions on the *original* covariates (one-hot columns
render as equality conditions on their source categorical), which
evaluates to a binary column on any design matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import ColumnInfo, VerticalMatrix
from .errors import DataError, PredictionError


@dataclass(frozen=True)
class TreeConfig:
    """Growth and pruning settings."""

    eta: float = 0.001
    min_leaf: int = 5
    max_depth: int = 8

    def __post_init__(self):
        if self.eta < 0:
            raise DataError("eta must be >= 0")
        if self.min_leaf < 1 or self.max_depth < 1:
            raise DataError("min_leaf and max_depth must be >= 1")


@dataclass(frozen=True)
class Condition:
    """One comparison against a raw covariate.

    ``relation`` is "<=" or ">" for numeric covariates and "=" or "!="
    for binary covariates (value 0.0/1.0) and categorical levels (value
    is the level string).
    """

    column: str
    relation: str
    value: float | str

    def render(self) -> str:
        if isinstance(self.value, str):
            return f"{self.column}{self.relation}{self.value}"
        if self.relation in ("=", "!="):
            return f"{self.column}{self.relation}{int(self.value)}"
        return f"{self.column}{self.relation}{float(self.value)!r}"

    def _sort_key(self):
        return (self.column, self.relation, self.render())


@dataclass(frozen=True)
class RuleFeature:
    """A conjunction of conditions marking membership in a tree leaf."""

    conditions: tuple[Condition, ...]
    source_iteration: int
    leaf_mean: float
    leaf_share: float

    def canonical(self) -> str:
        """Deterministic serialization: conditions sorted by column, relation."""
        return " & ".join(c.render() for c in self.conditions)

    @property
    def covariates(self) -> tuple[str, ...]:
        """Distinct raw covariate names used, in condition order."""
        seen: dict[str, None] = {}
        for c in self.conditions:
            seen.setdefault(c.column)
        return tuple(seen)


def _sorted_conditions(conditions) -> tuple[Condition, ...]:
    return tuple(sorted(conditions, key=Condition._sort_key))


@dataclass
class Node:
    """One tree node; leaves have ``split is None``."""

    mean: float
    count: int
    sse: float
    depth: int
    split: tuple[int, float] | None = None  # (matrix column index, threshold)
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass
class RegressionTree:
    """Binary CART tree with the training-matrix column metadata attached."""

    nodes: list[Node]
    column_info: list[ColumnInfo]
    n_total: int
    root: int = 0

    def leaves(self) -> list[int]:
        """Leaf node ids in left-most depth-first order."""
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf:
                out.append(nid)
            else:
                stack.extend([node.right, node.left])
        return out

    def n_leaves(self) -> int:
        return len(self.leaves())


def _sse(total: float, total_sq: float, count: int) -> float:
    return max(total_sq - total * total / count, 0.0)


def _best_split_column(values: np.ndarray, e: np.ndarray, min_leaf: int):
    """Best (threshold, child SSE sum) for one column, or None."""
    order = np.argsort(values, kind="mergesort")
    v = values[order]
    es = e[order]
    n = len(v)
    pe = np.cumsum(es)
    pe2 = np.cumsum(es * es)
    tot, tot2 = pe[-1], pe2[-1]

    ks = np.arange(min_leaf, n - min_leaf + 1)  # rows in the left child
    if len(ks) == 0:
        return None
    distinct = v[ks - 1] != v[ks]
    ks = ks[distinct]
    if len(ks) == 0:
        return None
    left = np.maximum(pe2[ks - 1] - pe[ks - 1] ** 2 / ks, 0.0)
    right = np.maximum((tot2 - pe2[ks - 1]) - (tot - pe[ks - 1]) ** 2 / (n - ks), 0.0)
    child = left + right
    best = int(np.argmin(child))  # ties: smallest threshold
    k = int(ks[best])
    threshold = (v[k - 1] + v[k]) / 2.0
    return threshold, float(child[best])


def fit_tree(M: VerticalMatrix, residuals: np.ndarray, cfg: TreeConfig | None = None) -> RegressionTree:
    """Grow a residual tree greedily, then post-prune at ``cfg.eta``.

    Every candidate split is scored by the weighted-MSE (summed SSE)
    reduction over all columns and all midpoints between consecutive
    distinct sorted values.  A node stays a leaf when the depth limit is
    reached, a child would fall under ``min_leaf`` rows, or no split
    reduces the SSE.  Constant residuals therefore yield a single-leaf
    tree, which callers treat as the no-split stopping signal.
    """
    cfg = cfg or TreeConfig()
    e = np.asarray(residuals, dtype=float)
    if len(e) != M.shape[0]:
        raise DataError(f"residual length {len(e)} != matrix rows {M.shape[0]}")
    if len(e) == 0:
        raise DataError("cannot fit a tree on zero rows")

    X = M.values
    nodes: list[Node] = []

    def build(rows: np.ndarray, depth: int) -> int:
        sub = e[rows]
        count = len(rows)
        total = float(sub.sum())
        node = Node(mean=total / count, count=count,
                    sse=_sse(total, float(sub @ sub), count), depth=depth)
        nid = len(nodes)
        nodes.append(node)

        if depth >= cfg.max_depth or count < 2 * cfg.min_leaf or node.sse <= 0.0:
            return nid
        best_col, best_thr, best_child = -1, 0.0, node.sse
        for j in range(X.shape[1]):
            found = _best_split_column(X[rows, j], sub, cfg.min_leaf)
            if found is not None and found[1] < best_child:
                best_col, (best_thr, best_child) = j, found
        if best_col < 0:
            return nid

        node.split = (best_col, best_thr)
        go_left = X[rows, best_col] <= best_thr
        node.left = build(rows[go_left], depth + 1)
        node.right = build(rows[~go_left], depth + 1)
        return nid

    build(np.arange(len(e)), 0)
    tree = RegressionTree(nodes, list(M.column_info), n_total=len(e))
    return prune(tree, cfg.eta)


def prune(tree: RegressionTree, eta: float) -> RegressionTree:
    """Collapse splits whose normalised SSE reduction falls below ``eta``.

    The reduction of a split is the node's SSE minus the summed SSE of
    its two children (children scored on the rows they receive, not on
    their subtrees), normalised by the root SSE.  Collapsing is applied
    bottom-up until stable; a whole subtree disappears with its root
    split.  ``eta=0`` keeps every split.
    """
    nodes = [replace(n) for n in tree.nodes]
    root_sse = nodes[tree.root].sse
    if root_sse <= 0.0:
        keep = nodes[tree.root]
        keep.split, keep.left, keep.right = None, -1, -1
        return RegressionTree([keep], list(tree.column_info), tree.n_total)

    changed = True
    while changed:
        changed = False

        def visit(nid: int):
            nonlocal changed
            node = nodes[nid]
            if node.is_leaf:
                return
            visit(node.left)
            visit(node.right)
            reduction = node.sse - (nodes[node.left].sse + nodes[node.right].sse)
            if reduction / root_sse < eta:
                node.split, node.left, node.right = None, -1, -1
                changed = True

        visit(tree.root)

    # compact: drop nodes that became unreachable
    kept: list[Node] = []
    remap: dict[int, int] = {}

    def copy(nid: int) -> int:
        node = nodes[nid]
        new_id = len(kept)
        remap[nid] = new_id
        kept.append(node)
        if not node.is_leaf:
            node.left = copy(node.left)
            node.right = copy(node.right)
        return new_id

    copy(tree.root)
    return RegressionTree(kept, list(tree.column_info), tree.n_total, root=0)


def _path_condition(info: ColumnInfo, went_left: bool, threshold: float) -> Condition:
    if info.kind == "numeric":
        return Condition(info.name, "<=" if went_left else ">", float(threshold))
    if info.kind == "binary":
        return Condition(info.source, "=", 0.0 if went_left else 1.0)
    return Condition(info.source, "!=" if went_left else "=", info.level)


def _simplify(conditions: list[Condition]) -> tuple[Condition, ...]:
    """Merge path conditions to at most one interval / level set per covariate."""
    numeric_low: dict[str, float] = {}
    numeric_high: dict[str, float] = {}
    equal: dict[str, Condition] = {}
    unequal: dict[str, dict[str, Condition]] = {}
    order: list[str] = []
    for c in conditions:
        if c.column not in order:
            order.append(c.column)
        if c.relation == ">":
            numeric_low[c.column] = max(numeric_low.get(c.column, -np.inf), c.value)
        elif c.relation == "<=":
            numeric_high[c.column] = min(numeric_high.get(c.column, np.inf), c.value)
        elif c.relation == "=":
            equal[c.column] = c
        else:
            unequal.setdefault(c.column, {})[c.render()] = c

    out: list[Condition] = []
    for col in order:
        if col in equal:
            out.append(equal[col])
        elif col in unequal:
            out.extend(unequal[col].values())
        if col in numeric_low:
            out.append(Condition(col, ">", numeric_low[col]))
        if col in numeric_high:
            out.append(Condition(col, "<=", numeric_high[col]))
    return _sorted_conditions(out)


def select_worst_leaf(tree: RegressionTree) -> RuleFeature | None:
    """The rule of the leaf with the largest absolute mean residual.

    Ties prefer the larger sample count, then the left-most leaf.  A
    single-leaf tree has no extractable rule and returns None (the
    caller's stopping signal).
    """
    leaf_ids = tree.leaves()
    if len(leaf_ids) < 2:
        return None

    paths: dict[int, list[Condition]] = {}  # filled during traversal
    best_id = -1

    def walk(nid: int, conds: list[Condition]):
        node = tree.nodes[nid]
        if node.is_leaf:
            paths[nid] = list(conds)
            return
        col, thr = node.split
        info = tree.column_info[col]
        walk(node.left, conds + [_path_condition(info, True, thr)])
        walk(node.right, conds + [_path_condition(info, False, thr)])

    walk(tree.root, [])

    for nid in leaf_ids:  # left-most order; strict > keeps the earlier leaf on ties
        node = tree.nodes[nid]
        if best_id < 0:
            best_id = nid
            continue
        best = tree.nodes[best_id]
        if (abs(node.mean), node.count) > (abs(best.mean), best.count):
            best_id = nid

    best = tree.nodes[best_id]
    return RuleFeature(
        conditions=_simplify(paths[best_id]),
        source_iteration=0,
        leaf_mean=float(best.mean),
        leaf_share=best.count / tree.n_total,
    )


def _evaluate_condition(cond: Condition, M: VerticalMatrix) -> np.ndarray:
    names = M.column_names
    if isinstance(cond.value, str):
        onehot = f"{cond.column}={cond.value}"
        if onehot not in names:
            raise PredictionError(f"matrix lacks column {onehot!r} needed by rule "
                                  f"condition {cond.render()!r}")
        col = M.column(onehot)
        return col == 1.0 if cond.relation == "=" else col == 0.0
    if cond.column not in names:
        raise PredictionError(f"matrix lacks column {cond.column!r} needed by rule "
                              f"condition {cond.render()!r}")
    col = M.column(cond.column)
    if cond.relation == "<=":
        return col <= cond.value
    if cond.relation == ">":
        return col > cond.value
    return col == cond.value if cond.relation == "=" else col != cond.value


def apply_rule(rule: RuleFeature, M: VerticalMatrix) -> np.ndarray:
    """Evaluate the conjunction row-wise to a {0, 1} column."""
    if not rule.conditions:
        raise DataError("rule has no conditions")
    mask = np.ones(M.shape[0], dtype=bool)
    for cond in rule.conditions:
        mask &= _evaluate_condition(cond, M)
    return mask.astype(float)


def tree_predict(tree: RegressionTree, M: VerticalMatrix) -> np.ndarray:
    """Map every row to the mean residual of the leaf it lands in."""
    names = M.column_names
    index = {}
    for node in tree.nodes:
        if node.is_leaf:
            continue
        name = tree.column_info[node.split[0]].name
        if name not in names:
            raise PredictionError(f"matrix lacks column {name!r} used by a tree split")
        index[node.split[0]] = names.index(name)

    out = np.empty(M.shape[0], dtype=float)

    def route(nid: int, rows: np.ndarray):
        node = tree.nodes[nid]
        if node.is_leaf:
            out[rows] = node.mean
            return
        col, thr = node.split
        go_left = M.values[rows, index[col]] <= thr
        route(node.left, rows[go_left])
        route(node.right, rows[~go_left])

    route(tree.root, np.arange(M.shape[0]))
    return out
