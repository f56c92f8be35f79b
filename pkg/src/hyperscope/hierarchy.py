"""Analyst-defined partition hierarchy over one matrix axis.

A tree per axis: internal nodes are named groups (nestable, freely
reorderable, independently collapsible per branch), leaves are node/edge
ids. Trees are immutable; every mutation returns a new version. Projection
flattens a matrix through both trees: each collapsed branch becomes one
visible row/column aggregating its member cells, expanded entries pass
through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Union

import numpy as np

ROOT = ""  # reserved name of the implicit top-level group

TreeEntry = Union[int, "GroupNode"]

AGGREGATORS = ("max", "mean")


@dataclass(frozen=True)
class GroupNode:
    name: str
    children: tuple[TreeEntry, ...]
    collapsed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class VisibleEntry:
    """One visible row/column after projection: a pass-through leaf or a
    collapsed group, with the underlying leaf ids it covers."""

    kind: str  # "leaf" | "group"
    label: str
    leaves: tuple[int, ...]


@dataclass(frozen=True)
class PartitionTree:
    axis: str  # "rows" | "cols"
    n_leaves: int
    root: GroupNode
    version: int = 0

    def __post_init__(self) -> None:
        if self.axis not in ("rows", "cols"):
            raise ValueError(f"axis must be 'rows' or 'cols', got {self.axis!r}")
        leaves = _collect_leaves(self.root)
        if sorted(leaves) != list(range(self.n_leaves)):
            raise ValueError("tree must contain every leaf 0..k-1 exactly once")
        names = _collect_names(self.root)
        if len(names) != len(set(names)):
            raise ValueError("group names must be unique per axis")

    def group_names(self) -> list[str]:
        return [n for n in _collect_names(self.root) if n != ROOT]

    def leaves_in_order(self) -> list[int]:
        return _collect_leaves(self.root)


def flat_tree(axis: str, n_leaves: int) -> PartitionTree:
    """Initial tree: all leaves directly under the root, ingestion order."""
    return PartitionTree(axis, n_leaves, GroupNode(ROOT, tuple(range(n_leaves))))


def _collect_leaves(node: GroupNode) -> list[int]:
    out: list[int] = []
    for child in node.children:
        if isinstance(child, GroupNode):
            out.extend(_collect_leaves(child))
        else:
            out.append(child)
    return out


def _collect_names(node: GroupNode) -> list[str]:
    out = [node.name]
    for child in node.children:
        if isinstance(child, GroupNode):
            out.extend(_collect_names(child))
    return out


def _find_group(node: GroupNode, name: str) -> GroupNode | None:
    if node.name == name:
        return node
    for child in node.children:
        if isinstance(child, GroupNode):
            found = _find_group(child, name)
            if found is not None:
                return found
    return None


def _matches(child: TreeEntry, ref: int | str) -> bool:
    if isinstance(child, GroupNode):
        return isinstance(ref, str) and child.name == ref
    return isinstance(ref, int) and child == ref


def _detach(node: GroupNode, ref: int | str) -> tuple[GroupNode, TreeEntry | None]:
    """Remove the first entry matching ref anywhere below node."""
    for idx, child in enumerate(node.children):
        if _matches(child, ref):
            children = node.children[:idx] + node.children[idx + 1 :]
            return replace(node, children=children), child
    for idx, child in enumerate(node.children):
        if isinstance(child, GroupNode):
            new_child, taken = _detach(child, ref)
            if taken is not None:
                children = node.children[:idx] + (new_child,) + node.children[idx + 1 :]
                return replace(node, children=children), taken
    return node, None


def _attach(node: GroupNode, parent_name: str, entry: TreeEntry, position: int | None) -> GroupNode:
    if node.name == parent_name:
        children = list(node.children)
        if position is None:
            children.append(entry)
        else:
            children.insert(position, entry)
        return replace(node, children=tuple(children))
    children = list(node.children)
    for idx, child in enumerate(children):
        if isinstance(child, GroupNode):
            children[idx] = _attach(child, parent_name, entry, position)
    return replace(node, children=tuple(children))


def _map_group(node: GroupNode, name: str, fn) -> GroupNode:
    if node.name == name:
        return fn(node)
    children = tuple(
        _map_group(c, name, fn) if isinstance(c, GroupNode) else c for c in node.children
    )
    return replace(node, children=children)


def mutate(tree: PartitionTree, edit: Mapping) -> PartitionTree:
    """Apply one structural edit, returning a new tree version.

    Edits are JSON-shaped mappings with an ``op`` key:

    - ``create_group``: name, members (leaf ids / group names), parent?
    - ``move_entry``: entry, parent, position?
    - ``rename``: old, new
    - ``delete_group``: name, cascade? (non-empty groups dissolve into their
      parent only when cascade is set)
    - ``reorder_siblings``: parent, order (permutation of current children)
    """
    op = edit.get("op")
    root = tree.root

    if op == "create_group":
        name = edit["name"]
        if not name or name == ROOT:
            raise ValueError("group name must be nonempty")
        if name in _collect_names(root):
            raise ValueError(f"duplicate group name {name!r}")
        parent = edit.get("parent", ROOT)
        if _find_group(root, parent) is None:
            raise KeyError(f"unknown parent group {parent!r}")
        members = list(edit.get("members", []))
        taken: list[TreeEntry] = []
        for ref in members:
            root, entry = _detach(root, ref)
            if entry is None:
                raise KeyError(f"unknown entry {ref!r}")
            taken.append(entry)
        root = _attach(root, parent, GroupNode(name, tuple(taken)), None)

    elif op == "move_entry":
        ref = edit["entry"]
        parent = edit["parent"]
        if isinstance(ref, str):
            moving = _find_group(root, ref)
            if moving is None:
                raise KeyError(f"unknown group {ref!r}")
            if parent == ref or parent in _collect_names(moving):
                raise ValueError(f"cannot move group {ref!r} into its own subtree")
        if _find_group(root, parent) is None:
            raise KeyError(f"unknown parent group {parent!r}")
        root, entry = _detach(root, ref)
        if entry is None:
            raise KeyError(f"unknown entry {ref!r}")
        root = _attach(root, parent, entry, edit.get("position"))

    elif op == "rename":
        old, new = edit["old"], edit["new"]
        if not new or new == ROOT:
            raise ValueError("group name must be nonempty")
        if _find_group(root, old) is None:
            raise KeyError(f"unknown group {old!r}")
        if new in _collect_names(root):
            raise ValueError(f"duplicate group name {new!r}")
        root = _map_group(root, old, lambda g: replace(g, name=new))

    elif op == "delete_group":
        name = edit["name"]
        if name == ROOT:
            raise ValueError("cannot delete the root")
        group = _find_group(root, name)
        if group is None:
            raise KeyError(f"unknown group {name!r}")
        if group.children and not edit.get("cascade", False):
            raise ValueError(f"group {name!r} is not empty; pass cascade to dissolve")
        root = _dissolve(root, name)

    elif op == "reorder_siblings":
        parent = edit.get("parent", ROOT)
        group = _find_group(root, parent)
        if group is None:
            raise KeyError(f"unknown group {parent!r}")
        order = list(edit["order"])
        current = list(group.children)
        picked: list[TreeEntry] = []
        remaining = list(current)
        for ref in order:
            hit = next((c for c in remaining if _matches(c, ref)), None)
            if hit is None:
                raise ValueError(f"order entry {ref!r} is not a child of {parent!r}")
            remaining.remove(hit)
            picked.append(hit)
        if remaining:
            raise ValueError("order must list every current child exactly once")
        root = _map_group(root, parent, lambda g: replace(g, children=tuple(picked)))

    else:
        raise ValueError(f"unknown edit op {op!r}")

    return PartitionTree(tree.axis, tree.n_leaves, root, version=tree.version + 1)


def _dissolve(node: GroupNode, name: str) -> GroupNode:
    children: list[TreeEntry] = []
    for child in node.children:
        if isinstance(child, GroupNode):
            if child.name == name:
                children.extend(child.children)  # splice into grandparent
            else:
                children.append(_dissolve(child, name))
        else:
            children.append(child)
    return replace(node, children=tuple(children))


def set_collapse(tree: PartitionTree, group: str, collapsed: bool) -> PartitionTree:
    """Flip exactly one branch's collapse flag (local to that branch)."""
    if _find_group(tree.root, group) is None:
        raise KeyError(f"unknown group {group!r}")
    root = _map_group(tree.root, group, lambda g: replace(g, collapsed=collapsed))
    return PartitionTree(tree.axis, tree.n_leaves, root, version=tree.version + 1)


def visible_entries(tree: PartitionTree) -> list[VisibleEntry]:
    """Visible axis entries in sibling order: collapsed branches contract to
    one entry covering all their leaves, expanded entries pass through."""
    out: list[VisibleEntry] = []

    def walk(node: GroupNode) -> None:
        for child in node.children:
            if isinstance(child, GroupNode):
                if child.collapsed:
                    out.append(
                        VisibleEntry("group", child.name, tuple(_collect_leaves(child)))
                    )
                else:
                    walk(child)
            else:
                out.append(VisibleEntry("leaf", str(child), (child,)))

    walk(tree.root)
    return out


def project(
    matrix,
    rows: PartitionTree,
    cols: PartitionTree,
    aggregator: str = "max",
) -> tuple[np.ndarray, list[VisibleEntry], list[VisibleEntry]]:
    """Project a matrix through both partition trees.

    Every (visible row, visible col) cell is the aggregate over all covered
    member cells; with fully expanded trees in ingestion order this is the
    identity, bit-exact.
    """
    if aggregator not in AGGREGATORS:
        raise ValueError(f"aggregator must be one of {AGGREGATORS}, got {aggregator!r}")
    data = np.asarray(getattr(matrix, "data", matrix), dtype=np.float64)
    row_entries = visible_entries(rows)
    col_entries = visible_entries(cols)
    if rows.n_leaves != data.shape[0] or cols.n_leaves != data.shape[1]:
        raise ValueError("partition trees do not cover the matrix axes")

    row_idx = [list(e.leaves) for e in row_entries]
    col_idx = [list(e.leaves) for e in col_entries]
    out = _reduce_axis(data, row_idx, aggregator, axis=0)
    out = _reduce_axis(out, col_idx, aggregator, axis=1)
    if aggregator == "mean":
        sizes = np.outer(
            [max(len(ri), 1) for ri in row_idx], [max(len(ci), 1) for ci in col_idx]
        ).astype(np.float64)
        out = out / sizes
    return out, row_entries, col_entries


def _reduce_axis(data: np.ndarray, groups: list[list[int]], aggregator: str, axis: int) -> np.ndarray:
    """Group-reduce one axis; mean defers the division to the caller so the
    rectangle sum stays exact (and single-leaf groups stay bit-identical)."""
    if all(len(g) == 1 for g in groups):
        flat = [g[0] for g in groups]
        return data[flat] if axis == 0 else data[:, flat]
    work = data if axis == 0 else data.T
    parts = []
    for g in groups:
        if not g:  # empty group contributes a zero row
            parts.append(np.zeros(work.shape[1]))
        elif aggregator == "max":
            parts.append(work[g].max(axis=0))
        else:
            parts.append(work[g].sum(axis=0))
    out = np.stack(parts)
    return out if axis == 0 else out.T
