"""Sparse multinomial beliefs over grid cells and their algebra.

A :class:`Belief` stores the support as sorted int64 lattice keys (see
:func:`gridbp.grid.encode_cells`) next to a probability vector. Sorting keys
orders cells by ``(east, north)``, which is also the canonical id order used
to break ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .grid import Grid, decode_keys, encode_cells, format_id

__all__ = [
    "Belief",
    "SampleSet",
    "OpCounter",
    "DegenerateInputError",
    "map_estimate",
    "belief_product",
    "damped_update",
    "filter_belief",
    "cavity",
    "candidate_window",
    "has_converged",
    "total_variation",
    "point_estimate",
]


class DegenerateInputError(ValueError):
    pass


@dataclass
class OpCounter:
    """Multiply-accumulate counters for the belief update path."""

    product_ops: int = 0
    damping_ops: int = 0
    products: int = 0
    product_operands: int = 0
    messages: int = 0
    message_ids: int = 0
    estimates: int = 0
    estimate_ids: int = 0

    def record_message(self, size: int) -> None:
        self.messages += 1
        self.message_ids += int(size)

    @property
    def kbar(self) -> float:
        return self.message_ids / self.messages if self.messages else 0.0

    def merge(self, other: "OpCounter") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


class Belief:
    """Normalized pmf over a finite set of grid cells."""

    __slots__ = ("keys", "probs", "grid")

    def __init__(self, keys, probs, grid: Grid, *, normalize: bool = True, _trusted: bool = False):
        keys = np.asarray(keys, dtype=np.int64).reshape(-1)
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if not _trusted:
            if keys.shape != probs.shape:
                raise ValueError("keys and probs differ in length")
            if np.any(probs < 0) or not np.all(np.isfinite(probs)):
                raise ValueError("weights must be finite and non-negative")
            keep = probs > 0
            keys, probs = keys[keep], probs[keep]
            if len(keys) == 0:
                raise DegenerateInputError("belief needs at least one positive entry")
            order = np.argsort(keys, kind="stable")
            keys, probs = keys[order], probs[order]
            if np.any(keys[1:] == keys[:-1]):
                keys, inv = np.unique(keys, return_inverse=True)
                probs = np.bincount(inv, weights=probs, minlength=len(keys))
        if normalize:
            probs = probs / probs.sum()
        self.keys = keys
        self.probs = probs
        self.grid = grid

    # construction -----------------------------------------------------------

    @classmethod
    def from_cells(cls, cells, weights, grid: Grid) -> "Belief":
        return cls(encode_cells(cells), weights, grid)

    @classmethod
    def from_mapping(cls, mapping: Mapping, grid: Grid) -> "Belief":
        ids = list(mapping)
        return cls.from_cells(grid.cells_of_ids(ids), [mapping[g] for g in ids], grid)

    @classmethod
    def uniform(cls, ids_or_cells, grid: Grid) -> "Belief":
        cells = _as_cells(ids_or_cells, grid)
        return cls.from_cells(cells, np.ones(len(cells)), grid)

    @classmethod
    def point_mass(cls, gid, grid: Grid) -> "Belief":
        return cls.from_cells([grid.cell_of_id(gid)], [1.0], grid)

    # views ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def cells(self) -> np.ndarray:
        return decode_keys(self.keys)

    @property
    def ids(self) -> list:
        return self.grid.ids_of_cells(self.cells)

    def items(self) -> Iterator[tuple[object, float]]:
        return zip(self.ids, self.probs.tolist())

    def to_dict(self) -> dict:
        return dict(self.items())

    def prob(self, gid) -> float:
        key = encode_cells([self.grid.cell_of_id(gid)])[0]
        return float(self.lookup(np.array([key]))[0])

    def lookup(self, keys: np.ndarray, default: float = 0.0) -> np.ndarray:
        """Probabilities at ``keys`` (``default`` where absent)."""
        keys = np.asarray(keys, dtype=np.int64)
        idx = np.searchsorted(self.keys, keys)
        idx_c = np.minimum(idx, len(self.keys) - 1)
        hit = self.keys[idx_c] == keys
        return np.where(hit, self.probs[idx_c], default)

    def entropy(self) -> float:
        p = self.probs
        return float(-(p * np.log(p)).sum())

    def equals(self, other: "Belief") -> bool:
        return np.array_equal(self.keys, other.keys) and np.array_equal(self.probs, other.probs)

    def serialize(self) -> list[tuple[str, str]]:
        return [(format_id(g), format(p, ".17g")) for g, p in self.items()]

    def __repr__(self) -> str:
        head = ", ".join(f"{format_id(g)}: {p:.4g}" for g, p in list(self.items())[:4])
        more = ", ..." if len(self) > 4 else ""
        return f"Belief({{{head}{more}}}, n={len(self)})"


def _as_cells(ids_or_cells, grid: Grid) -> np.ndarray:
    if isinstance(ids_or_cells, np.ndarray) and ids_or_cells.dtype.kind in "iu":
        return ids_or_cells.reshape(-1, 2).astype(np.int64)
    return grid.cells_of_ids(list(ids_or_cells))


@dataclass
class SampleSet:
    """Particles drawn for one node's incoming messages (lattice cells).

    ``ranges`` optionally keeps the continuous range draw behind each
    particle, before it was snapped to whole cells.
    """

    grid: Grid
    cells: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    ranges: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.cells)

    def extend(self, other: "SampleSet | np.ndarray") -> None:
        if isinstance(other, SampleSet):
            extra = other.cells
            if self.ranges is not None and other.ranges is not None:
                self.ranges = np.concatenate([self.ranges, other.ranges])
            else:
                self.ranges = None
        else:
            extra = np.asarray(other, dtype=np.int64)
            self.ranges = None
        self.cells = np.concatenate([self.cells, extra.reshape(-1, 2)])

    @property
    def samples(self) -> list:
        return self.grid.ids_of_cells(self.cells)

    def counts(self) -> dict:
        keys, counts = np.unique(encode_cells(self.cells), return_counts=True)
        ids = self.grid.ids_of_cells(decode_keys(keys))
        return dict(zip(ids, counts.tolist()))


# -- operations -----------------------------------------------------------


def map_estimate(samples: SampleSet, neighbor_count: int, alpha: float = 1.0) -> Belief:
    """Dirichlet-multinomial estimate of a message from particle counts.

    Support is the set of distinct sampled cells. With counts ``M_k`` the
    weight of cell ``k`` is ``(M_k + n*alpha) / (n * sum_k(M_k + alpha))``
    for ``n = neighbor_count``, renormalized to sum to one.
    """
    if len(samples) == 0:
        raise DegenerateInputError("cannot estimate a message from zero samples")
    if neighbor_count < 1:
        raise ValueError("neighbor_count must be >= 1")
    keys, counts = np.unique(encode_cells(samples.cells), return_counts=True)
    n = float(neighbor_count)
    raw = (counts + n * alpha) / (n * np.sum(counts + alpha))
    return Belief(keys, raw, samples.grid, _trusted=True)


def belief_product(prior: Belief, messages: Sequence[Belief], alpha: float = 1.0,
                   counter: OpCounter | None = None) -> Belief:
    """Pointwise product of ``prior`` and ``messages`` on their common support.

    When the supports share no cell, every operand is smoothed over the union
    (``alpha`` pseudo-mass added to each missing cell, relative to the
    operand's size) before multiplying, so the update never dead-ends.
    """
    operands = [prior, *messages]
    if counter is not None:
        counter.products += 1
        counter.product_operands += len(operands)
    if not messages:
        if counter is not None:
            counter.product_ops += len(prior)
        return Belief(prior.keys, prior.probs, prior.grid, _trusted=True)

    # Start from the smallest operand; the working support only shrinks.
    order = sorted(range(len(operands)), key=lambda k: len(operands[k]))
    first = operands[order[0]]
    keys, vals = first.keys, first.probs.copy()
    ops = 0
    for k in order[1:]:
        ops += len(keys)
        other = operands[k].lookup(keys)
        keep = other > 0
        keys, vals = keys[keep], vals[keep] * other[keep]
        if len(keys) == 0:
            break
    if len(keys) and vals.sum() > 0:
        ops += len(keys)
        if counter is not None:
            counter.product_ops += ops
        keep = vals > 0
        return Belief(keys[keep], vals[keep], prior.grid, _trusted=True)

    union = operands[0].keys
    for b in operands[1:]:
        union = np.union1d(union, b.keys)
    log_vals = np.zeros(len(union))
    for b in operands:
        floor = alpha / (1.0 + alpha * len(b))
        log_vals += np.log(b.lookup(union, default=0.0) + floor)
    ops += len(union) * (len(operands) - 1) + len(union)
    if counter is not None:
        counter.product_ops += ops
    w = np.exp(log_vals - log_vals.max())
    keep = w > 0
    return Belief(union[keep], w[keep], prior.grid, _trusted=True)


def damped_update(old: Belief, product: Belief, damping: float,
                  counter: OpCounter | None = None) -> Belief:
    """Mixture ``damping * product + (1 - damping) * old`` over the union support."""
    if not 0.0 <= damping <= 1.0:
        raise ValueError("damping must lie in [0, 1]")
    if damping == 1.0:
        out = product
    elif damping == 0.0:
        out = old
    else:
        keys = np.union1d(old.keys, product.keys)
        vals = damping * product.lookup(keys) + (1.0 - damping) * old.lookup(keys)
        if counter is not None:
            counter.damping_ops += 2 * len(keys)
        keep = vals > 0  # a vanishing weight can underflow to zero
        return Belief(keys[keep], vals[keep], old.grid, _trusted=True)
    if counter is not None:
        counter.damping_ops += len(out)
    return Belief(out.keys, out.probs, out.grid, _trusted=True, normalize=False)


def filter_belief(b: Belief, energy: float) -> Belief:
    """Keep the most probable cells whose mass first reaches ``energy``."""
    if not 0.0 < energy <= 1.0:
        raise ValueError("energy must lie in (0, 1]")
    if energy >= 1.0 or len(b) == 1:
        return b
    # descending probability; equal probabilities keep ascending key order
    order = np.lexsort((b.keys, -b.probs))
    csum = np.cumsum(b.probs[order])
    n = int(np.searchsorted(csum, energy * csum[-1] * (1 - 1e-12))) + 1
    n = min(n, len(b))
    keep = np.sort(order[:n])
    return Belief(b.keys[keep], b.probs[keep], b.grid, _trusted=True)


def cavity(b: Belief, reverse: Belief | None) -> Belief:
    """``b / reverse`` renormalized; cells missing from ``reverse`` use its smallest value."""
    if reverse is None:
        return b
    denom = reverse.lookup(b.keys, default=reverse.probs.min())
    return Belief(b.keys, b.probs / denom, b.grid, _trusted=True)


def candidate_window(b: Belief | Iterable, radius: float, grid: Grid | None = None,
                     as_cells: bool = False):
    """Cells whose centers lie within ``radius`` meters of a support cell's center."""
    if isinstance(b, Belief):
        grid = b.grid
        cells = b.cells
    else:
        cells = _as_cells(b, grid)
    reach = int(np.floor(radius / grid.cell_size))
    di, dj = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
    disk = np.stack([di.ravel(), dj.ravel()], axis=1)
    disk = disk[np.hypot(disk[:, 0], disk[:, 1]) * grid.cell_size <= radius + 1e-9]
    all_cells = (cells[:, None, :] + disk[None, :, :]).reshape(-1, 2)
    keys = np.unique(encode_cells(all_cells))
    out = decode_keys(keys)
    out = out[grid.in_extent(out)]
    if as_cells:
        return out
    return set(grid.ids_of_cells(out))


def total_variation(p: Belief, q: Belief) -> float:
    keys = np.union1d(p.keys, q.keys)
    return 0.5 * float(np.abs(p.lookup(keys) - q.lookup(keys)).sum())


def has_converged(prev: Belief, nxt: Belief, eps: float) -> bool:
    return total_variation(prev, nxt) < eps


def point_estimate(b: Belief) -> np.ndarray:
    """Center of the most probable cell (lowest canonical id on ties)."""
    k = int(np.argmax(b.probs))  # first maximum = smallest key
    return b.grid.centers(decode_keys(b.keys[k:k + 1]))[0]
