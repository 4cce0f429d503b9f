"""Grid-BP message passing: ranging likelihood, sampled messages, node update."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import (
    Belief,
    OpCounter,
    SampleSet,
    belief_product,
    damped_update,
    filter_belief,
    map_estimate,
)
from .grid import Grid, common_prefix_strip, decode_keys

__all__ = [
    "BpParams",
    "Message",
    "RangeMeasurement",
    "pairwise_likelihood",
    "displacement_steps",
    "map_dm_to_id",
    "gibbs_message",
    "kernel_width",
    "bp_round",
    "message_record",
]


@dataclass(frozen=True)
class BpParams:
    """Tuning of the inference engine.

    ``kernel_width`` is ``h`` in meters; ``None`` derives it per measurement
    from ``noise_factor`` (see :func:`kernel_width`). ``send_limit`` caps the
    support of agent beliefs worth transmitting (see ``max_send_support``).
    """

    n_particles: int = 200
    kernel_width: float | None = None
    damping: float = 0.5
    alpha: float = 1.0
    max_iter: int = 15
    tol: float = 1e-3
    filter_energy: float = 0.8
    grid_radius: float = 100.0
    noise_factor: float = 0.0
    path_loss: float = 2.0
    cavity: bool = True
    send_limit: int | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValueError("kernel_width must be positive")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must lie in [0, 1]")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0.0 < self.filter_energy <= 1.0:
            raise ValueError("filter_energy must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.send_limit is not None and self.send_limit < 0:
            raise ValueError("send_limit must be >= 0")

    @property
    def max_send_support(self) -> int | None:
        """Largest agent belief that gets transmitted; ``None`` means no limit.

        Defaults to ``n_particles``: a wider belief carries less information
        than the particle cloud drawn from it can resolve. ``send_limit=0``
        disables the cut.
        """
        if self.send_limit is None:
            return self.n_particles
        return self.send_limit or None


@dataclass(frozen=True)
class RangeMeasurement:
    j: int
    i: int
    r: float
    time_slot: int = 0


@dataclass(frozen=True)
class Message:
    """A belief sent from ``sender`` to ``receiver`` at BP iteration ``iteration``."""

    sender: int
    receiver: int
    belief: Belief
    iteration: int = 0


def kernel_width(r: float, params: BpParams, cell_size: float) -> float:
    """``h`` for one measurement: fixed if configured, else the ranging noise std.

    The noise model has std ``sqrt(K_e * r**beta)``; the result never drops
    below one cell.
    """
    if params.kernel_width is not None:
        return params.kernel_width
    if params.noise_factor > 0:
        return max(cell_size, math.sqrt(params.noise_factor * r ** params.path_loss))
    return cell_size


def pairwise_likelihood(x_i, x_j, r: float, h: float, grid: Grid) -> float:
    """Unnormalized ranging likelihood ``exp(-((r - |C_i - C_j|) / h)**2)``."""
    if not h > 0:
        raise ValueError("h must be positive")
    ci, cj = grid.centers([grid.cell_of_id(x_i), grid.cell_of_id(x_j)])
    return math.exp(-((r - math.hypot(*(ci - cj))) / h) ** 2)


def displacement_steps(r_hat, phi, cell_size: float) -> np.ndarray:
    """Whole-cell east/north steps for range ``r_hat`` at bearing ``phi``.

    Steps are truncated toward zero, so ``|d| <= r_hat / D`` on each axis.
    """
    r_hat = np.asarray(r_hat, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    scaled = r_hat / cell_size
    steps = np.stack([np.trunc(scaled * np.cos(phi)), np.trunc(scaled * np.sin(phi))], axis=-1)
    return steps.astype(np.int64)


def map_dm_to_id(x_j, r_hat: float, phi: float, grid: Grid):
    """Id reached from ``x_j`` by moving ``r_hat`` meters at bearing ``phi``."""
    if r_hat < 0:
        raise ValueError("r_hat must be non-negative")
    d_h, d_v = displacement_steps(r_hat, phi, grid.cell_size)
    east, north = grid.cell_of_id(x_j)
    mid = grid.id_of_cell(east + int(d_h), north)
    east, north = grid.cell_of_id(mid)
    return grid.id_of_cell(east, north + int(d_v))


def gibbs_message(parent: Belief, r: float, params: BpParams, rng: np.random.Generator,
                  h: float | None = None) -> SampleSet:
    """Sample cells for the receiver given the sender's belief and a range.

    Draws ``params.n_particles`` triples (parent cell, bearing, noisy range)
    and displaces each parent cell accordingly. Negative range draws clamp
    to 0; particles landing outside the grid's extent are dropped. The range
    draws of the kept particles are returned alongside their cells.
    """
    grid = parent.grid
    n_particles = params.n_particles
    if h is None:
        h = kernel_width(r, params, grid.cell_size)
    if len(parent) == 1:
        idx = np.zeros(n_particles, dtype=np.int64)
    else:
        idx = rng.choice(len(parent), size=n_particles, p=parent.probs)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n_particles)
    r_hat = np.maximum(rng.normal(r, h, size=n_particles), 0.0)
    base = decode_keys(parent.keys[idx])
    cells = base + displacement_steps(r_hat, phi, grid.cell_size)
    keep = grid.in_extent(cells)
    return SampleSet(grid, cells[keep], r_hat[keep])


def bp_round(node, inbox: Sequence[tuple[Message, RangeMeasurement]], params: BpParams,
             rng: np.random.Generator, prior: Belief | None = None,
             counter: OpCounter | None = None) -> tuple[Belief, list[Message]]:
    """One Grid-BP update of ``node``'s belief.

    ``node`` needs ``id`` and ``belief`` attributes; the factor ``prior``
    defaults to ``node.prior`` when present, else the current belief. Each
    inbox entry pairs the neighbor's transmitted belief with the range
    measured to it. Returns the new (filtered) belief and the parametric
    messages estimated from each neighbor, addressed to ``node``.
    """
    old = node.belief
    if not inbox:
        return old, []
    if prior is None:
        prior = getattr(node, "prior", None)
        if prior is None:
            prior = old
    n_nbrs = len(inbox)
    iteration = max(m.iteration for m, _ in inbox) + 1
    incoming = []
    for msg, meas in inbox:
        if counter is not None:
            counter.record_message(len(msg.belief))
        samples = gibbs_message(msg.belief, meas.r, params, rng)
        if len(samples) == 0:
            continue
        mu = map_estimate(samples, n_nbrs, params.alpha)
        if counter is not None:
            counter.estimates += 1
            counter.estimate_ids += len(mu)
        incoming.append(Message(msg.sender, node.id, mu, iteration))
    if not incoming:
        return old, []
    product = belief_product(prior, [m.belief for m in incoming], params.alpha, counter)
    new = damped_update(old, product, params.damping, counter)
    return filter_belief(new, params.filter_energy), incoming


def message_record(msg: Message) -> str:
    """One JSON line: sender, receiver, iteration and prefix-stripped ``(id, theta)`` pairs."""
    prefix, suffixes = common_prefix_strip(msg.belief.ids)
    entries = [[s, format(p, ".17g")] for s, p in zip(suffixes, msg.belief.probs.tolist())]
    return json.dumps({"from": msg.sender, "to": msg.receiver, "s": msg.iteration,
                       "prefix": prefix, "entries": entries}, separators=(",", ":"))
