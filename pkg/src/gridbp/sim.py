"""Network scenarios, ToA ranging and the time-slot loop around Grid-BP."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .belief import Belief, OpCounter, cavity, has_converged, point_estimate
from .bp import BpParams, Message, RangeMeasurement, bp_round
from .grid import Grid, MgrsGrid, PlanarGrid, decode_keys

__all__ = [
    "ScenarioError",
    "ScenarioConfig",
    "NodeState",
    "TrialResult",
    "make_grid",
    "node_rng",
    "generate_scenario",
    "measure_ranges",
    "init_beliefs",
    "run_time_slot",
    "compute_rmse",
    "run_noncooperative_baseline",
    "run_trial",
    "snapshot_records",
]

AGENT = "agent"
ANCHOR = "anchor"


class ScenarioError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """All parameters of one simulated network and its inference run.

    Defaults describe the reference network: 100 agents and 20 anchors in a
    100 m x 100 m square, 12 m radio range, 1 m cells, 200 particles and
    15 BP iterations.
    """

    n_agents: int = 100
    n_anchors: int = 20
    arena: tuple[float, float] = (100.0, 100.0)
    comm_range: float = 12.0
    noise_factor: float = 0.0
    path_loss: float = 2.0
    cell_size: float = 1.0
    n_particles: int = 200
    max_iter: int = 15
    damping: float = 0.5
    filter_energy: float = 0.8
    grid_radius: float = 100.0
    anchor_sigma: float = 1.0
    time_slots: int = 1
    seed: int = 0
    kernel_width: float | None = None
    alpha: float = 1.0
    tol: float = 1e-3
    cavity: bool = True
    send_limit: int | None = None
    connectivity: str = "anchor"
    grid_system: str = "planar"

    def __post_init__(self):
        if self.n_anchors < 4:
            raise ValueError("at least 4 anchors are required")
        if self.n_agents < 1:
            raise ValueError("at least one agent is required")
        if min(self.arena) <= 0 or self.comm_range <= 0 or self.cell_size <= 0:
            raise ValueError("lengths must be positive")
        if self.noise_factor < 0 or self.anchor_sigma < 0:
            raise ValueError("noise_factor and anchor_sigma must be non-negative")
        if self.time_slots < 1:
            raise ValueError("time_slots must be >= 1")
        if self.connectivity not in ("anchor", "full", "none"):
            raise ValueError("connectivity must be 'anchor', 'full' or 'none'")
        if self.grid_system not in ("planar", "mgrs"):
            raise ValueError("grid_system must be 'planar' or 'mgrs'")
        self.bp_params()  # validates the inference fields

    def bp_params(self) -> BpParams:
        return BpParams(
            n_particles=self.n_particles,
            kernel_width=self.kernel_width,
            damping=self.damping,
            alpha=self.alpha,
            max_iter=self.max_iter,
            tol=self.tol,
            filter_energy=self.filter_energy,
            grid_radius=self.grid_radius,
            noise_factor=self.noise_factor,
            path_loss=self.path_loss,
            cavity=self.cavity,
            send_limit=self.send_limit,
        )

    @property
    def n_nodes(self) -> int:
        return self.n_agents + self.n_anchors

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class NodeState:
    id: int
    role: str
    true_position: np.ndarray
    neighbors: frozenset = frozenset()
    belief: Belief | None = None
    prior: Belief | None = None
    informative: bool = False

    @property
    def is_anchor(self) -> bool:
        return self.role == ANCHOR


@dataclass
class TrialResult:
    errors: dict
    rmse: float
    bp_iterations: int
    kbar: float
    product_ops: int
    wall_time: float
    mean_degree: float = 0.0
    retries: int = 0
    counters: OpCounter = field(default_factory=OpCounter)

    @property
    def product_cost_ratio(self) -> float:
        """Product MACs per ``K * (|N_i| + 1)`` unit, K being the mean message size."""
        c = self.counters
        if not c.products:
            return 0.0
        k = c.estimate_ids / c.estimates if c.estimates else 0.0
        per_product = c.product_ops / c.products
        operands = c.product_operands / c.products
        return per_product / (k * operands) if k else 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["errors"] = {str(k): v for k, v in self.errors.items()}
        return json.dumps(d, sort_keys=True)


def make_grid(cfg: ScenarioConfig) -> Grid:
    if cfg.grid_system == "mgrs":
        return MgrsGrid(cell_size=cfg.cell_size)
    return PlanarGrid(cell_size=cfg.cell_size)


def node_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``; order of use does not matter."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), *stream]))


# stream tags
_PLACE, _MEASURE, _ANCHOR, _BP, _BASELINE = range(5)


def _neighbor_sets(pos: np.ndarray, comm_range: float) -> list[frozenset]:
    tree = cKDTree(pos)
    pairs = tree.query_pairs(comm_range, output_type="ndarray")
    nbrs = [set() for _ in range(len(pos))]
    for a, b in pairs:
        nbrs[a].add(int(b))
        nbrs[b].add(int(a))
    return [frozenset(s) for s in nbrs]


def _connected(nbrs: Sequence[frozenset], n_anchors: int, mode: str) -> bool:
    if mode == "none":
        return True
    n = len(nbrs)
    rows = [a for a, s in enumerate(nbrs) for _ in s]
    cols = [b for s in nbrs for b in s]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    if mode == "full":
        return n_comp == 1
    anchored = set(labels[:n_anchors].tolist())
    return all(labels[k] in anchored for k in range(n_anchors, n))


def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator | None = None,
                      max_retries: int = 100) -> list[NodeState]:
    """Place nodes uniformly; the first ``n_anchors`` nodes are anchors.

    Placements that fail ``cfg.connectivity`` are redrawn. The number of
    redraws is stored on each node list as ``retries`` via
    :func:`generate_scenario_with_retries`.
    """
    return generate_scenario_with_retries(cfg, rng, max_retries)[0]


def generate_scenario_with_retries(cfg: ScenarioConfig, rng: np.random.Generator | None = None,
                                   max_retries: int = 100) -> tuple[list[NodeState], int]:
    if rng is None:
        rng = node_rng(cfg.seed, _PLACE)
    size = np.asarray(cfg.arena, dtype=np.float64)
    for attempt in range(max_retries + 1):
        pos = rng.uniform(0.0, 1.0, size=(cfg.n_nodes, 2)) * size
        nbrs = _neighbor_sets(pos, cfg.comm_range)
        if _connected(nbrs, cfg.n_anchors, cfg.connectivity):
            nodes = [
                NodeState(k, ANCHOR if k < cfg.n_anchors else AGENT, pos[k], nbrs[k])
                for k in range(cfg.n_nodes)
            ]
            return nodes, attempt
    raise ScenarioError(f"no {cfg.connectivity}-connected placement after {max_retries} retries")


def mean_degree(nodes: Sequence[NodeState]) -> float:
    return float(np.mean([len(n.neighbors) for n in nodes]))


def measure_ranges(nodes: Sequence[NodeState], cfg: ScenarioConfig, t: int = 0,
                   rng: np.random.Generator | None = None) -> dict[tuple[int, int], RangeMeasurement]:
    """One noisy ToA range per neighbor pair, keyed both ways ``(j, i)`` and ``(i, j)``.

    ``r = d + eta`` with ``eta ~ N(0, K_e * d**beta)``, clamped at zero.
    """
    if rng is None:
        rng = node_rng(cfg.seed, _MEASURE, t)
    out = {}
    for node in nodes:
        for j in sorted(node.neighbors):
            if j <= node.id:
                continue
            d = float(np.linalg.norm(nodes[j].true_position - node.true_position))
            sigma = math.sqrt(cfg.noise_factor * d ** cfg.path_loss)
            r = max(d + rng.normal(0.0, sigma), 0.0) if sigma > 0 else d
            out[(j, node.id)] = RangeMeasurement(j, node.id, r, t)
            out[(node.id, j)] = RangeMeasurement(node.id, j, r, t)
    return out


def arena_cells(cfg: ScenarioConfig, grid: Grid) -> np.ndarray:
    lo = grid.cells_of_points([0.0, 0.0])[0]
    hi = grid.cells_of_points(np.asarray(cfg.arena) - 1e-9)[0]
    e, n = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    return np.stack([e.ravel(), n.ravel()], axis=1)


def anchor_belief(center: np.ndarray, sigma: float, grid: Grid) -> Belief:
    """Isotropic Gaussian around ``center`` discretized on cells, cut at 3 sigma."""
    home = grid.cells_of_points(center)
    if sigma <= 0:
        return Belief.from_cells(home, [1.0], grid)
    reach = int(math.ceil(3 * sigma / grid.cell_size)) + 1
    e, n = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
    cells = home + np.stack([e.ravel(), n.ravel()], axis=1)
    cells = cells[grid.in_extent(cells)]
    d2 = ((grid.centers(cells) - center) ** 2).sum(axis=1)
    inside = d2 <= (3 * sigma) ** 2
    if not inside.any():
        return Belief.from_cells(home, [1.0], grid)
    return Belief.from_cells(cells[inside], np.exp(-0.5 * d2[inside] / sigma**2), grid)


def init_beliefs(nodes: list[NodeState], cfg: ScenarioConfig, grid: Grid,
                 rng: np.random.Generator | None = None) -> list[NodeState]:
    """Uniform agent beliefs over the arena; Gaussian anchor beliefs.

    Each anchor's Gaussian is centred on one draw around its true position.
    """
    if rng is None:
        rng = node_rng(cfg.seed, _ANCHOR)
    uniform = Belief.uniform(arena_cells(cfg, grid), grid)
    for node in nodes:
        if node.is_anchor:
            center = node.true_position + rng.normal(0.0, cfg.anchor_sigma, size=2)
            node.belief = anchor_belief(center, cfg.anchor_sigma, grid)
            node.informative = True
        else:
            node.belief = uniform
            node.informative = False
        node.prior = node.belief
    return nodes


def _restrict_window(prior: Belief, sources: Sequence[Belief], radius: float) -> Belief:
    """Cells of ``prior`` within ``radius`` of any cell received from ``sources``."""
    cells = np.unique(np.concatenate([b.keys for b in sources]))
    tree = cKDTree(prior.grid.centers(decode_keys(cells)))
    dist, _ = tree.query(prior.grid.centers(prior.cells), distance_upper_bound=radius + 1e-9)
    keep = np.isfinite(dist)
    if not keep.any():
        return prior
    return Belief(prior.keys[keep], prior.probs[keep], prior.grid, _trusted=True)


def _inbox(node: NodeState, nodes: Sequence[NodeState], beliefs: Sequence[Belief],
           informative: Sequence[bool], ranges: dict, reverse: dict, s: int, params: BpParams,
           agents_only_anchors: bool = False):
    # beliefs and informative flags are the iteration-s snapshot
    inbox = []
    for j in sorted(node.neighbors):
        other = nodes[j]
        if not informative[j] or (agents_only_anchors and not other.is_anchor):
            continue
        b = beliefs[j]
        limit = params.max_send_support
        if limit is not None and not other.is_anchor and len(b) > limit:
            continue
        if params.cavity and not other.is_anchor:
            b = cavity(b, reverse.get((node.id, j)))
        inbox.append((Message(j, node.id, b, s), ranges[(j, node.id)]))
    return inbox


def run_time_slot(nodes: list[NodeState], cfg: ScenarioConfig, grid: Grid, t: int = 0,
                  seed: int | None = None, counter: OpCounter | None = None) -> tuple[list[NodeState], int]:
    """Synchronous Grid-BP over one time slot.

    Every agent updates from the iteration-``s`` beliefs of its informative
    neighbors, producing iteration ``s + 1``; anchors never update. Stops when
    all agent beliefs move less than ``tol`` in total variation, or after
    ``max_iter`` iterations. Returns the nodes and the iterations used.
    """
    seed = cfg.seed if seed is None else seed
    params = cfg.bp_params()
    ranges = measure_ranges(nodes, cfg, t, node_rng(seed, _MEASURE, t))
    for node in nodes:
        node.prior = node.belief
    windowed = {n.id for n in nodes if n.is_anchor or n.informative}
    reverse: dict[tuple[int, int], Belief] = {}
    used = 0
    for s in range(params.max_iter):
        used = s + 1
        beliefs = [nodes[k].belief for k in range(len(nodes))]
        informative = [nodes[k].informative for k in range(len(nodes))]
        new_reverse: dict[tuple[int, int], Belief] = {}
        converged = True
        for node in nodes:
            if node.is_anchor:
                continue
            inbox = _inbox(node, nodes, beliefs, informative, ranges, reverse, s, params)
            if not inbox:
                continue
            if node.id not in windowed:
                node.prior = _restrict_window(node.prior, [m.belief for m, _ in inbox], params.grid_radius)
                windowed.add(node.id)
            rng = node_rng(seed, _BP, t, s, node.id)
            new, incoming = bp_round(node, inbox, params, rng, counter=counter)
            for mu in incoming:
                new_reverse[(mu.sender, node.id)] = mu.belief
            if not has_converged(beliefs[node.id], new, params.tol):
                converged = False
            node.belief = new
            if incoming:
                node.informative = True
        reverse = new_reverse
        if converged and informative == [nodes[k].informative for k in range(len(nodes))]:
            break
    return nodes, used


def compute_rmse(nodes: Sequence[NodeState]) -> float:
    errs = [agent_error(n) for n in nodes if not n.is_anchor]
    return float(np.sqrt(np.mean(np.square(errs))))


def agent_error(node: NodeState) -> float:
    return float(np.linalg.norm(point_estimate(node.belief) - node.true_position))


def run_noncooperative_baseline(nodes: list[NodeState], cfg: ScenarioConfig, grid: Grid,
                                seed: int | None = None, counter: OpCounter | None = None) -> list[NodeState]:
    """Single update per agent from direct anchor neighbors only."""
    seed = cfg.seed if seed is None else seed
    params = replace(cfg.bp_params(), damping=1.0)
    ranges = measure_ranges(nodes, cfg, 0, node_rng(seed, _MEASURE, 0))
    beliefs = [n.belief for n in nodes]
    for node in nodes:
        if node.is_anchor:
            continue
        inbox = _inbox(node, nodes, beliefs, [n.informative for n in nodes], ranges, {}, 0,
                       replace(params, cavity=False),
                       agents_only_anchors=True)
        if inbox:
            rng = node_rng(seed, _BASELINE, node.id)
            node.belief, _ = bp_round(node, inbox, params, rng, prior=node.prior, counter=counter)
    return nodes


def run_trial(cfg: ScenarioConfig, seed: int | None = None, baseline: bool = False) -> TrialResult:
    """Generate, initialize and solve one scenario; report its error metrics."""
    seed = cfg.seed if seed is None else seed
    start = time.perf_counter()
    grid = make_grid(cfg)
    nodes, retries = generate_scenario_with_retries(cfg, node_rng(seed, _PLACE))
    init_beliefs(nodes, cfg, grid, node_rng(seed, _ANCHOR))
    counter = OpCounter()
    iters = 0
    if baseline:
        run_noncooperative_baseline(nodes, cfg, grid, seed, counter)
        iters = 1
    else:
        for t in range(cfg.time_slots):
            _, used = run_time_slot(nodes, cfg, grid, t, seed, counter)
            iters = max(iters, used)
    errors = {n.id: agent_error(n) for n in nodes if not n.is_anchor}
    rmse = float(np.sqrt(np.mean(np.square(list(errors.values())))))
    return TrialResult(
        errors=errors,
        rmse=rmse,
        bp_iterations=iters,
        kbar=counter.kbar,
        product_ops=counter.product_ops,
        wall_time=time.perf_counter() - start,
        mean_degree=mean_degree(nodes),
        retries=retries,
        counters=counter,
    )


def snapshot_records(nodes: Sequence[NodeState]) -> list[str]:
    """One JSON line per node: id, role, x, y and its serialized belief."""
    lines = []
    for n in nodes:
        rec = {"id": n.id, "role": n.role, "x": float(n.true_position[0]),
               "y": float(n.true_position[1]),
               "belief": n.belief.serialize() if n.belief is not None else None}
        lines.append(json.dumps(rec, separators=(",", ":")))
    return lines
