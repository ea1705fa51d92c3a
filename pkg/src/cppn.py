"""Compositional pattern-producing network genome.

A genome is an immutable feed-forward graph queried at normalised voxel
coordinates. Node ids 0-3 are the inputs (x, y, z, radial distance), 4-6 the
outputs (chassis material, component presence, component type). The twelve
input->output links of a founder genome carry fixed ids 7-18 shared by every
founder, so unrelated genomes align in crossover; later hidden nodes and
links get ids from a run-wide ``InnovationTracker``.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import StructuralGenomeError
from src.models import Activation

logger = logging.getLogger(__name__)

INPUT_COUNT = 4
OUTPUT_COUNT = 3
INPUT_IDS = tuple(range(INPUT_COUNT))
OUTPUT_IDS = tuple(range(INPUT_COUNT, INPUT_COUNT + OUTPUT_COUNT))
FOUNDER_PAIRS = tuple((i, o) for i in INPUT_IDS for o in OUTPUT_IDS)
FIRST_LINK_ID = INPUT_COUNT + OUTPUT_COUNT
FIRST_FREE_ID = FIRST_LINK_ID + len(FOUNDER_PAIRS)

MAX_CYCLE_RETRIES = 20


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _gaussian(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x)


ACTIVATION_FUNCTIONS = {
    Activation.SIGMOID: _sigmoid,
    Activation.GAUSSIAN: _gaussian,
    Activation.SINE: np.sin,
    Activation.LINEAR: lambda x: x,
    Activation.ABS: np.abs,
}


@dataclass(frozen=True)
class NodeGene:
    id: int
    activation: Activation


@dataclass(frozen=True)
class LinkGene:
    innovation: int
    source: int
    target: int
    weight: float
    enabled: bool = True


@dataclass(frozen=True)
class MutationParams:
    """Per-operator probabilities; weight_rate applies per link, the rest per genome."""

    weight_rate: float = 0.8
    weight_sigma: float = 0.1
    add_link_rate: float = 0.05
    add_node_rate: float = 0.03
    toggle_rate: float = 0.01


@dataclass(frozen=True)
class CppnGenome:
    """Immutable CPPN genome value."""

    nodes: Tuple[NodeGene, ...]
    links: Tuple[LinkGene, ...]
    lineage: Tuple[int, ...] = field(default=())

    def node_ids(self) -> Tuple[int, ...]:
        return tuple(node.id for node in self.nodes)

    def to_dict(self) -> dict:
        """Convert the genome to a dictionary for JSON serialization."""
        return {
            "nodes": [[node.id, node.activation.value] for node in self.nodes],
            "links": [
                [link.innovation, link.source, link.target, link.weight, link.enabled]
                for link in self.links
            ],
            "lineage": list(self.lineage),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CppnGenome":
        """Create a genome from a dictionary (e.g., from JSON)."""
        return cls(
            nodes=tuple(NodeGene(int(i), Activation(a)) for i, a in data["nodes"]),
            links=tuple(
                LinkGene(int(inn), int(s), int(t), float(w), bool(e))
                for inn, s, t, w, e in data["links"]
            ),
            lineage=tuple(int(x) for x in data.get("lineage", ())),
        )


class InnovationTracker:
    """Run-wide monotone id counter shared by new nodes and new links."""

    def __init__(self, next_id: int = FIRST_FREE_ID):
        self.next_id = next_id

    def allocate(self) -> int:
        value = self.next_id
        self.next_id += 1
        return value

    def observe(self, genome: CppnGenome) -> None:
        """Make sure future ids exceed every id used by ``genome``."""
        used = [node.id for node in genome.nodes] + [link.innovation for link in genome.links]
        if used:
            self.next_id = max(self.next_id, max(used) + 1)


def _creates_cycle(links: Iterable[LinkGene], source: int, target: int) -> bool:
    """True if adding source->target closes a directed cycle."""
    if source == target:
        return True
    adjacency: Dict[int, List[int]] = {}
    for link in links:
        adjacency.setdefault(link.source, []).append(link.target)
    stack, seen = [target], set()
    while stack:
        node = stack.pop()
        if node == source:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency.get(node, ()))
    return False


def topological_order(genome: CppnGenome) -> List[int]:
    """Kahn ordering over all links; raises on a cycle or a dangling link."""
    ids = genome.node_ids()
    known = set(ids)
    for link in genome.links:
        if link.source not in known or link.target not in known:
            raise StructuralGenomeError(f"dangling link {link.innovation}")
    indegree = {node_id: 0 for node_id in ids}
    adjacency: Dict[int, List[int]] = {node_id: [] for node_id in ids}
    for link in genome.links:
        adjacency[link.source].append(link.target)
        indegree[link.target] += 1
    ready = sorted(node_id for node_id, degree in indegree.items() if degree == 0)
    order = []
    while ready:
        node_id = ready.pop(0)
        order.append(node_id)
        for nxt in adjacency[node_id]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(ids):
        raise StructuralGenomeError("genome contains a directed cycle")
    return order


def validate(genome: CppnGenome) -> None:
    """Raise StructuralGenomeError unless the genome satisfies every invariant.

    Acyclicity and pair uniqueness are checked over all links, enabled or
    not, so toggling a link can never break the feed-forward property.
    """
    ids = genome.node_ids()
    if len(set(ids)) != len(ids):
        raise StructuralGenomeError("duplicate node id")
    for required in INPUT_IDS + OUTPUT_IDS:
        if required not in ids:
            raise StructuralGenomeError(f"missing input/output node {required}")
    known = set(ids)
    pairs = set()
    innovations = set()
    for link in genome.links:
        if link.source not in known or link.target not in known:
            raise StructuralGenomeError(f"dangling link {link.innovation}")
        if link.target in INPUT_IDS:
            raise StructuralGenomeError(f"link {link.innovation} feeds an input node")
        if (link.source, link.target) in pairs:
            raise StructuralGenomeError(f"duplicate link {link.source}->{link.target}")
        if link.innovation in innovations:
            raise StructuralGenomeError(f"duplicate innovation id {link.innovation}")
        pairs.add((link.source, link.target))
        innovations.add(link.innovation)
    topological_order(genome)


def random_genome(
    rng: np.random.Generator,
    output_activation: Activation = Activation.SINE,
) -> CppnGenome:
    """Fully connected inputs->outputs, weights uniform in [-1, 1], no hidden nodes."""
    nodes = tuple(NodeGene(i, Activation.LINEAR) for i in INPUT_IDS) + tuple(
        NodeGene(o, output_activation) for o in OUTPUT_IDS
    )
    links = tuple(
        LinkGene(FIRST_LINK_ID + k, i, o, float(rng.uniform(-1.0, 1.0)))
        for k, (i, o) in enumerate(FOUNDER_PAIRS)
    )
    return CppnGenome(nodes=nodes, links=links)


def query_many(genome: CppnGenome, coords: np.ndarray) -> np.ndarray:
    """Evaluate the network on a batch of (x, y, z, d) rows; returns (n, 3)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[1] != INPUT_COUNT:
        raise StructuralGenomeError("query coordinates must have four columns")
    order = topological_order(genome)
    activations = {node.id: node.activation for node in genome.nodes}
    incoming: Dict[int, List[LinkGene]] = {}
    for link in genome.links:
        if link.enabled:
            incoming.setdefault(link.target, []).append(link)
    values: Dict[int, np.ndarray] = {}
    for node_id in order:
        if node_id in INPUT_IDS:
            values[node_id] = coords[:, node_id]
            continue
        total = np.zeros(coords.shape[0])
        for link in incoming.get(node_id, ()):
            total = total + link.weight * values[link.source]
        values[node_id] = ACTIVATION_FUNCTIONS[activations[node_id]](total)
    return np.stack([values[o] for o in OUTPUT_IDS], axis=1)


def query(genome: CppnGenome, coord: Sequence[float]) -> np.ndarray:
    """Evaluate the network at one normalised coordinate.

    ``coord`` is either (x, y, z), in which case the radial input is derived,
    or the full (x, y, z, d) input row.
    """
    coord = np.asarray(coord, dtype=float)
    if coord.shape == (3,):
        coord = np.append(coord, radial_input(coord))
    return query_many(genome, coord[None, :])[0]


def radial_input(xyz: np.ndarray) -> np.ndarray:
    """Distance from the grid center mapped from [0, sqrt(3)] to [-1, 1]."""
    xyz = np.asarray(xyz, dtype=float)
    distance = np.linalg.norm(xyz, axis=-1)
    return 2.0 * distance / np.sqrt(3.0) - 1.0


def _add_link(
    genome: CppnGenome, rng: np.random.Generator, tracker: InnovationTracker
) -> Optional[CppnGenome]:
    existing = {(link.source, link.target) for link in genome.links}
    sources = [node.id for node in genome.nodes]
    targets = [node.id for node in genome.nodes if node.id not in INPUT_IDS]
    for _ in range(MAX_CYCLE_RETRIES):
        source = sources[rng.integers(len(sources))]
        target = targets[rng.integers(len(targets))]
        if (source, target) in existing or _creates_cycle(genome.links, source, target):
            continue
        link = LinkGene(tracker.allocate(), source, target, float(rng.uniform(-1.0, 1.0)))
        return replace(genome, links=genome.links + (link,))
    return None


def _add_node(
    genome: CppnGenome, rng: np.random.Generator, tracker: InnovationTracker
) -> Optional[CppnGenome]:
    enabled = [i for i, link in enumerate(genome.links) if link.enabled]
    if not enabled:
        return None
    old = genome.links[enabled[rng.integers(len(enabled))]]
    palette = list(Activation)
    return split_link(genome, old.innovation, tracker, palette[rng.integers(len(palette))])


def split_link(
    genome: CppnGenome, innovation: int, tracker: InnovationTracker, activation: Activation
) -> CppnGenome:
    """Split a link a->b (weight w): disable it, add a->n (1.0) and n->b (w)."""
    links = list(genome.links)
    index = next(i for i, link in enumerate(links) if link.innovation == innovation)
    old = links[index]
    node = NodeGene(tracker.allocate(), activation)
    links[index] = replace(old, enabled=False)
    links.append(LinkGene(tracker.allocate(), old.source, node.id, 1.0))
    links.append(LinkGene(tracker.allocate(), node.id, old.target, old.weight))
    return replace(genome, nodes=genome.nodes + (node,), links=tuple(links))


def mutate(
    genome: CppnGenome,
    rng: np.random.Generator,
    params: MutationParams,
    tracker: InnovationTracker,
) -> CppnGenome:
    """Apply weight perturbation, add-link, add-node and toggle per ``params``."""
    links = []
    for link in genome.links:
        if params.weight_rate > 0 and rng.random() < params.weight_rate:
            link = replace(link, weight=link.weight + float(rng.normal(0.0, params.weight_sigma)))
        links.append(link)
    result = replace(genome, links=tuple(links))

    if params.add_link_rate > 0 and rng.random() < params.add_link_rate:
        result = _add_link(result, rng, tracker) or result
    if params.add_node_rate > 0 and rng.random() < params.add_node_rate:
        result = _add_node(result, rng, tracker) or result
    if params.toggle_rate > 0 and rng.random() < params.toggle_rate and result.links:
        index = int(rng.integers(len(result.links)))
        toggled = list(result.links)
        toggled[index] = replace(toggled[index], enabled=not toggled[index].enabled)
        result = replace(result, links=tuple(toggled))
    return result


def crossover(
    a: CppnGenome,
    b: CppnGenome,
    rng: np.random.Generator,
    a_score: float = 0.0,
    b_score: float = 0.0,
) -> CppnGenome:
    """Align links by innovation id.

    Matching links take weight and enabled flag from a uniformly random
    parent; disjoint and excess links come from the fitter parent (ties: a),
    so the child always has the fitter parent's topology.
    """
    fitter, other = (b, a) if b_score > a_score else (a, b)
    other_links = {link.innovation: link for link in other.links}
    links = []
    for link in fitter.links:
        match = other_links.get(link.innovation)
        if match is not None and rng.random() < 0.5:
            link = replace(link, weight=match.weight, enabled=match.enabled)
        links.append(link)
    return CppnGenome(nodes=fitter.nodes, links=tuple(links))
