"""Random Ising instances on regular couplings layouts.

The problem Hamiltonian

    H_I = - sum_i h_i sigma_i^z + sum_{i<j} J_ij (1 - sigma_i^z sigma_j^z) / 2

is diagonal in the computational basis; the driver H_x = - sum_i sigma_i^x has
the uniform superposition as its ground state with energy -N.  Couplings and
fields are drawn from the discrete 11-value set {-1.0, -0.8, ..., 1.0} in
units of J0 (times are measured in 1/J0 throughout the package).

Spin i maps to bit i of the basis-state index, with bit value 0 meaning
sigma^z = +1.  Instances are immutable; every transform returns a copy, so the
types are safe to share across seed-partitioned parallel workers.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, LayoutError

OPEN_CHAIN = "nearest-neighbor-open"
PERIODIC_CHAIN = "nearest-neighbor-periodic"
NEXT_NEAREST = "next-nearest-neighbor"
ALL_TO_ALL = "all-to-all"

TOPOLOGY_KINDS = (OPEN_CHAIN, PERIODIC_CHAIN, NEXT_NEAREST, ALL_TO_ALL)

RING_TO_OPEN = "ring-to-open-chain"
TRIANGLE = "triangle"
QUADRILATERAL = "quadrilateral"

MASK_SCHEMES = (RING_TO_OPEN, TRIANGLE, QUADRILATERAL)

#: Admissible coupling/field values in units of J0.
COUPLING_VALUES = tuple((k - 5) * 0.2 for k in range(11))

#: Tolerance for membership in COUPLING_VALUES.
VALUE_GRID_TOL = 1e-12


def _canonical_edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ConfigurationError(f"self-coupling ({i},{j}) is not an edge")
    return (i, j) if i < j else (j, i)


def _on_value_grid(v: float) -> bool:
    return min(abs(v - g) for g in COUPLING_VALUES) <= VALUE_GRID_TOL


@dataclass(frozen=True)
class Topology:
    """A couplings layout: a named edge family on n_spins sites plus an
    optional mask of edges/spins forced to zero.

    The feature layout (slot ordering and count) is a property of the kind
    and size only; masking zeroes values but never removes slots.
    """

    kind: str
    n_spins: int
    masked_edges: frozenset = field(default_factory=frozenset)
    masked_spins: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise ConfigurationError(f"unknown topology kind {self.kind!r}")
        if self.n_spins < 1:
            raise ConfigurationError("n_spins must be positive")
        if self.kind == PERIODIC_CHAIN and self.n_spins < 3:
            raise ConfigurationError("a periodic chain needs at least 3 spins")
        object.__setattr__(self, "masked_edges",
                           frozenset(_canonical_edge(*e) for e in self.masked_edges))
        object.__setattr__(self, "masked_spins", frozenset(self.masked_spins))
        base = set(self.base_edges())
        for e in self.masked_edges:
            if e not in base:
                raise ConfigurationError(f"masked edge {e} is not in the layout")
        for i in self.masked_spins:
            if not 0 <= i < self.n_spins:
                raise ConfigurationError(f"masked spin {i} out of range")

    def base_edges(self) -> tuple[tuple[int, int], ...]:
        """All edges of the kind in lexicographic order, ignoring the mask."""
        n = self.n_spins
        if self.kind == OPEN_CHAIN:
            edges = [(i, i + 1) for i in range(n - 1)]
        elif self.kind == PERIODIC_CHAIN:
            edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
        elif self.kind == NEXT_NEAREST:
            edges = [(i, i + 1) for i in range(n - 1)]
            edges += [(i, i + 2) for i in range(n - 2)]
        else:
            edges = list(itertools.combinations(range(n), 2))
        return tuple(sorted(set(edges)))

    def edges(self) -> tuple[tuple[int, int], ...]:
        """Edges that survive the mask, lexicographic."""
        return tuple(e for e in self.base_edges() if e not in self.masked_edges)

    def feature_count(self) -> int:
        """Length of the canonical feature vector: n fields + all base edges."""
        return self.n_spins + len(self.base_edges())


@dataclass(frozen=True)
class IsingInstance:
    """One random Ising problem: fields h, couplings j on a Topology.

    j maps canonical edges (i, j) with i < j to values; only edges admitted by
    the (masked) topology appear as keys.  Masked spins carry h exactly 0.
    """

    n_spins: int
    topology: Topology
    h: np.ndarray
    j: dict
    seed: int

    def __post_init__(self):
        if self.topology.n_spins != self.n_spins:
            raise ConfigurationError("topology size disagrees with n_spins")
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.n_spins,):
            raise ConfigurationError("h must have one entry per spin")
        h = h.copy()
        h.flags.writeable = False
        object.__setattr__(self, "h", h)
        admitted = set(self.topology.edges())
        j = {}
        for key, v in dict(self.j).items():
            e = _canonical_edge(*key)
            if e not in admitted:
                raise ConfigurationError(f"coupling on non-admitted edge {e}")
            j[e] = float(v)
        object.__setattr__(self, "j", j)
        for i, v in enumerate(h):
            if i in self.topology.masked_spins and v != 0.0:
                raise ConfigurationError(f"masked spin {i} has nonzero field")
            if not _on_value_grid(v):
                raise ConfigurationError(f"h[{i}]={v!r} is off the value grid")
        for e, v in j.items():
            if not _on_value_grid(v):
                raise ConfigurationError(f"J{e}={v!r} is off the value grid")


def sample_instance(topology: Topology, n_spins: int, seed: int) -> IsingInstance:
    """Draw an instance with iid uniform values from COUPLING_VALUES.

    Masked spins/edges are skipped (fields forced to exactly 0.0, edges
    absent), so the same seed on differently masked topologies gives
    different streams; determinism holds per (topology, seed).
    """
    if topology.n_spins != n_spins:
        raise ConfigurationError("n_spins disagrees with the topology")
    rng = np.random.default_rng(seed)
    values = np.asarray(COUPLING_VALUES)
    h = np.zeros(n_spins)
    for i in range(n_spins):
        if i not in topology.masked_spins:
            h[i] = values[rng.integers(len(values))]
    j = {}
    for e in topology.base_edges():
        if e not in topology.masked_edges:
            j[e] = float(values[rng.integers(len(values))])
    return IsingInstance(n_spins, topology, h, j, seed)


def problem_diagonal(h: np.ndarray, j: dict, n_spins: int | None = None) -> np.ndarray:
    """Diagonal of H_I over the 2^n computational basis states."""
    h = np.asarray(h, dtype=float)
    n = len(h) if n_spins is None else n_spins
    idx = np.arange(2 ** n)
    z = 1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)  # (2^n, n), +-1
    diag = -(z @ h).astype(float)
    for (a, b), v in j.items():
        diag += v * (1 - z[:, a] * z[:, b]) / 2.0
    return diag


def driver_matrix(n_spins: int) -> np.ndarray:
    """Dense H_x = -sum_i sigma_i^x; entry -1 between states one bit-flip apart."""
    dim = 2 ** n_spins
    hx = np.zeros((dim, dim))
    idx = np.arange(dim)
    for i in range(n_spins):
        hx[idx, idx ^ (1 << i)] = -1.0
    return hx


def build_problem_hamiltonian(instance: IsingInstance) -> np.ndarray:
    """H_I as a dense (real, diagonal) matrix."""
    return np.diag(problem_diagonal(instance.h, instance.j))


def build_driver_hamiltonian(n_spins: int) -> np.ndarray:
    """H_x as a dense real symmetric matrix."""
    return driver_matrix(n_spins)


def ground_energy(instance: IsingInstance) -> float:
    """Classical ground energy of H_I (minimum over 2^n configurations)."""
    return float(problem_diagonal(instance.h, instance.j).min())


def feature_vector(instance: IsingInstance, layout: Topology) -> np.ndarray:
    """Embed an instance into a layout's canonical feature vector.

    Slots are h_0..h_{N-1} followed by the layout's base edges in
    lexicographic order.  Instance spins map identically onto layout spins
    0..n-1; slots outside the instance are zero.  Raises LayoutError when the
    instance does not embed (too many spins, or a coupling key on an edge the
    layout does not admit).
    """
    if instance.n_spins > layout.n_spins:
        raise LayoutError("instance has more spins than the layout")
    edge_slot = {e: k for k, e in enumerate(layout.base_edges())}
    vec = np.zeros(layout.feature_count())
    vec[: instance.n_spins] = instance.h
    for e, v in instance.j.items():
        if e not in edge_slot:
            raise LayoutError(f"instance edge {e} is not admitted by the layout")
        vec[layout.n_spins + edge_slot[e]] = v
    return vec


def mask_subgraph(instance: IsingInstance, config_index: int, scheme: str) -> IsingInstance:
    """Zero out couplings/fields so the instance becomes a named subgraph.

    ring-to-open-chain: on a periodic chain, isolate spin ``config_index``
    (its two ring couplings and its field become 0), leaving an open chain of
    n-1 spins.  triangle / quadrilateral: on a complete graph, keep only the
    couplings inside the config_index-th 3- or 4-spin combination
    (lexicographic); all other spins are isolated.  Idempotent per config.
    """
    topo = instance.topology
    n = instance.n_spins
    if scheme == RING_TO_OPEN:
        if topo.kind != PERIODIC_CHAIN:
            raise ConfigurationError("ring-to-open-chain needs a periodic chain")
        if not 0 <= config_index < n:
            raise ConfigurationError(f"config_index {config_index} out of range")
        isolated = {config_index}
    elif scheme in (TRIANGLE, QUADRILATERAL):
        if topo.kind != ALL_TO_ALL:
            raise ConfigurationError(f"{scheme} masking needs an all-to-all layout")
        size = 3 if scheme == TRIANGLE else 4
        combos = list(itertools.combinations(range(n), size))
        if not 0 <= config_index < len(combos):
            raise ConfigurationError(f"config_index {config_index} out of range")
        isolated = set(range(n)) - set(combos[config_index])
    else:
        raise ConfigurationError(f"unknown masking scheme {scheme!r}")

    removed = {e for e in topo.base_edges() if e[0] in isolated or e[1] in isolated}
    new_topo = Topology(topo.kind, n,
                        masked_edges=topo.masked_edges | removed,
                        masked_spins=topo.masked_spins | isolated)
    h = instance.h.copy()
    h[sorted(isolated)] = 0.0
    j = {e: v for e, v in instance.j.items() if e not in removed}
    return IsingInstance(n, new_topo, h, j, instance.seed)


def mask_config_count(scheme: str, n_spins: int) -> int:
    """Number of distinct configurations a masking scheme admits."""
    if scheme == RING_TO_OPEN:
        return n_spins
    if scheme == TRIANGLE:
        return len(list(itertools.combinations(range(n_spins), 3)))
    if scheme == QUADRILATERAL:
        return len(list(itertools.combinations(range(n_spins), 4)))
    raise ConfigurationError(f"unknown masking scheme {scheme!r}")


def cyclic_translate(instance: IsingInstance, steps: int) -> IsingInstance:
    """Rotate fields and ring couplings by ``steps`` positions (periodic only).

    The spectrum of H_I (and of the full interpolating Hamiltonian) is
    invariant; composition adds steps and steps = n is the identity.
    """
    topo = instance.topology
    if topo.kind != PERIODIC_CHAIN:
        raise ConfigurationError("cyclic translation needs a periodic chain")
    n = instance.n_spins
    s = steps % n
    perm = {i: (i + s) % n for i in range(n)}
    return _relabel(instance, perm)


def swap_labels(instance: IsingInstance, i: int, j: int) -> IsingInstance:
    """Exchange spin labels i and j on a complete graph."""
    if instance.topology.kind != ALL_TO_ALL:
        raise ConfigurationError("label swaps are defined on all-to-all layouts")
    n = instance.n_spins
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ConfigurationError(f"invalid swap pair ({i},{j})")
    perm = {k: k for k in range(n)}
    perm[i], perm[j] = j, i
    return _relabel(instance, perm)


def _relabel(instance: IsingInstance, perm: dict) -> IsingInstance:
    n = instance.n_spins
    h = np.zeros(n)
    for i in range(n):
        h[perm[i]] = instance.h[i]
    j = {_canonical_edge(perm[a], perm[b]): v for (a, b), v in instance.j.items()}
    topo = instance.topology
    new_topo = Topology(
        topo.kind, n,
        masked_edges=frozenset(_canonical_edge(perm[a], perm[b])
                               for (a, b) in topo.masked_edges),
        masked_spins=frozenset(perm[i] for i in topo.masked_spins),
    )
    return IsingInstance(n, new_topo, h, j, instance.seed)


def free_spins(instance: IsingInstance) -> tuple[int, ...]:
    """Spins with zero field and no nonzero incident coupling.

    Such a spin only feels the driver; it stays in its local ground state and
    contributes a spurious vanishing gap near s=1, so spectral profiles drop
    it (see spectral.gap_profile).
    """
    touched = set()
    for (a, b), v in instance.j.items():
        if v != 0.0:
            touched.add(a)
            touched.add(b)
    return tuple(i for i in range(instance.n_spins)
                 if instance.h[i] == 0.0 and i not in touched)


def reduced_couplings(instance: IsingInstance) -> tuple[int, np.ndarray, dict]:
    """(n, h, j) with free spins removed and the rest relabeled compactly.

    If every spin is free the first spin is kept so the Hilbert space stays
    nontrivial.  The reduced graph is generic (not necessarily a named kind),
    which is fine: spectral code works from raw (n, h, j).
    """
    drop = set(free_spins(instance))
    keep = [i for i in range(instance.n_spins) if i not in drop]
    if not keep:
        keep = [0]
    pos = {spin: k for k, spin in enumerate(keep)}
    h = np.asarray([instance.h[i] for i in keep])
    j = {}
    for (a, b), v in instance.j.items():
        if a in pos and b in pos and v != 0.0:
            j[_canonical_edge(pos[a], pos[b])] = v
    return len(keep), h, j


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def instance_to_json(instance: IsingInstance) -> str:
    """Serialize with canonical ordering; reals carry 17 significant digits."""
    topo = instance.topology
    parts = []
    parts.append(f'"n": {instance.n_spins}')
    masked_edges = ", ".join(f"[{a}, {b}]" for a, b in sorted(topo.masked_edges))
    masked_spins = ", ".join(str(i) for i in sorted(topo.masked_spins))
    parts.append(
        f'"topology": {{"kind": "{topo.kind}", "n": {topo.n_spins}, '
        f'"masked_edges": [{masked_edges}], "masked_spins": [{masked_spins}]}}'
    )
    parts.append('"h": [' + ", ".join(_fmt(v) for v in instance.h) + "]")
    rows = ", ".join(f"[{a}, {b}, {_fmt(v)}]" for (a, b), v in sorted(instance.j.items()))
    parts.append(f'"j": [{rows}]')
    parts.append(f'"seed": {instance.seed}')
    return "{" + ", ".join(parts) + "}"


def instance_from_json(text: str) -> IsingInstance:
    obj = json.loads(text)
    t = obj["topology"]
    topo = Topology(t["kind"], t["n"],
                    masked_edges=frozenset(tuple(e) for e in t["masked_edges"]),
                    masked_spins=frozenset(t["masked_spins"]))
    j = {(int(a), int(b)): float(v) for a, b, v in obj["j"]}
    return IsingInstance(obj["n"], topo, np.asarray(obj["h"], dtype=float),
                         j, int(obj["seed"]))
