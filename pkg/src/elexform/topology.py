"""Graph analysis of one switch configuration.

Everything here is a pure function of ``(circuit, config)``.  A branch is any
two-terminal element or transformer coil; an *off* switch is the only branch
that does not conduct.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .netlist import Branch, Circuit, Coil, Inductor, Switch, SwitchConfig


class UnionFind:
    def __init__(self, items: Iterable = ()):
        self._parent: dict = {}
        for item in items:
            self._parent[item] = item

    def find(self, x):
        parent = self._parent.setdefault(x, x)
        root = x
        while parent != root:
            root = parent
            parent = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self._parent[rb] = ra
        return True

    def same(self, a, b) -> bool:
        return self.find(a) == self.find(b)


class SignedUnionFind:
    """Union-find that also tracks a +/-1 relation of every item to its root."""

    def __init__(self):
        self._parent: dict = {}
        self._sign: dict = {}

    def find(self, x):
        if x not in self._parent:
            self._parent[x], self._sign[x] = x, 1
            return x, 1
        sign = 1
        node = x
        while self._parent[node] != node:
            sign *= self._sign[node]
            node = self._parent[node]
        return node, sign

    def union(self, a, b, relation: int) -> bool:
        """Record ``value(a) = relation * value(b)``; False if already joined."""
        ra, sa = self.find(a)
        rb, sb = self.find(b)
        if ra == rb:
            return False
        # value(rb) = sb * value(b) = sb * relation * value(a) = sb * relation * sa * value(ra)
        self._parent[rb] = ra
        self._sign[rb] = sb * relation * sa
        return True


def conducts(branch: Branch, config: Mapping[str, bool]) -> bool:
    return not isinstance(branch, Switch) or config[branch.name]


def conducting_branches(circuit: Circuit, config: Mapping[str, bool]) -> list[Branch]:
    return [b for b in circuit.branches if conducts(b, config)]


# --- switch loops -----------------------------------------------------------


@dataclass(frozen=True)
class SwitchLoop:
    """Closed cycle of on switches; orientation +1 means traversal p to n."""

    members: tuple[tuple[str, int], ...]

    @property
    def switches(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.members)

    @property
    def switch_set(self) -> frozenset[str]:
        return frozenset(self.switches)

    def orientation(self, name: str) -> int:
        return dict(self.members)[name]


def _on_switch_incidence(circuit: Circuit, config: Mapping[str, bool]) -> dict[str, list[Switch]]:
    incidence: dict[str, list[Switch]] = {}
    for switch in circuit.switches:
        if config[switch.name]:
            for node in switch.nodes:
                incidence.setdefault(node, []).append(switch)
    return incidence


def find_loop_candidates(circuit: Circuit, config: Mapping[str, bool]) -> set[str]:
    """On switches that could lie on a cycle made only of on switches.

    Start with on switches that touch another on switch at both terminals, then
    prune in passes: a candidate survives a pass only if each of its terminals
    touches at least one other candidate.
    """
    incidence = _on_switch_incidence(circuit, config)

    def supported(switch: Switch, pool: set[str]) -> bool:
        return all(
            any(other.name != switch.name and other.name in pool for other in incidence[node])
            for node in switch.nodes
        )

    on = {s.name for s in circuit.switches if config[s.name]}
    candidates = {s.name for s in circuit.switches if s.name in on and supported(s, on)}
    while True:
        survivors = {
            s.name for s in circuit.switches if s.name in candidates and supported(s, candidates)
        }
        if survivors == candidates:
            return candidates
        candidates = survivors


def _order_loop(circuit: Circuit, switches: Iterable[str]) -> SwitchLoop:
    """Walk a cycle from its lowest-ordered node along the earlier switch first."""
    node_rank = {n: k for k, n in enumerate(circuit.nodes)}
    elem_rank = {e.name: k for k, e in enumerate(circuit.elements)}
    members = sorted(switches, key=elem_rank.__getitem__)
    by_name = {name: circuit[name] for name in members}
    nodes = {node for name in members for node in by_name[name].nodes}
    start = min(nodes, key=node_rank.__getitem__)
    remaining = list(members)
    ordered: list[tuple[str, int]] = []
    node = start
    while remaining:
        step = next((n for n in remaining if node in by_name[n].nodes), None)
        if step is None:
            raise AssertionError(f"switch set {members} is not a closed cycle")
        switch = by_name[step]
        if switch.p == node:
            ordered.append((step, 1))
            node = switch.n
        else:
            ordered.append((step, -1))
            node = switch.p
        remaining.remove(step)
    if node != start:
        raise AssertionError(f"switch set {members} does not close")
    return SwitchLoop(tuple(ordered))


def find_switch_loops(
    circuit: Circuit,
    config: Mapping[str, bool],
    candidates: Iterable[str] | None = None,
    svd_priority: Sequence[str] = (),
) -> tuple[list[SwitchLoop], list[str]]:
    """Fundamental cycle basis of the candidate-switch subgraph.

    Candidate switches are added to a spanning forest in netlist order, with the
    switches named in ``svd_priority`` moved to the end.  Each switch that would
    close a cycle yields one loop and is that loop's dropped SVD.
    Returns ``(loops, dropped)`` with ``dropped[k]`` belonging to ``loops[k]``.
    """
    if candidates is None:
        candidates = find_loop_candidates(circuit, config)
    candidates = set(candidates)
    late = [name for name in svd_priority if name in candidates]
    order = [s for s in circuit.switches if s.name in candidates and s.name not in late]
    order += [circuit[name] for name in late]

    forest = UnionFind()
    adjacency: dict[str, list[tuple[str, str]]] = {}
    loops: list[SwitchLoop] = []
    dropped: list[str] = []
    for switch in order:
        if forest.union(switch.p, switch.n):
            adjacency.setdefault(switch.p, []).append((switch.n, switch.name))
            adjacency.setdefault(switch.n, []).append((switch.p, switch.name))
            continue
        path = _forest_path(adjacency, switch.p, switch.n)
        loops.append(_order_loop(circuit, path + [switch.name]))
        dropped.append(switch.name)
    return loops, dropped


def _forest_path(adjacency: dict[str, list[tuple[str, str]]], start: str, goal: str) -> list[str]:
    previous: dict[str, tuple[str, str] | None] = {start: None}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        if node == goal:
            break
        for other, edge in adjacency.get(node, ()):
            if other not in previous:
                previous[other] = (node, edge)
                frontier.append(other)
    path = []
    node = goal
    while previous[node] is not None:
        node, edge = previous[node]
        path.append(edge)
    return path


def enumerate_distinct_loops(
    circuit: Circuit,
    config: Mapping[str, bool],
    candidates: Iterable[str] | None = None,
    limit: int = 1000,
) -> list[SwitchLoop]:
    """Every simple cycle of candidate switches, one per distinct switch set.

    This is the switch-tree exploration: grow paths of candidate switches from
    each node and record a loop whenever a path returns to its root.
    """
    if candidates is None:
        candidates = find_loop_candidates(circuit, config)
    switches = [s for s in circuit.switches if s.name in set(candidates)]
    incidence: dict[str, list[Switch]] = {}
    for switch in switches:
        for node in switch.nodes:
            incidence.setdefault(node, []).append(switch)

    found: dict[frozenset[str], SwitchLoop] = {}

    def grow(root: str, node: str, used: list[str], visited: set[str]) -> None:
        for switch in incidence.get(node, ()):
            if switch.name in used or len(found) >= limit:
                continue
            other = switch.n if switch.p == node else switch.p
            if other == root:
                key = frozenset(used + [switch.name])
                if key not in found:
                    found[key] = _order_loop(circuit, key)
            elif other not in visited:
                grow(root, other, used + [switch.name], visited | {other})

    for root in circuit.nodes:
        if root in incidence:
            grow(root, root, [], {root})
    return list(found.values())


# --- isolated sections ------------------------------------------------------


@dataclass(frozen=True)
class IsolatedGroup:
    """Section with no conducting connection to the reference node."""

    nodes: tuple[str, ...]
    members: tuple[str, ...]
    boundary: tuple[tuple[str, int], ...]

    @property
    def boundary_switches(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.boundary)


def find_isolated_groups(circuit: Circuit, config: Mapping[str, bool]) -> list[IsolatedGroup]:
    """Tick everything reachable from the reference, then group the rest.

    Conducting branches are every element except off switches; coils count as
    two-terminal branches.  Nodes touched only by off switches become
    single-node groups.
    """
    branches = conducting_branches(circuit, config)
    incidence: dict[str, list[Branch]] = {n: [] for n in circuit.nodes}
    for branch in branches:
        incidence[branch.p].append(branch)
        incidence[branch.n].append(branch)

    ticked = {circuit.reference}
    frontier = [circuit.reference]
    while frontier:
        node = frontier.pop()
        for branch in incidence[node]:
            for other in branch.nodes:
                if other not in ticked:
                    ticked.add(other)
                    frontier.append(other)

    groups: list[IsolatedGroup] = []
    assigned: set[str] = set()
    for seed in circuit.nodes:
        if seed in ticked or seed in assigned:
            continue
        members: set[str] = {seed}
        frontier = [seed]
        while frontier:
            node = frontier.pop()
            for branch in incidence[node]:
                for other in branch.nodes:
                    if other not in members:
                        members.add(other)
                        frontier.append(other)
        assigned |= members
        nodes = tuple(n for n in circuit.nodes if n in members)
        elements = tuple(b.name for b in branches if b.p in members)
        boundary = tuple(
            (s.name, 1 if s.p in members else -1)
            for s in circuit.switches
            if not config[s.name] and ((s.p in members) != (s.n in members))
        )
        groups.append(IsolatedGroup(nodes, elements, boundary))
    return groups


# --- shorting and path tests ----------------------------------------------------


def _branch(circuit: Circuit, item: Branch | str) -> Branch:
    return circuit.branch(item) if isinstance(item, str) else item


def is_series(circuit: Circuit, config: Mapping[str, bool], a, b) -> tuple[bool, int]:
    """Shorting test: contract every other conducting branch one at a time.

    Returns ``(False, 0)`` as soon as ``a`` or ``b`` gets shorted.  Otherwise
    the pair is in series iff it ends up in parallel; the sign is +1 when the p
    terminals coincide, in which case ``i_a = -i_b`` (and ``i_a = i_b`` for -1).
    """
    a, b = _branch(circuit, a), _branch(circuit, b)
    if a.name == b.name:
        raise ValueError("is_series needs two distinct branches")
    if not (conducts(a, config) and conducts(b, config)):
        return False, 0
    merged = UnionFind(circuit.nodes)
    for branch in conducting_branches(circuit, config):
        if branch.name in (a.name, b.name):
            continue
        merged.union(branch.p, branch.n)
        if merged.same(a.p, a.n) or merged.same(b.p, b.n):
            return False, 0
    ap, an, bp, bn = (merged.find(x) for x in (a.p, a.n, b.p, b.n))
    if ap == bp and an == bn:
        return True, 1
    if ap == bn and an == bp:
        return True, -1
    return False, 0


def has_conduction_path(circuit: Circuit, config: Mapping[str, bool], inductor) -> bool:
    """Path test: contract other conducting branches until the inductor is shorted."""
    target = _branch(circuit, inductor)
    merged = UnionFind(circuit.nodes)
    for branch in conducting_branches(circuit, config):
        if branch.name == target.name:
            continue
        merged.union(branch.p, branch.n)
        if merged.same(target.p, target.n):
            return True
    return False


def series_classes(
    circuit: Circuit, config: Mapping[str, bool], names: Sequence[str]
) -> list[list[tuple[str, int]]]:
    """Partition branches into series classes.

    Each class is a list of ``(name, sigma)`` in the order of ``names`` where
    ``current(name) = sigma * current(first member)``.
    """
    signed = SignedUnionFind()
    for name in names:
        signed.find(name)
    for i, first in enumerate(names):
        for second in names[i + 1:]:
            ok, sign = is_series(circuit, config, first, second)
            if ok:
                signed.union(first, second, -sign)
    classes: dict[str, list[tuple[str, int]]] = {}
    for name in names:
        root, sign = signed.find(name)
        classes.setdefault(root, []).append((name, sign))
    result = []
    for members in classes.values():
        lead = members[0][1]
        result.append([(name, sign * lead) for name, sign in members])
    return result


# --- report -----------------------------------------------------------------


@dataclass(frozen=True)
class TopologyReport:
    config: SwitchConfig
    candidates: frozenset[str]
    loops: tuple[SwitchLoop, ...]
    dropped_svd: tuple[str, ...]
    distinct_loops: tuple[SwitchLoop, ...]
    groups: tuple[IsolatedGroup, ...]
    path_flags: Mapping[str, bool]
    series_sets: tuple[tuple[tuple[str, int], ...], ...]
    coil_series: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def to_text(self) -> str:
        def names(items: Iterable[str]) -> str:
            return "[" + ",".join(items) + "]"

        lines = [f"config: {self.config.to_text() or '(no switches)'}"]
        lines.append(f"candidates: {names(s for s in self.config if s in self.candidates)}")
        lines.append("loops: " + (" ".join(names(loop.switches) for loop in self.loops) or "[]"))
        lines.append(f"dropped_svd: {names(self.dropped_svd)}")
        lines.append(f"distinct_loops: {len(self.distinct_loops)}")
        for loop in self.distinct_loops:
            lines.append(f"  {names(loop.switches)}")
        lines.append(f"groups: {len(self.groups)}")
        for group in self.groups:
            boundary = ",".join(f"{'+' if o > 0 else '-'}{n}" for n, o in group.boundary)
            lines.append(
                f"  nodes={names(group.nodes)} members={names(group.members)} boundary=[{boundary}]"
            )
        sets = " ".join(
            "(" + ",".join(f"{'-' if s < 0 else ''}{n}" for n, s in members) + ")"
            for members in self.series_sets
        )
        lines.append(f"series_sets: {sets or '()'}")
        for (a, b), sign in self.coil_series.items():
            lines.append(f"  series {a} {b} sign={sign:+d}")
        paths = ",".join(f"{n}={'yes' if f else 'no'}" for n, f in self.path_flags.items())
        lines.append(f"path: {paths or '(no inductors)'}")
        return "\n".join(lines) + "\n"


def analyze(
    circuit: Circuit, config: Mapping[str, bool], svd_priority: Sequence[str] = ()
) -> TopologyReport:
    if not isinstance(config, SwitchConfig):
        config = SwitchConfig(circuit, config)
    candidates = find_loop_candidates(circuit, config)
    loops, dropped = find_switch_loops(circuit, config, candidates, svd_priority)
    distinct = enumerate_distinct_loops(circuit, config, candidates)
    groups = find_isolated_groups(circuit, config)
    paths = {L.name: has_conduction_path(circuit, config, L) for L in circuit.inductors}
    live = [L.name for L in circuit.inductors if paths[L.name]]
    classes = series_classes(circuit, config, live)
    sets = tuple(tuple(members) for members in classes)
    for name, flag in paths.items():
        if not flag:
            sets += (((name, 1),),)
    coil_series: dict[tuple[str, str], int] = {}
    coils = [c.name for c in circuit.coils]
    for coil in coils:
        for other in live + [c for c in coils if c > coil]:
            ok, sign = is_series(circuit, config, coil, other)
            if ok:
                coil_series[(coil, other)] = sign
    return TopologyReport(
        config=config,
        candidates=frozenset(candidates),
        loops=tuple(loops),
        dropped_svd=tuple(dropped),
        distinct_loops=tuple(distinct),
        groups=tuple(groups),
        path_flags=paths,
        series_sets=sets,
        coil_series=coil_series,
    )
