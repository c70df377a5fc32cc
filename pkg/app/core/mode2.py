"""
Mode 2: an informed server pushes the rumor to uniformly chosen neighbors.

``run_mode2_direct`` samples the whole graph and simulates the pushes.
``run_mode2_coupled`` builds the ER process and the complete-graph process
together, revealing edge statuses lazily (unknown / open / closed) and
delaying the emissions on which the two graphs disagree.
"""
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.rng_streams import RandomSource
from app.core.words import ROOT, OrderedWordSet, Word, child, word_key
from app.errors import ScanLimitError

logger = logging.getLogger(__name__)

SCAN_CAP = 100_000_000

JOINT_TRACE_HEADER = ["t", "card_active", "card_d_er", "card_d_cg", "card_inc0", "card_inc1", "m"]
DIRECT_TRACE_HEADER = ["t", "card_informed", "card_queue"]


@dataclass(frozen=True)
class Adjacency:
    """Symmetric open-edge matrix; self-loops live on the diagonal"""
    n: int
    matrix: np.ndarray = field(repr=False)

    def is_open(self, i: int, j: int) -> bool:
        return bool(self.matrix[i - 1, j - 1])

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[i - 1]) + 1

    def open_edges(self) -> int:
        return int(np.triu(self.matrix).sum())


def sample_er_graph(src: RandomSource) -> Adjacency:
    """Edge <i, j>, i <= j, is open iff the fill-family mark B^i_{-j} is 1"""
    n = src.n
    matrix = np.zeros((n, n), dtype=bool)
    for i in range(1, n + 1):
        matrix[i - 1, i - 1:] = src.bernoulli_row(i, np.arange(i, n + 1))
    return Adjacency(n=n, matrix=matrix | matrix.T)


@dataclass
class DirectOutcome:
    tau: int
    final_informed: int
    order: List[int]
    graph: Adjacency = field(repr=False)
    trace: List[List[int]] = field(default_factory=list)


def run_mode2_direct(src: RandomSource, trace: bool = False) -> DirectOutcome:
    """Push protocol on a sampled graph; the first informed server emits first"""
    graph = sample_er_graph(src)
    first = src.draw_initial()
    informed = {first}
    order = [first]
    queue = deque([first])
    rows = []
    t = -1
    while queue:
        i = queue.popleft()
        t += 1
        neighbors = graph.neighbors(i)
        degree = len(neighbors)
        if degree:
            for k in range(1, src.draw_resource(i) + 1):
                j = int(neighbors[src.draw_neighbor(i, k, degree)])
                if j not in informed:
                    informed.add(j)
                    order.append(j)
                    queue.append(j)
        if trace:
            rows.append([t, len(informed), len(queue)])
    return DirectOutcome(tau=t, final_informed=len(informed), order=order, graph=graph, trace=rows)


class TriStateEdges:
    """Edge statuses revealed so far; the first assignment of an edge is final"""

    def __init__(self, n: int):
        self.n = n
        self._status: Dict[Tuple[int, int], int] = {}
        self._closed = Counter()

    @staticmethod
    def key(i: int, j: int) -> Tuple[int, int]:
        return (i, j) if i <= j else (j, i)

    def get(self, i: int, j: int) -> Optional[int]:
        return self._status.get(self.key(i, j))

    def assign(self, i: int, j: int, bit: int) -> int:
        """Set the status if unknown and return the status in force"""
        key = self.key(i, j)
        known = self._status.get(key)
        if known is not None:
            return known
        self._status[key] = bit
        if bit == 0:
            self._closed[i] += 1
            if i != j:
                self._closed[j] += 1
        return bit

    def isolated(self, i: int) -> bool:
        """All n edges at i (self-loop included) are known closed"""
        return self._closed[i] >= self.n

    def __len__(self):
        return len(self._status)

    def as_dict(self) -> Dict[Tuple[int, int], int]:
        return dict(self._status)


@dataclass
class BurstRecord:
    """One joint step: the attempts up to T_i with the status in force after assignment"""
    t: int
    word: Word
    label: int
    k_i: int
    t_i: int
    t_prime: int
    attempts: List[Tuple[int, int, int, int]]
    inc0: List[Word]
    inc1: List[Word]
    m: int
    placeholders: List[Word]


@dataclass(frozen=True)
class JointStep:
    t: int
    card_active: int
    card_d_er: int
    card_d_cg: int
    card_inc0: int
    card_inc1: int
    m: int

    def row(self) -> List[int]:
        return [self.t, self.card_active, self.card_d_er, self.card_d_cg, self.card_inc0, self.card_inc1, self.m]


@dataclass
class JointOutcome:
    tilde_tau: int
    tau_cg: int
    tau_bar_er: int
    er_informed: set
    cg_informed: set
    bursts: List[BurstRecord]
    steps: List[JointStep]
    edges: TriStateEdges = field(repr=False)

    @property
    def final_er(self) -> int:
        return len(self.er_informed)

    @property
    def final_cg(self) -> int:
        return len(self.cg_informed)


def _last_prefix_within(attempts, k_i: int) -> int:
    """T'_i: largest l <= T_i whose prefix holds at most K_i open-status attempts"""
    count = 0
    t_prime = 0
    for k, _, _, status in attempts:
        count += status
        if count > k_i:
            break
        t_prime = k
    return t_prime


def _scan_open(src, edges: TriStateEdges, i: int, start: int, want: int, cap: int) -> List[Tuple[int, int]]:
    """First ``want`` attempts k >= start of server i landing on open edges"""
    found = []
    k = start - 1
    while len(found) < want and not edges.isolated(i):
        k += 1
        if k - start >= cap:
            raise ScanLimitError(f"Server {i} scanned {cap} attempts without finding {want} open edges")
        j = src.draw_target(i, k)
        status = edges.get(i, j)
        if status is None:
            status = edges.assign(i, j, src.draw_bernoulli(i, k))
        if status == 1:
            found.append((k, j))
    return found


def read_joint_burst(src, edges: TriStateEdges, i: int, k_i: int, cap: int = SCAN_CAP):
    """Attempts 1..T_i of server i, T_i being the index of its K_i-th open mark.

    Unknown edges take the mark of their first attempt in the burst. Nothing is
    emitted when K_i = 0 or p = 0.
    """
    attempts = []
    if k_i == 0 or src.p == 0.0:
        return attempts
    ones = 0
    k = 0
    while ones < k_i:
        k += 1
        if k > cap:
            raise ScanLimitError(f"Server {i} needed more than {cap} marks to collect {k_i} ones")
        bit = src.draw_bernoulli(i, k)
        j = src.draw_target(i, k)
        attempts.append((k, j, bit, edges.assign(i, j, bit)))
        ones += bit
    return attempts


def run_mode2_coupled(src: RandomSource, trace: bool = False, scan_cap: int = SCAN_CAP) -> JointOutcome:
    labels: Dict[Word, int] = {ROOT: src.draw_initial()}
    edges = TriStateEdges(src.n)
    active = OrderedWordSet()
    active_labels = set()
    exhausted = set()
    d_er = OrderedWordSet()
    d_cg = OrderedWordSet()
    bursts: List[BurstRecord] = []
    steps: List[JointStep] = []

    t = 0
    v = ROOT
    while True:
        i = labels[v]
        active_labels.discard(i)
        k_i = src.draw_resource(i)
        attempts = read_joint_burst(src, edges, i, k_i, scan_cap)
        t_prime = _last_prefix_within(attempts, k_i)
        exhausted.add(i)

        inc0, inc1, fresh = [], [], []
        seen_cg = set()
        for k, j, bit, status in attempts:
            w = child(v, k)
            if bit == 1:
                labels[w] = j
                if status == 0:
                    inc0.append(w)
                    d_cg.add(w)
                elif k > t_prime:
                    d_cg.add(w)
                elif j not in seen_cg and j not in exhausted and j not in active_labels:
                    fresh.append(w)
                seen_cg.add(j)
            elif status == 1:
                labels[w] = j
                inc1.append(w)
        for w in fresh:
            active.add(w)
            active_labels.add(labels[w])

        m = max(len(inc0) - len(inc1), 0)
        placeholders = sorted(inc0 + inc1, key=word_key)[:m]
        for w in placeholders:
            d_er.add(w)
        bursts.append(
            BurstRecord(t, v, i, k_i, len(attempts), t_prime, attempts, inc0, inc1, m, placeholders)
        )
        steps.append(JointStep(t, len(active), len(d_er), len(d_cg), len(inc0), len(inc1), m))

        if not active:
            break
        v = active.pop_min()
        t += 1
    tilde_tau = t

    cg_informed = set(exhausted)
    t_cg = tilde_tau
    while d_cg:
        v = d_cg.pop_min()
        t_cg += 1
        i = labels[v]
        if i in cg_informed:
            continue
        cg_informed.add(i)
        for k in range(1, src.draw_resource(i) + 1):
            w = child(v, k)
            labels[w] = src.draw_target(i, k)
            d_cg.add(w)

    er_informed = set(exhausted)
    t_er = tilde_tau
    recasts = deque(b for b in bursts if b.m > 0)
    while recasts or d_er:
        t_er += 1
        if recasts:
            burst = recasts.popleft()
            for w in burst.placeholders:
                d_er.discard(w)
            for k, j in _scan_open(src, edges, burst.label, burst.t_i + 1, burst.m, scan_cap):
                w = child(burst.word, k)
                labels[w] = j
                d_er.add(w)
            continue
        v = d_er.pop_min()
        i = labels[v]
        if i in er_informed:
            continue
        er_informed.add(i)
        for k, j in _scan_open(src, edges, i, 1, src.draw_resource(i), scan_cap):
            w = child(v, k)
            labels[w] = j
            d_er.add(w)

    logger.debug("mode-2 coupling: tilde_tau=%d tau_cg=%d tau_bar_er=%d", tilde_tau, t_cg, t_er)
    return JointOutcome(
        tilde_tau=tilde_tau,
        tau_cg=t_cg,
        tau_bar_er=t_er,
        er_informed=er_informed,
        cg_informed=cg_informed,
        bursts=bursts,
        steps=steps,
        edges=edges,
    )


def incompatibility_trace(outcome: JointOutcome) -> List[dict]:
    return [
        {"t": b.t, "card_inc0": len(b.inc0), "card_inc1": len(b.inc1), "m": b.m, "t_prime": b.t_prime}
        for b in outcome.bursts
    ]


def incompatibility_bound(src: RandomSource, scan_cap: int = SCAN_CAP) -> int:
    """Pairs of attempts (within each server's T_i) along one edge with different marks"""
    by_edge: Dict[Tuple[int, int], List[int]] = {}
    for i in range(1, src.n + 1):
        k_i = src.draw_resource(i)
        if k_i == 0 or src.p == 0.0:
            continue
        ones = 0
        k = 0
        while ones < k_i:
            k += 1
            if k > scan_cap:
                raise ScanLimitError(f"Server {i} needed more than {scan_cap} marks")
            bit = src.draw_bernoulli(i, k)
            counts = by_edge.setdefault(TriStateEdges.key(i, src.draw_target(i, k)), [0, 0])
            counts[bit] += 1
            ones += bit
    return sum(2 * c0 * c1 for c0, c1 in by_edge.values())
