"""
Tree explorations driven by one RandomSource.

Three constructions share the same burst draws (K_i, I^i_k, B^i_k):

* ``run_er_mode1``: exploration of the Erdos-Renyi graph where every attempt
  is checked against the status of its edge, fixed at first appearance.
* ``run_cg_sequential``: the complete-graph exploration with thinned resource,
  keeping only open attempts.
* ``run_coupled_delayed``: the complete-graph exploration that follows the ER
  exploration step for step and parks the surplus words in a delayed set.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.rng_streams import RandomSource
from app.core.words import ROOT, OrderedWordSet, Word, child

logger = logging.getLogger(__name__)

TRACE_HEADER = ["t", "card_tree", "card_active", "card_delayed", "card_exhausted"]


@dataclass(frozen=True)
class Attempt:
    k: int
    label: int
    bit: int


@dataclass(frozen=True)
class EdgeAppearance:
    """First attempt along an edge: burst index, attempt index and its Bernoulli mark"""
    t: int
    k: int
    bit: int


@dataclass(frozen=True)
class StepTrace:
    t: int
    card_tree: int
    card_active: int
    card_delayed: int
    card_exhausted: int

    def row(self) -> List[int]:
        return [self.t, self.card_tree, self.card_active, self.card_delayed, self.card_exhausted]


class BurstCache:
    """Reads and memoises the burst of each server"""

    def __init__(self, src: RandomSource):
        self.src = src
        self._bursts: Dict[int, List[Attempt]] = {}

    def attempts(self, i: int) -> List[Attempt]:
        burst = self._bursts.get(i)
        if burst is None:
            k_i = self.src.draw_resource(i)
            burst = [Attempt(k, self.src.draw_target(i, k), self.src.draw_bernoulli(i, k)) for k in range(1, k_i + 1)]
            self._bursts[i] = burst
        return burst

    def k_hat(self, i: int) -> int:
        return sum(a.bit for a in self.attempts(i))


def edge_key(i: int, j: int) -> Tuple[int, int]:
    return (i, j) if i <= j else (j, i)


@dataclass
class ErOutcome:
    tau: int
    final_informed: int
    labels: Dict[Word, int]
    emitters: List[Word]
    edges: Dict[Tuple[int, int], EdgeAppearance]
    trace: List[StepTrace] = field(default_factory=list)
    snapshots: List[dict] = field(default_factory=list)


@dataclass
class BurstTimeMap:
    """Random walk indexed by open attempts of the sequential construction.

    ``r_hat[t]`` counts open attempts spent by bursts 0..t-1, ``s_hat[s]`` and
    ``n_hat[s]`` are the walk and informed count after s open attempts.
    """
    r_hat: List[int]
    s_hat: List[int]
    n_hat: List[int]
    card_tree: List[int]
    active_k_hat: List[int]

    def first_zero(self) -> int:
        return next(s for s, value in enumerate(self.s_hat) if value == 0)

    def violations(self) -> List[str]:
        found = []
        for t, (size, mass) in enumerate(zip(self.card_tree, self.active_k_hat)):
            s = self.r_hat[t + 1]
            if self.n_hat[s] != size:
                found.append(f"t={t}: N_hat({s})={self.n_hat[s]} but tree has {size} words")
            if self.s_hat[s] != mass:
                found.append(f"t={t}: S_hat({s})={self.s_hat[s]} but active mass is {mass}")
        if self.first_zero() != self.r_hat[-1]:
            found.append(f"first zero of S_hat at {self.first_zero()}, stop index {self.r_hat[-1]}")
        return found


@dataclass
class CgSeqOutcome:
    tau: int
    final_informed: int
    labels: Dict[Word, int]
    emitters: List[Word]
    burst_map: BurstTimeMap
    trace: List[StepTrace] = field(default_factory=list)
    snapshots: List[dict] = field(default_factory=list)

    @property
    def open_attempts(self) -> int:
        return self.burst_map.r_hat[-1]


@dataclass
class CoupledOutcome:
    tau_er: int
    tau_cgd: int
    er_labels: Dict[Word, int]
    cgd_labels: Dict[Word, int]
    delayed_sizes: List[int]
    created_sizes: List[int]
    freed_sizes: List[int]
    trace: List[StepTrace] = field(default_factory=list)
    snapshots: List[dict] = field(default_factory=list)

    @property
    def final_er(self) -> int:
        return len(self.er_labels)

    @property
    def final_cgd(self) -> int:
        return len(set(self.cgd_labels.values()))


def _snapshot(t, **sets) -> dict:
    return {"t": t, **{name: frozenset(words) for name, words in sets.items()}}


def run_er_mode1(src: RandomSource, trace: bool = False, record_sets: bool = False) -> ErOutcome:
    """Explore the ER graph from a uniform root, always emitting from the least active word"""
    bursts = BurstCache(src)
    labels: Dict[Word, int] = {ROOT: src.draw_initial()}
    informed = {labels[ROOT]}
    active = OrderedWordSet()
    emitters: List[Word] = []
    edges: Dict[Tuple[int, int], EdgeAppearance] = {}
    rows: List[StepTrace] = []
    snaps: List[dict] = []

    t = 0
    v = ROOT
    while True:
        i = labels[v]
        seen = set()
        fresh = []
        for a in bursts.attempts(i):
            edges.setdefault(edge_key(i, a.label), EdgeAppearance(t, a.k, a.bit))
            if a.bit == 1 and a.label not in informed and a.label not in seen:
                fresh.append((child(v, a.k), a.label))
            seen.add(a.label)
        for w, j in fresh:
            labels[w] = j
            informed.add(j)
            active.add(w)
        emitters.append(v)

        if trace:
            rows.append(StepTrace(t, len(labels), len(active), 0, len(emitters)))
        if record_sets:
            snaps.append(_snapshot(t, tree=labels.keys(), active=active))
        if not active:
            break
        v = active.pop_min()
        t += 1

    logger.debug("er1 stopped at tau=%d with %d informed", t, len(labels))
    return ErOutcome(
        tau=t, final_informed=len(labels), labels=labels, emitters=emitters, edges=edges, trace=rows, snapshots=snaps
    )


def run_cg_sequential(src: RandomSource, trace: bool = False, record_sets: bool = False) -> CgSeqOutcome:
    """Complete-graph exploration fed by the open attempts only"""
    bursts = BurstCache(src)
    labels: Dict[Word, int] = {ROOT: src.draw_initial()}
    informed = {labels[ROOT]}
    active = OrderedWordSet()
    emitters: List[Word] = []
    rows: List[StepTrace] = []
    snaps: List[dict] = []

    root_k_hat = bursts.k_hat(labels[ROOT])
    r_hat = [0]
    s_hat = [root_k_hat]
    n_hat = [1]
    card_tree: List[int] = []
    active_mass: List[int] = []
    mass = root_k_hat

    t = 0
    v = ROOT
    while True:
        i = labels[v]
        seen_open = set()
        spent = 0
        for a in bursts.attempts(i):
            if a.bit == 0:
                continue
            spent += 1
            if a.label not in informed and a.label not in seen_open:
                w = child(v, a.k)
                labels[w] = a.label
                informed.add(a.label)
                active.add(w)
                gain = bursts.k_hat(a.label)
                mass += gain
                n_hat.append(n_hat[-1] + 1)
                s_hat.append(s_hat[-1] + gain - 1)
            else:
                n_hat.append(n_hat[-1])
                s_hat.append(s_hat[-1] - 1)
            seen_open.add(a.label)
        mass -= bursts.k_hat(i)
        r_hat.append(r_hat[-1] + spent)
        emitters.append(v)
        card_tree.append(len(labels))
        active_mass.append(mass)

        if trace:
            rows.append(StepTrace(t, len(labels), len(active), 0, len(emitters)))
        if record_sets:
            snaps.append(_snapshot(t, tree=labels.keys(), active=active))
        if not active:
            break
        v = active.pop_min()
        t += 1

    burst_map = BurstTimeMap(r_hat=r_hat, s_hat=s_hat, n_hat=n_hat, card_tree=card_tree, active_k_hat=active_mass)
    return CgSeqOutcome(
        tau=t, final_informed=len(labels), labels=labels, emitters=emitters, burst_map=burst_map, trace=rows, snapshots=snaps
    )


def run_coupled_delayed(src: RandomSource, trace: bool = False, record_sets: bool = False) -> CoupledOutcome:
    """Run the ER exploration and the delayed complete-graph construction together.

    While the ER exploration is alive both share the active set. Open attempts
    that the ER side rejects only because an earlier closed attempt of the
    burst hit the same label go to the delayed set D. Delayed words whose label
    the ER side later informs are freed. Once ER stops, D is explored as a
    complete-graph exploration of its own.
    """
    bursts = BurstCache(src)
    root_label = src.draw_initial()
    er_labels: Dict[Word, int] = {ROOT: root_label}
    er_informed = {root_label}
    cgd_labels: Dict[Word, int] = {ROOT: root_label}
    cgd_informed = {root_label}
    active = OrderedWordSet()
    delayed = OrderedWordSet()
    delayed_by_label: Dict[int, Word] = {}
    exhausted = 0
    rows: List[StepTrace] = []
    snaps: List[dict] = []
    delayed_sizes: List[int] = []
    created_sizes: List[int] = []
    freed_sizes: List[int] = []

    def record(t):
        delayed_sizes.append(len(delayed))
        if trace:
            rows.append(StepTrace(t, len(cgd_labels), len(active), len(delayed), exhausted))
        if record_sets:
            snaps.append(_snapshot(t, tree_er=er_labels.keys(), tree_cgd=cgd_labels.keys(), active=active, delayed=delayed))

    t = 0
    v = ROOT
    while True:
        i = er_labels[v]
        seen_open = set()
        seen_closed = set()
        fresh = []
        created = []
        for a in bursts.attempts(i):
            if a.bit == 1:
                w = child(v, a.k)
                if a.label not in er_informed and a.label not in seen_open and a.label not in seen_closed:
                    fresh.append((w, a.label))
                elif a.label not in cgd_informed and a.label in seen_closed and a.label not in seen_open:
                    created.append((w, a.label))
                seen_open.add(a.label)
            else:
                seen_closed.add(a.label)

        freed = [delayed_by_label.pop(j) for _, j in fresh if j in delayed_by_label]
        for w in freed:
            delayed.discard(w)
            del cgd_labels[w]
        for w, j in fresh:
            er_labels[w] = j
            er_informed.add(j)
            cgd_labels[w] = j
            cgd_informed.add(j)
            active.add(w)
        for w, j in created:
            delayed.add(w)
            delayed_by_label[j] = w
            cgd_labels[w] = j
            cgd_informed.add(j)
        exhausted += 1
        created_sizes.append(len(created))
        freed_sizes.append(len(freed))

        record(t)
        if not active:
            break
        v = active.pop_min()
        t += 1
    tau_er = t

    while delayed:
        v = delayed.pop_min()
        t += 1
        i = cgd_labels[v]
        del delayed_by_label[i]
        seen_open = set()
        created = []
        for a in bursts.attempts(i):
            if a.bit == 0:
                continue
            if a.label not in cgd_informed and a.label not in seen_open:
                created.append((child(v, a.k), a.label))
            seen_open.add(a.label)
        for w, j in created:
            delayed.add(w)
            delayed_by_label[j] = w
            cgd_labels[w] = j
            cgd_informed.add(j)
        exhausted += 1
        created_sizes.append(len(created))
        freed_sizes.append(0)
        record(t)

    logger.debug("coupled run: tau_er=%d tau_cgd=%d", tau_er, t)
    return CoupledOutcome(
        tau_er=tau_er,
        tau_cgd=t,
        er_labels=er_labels,
        cgd_labels=cgd_labels,
        delayed_sizes=delayed_sizes,
        created_sizes=created_sizes,
        freed_sizes=freed_sizes,
        trace=rows,
        snapshots=snaps,
    )


def burst_mismatches(attempts: List[Attempt]) -> int:
    """Labels hit by a closed attempt and by a later open attempt in the same burst"""
    seen_closed = set()
    counted = set()
    for a in attempts:
        if a.bit == 0:
            seen_closed.add(a.label)
        elif a.label in seen_closed:
            counted.add(a.label)
    return len(counted)


def mismatch_bound(src: RandomSource) -> int:
    """Y: total mismatches over the bursts of every server"""
    bursts = BurstCache(src)
    return sum(burst_mismatches(bursts.attempts(i)) for i in range(1, src.n + 1))


def edge_status_total(outcome: ErOutcome, src: RandomSource) -> Dict[Tuple[int, int], int]:
    """Status of every edge (self-loops included): its mark at first appearance,
    or a fresh fill-family Bernoulli for edges the exploration never tried."""
    table = {}
    for i in range(1, src.n + 1):
        for j in range(i, src.n + 1):
            seen = outcome.edges.get((i, j))
            table[(i, j)] = seen.bit if seen is not None else src.draw_bernoulli(i, -j)
    return table


def open_label_closure(src: RandomSource) -> set:
    """Labels reachable from the initial server along open attempts"""
    bursts = BurstCache(src)
    start = src.draw_initial()
    reached = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for a in bursts.attempts(i):
            if a.bit == 1 and a.label not in reached:
                reached.add(a.label)
                stack.append(a.label)
    return reached


def verify_coupling(src: RandomSource) -> List[str]:
    """Run the three constructions on ``src`` and list every broken invariant"""
    er = run_er_mode1(src, record_sets=True)
    cgs = run_cg_sequential(src)
    cgd = run_coupled_delayed(src, record_sets=True)
    bound = mismatch_bound(src)
    found = []

    if cgd.tau_er != er.tau:
        found.append(f"coupled ER side stops at {cgd.tau_er}, ER alone at {er.tau}")
    if cgd.tau_cgd < cgd.tau_er:
        found.append(f"delayed construction stops at {cgd.tau_cgd} before ER at {cgd.tau_er}")
    for snap in cgd.snapshots:
        t = snap["t"]
        if not snap["tree_er"] <= snap["tree_cgd"]:
            found.append(f"t={t}: ER tree not contained in the delayed tree")
        if t <= er.tau and snap["tree_cgd"] != snap["tree_er"] | snap["delayed"]:
            found.append(f"t={t}: delayed tree is not the ER tree plus the delayed words")
        if t <= er.tau and snap["active"] != er.snapshots[t]["active"]:
            found.append(f"t={t}: active sets differ")
        if t <= er.tau and len(snap["delayed"]) > bound:
            found.append(f"t={t}: delayed set of size {len(snap['delayed'])} exceeds bound {bound}")
        if len(snap["tree_cgd"]) - len(snap["active"]) - len(snap["delayed"]) != t + 1:
            found.append(f"t={t}: exhausted count differs from t+1")
    if cgs.tau != cgd.tau_cgd:
        found.append(f"sequential construction stops at {cgs.tau}, delayed at {cgd.tau_cgd}")
    if set(cgs.labels.values()) != set(cgd.cgd_labels.values()):
        found.append("sequential and delayed constructions inform different servers")
    if set(cgs.labels.values()) != open_label_closure(src):
        found.append("sequential construction differs from the open-attempt closure")
    found.extend(cgs.burst_map.violations())
    return found


def coupling_gap_summary(outcomes: List[CoupledOutcome]) -> dict:
    """Empirical law of the stopping-time gap and of the extra delayed-tree words"""
    gaps = np.array([o.tau_cgd - o.tau_er for o in outcomes], dtype=float)
    extra = np.array([len(o.cgd_labels) - len(o.er_labels) for o in outcomes], dtype=float)
    return {
        "runs": len(outcomes),
        "tau_gap_mean": float(gaps.mean()) if len(gaps) else 0.0,
        "tau_gap_max": int(gaps.max()) if len(gaps) else 0,
        "tau_gap_counts": {int(k): v for k, v in sorted(Counter(gaps.astype(int).tolist()).items())},
        "extra_words_mean": float(extra.mean()) if len(extra) else 0.0,
        "extra_words_max": int(extra.max()) if len(extra) else 0,
    }
