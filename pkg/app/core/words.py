"""
Ulam-Harris words (finite sequences of positive integers) and ordered word sets.
Words are ordered by length first, then lexicographically.
"""
import heapq
from typing import Iterator, List, Optional, Tuple

Word = Tuple[int, ...]
ROOT: Word = ()


def word_key(w: Word) -> Tuple[int, Word]:
    return (len(w), w)


def word_compare(a: Word, b: Word) -> int:
    """-1, 0 or 1: shorter words first, then lexicographic"""
    ka, kb = word_key(a), word_key(b)
    return (ka > kb) - (ka < kb)


def child(w: Word, k: int) -> Word:
    return w + (k,)


class OrderedWordSet:
    """Set of words with fast minimum extraction in the word order.

    Discarded words stay in the heap and are skipped when they reach the top.
    """

    def __init__(self, words=()):
        self._heap: List[Tuple[int, Word]] = []
        self._members = set()
        for w in words:
            self.add(w)

    def add(self, w: Word) -> bool:
        if w in self._members:
            return False
        self._members.add(w)
        heapq.heappush(self._heap, word_key(w))
        return True

    def discard(self, w: Word) -> bool:
        if w not in self._members:
            return False
        self._members.remove(w)
        return True

    def _prune(self) -> None:
        while self._heap and self._heap[0][1] not in self._members:
            heapq.heappop(self._heap)

    def min(self) -> Optional[Word]:
        self._prune()
        return self._heap[0][1] if self._heap else None

    def pop_min(self) -> Word:
        self._prune()
        if not self._heap:
            raise KeyError("pop from an empty word set")
        _, w = heapq.heappop(self._heap)
        self._members.remove(w)
        return w

    def __contains__(self, w) -> bool:
        return w in self._members

    def __len__(self) -> int:
        return len(self._members)

    def __bool__(self) -> bool:
        return bool(self._members)

    def __iter__(self) -> Iterator[Word]:
        return iter(sorted(self._members, key=word_key))

    def snapshot(self) -> frozenset:
        return frozenset(self._members)
