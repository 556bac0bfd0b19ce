"""Set partitions of ``{1, ..., n}`` and the noncrossing lattice NC(n).

Partitions are stored canonically: every block is sorted and blocks are
ordered by their least element.  The enumeration below walks restricted
growth strings depth first and only ever extends prefixes that are still
noncrossing, so nothing is generated and thrown away.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterator, Sequence

from .errors import SizeError, ValidationError

MAX_ENUMERATION = 18


@dataclass(frozen=True)
class SetPartition:
    """A partition of ``{1, ..., n}`` into nonempty blocks.

    Parameters
    ----------
    n : int
        Size of the ground set.
    blocks : sequence of sequences of int
        The blocks.  They are normalized on construction (each block sorted,
        blocks ordered by least element); overlaps, gaps, or out-of-range
        elements raise :class:`ValidationError`.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __init__(self, n: int, blocks: Sequence[Sequence[int]]):
        if not isinstance(n, int) or n < 1:
            raise ValidationError(f"ground set size must be a positive integer, got {n!r}")
        canon = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0] if b else 0))
        seen = []
        for block in canon:
            if not block:
                raise ValidationError("empty block")
            seen.extend(block)
        if sorted(seen) != list(range(1, n + 1)):
            raise ValidationError(f"blocks {canon} do not partition {{1..{n}}}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "blocks", canon)

    @classmethod
    def from_rgs(cls, rgs: Sequence[int]) -> "SetPartition":
        """Build a partition from a restricted growth string (0-based labels)."""
        groups: dict[int, list[int]] = {}
        for element, label in enumerate(rgs, start=1):
            groups.setdefault(label, []).append(element)
        return cls(len(rgs), list(groups.values()))

    @property
    def rgs(self) -> tuple[int, ...]:
        """Element-to-block-index map, ``rgs[i-1]`` is the block of ``i``."""
        labels = [0] * self.n
        for index, block in enumerate(self.blocks):
            for element in block:
                labels[element - 1] = index
        return tuple(labels)

    def __len__(self) -> int:
        return len(self.blocks)

    def __str__(self) -> str:
        inner = ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return "{" + inner + "}"


def is_noncrossing(p: SetPartition) -> bool:
    """True iff no ``a < b < c < d`` has ``a, c`` in one block and ``b, d`` in another."""
    if not isinstance(p, SetPartition):
        raise ValidationError(f"expected a SetPartition, got {type(p).__name__}")
    labels = p.rgs
    k = len(p.blocks)
    for first in range(k):
        for second in range(first + 1, k):
            # look for the subsequence first, second, first, second (or swapped)
            pattern = [label for label in labels if label in (first, second)]
            changes = sum(1 for x, y in zip(pattern, pattern[1:]) if x != y)
            if changes >= 3:
                return False
    return True


def block_profile(p: SetPartition) -> tuple[int, ...]:
    """Block sizes in block order; compare as a multiset."""
    return tuple(len(b) for b in p.blocks)


def _noncrossing_rgs(n: int) -> Iterator[tuple[int, ...]]:
    # Blocks that may still receive elements form a stack; joining a block
    # closes every block opened after it.  Options are visited in increasing
    # block index, which yields lexicographic order on the label string.
    labels = [0] * n

    def extend(position: int, stack: tuple[int, ...], nblocks: int):
        if position == n:
            yield tuple(labels)
            return
        for depth, block in enumerate(stack):
            labels[position] = block
            yield from extend(position + 1, stack[: depth + 1], nblocks)
        labels[position] = nblocks
        yield from extend(position + 1, stack + (nblocks,), nblocks + 1)

    labels[0] = 0
    yield from extend(1, (0,), 1)


def _check_size(n) -> None:
    if not isinstance(n, int) or not 1 <= n <= MAX_ENUMERATION:
        raise SizeError(f"enumeration supports 1 <= n <= {MAX_ENUMERATION}, got {n!r}")


def iter_noncrossing_rgs(n: int) -> Iterator[tuple[int, ...]]:
    """Lazily yield the label strings of NC(n) in canonical order."""
    _check_size(n)
    return _noncrossing_rgs(n)


def iter_noncrossing(n: int) -> Iterator[SetPartition]:
    """Lazily yield NC(n) in canonical order (see :func:`enumerate_noncrossing`)."""
    for labels in iter_noncrossing_rgs(n):
        yield SetPartition.from_rgs(labels)


@lru_cache(maxsize=None)
def _enumerate_cached(n: int) -> tuple[SetPartition, ...]:
    return tuple(iter_noncrossing(n))


def enumerate_noncrossing(n: int) -> list[SetPartition]:
    """Every noncrossing partition of ``{1..n}`` exactly once.

    The order is lexicographic on the element-to-block-index map.  Results
    are cached, so prefer :func:`iter_noncrossing` for large ``n``.

    >>> [str(p) for p in enumerate_noncrossing(3)]
    ['{{1,2,3}}', '{{1,2},{3}}', '{{1,3},{2}}', '{{1},{2,3}}', '{{1},{2},{3}}']
    """
    _check_size(n)
    return list(_enumerate_cached(n))


def catalan(n: int) -> int:
    """The n-th Catalan number ``binom(2n, n) / (n + 1)``."""
    if n < 0:
        raise SizeError("Catalan numbers are indexed by n >= 0")
    return comb(2 * n, n) // (n + 1)
