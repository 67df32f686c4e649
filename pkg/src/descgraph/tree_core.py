"""Vertices of the rooted q-ary tree, written as digit strings.

The empty string is the root.  ``"011"`` is the vertex reached from the root
by taking child 0, then child 1, then child 1.  The out-valency ``q`` is not
stored in an address; callers pass it where it matters.
"""
from __future__ import annotations

from itertools import product
from typing import Iterable, Iterator

from .errors import MalformedAddress, PreconditionError

ROOT = ""
MAX_Q = 10


def check_q(q: int) -> int:
    if not isinstance(q, int) or q < 2 or q > MAX_Q:
        raise PreconditionError(f"out-valency q must be an integer in 2..{MAX_Q}, got {q!r}")
    return q


def check_address(a: str, q: int) -> str:
    if not isinstance(a, str):
        raise MalformedAddress(f"address must be a digit string, got {a!r}")
    for ch in a:
        if not ch.isdigit() or int(ch) >= q:
            raise MalformedAddress(f"digit {ch!r} of address {a!r} is not < {q}")
    return a


def parse_address(text: str) -> str:
    """Read the textual syntax: a digit string, with ``""`` or ``"eps"`` for the root."""
    text = text.strip()
    if text in ("", "eps"):
        return ROOT
    if not text.isdigit():
        raise MalformedAddress(f"not an address: {text!r}")
    return text


def format_address(a: str) -> str:
    return a if a else "eps"


def children(a: str, q: int) -> list[str]:
    check_q(q)
    check_address(a, q)
    return [a + str(i) for i in range(q)]


def is_descendant(a: str, b: str) -> bool:
    """True iff ``b`` lies in the cone below ``a`` (``a == b`` included)."""
    return b.startswith(a)


def is_independent_addresses(addresses: Iterable[str]) -> bool:
    s = sorted(set(addresses))
    # in sorted order a prefix sits immediately before some extension of it
    return all(not s[i + 1].startswith(s[i]) for i in range(len(s) - 1))


def common_prefix_len(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def level(q: int, length: int) -> Iterator[str]:
    """All addresses of a given length, in lexicographic order."""
    for digits in product(range(q), repeat=length):
        yield "".join(map(str, digits))


def independent_address_sets(q: int, k: int, max_cost: int, cost=None) -> list[tuple[str, ...]]:
    """Independent sets of ``k`` addresses, sorted, whose total cost is at most ``max_cost``.

    ``cost`` maps an address to a non-negative integer; by default the
    address length.
    """
    if cost is None:
        cost = len
    pool: list[str] = []
    length = 0
    while True:
        layer = [a for a in level(q, length) if cost(a) <= max_cost]
        if not layer:
            break
        pool.extend(layer)
        length += 1
    pool.sort()
    out: list[tuple[str, ...]] = []

    def rec(start: int, chosen: list[str], budget: int) -> None:
        if len(chosen) == k:
            out.append(tuple(chosen))
            return
        for i in range(start, len(pool)):
            a = pool[i]
            c = cost(a)
            if c > budget:
                continue
            if any(a.startswith(x) or x.startswith(a) for x in chosen):
                continue
            chosen.append(a)
            rec(i + 1, chosen, budget - c)
            chosen.pop()

    rec(0, [], max_cost)
    return out
