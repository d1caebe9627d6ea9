"""Signed perfect-matching sums (Pfaffians of two-point tables)."""

from typing import Callable, Iterator, List, Sequence, Tuple


def perfect_matchings(items: Sequence[int]) -> Iterator[Tuple[int, List[Tuple[int, int]]]]:
    """
    Yields (sign, pairs) for every perfect matching of `items`.

    The sign is the signature of the permutation listing the pairs
    (i_1, j_1, i_2, j_2, ...) with i_k < j_k and i_1 < i_2 < ...; pairing the
    first remaining item with the one at offset k contributes (-1)^(k-1).
    """
    items = list(items)
    if not items:
        yield 1, []
        return
    if len(items) % 2:
        return
    first = items[0]
    for offset in range(1, len(items)):
        partner = items[offset]
        rest = items[1:offset] + items[offset + 1:]
        sign = -1 if (offset - 1) % 2 else 1
        for sub_sign, pairs in perfect_matchings(rest):
            yield sign * sub_sign, [(first, partner)] + pairs


def signed_matching_sum(two_point: Callable[[int, int], complex], n: int) -> complex:
    """
    Σ over perfect matchings of {0..n-1} of sign · Π two_point(i, j).

    Args:
        two_point: Callable returning the pairing weight of positions i < j.
        n: Number of points; odd n gives 0.

    Returns:
        The Pfaffian-type sum.
    """
    if n % 2:
        return 0.0
    total = 0.0
    for sign, pairs in perfect_matchings(range(n)):
        term = complex(sign)
        for i, j in pairs:
            term *= two_point(i, j)
            if term == 0:
                break
        total += term
    return total
