"""Observable dictionaries: ordered monomial bases, their lifts and Jacobians.

A dictionary is an ordered tuple of scalar observables on the state space.
Stacking them gives the lifting map that sends a state of dimension ``d`` to
a vector of dimension ``N``; the image of the state box under this map is the
manifold that all projection machinery in :mod:`kooplift.manifold` works on.
Only monomial observables are supported, which keeps evaluation, Jacobians
and serialization exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

__all__ = [
    "Dictionary",
    "monomial_dictionary",
    "dictionary_from_exponents",
    "exclusions_from_labels",
    "variable_names",
]


def variable_names(d: int) -> tuple[str, ...]:
    """Conventional variable names: (x, v) for d=2, (x, y, z) for d=3."""
    if d == 1:
        return ("x",)
    if d == 2:
        return ("x", "v")
    if d == 3:
        return ("x", "y", "z")
    return tuple(f"x{i + 1}" for i in range(d))


def _label(exponents: tuple[int, ...], names: tuple[str, ...]) -> str:
    parts = []
    for name, e in zip(names, exponents):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def _grlex_key(e: tuple[int, ...]):
    # graded lexicographic: total degree first, then x1 before x2 etc.
    return (sum(e), tuple(-a for a in e))


@dataclass(frozen=True)
class Dictionary:
    """Ordered monomial observable basis on R^d.

    Parameters
    ----------
    exponents : ndarray of int, shape (N, d)
        Row i holds the exponent tuple of observable i.
    name : str
        Short identifier used in descriptors and CSV metadata (e.g. "V3").

    Attributes
    ----------
    labels : tuple of str
        Human-readable monomial labels ("1", "x", "x^2*v", ...).
    coordinate_indices : tuple of int or None
        Positions j with observable_j(x) = x_j, one per state coordinate,
        present only when every degree-1 monomial is in the basis.
    """

    exponents: np.ndarray
    name: str = "dict"
    labels: tuple[str, ...] = field(default=None)  # type: ignore[assignment]
    coordinate_indices: tuple[int, ...] | None = field(default=None)
    # lowered exponent tables for the Jacobian, built once
    _jac_exponents: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        exps = np.asarray(self.exponents, dtype=np.int64)
        if exps.ndim != 2:
            raise ValueError("exponents must be a 2-D array (N, d)")
        if np.any(exps < 0):
            raise ValueError("monomial exponents must be non-negative")
        object.__setattr__(self, "exponents", exps)
        n, d = exps.shape
        if self.labels is None:
            names = variable_names(d)
            object.__setattr__(
                self, "labels", tuple(_label(tuple(row), names) for row in exps)
            )
        if len(self.labels) != n:
            raise ValueError("labels length must match observable count")
        coords = _find_coordinate_indices(exps)
        object.__setattr__(self, "coordinate_indices", coords)
        # jac table: entry [k, i, :] is row i with exponent k lowered by one
        lowered = np.repeat(exps[None, :, :], d, axis=0)
        for k in range(d):
            lowered[k, :, k] = np.maximum(lowered[k, :, k] - 1, 0)
        object.__setattr__(self, "_jac_exponents", lowered)

    @property
    def d(self) -> int:
        return self.exponents.shape[1]

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    @property
    def observables(self) -> list:
        """The basis as plain callables, in dictionary order."""

        def make(row):
            return lambda x: float(np.prod(np.asarray(x, dtype=float) ** row))

        return [make(row) for row in self.exponents]

    def evaluate(self, x) -> np.ndarray:
        """Lift a single state to its length-N observable vector."""
        x = np.asarray(x, dtype=float)
        return np.prod(x[None, :] ** self.exponents, axis=1)

    def evaluate_batch(self, points) -> np.ndarray:
        """Lift m states at once; returns an (m, N) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.prod(pts[:, None, :] ** self.exponents[None, :, :], axis=2)

    def jacobian(self, x) -> np.ndarray:
        """Differential of the lifting map at x, shape (N, d); row i is grad of observable i."""
        x = np.asarray(x, dtype=float)
        # (d, N) table of lowered-monomial values, scaled by the exponent rule
        vals = np.prod(x[None, None, :] ** self._jac_exponents, axis=2)
        return self.exponents * vals.T

    def __repr__(self) -> str:  # labels carry all the information
        return f"Dictionary({self.name}, N={self.size}, d={self.d})"


def _find_coordinate_indices(exps: np.ndarray) -> tuple[int, ...] | None:
    n, d = exps.shape
    indices = []
    for j in range(d):
        unit = np.zeros(d, dtype=np.int64)
        unit[j] = 1
        hits = np.nonzero(np.all(exps == unit, axis=1))[0]
        if hits.size == 0:
            return None
        indices.append(int(hits[0]))
    return tuple(indices)


def monomial_dictionary(n: int, d: int, exclude=()) -> Dictionary:
    """All monomials of total degree <= n in d variables, graded-lex ordered.

    The constant comes first, then the degree-1 terms in coordinate order,
    then higher degrees. ``exclude`` removes monomials by exponent tuple;
    excluding a tuple that is not in the basis is an error.

    Examples
    --------
    >>> monomial_dictionary(2, 2).labels
    ('1', 'x', 'v', 'x^2', 'x*v', 'v^2')
    """
    if n < 1:
        raise ValueError("max degree must be >= 1")
    if d < 1:
        raise ValueError("state dimension must be >= 1")
    all_exps = [e for e in product(range(n + 1), repeat=d) if sum(e) <= n]
    all_exps.sort(key=_grlex_key)
    excluded = {tuple(int(a) for a in e) for e in exclude}
    have = set(all_exps)
    missing = excluded - have
    if missing:
        raise ValueError(f"cannot exclude monomials not in the basis: {sorted(missing)}")
    kept = [e for e in all_exps if e not in excluded]
    name = f"V{n}" if not excluded else f"V{n}-minus-{len(excluded)}"
    return Dictionary(np.asarray(kept, dtype=np.int64), name=name)


def dictionary_from_exponents(exponents, name: str = "custom") -> Dictionary:
    """Build a dictionary from an explicit ordered list of exponent tuples."""
    exps = np.asarray(exponents, dtype=np.int64)
    if exps.ndim != 2:
        raise ValueError("expected a sequence of exponent tuples")
    return Dictionary(exps, name=name)


def exclusions_from_labels(n: int, d: int, labels) -> tuple[tuple[int, ...], ...]:
    """Resolve human-readable monomial labels against the degree-n basis.

    Used by the config layer, where exclusions are written as labels
    ("x", "x*v") rather than exponent tuples.
    """
    full = monomial_dictionary(n, d)
    by_label = {lab: tuple(int(a) for a in row) for lab, row in zip(full.labels, full.exponents)}
    out = []
    for lab in labels:
        lab = lab.strip()
        if not lab:
            continue
        if lab not in by_label:
            raise ValueError(f"unknown monomial label {lab!r} for degree {n}, d={d}")
        out.append(by_label[lab])
    return tuple(out)


def total_count(n: int, d: int) -> int:
    """Number of monomials of total degree <= n in d variables: C(n+d, d)."""
    return math.comb(n + d, d)
