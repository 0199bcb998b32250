"""Entropic functionals of finite-dimensional states (natural logarithms)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError
from .tensor import QuantumState, partial_trace

ETA_CUTOFF = 1e-15
KERNEL_TOL = 1e-12
SUPPORT_TOL = 1e-9


def _as_group(group) -> tuple[str, ...]:
    if isinstance(group, str):
        return (group,)
    return tuple(group)


@dataclass(frozen=True)
class PartitionSpec:
    """Parties ``A_1, ..., A_n`` (each a tuple of labels) and optional conditioning ``C``."""

    groups: tuple[tuple[str, ...], ...]
    conditioning: tuple[str, ...] = ()

    def __post_init__(self):
        groups = tuple(_as_group(g) for g in self.groups)
        cond = _as_group(self.conditioning)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "conditioning", cond)
        if not groups or any(not g for g in groups):
            raise DimensionError("partition needs nonempty groups")
        seen: list[str] = [lab for g in groups for lab in g] + list(cond)
        if len(set(seen)) != len(seen):
            raise DimensionError(f"partition groups overlap: {groups} | {cond}")

    @property
    def n(self) -> int:
        return len(self.groups)

    def check(self, state: QuantumState):
        labels = set(state.layout.labels)
        missing = {lab for g in self.groups for lab in g} | set(self.conditioning)
        missing -= labels
        if missing:
            raise DimensionError(f"partition labels {sorted(missing)} not in layout {state.layout.labels}")

    @classmethod
    def parties(cls, state: QuantumState, conditioning: Iterable[str] = ()) -> "PartitionSpec":
        """One party per layout factor, except the conditioning labels."""
        cond = tuple(conditioning)
        return cls(tuple((lab,) for lab in state.layout.labels if lab not in cond), cond)


# --------------------------------------------------------------------------
# scalar functions
# --------------------------------------------------------------------------


def eta(x):
    """``-x ln x`` with ``eta(0) = 0``; tiny arguments take the zero branch."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > ETA_CUTOFF, x, 1.0)
    return np.where(x > ETA_CUTOFF, -safe * np.log(safe), 0.0)


def _scalar(out, like):
    return float(out) if np.ndim(like) == 0 else out


def binary_entropy(p):
    """``h2(p) = eta(p) + eta(1 - p)``."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError(f"binary entropy needs p in [0, 1], got {p}")
    return _scalar(eta(arr) + eta(1.0 - arr), p)


def g_func(x):
    """``g(x) = (x + 1) ln(x + 1) - x ln x``, the entropy bound function."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError(f"g needs x >= 0, got {x}")
    return _scalar((arr + 1.0) * np.log1p(arr) + eta(arr), x)


def spectrum_entropy(probs) -> float:
    return float(np.sum(eta(np.asarray(probs, dtype=float))))


# --------------------------------------------------------------------------
# state functionals
# --------------------------------------------------------------------------


def entropy(rho: QuantumState) -> float:
    """von Neumann entropy ``-Tr rho ln rho``."""
    return spectrum_entropy(rho.eigenvalues())


def relative_entropy(rho: QuantumState, sigma: QuantumState) -> float:
    """``Tr rho (ln rho - ln sigma)``; ``inf`` when supp rho is not inside supp sigma."""
    if rho.layout.dims != sigma.layout.dims:
        raise DimensionError(f"layout mismatch: {rho.layout.dims} vs {sigma.layout.dims}")
    s_vals, s_vecs = np.linalg.eigh(sigma.matrix)
    rho_m = rho.matrix
    # diagonal of rho in sigma's eigenbasis
    weights = np.real(np.einsum("ij,ik,kj->j", s_vecs.conj(), rho_m, s_vecs))
    kernel = s_vals < KERNEL_TOL
    if weights[kernel].sum() > SUPPORT_TOL:
        return float("inf")
    cross = float(np.dot(weights[~kernel], np.log(s_vals[~kernel])))
    return max(0.0, -entropy(rho) - cross)


class _EntropyTable:
    """Memoised marginal entropies of one state, keyed by label set."""

    def __init__(self, state: QuantumState):
        self.state = state
        self.cache: dict[frozenset, float] = {}

    def __call__(self, *groups: Iterable[str]) -> float:
        labels = frozenset(lab for g in groups for lab in g)
        if not labels:
            return 0.0
        if labels not in self.cache:
            self.cache[labels] = entropy(partial_trace(self.state, labels))
        return self.cache[labels]

    def cmi(self, a, b, c=()) -> float:
        """Tripartite ``I(A:B|C) = H(AC) + H(BC) - H(ABC) - H(C)``."""
        return self(a, c) + self(b, c) - self(a, b, c) - self(c)


def conditional_entropy(rho: QuantumState, part: PartitionSpec) -> float:
    """``H(A|B) = H(AB) - H(B)`` for a two-group partition."""
    part.check(rho)
    if part.n != 2:
        raise DimensionError("conditional entropy needs exactly two groups (A, B)")
    h = _EntropyTable(rho)
    a, b = part.groups
    return h(a, b) - h(b)


def multipartite_mi(rho: QuantumState, part: PartitionSpec | None = None) -> float:
    """``sum_k H(A_k) - H(A_1...A_n)``."""
    if part is None:
        part = PartitionSpec.parties(rho)
    part.check(rho)
    if part.conditioning:
        raise DimensionError("use multipartite_qcmi for a conditioned partition")
    h = _EntropyTable(rho)
    return sum(h(g) for g in part.groups) - h(*part.groups)


def _qcmi_chain(h: _EntropyTable, groups, cond) -> float:
    total = 0.0
    for k in range(len(groups) - 1):
        total += h.cmi(groups[k], [lab for g in groups[k + 1:] for lab in g], cond)
    return total


def _qcmi_direct(h: _EntropyTable, groups, cond) -> float:
    hc = h(cond)
    return sum(h(g, cond) - hc for g in groups) - (h(*groups, cond) - hc)


def multipartite_qcmi(rho: QuantumState, part: PartitionSpec, method: str = "chain") -> float:
    """``I(A_1:...:A_n|C)``.

    ``method="chain"`` sums tripartite terms ``I(A_k : A_{k+1}...A_n | C)``;
    ``method="direct"`` uses ``sum_k H(A_k|C) - H(A_1...A_n|C)``.  The direct
    form uses its own entropy table so the two evaluations stay independent.
    """
    part.check(rho)
    if method == "chain":
        return _qcmi_chain(_EntropyTable(rho), part.groups, part.conditioning)
    if method == "direct":
        return _qcmi_direct(_EntropyTable(rho), part.groups, part.conditioning)
    raise ValueError(f"unknown method {method!r}")


def _delta_pairs(state: QuantumState, pairs) -> tuple[list, list]:
    if len(pairs) < 2:
        raise DimensionError("delta needs at least two (A, A') pairs")
    a = [_as_group(p[0]) for p in pairs]
    b = [_as_group(p[1]) for p in pairs]
    PartitionSpec(tuple(a + [g for g in b if g])).check(state)
    return a, b


def delta_ei(state: QuantumState, pairs: Sequence[tuple]) -> float:
    """``I(A_1A'_1:...:A_nA'_n) - I(A'_1:...:A'_n)`` as a sum of QCMI terms.

    ``pairs[k] = (A_k, A'_k)``; each entry is a label or a tuple of labels
    (an empty tuple stands for a trivial primed system).  Term ``k`` is
    ``I(A_k : A_1..A_{k-1} A'_1..A'_{k-1} A'_{k+1}..A'_n | A'_k)``.
    """
    a, b = _delta_pairs(state, pairs)
    h = _EntropyTable(state)
    total = 0.0
    for k in range(len(a)):
        rest = [lab for g in a[:k] for lab in g] + [lab for j, g in enumerate(b) if j != k for lab in g]
        total += h.cmi(a[k], rest, b[k])
    return total


def delta_ei_direct(state: QuantumState, pairs: Sequence[tuple]) -> float:
    """Cross-check of :func:`delta_ei` from the defining MI difference."""
    a, b = _delta_pairs(state, pairs)
    h = _EntropyTable(state)
    joint = sum(h(x, y) for x, y in zip(a, b)) - h(*a, *b)
    primed = sum(h(y) for y in b) - h(*b)
    return joint - primed
