"""Finite-dimensional Hilbert-space numerics.

States are density matrices over an ordered list of labelled tensor factors.
Three storage forms are supported behind one :class:`QuantumState` type:

* ``dense``  -- a plain ``(N, N)`` complex array,
* ``factor`` -- an ``(N, r)`` array ``F`` with ``rho = F F^dagger`` (low rank),
* ``sparse`` -- a ``scipy.sparse`` matrix, diagonalised block by block.

Dense storage is capped at ``MAX_DIM`` because every spectral operation costs
``O(N^3)``; the structured forms allow much larger spaces as long as the
relevant blocks / ranks stay small.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, StateError, TruncationError

MAX_DIM = 4096
MAX_STRUCTURED_DIM = 1 << 22
TOL = 1e-9
MASS_FLOOR = 1e-12


# --------------------------------------------------------------------------
# layouts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor factors ``(label, dim)``.

    ``constrained`` is the number of leading factors that carry an energy
    constraint (the ``A_1..A_m`` of the energy-constrained bounds).
    """

    factors: tuple[tuple[str, int], ...]
    constrained: int | None = None

    def __post_init__(self):
        factors = tuple((str(lab), int(dim)) for lab, dim in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise DimensionError("layout needs at least one factor")
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise DimensionError(f"duplicate factor labels in {labels}")
        if any(dim < 1 for _, dim in factors):
            raise DimensionError(f"factor dimensions must be >= 1, got {self.dims}")
        m = len(factors) if self.constrained is None else int(self.constrained)
        if not 1 <= m <= len(factors):
            raise DimensionError(f"constrained count {m} outside [1, {len(factors)}]")
        object.__setattr__(self, "constrained", m)

    @classmethod
    def from_dims(cls, dims: Sequence[int], labels: Sequence[str] | None = None,
                  constrained: int | None = None) -> "SystemLayout":
        if labels is None:
            labels = [f"A{k + 1}" for k in range(len(dims))]
        return cls(tuple(zip(labels, dims)), constrained)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    def __len__(self):
        return len(self.factors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DimensionError(f"unknown factor label {label!r}; layout has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dims[self.index(lab)] for lab in labels], dtype=object))

    def sublayout(self, labels: Iterable[str]) -> "SystemLayout":
        wanted = set(labels)
        for lab in wanted:
            self.index(lab)
        kept = tuple(f for f in self.factors if f[0] in wanted)
        m = sum(1 for lab, _ in self.factors[: self.constrained] if lab in wanted)
        return SystemLayout(kept, max(m, 1))

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        """Append ``other``; clashing labels from ``other`` get a trailing prime."""
        taken = set(self.labels)
        extra = []
        for lab, dim in other.factors:
            while lab in taken:
                lab += "'"
            taken.add(lab)
            extra.append((lab, dim))
        return SystemLayout(self.factors + tuple(extra))


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------


def _check_dim(n: int, max_dim: int, what: str):
    if n > max_dim:
        raise DimensionError(f"{what} dimension {n} exceeds the configured maximum {max_dim}")


class QuantumState:
    """Density matrix over a :class:`SystemLayout`.

    Build with ``QuantumState(layout, matrix)`` for dense or sparse matrices,
    or with :meth:`from_factor` / :meth:`from_vector` for low-rank states.
    Construction validates the density-matrix invariants unless ``check=False``.
    """

    def __init__(self, layout: SystemLayout, matrix=None, *, factor=None,
                 check: bool = True, tol: float = TOL):
        if (matrix is None) == (factor is None):
            raise ValueError("pass exactly one of matrix / factor")
        self.layout = layout
        n = layout.total_dim
        if factor is not None:
            factor = np.asarray(factor, dtype=complex)
            if factor.ndim == 1:
                factor = factor[:, None]
            if factor.shape[0] != n:
                raise DimensionError(f"factor has {factor.shape[0]} rows, layout needs {n}")
            _check_dim(n, MAX_STRUCTURED_DIM, "state")
            self.kind = "factor"
            self._data = factor
        elif sp.issparse(matrix):
            if matrix.shape != (n, n):
                raise DimensionError(f"matrix shape {matrix.shape} does not match layout dimension {n}")
            _check_dim(n, MAX_STRUCTURED_DIM, "state")
            self.kind = "sparse"
            self._data = sp.csr_matrix(matrix, dtype=complex)
        else:
            matrix = np.asarray(matrix, dtype=complex)
            if matrix.shape != (n, n):
                raise DimensionError(f"matrix shape {matrix.shape} does not match layout dimension {n}")
            _check_dim(n, MAX_DIM, "dense state")
            self.kind = "dense"
            self._data = matrix
        if check:
            self._validate(tol)

    @classmethod
    def from_factor(cls, layout: SystemLayout, factor, **kw) -> "QuantumState":
        return cls(layout, factor=factor, **kw)

    @classmethod
    def from_vector(cls, layout: SystemLayout, vector, *, normalize: bool = False) -> "QuantumState":
        vec = np.asarray(vector, dtype=complex).ravel()
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(layout, factor=vec[:, None])

    def _validate(self, tol: float):
        tr = self.trace()
        if abs(tr - 1.0) > tol:
            raise StateError(f"trace is {tr!r}, expected 1")
        if self.kind == "factor":
            return
        if self.kind == "dense":
            herm_gap = np.max(np.abs(self._data - self._data.conj().T))
        else:
            diff = self._data - self._data.conj().T
            herm_gap = np.max(np.abs(diff.data)) if diff.nnz else 0.0
        if herm_gap > tol:
            raise StateError(f"matrix is not Hermitian (max asymmetry {herm_gap:.3e})")
        low = self.eigenvalues(clamp=False).min()
        if low < -tol:
            raise StateError(f"matrix has negative eigenvalue {low:.3e}")

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    @property
    def factor(self) -> np.ndarray:
        if self.kind != "factor":
            raise TypeError(f"{self.kind} state has no factor form")
        return self._data

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense matrix (materialised on demand for structured states)."""
        if self.kind == "dense":
            return self._data
        _check_dim(self.dim, MAX_DIM, "dense state")
        if self.kind == "factor":
            return self._data @ self._data.conj().T
        return self._data.toarray()

    def to_sparse(self) -> sp.csr_matrix:
        if self.kind == "sparse":
            return self._data
        if self.kind == "dense":
            return sp.csr_matrix(self._data)
        f = self._data
        rows = np.flatnonzero(np.any(f != 0, axis=1))
        _check_dim(len(rows), MAX_DIM, "factor support")
        block = f[rows] @ f[rows].conj().T
        r, c = np.meshgrid(rows, rows, indexing="ij")
        return sp.csr_matrix((block.ravel(), (r.ravel(), c.ravel())), shape=(self.dim, self.dim))

    def trace(self) -> float:
        if self.kind == "factor":
            return float(np.vdot(self._data, self._data).real)
        return float(self._data.diagonal().sum().real)

    def diagonal(self) -> np.ndarray:
        if self.kind == "factor":
            return np.sum(np.abs(self._data) ** 2, axis=1)
        return np.real(np.asarray(self._data.diagonal())).ravel()

    def eigenvalues(self, clamp: bool = True) -> np.ndarray:
        """Sorted spectrum; tiny negative noise is clamped to zero."""
        if self.kind == "factor":
            f = self._data
            gram = f.conj().T @ f if f.shape[1] <= f.shape[0] else f @ f.conj().T
            vals = np.linalg.eigvalsh(gram)
        elif self.kind == "dense":
            vals = _dense_eigvalsh(self._data)
        else:
            vals = _sparse_eigvalsh(self._data)
        if clamp:
            if vals.size and vals.min() < -TOL:
                raise StateError(f"state has negative eigenvalue {vals.min():.3e}")
            vals = np.where(vals < 0, 0.0, vals)
        return np.sort(vals)

    def __repr__(self):
        return f"QuantumState({self.kind}, dims={self.layout.dims}, labels={self.layout.labels})"


@dataclass(frozen=True)
class HermitianOperator:
    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise DimensionError(f"operator shape {mat.shape} does not match layout dimension {n}")
        if np.max(np.abs(mat - mat.conj().T)) > TOL * max(1.0, np.abs(mat).max()):
            raise StateError("operator is not Hermitian")
        object.__setattr__(self, "matrix", mat)

    def expectation(self, state: QuantumState) -> float:
        return float(np.real(np.trace(self.matrix @ state.matrix)))


def _sparse_eigvalsh(mat: sp.spmatrix) -> np.ndarray:
    """Eigenvalues of a Hermitian sparse matrix via its connected blocks."""
    mat = sp.csr_matrix(mat)
    n = mat.shape[0]
    pattern = mat.copy()
    pattern.data = np.ones_like(pattern.data, dtype=float)
    ncomp, labels = connected_components(pattern, directed=False)
    sizes = np.bincount(labels, minlength=ncomp)
    diag = np.real(mat.diagonal())
    single = sizes[labels] == 1
    vals = [diag[single]]
    order = np.argsort(labels, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    for comp in np.flatnonzero(sizes > 1):
        idx = order[bounds[comp]:bounds[comp + 1]]
        _check_dim(len(idx), MAX_DIM, "sparse block")
        block = mat[idx][:, idx].toarray()
        vals.append(np.linalg.eigvalsh(block))
    out = np.concatenate(vals) if vals else np.zeros(0)
    assert out.size == n
    return out


def _dense_eigvalsh(mat: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian array; mostly-zero large arrays go through the block path."""
    if mat.shape[0] > 256 and np.count_nonzero(mat) < 0.05 * mat.size:
        return _sparse_eigvalsh(sp.csr_matrix(mat))
    return np.linalg.eigvalsh(mat)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------


def basis_state(layout: SystemLayout, levels: Sequence[int]) -> QuantumState:
    """Pure product basis state ``|levels[0], levels[1], ...>``."""
    idx = int(np.ravel_multi_index(tuple(levels), layout.dims))
    vec = np.zeros(layout.total_dim, dtype=complex)
    vec[idx] = 1.0
    return QuantumState.from_vector(layout, vec)


def maximally_mixed(layout: SystemLayout) -> QuantumState:
    n = layout.total_dim
    if n <= MAX_DIM:
        return QuantumState(layout, np.eye(n) / n, check=False)
    return QuantumState(layout, sp.identity(n, format="csr") / n, check=False)


def diagonal_state(layout: SystemLayout, probs) -> QuantumState:
    probs = np.asarray(probs, dtype=float)
    if layout.total_dim <= MAX_DIM:
        return QuantumState(layout, np.diag(probs))
    return QuantumState(layout, sp.diags(probs, format="csr"))


def mix(states: Sequence[QuantumState], weights: Sequence[float]) -> QuantumState:
    """Convex combination ``sum_i w_i rho_i`` in the cheapest common form."""
    weights = np.asarray(weights, dtype=float)
    if len(states) != len(weights) or not len(states):
        raise ValueError("need one weight per state")
    layout = states[0].layout
    if any(s.layout != layout for s in states):
        raise DimensionError("cannot mix states on different layouts")
    kinds = {s.kind for s in states}
    if kinds == {"factor"}:
        cols = [np.sqrt(w) * s.factor for s, w in zip(states, weights) if w > 0]
        return QuantumState(layout, factor=np.hstack(cols), check=False)
    if kinds == {"dense"} or (layout.total_dim <= MAX_DIM and "sparse" not in kinds):
        return QuantumState(layout, sum(w * s.matrix for s, w in zip(states, weights)), check=False)
    total = sum(w * s.to_sparse() for s, w in zip(states, weights))
    return QuantumState(layout, sp.csr_matrix(total), check=False)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def tensor_product(states: Sequence[QuantumState], max_dim: int = MAX_DIM) -> QuantumState:
    """Kronecker product in listed order; layouts are concatenated."""
    if not states:
        raise ValueError("tensor_product needs at least one state")
    layout = states[0].layout
    for s in states[1:]:
        layout = layout.concat(s.layout)
    n = layout.total_dim
    kinds = {s.kind for s in states}
    if kinds == {"factor"}:
        _check_dim(n, MAX_STRUCTURED_DIM, "product")
        f = states[0].factor
        for s in states[1:]:
            f = np.kron(f, s.factor)
        return QuantumState(layout, factor=f, check=False)
    if n <= max_dim and "sparse" not in kinds:
        mat = states[0].matrix
        for s in states[1:]:
            mat = np.kron(mat, s.matrix)
        return QuantumState(layout, mat, check=False)
    if "sparse" not in kinds and kinds != {"factor"} and n > max_dim:
        raise DimensionError(f"product dimension {n} exceeds the configured maximum {max_dim}")
    _check_dim(n, MAX_STRUCTURED_DIM, "product")
    mat = states[0].to_sparse()
    for s in states[1:]:
        mat = sp.kron(mat, s.to_sparse(), format="csr")
    return QuantumState(layout, mat, check=False)


def _keep_indices(layout: SystemLayout, keep) -> tuple[list[int], list[int]]:
    keep = set(keep)
    if not keep:
        raise DimensionError("keep must name at least one factor")
    for lab in keep:
        layout.index(lab)
    kept = [i for i, lab in enumerate(layout.labels) if lab in keep]
    traced = [i for i in range(len(layout)) if i not in kept]
    return kept, traced


def partial_trace(state: QuantumState, keep: Iterable[str]) -> QuantumState:
    """Reduced state on the factors named in ``keep`` (original order kept)."""
    layout = state.layout
    kept, traced = _keep_indices(layout, keep)
    if not traced:
        return state
    sub = layout.sublayout(layout.labels[i] for i in kept)
    dims = list(layout.dims)
    k_dim = int(np.prod([dims[i] for i in kept]))
    t_dim = int(np.prod([dims[i] for i in traced]))
    n = len(dims)
    if state.kind == "factor":
        f = state.factor
        r = f.shape[1]
        f = f.reshape(dims + [r]).transpose(kept + traced + [n]).reshape(k_dim, t_dim * r)
        if f.shape[1] >= f.shape[0] and k_dim <= MAX_DIM:
            return QuantumState(sub, f @ f.conj().T, check=False)
        return QuantumState(sub, factor=f, check=False)
    if state.kind == "dense":
        perm = kept + traced
        t = state.matrix.reshape(dims + dims).transpose(perm + [n + i for i in perm])
        t = t.reshape(k_dim, t_dim, k_dim, t_dim)
        return QuantumState(sub, np.einsum("itjt->ij", t), check=False)
    coo = state.to_sparse().tocoo()
    rows = np.unravel_index(coo.row, dims)
    cols = np.unravel_index(coo.col, dims)
    match = np.ones(coo.nnz, dtype=bool)
    for i in traced:
        match &= rows[i] == cols[i]
    kdims = [dims[i] for i in kept]
    new_r = np.ravel_multi_index(tuple(rows[i][match] for i in kept), kdims)
    new_c = np.ravel_multi_index(tuple(cols[i][match] for i in kept), kdims)
    red = sp.csr_matrix((coo.data[match], (new_r, new_c)), shape=(k_dim, k_dim))
    if k_dim <= MAX_DIM:
        return QuantumState(sub, red.toarray(), check=False)
    return QuantumState(sub, red, check=False)


def _difference_eigenvalues(rho: QuantumState, sigma: QuantumState) -> np.ndarray:
    if rho.kind == "factor" and sigma.kind == "factor":
        a, b = rho.factor, sigma.factor
        w = np.hstack([a, b])
        if w.shape[1] < w.shape[0]:
            _, r = np.linalg.qr(w)
            ra, rb = r[:, : a.shape[1]], r[:, a.shape[1]:]
            return np.linalg.eigvalsh(ra @ ra.conj().T - rb @ rb.conj().T)
    if "sparse" in (rho.kind, sigma.kind) or rho.dim > MAX_DIM:
        return _sparse_eigvalsh(rho.to_sparse() - sigma.to_sparse())
    return _dense_eigvalsh(rho.matrix - sigma.matrix)


def trace_norm_difference(rho: QuantumState, sigma: QuantumState) -> float:
    """``||rho - sigma||_1`` (sum of absolute eigenvalues of the difference)."""
    if rho.layout.dims != sigma.layout.dims:
        raise DimensionError(f"layout mismatch: {rho.layout.dims} vs {sigma.layout.dims}")
    return float(np.sum(np.abs(_difference_eigenvalues(rho, sigma))))


def trace_distance(rho: QuantumState, sigma: QuantumState) -> float:
    """Half the trace norm of ``rho - sigma``; lies in [0, 1]."""
    return min(1.0, 0.5 * trace_norm_difference(rho, sigma))


def purify(rho: QuantumState, label: str = "R") -> QuantumState:
    """Pure state on ``layout + R`` whose ``R``-marginal is traced out to ``rho``.

    Uses the spectral decomposition with eigenvalues sorted descending; zero
    eigenvalues are dropped so ``dim R = rank(rho)``.
    """
    while label in rho.layout.labels:
        label += "'"
    if rho.kind == "factor":
        u, s, _ = np.linalg.svd(rho.factor, full_matrices=False)
        probs, vecs = s**2, u
    else:
        probs, vecs = np.linalg.eigh(rho.matrix)
        probs, vecs = probs[::-1], vecs[:, ::-1]
    keep = probs > MASS_FLOOR * max(probs.max(), 1.0)
    probs, vecs = probs[keep], vecs[:, keep]
    r = len(probs)
    layout = SystemLayout(rho.layout.factors + ((label, r),), rho.layout.constrained)
    # psi = sum_i sqrt(p_i) |v_i>|i>, stored as an (N*r,) vector
    psi = (vecs * np.sqrt(probs)).reshape(-1)
    return QuantumState.from_vector(layout, psi / np.linalg.norm(psi))


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalChannel:
    """Product channel ``Phi_1 x ... x Phi_n`` given by per-factor Kraus sets."""

    kraus: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        sets = tuple(tuple(np.asarray(k, dtype=complex) for k in ks) for ks in self.kraus)
        for i, ks in enumerate(sets):
            if not ks:
                raise ValueError(f"factor {i} has an empty Kraus set")
            d_in = ks[0].shape[1]
            total = sum(k.conj().T @ k for k in ks)
            if np.max(np.abs(total - np.eye(d_in))) > TOL * 10:
                raise StateError(f"Kraus set {i} is not trace preserving")
        object.__setattr__(self, "kraus", sets)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "LocalChannel":
        return cls(tuple((np.eye(d),) for d in dims))

    @property
    def input_dims(self) -> tuple[int, ...]:
        return tuple(ks[0].shape[1] for ks in self.kraus)

    @property
    def output_dims(self) -> tuple[int, ...]:
        return tuple(ks[0].shape[0] for ks in self.kraus)


def apply_local_channel(channel: LocalChannel, rho: QuantumState) -> QuantumState:
    """Apply a product channel factor by factor; output labels are unchanged."""
    dims = list(rho.layout.dims)
    if len(channel.kraus) != len(dims) or list(channel.input_dims) != dims:
        raise DimensionError(f"channel input dims {channel.input_dims} do not match state dims {tuple(dims)}")
    out_layout = SystemLayout(tuple(zip(rho.layout.labels, channel.output_dims)), rho.layout.constrained)
    n = len(dims)
    if rho.kind == "factor":
        f = rho.factor.reshape(dims + [-1])
        for k, ks in enumerate(channel.kraus):
            parts = [np.moveaxis(np.tensordot(K, f, axes=([1], [k])), 0, k) for K in ks]
            f = np.concatenate(parts, axis=n)
        return QuantumState(out_layout, factor=f.reshape(out_layout.total_dim, -1), check=False)
    t = rho.matrix.reshape(dims + dims)
    for k, ks in enumerate(channel.kraus):
        acc = None
        for K in ks:
            term = np.moveaxis(np.tensordot(K, t, axes=([1], [k])), 0, k)
            term = np.moveaxis(np.tensordot(K.conj(), term, axes=([1], [n + k])), 0, n + k)
            acc = term if acc is None else acc + term
        t = acc
    n_out = out_layout.total_dim
    return QuantumState(out_layout, t.reshape(n_out, n_out), check=False)


def dephasing_channel(d: int) -> tuple[np.ndarray, ...]:
    return tuple(np.outer(np.eye(d)[i], np.eye(d)[i]) for i in range(d))


def depolarizing_channel(d: int) -> tuple[np.ndarray, ...]:
    """Completely depolarising channel ``rho -> Tr(rho) I/d``."""
    eye = np.eye(d)
    return tuple(np.outer(eye[i], eye[j]) / np.sqrt(d) for i in range(d) for j in range(d))


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_isometry_channel(rng: np.random.Generator, d: int, env: int = 2) -> tuple[np.ndarray, ...]:
    """Kraus operators of ``rho -> Tr_env V rho V^dagger`` with a Haar isometry ``V``."""
    v = haar_unitary(rng, d * env)[:, :d].reshape(d, env, d)
    return tuple(v[:, j, :] for j in range(env))


def random_local_channel(rng: np.random.Generator, dims: Sequence[int], env: int = 2) -> LocalChannel:
    return LocalChannel(tuple(random_isometry_channel(rng, d, env) for d in dims))


# --------------------------------------------------------------------------
# energy truncation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationSpec:
    """Per-constrained-factor cutoffs: keep the ``d_k`` lowest levels of factor ``k``."""

    cutoffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(d) for d in self.cutoffs))

    @classmethod
    def uniform(cls, d: int, m: int) -> "TruncationSpec":
        return cls((d,) * m)

    def mask(self, layout: SystemLayout) -> np.ndarray:
        """Boolean diagonal of ``Q_d = P^1_d x ... x P^m_d x I``."""
        if len(self.cutoffs) > len(layout):
            raise DimensionError("more cutoffs than layout factors")
        keep = np.ones(layout.total_dim, dtype=bool)
        idx = np.unravel_index(np.arange(layout.total_dim), layout.dims)
        for k, d in enumerate(self.cutoffs):
            if not 1 <= d <= layout.dims[k]:
                raise DimensionError(f"cutoff {d} outside [1, {layout.dims[k]}] for factor {layout.labels[k]}")
            keep &= idx[k] < d
        return keep


def project(state: QuantumState, mask: np.ndarray) -> tuple[QuantumState, float]:
    """Unnormalised ``Q rho Q`` for a diagonal 0/1 projector, plus ``Tr Q rho``."""
    if state.kind == "factor":
        f = np.where(mask[:, None], state.factor, 0)
        mass = float(np.vdot(f, f).real)
        return QuantumState(state.layout, factor=f, check=False), mass
    if state.kind == "dense":
        mat = state.matrix * np.outer(mask, mask)
        return QuantumState(state.layout, mat, check=False), float(np.real(np.trace(mat)))
    q = sp.diags(mask.astype(float), format="csr")
    mat = sp.csr_matrix(q @ state.to_sparse() @ q)
    return QuantumState(state.layout, mat, check=False), float(np.real(mat.diagonal().sum()))


def _scale(state: QuantumState, c: float) -> QuantumState:
    if state.kind == "factor":
        return QuantumState(state.layout, factor=state.factor * np.sqrt(c), check=False)
    data = state.matrix if state.kind == "dense" else state.to_sparse()
    return QuantumState(state.layout, data * c, check=False)


def truncate_state(rho: QuantumState, spec: TruncationSpec, hamiltonians=None,
                   floor: float = MASS_FLOOR) -> tuple[QuantumState, float]:
    """Project onto the low-energy subspace and renormalise.

    The computational basis of every constrained factor is taken to be the
    eigenbasis of its Hamiltonian, sorted by increasing energy.  Returns the
    truncated state ``Q rho Q / Tr Q rho`` and the retained mass ``Tr Q rho``.
    """
    if hamiltonians is not None:
        for k, h in enumerate(hamiltonians[: len(spec.cutoffs)]):
            ev = np.asarray(getattr(h, "eigenvalues", h))
            if len(ev) < rho.layout.dims[k]:
                raise DimensionError(f"spectrum for factor {k} shorter than its dimension")
            if np.any(np.diff(ev[: rho.layout.dims[k]]) < 0):
                raise ValueError("spectra must be sorted ascending")
    projected, mass = project(rho, spec.mask(rho.layout))
    if mass < floor:
        raise TruncationError(f"retained mass {mass:.3e} below floor {floor:.1e}")
    return _scale(projected, 1.0 / mass), mass


def marginal_diagonal(state: QuantumState, k: int) -> np.ndarray:
    """Diagonal of the single-factor marginal ``rho_k`` in the computational basis."""
    dims = state.layout.dims
    diag = state.diagonal().reshape(dims)
    axes = tuple(i for i in range(len(dims)) if i != k)
    return diag.sum(axis=axes) if axes else diag


def local_energies(state: QuantumState, hamiltonians) -> list[float]:
    """``Tr H_k rho_k`` for the leading factors, one per supplied spectrum."""
    out = []
    for k, h in enumerate(hamiltonians):
        ev = np.asarray(getattr(h, "eigenvalues", h), dtype=float)
        diag = marginal_diagonal(state, k)
        out.append(float(np.dot(ev[: len(diag)], diag)))
    return out


def marginal_tail_mass(state: QuantumState, k: int, d: int) -> float:
    """``Tr (I - P_d) rho_k`` for factor ``k``."""
    return float(np.sum(marginal_diagonal(state, k)[d:]))
