"""Operator-algebra substrate for the engine simulations.

Complex matrices, tensor-product bookkeeping, partial traces, spectral
functions, and the entropy / free-energy primitives used by every other
module.

Conventions fixed here and relied on throughout the package:

* natural logarithms everywhere, so entropies are in nats;
* Boltzmann's constant enters only through ``ThermoContext`` (default 1);
* subsystem factors are ordered (W, S, D, R) left to right in every tensor
  product, and single-factor operators are padded with identities;
* spectral quantities come from Hermitian eigendecompositions, and
  non-Hermitian input is rejected rather than symmetrised so that
  construction bugs surface early.

All values are immutable after construction and all operations are pure
functions, so concurrent use from scenario sweeps is safe.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "EPS_ALG",
    "EPS_EIG",
    "MAX_DIM",
    "SzilardError",
    "SizeError",
    "ConstructionError",
    "ErasureError",
    "HardAssertionError",
    "Operator",
    "DensityMatrix",
    "PureState",
    "Factor",
    "SubsystemLayout",
    "dagger",
    "operator_norm",
    "commutator_norm",
    "tensor_product",
    "partial_trace",
    "von_neumann_entropy",
    "relative_entropy",
    "thermal_state",
    "projector_onto",
    "basis_state",
]

# Algebraic tolerance for predicates, in operator (largest singular value)
# norm, and the eigenvalue cutoff below which populations are treated as
# exactly zero.  Chosen for double-precision eigendecompositions of
# dimensions up to MAX_DIM.
EPS_ALG = 1e-10
EPS_EIG = 1e-12
MAX_DIM = 4096


class SzilardError(Exception):
    """Base class for package-specific failures."""


class SizeError(SzilardError):
    """A construction would exceed the configured dimension limit."""


class ConstructionError(SzilardError):
    """Input data admits no object satisfying the requested constraints."""


class ErasureError(SzilardError):
    """An explicit erasure interaction failed to reset the memory."""


class HardAssertionError(SzilardError):
    """An internally guaranteed consistency condition was violated.

    This signals an implementation bug (or a deliberately tampered input),
    never a legitimate physical regime.
    """


# ---------------------------------------------------------------------------
# array helpers


def _as_complex_matrix(entries: object, name: str = "entries") -> np.ndarray:
    m = np.array(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValueError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError(f"{name} contains non-finite values")
    return m


def _as_complex_vector(amplitudes: object, name: str = "amplitudes") -> np.ndarray:
    v = np.array(amplitudes, dtype=complex)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError(f"{name} must be a 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v.view(float))):
        raise ValueError(f"{name} contains non-finite values")
    return v


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def operator_norm(a: object) -> float:
    """Largest singular value.

    The Frobenius norm dominates the spectral norm, so a tiny Frobenius norm
    certifies the result directly; that shortcut keeps pass / fail decisions
    on near-zero residuals cheap at large dimensions.  Large matrices that do
    not pass the shortcut are estimated by power iteration on ``A^dag A``,
    which is accurate to the requested relative tolerance for the magnitudes
    the checks care about.
    """
    m = np.asarray(a, dtype=complex)
    if m.size == 0:
        return 0.0
    f = float(np.linalg.norm(m))
    if f <= EPS_ALG:
        return f
    n = max(m.shape)
    if n <= 1024:
        return float(np.linalg.norm(m, 2))
    # power iteration with a deterministic start vector
    v = np.ones(m.shape[1], dtype=complex)
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(300):
        w = dagger(m) @ (m @ v)
        s = float(np.linalg.norm(w))
        if s == 0.0:
            return 0.0
        v = w / s
        est = math.sqrt(s)
        if abs(est - last) <= 1e-9 * max(est, 1.0):
            return est
        last = est
    return last


def _is_diagonal(a: np.ndarray) -> bool:
    return np.count_nonzero(a - np.diag(np.diagonal(a))) == 0


def commutator_norm(a: object, b: object) -> float:
    """Operator norm of ``AB - BA``; values within EPS_ALG count as commuting."""
    ma = np.asarray(_entries_of(a), dtype=complex)
    mb = np.asarray(_entries_of(b), dtype=complex)
    if ma.shape != mb.shape:
        raise ValueError(
            f"commutator requires equal dimensions, got {ma.shape} and {mb.shape}"
        )
    # (AB - BA)[i, j] = A[i, j] (b_j - b_i) when B is diagonal; this avoids
    # two full matrix products for the common diagonal-Hamiltonian case
    if _is_diagonal(mb):
        d = np.diagonal(mb)
        c = ma * (d[None, :] - d[:, None])
    elif _is_diagonal(ma):
        d = np.diagonal(ma)
        c = mb * (d[:, None] - d[None, :])
    else:
        c = ma @ mb - mb @ ma
    return operator_norm(c)


def _entries_of(x: object) -> np.ndarray:
    """Accept wrapper types or bare arrays where a matrix is expected."""
    e = getattr(x, "entries", x)
    return np.asarray(e, dtype=complex)


# ---------------------------------------------------------------------------
# domain types


@dataclasses.dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix with tolerance-based structural predicates."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = _as_complex_matrix(self.entries)
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_hermitian(self) -> bool:
        return operator_norm(self.entries - dagger(self.entries)) <= EPS_ALG

    @property
    def is_unitary(self) -> bool:
        m = self.entries
        return operator_norm(dagger(m) @ m - np.eye(self.dim)) <= EPS_ALG

    @property
    def is_projector(self) -> bool:
        m = self.entries
        return (
            self.is_hermitian
            and operator_norm(m @ m - m) <= EPS_ALG
        )

    def rank_estimate(self) -> int:
        """Rank of a projector, via its trace."""
        return int(round(float(np.trace(self.entries).real)))


@dataclasses.dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive unit-trace Hermitian matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = _as_complex_matrix(self.entries)
        herm = operator_norm(m - dagger(m))
        if herm > EPS_ALG:
            raise ValueError(f"density matrix not Hermitian (deviation {herm:.3e})")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > EPS_ALG:
            raise ValueError(f"density matrix trace {tr} differs from 1")
        mn = float(np.linalg.eigvalsh((m + dagger(m)) / 2.0).min())
        if mn < -EPS_ALG:
            raise ValueError(f"density matrix has negative eigenvalue {mn:.3e}")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclasses.dataclass(frozen=True, eq=False)
class PureState:
    """Normalised state vector."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        v = _as_complex_vector(self.amplitudes)
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > EPS_ALG:
            raise ValueError(f"state norm {n} differs from 1")
        object.__setattr__(self, "amplitudes", _freeze(v))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()))


@dataclasses.dataclass(frozen=True, eq=False)
class Factor:
    """One tensor factor: a label, its dimension, and its Hamiltonian."""

    label: str
    dim: int
    hamiltonian: Operator

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("factor dimension must be positive")
        if self.hamiltonian.dim != self.dim:
            raise ValueError(
                f"factor {self.label!r}: Hamiltonian dimension "
                f"{self.hamiltonian.dim} != {self.dim}"
            )
        if not self.hamiltonian.is_hermitian:
            raise ValueError(f"factor {self.label!r}: Hamiltonian not Hermitian")


@dataclasses.dataclass(frozen=True, eq=False)
class SubsystemLayout:
    """Ordered list of tensor factors with their Hamiltonians."""

    factors: tuple[Factor, ...]

    def __post_init__(self) -> None:
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("layout needs at least one factor")
        labels = [f.label for f in factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")
        object.__setattr__(self, "factors", factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"no factor labelled {label!r} in {self.labels}") from None

    def embed(self, op: object, labels: Sequence[str]) -> np.ndarray:
        """Pad an operator on the named factors with identities elsewhere.

        ``op`` acts on the tensor product of the named factors taken in
        layout order; the result acts on the full space.
        """
        sel = sorted(self.index(l) for l in labels)
        if len(sel) != len(labels):
            raise ValueError("embed labels must be distinct")
        m = _entries_of(op)
        sel_dims = [self.dims[i] for i in sel]
        if m.shape[0] != int(np.prod(sel_dims)):
            raise ValueError(
                f"operator dimension {m.shape[0]} does not match factors {labels}"
            )
        rest = [i for i in range(len(self.factors)) if i not in sel]
        rest_dims = [self.dims[i] for i in rest]
        full = np.kron(m, np.eye(int(np.prod(rest_dims)), dtype=complex))
        # permute tensor axes from (sel..., rest...) back to layout order
        order = sel + rest
        n = len(self.factors)
        perm = [order.index(i) for i in range(n)]
        shaped = full.reshape([self.dims[i] for i in order] * 2)
        shaped = shaped.transpose(perm + [p + n for p in perm])
        return shaped.reshape(self.total_dim, self.total_dim)

    def total_hamiltonian(self) -> np.ndarray:
        h = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        for f in self.factors:
            h += self.embed(f.hamiltonian.entries, [f.label])
        return h


# ---------------------------------------------------------------------------
# operations


def tensor_product(a: Operator, b: Operator) -> Operator:
    """Kronecker product in layout order, guarded by the dimension limit."""
    if a.dim * b.dim > MAX_DIM:
        raise SizeError(
            f"tensor product dimension {a.dim * b.dim} exceeds limit {MAX_DIM}"
        )
    return Operator(np.kron(a.entries, b.entries))


def _ptrace_nd(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    keep = list(keep)
    t = rho.reshape(list(dims) * 2)
    # trace out the complement, highest axis first so positions stay valid
    for i in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = int(np.prod([dims[i] for i in keep]))
    return t.reshape(d, d)


def partial_trace(
    rho: DensityMatrix, layout: SubsystemLayout, keep: Iterable[str]
) -> DensityMatrix:
    """Trace out every factor not named in ``keep``."""
    keep_labels = list(keep)
    if not keep_labels:
        raise ValueError("keep set must not be empty")
    if len(set(keep_labels)) != len(keep_labels):
        raise ValueError("keep labels must be distinct")
    idx = sorted(layout.index(l) for l in keep_labels)
    m = _entries_of(rho)
    if m.shape[0] != layout.total_dim:
        raise ValueError(
            f"state dimension {m.shape[0]} does not match layout "
            f"dimension {layout.total_dim}"
        )
    return DensityMatrix(_ptrace_nd(m, layout.dims, idx))


def von_neumann_entropy(rho: object) -> float:
    """``-tr[rho ln rho]`` in nats; populations below EPS_EIG contribute 0."""
    m = _entries_of(rho)
    ev = np.linalg.eigvalsh(m)
    ev = ev[ev > EPS_EIG]
    if ev.size == 0:
        return 0.0
    return float(-(ev * np.log(ev)).sum())


def relative_entropy(rho: object, sigma: object) -> float:
    """``tr[rho ln rho] - tr[rho ln sigma]``; +inf on support violation."""
    a = _entries_of(rho)
    b = _entries_of(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    eb, vb = np.linalg.eigh(b)
    null = eb <= EPS_EIG
    if np.any(null):
        vn = vb[:, null]
        # population of rho inside the null space of sigma
        leak = float(np.einsum("ij,jk,ki->", dagger(vn), a, vn).real)
        if leak > EPS_EIG:
            return math.inf
    ea = np.linalg.eigvalsh(a)
    ea = ea[ea > EPS_EIG]
    s_rho = float((ea * np.log(ea)).sum()) if ea.size else 0.0
    sup = ~null
    vs = vb[:, sup]
    pops = np.einsum("ij,jk,ki->i", dagger(vs), a, vs).real
    s_cross = float((pops * np.log(eb[sup])).sum())
    return s_rho - s_cross


def thermal_state(h: object, beta: float) -> DensityMatrix:
    """Gibbs state ``exp(-beta H) / Z``; ``beta = 0`` is maximally mixed."""
    m = _entries_of(h)
    if operator_norm(m - dagger(m)) > EPS_ALG:
        raise ValueError("thermal_state requires a Hermitian Hamiltonian")
    if not (beta >= 0.0):
        raise ValueError(f"beta must be non-negative, got {beta}")
    ev, vec = np.linalg.eigh(m)
    w = np.exp(-beta * (ev - ev.min()))
    w /= w.sum()
    return DensityMatrix((vec * w) @ dagger(vec))


def projector_onto(vec: object) -> np.ndarray:
    v = np.asarray(getattr(vec, "amplitudes", vec), dtype=complex)
    return np.outer(v, v.conj())


def basis_state(dim: int, n: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise ValueError(f"basis index {n} out of range for dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v
