"""Dense linear algebra over ordered tensor products of labeled Hilbert spaces.

Every operator in this package is a square complex matrix together with an
ordered list of labeled factors.  The first listed factor varies slowest in
the row/column index, so ``tensor(a, b)`` is the plain Kronecker product with
concatenated labels.  Cross-module equality always goes through the canonical
(ascending-id) ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_SUPPORT_TOL = 1e-9

ROLES = ("input", "output", "ancilla", "classical")


class NotPSDError(ValueError):
    """Raised when an operator required to be PSD has a negative eigenvalue."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SpaceMismatchError(ValueError):
    """Raised when operators disagree on space ids or dimensions."""


@dataclass(frozen=True)
class SpaceLabel:
    """A labeled Hilbert-space factor: unique id, dimension, and role."""

    id: int
    dim: int
    role: str = "input"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"space {self.id}: dim must be >= 1, got {self.dim}")
        if self.role not in ROLES:
            raise ValueError(f"space {self.id}: unknown role {self.role!r}")


def role_for_parity(space_id: int) -> str:
    """Default wiring convention: even ids are inputs, odd ids are outputs."""
    return "input" if space_id % 2 == 0 else "output"


@dataclass(frozen=True)
class LabeledOperator:
    """Complex square matrix on an ordered product of labeled spaces.

    Hermiticity and positivity are properties checked by predicates, not
    invariants of the type.  Instances are immutable; the matrix is stored
    read-only.
    """

    spaces: tuple[SpaceLabel, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        spaces = tuple(self.spaces)
        object.__setattr__(self, "spaces", spaces)
        ids = [s.id for s in spaces]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate space ids {ids}")
        mat = np.array(self.matrix, dtype=np.complex128)
        d = int(np.prod([s.dim for s in spaces], dtype=np.int64)) if spaces else 1
        if mat.shape != (d, d):
            raise ValueError(
                f"matrix shape {mat.shape} does not match product dimension {d}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.spaces)

    @property
    def space_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.spaces)

    def space(self, space_id: int) -> SpaceLabel:
        for s in self.spaces:
            if s.id == space_id:
                return s
        raise KeyError(f"no space with id {space_id}")

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def relabel(self, mapping: dict[int, int]) -> "LabeledOperator":
        """Rename space ids (matrix untouched); mapping must stay injective."""
        new = tuple(
            SpaceLabel(mapping.get(s.id, s.id), s.dim, s.role) for s in self.spaces
        )
        return LabeledOperator(new, self.matrix)

    def with_roles(self, mapping: dict[int, str]) -> "LabeledOperator":
        new = tuple(
            SpaceLabel(s.id, s.dim, mapping.get(s.id, s.role)) for s in self.spaces
        )
        return LabeledOperator(new, self.matrix)


def _as_tensor(a: LabeledOperator) -> np.ndarray:
    """Reshape the matrix to one axis per factor: row axes first, then columns."""
    dims = a.dims
    return a.matrix.reshape(dims + dims)


def _from_tensor(spaces: Sequence[SpaceLabel], tensor: np.ndarray) -> LabeledOperator:
    d = int(np.prod([s.dim for s in spaces], dtype=np.int64)) if spaces else 1
    return LabeledOperator(tuple(spaces), tensor.reshape(d, d))


def identity(spaces: Sequence[SpaceLabel]) -> LabeledOperator:
    d = int(np.prod([s.dim for s in spaces], dtype=np.int64)) if spaces else 1
    return LabeledOperator(tuple(spaces), np.eye(d, dtype=np.complex128))


def max_entangled_vector(dim: int) -> np.ndarray:
    """Unnormalized |I>> = sum_i |i>|i> on a dim*dim product."""
    v = np.zeros(dim * dim, dtype=np.complex128)
    v[:: dim + 1] = 1.0
    return v


def max_entangled(first: SpaceLabel, second: SpaceLabel) -> LabeledOperator:
    """Unnormalized |I>><<I| on two equal-dimension factors."""
    if first.dim != second.dim:
        raise SpaceMismatchError(
            f"maximally entangled pair needs equal dims, got {first.dim}, {second.dim}"
        )
    v = max_entangled_vector(first.dim)
    return LabeledOperator((first, second), np.outer(v, v.conj()))


def tensor(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Kronecker product with concatenated space lists.

    Space ids must be disjoint; the result lists ``a``'s factors first, so
    they vary slowest, matching ``np.kron``.
    """
    overlap = set(a.space_ids) & set(b.space_ids)
    if overlap:
        raise SpaceMismatchError(f"overlapping space ids {sorted(overlap)}")
    return LabeledOperator(a.spaces + b.spaces, np.kron(a.matrix, b.matrix))


def permute_spaces(a: LabeledOperator, order: Sequence[int]) -> LabeledOperator:
    """Reorder the stored factor list; a similarity by a permutation matrix."""
    if sorted(order) != sorted(a.space_ids):
        raise SpaceMismatchError(
            f"order {list(order)} is not a permutation of {list(a.space_ids)}"
        )
    if tuple(order) == a.space_ids:
        return a
    pos = {s.id: i for i, s in enumerate(a.spaces)}
    perm = [pos[i] for i in order]
    n = len(a.spaces)
    t = _as_tensor(a).transpose(perm + [p + n for p in perm])
    new_spaces = tuple(a.spaces[p] for p in perm)
    return _from_tensor(new_spaces, np.ascontiguousarray(t))


def canonical(a: LabeledOperator) -> LabeledOperator:
    """Permute factors to ascending id order."""
    return permute_spaces(a, sorted(a.space_ids))


def ops_allclose(a: LabeledOperator, b: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    """Equality up to reordering: relative Frobenius distance in canonical order."""
    if set(a.space_ids) != set(b.space_ids):
        return False
    ca, cb = canonical(a), canonical(b)
    if ca.dims != cb.dims:
        return False
    scale = max(1.0, float(np.linalg.norm(ca.matrix)))
    return float(np.linalg.norm(ca.matrix - cb.matrix)) <= tol * scale


def _check_ids(a: LabeledOperator, ids: Iterable[int]) -> tuple[int, ...]:
    ids = tuple(ids)
    known = set(a.space_ids)
    for i in ids:
        if i not in known:
            raise SpaceMismatchError(f"unknown space id {i}; operator has {sorted(known)}")
    return ids


def partial_trace(a: LabeledOperator, traced_ids: Iterable[int]) -> LabeledOperator:
    """Trace out the listed factors; the total trace is preserved."""
    traced = set(_check_ids(a, traced_ids))
    if not traced:
        return a
    t = _as_tensor(a)
    n = len(a.spaces)
    keep: list[SpaceLabel] = []
    # Trace from the rightmost axis pair inward so earlier indices stay valid.
    offsets = [i for i, s in enumerate(a.spaces) if s.id in traced]
    for count, i in enumerate(offsets):
        j = i - count  # axes already removed shift the position
        t = np.trace(t, axis1=j, axis2=j + n - count)
    keep = [s for s in a.spaces if s.id not in traced]
    return _from_tensor(keep, t)


def partial_transpose(a: LabeledOperator, ids: Iterable[int]) -> LabeledOperator:
    """Transpose the listed factors in the fixed computational basis."""
    chosen = set(_check_ids(a, ids))
    if not chosen:
        return a
    n = len(a.spaces)
    axes = list(range(2 * n))
    for i, s in enumerate(a.spaces):
        if s.id in chosen:
            axes[i], axes[i + n] = axes[i + n], axes[i]
    t = _as_tensor(a).transpose(axes)
    return _from_tensor(a.spaces, np.ascontiguousarray(t))


def transpose(a: LabeledOperator) -> LabeledOperator:
    return LabeledOperator(a.spaces, a.matrix.T)


def adjoint(a: LabeledOperator) -> LabeledOperator:
    return LabeledOperator(a.spaces, a.matrix.conj().T)


def merge_spaces(
    a: LabeledOperator,
    ids: Sequence[int],
    new_id: int,
    role: str = "output",
) -> LabeledOperator:
    """Fuse the listed factors (in the given order) into one labeled space.

    The fused factor is placed where the group sits after moving its members
    to be adjacent at the end of the remaining factors.
    """
    ids = _check_ids(a, ids)
    if new_id in set(a.space_ids) - set(ids):
        raise ValueError(f"new id {new_id} collides with a remaining space")
    rest = [s.id for s in a.spaces if s.id not in set(ids)]
    p = permute_spaces(a, rest + list(ids))
    merged_dim = int(np.prod([a.space(i).dim for i in ids], dtype=np.int64))
    new_spaces = tuple(
        [s for s in p.spaces if s.id in set(rest)] + [SpaceLabel(new_id, merged_dim, role)]
    )
    return LabeledOperator(new_spaces, p.matrix)


def split_space(
    a: LabeledOperator,
    target_id: int,
    parts: Sequence[SpaceLabel],
) -> LabeledOperator:
    """Inverse of :func:`merge_spaces`: reinterpret one factor as a product.

    The target factor is moved to the end of the list and relabeled as the
    given parts (first part slowest), so the part dimensions must multiply to
    the target dimension.
    """
    target = a.space(target_id)
    prod = int(np.prod([s.dim for s in parts], dtype=np.int64))
    if prod != target.dim:
        raise ValueError(f"parts multiply to {prod}, target dim is {target.dim}")
    rest = [s.id for s in a.spaces if s.id != target_id]
    clash = {s.id for s in parts} & set(rest)
    if clash:
        raise ValueError(f"part ids {sorted(clash)} collide with existing spaces")
    p = permute_spaces(a, rest + [target_id])
    new_spaces = tuple(list(p.spaces[:-1]) + list(parts))
    return LabeledOperator(new_spaces, p.matrix)


def is_hermitian(a: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    m = a.matrix
    scale = max(1.0, float(np.linalg.norm(m)))
    return float(np.linalg.norm(m - m.conj().T)) <= tol * scale


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _eigh_checked(a: LabeledOperator, what: str, tol: float) -> tuple[np.ndarray, np.ndarray]:
    if not is_hermitian(a, max(tol, DEFAULT_TOL)):
        raise ValueError(f"{what}: operator is not Hermitian within tolerance")
    return np.linalg.eigh(hermitian_part(a.matrix))


def min_eigenvalue(a: LabeledOperator) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(a.matrix))[0])


def is_psd(a: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    return is_hermitian(a, tol) and min_eigenvalue(a) >= -tol


def psd_sqrt(a: LabeledOperator, tol: float = DEFAULT_TOL) -> LabeledOperator:
    """Principal square root of a PSD operator.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything below ``-tol``
    raises :class:`NotPSDError`.
    """
    vals, vecs = _eigh_checked(a, "psd_sqrt", tol)
    if vals[0] < -tol:
        raise NotPSDError(
            f"psd_sqrt: eigenvalue {vals[0]:.3e} below -tol={-tol:.1e}", float(vals[0])
        )
    root = np.sqrt(np.clip(vals, 0.0, None))
    return LabeledOperator(a.spaces, (vecs * root) @ vecs.conj().T)


def pinv_sqrt(a: LabeledOperator, support_tol: float = DEFAULT_SUPPORT_TOL) -> LabeledOperator:
    """Inverse square root on the support of a PSD operator.

    Eigenvalues at or below ``support_tol * lambda_max`` are treated as
    kernel.  Satisfies ``pinv_sqrt(a) a pinv_sqrt(a) = support projector``.
    """
    vals, vecs = _eigh_checked(a, "pinv_sqrt", support_tol)
    lmax = float(vals[-1]) if len(vals) else 0.0
    cut = support_tol * max(lmax, 0.0)
    if vals[0] < -max(cut, support_tol):
        raise NotPSDError(
            f"pinv_sqrt: eigenvalue {vals[0]:.3e} below tolerance", float(vals[0])
        )
    inv = np.where(vals > cut, 1.0 / np.sqrt(np.clip(vals, cut, None)), 0.0)
    return LabeledOperator(a.spaces, (vecs * inv) @ vecs.conj().T)


def trace_norm(a: LabeledOperator) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(a.matrix, compute_uv=False).sum())


@dataclass(frozen=True)
class SupportDecomposition:
    """Support basis of a Hermitian operator with compression and embedding.

    ``isometry`` has orthonormal columns spanning the support;
    ``compressed = isometry^dag A isometry`` and
    ``isometry @ compressed @ isometry^dag`` reproduces ``A`` on its support.
    """

    projector: LabeledOperator
    compressed: np.ndarray
    isometry: np.ndarray
    eigenvalues: np.ndarray

    @property
    def rank(self) -> int:
        return self.isometry.shape[1]

    def embed(self, small: np.ndarray) -> np.ndarray:
        return self.isometry @ small @ self.isometry.conj().T

    def compress(self, full: np.ndarray) -> np.ndarray:
        return self.isometry.conj().T @ full @ self.isometry


def compress_to_support(
    a: LabeledOperator, support_tol: float = DEFAULT_SUPPORT_TOL
) -> SupportDecomposition:
    """Orthonormal support basis, compressed operator, and embedding isometry."""
    vals, vecs = _eigh_checked(a, "compress_to_support", support_tol)
    lmax = float(np.max(np.abs(vals))) if len(vals) else 0.0
    keep = np.abs(vals) > support_tol * lmax
    v = vecs[:, keep]
    lam = vals[keep]
    proj = LabeledOperator(a.spaces, v @ v.conj().T)
    compressed = np.diag(lam).astype(np.complex128)
    return SupportDecomposition(proj, compressed, v, lam)


def apply_kraus(
    state: LabeledOperator,
    kraus: Sequence[np.ndarray],
    in_ids: Sequence[int],
    out_spaces: Sequence[SpaceLabel],
) -> LabeledOperator:
    """Apply a quantum operation on a subset of factors.

    Each Kraus operator maps the product of ``in_ids`` factors (in the given
    order) to the product of ``out_spaces``; untouched factors ride along.
    """
    in_ids = list(_check_ids(state, in_ids))
    rest = [s.id for s in state.spaces if s.id not in set(in_ids)]
    p = permute_spaces(state, in_ids + rest)
    d_in = int(np.prod([state.space(i).dim for i in in_ids], dtype=np.int64))
    d_out = int(np.prod([s.dim for s in out_spaces], dtype=np.int64))
    d_rest = p.dim // d_in
    out = np.zeros((d_out * d_rest, d_out * d_rest), dtype=np.complex128)
    for k in kraus:
        k = np.asarray(k, dtype=np.complex128)
        if k.shape != (d_out, d_in):
            raise ValueError(f"Kraus shape {k.shape}, expected {(d_out, d_in)}")
        big = np.kron(k, np.eye(d_rest))
        out += big @ p.matrix @ big.conj().T
    new_spaces = tuple(out_spaces) + tuple(s for s in p.spaces if s.id in set(rest))
    overlap = {s.id for s in out_spaces} & set(rest)
    if overlap:
        raise SpaceMismatchError(f"output ids {sorted(overlap)} collide with bystanders")
    return LabeledOperator(new_spaces, out)
