"""Sequential-network Choi operators: construction, validation, composition.

A comb with N teeth lives on labeled spaces ``0 .. 2N-1``; even labels are
the tooth inputs and odd labels the tooth outputs.  Deterministic combs obey
the recursive trace-normalization chain; probabilistic ones are PSD operators
dominated by a deterministic comb.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_TOL,
    LabeledOperator,
    NotPSDError,
    SpaceLabel,
    SpaceMismatchError,
    apply_kraus,
    canonical,
    identity,
    is_psd,
    max_entangled,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    permute_spaces,
    psd_sqrt,
    role_for_parity,
    tensor,
)
from .solvers import ChainProjector, dykstra, hermitize, psd_project

KINDS = ("deterministic", "probabilistic", "unvalidated")


@dataclass(frozen=True)
class Comb:
    """A network Choi operator with its tooth count and validation status."""

    op: LabeledOperator
    teeth: int
    kind: str = "unvalidated"
    label_map: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown comb kind {self.kind!r}")
        ids = sorted(self.op.space_ids)
        if ids != list(range(2 * self.teeth)):
            raise ValueError(
                f"comb with {self.teeth} teeth needs contiguous ids 0..{2*self.teeth-1}, got {ids}"
            )

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(canonical(self.op).dims)

    def even_ids(self) -> list[int]:
        return list(range(0, 2 * self.teeth, 2))

    def odd_ids(self) -> list[int]:
        return list(range(1, 2 * self.teeth, 2))


def as_comb(op: LabeledOperator, kind: str = "unvalidated") -> Comb:
    """Wrap an operator as a comb, renumbering labels to contiguous 0..2N-1.

    User labels are mapped in ascending order; the original ids are kept in
    ``label_map`` as (original, internal) pairs.
    """
    ids = sorted(op.space_ids)
    if len(ids) % 2 != 0:
        raise ValueError(f"a comb needs an even number of spaces, got {len(ids)}")
    mapping = {orig: i for i, orig in enumerate(ids)}
    renamed = op.relabel(mapping)
    renamed = renamed.with_roles({i: role_for_parity(i) for i in range(len(ids))})
    return Comb(canonical(renamed), len(ids) // 2, kind, tuple(sorted(mapping.items())))


@dataclass(frozen=True)
class NetworkChannel:
    """One step of a memory network: (memory_in ⊗ wire_in) -> (wire_out ⊗ memory_out).

    Kraus matrices have shape ``(out_dim * mem_out, mem_in * in_dim)`` with the
    wire index slowest on the output side and the memory index slowest on the
    input side.
    """

    kraus: tuple[np.ndarray, ...]
    in_dim: int
    out_dim: int
    mem_in: int = 1
    mem_out: int = 1

    def __post_init__(self):
        mats = tuple(np.array(k, dtype=np.complex128) for k in self.kraus)
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "kraus", mats)
        shape = (self.out_dim * self.mem_out, self.mem_in * self.in_dim)
        for m in mats:
            if m.shape != shape:
                raise ValueError(f"Kraus shape {m.shape}, expected {shape}")

    def completeness_defect(self) -> float:
        """max eigenvalue distance of sum K^dag K from the identity."""
        s = sum(k.conj().T @ k for k in self.kraus)
        gap = s - np.eye(s.shape[0])
        return float(np.max(np.abs(np.linalg.eigvalsh(hermitize(gap)))))

    def is_trace_preserving(self, tol: float = DEFAULT_TOL) -> bool:
        return self.completeness_defect() <= tol

    def is_subnormalized(self, tol: float = DEFAULT_TOL) -> bool:
        s = sum(k.conj().T @ k for k in self.kraus)
        gap = s - np.eye(s.shape[0])
        return float(np.max(np.linalg.eigvalsh(hermitize(gap)))) <= tol


@dataclass(frozen=True)
class ChannelNetwork:
    """An ordered row of channels linked by memory wires."""

    channels: tuple[NetworkChannel, ...]

    def __post_init__(self):
        chans = tuple(self.channels)
        object.__setattr__(self, "channels", chans)
        if not chans:
            raise ValueError("network needs at least one channel")
        if chans[0].mem_in != 1 or chans[-1].mem_out != 1:
            raise ValueError("first memory-in and last memory-out must be 1-dimensional")
        for j in range(len(chans) - 1):
            if chans[j].mem_out != chans[j + 1].mem_in:
                raise ValueError(
                    f"memory mismatch between channels {j} and {j+1}: "
                    f"{chans[j].mem_out} vs {chans[j+1].mem_in}"
                )

    @property
    def teeth(self) -> int:
        return len(self.channels)

    def wire_dims(self) -> list[int]:
        dims = []
        for c in self.channels:
            dims.extend([c.in_dim, c.out_dim])
        return dims

    def check_normalization(self, tol: float = DEFAULT_TOL, allow_subnormalized: bool = False):
        for j, c in enumerate(self.channels):
            if c.is_trace_preserving(tol):
                continue
            if allow_subnormalized and c.is_subnormalized(tol):
                continue
            raise ValueError(
                f"channel {j} violates Kraus normalization by {c.completeness_defect():.3e}"
            )


_MEM_ID = -1
_FEED_BASE = -1000


def comb_from_network(
    net: ChannelNetwork,
    tol: float = DEFAULT_TOL,
    allow_subnormalized: bool = False,
) -> Comb:
    """Choi operator of a memory network, built by feeding entangled pairs.

    For each tooth an unnormalized maximally entangled pair is created, one
    half is pushed through the channel row (together with the memory wire)
    and the kept half becomes the tooth's input space.
    """
    net.check_normalization(tol, allow_subnormalized)
    all_tp = all(c.is_trace_preserving(tol) for c in net.channels)

    mem = SpaceLabel(_MEM_ID, 1, "ancilla")
    state = identity([mem])
    for j, chan in enumerate(net.channels):
        feed = SpaceLabel(_FEED_BASE - j, chan.in_dim, "input")
        keep = SpaceLabel(2 * j, chan.in_dim, "input")
        state = tensor(state, max_entangled(feed, keep))
        out_wire = SpaceLabel(2 * j + 1, chan.out_dim, "output")
        new_mem = SpaceLabel(_MEM_ID, chan.mem_out, "ancilla")
        state = apply_kraus(state, chan.kraus, [_MEM_ID, feed.id], [out_wire, new_mem])
    state = partial_trace(state, [_MEM_ID])
    comb = as_comb(canonical(state))
    if all_tp:
        report = validate_deterministic(comb, tol=max(tol, 1e-7))
        kind = "deterministic" if report.passed else "unvalidated"
    else:
        kind = "probabilistic"
    return Comb(comb.op, comb.teeth, kind, comb.label_map)


def choi_of_channel(
    kraus,
    in_spaces,
    out_spaces,
) -> LabeledOperator:
    """Choi operator of a quantum operation, output factors listed first.

    ``kraus`` matrices map the ordered product of ``in_spaces`` to the ordered
    product of ``out_spaces``; the result is sum_k |K_k>><<K_k| on
    (outputs..., inputs...).
    """
    ins = tuple(in_spaces)
    outs = tuple(out_spaces)
    d_in = int(np.prod([s.dim for s in ins], dtype=np.int64)) if ins else 1
    d_out = int(np.prod([s.dim for s in outs], dtype=np.int64)) if outs else 1
    mat = np.zeros((d_out * d_in, d_out * d_in), dtype=np.complex128)
    for k in kraus:
        k = np.asarray(k, dtype=np.complex128)
        if k.shape != (d_out, d_in):
            raise ValueError(f"Kraus shape {k.shape}, expected {(d_out, d_in)}")
        v = k.reshape(-1)
        mat += np.outer(v, v.conj())
    return LabeledOperator(outs + ins, mat)


def link_product(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Contraction of Choi operators over their shared labels.

    Computes ``Tr_shared[(a ⊗ I_b-only) (I_a-only ⊗ b^T_shared)]``, the
    composition rule that interconnects networks; with no shared labels it
    degenerates to the tensor product.
    """
    shared = sorted(set(a.space_ids) & set(b.space_ids))
    for sid in shared:
        da, db = a.space(sid).dim, b.space(sid).dim
        if da != db:
            raise SpaceMismatchError(f"shared space {sid} has dims {da} vs {db}")
    a_only = [s for s in a.spaces if s.id not in set(b.space_ids)]
    b_only = [s for s in b.spaces if s.id not in set(a.space_ids)]
    if not shared:
        return tensor(a, b)
    a_full = a if not b_only else tensor(a, identity(b_only))
    bt = partial_transpose(b, shared)
    b_full = bt if not a_only else tensor(bt, identity(a_only))
    order = sorted(a_full.space_ids)
    am = permute_spaces(a_full, order)
    bm = permute_spaces(b_full, order)
    prod = LabeledOperator(am.spaces, am.matrix @ bm.matrix)
    return partial_trace(prod, shared)


@dataclass(frozen=True)
class ChainReport:
    """Outcome of checking the recursive trace-normalization chain."""

    passed: bool
    residuals: tuple[float, ...]  # tooth N down to 1
    scalar: float  # the fully reduced 0-tooth value, 1.0 when normalized
    tol: float
    extracted: tuple[LabeledOperator, ...] = field(repr=False, default=())

    @property
    def max_residual(self) -> float:
        terms = self.residuals + (abs(self.scalar - 1.0),)
        return max(terms)


def chain_report(op: LabeledOperator, tol: float = DEFAULT_TOL) -> ChainReport:
    """Walk the normalization chain of a candidate comb, recording residuals.

    At each tooth the next reduced operator is extracted as the partial trace
    over the tooth's two labels divided by the input dimension; this is exact
    whenever the chain condition holds, and the Frobenius gap to the required
    identity-tensor form measures the violation.
    """
    comb = as_comb(op) if sorted(op.space_ids) != list(range(len(op.spaces))) else None
    cur = canonical(comb.op if comb else op)
    n = len(cur.spaces) // 2
    residuals = []
    extracted = []
    for k in range(n, 0, -1):
        traced = partial_trace(cur, [2 * k - 1])
        d_in = cur.space(2 * k - 2).dim
        reduced = partial_trace(traced, [2 * k - 2])
        reduced = LabeledOperator(reduced.spaces, reduced.matrix / d_in)
        rebuilt = canonical(tensor(reduced, identity([cur.space(2 * k - 2)])))
        residuals.append(float(np.linalg.norm(canonical(traced).matrix - rebuilt.matrix)))
        extracted.append(reduced)
        cur = reduced
    scalar = float(np.real(cur.matrix[0, 0]))
    passed = all(r <= tol for r in residuals) and abs(scalar - 1.0) <= tol
    return ChainReport(passed, tuple(residuals), scalar, tol, tuple(extracted))


def validate_deterministic(c: Comb, tol: float = DEFAULT_TOL) -> ChainReport:
    """Check PSD-ness and the full normalization chain of a comb."""
    if not is_psd(c.op, tol):
        raise NotPSDError(
            f"comb operator is not PSD: min eigenvalue {min_eigenvalue(c.op):.3e}",
            min_eigenvalue(c.op),
        )
    return chain_report(c.op, tol)


@dataclass(frozen=True)
class ProbcombResult:
    feasible: bool
    witness: Comb | None
    residual: float

    def __bool__(self) -> bool:
        return self.feasible


def validate_probabilistic(
    c: Comb,
    tol: float = DEFAULT_TOL,
    feasibility_residual: float = 1e-6,
    max_iters: int = 500,
) -> ProbcombResult:
    """Decide whether some deterministic comb dominates ``c``.

    One tooth has a closed form (the traced-out operator must be dominated by
    the identity).  For more teeth a dominating comb is searched by Dykstra
    alternating projections between the shifted PSD cone ``{S >= R}`` and the
    affine normalization chain; the certificate is returned on success.
    """
    if not is_psd(c.op, tol):
        raise NotPSDError(
            f"comb operator is not PSD: min eigenvalue {min_eigenvalue(c.op):.3e}",
            min_eigenvalue(c.op),
        )
    r = canonical(c.op)
    if c.teeth == 1:
        traced = canonical(partial_trace(r, [1]))
        gap = np.eye(traced.dim) - traced.matrix
        lo = float(np.min(np.linalg.eigvalsh(hermitize(gap))))
        if lo < -tol:
            return ProbcombResult(False, None, -lo)
        d1 = r.space(1).dim
        filler = LabeledOperator(traced.spaces, psd_project(gap) / d1)
        witness_op = LabeledOperator(
            r.spaces, r.matrix + canonical(tensor(filler, identity([r.space(1)]))).matrix
        )
        return ProbcombResult(True, Comb(witness_op, 1, "deterministic"), max(0.0, -lo))

    projector = ChainProjector(list(r.dims))
    rm = r.matrix

    def shifted_psd(x: np.ndarray) -> np.ndarray:
        return rm + psd_project(x - rm)

    start = projector.project(rm)
    s, _ = dykstra(start, [shifted_psd, projector.project], max_iters=max_iters)
    chain_res = max(projector.residuals(s))
    dom_res = max(0.0, -float(np.min(np.linalg.eigvalsh(hermitize(s - rm)))))
    residual = max(chain_res, dom_res)
    if residual > feasibility_residual:
        return ProbcombResult(False, None, residual)
    witness = Comb(LabeledOperator(r.spaces, psd_project(s)), c.teeth, "deterministic")
    return ProbcombResult(True, witness, residual)


@dataclass(frozen=True)
class Isometry:
    """An isometry from the joint input spaces to outputs plus a minimal ancilla."""

    matrix: np.ndarray
    in_spaces: tuple[SpaceLabel, ...]
    out_spaces: tuple[SpaceLabel, ...]  # odd wires ascending, then the ancilla

    @property
    def ancilla(self) -> SpaceLabel:
        return self.out_spaces[-1]

    def isometry_defect(self) -> float:
        g = self.matrix.conj().T @ self.matrix
        return float(np.linalg.norm(g - np.eye(g.shape[0])))

    def apply(self, rho: LabeledOperator) -> LabeledOperator:
        """Channel action: conjugate by the isometry and trace out the ancilla."""
        want = [s.id for s in self.in_spaces]
        if sorted(rho.space_ids) != sorted(want):
            raise SpaceMismatchError(
                f"state spaces {sorted(rho.space_ids)} do not match comb inputs {sorted(want)}"
            )
        rm = permute_spaces(rho, want)
        out = LabeledOperator(self.out_spaces, self.matrix @ rm.matrix @ self.matrix.conj().T)
        return partial_trace(out, [self.ancilla.id])


def stinespring(c: Comb, support_tol: float = 1e-12) -> Isometry:
    """Minimal isometric dilation of a deterministic comb's overall channel.

    The isometry sends the joint input spaces to the joint outputs tensored
    with an ancilla carrying the support of the transposed comb; conjugation
    followed by an ancilla trace reproduces the network's action.
    """
    if c.kind != "deterministic":
        report = chain_report(c.op, tol=1e-7)
        if not report.passed:
            raise ValueError(
                f"stinespring needs a deterministic comb (max residual {report.max_residual:.3e})"
            )
    odd = [s for s in canonical(c.op).spaces if s.id % 2 == 1]
    even = [s for s in canonical(c.op).spaces if s.id % 2 == 0]
    om = permute_spaces(c.op, [s.id for s in odd] + [s.id for s in even])
    d_odd = int(np.prod([s.dim for s in odd], dtype=np.int64))
    d_even = int(np.prod([s.dim for s in even], dtype=np.int64))
    big = d_odd * d_even

    transposed = LabeledOperator(om.spaces, om.matrix.T)
    vals, vecs = np.linalg.eigh(hermitize(transposed.matrix))
    lmax = max(float(vals[-1]), 0.0)
    keep = vals > max(support_tol * lmax, 0.0)
    root = np.sqrt(np.clip(vals, 0.0, None))
    q = (vecs * root) @ vecs.conj().T
    w = vecs[:, keep]
    rank = int(w.shape[1])

    # V[(odd, alpha), even] = Q[alpha, (odd, even)], then compress alpha.
    v_full = q.reshape(big, d_odd, d_even).transpose(1, 0, 2)
    v_comp = np.einsum("aj,oae->oje", w.conj(), v_full).reshape(d_odd * rank, d_even)
    ancilla = SpaceLabel(2 * c.teeth, rank, "ancilla")
    return Isometry(v_comp, tuple(even), tuple(odd) + (ancilla,))


def apply_comb(c: Comb, rho: LabeledOperator) -> LabeledOperator:
    """Feed a joint input state through the comb's overall channel."""
    return link_product(c.op, rho)


def comb_trace_target(c: Comb) -> float:
    """Trace forced on deterministic combs: the product of input dimensions."""
    return float(np.prod([c.op.space(i).dim for i in c.even_ids()], dtype=np.int64))


def uniform_deterministic(dims) -> Comb:
    """The fully depolarizing network comb on the given space dimensions."""
    dims = [int(d) for d in dims]
    projector = ChainProjector(dims)
    spaces = tuple(
        SpaceLabel(i, d, role_for_parity(i)) for i, d in enumerate(dims)
    )
    return Comb(LabeledOperator(spaces, projector.uniform()), len(dims) // 2, "deterministic")
