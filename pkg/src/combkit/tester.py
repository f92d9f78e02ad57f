"""Measuring networks: instruments, testers, dilation, and network distance.

An instrument is an outcome-indexed family of probabilistic combs whose total
is deterministic.  A tester is the measuring-network special case with
one-dimensional end spaces dropped: the apparatus that turns an unknown
network into classical outcomes through the generalized Born pairing
``p(B|R) = Tr[T_B^T R]`` (the transpose is the signature of interlinking and
is kept explicit everywhere).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .comb import (
    ChainReport,
    ChannelNetwork,
    Comb,
    NetworkChannel,
    chain_report,
    comb_from_network,
    link_product,
)
from .core import (
    DEFAULT_TOL,
    LabeledOperator,
    NotPSDError,
    SpaceLabel,
    SpaceMismatchError,
    canonical,
    is_psd,
    merge_spaces,
    min_eigenvalue,
    partial_trace,
    split_space,
)
from .solvers import (
    ChainProjector,
    dykstra,
    frob_inner,
    hermitize,
    maximize_linear,
    psd_project,
)


@dataclass(frozen=True)
class POVM:
    """Outcome-indexed PSD matrices on one labeled space, summing to identity."""

    space: SpaceLabel
    outcomes: tuple
    elements: Mapping

    def __post_init__(self):
        elems = {}
        for b in self.outcomes:
            m = np.array(self.elements[b], dtype=np.complex128)
            if m.shape != (self.space.dim, self.space.dim):
                raise ValueError(f"element {b!r} has shape {m.shape}, space dim {self.space.dim}")
            m.setflags(write=False)
            elems[b] = m
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    def completeness_defect(self) -> float:
        total = sum(self.elements[b] for b in self.outcomes)
        return float(np.linalg.norm(total - np.eye(self.space.dim)))

    def min_element_eigenvalue(self) -> float:
        return min(
            float(np.min(np.linalg.eigvalsh(hermitize(self.elements[b]))))
            for b in self.outcomes
        )

    def is_valid(self, tol: float = DEFAULT_TOL) -> bool:
        return self.completeness_defect() <= tol * self.space.dim and (
            self.min_element_eigenvalue() >= -tol
        )

    def as_operator(self, b) -> LabeledOperator:
        return LabeledOperator((self.space,), self.elements[b])


def _sum_elements(elements: Mapping, outcomes: Sequence) -> LabeledOperator:
    first = canonical(elements[outcomes[0]])
    total = first.matrix.copy()
    for b in outcomes[1:]:
        other = canonical(elements[b])
        if other.space_ids != first.space_ids or other.dims != first.dims:
            raise SpaceMismatchError("instrument elements live on different spaces")
        total = total + other.matrix
    return LabeledOperator(first.spaces, total)


@dataclass(frozen=True)
class Instrument:
    """Outcome-indexed network operation with a deterministic total."""

    outcomes: tuple
    elements: Mapping  # outcome -> LabeledOperator on spaces 0..2N-1
    teeth: int

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "elements", dict(self.elements))
        ids = sorted(canonical(self.elements[self.outcomes[0]]).space_ids)
        if ids != list(range(2 * self.teeth)):
            raise ValueError(f"instrument elements need ids 0..{2*self.teeth-1}, got {ids}")

    def element(self, event) -> LabeledOperator:
        outcomes = self._event_outcomes(event)
        return _sum_elements(self.elements, outcomes)

    def total(self) -> LabeledOperator:
        return _sum_elements(self.elements, self.outcomes)

    def _event_outcomes(self, event) -> tuple:
        if event is None:
            return self.outcomes
        if isinstance(event, (list, tuple, set, frozenset)):
            missing = set(event) - set(self.outcomes)
            if missing:
                raise KeyError(f"unknown outcomes {sorted(missing)}")
            return tuple(event)
        if event in self.elements:
            return (event,)
        raise KeyError(f"unknown outcome {event!r}")


@dataclass(frozen=True)
class TesterReport:
    passed: bool
    element_min_eigenvalue: float
    chain: ChainReport
    normalization_chain: tuple[LabeledOperator, ...] = field(repr=False, default=())

    @property
    def max_residual(self) -> float:
        return max(self.chain.max_residual, max(0.0, -self.element_min_eigenvalue))


@dataclass(frozen=True)
class Tester(Instrument):
    """An instrument read as a measuring network (end spaces already dropped)."""


def tester_total_projector(dims: Sequence[int]) -> ChainProjector:
    return ChainProjector.for_tester(dims)


def _extend_for_chain(total: LabeledOperator) -> LabeledOperator:
    """View a tester normalization as a network comb with 1-dim end caps."""
    n2 = len(total.spaces)
    shifted = canonical(total).relabel({i: i + 1 for i in range(n2)})
    spaces = (
        (SpaceLabel(0, 1, "input"),)
        + shifted.spaces
        + (SpaceLabel(n2 + 1, 1, "output"),)
    )
    return LabeledOperator(spaces, shifted.matrix)


def validate_tester(t: Tester, tol: float = DEFAULT_TOL) -> TesterReport:
    """Check element positivity and the tester normalization chain.

    The chain is exactly the deterministic-comb chain after padding the total
    with one-dimensional end spaces and shifting labels by one.
    """
    min_eig = min(min_eigenvalue(canonical(t.elements[b])) for b in t.outcomes)
    if min_eig < -tol:
        raise NotPSDError(f"tester element has min eigenvalue {min_eig:.3e}", min_eig)
    total = t.total()
    report = chain_report(_extend_for_chain(total), tol=tol)
    xi = []
    for reduced in report.extracted:
        op = reduced
        if 0 in op.space_ids:  # drop the 1-dim cap and shift labels back
            op = partial_trace(op, [0])
        op = op.relabel({i: i - 1 for i in op.space_ids})
        xi.append(canonical(op))
    passed = report.passed and min_eig >= -tol
    return TesterReport(passed, float(min_eig), report, tuple(xi))


def born(t: Tester, event, c: Comb) -> float:
    """Generalized Born rule: the probability of an event on a measured network."""
    tb = canonical(t.element(event))
    r = canonical(c.op)
    if tb.space_ids != r.space_ids or tb.dims != r.dims:
        raise SpaceMismatchError(
            f"tester spaces {tb.space_ids}/{tb.dims} do not match comb {r.space_ids}/{r.dims}"
        )
    return float(np.real(np.sum(tb.matrix * r.matrix)))


def born_distribution(t: Tester, c: Comb) -> dict:
    return {b: born(t, b, c) for b in t.outcomes}


def prepare_and_measure_tester(rho: np.ndarray, povm: Mapping, outcomes=None) -> Tester:
    """One-tooth tester: feed a fixed state, measure the output directly."""
    rho = np.asarray(rho, dtype=np.complex128)
    d0 = rho.shape[0]
    outcomes = tuple(povm.keys()) if outcomes is None else tuple(outcomes)
    s0 = SpaceLabel(0, d0, "input")
    elements = {}
    for b in outcomes:
        p = np.asarray(povm[b], dtype=np.complex128)
        s1 = SpaceLabel(1, p.shape[0], "output")
        elements[b] = LabeledOperator((s0, s1), np.kron(rho.T, p))
    return Tester(outcomes, elements, 1)


def tester_from_network(
    prep: np.ndarray,
    channels: Sequence[NetworkChannel],
    povm: Mapping,
    first_wire_dim: int | None = None,
    tol: float = DEFAULT_TOL,
) -> Tester:
    """Tester of a measuring network: preparation, processing row, final POVM.

    ``prep`` is a density matrix on (first tested input ⊗ first memory), wire
    slowest; ``first_wire_dim`` names the tested-input dimension (inferred
    from the first channel's memory when processing channels exist).  Channel
    ``i`` maps (memory_i ⊗ tested output 2i-1) to (tested input 2i ⊗
    memory_{i+1}).  The POVM acts on (last memory ⊗ last tested output),
    memory slowest.  Each element is assembled by padding the row with
    one-dimensional end caps, taking the padded network comb, and shrinking
    it back.
    """
    prep = np.asarray(prep, dtype=np.complex128)
    if abs(np.trace(prep) - 1.0) > 1e-7:
        raise ValueError(f"preparation state has trace {np.trace(prep):.6f}, expected 1")
    vals, vecs = np.linalg.eigh(hermitize(prep))
    if vals[0] < -1e-9:
        raise NotPSDError(f"preparation state has eigenvalue {vals[0]:.3e}", float(vals[0]))
    d_total = prep.shape[0]
    if channels:
        mem_first = channels[0].mem_in
        if first_wire_dim is not None and first_wire_dim * mem_first != d_total:
            raise ValueError(
                f"prep dim {d_total} is not first_wire_dim {first_wire_dim} x memory {mem_first}"
            )
        first_wire = d_total // mem_first
        mem_after = channels[-1].mem_out
    else:
        first_wire = d_total if first_wire_dim is None else first_wire_dim
        if d_total % first_wire != 0:
            raise ValueError(f"prep dim {d_total} not divisible by wire dim {first_wire}")
        mem_after = d_total // first_wire
    prep_kraus = [
        (np.sqrt(max(v, 0.0)) * vecs[:, i]).reshape(-1, 1)
        for i, v in enumerate(vals)
        if v > 1e-14
    ]
    prep_channel = NetworkChannel(
        tuple(prep_kraus), in_dim=1, out_dim=first_wire, mem_in=1, mem_out=d_total // first_wire
    )

    outcomes = tuple(povm.keys())
    povm_mats = {b: np.asarray(povm[b], dtype=np.complex128) for b in outcomes}
    povm_dim = next(iter(povm_mats.values())).shape[0]
    if povm_dim % mem_after != 0:
        raise ValueError(f"POVM dim {povm_dim} not divisible by final memory {mem_after}")
    last_wire = povm_dim // mem_after

    n_teeth = len(channels) + 1
    elements = {}
    for b in outcomes:
        root = _psd_matrix_sqrt(povm_mats[b])
        final_kraus = tuple(root[m : m + 1, :] for m in range(root.shape[0]))
        final_channel = NetworkChannel(
            final_kraus, in_dim=last_wire, out_dim=1, mem_in=mem_after, mem_out=1
        )
        net = ChannelNetwork((prep_channel,) + tuple(channels) + (final_channel,))
        padded = comb_from_network(net, tol=tol, allow_subnormalized=True)
        op = partial_trace(padded.op, [0, 2 * n_teeth + 1])
        op = op.relabel({i: i - 1 for i in op.space_ids})
        elements[b] = canonical(op)
    return Tester(outcomes, elements, n_teeth)


def _psd_matrix_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitize(m))
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.conj().T


@dataclass(frozen=True)
class InstrumentDilation:
    """A single-outcome-free realization: deterministic comb plus ancilla POVM."""

    comb_with_ancilla: LabeledOperator  # spaces 0..2N-1 plus the ancilla label
    merged_comb: Comb  # ancilla fused into the last output space
    povm: POVM
    ancilla: SpaceLabel

    def reconstruct(self, outcome) -> LabeledOperator:
        return canonical(link_product(self.comb_with_ancilla, self.povm.as_operator(outcome)))


def dilate_instrument(inst: Instrument, support_tol: float = 1e-12) -> InstrumentDilation:
    """Realize an instrument as one deterministic network measured on an ancilla.

    The total's square root is purified into a rank-one deterministic comb on
    the original spaces extended by a minimal ancilla (the support of the
    transposed total), and the outcome statistics are delegated to an ancilla
    POVM obtained by sandwiching each element with the inverse square root of
    the total on its support.
    """
    total = canonical(inst.total())
    vals, vecs = np.linalg.eigh(hermitize(total.matrix))
    lmax = max(float(vals[-1]), 0.0)
    keep = vals > max(support_tol * lmax, 0.0)
    lam = vals[keep]
    v = vecs[:, keep]
    rank = int(v.shape[1])

    purified = (v * np.sqrt(lam)).reshape(-1)
    ancilla = SpaceLabel(2 * inst.teeth, rank, "ancilla")
    spaces = total.spaces + (ancilla,)
    comb_with_ancilla = LabeledOperator(spaces, np.outer(purified, purified.conj()))

    inv_root = 1.0 / np.sqrt(lam)
    povm_elements = {}
    for b in inst.outcomes:
        rb = canonical(inst.elements[b]).matrix
        small = (v.conj().T @ rb @ v) * np.outer(inv_root, inv_root)
        povm_elements[b] = hermitize(small)
    povm = POVM(ancilla, inst.outcomes, povm_elements)

    merged = merge_spaces(
        comb_with_ancilla, [2 * inst.teeth - 1, ancilla.id], 2 * inst.teeth - 1, "output"
    )
    merged_comb = Comb(canonical(merged), inst.teeth, "deterministic")
    return InstrumentDilation(comb_with_ancilla, merged_comb, povm, ancilla)


@dataclass(frozen=True)
class TesterDecomposition:
    """Reduction of a tester to a comb-to-state map plus an ancilla POVM.

    ``sandwich`` maps a measured comb R (canonical order) to the ancilla state
    ``sandwich @ R @ sandwich^dag``; probabilities are recovered as
    ``Tr[P_b^T state]`` for every comb.
    """

    sandwich: np.ndarray  # rank x full-dim
    ancilla: SpaceLabel
    povm: POVM
    isometry: np.ndarray = field(repr=False, default=None)
    eigenvalues: np.ndarray = field(repr=False, default=None)

    def map_comb(self, c: Comb) -> np.ndarray:
        r = canonical(c.op).matrix
        return hermitize(self.sandwich @ r @ self.sandwich.conj().T)

    def probability(self, outcome, c: Comb) -> float:
        state = self.map_comb(c)
        return float(np.real(np.sum(self.povm.elements[outcome] * state)))


def decompose_tester(t: Tester, support_tol: float = 1e-12) -> TesterDecomposition:
    """Split a tester into the sandwiching supermap and an ancilla POVM.

    With the total's eigendecomposition ``T = V diag(mu) V^dag`` restricted to
    the support, the state map is ``R -> diag(sqrt(mu)) V^T R V* diag(sqrt(mu))``
    and the POVM is ``P_b = diag(mu^-1/2) V^dag T_b V diag(mu^-1/2)``; both
    compressions use the same eigenbasis so the probability identity holds to
    machine precision.
    """
    total = canonical(t.total())
    vals, vecs = np.linalg.eigh(hermitize(total.matrix))
    lmax = max(float(vals[-1]), 0.0)
    keep = vals > max(support_tol * lmax, 0.0)
    mu = vals[keep]
    v = vecs[:, keep]
    rank = int(v.shape[1])

    sandwich = (np.sqrt(mu)[:, None]) * v.T
    inv_root = 1.0 / np.sqrt(mu)
    povm_elements = {}
    for b in t.outcomes:
        tb = canonical(t.elements[b]).matrix
        povm_elements[b] = hermitize((v.conj().T @ tb @ v) * np.outer(inv_root, inv_root))
    ancilla = SpaceLabel(2 * t.teeth, rank, "ancilla")
    return TesterDecomposition(sandwich, ancilla, POVM(ancilla, t.outcomes, povm_elements), v, mu)


@dataclass
class DistanceResult:
    value: float
    witness_total: LabeledOperator
    restarts: int
    iterations: int


def _helstrom_split(
    total: np.ndarray, delta: np.ndarray, support_tol: float = 1e-12
) -> tuple[np.ndarray, float]:
    """Best two-outcome split of a given normalization against ``delta``.

    Returns the stacked pair (T_plus, T_minus) achieving
    ``|| sqrt(T^T) delta sqrt(T^T) ||_1`` and that value.
    """
    vals, vecs = np.linalg.eigh(hermitize(total))
    lmax = max(float(vals[-1]), 0.0)
    keep = vals > max(support_tol * lmax, 0.0)
    mu = vals[keep]
    v = vecs[:, keep]
    sandwich = (np.sqrt(mu)[:, None]) * v.T
    x = hermitize(sandwich @ delta @ sandwich.conj().T)
    xv, xw = np.linalg.eigh(x)
    value = float(np.sum(np.abs(xv)))
    sign = (xw * np.sign(xv)) @ xw.conj().T
    p_plus = hermitize(0.5 * (np.eye(x.shape[0]) + sign))
    p_minus = hermitize(np.eye(x.shape[0]) - p_plus)
    root = (v * np.sqrt(mu)) @ v.conj().T
    carrier = root @ v
    t_plus = hermitize(carrier @ p_plus.T @ carrier.conj().T)
    t_minus = hermitize(carrier @ p_minus.T @ carrier.conj().T)
    return np.stack([t_plus, t_minus]), value


def operational_distance(
    r1: Comb,
    r2: Comb,
    restarts: int = 20,
    max_rounds: int = 200,
    improvement_tol: float = 1e-8,
    seed: int | None = 0,
) -> DistanceResult:
    """Best discrimination distance over all measuring networks (lower bound).

    Alternates a closed-form best-measurement step for the current tester
    normalization with projected-gradient ascent of the linear functional
    ``Tr[(T_+ - T_-)^T (R - R')]`` over pairs of PSD operators whose sum obeys
    the normalization chain.  Multi-start; the best value found is reported
    together with the achieving normalization.
    """
    a = canonical(r1.op)
    b = canonical(r2.op)
    if a.space_ids != b.space_ids or a.dims != b.dims:
        raise SpaceMismatchError("combs live on different spaces")
    for c in (r1, r2):
        if c.kind != "deterministic" and not chain_report(c.op, 1e-7).passed:
            raise ValueError("operational distance requires deterministic combs")
    delta = a.matrix - b.matrix
    dims = list(a.dims)
    projector = ChainProjector.for_tester(dims)
    dim = a.dim

    def fix_sum(y: np.ndarray) -> np.ndarray:
        s = y[0] + y[1]
        shift = (projector.project(s) - s) / 2.0
        return np.stack([y[0] + shift, y[1] + shift])

    def project_pair(x: np.ndarray) -> np.ndarray:
        return dykstra(x, [psd_project, fix_sum], max_iters=300, tol=1e-12)[0]

    def pair_residual(x: np.ndarray) -> float:
        chain_res = max(projector.residuals(x[0] + x[1]))
        eigs = np.linalg.eigvalsh(hermitize(x))
        return max(chain_res, float(max(0.0, -eigs.min())))

    def certify_total(t: np.ndarray) -> np.ndarray:
        """Pull a candidate normalization exactly onto the chain affine set."""
        t = dykstra(t, [psd_project, projector.project], max_iters=400, tol=1e-13)[0]
        return projector.project(psd_project(t))

    grad = np.stack([delta.T, -delta.T])
    rng = np.random.default_rng(seed)
    uniform = projector.uniform()
    scale = max(1.0, float(np.linalg.norm(delta)))

    best_value = -np.inf
    best_total = uniform
    total_iterations = 0
    if float(np.linalg.norm(delta)) < 1e-14:
        return DistanceResult(0.0, LabeledOperator(a.spaces, uniform), 0, 0)

    for attempt in range(max(1, restarts)):
        if attempt == 0:
            total = uniform.copy()
        else:
            noise = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            noise = hermitize(noise)
            noise *= 0.5 * np.linalg.norm(uniform) / max(np.linalg.norm(noise), 1e-30)
            total = certify_total(uniform + noise)
        # Every value reported below is a best-measurement value at a
        # chain-exact normalization, hence a true achievable probability gap.
        _, value = _helstrom_split(total, delta)
        for _ in range(max_rounds):
            pair, _ = _helstrom_split(total, delta)
            result = maximize_linear(
                grad,
                project_pair,
                pair,
                max_iters=80,
                improvement_tol=1e-12,
                residual=pair_residual,
                feasibility_tol=1e-8 * scale,
            )
            total_iterations += result.iterations
            candidate_total = certify_total(hermitize(result.x[0] + result.x[1]))
            _, new_value = _helstrom_split(candidate_total, delta)
            if new_value > value:
                total = candidate_total
            if new_value <= value + improvement_tol:
                value = max(value, new_value)
                break
            value = new_value
        if value > best_value:
            best_value = value
            best_total = total
    return DistanceResult(
        float(max(best_value, 0.0)),
        LabeledOperator(a.spaces, best_total),
        max(1, restarts),
        total_iterations,
    )
