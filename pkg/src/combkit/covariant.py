"""Finite symmetry groups acting on network spaces: covariance and twirling.

Combs transform by conjugation with ``U`` on odd (output) labels and the
entrywise conjugate on even (input) labels; measuring networks transform with
the conjugate pattern, which is exactly what keeps the Born pairing
invariant.  All Haar integrals degenerate to uniform sums over the group.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .comb import Comb, chain_report
from .core import DEFAULT_TOL, LabeledOperator, canonical, is_psd, min_eigenvalue
from .tester import Tester, TesterDecomposition, decompose_tester, validate_tester
from .solvers import hermitize


@dataclass(frozen=True)
class FiniteGroup:
    """A finite group given by its multiplication table."""

    name: str
    table: np.ndarray  # table[g, h] = g * h
    identity: int
    inverse: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        t.setflags(write=False)
        inv = np.array(self.inverse, dtype=np.int64)
        inv.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "inverse", inv)

    @property
    def order(self) -> int:
        return self.table.shape[0]

    def mul(self, g: int, h: int) -> int:
        return int(self.table[g, h])

    def inv(self, g: int) -> int:
        return int(self.inverse[g])

    def elements(self) -> range:
        return range(self.order)

    def check(self) -> None:
        """Exhaustively verify the group laws on the table."""
        n = self.order
        t = self.table
        if t.shape != (n, n) or t.min() < 0 or t.max() >= n:
            raise ValueError("multiplication table is not closed")
        e = self.identity
        if not (np.all(t[e, :] == np.arange(n)) and np.all(t[:, e] == np.arange(n))):
            raise ValueError("identity law fails")
        for g in range(n):
            if t[g, self.inverse[g]] != e or t[self.inverse[g], g] != e:
                raise ValueError(f"inverse law fails at element {g}")
        for g, h, k in product(range(n), repeat=3):
            if t[t[g, h], k] != t[g, t[h, k]]:
                raise ValueError(f"associativity fails at ({g}, {h}, {k})")


def group_from_table(name: str, table: np.ndarray) -> FiniteGroup:
    table = np.asarray(table, dtype=np.int64)
    n = table.shape[0]
    identity = None
    for e in range(n):
        if np.all(table[e, :] == np.arange(n)) and np.all(table[:, e] == np.arange(n)):
            identity = e
            break
    if identity is None:
        raise ValueError("table has no identity element")
    inverse = np.empty(n, dtype=np.int64)
    for g in range(n):
        hits = np.where(table[g, :] == identity)[0]
        if len(hits) != 1:
            raise ValueError(f"element {g} has no unique inverse")
        inverse[g] = hits[0]
    group = FiniteGroup(name, table, identity, inverse)
    group.check()
    return group


def cyclic_group(d: int) -> FiniteGroup:
    g = np.arange(d)
    table = (g[:, None] + g[None, :]) % d
    return group_from_table(f"Z{d}", table)


def klein_group() -> FiniteGroup:
    """Z2 x Z2 with elements encoded as (a, b) -> a + 2b."""
    table = np.zeros((4, 4), dtype=np.int64)
    for a1, b1, a2, b2 in product(range(2), repeat=4):
        table[a1 + 2 * b1, a2 + 2 * b2] = ((a1 + a2) % 2) + 2 * ((b1 + b2) % 2)
    return group_from_table("Z2xZ2", table)


def dihedral_group(n: int = 4) -> FiniteGroup:
    """Symmetries of the n-gon; element (k, f) -> k + n*f, f the reflection bit."""
    table = np.zeros((2 * n, 2 * n), dtype=np.int64)
    for k1, f1, k2, f2 in product(range(n), range(2), range(n), range(2)):
        k = (k1 + (k2 if f1 == 0 else -k2)) % n
        f = (f1 + f2) % 2
        table[k1 + n * f1, k2 + n * f2] = k + n * f
    return group_from_table(f"D{n}", table)


def symmetric_group_3() -> FiniteGroup:
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    index = {p: i for i, p in enumerate(perms)}
    table = np.zeros((6, 6), dtype=np.int64)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            composed = tuple(p[q[x]] for x in range(3))
            table[i, j] = index[composed]
    return group_from_table("S3", table)


BUILTIN_GROUPS = {
    "Z2": lambda: cyclic_group(2),
    "Z3": lambda: cyclic_group(3),
    "Z4": lambda: cyclic_group(4),
    "Z5": lambda: cyclic_group(5),
    "Z2xZ2": klein_group,
    "D4": lambda: dihedral_group(4),
    "S3": symmetric_group_3,
}


def builtin_group(name: str) -> FiniteGroup:
    if name in BUILTIN_GROUPS:
        return BUILTIN_GROUPS[name]()
    if name.startswith("Z") and name[1:].isdigit():
        return cyclic_group(int(name[1:]))
    raise KeyError(f"unknown group {name!r}; built-ins: {sorted(BUILTIN_GROUPS)}")


@dataclass(frozen=True)
class Representation:
    """Per-space unitary matrices U[g] indexed by a space id.

    Strict homomorphisms only: projective phases are rejected by the
    validator since conjugation formulas cannot see them anyway.
    """

    group: FiniteGroup
    matrices: Mapping[int, np.ndarray]  # space id -> stack (order, d, d)

    def __post_init__(self):
        mats = {}
        for sid, stack in dict(self.matrices).items():
            arr = np.array(stack, dtype=np.complex128)
            if arr.ndim != 3 or arr.shape[0] != self.group.order or arr.shape[1] != arr.shape[2]:
                raise ValueError(f"space {sid}: expected stack (|G|, d, d), got {arr.shape}")
            arr.setflags(write=False)
            mats[int(sid)] = arr
        object.__setattr__(self, "matrices", mats)

    def dim(self, space_id: int) -> int:
        return self.matrices[space_id].shape[1]

    def unitary(self, g: int, space_id: int) -> np.ndarray:
        return self.matrices[space_id][g]

    def check(self, tol: float = 1e-9) -> float:
        """Max deviation from unitarity and the homomorphism property."""
        worst = 0.0
        for sid, stack in self.matrices.items():
            d = stack.shape[1]
            eye = np.eye(d)
            for g in self.group.elements():
                worst = max(worst, float(np.linalg.norm(stack[g].conj().T @ stack[g] - eye)))
            for g in self.group.elements():
                for h in self.group.elements():
                    gh = self.group.mul(g, h)
                    worst = max(worst, float(np.linalg.norm(stack[gh] - stack[g] @ stack[h])))
        if worst > tol:
            raise ValueError(f"representation violates unitarity/homomorphism by {worst:.3e}")
        return worst

    def extended(self, extra: Mapping[int, int]) -> "Representation":
        """Add trivially acted spaces (space id -> dimension)."""
        mats = dict(self.matrices)
        for sid, dim in extra.items():
            mats[int(sid)] = np.broadcast_to(
                np.eye(dim, dtype=np.complex128), (self.group.order, dim, dim)
            ).copy()
        return Representation(self.group, mats)

    def comb_conjugator(self, g: int, spaces: Sequence) -> np.ndarray:
        """Unitary conjugating combs: U on odd labels, conjugate-U on even."""
        out = np.eye(1, dtype=np.complex128)
        for s in sorted(spaces, key=lambda s: s.id):
            u = self.unitary(g, s.id)
            if u.shape[0] != s.dim:
                raise ValueError(f"space {s.id}: rep dim {u.shape[0]} vs operator dim {s.dim}")
            out = np.kron(out, u if s.id % 2 == 1 else u.conj())
        return out

    def tester_conjugator(self, g: int, spaces: Sequence) -> np.ndarray:
        """Unitary conjugating measuring networks: the conjugate pattern."""
        return self.comb_conjugator(g, spaces).conj()


def phase_rep(group: FiniteGroup, space_dims: Mapping[int, int], weights: Mapping[int, Sequence[int]] | None = None) -> Representation:
    """Diagonal character representation of a cyclic group.

    By default a space of dimension d gets weights (0, 1, ..., d-1); the
    canonical qubit phase is diag(1, omega^g).
    """
    n = group.order
    omega = np.exp(2j * np.pi / n)
    mats = {}
    for sid, d in space_dims.items():
        w = np.asarray(weights[sid] if weights else range(d), dtype=np.int64)
        if len(w) != d:
            raise ValueError(f"space {sid}: {len(w)} weights for dimension {d}")
        stack = np.stack([np.diag(omega ** ((g * w) % n)) for g in group.elements()])
        mats[sid] = stack
    return Representation(group, mats)


def regular_rep_matrices(group: FiniteGroup) -> np.ndarray:
    n = group.order
    stack = np.zeros((n, n, n), dtype=np.complex128)
    for g in group.elements():
        for h in group.elements():
            stack[g, group.mul(g, h), h] = 1.0
    return stack


def dihedral_rep_matrices(n: int = 4) -> np.ndarray:
    """Planar rotation/reflection matrices for the dihedral group encoding."""
    stack = np.zeros((2 * n, 2, 2), dtype=np.complex128)
    for k in range(n):
        c, s = np.cos(2 * np.pi * k / n), np.sin(2 * np.pi * k / n)
        rot = np.array([[c, -s], [s, c]])
        for f in range(2):
            refl = np.array([[1, 0], [0, -1.0]])
            stack[k + n * f] = rot @ (refl if f else np.eye(2))
    return stack


def s3_permutation_matrices() -> np.ndarray:
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    stack = np.zeros((6, 3, 3), dtype=np.complex128)
    for i, p in enumerate(perms):
        for x in range(3):
            stack[i, p[x], x] = 1.0
    return stack


def pauli_conjugation_matrices() -> np.ndarray:
    """Strict Klein-group action on a qubit and its conjugate partner.

    The bare Pauli assignment X^a Z^b is only projective; pairing each Pauli
    with its entrywise conjugate cancels the cocycle and models conjugation
    of qubit operators faithfully.
    """
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    stack = np.zeros((4, 4, 4), dtype=np.complex128)
    for a in range(2):
        for b in range(2):
            p = np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
            stack[a + 2 * b] = np.kron(p, p.conj())
    return stack


def uniform_rep(group: FiniteGroup, space_dims: Mapping[int, int], stack: np.ndarray) -> Representation:
    """The same matrix stack on every listed space (dims must match)."""
    mats = {}
    for sid, d in space_dims.items():
        if stack.shape[1] != d:
            raise ValueError(f"space {sid}: stack dim {stack.shape[1]} != {d}")
        mats[sid] = stack
    return Representation(group, mats)


# ---------------------------------------------------------------------------
# Covariance checks and twirls


def conjugate_comb(c: Comb, rep: Representation, g: int) -> Comb:
    r = canonical(c.op)
    w = rep.comb_conjugator(g, r.spaces)
    return Comb(LabeledOperator(r.spaces, w @ r.matrix @ w.conj().T), c.teeth, c.kind)


def check_covariant_comb(c: Comb, rep: Representation) -> float:
    """Largest commutator norm between the comb and the group conjugators."""
    r = canonical(c.op)
    worst = 0.0
    for g in rep.group.elements():
        w = rep.comb_conjugator(g, r.spaces)
        worst = max(worst, float(np.linalg.norm(r.matrix @ w - w @ r.matrix)))
    return worst


def twirl_comb(c: Comb, rep: Representation) -> Comb:
    """Group-average a comb; deterministic inputs stay deterministic."""
    r = canonical(c.op)
    acc = np.zeros_like(r.matrix)
    for g in rep.group.elements():
        w = rep.comb_conjugator(g, r.spaces)
        acc += w @ r.matrix @ w.conj().T
    acc = hermitize(acc / rep.group.order)
    return Comb(LabeledOperator(r.spaces, acc), c.teeth, c.kind)


@dataclass(frozen=True)
class GroupAction:
    """A left action of the group on a finite outcome set."""

    group: FiniteGroup
    table: np.ndarray  # (order, n_points) with table[g, w] = g.w

    def __post_init__(self):
        t = np.array(self.table, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if t.shape[0] != self.group.order:
            raise ValueError("action table rows must match group order")

    @property
    def n_points(self) -> int:
        return self.table.shape[1]

    def act(self, g: int, w: int) -> int:
        return int(self.table[g, w])

    def check(self) -> None:
        e = self.group.identity
        if not np.all(self.table[e] == np.arange(self.n_points)):
            raise ValueError("identity does not act trivially")
        for g in self.group.elements():
            for h in self.group.elements():
                gh = self.group.mul(g, h)
                if not np.all(self.table[gh] == self.table[g][self.table[h]]):
                    raise ValueError(f"action law fails at ({g}, {h})")

    def is_transitive(self) -> bool:
        return len(set(self.table[:, 0])) == self.n_points and set(
            int(x) for x in self.table[:, 0]
        ) == set(range(self.n_points))


def left_action(group: FiniteGroup) -> GroupAction:
    """The group acting on itself by left multiplication."""
    return GroupAction(group, group.table.copy())


@dataclass(frozen=True)
class CovariantStructure:
    """A transitive outcome set with base point, section, and stabilizer."""

    action: GroupAction
    base_point: int
    section: np.ndarray  # per outcome: a group element carrying the base point there
    stabilizer: tuple[int, ...]

    @property
    def group(self) -> FiniteGroup:
        return self.action.group

    @property
    def outcomes(self) -> range:
        return range(self.action.n_points)


def covariant_structure(action: GroupAction, base_point: int = 0) -> CovariantStructure:
    action.check()
    if not action.is_transitive():
        raise ValueError("the action is not transitive")
    n = action.n_points
    section = np.full(n, -1, dtype=np.int64)
    for g in action.group.elements():
        w = action.act(g, base_point)
        if section[w] < 0:
            section[w] = g
    stabilizer = tuple(
        g for g in action.group.elements() if action.act(g, base_point) == base_point
    )
    return CovariantStructure(action, base_point, section, stabilizer)


def _int_outcomes(t: Tester, n_points: int):
    if tuple(t.outcomes) != tuple(range(n_points)):
        raise ValueError(
            f"tester outcomes {t.outcomes} must be 0..{n_points-1} to carry the action"
        )


def twirl_tester(t: Tester, rep: Representation, action: GroupAction) -> Tester:
    """Average a tester over the group, permuting outcomes along the action."""
    _int_outcomes(t, action.n_points)
    spaces = canonical(t.elements[t.outcomes[0]]).spaces
    n = rep.group.order
    mats = {w: np.zeros((t.elements[0].dim,) * 2, dtype=np.complex128) for w in t.outcomes}
    for h in rep.group.elements():
        w_h = rep.tester_conjugator(h, spaces)
        hinv = rep.group.inv(h)
        for w in t.outcomes:
            source = canonical(t.elements[action.act(hinv, w)]).matrix
            mats[w] += w_h @ source @ w_h.conj().T
    elements = {
        w: LabeledOperator(spaces, hermitize(m / n)) for w, m in mats.items()
    }
    return Tester(t.outcomes, elements, t.teeth)


def check_covariant_tester(t: Tester, rep: Representation, action: GroupAction) -> float:
    """Largest violation of element covariance over group and outcomes."""
    _int_outcomes(t, action.n_points)
    spaces = canonical(t.elements[t.outcomes[0]]).spaces
    worst = 0.0
    for g in rep.group.elements():
        w_g = rep.tester_conjugator(g, spaces)
        for w in t.outcomes:
            lhs = canonical(t.elements[action.act(g, w)]).matrix
            rhs = w_g @ canonical(t.elements[w]).matrix @ w_g.conj().T
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def seed_stabilizer_residual(
    seed: LabeledOperator, rep: Representation, struct: CovariantStructure
) -> float:
    s = canonical(seed)
    worst = 0.0
    for g0 in struct.stabilizer:
        w = rep.tester_conjugator(g0, s.spaces)
        worst = max(worst, float(np.linalg.norm(s.matrix @ w - w @ s.matrix)))
    return worst


def covariant_tester_from_seed(
    seed: LabeledOperator,
    rep: Representation,
    struct: CovariantStructure,
    tol: float = 1e-7,
    validate: bool = True,
) -> Tester:
    """Generate the covariant tester whose orbit density at the base point is
    the seed (uniform weight over the outcome set).

    The seed must be PSD and commute with the stabilizer's conjugators, and
    the summed total must satisfy the normalization chain; violations raise
    with the measured residuals.
    """
    s = canonical(seed)
    if not is_psd(s, tol):
        raise ValueError(f"seed is not PSD: min eigenvalue {min_eigenvalue(s):.3e}")
    stab = seed_stabilizer_residual(seed, rep, struct)
    if stab > tol:
        raise ValueError(f"seed does not commute with the stabilizer: residual {stab:.3e}")
    m = struct.action.n_points
    elements = {}
    for w in struct.outcomes:
        g = int(struct.section[w])
        u = rep.tester_conjugator(g, s.spaces)
        elements[w] = LabeledOperator(s.spaces, hermitize(u @ s.matrix @ u.conj().T) / m)
    tester = Tester(tuple(struct.outcomes), elements, len(s.spaces) // 2)
    if validate:
        report = validate_tester(tester, tol=tol)
        if not report.passed:
            chain = ", ".join(f"{r:.2e}" for r in report.chain.residuals)
            raise ValueError(
                f"seed produces an unnormalized tester: chain residuals [{chain}], "
                f"scalar {report.chain.scalar:.6f}"
            )
    return tester


def extract_seed(t: Tester, struct: CovariantStructure) -> LabeledOperator:
    """Inverse of the orbit construction at the base point."""
    base = canonical(t.elements[struct.base_point])
    return LabeledOperator(base.spaces, base.matrix * struct.action.n_points)


@dataclass(frozen=True)
class SupermapCovarianceReport:
    residual: float
    invariance_residual: float
    ancilla_unitaries: np.ndarray  # (order, rank, rank)

    @property
    def passed(self) -> bool:
        return max(self.residual, self.invariance_residual) <= 1e-9


def check_covariant_supermap(
    t: Tester, rep: Representation, decomposition: TesterDecomposition | None = None
) -> SupermapCovarianceReport:
    """Verify that the tester's comb-to-state map intertwines the symmetry.

    For a covariant tester the support of the transposed total is invariant
    under the comb conjugators, and compressing them there gives unitaries
    satisfying ``sandwich @ W_g = U_{g,A} @ sandwich``; the report carries the
    worst deviation from both facts plus the compressed unitaries.
    """
    deco = decomposition if decomposition is not None else decompose_tester(t)
    spaces = canonical(t.total()).spaces
    v = deco.isometry
    rank = v.shape[1]
    support_conj = v.conj() @ v.T  # projector onto the transposed total's support
    units = np.zeros((rep.group.order, rank, rank), dtype=np.complex128)
    worst = 0.0
    inv_worst = 0.0
    for g in rep.group.elements():
        w = rep.comb_conjugator(g, spaces)
        inv_worst = max(
            inv_worst, float(np.linalg.norm(w @ support_conj - support_conj @ w))
        )
        u_small = v.T @ w @ v.conj()
        units[g] = u_small
        worst = max(worst, float(np.linalg.norm(deco.sandwich @ w - u_small @ deco.sandwich)))
    return SupermapCovarianceReport(worst, inv_worst, units)
