import numpy as np
from combkit.core import LabeledOperator, SpaceLabel, canonical
from combkit.comb import Comb
from combkit.covariant import cyclic_group, Representation
from combkit.estimation import (
    family_from_base, delta_error_cost, optimize_covariant_tester, average_cost,
    frame_alignment_compare,
)
from combkit.solvers import frob_inner, hermitize

g3 = cyclic_group(3)
u = np.stack([np.diag([1.0, np.exp(2j * np.pi * g / 3)]) for g in range(3)])
rep = Representation(g3, {0: u, 1: u})
cost = delta_error_cost(g3)

# Known-perfect Alice channel
m = np.array([[1, np.sqrt(2)], [np.sqrt(2), -1]]) / np.sqrt(3)
chi = np.zeros(4, dtype=complex)
for i in range(2):
    for a in range(2):
        chi[i * 2 + a] = m[a, i]
spaces = (SpaceLabel(0, 2, "input"), SpaceLabel(1, 2, "output"))
r0 = Comb(LabeledOperator(spaces, np.outer(chi, chi.conj())), 1, "deterministic")
fam = family_from_base(g3, rep, r0)
print("regen:", fam.regeneration_residual(), "trace:", r0.op.trace())

res = optimize_covariant_tester(fam, cost, restarts=6, seed=0)
print("bob cost for perfect alice:", res.cost)

# See-saw monotonicity check: random alice, bob step, alice step, bob step
rng = np.random.default_rng(3)
from combkit.rand import random_deterministic_comb
alice = random_deterministic_comb([(2, 2)], [], rng)
fam_a = family_from_base(g3, rep, alice)
bob = optimize_covariant_tester(fam_a, cost, restarts=3, seed=1)
print("random alice cost:", bob.cost)

conj_stack = np.stack([rep.comb_conjugator(g, spaces) for g in range(3)])
tmats = np.stack([canonical(bob.tester.elements[b]).matrix for b in bob.tester.outcomes])
mgrad = hermitize(np.einsum(
    "eg,gki,ekl,glj->ij", cost.table, conj_stack.conj(), np.swapaxes(tmats, 1, 2), conj_stack
) / 3)
# check: Tr[M R] == average cost at alice for this tester
lin = frob_inner(mgrad, canonical(alice.op).matrix)
true = average_cost(bob.tester, fam_a, cost)
print("linear objective check:", lin, true)

from combkit.solvers import ChainProjector, dykstra, psd_project, maximize_linear
chain = ChainProjector([2, 2])
feas = lambda x: dykstra(x, [psd_project, chain.project], max_iters=300)[0]
asc = maximize_linear(-mgrad, feas, canonical(alice.op).matrix, max_iters=300)
alice2 = Comb(LabeledOperator(spaces, psd_project(asc.x)), 1, "unvalidated")
fam2 = family_from_base(g3, rep, alice2)
cost_same_bob = average_cost(bob.tester, fam2, cost)
print("after alice step (same bob):", cost_same_bob, "(should be <= )", bob.cost)
bob2 = optimize_covariant_tester(fam2, cost, restarts=3, seed=2)
print("after bob re-opt:", bob2.cost)
for it in range(8):
    tmats = np.stack([canonical(bob2.tester.elements[b]).matrix for b in bob2.tester.outcomes])
    mgrad = hermitize(np.einsum(
        "eg,gki,ekl,glj->ij", cost.table, conj_stack.conj(), np.swapaxes(tmats, 1, 2), conj_stack
    ) / 3)
    asc = maximize_linear(-mgrad, feas, canonical(alice2.op).matrix, max_iters=300)
    alice2 = Comb(LabeledOperator(spaces, psd_project(asc.x)), 1, "unvalidated")
    fam2 = family_from_base(g3, rep, alice2)
    bob2 = optimize_covariant_tester(fam2, cost, restarts=2, seed=3 + it)
    print(f"  seesaw iter {it}: {bob2.cost:.8f}")

# Full alignment call with more restarts
rep_al = frame_alignment_compare(g3, u, 1, 1, 1, cost, classical_dim=1,
                                 restarts=6, seesaw_rounds=30, seed=5)
print(f"align: multi={rep_al.multi_round_cost:.8f} single={rep_al.single_round_cost:.8f}")
