import numpy as np
from combkit import *
from combkit.core import canonical
from combkit.rand import random_instrument_elements, random_tester, random_network
from combkit.comb import comb_from_network, chain_report
from combkit.tester import Instrument, dilate_instrument, decompose_tester, validate_tester, born
from combkit.covariant import (
    cyclic_group, symmetric_group_3, dihedral_group, klein_group, phase_rep,
    left_action, covariant_structure, covariant_tester_from_seed, twirl_tester,
    check_covariant_tester, check_covariant_comb, twirl_comb, check_covariant_supermap,
    Representation, regular_rep_matrices, s3_permutation_matrices,
    dihedral_rep_matrices, pauli_conjugation_matrices, uniform_rep,
)
from combkit.estimation import (
    n_copy_family, delta_error_cost, optimize_covariant_tester, average_cost,
    worst_case_cost, family_from_base, optimal_parallel_estimation, kron_power,
    invariant_cost_from_profile,
)

rng = np.random.default_rng(7)

# --- dilation ---------------------------------------------------------------
for trial in range(5):
    n = int(rng.integers(1, 3))
    dims = [(int(rng.integers(2, 4)), int(rng.integers(2, 4))) for _ in range(n)]
    mems = [int(rng.integers(1, 3)) for _ in range(n - 1)]
    k = int(rng.integers(2, 5))
    elements, teeth = random_instrument_elements(dims, mems, k, int(rng.integers(2, 4)), rng)
    inst = Instrument(tuple(range(k)), elements, teeth)
    dil = dilate_instrument(inst)
    worst = max(
        np.linalg.norm(dil.reconstruct(b).matrix - canonical(inst.elements[b]).matrix)
        for b in inst.outcomes
    )
    merged_rep = chain_report(dil.merged_comb.op)
    print(f"dilate n={n} k={k}: recon={worst:.2e} povm_def={dil.povm.completeness_defect():.2e} "
          f"S_chain={max(merged_rep.residuals):.2e} ancilla={dil.ancilla.dim}")

# --- decomposition -----------------------------------------------------------
for trial in range(5):
    t = random_tester([2, 2, 2, 2], 3, rng)
    deco = decompose_tester(t)
    net = random_network([(2, 2), (2, 2)], [2], rng)
    comb = comb_from_network(net)
    worst = max(abs(deco.probability(b, comb) - born(t, b, comb)) for b in t.outcomes)
    state = deco.map_comb(comb)
    print(f"decompose: prob_id={worst:.2e} state_trace={np.trace(state).real:.12f} "
          f"povm_def={deco.povm.completeness_defect():.2e}")

# --- covariant: twirl properties ---------------------------------------------
for group, mk_rep in [
    (cyclic_group(3), lambda g: phase_rep(g, {0: 2, 1: 2, 2: 2, 3: 2})),
    (symmetric_group_3(), lambda g: uniform_rep(g, {0: 3, 1: 3, 2: 3, 3: 3}, s3_permutation_matrices())),
]:
    d = mk_rep(group).dim(0)
    rep = mk_rep(group)
    t = random_tester([d, d, d, d], group.order, rng)
    action = left_action(group)
    tw = twirl_tester(t, rep, action)
    res = check_covariant_tester(tw, rep, action)
    tw2 = twirl_tester(tw, rep, action)
    idem = max(
        np.linalg.norm(canonical(tw.elements[b]).matrix - canonical(tw2.elements[b]).matrix)
        for b in tw.outcomes
    )
    rep_t = validate_tester(tw)
    print(f"{group.name}: twirl覆res={res:.2e} idem={idem:.2e} chain={rep_t.passed}")

# --- covariance of comb families ----------------------------------------------
g3 = cyclic_group(3)
u = np.stack([np.diag([1.0, np.exp(2j*np.pi*g/3)]) for g in range(3)])
fam = n_copy_family(g3, u, 2)
print("family regen residual:", fam.regeneration_residual())
print("member trace:", fam.member(1).op.trace())
for g in range(3):
    pass
tw = twirl_comb(fam.member(1), fam.rep)
print("twirled comb covariance:", check_covariant_comb(tw, fam.rep), "kind:", tw.kind, "chain:", chain_report(tw.op).passed)

# --- estimation: Z_d character family ------------------------------------------
for (d, N) in [(3, 1), (4, 1)]:
    gd = cyclic_group(d)
    u = np.stack([np.diag([1.0, np.exp(2j*np.pi*g/d)]) for g in range(d)])
    fam = n_copy_family(gd, u, N)
    cost = delta_error_cost(gd)
    res = optimize_covariant_tester(fam, cost, restarts=4, seed=3)
    expected = 1.0 - (N + 1) / d
    wc = worst_case_cost(res.tester, fam, cost)
    print(f"(d={d},N={N}): cost={res.cost:.6f} expected={expected:.6f} worst={wc:.6f} iters={res.iterations}")

# --- parallel estimation oracle --------------------------------------------------
for (d, N) in [(3, 1), (4, 1)]:
    gd = cyclic_group(d)
    u = np.stack([np.diag([1.0, np.exp(2j*np.pi*g/d)]) for g in range(d)])
    par = optimal_parallel_estimation(gd, kron_power(u, N), delta_error_cost(gd), ref_dim=2**N, restarts=4, seed=1)
    print(f"parallel (d={d},N={N}): cost={par.cost:.6f} expected={1-(N+1)/d:.6f}")
