import time
import numpy as np
from combkit import *
from combkit.core import canonical, SpaceLabel, LabeledOperator
from combkit.rand import random_kraus, random_pure_state
from combkit.comb import choi_of_channel, as_comb, comb_from_network
from combkit.tester import operational_distance
from combkit.estimation import (
    n_copy_family, delta_error_cost, optimize_covariant_tester,
    optimal_parallel_estimation, kron_power, parallel_reduction_check,
    frame_alignment_compare,
)
from combkit.covariant import cyclic_group

rng = np.random.default_rng(11)

# --- criterion 8 configs: (4,2), (5,2) --------------------------------------
for (d, N) in [(4, 2), (5, 2)]:
    t0 = time.time()
    gd = cyclic_group(d)
    u = np.stack([np.diag([1.0, np.exp(2j * np.pi * g / d)]) for g in range(d)])
    fam = n_copy_family(gd, u, N)
    cost = delta_error_cost(gd)
    res = optimize_covariant_tester(fam, cost, restarts=4, seed=3)
    expected = 1.0 - (N + 1) / d
    print(f"(d={d},N={N}): cost={res.cost:.6f} expected={expected:.6f} "
          f"err={abs(res.cost-expected):.2e} time={time.time()-t0:.1f}s iters={res.iterations}")

# --- parallel oracle at (5,2) -------------------------------------------------
t0 = time.time()
gd = cyclic_group(5)
u = np.stack([np.diag([1.0, np.exp(2j * np.pi * g / 5)]) for g in range(5)])
par = optimal_parallel_estimation(gd, kron_power(u, 2), delta_error_cost(gd),
                                  ref_dim=4, restarts=4, seed=1)
print(f"parallel (5,2): {par.cost:.6f} expected {1-3/5:.6f} time={time.time()-t0:.1f}s")

# --- criterion 9: parallel reduction (3,2) -------------------------------------
t0 = time.time()
g3 = cyclic_group(3)
u3 = np.stack([np.diag([1.0, np.exp(2j * np.pi * g / 3)]) for g in range(3)])
fam32 = n_copy_family(g3, u3, 2)
report = parallel_reduction_check(fam32, delta_error_cost(g3), restarts=4, seed=2)
print(f"reduction (3,2): seq={report.sequential_cost:.6f} par={report.parallel_cost:.6f} "
      f"gap={report.gap:.2e} time={time.time()-t0:.1f}s")

# --- operational distance: identity vs bit flip --------------------------------
s0 = SpaceLabel(0, 2, "input"); s1 = SpaceLabel(1, 2, "output")
ident = as_comb(choi_of_channel([np.eye(2)], [s0], [s1]), "deterministic")
xflip = as_comb(choi_of_channel([np.array([[0, 1], [1, 0.0]], dtype=float)], [s0], [s1]), "deterministic")
t0 = time.time()
dist = operational_distance(ident, xflip, restarts=4, seed=0)
print(f"ident vs X: {dist.value:.8f} (expect 2) time={time.time()-t0:.1f}s")

same = operational_distance(ident, ident, restarts=2, seed=0)
print("identical:", same.value)

# --- distance vs brute-force diamond norm ---------------------------------------
def diamond_bruteforce(k1, k2, n_samples=8000, refine=8, rng=None):
    diff_apply = lambda psi_mat: (
        sum(np.kron(k, np.eye(2)) @ psi_mat @ np.kron(k, np.eye(2)).conj().T for k in k1)
        - sum(np.kron(k, np.eye(2)) @ psi_mat @ np.kron(k, np.eye(2)).conj().T for k in k2)
    )
    # batched random sampling
    v = rng.normal(size=(n_samples, 4)) + 1j * rng.normal(size=(n_samples, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    big1 = np.stack([np.kron(k, np.eye(2)) for k in k1])
    big2 = np.stack([np.kron(k, np.eye(2)) for k in k2])
    kets1 = np.einsum("kij,nj->nki", big1, v)
    kets2 = np.einsum("kij,nj->nki", big2, v)
    mats = np.einsum("nki,nkj->nij", kets1, kets1.conj()) - np.einsum("nki,nkj->nij", kets2, kets2.conj())
    vals = np.linalg.eigvalsh(mats)
    tn = np.abs(vals).sum(axis=1)
    order = np.argsort(tn)[::-1]
    best = tn[order[0]]
    from scipy.optimize import minimize
    def neg(x):
        z = x[:4] + 1j * x[4:]
        n = np.linalg.norm(z)
        if n < 1e-12:
            return 0.0
        z = z / n
        m = np.outer(z, z.conj())
        return -np.abs(np.linalg.eigvalsh(diff_apply(m))).sum()
    for idx in order[:refine]:
        z0 = v[idx]
        x0 = np.concatenate([z0.real, z0.imag])
        r = minimize(neg, x0, method="Nelder-Mead",
                     options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12})
        best = max(best, -r.fun)
    return best

worst_gap = 0
t0 = time.time()
for trial in range(6):
    k1 = random_kraus(2, 2, 2, rng)
    k2 = random_kraus(2, 2, 2, rng)
    c1 = as_comb(choi_of_channel(k1, [s0], [s1]), "deterministic")
    c2 = as_comb(choi_of_channel(k2, [s0], [s1]), "deterministic")
    seesaw = operational_distance(c1, c2, restarts=6, seed=trial)
    brute = diamond_bruteforce(k1, k2, rng=rng)
    gap = seesaw.value - brute
    worst_gap = max(worst_gap, abs(gap))
    print(f"trial {trial}: seesaw={seesaw.value:.8f} brute={brute:.8f} gap={gap:+.2e}")
print(f"worst |gap|={worst_gap:.2e} time={time.time()-t0:.1f}s")

# --- alignment Z3 ------------------------------------------------------------------
t0 = time.time()
u3q = np.stack([np.diag([1.0, np.exp(2j * np.pi * g / 3)]) for g in range(3)])
rep_al = frame_alignment_compare(cyclic_group(3), u3q, 1, 1, 1, delta_error_cost(cyclic_group(3)),
                                 classical_dim=1, restarts=3, seed=5)
print(f"align Z3 c=1: multi={rep_al.multi_round_cost:.6f} single={rep_al.single_round_cost:.6f} "
      f"gap={rep_al.gap:+.2e} time={time.time()-t0:.1f}s")
