import numpy as np
from combkit import *
from combkit.comb import choi_of_channel, chain_report, apply_comb, uniform_deterministic
from combkit.core import SpaceLabel, canonical, ops_allclose
from combkit.rand import (
    random_network, random_kraus, random_density, haar_unitary, random_tester,
    random_povm, random_psd,
)
from combkit.solvers import ChainProjector, frob_inner, hermitize, psd_project, dykstra
from combkit.tester import born, validate_tester, tester_from_network, prepare_and_measure_tester

rng = np.random.default_rng(42)

# --- 1. comb_from_network vs chained link product -------------------------
def chois_of_network(net):
    ops = []
    mem_prev = -100
    mem_next = -101
    for j, ch in enumerate(net.channels):
        ins = []
        if ch.mem_in > 1 or True:
            ins = [SpaceLabel(mem_prev - j, ch.mem_in, "ancilla"), SpaceLabel(2*j, ch.in_dim, "input")]
        outs = [SpaceLabel(2*j+1, ch.out_dim, "output"), SpaceLabel(mem_prev - (j+1), ch.mem_out, "ancilla")]
        ops.append(choi_of_channel(ch.kraus, ins, outs))
    return ops

for trial in range(10):
    n = int(rng.integers(1, 4))
    wire_dims = [(2, 2) for _ in range(n)]
    mems = [int(rng.integers(1, 5)) for _ in range(n - 1)]
    net = random_network(wire_dims, mems, rng)
    comb = comb_from_network(net)
    chois = chois_of_network(net)
    linked = chois[0]
    for op in chois[1:]:
        linked = link_product(op, linked)
    # trace out the dangling 1-dim memory labels
    dangling = [s.id for s in linked.spaces if s.id < -1]
    linked = partial_trace(linked, dangling)
    from combkit.comb import as_comb
    linked_comb = as_comb(linked)
    d = np.linalg.norm(canonical(linked_comb.op).matrix - canonical(comb.op).matrix)
    rep = chain_report(comb.op)
    print(f"net {n=} mems={mems} linkdiff={d:.2e} chain={max(rep.residuals):.2e} scalar={rep.scalar:.6f} trace={comb.op.trace().real:.3f}")

# --- 2. ChainProjector properties ------------------------------------------
for dims in ([2, 2], [2, 3, 2, 2], [1, 2, 2, 3, 2, 1]):
    proj = ChainProjector(dims)
    D = int(np.prod(dims))
    x = hermitize(rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D)))
    px = proj.project(x)
    ppx = proj.project(px)
    print(f"dims={dims} idem={np.linalg.norm(ppx-px):.2e} member={max(proj.residuals(px)):.2e}", end=" ")
    # self-adjoint: <P(x), y> == <x, P(y)>
    y = hermitize(rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D)))
    py = proj.project(y)
    lhs = frob_inner(px - x*0, y)  # <P(x), y>
    # for affine projection use displacement orthogonality instead:
    # x - P(x) orthogonal to differences of members
    m1 = proj.project(hermitize(rng.normal(size=(D, D))))
    m2 = proj.project(hermitize(rng.normal(size=(D, D))))
    orth = frob_inner(x - px, m1 - m2)
    print(f"orth={orth:.2e}")

# tester chain projector: uniform is member
proj_t = ChainProjector.for_tester([2, 2, 2, 2])
u = proj_t.uniform()
print("tester uniform member:", max(proj_t.residuals(u)))

# --- 3. validator rejects perturbation --------------------------------------
net = random_network([(2, 2), (2, 2)], [2], rng)
comb = comb_from_network(net)
pert = random_psd(comb.op.dim, rng, frob_norm=1.0)
bad = Comb(LabeledOperator(canonical(comb.op).spaces, canonical(comb.op).matrix + 0.05*pert), 2, "unvalidated")
rep = chain_report(bad.op)
print("perturbed residuals:", [f"{r:.3f}" for r in rep.residuals], f"scalar={rep.scalar:.4f}")

# --- 4. link with state = channel application ------------------------------
kraus = random_kraus(2, 2, 2, rng)
c1 = choi_of_channel(kraus, [SpaceLabel(0, 2, "input")], [SpaceLabel(1, 2, "output")])
rho = random_density(2, rng)
rho_op = LabeledOperator((SpaceLabel(0, 2, "input"),), rho)
out = link_product(c1, rho_op)
direct = sum(k @ rho @ k.conj().T for k in kraus)
print("channel apply diff:", np.linalg.norm(out.matrix - direct))

# Choi composition
k2 = random_kraus(2, 3, 2, rng)
c2 = choi_of_channel(k2, [SpaceLabel(1, 2, "input")], [SpaceLabel(2, 3, "output")])
comp = link_product(c2, c1)
k_comp_choi = canonical(comp)
direct_choi = np.zeros((6, 6), dtype=complex)
for ka in kraus:
    for kb in k2:
        v = np.zeros((3, 2), dtype=complex)
        v = kb @ ka
        vv = np.zeros(6, dtype=complex)
        # choi on (0 in, 2 out) canonical ascending: space0 (dim2) slowest, space2 (dim3)
        # R = sum |i><j| ⊗ C(|i><j|)
        for i in range(2):
            for j in range(2):
                blk = v[:, i:i+1] @ v[:, j:j+1].conj().T
                direct_choi[i*3:(i+1)*3, j*3:(j+1)*3] += blk
print("choi composition diff:", np.linalg.norm(k_comp_choi.matrix - direct_choi))

# --- 5. stinespring ---------------------------------------------------------
net = random_network([(2, 2), (2, 2)], [3], rng)
comb = comb_from_network(net)
iso = stinespring(comb)
print("V†V defect:", iso.isometry_defect())
rho_in = random_density(4, rng)
rho_op = LabeledOperator((SpaceLabel(0, 2, "input"), SpaceLabel(2, 2, "input")), rho_in)
via_iso = iso.apply(rho_op)
via_link = apply_comb(comb, rho_op)
print("stinespring action diff:", np.linalg.norm(canonical(via_iso).matrix - canonical(via_link).matrix))

# --- 6. tester from network + born vs direct simulation ---------------------
rho0 = random_density(4, rng)   # wire 2 x memory 2
d1 = __import__("combkit.rand", fromlist=["random_channel"]).random_channel(2, 2, rng, mem_in=2, mem_out=2)
povm = random_povm(4, 3, rng)
t = tester_from_network(rho0, [d1], povm, first_wire_dim=2)
report = validate_tester(t)
print("tester chain passed:", report.passed, "residuals:", [f"{r:.1e}" for r in report.chain.residuals])

net = random_network([(2, 2), (2, 2)], [2], rng)
comb = comb_from_network(net)
probs = [born(t, b, comb) for b in t.outcomes]
print("born总和:", sum(probs), probs)

# direct circuit simulation for the same pair
def apply_to(state, dims, kraus_list, targets, out_dims):
    # state: density matrix on prod(dims); targets: factor indices; kraus maps prod(target dims)->prod(out_dims)
    n = len(dims)
    rest = [i for i in range(n) if i not in targets]
    perm = targets + rest
    t_dims = [dims[i] for i in targets]
    r_dims = [dims[i] for i in rest]
    din = int(np.prod(t_dims)) if t_dims else 1
    drest = int(np.prod(r_dims)) if r_dims else 1
    tens = state.reshape(dims + dims)
    tens = np.transpose(tens, perm + [n + p for p in perm])
    mat = tens.reshape(din * drest, din * drest)
    dout = int(np.prod(out_dims)) if out_dims else 1
    acc = np.zeros((dout * drest, dout * drest), dtype=complex)
    for k in kraus_list:
        big = np.kron(k, np.eye(drest))
        acc += big @ mat @ big.conj().T
    new_dims = list(out_dims) + r_dims
    return acc, new_dims, len(out_dims)

# circuit: rho0 on (H0, A); C0: H0 -> H1⊗M; D1: A⊗H1 -> H2⊗B ; C1: M⊗H2 -> H3 ; POVM on B⊗H3
c0, c1ch = net.channels
state = rho0  # dims [H0=2, A=2]
dims = [2, 2]
# apply C0 to H0: kraus (mem_in=1⊗H0)->(H1⊗M)
state, dims, _ = apply_to(state, dims, list(c0.kraus), [0], [2, c0.mem_out])  # -> [H1, M, A]
# apply D1 to (A, H1): kraus (A⊗H1)->(H2⊗B)
state, dims, _ = apply_to(state, dims, list(d1.kraus), [2, 0], [2, 2])  # -> [H2, B, M]
# apply C1 to (M, H2): kraus (M⊗H2)->(H3)
state, dims, _ = apply_to(state, dims, list(c1ch.kraus), [2, 0], [2])  # -> [H3, B]
# povm on (B ⊗ H3): memory slowest -> factor order [B, H3] = indices [1, 0]
perm_state, pdims, _ = apply_to(state, dims, [np.eye(4)], [1, 0], [2, 2])
direct = [float(np.real(np.trace(povm[b] @ perm_state))) for b in t.outcomes]
print("direct:", direct)
print("diff:", max(abs(a - b) for a, b in zip(probs, direct)))
