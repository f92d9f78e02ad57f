"""Seeded random generators for states, channels, networks, and testers."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .comb import ChannelNetwork, Comb, NetworkChannel, comb_from_network
from .core import LabeledOperator, SpaceLabel
from .solvers import hermitize
from .tester import Tester, tester_from_network


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(_complex_gaussian(rng, (dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = _complex_gaussian(rng, dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = _complex_gaussian(rng, (dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_psd(dim: int, rng: np.random.Generator, frob_norm: float = 1.0) -> np.ndarray:
    g = _complex_gaussian(rng, (dim, dim))
    p = g @ g.conj().T
    return p * (frob_norm / np.linalg.norm(p))


def random_hermitian(dim: int, rng: np.random.Generator, frob_norm: float = 1.0) -> np.ndarray:
    h = hermitize(_complex_gaussian(rng, (dim, dim)))
    return h * (frob_norm / np.linalg.norm(h))


def random_kraus(
    in_dim: int, out_dim: int, rank: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Trace-preserving Kraus set: stacked blocks of a random isometry."""
    if rank * out_dim < in_dim:
        raise ValueError(f"rank {rank} x out {out_dim} cannot carry input dim {in_dim}")
    g = _complex_gaussian(rng, (rank * out_dim, in_dim))
    q, _ = np.linalg.qr(g)
    return [q[k * out_dim : (k + 1) * out_dim, :] for k in range(rank)]


def random_channel(
    in_dim: int,
    out_dim: int,
    rng: np.random.Generator,
    mem_in: int = 1,
    mem_out: int = 1,
    rank: int | None = None,
) -> NetworkChannel:
    din, dout = mem_in * in_dim, out_dim * mem_out
    rank = rank if rank is not None else max(1, int(np.ceil(din / dout)) + 1)
    return NetworkChannel(tuple(random_kraus(din, dout, rank, rng)), in_dim, out_dim, mem_in, mem_out)


def random_network(
    wire_dims: Sequence[tuple[int, int]],
    memory_dims: Sequence[int],
    rng: np.random.Generator,
) -> ChannelNetwork:
    """Random trace-preserving network; ``memory_dims`` are the internal links."""
    n = len(wire_dims)
    if len(memory_dims) != max(n - 1, 0):
        raise ValueError(f"{n} channels need {n-1} memory dims, got {len(memory_dims)}")
    mems = [1] + [int(m) for m in memory_dims] + [1]
    channels = []
    for j, (din, dout) in enumerate(wire_dims):
        channels.append(random_channel(din, dout, rng, mem_in=mems[j], mem_out=mems[j + 1]))
    return ChannelNetwork(tuple(channels))


def random_deterministic_comb(
    wire_dims: Sequence[tuple[int, int]],
    memory_dims: Sequence[int],
    rng: np.random.Generator,
) -> Comb:
    return comb_from_network(random_network(wire_dims, memory_dims, rng))


def random_povm(dim: int, n_outcomes: int, rng: np.random.Generator) -> dict:
    """Random informationally generic POVM via normalized PSD pieces."""
    pieces = [random_psd(dim, rng) + 1e-6 * np.eye(dim) for _ in range(n_outcomes)]
    total = sum(pieces)
    vals, vecs = np.linalg.eigh(hermitize(total))
    inv_root = (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T
    return {b: hermitize(inv_root @ pieces[b] @ inv_root) for b in range(n_outcomes)}


def random_tester(
    tested_dims: Sequence[int],
    n_outcomes: int,
    rng: np.random.Generator,
    memory_dims: Sequence[int] | None = None,
) -> Tester:
    """Random measuring network against a network with the given space dims.

    ``tested_dims`` lists the measured network's space dimensions ascending
    (even = its inputs, which the tester feeds; odd = its outputs, which the
    tester absorbs).
    """
    dims = [int(d) for d in tested_dims]
    if len(dims) % 2:
        raise ValueError("tested_dims must pair up")
    teeth = len(dims) // 2
    mems = list(memory_dims) if memory_dims is not None else [2] * teeth
    if len(mems) != teeth:
        raise ValueError(f"{teeth}-tooth tester needs {teeth} memory dims")
    prep = random_density(dims[0] * mems[0], rng)
    channels = []
    for i in range(1, teeth):
        channels.append(
            random_channel(dims[2 * i - 1], dims[2 * i], rng, mem_in=mems[i - 1], mem_out=mems[i])
        )
    povm = random_povm(mems[-1] * dims[-1], n_outcomes, rng)
    return tester_from_network(prep, channels, povm, first_wire_dim=dims[0])


def random_instrument_elements(
    wire_dims: Sequence[tuple[int, int]],
    memory_dims: Sequence[int],
    n_outcomes: int,
    ancilla_dim: int,
    rng: np.random.Generator,
):
    """Random instrument as a network with an ancilla POVM on its last output.

    Returns (elements dict, teeth); elements are labeled operators on the
    contiguous network spaces obtained by linking the dilated network with
    each POVM element.
    """
    from .comb import link_product
    from .core import canonical, split_space

    n = len(wire_dims)
    mems = [1] + [int(m) for m in memory_dims] + [1]
    channels = []
    for j, (din, dout) in enumerate(wire_dims):
        out = dout * ancilla_dim if j == n - 1 else dout
        channels.append(random_channel(din, out, rng, mem_in=mems[j], mem_out=mems[j + 1]))
    net = ChannelNetwork(tuple(channels))
    padded = comb_from_network(net)
    ancilla = SpaceLabel(2 * n, ancilla_dim, "ancilla")
    wire = SpaceLabel(2 * n - 1, wire_dims[-1][1], "output")
    with_ancilla = split_space(padded.op, 2 * n - 1, [wire, ancilla])
    povm = random_povm(ancilla_dim, n_outcomes, rng)
    elements = {
        b: canonical(link_product(with_ancilla, LabeledOperator((ancilla,), povm[b])))
        for b in range(n_outcomes)
    }
    return elements, n
