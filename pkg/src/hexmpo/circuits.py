"""Kicked-Ising circuit family and compilation of gate layers to operator trains.

One round is ``U = R_ZZ(theta_J) R_X(theta_h)`` with ``R_ZZ = prod exp(-i theta_J Z Z / 2)``
over all bonds and ``R_X = prod exp(-i theta_h X / 2)`` over all sites. ``R_X`` acts
first on the state. The Clifford two-qubit point is ``theta_J = -pi/2``.

Programs are lists of steps in state order. The Heisenberg picture replays them in
reverse, mapping ``O -> g^dagger O g`` for each gate ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from hexmpo.lattice import (
    Edge,
    GateLayer,
    GeometryError,
    Lattice,
    SnakeOrder,
    grow_along,
    layer_bonds,
    snake_order,
)
from hexmpo.tensortrain import CompiledLayer

VARIANTS = ("standard", "non_commuting", "extra_final_rx")

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def rx_matrix(theta: float) -> np.ndarray:
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * PAULI_X


def rzz_matrix(theta: float) -> np.ndarray:
    ph = np.exp(-0.5j * theta * np.array([1, -1, -1, 1]))
    return np.diag(ph)


def conjugation_superop(g: np.ndarray) -> np.ndarray:
    """Single-site map ``O -> g^dagger O g`` on the fused index ``2 * ket + bra``."""
    return np.kron(g.conj().T, g.T)


@dataclass(frozen=True)
class CircuitSpec:
    """Parameters of a kicked-Ising circuit on a lattice."""

    theta_J: float
    theta_h: float
    depth: int
    lattice: Lattice
    variant: str = "standard"
    flux_bond: Edge | None = None

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (math.isfinite(self.theta_J) and math.isfinite(self.theta_h)):
            raise ValueError("angles must be finite")
        if self.flux_bond is not None:
            a, b = self.flux_bond
            if not self.lattice.has_edge(a, b):
                raise GeometryError(f"flux bond {self.flux_bond} is not an edge of the lattice")
            object.__setattr__(self, "flux_bond", (min(a, b), max(a, b)))

    @property
    def n_sites(self) -> int:
        return self.lattice.site_count

    def bond_angle(self, edge: Edge) -> float:
        e = (min(edge), max(edge))
        return -self.theta_J if e == self.flux_bond else self.theta_J

    def with_(self, **changes) -> CircuitSpec:
        fields = dict(
            theta_J=self.theta_J, theta_h=self.theta_h, depth=self.depth,
            lattice=self.lattice, variant=self.variant, flux_bond=self.flux_bond,
        )
        fields.update(changes)
        return CircuitSpec(**fields)


@dataclass(frozen=True)
class ZZStep:
    layer: GateLayer
    angles: tuple[float, ...]


@dataclass(frozen=True)
class RXStep:
    theta: float
    sites: tuple[int, ...] | None = None  # None means every site
    signs: Mapping[int, int] | None = field(default=None, compare=False)


Step = Union[ZZStep, RXStep]


@dataclass(frozen=True)
class RoundProgram:
    steps: tuple[Step, ...]

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def zz_layers(self) -> list[ZZStep]:
        return [s for s in self.steps if isinstance(s, ZZStep)]

    @property
    def rx_layers(self) -> list[RXStep]:
        return [s for s in self.steps if isinstance(s, RXStep)]


def default_layers(spec: CircuitSpec, order: SnakeOrder | None = None) -> list[GateLayer]:
    """Scheduler layers for the spec's variant.

    The non-commuting variant schedules each edge group separately so that layers never
    mix groups.
    """
    lat = spec.lattice
    order = snake_order(lat) if order is None else order
    if spec.variant != "non_commuting":
        return layer_bonds(lat, order)
    groups = lat.groups()
    out = []
    for g in sorted(set(groups)):
        bonds = [e for e, gg in zip(lat.edges, groups) if gg == g]
        out.extend(layer_bonds(lat, order, bonds=bonds))
    return out


def build_round(spec: CircuitSpec, layers: Sequence[GateLayer] | None = None) -> RoundProgram:
    """One round in state order.

    ``standard`` and ``extra_final_rx``: RX, then the ZZ layers. ``non_commuting``: for
    each edge group in increasing order, an RX layer followed by that group's ZZ layers.
    The trailing RX of ``extra_final_rx`` is added by :func:`circuit_program`.
    """
    layers = default_layers(spec) if layers is None else list(layers)

    def zz(layer: GateLayer) -> ZZStep:
        return ZZStep(layer, tuple(spec.bond_angle(b) for b in layer.bonds))

    rx = RXStep(spec.theta_h)
    if spec.variant != "non_commuting":
        return RoundProgram((rx,) + tuple(zz(l) for l in layers))
    group_of = dict(zip(spec.lattice.edges, spec.lattice.groups()))
    keyed = []
    for layer in layers:
        gs = {group_of[b] for b in layer.bonds}
        if len(gs) != 1:
            raise GeometryError("non-commuting layers must not mix edge groups")
        keyed.append((gs.pop(), layer))
    steps: list[Step] = []
    current = None
    for g, layer in sorted(keyed, key=lambda kv: kv[0]):
        if g != current:
            steps.append(rx)
            current = g
        steps.append(zz(layer))
    return RoundProgram(tuple(steps))


def circuit_program(spec: CircuitSpec, layers: Sequence[GateLayer] | None = None) -> list[Step]:
    """All steps of ``depth`` rounds in state order."""
    rnd = build_round(spec, layers)
    steps = list(rnd.steps) * spec.depth
    if spec.variant == "extra_final_rx":
        steps.append(RXStep(spec.theta_h))
    return steps


def nn_parity_signs(lat: Lattice) -> dict[int, int]:
    """Per-site sign ``(-1)**|NN(a)|``."""
    return {a: (-1) ** lat.degree(a) for a in range(lat.site_count)}


# ---------------------------------------------------------------------------
# lightcone restriction


def restrict_heisenberg(steps_heis: Sequence[Step], support: Iterable[int]) -> tuple[list[Step], list[set[int]]]:
    """Drop gates that act trivially on an operator evolving in the Heisenberg picture.

    ``steps_heis`` are in Heisenberg order (reverse of state order). Consecutive ZZ steps
    commute, so each such block keeps the bonds touching the support at the start of the
    block and the support grows afterwards. RX steps are restricted to the support.
    Returns the restricted steps and the support after each step.
    """
    sup = set(support)
    out: list[Step] = []
    trace: list[set[int]] = []
    block_start = None
    for step in steps_heis:
        if isinstance(step, ZZStep):
            if block_start is None:
                block_start = set(sup)
            keep = [k for k, b in enumerate(step.layer.bonds) if b[0] in block_start or b[1] in block_start]
            layer = GateLayer(
                tuple(step.layer.bonds[k] for k in keep), tuple(step.layer.spans[k] for k in keep)
            )
            out.append(ZZStep(layer, tuple(step.angles[k] for k in keep)))
            sup = grow_along(layer.bonds, sup)
        else:
            block_start = None
            sites = sorted(sup) if step.sites is None else sorted(sup.intersection(step.sites))
            out.append(RXStep(step.theta, tuple(sites), step.signs))
        trace.append(set(sup))
    return out, trace


def restrict_state_program(steps: Sequence[Step], observable_support: Iterable[int]) -> list[Step]:
    """State-order program keeping only gates in the past lightcone of an observable."""
    heis, _ = restrict_heisenberg(list(reversed(steps)), observable_support)
    return list(reversed(heis))


# ---------------------------------------------------------------------------
# compilation


def two_site_terms(gate: np.ndarray, doubled: bool, rtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Operator-Schmidt decomposition ``sum_k A_k (x) B_k`` of a two-qubit gate.

    ``gate`` is 4x4 in ``(a, b)`` order. With ``doubled`` the decomposed object is the
    conjugation map ``O -> g^dagger O g`` on the fused per-site index. Returns arrays of
    shape ``(K, d, d)``.
    """
    if doubled:
        sup = np.kron(gate.conj().T, gate.T)  # (ka kb ba bb) x (ka kb ba bb)
        t = sup.reshape([2] * 8)
        # out: ka kb ba bb, in: ka kb ba bb  ->  (ka ba)(ka' ba') x (kb bb)(kb' bb')
        t = t.transpose(0, 2, 4, 6, 1, 3, 5, 7)
        d = 4
    else:
        t = gate.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)
        d = 2
    m = t.reshape(d * d, d * d)
    u, s, vh = np.linalg.svd(m)
    k = max(1, int(np.count_nonzero(s > rtol * s[0])))
    a = (u[:, :k] * np.sqrt(s[:k])).T.reshape(k, d, d)
    b = (np.sqrt(s[:k])[:, None] * vh[:k]).reshape(k, d, d)
    return a, b


def compile_zz_layer(
    layer: GateLayer,
    theta_J: float | Sequence[float],
    doubled: bool,
    n_sites: int,
) -> CompiledLayer:
    """Compile a layer of ZZ rotations into an operator train.

    Args:
        layer: bonds with pairwise disjoint 1D spans.
        theta_J: common angle or one angle per bond.
        doubled: compile the conjugation map on vectorized operators instead of the gate.
        n_sites: train length.
    """
    d = 4 if doubled else 2
    angles = [theta_J] * len(layer) if np.isscalar(theta_J) else list(theta_J)
    if len(angles) != len(layer):
        raise ValueError("one angle per bond expected")
    tensors: list[np.ndarray | None] = [None] * n_sites
    eye = np.eye(d, dtype=complex)
    for (p, q), ang in zip(layer.spans, angles):
        a, b = two_site_terms(rzz_matrix(ang), doubled)
        k = a.shape[0]
        if k == 1:  # a global phase times identity, a pure product
            tensors[p] = a.transpose(1, 2, 0).reshape(1, d, d, 1)
            tensors[q] = b.transpose(1, 2, 0).reshape(1, d, d, 1)
            continue
        tensors[p] = a.transpose(1, 2, 0)[None]  # (1, d, d, k)
        mid = np.einsum("kl,ij->kijl", np.eye(k), eye)
        for m in range(p + 1, q):
            tensors[m] = mid
        tensors[q] = b[..., None]  # (k, d, d, 1)
    return CompiledLayer(tuple(tensors), d)


def compile_rx_layer(
    theta_h: float,
    doubled: bool,
    n_sites: int,
    site_signs: Mapping[int, int] | Sequence[int] | None = None,
    sites: Iterable[int] | None = None,
    order: SnakeOrder | None = None,
) -> CompiledLayer:
    """Compile single-site X rotations into a bond-dimension-1 operator train.

    Args:
        theta_h: rotation angle.
        doubled: conjugation map instead of the gate.
        n_sites: train length.
        site_signs: optional per-site sign multiplying ``theta_h`` (keyed by lattice site).
        sites: lattice sites to rotate (default all).
        order: 1D ordering mapping lattice sites to train positions (default identity).
    """
    d = 4 if doubled else 2
    tensors: list[np.ndarray | None] = [None] * n_sites
    chosen = range(n_sites) if sites is None else sites
    for s in chosen:
        sign = 1 if site_signs is None else site_signs[s]
        g = rx_matrix(sign * theta_h)
        m = conjugation_superop(g) if doubled else g
        pos = s if order is None else order.position[s]
        tensors[pos] = m.reshape(1, d, d, 1)
    return CompiledLayer(tuple(tensors), d)


def compile_step(step: Step, doubled: bool, n_sites: int, order: SnakeOrder) -> CompiledLayer:
    if isinstance(step, ZZStep):
        return compile_zz_layer(step.layer, step.angles, doubled, n_sites)
    return compile_rx_layer(step.theta, doubled, n_sites, step.signs, step.sites, order)


def is_trivial(step: Step) -> bool:
    if isinstance(step, ZZStep):
        return len(step.layer) == 0 or all(abs(math.remainder(a, 4 * math.pi)) < 1e-15 for a in step.angles)
    return (step.sites is not None and len(step.sites) == 0) or abs(
        math.remainder(step.theta, 4 * math.pi)
    ) < 1e-15


def inverse_program(steps: Sequence[Step]) -> list[Step]:
    """Steps of the inverse circuit, in state order."""
    out: list[Step] = []
    for step in reversed(steps):
        if isinstance(step, ZZStep):
            out.append(ZZStep(step.layer, tuple(-a for a in step.angles)))
        else:
            out.append(RXStep(-step.theta, step.sites, step.signs))
    return out
