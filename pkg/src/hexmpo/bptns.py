"""Belief-propagation tensor-network states (BP-TNS) on qubit graphs.

A state is a set of site tensors ``Gamma_a`` (physical leg first, then one virtual leg
per neighbour in ascending neighbour order) and diagonal edge weights ``Lambda_e``. The
network tensor used for contractions is ``T_a = Gamma_a`` with ``sqrt(Lambda)`` absorbed
on every leg.

Gates use the simple update. Environments for local expectation values come from
belief-propagation messages: one ``chi x chi`` matrix per directed edge, describing the
ket/bra pair of the edge leg as seen from the sender's side.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from hexmpo.circuits import (
    CircuitSpec,
    RXStep,
    Step,
    ZZStep,
    circuit_program,
    default_layers,
    inverse_program,
    rx_matrix,
    rzz_matrix,
)
from hexmpo.lattice import Edge, Lattice, snake_order
from hexmpo.pauli import SINGLE, PauliString
from hexmpo.tensortrain import SV_FLOOR, truncated_svd

log = logging.getLogger(__name__)

MAX_THETA_DIM = 1 << 14
PINV_RTOL = 1e-12


class BondOverflowError(ValueError):
    """Raised when a simple update would build an unmanageably large matrix."""


def _edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


def _pinv_diag(lam: np.ndarray) -> np.ndarray:
    cut = PINV_RTOL * (lam.max() if lam.size else 0.0)
    out = np.zeros_like(lam)
    mask = lam > cut
    out[mask] = 1.0 / lam[mask]
    return out


def _scale_leg(t: np.ndarray, axis: int, w: np.ndarray) -> np.ndarray:
    shape = [1] * t.ndim
    shape[axis] = w.size
    return t * w.reshape(shape)


@dataclass
class GraphTNS:
    """Site tensors and edge weights on a lattice."""

    lattice: Lattice
    gammas: list[np.ndarray]
    lambdas: dict[Edge, np.ndarray]
    legs: list[list[int]]

    @classmethod
    def product(cls, lat: Lattice, vectors: Sequence[np.ndarray]) -> GraphTNS:
        legs = [lat.neighbors(a) for a in range(lat.site_count)]
        gammas = [
            np.asarray(v, dtype=complex).reshape((2,) + (1,) * len(legs[a]))
            for a, v in enumerate(vectors)
        ]
        lambdas = {e: np.ones(1) for e in lat.edges}
        return cls(lat, gammas, lambdas, legs)

    @classmethod
    def up(cls, lat: Lattice) -> GraphTNS:
        return cls.product(lat, [np.array([1.0, 0.0])] * lat.site_count)

    def copy(self) -> GraphTNS:
        return GraphTNS(
            self.lattice,
            [g.copy() for g in self.gammas],
            {e: l.copy() for e, l in self.lambdas.items()},
            [list(l) for l in self.legs],
        )

    def leg(self, a: int, b: int) -> int:
        """Axis of ``Gamma_a`` pointing to ``b``."""
        return 1 + self.legs[a].index(b)

    def bond_dims(self) -> dict[Edge, int]:
        return {e: l.size for e, l in self.lambdas.items()}

    @property
    def max_bond(self) -> int:
        return max((l.size for l in self.lambdas.values()), default=1)

    def site_tensor(self, a: int) -> np.ndarray:
        t = self.gammas[a]
        for b in self.legs[a]:
            t = _scale_leg(t, self.leg(a, b), np.sqrt(self.lambdas[_edge(a, b)]))
        return t

    def check(self) -> None:
        for (a, b), lam in self.lambdas.items():
            if self.gammas[a].shape[self.leg(a, b)] != lam.size or self.gammas[b].shape[
                self.leg(b, a)
            ] != lam.size:
                raise ValueError(f"edge {(a, b)}: inconsistent leg dimensions")

    def to_dense(self) -> np.ndarray:
        """Full contraction to a ``2**N`` vector (tiny graphs only)."""
        n = self.lattice.site_count
        if n > 14:
            raise ValueError("dense contraction limited to 14 sites")
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        edge_sym = {e: letters[n + k] for k, e in enumerate(self.lattice.edges)}
        ops = []
        subs = []
        for a in range(n):
            subs.append(letters[a] + "".join(edge_sym[_edge(a, b)] for b in self.legs[a]))
            ops.append(self.site_tensor(a))
        expr = ",".join(subs) + "->" + letters[:n]
        return np.einsum(expr, *ops, optimize=True).reshape(-1)


# ---------------------------------------------------------------------------
# gates


def apply_single_site(tns: GraphTNS, a: int, g: np.ndarray) -> None:
    tns.gammas[a] = np.tensordot(g, tns.gammas[a], axes=(1, 0))


def apply_gate_simple_update(
    tns: GraphTNS, bond: Edge, gate: np.ndarray, chi_max: int, floor: float = SV_FLOOR
) -> float:
    """Apply a two-site gate (4x4 in ``bond`` order) with the simple update, in place.

    The weights of the other edges are absorbed as the environment, the pair is reduced
    by QR, the gate applied, and the result split by a truncated SVD. The new edge
    weight is normalized to unit 2-norm. Returns the discarded weight fraction.
    """
    a, b = bond
    if not tns.lattice.has_edge(a, b):
        raise ValueError(f"{bond} is not an edge")
    lam_ab = tns.lambdas[_edge(a, b)]

    def reduce(x: int, y: int):
        t = tns.gammas[x]
        for z in tns.legs[x]:
            if z != y:
                t = _scale_leg(t, tns.leg(x, z), tns.lambdas[_edge(x, z)])
        ax = tns.leg(x, y)
        t = np.moveaxis(t, ax, -1)  # (p, others..., shared)
        t = np.moveaxis(t, 0, -2)  # (others..., p, shared)
        others = t.shape[:-2]
        m = t.reshape(int(np.prod(others, dtype=int)), -1)
        if 2 * min(m.shape) > MAX_THETA_DIM:
            raise BondOverflowError(f"simple update on {bond} needs a {2 * min(m.shape)}-row matrix")
        q, r = np.linalg.qr(m)
        return q, r.reshape(r.shape[0], 2, -1), others, ax

    qa, ra, oa, axa = reduce(a, b)
    qb, rb, ob, axb = reduce(b, a)
    theta = np.einsum("xis,s,yjs->xijy", ra, lam_ab, rb, optimize=True)
    g4 = gate.reshape(2, 2, 2, 2)
    theta = np.einsum("IJij,xijy->xIJy", g4, theta, optimize=True)
    x, _, _, y = theta.shape
    u, s, vh, info = truncated_svd(theta.reshape(2 * x, 2 * y), chi_max, floor)
    nrm = float(np.linalg.norm(s))
    full = nrm**2 + info.discarded_weight
    lam = s / nrm
    k = lam.size

    def rebuild(q, r_new, others, x_site: int, y_site: int, ax: int) -> np.ndarray:
        t = (q @ r_new.reshape(r_new.shape[0], -1)).reshape(others + (2, k))
        t = np.moveaxis(t, -2, 0)  # (p, others..., shared)
        t = np.moveaxis(t, -1, ax)
        for z in tns.legs[x_site]:
            if z != y_site:
                t = _scale_leg(t, tns.leg(x_site, z), _pinv_diag(tns.lambdas[_edge(x_site, z)]))
        return t

    ra_new = u.reshape(x, 2, k)
    rb_new = vh.reshape(k, 2, y).transpose(2, 1, 0)  # (y, 2, k)
    tns.gammas[a] = rebuild(qa, ra_new, oa, a, b, axa)
    tns.gammas[b] = rebuild(qb, rb_new, ob, b, a, axb)
    tns.lambdas[_edge(a, b)] = lam
    return info.discarded_weight / full if full > 0 else 0.0


def apply_step(tns: GraphTNS, step: Step, chi_max: int) -> float:
    """Apply one program step; returns the largest discarded weight fraction."""
    worst = 0.0
    if isinstance(step, ZZStep):
        for bond, ang in zip(step.layer.bonds, step.angles):
            worst = max(worst, apply_gate_simple_update(tns, bond, rzz_matrix(ang), chi_max))
        return worst
    sites = range(tns.lattice.site_count) if step.sites is None else step.sites
    for s in sites:
        sign = 1 if step.signs is None else step.signs[s]
        apply_single_site(tns, s, rx_matrix(sign * step.theta))
    return worst


# ---------------------------------------------------------------------------
# belief propagation


@dataclass
class MessageSet:
    """Messages ``m[(a, b)]``: environment of edge ``a-b`` from ``a``'s side.

    Indices are ``(ket, bra)`` of the leg as it appears on ``b``.
    """

    messages: dict[tuple[int, int], np.ndarray]
    residuals: list[float] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.inf

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        return self.messages[key]


def _absorb_incoming(
    tns: GraphTNS, a: int, t_ket: np.ndarray, msgs: Mapping[tuple[int, int], np.ndarray], skip: int | None
) -> np.ndarray:
    """Contract the ket-side legs of ``t_ket`` with incoming messages (except from ``skip``)."""
    x = t_ket
    for c in tns.legs[a]:
        if c == skip:
            continue
        ax = tns.leg(a, c)
        x = np.tensordot(x, msgs[(c, a)], axes=(ax, 0))  # bra index appended last
        x = np.moveaxis(x, -1, ax)
    return x


def _outgoing(tns: GraphTNS, a: int, b: int, t_ket: np.ndarray, t_bra: np.ndarray, msgs) -> np.ndarray:
    x = _absorb_incoming(tns, a, t_ket, msgs, b)
    ax = tns.leg(a, b)
    axes = [k for k in range(x.ndim) if k != ax]
    return np.tensordot(x, t_bra.conj(), axes=(axes, axes))


def _sandwich(tns: GraphTNS, ops: Mapping[int, np.ndarray] | None):
    tensors = [tns.site_tensor(a) for a in range(tns.lattice.site_count)]
    kets = list(tensors)
    if ops:
        for a, o in ops.items():
            kets[a] = np.tensordot(o, kets[a], axes=(1, 0))
    return kets, tensors


def bp_messages(
    tns: GraphTNS,
    iters: int = 15,
    *,
    ops: Mapping[int, np.ndarray] | None = None,
    damping: float = 0.0,
    tol: float = 0.0,
    init: MessageSet | None = None,
) -> MessageSet:
    """Synchronous BP on ``<psi|O|psi>`` with ``O`` a product of the given site operators.

    Messages start at the normalized identity (or ``init``). Without ``ops`` they are
    Hermitian PSD and normalized to unit trace, otherwise to unit Frobenius norm.
    Iteration stops early once the largest change falls below ``tol``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    kets, bras = _sandwich(tns, ops)
    lat = tns.lattice
    directed = [(a, b) for a in range(lat.site_count) for b in tns.legs[a]]
    if init is not None:
        msgs = {k: v.copy() for k, v in init.messages.items()}
    else:
        msgs = {}
        for a, b in directed:
            d = tns.lambdas[_edge(a, b)].size
            msgs[(a, b)] = np.eye(d, dtype=complex) / d
    out = MessageSet(msgs)
    for _ in range(iters):
        new = {}
        for a, b in directed:
            m = _outgoing(tns, a, b, kets[a], bras[a], msgs)
            if ops is None:
                m = 0.5 * (m + m.conj().T)
                tr = np.trace(m).real
                m = m / tr if tr > 0 else m
            else:
                nrm = np.linalg.norm(m)
                m = m / nrm if nrm > 0 else m
            if damping:
                m = (1 - damping) * m + damping * msgs[(a, b)]
            new[(a, b)] = m
        res = max((np.linalg.norm(new[k] - msgs[k]) for k in new), default=0.0)
        msgs = new
        out.messages = msgs
        out.residuals.append(float(res))
        if res < tol:
            break
    return out


def _psd_sqrt(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian square root and its pseudo-inverse."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0.0, None)
    cut = PINV_RTOL * (w.max() if w.size else 0.0)
    r = np.sqrt(w)
    rinv = np.where(w > cut, 1.0 / np.where(r > 0, r, 1.0), 0.0)
    return (v * r) @ v.conj().T, (v * rinv) @ v.conj().T


def bp_regauge(tns: GraphTNS, iters: int = 15, **kwargs) -> tuple[GraphTNS, MessageSet]:
    """Bring the state to the BP (Vidal-like) gauge using converged messages.

    On each edge the messages ``X X^dagger`` (from ``a``) and ``Y Y^dagger`` (from ``b``)
    define ``X^T Y = U Lambda V^dagger``. Leg ``a`` is transformed by ``X^{-T} U``, leg
    ``b`` by ``Y^{-T} conj(V)``, and ``Lambda`` becomes the new edge weight. Returns the
    regauged state and the messages expressed in the new gauge (diagonal ``Lambda``).
    """
    msgs = bp_messages(tns, iters, **kwargs)
    new = tns.copy()
    tensors = [tns.site_tensor(a) for a in range(tns.lattice.site_count)]
    new_msgs: dict[tuple[int, int], np.ndarray] = {}
    for a, b in tns.lattice.edges:
        x, xinv = _psd_sqrt(msgs[(a, b)])
        y, yinv = _psd_sqrt(msgs[(b, a)])
        u, s, vh, _ = truncated_svd(x.T @ y, 1 << 30)
        ga = xinv.T @ u
        gb = yinv.T @ vh.T
        tensors[a] = np.moveaxis(np.tensordot(tensors[a], ga, axes=(tns.leg(a, b), 0)), -1, tns.leg(a, b))
        tensors[b] = np.moveaxis(np.tensordot(tensors[b], gb, axes=(tns.leg(b, a), 0)), -1, tns.leg(b, a))
        lam = s / np.linalg.norm(s)
        new.lambdas[(a, b)] = lam
        d = np.diag(lam.astype(complex))
        new_msgs[(a, b)] = d / np.trace(d).real
        new_msgs[(b, a)] = d / np.trace(d).real
    new.gammas = tensors  # tensors now carry no edge weights
    return new, MessageSet(new_msgs, list(msgs.residuals))


def local_expectation(tns: GraphTNS, msgs: MessageSet, P: PauliString) -> float:
    """``<P>`` for a Pauli string supported on one site or one edge, with BP environments."""
    sup = P.support
    if len(sup) == 0:
        return float(P.sign.real)
    ops = {s: SINGLE[P.letters[s]] for s in sup}
    if len(sup) == 1:
        a = sup[0]

        def site_value(op):
            ket = tns.site_tensor(a)
            if op is not None:
                ket = np.tensordot(op, ket, axes=(1, 0))
            x = _absorb_incoming(tns, a, ket, msgs.messages, None)
            return np.vdot(tns.site_tensor(a).reshape(-1), x.reshape(-1))

        val = site_value(ops[a]) / site_value(None)
        return float((P.sign * val).real)
    if len(sup) == 2 and tns.lattice.has_edge(*sup):
        a, b = sup

        def half(x: int, y: int, op):
            t = tns.site_tensor(x)
            ket = t if op is None else np.tensordot(op, t, axes=(1, 0))
            return _outgoing(tns, x, y, ket, t, msgs.messages)

        num = np.sum(half(a, b, ops[a]) * half(b, a, ops[b]))
        den = np.sum(half(a, b, None) * half(b, a, None))
        return float((P.sign * num / den).real)
    raise ValueError("local_expectation supports one site or one edge")


def _log_bp_partition(tns: GraphTNS, msgs: MessageSet, ops) -> complex:
    """BP estimate ``log Z = sum_a log z_a - sum_e log z_e``."""
    kets, bras = _sandwich(tns, ops)
    total = 0j
    for a in range(tns.lattice.site_count):
        x = _absorb_incoming(tns, a, kets[a], msgs.messages, None)
        total += cmath.log(np.vdot(bras[a].reshape(-1), x.reshape(-1)))
    for a, b in tns.lattice.edges:
        total -= cmath.log(np.sum(msgs[(a, b)] * msgs[(b, a)]))
    return total


def product_expectation(tns: GraphTNS, P: PauliString, iters: int = 30) -> float:
    """``<P>`` for an arbitrary-weight Pauli string via the BP partition-function ratio."""
    ops = {s: SINGLE[P.letters[s]] for s in P.support}
    norm_msgs = bp_messages(tns, iters)
    if not ops:
        return float(P.sign.real)
    op_msgs = bp_messages(tns, iters, ops=ops)
    ratio = cmath.exp(_log_bp_partition(tns, op_msgs, ops) - _log_bp_partition(tns, norm_msgs, None))
    return float((P.sign * ratio).real)


# ---------------------------------------------------------------------------
# evolution and experiments


def evolve_tns(
    tns: GraphTNS,
    steps: Iterable[Step],
    chi_max: int,
    *,
    regauge_every: int | None = None,
    iters: int = 15,
) -> tuple[GraphTNS, float]:
    """Apply steps in state order. Optionally regauge after every ``regauge_every`` RX layers."""
    worst = 0.0
    kicks = 0
    for step in steps:
        worst = max(worst, apply_step(tns, step, chi_max))
        if isinstance(step, RXStep):
            kicks += 1
            if regauge_every and kicks % regauge_every == 0:
                tns, _ = bp_regauge(tns, iters)
    return tns, worst


def _program(lat: Lattice, theta_J: float, theta_h: float, D: int, flux_bond=None) -> list[Step]:
    spec = CircuitSpec(theta_J, theta_h, D, lat, flux_bond=flux_bond)
    return circuit_program(spec, default_layers(spec, snake_order(lat)))


def echo_value_bp(
    lat: Lattice,
    theta: float,
    D: int,
    chi: int,
    site: int,
    *,
    mode: str = "echo",
    iters: int = 15,
    regauge_every: int | None = 1,
) -> float:
    """Stabilizer echo with BP-TNS.

    ``echo``: forward ``D`` rounds at ``theta``, backward ``D`` rounds at ``pi/2``, all
    with truncation; then ``<Z_site>``. ``forward``: forward rounds only, then the
    depth-``D`` stabilizer is measured directly through the BP partition-function ratio.
    """
    fwd = _program(lat, -math.pi / 2, theta, D)
    tns, _ = evolve_tns(GraphTNS.up(lat), fwd, chi, regauge_every=regauge_every, iters=iters)
    if mode == "echo":
        bwd = inverse_program(_program(lat, -math.pi / 2, math.pi / 2, D))
        tns, _ = evolve_tns(tns, bwd, chi, regauge_every=regauge_every, iters=iters)
        msgs = bp_messages(tns, iters)
        return local_expectation(tns, msgs, PauliString.single(lat.site_count, site, "Z"))
    if mode == "forward":
        from hexmpo.clifford import stabilizer

        return product_expectation(tns, stabilizer(lat, site, D), iters=max(iters, 30))
    raise ValueError(f"unknown echo mode {mode!r}")


@dataclass
class EchoRow:
    theta: float
    depth: int
    bptns: float
    exact: float | None = None
    heisenberg: float | None = None


def stabilizer_echo_experiment(
    theta_grid: Sequence[float],
    D_max: int,
    chi: int,
    *,
    lat: Lattice | None = None,
    site: int | None = None,
    mode: str = "echo",
    iters: int = 15,
    with_exact: bool = True,
    heisenberg_chi: int | None = None,
    depths: Sequence[int] | None = None,
) -> list[EchoRow]:
    """Table of stabilizer-echo values for BP-TNS, optionally with dense and Heisenberg references."""
    from hexmpo.lattice import build_two_hexagon_21

    lat = build_two_hexagon_21() if lat is None else lat
    site = lat.label("detector") if site is None else site
    depths = range(1, D_max + 1) if depths is None else depths
    rows = []
    for theta in theta_grid:
        for D in depths:
            row = EchoRow(theta, D, echo_value_bp(lat, theta, D, chi, site, mode=mode, iters=iters))
            if with_exact:
                from hexmpo.exact import echo_value

                row.exact = echo_value(lat, math.pi / 2, theta, D, site)
            if heisenberg_chi:
                row.heisenberg = heisenberg_echo(lat, theta, D, site, heisenberg_chi)
            rows.append(row)
    return rows


def heisenberg_echo(lat: Lattice, theta: float, D: int, site: int, chi: int) -> float:
    """Stabilizer expectation at ``theta`` from the operator engine."""
    from hexmpo.clifford import stabilizer
    from hexmpo.heisenberg import evolve_operator

    spec = CircuitSpec(-math.pi / 2, theta, D, lat)
    run = evolve_operator(stabilizer(lat, site, D), spec, D, chi, keep="last")
    return run.records[-1].expectation.real


def double_slit_bp_table(
    lat: Lattice, source: int, D_max: int, flux: float, chi: int, *, iters: int = 15,
    regauge_every: int | None = 1, flux_bond=None,
) -> np.ndarray:
    """``<X_j>`` per depth and site for the double-slit circuit on BP-TNS."""
    from hexmpo.exact import DOUBLE_SLIT_THETA_H, DOUBLE_SLIT_THETA_J, flux_bond_of

    threaded = abs(math.remainder(flux, 2 * math.pi)) > 1e-9
    bond = (flux_bond or flux_bond_of(lat)) if threaded else None
    rnd = _program(lat, DOUBLE_SLIT_THETA_J, DOUBLE_SLIT_THETA_H, 1, bond)
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    tns = GraphTNS.product(lat, [minus if a == source else plus for a in range(lat.site_count)])
    n = lat.site_count

    def row(t: GraphTNS) -> np.ndarray:
        msgs = bp_messages(t, iters)
        return np.array([local_expectation(t, msgs, PauliString.single(n, j, "X")) for j in range(n)])

    rows = [row(tns)]
    for _ in range(D_max):
        tns, _ = evolve_tns(tns, rnd, chi, regauge_every=regauge_every, iters=iters)
        rows.append(row(tns))
    return np.array(rows)


def double_slit_experiment(
    flux: float,
    D_max: int,
    chi: int,
    *,
    lat: Lattice | None = None,
    iters: int = 15,
    engines: Sequence[str] = ("exact", "bptns"),
) -> dict[str, np.ndarray]:
    """Per-depth X magnetization tables for the requested engines."""
    from hexmpo.exact import double_slit_table
    from hexmpo.lattice import build_two_hexagon_21

    lat = build_two_hexagon_21() if lat is None else lat
    source = lat.label("source")
    out = {}
    for eng in engines:
        if eng == "exact":
            out[eng] = double_slit_table(lat, source, D_max, flux)
        elif eng == "bptns":
            out[eng] = double_slit_bp_table(lat, source, D_max, flux, chi, iters=iters)
        else:
            raise ValueError(f"unknown engine {eng!r}")
    return out
