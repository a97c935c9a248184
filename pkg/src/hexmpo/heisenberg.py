"""Heisenberg-picture evolution of vectorized operators.

``O(D) = U^dagger^D O U^D`` is built by replaying each round backwards, one compiled
conjugation layer at a time, with two-site variational compression after every ZZ
layer. RX layers have bond dimension 1 and are applied without compression. Gates
outside the operator's current lightcone are dropped, so sites outside it stay exact
identity tensors.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from hexmpo.circuits import (
    CircuitSpec,
    RXStep,
    ZZStep,
    build_round,
    compile_step,
    default_layers,
    is_trivial,
    restrict_heisenberg,
)
from hexmpo.lattice import SnakeOrder, snake_order
from hexmpo.pauli import SINGLE, PauliString
from hexmpo.tensortrain import (
    CompressionOptions,
    FidelityLog,
    TensorTrain,
    apply_layer,
    canonicalize,
    compress_two_site,
    load_checkpoint,
    max_oee,
    save_checkpoint,
)

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
ZZ_DOUBLED = np.array([1.0, -1.0, -1.0, 1.0])  # Z (x) Z on the fused index


def pauli_vector(letter: str) -> np.ndarray:
    """``vec(sigma) / sqrt(2)`` on the fused index ``2 * ket + bra``."""
    return SINGLE[letter].reshape(-1) / _SQRT2


def pauli_train(P: PauliString, order: SnakeOrder) -> TensorTrain:
    """Unit-norm operator train of a Pauli string, sites laid out along ``order``."""
    vecs = [pauli_vector(P.letters[s]) for s in order.site]
    tt = TensorTrain.product(vecs)
    tt.tensors[0] = tt.tensors[0] * P.sign
    return tt


def operator_to_dense(tt: TensorTrain, order: SnakeOrder) -> np.ndarray:
    """Dense ``2**N x 2**N`` operator (site 0 most significant). Small trains only."""
    n = len(tt)
    v = tt.to_dense().reshape([2, 2] * n)  # (k_p0, b_p0, k_p1, b_p1, ...) in 1D order
    ket_axes = [2 * order.position[s] for s in range(n)]
    bra_axes = [2 * order.position[s] + 1 for s in range(n)]
    m = v.transpose(ket_axes + bra_axes).reshape(2**n, 2**n)
    return m * 2 ** (n / 2)


def expect_up_train(tt: TensorTrain) -> complex:
    """``<up^N| O |up^N>``: contract every site with fused index 0 (ket 0, bra 0)."""
    env = np.ones(1, dtype=complex)
    for t in tt.tensors:
        env = env @ t[:, 0, :] * _SQRT2
    return complex(env[0]) * math.exp(tt.log_norm)


def otoc_profile_train(tt: TensorTrain, order: SnakeOrder) -> dict[int, float]:
    """Infinite-temperature OTOC ``<O|Z_x O Z_x>/<O|O>`` for every site ``x``."""
    c = canonicalize(tt, 0)
    ts = list(c.tensors)
    out: dict[int, float] = {}
    for k in range(len(ts)):
        t = ts[k]
        w = np.abs(t) ** 2
        total = w.sum()
        out[order.site[k]] = float((w * ZZ_DOUBLED[None, :, None]).sum() / total) if total > 0 else 1.0
        if k + 1 < len(ts):
            l, d, r = t.shape
            q, rr = np.linalg.qr(t.reshape(l * d, r))
            ts[k] = q.reshape(l, d, -1)
            ts[k + 1] = np.tensordot(rr, ts[k + 1], axes=(1, 0))
    return out


@dataclass
class DepthRecord:
    depth: int
    expectation: complex
    oee: float | None
    F: float
    max_bond: int
    support: int
    seconds: float


@dataclass
class HeisenbergRun:
    """Result of :func:`evolve_operator`.

    ``trains`` maps depth to the operator train (or a checkpoint path when spilled).
    """

    initial: PauliString
    spec: CircuitSpec
    chi_max: int
    order: SnakeOrder
    trains: dict[int, TensorTrain | Path] = field(default_factory=dict)
    fidelity: FidelityLog = field(default_factory=FidelityLog)
    records: list[DepthRecord] = field(default_factory=list)
    supports: list[set[int]] = field(default_factory=list)

    def train(self, depth: int) -> TensorTrain:
        if depth not in self.trains:
            raise KeyError(f"no checkpoint stored for depth {depth}")
        t = self.trains[depth]
        return load_checkpoint(t) if isinstance(t, Path) else t

    @property
    def final(self) -> TensorTrain:
        return self.train(max(self.trains))

    def expectations(self) -> list[float]:
        return [r.expectation.real for r in self.records]

    def oee(self) -> list[float | None]:
        return [r.oee for r in self.records]

    def round_seconds(self) -> list[float]:
        return [r.seconds for r in self.records[1:]]


def evolve_operator(
    P: PauliString,
    spec: CircuitSpec,
    D: int | None = None,
    chi_max: int = 64,
    *,
    options: CompressionOptions = CompressionOptions(),
    lightcone: bool = True,
    keep: str | Iterable[int] = "all",
    spill_dir: str | Path | None = None,
    measure_oee: bool = False,
) -> HeisenbergRun:
    """Evolve ``P`` through ``D`` rounds (default ``spec.depth``) in the Heisenberg picture.

    Args:
        P: initial Pauli string (lattice site indexing).
        spec: circuit; ``extra_final_rx`` conjugates by the trailing RX layer first.
        D: number of rounds.
        chi_max: bond dimension cap.
        options: compression sweep controls.
        lightcone: drop gates acting trivially on the evolving operator.
        keep: ``"all"``, ``"last"`` or explicit depths whose trains are stored.
        spill_dir: if given, stored trains are written there as checkpoints.
        measure_oee: record the maximal operator entanglement entropy per depth.
    """
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    D = spec.depth if D is None else D
    lat = spec.lattice
    n = lat.site_count
    order = snake_order(lat)
    layers = default_layers(spec, order)
    steps_round = list(reversed(build_round(spec, layers).steps))
    if keep == "all":
        keep_set = set(range(D + 1))
    elif keep == "last":
        keep_set = {D}
    else:
        keep_set = set(keep)
    spill = Path(spill_dir) if spill_dir is not None else None
    if spill is not None:
        spill.mkdir(parents=True, exist_ok=True)

    run = HeisenbergRun(P, spec, chi_max, order)
    tt = pauli_train(P, order)
    support = set(P.support) if lightcone else set(range(n))

    def store(depth: int, seconds: float) -> None:
        oee = max_oee(tt) if measure_oee else None
        run.records.append(
            DepthRecord(depth, expect_up_train(tt), oee, run.fidelity.cumulative,
                        tt.max_bond, len(support), seconds)
        )
        run.supports.append(set(support))
        if depth in keep_set:
            if spill is not None:
                path = spill / f"depth{depth:03d}.tt"
                save_checkpoint(tt, path)
                run.trains[depth] = path
            else:
                run.trains[depth] = tt.copy()

    def apply(steps) -> None:
        nonlocal tt, support
        if lightcone:
            steps, trace = restrict_heisenberg(steps, support)
            support = trace[-1] if trace else support
        for step in steps:
            if is_trivial(step):
                continue
            layer = compile_step(step, True, n, order)
            tt = apply_layer(tt, layer)
            if isinstance(step, ZZStep):
                tt, eps, f = compress_two_site(tt, chi_max, options=options)
                run.fidelity.record(eps, f, chi_max)

    # the trailing kick of extra_final_rx is the first conjugation
    if spec.variant == "extra_final_rx":
        apply([RXStep(spec.theta_h)])
    store(0, 0.0)
    for d in range(1, D + 1):
        t0 = time.perf_counter()
        apply(steps_round)
        tt = canonicalize(tt, 0)
        store(d, time.perf_counter() - t0)
        log.info("depth %d: chi=%d F=%.6g", d, tt.max_bond, run.fidelity.cumulative)
    return run


def expect_up(run: HeisenbergRun, depth: int) -> float:
    """``<up^N| O(depth) |up^N>``."""
    for r in run.records:
        if r.depth == depth:
            return r.expectation.real
    return expect_up_train(run.train(depth)).real


def otoc_profile(run: HeisenbergRun, depth: int) -> dict[int, float]:
    return otoc_profile_train(run.train(depth), run.order)


def otoc(run: HeisenbergRun, depth: int, x: int) -> float:
    """``C(depth, x) = <Z_x O Z_x O>`` normalized by ``<O O>``."""
    return otoc_profile(run, depth)[x]


def modified_weight17(
    theta_h: float,
    chi_max: int,
    lat=None,
    site: int | None = None,
    D: int = 5,
    options: CompressionOptions = CompressionOptions(),
) -> HeisenbergRun:
    """Depth-``D`` circuit plus a trailing kick, measuring the kicked stabilizer."""
    from hexmpo.clifford import modified_stabilizer
    from hexmpo.lattice import build_eagle_127

    lat = build_eagle_127() if lat is None else lat
    site = lat.label("weight17_site") if site is None else site
    P = modified_stabilizer(lat, site, D)
    spec = CircuitSpec(-math.pi / 2, theta_h, D, lat, variant="extra_final_rx")
    return evolve_operator(P, spec, D, chi_max, options=options, keep="last")


def echo_observable(
    theta: float,
    theta_prime: float,
    D: int,
    i: int,
    chi_max: int,
    lat=None,
    theta_J: float = -math.pi / 2,
    options: CompressionOptions = CompressionOptions(),
) -> float:
    """``Z_i(D | theta, theta')`` evaluated on the state ``U^dagger(theta)^D U(theta')^D |up>``."""
    from hexmpo.lattice import build_two_hexagon_21
    from hexmpo.schrodinger import echo_state, expect_z

    lat = build_two_hexagon_21() if lat is None else lat
    psi, _ = echo_state(lat, theta_prime, theta, D, chi_max, theta_J=theta_J, observable=i,
                        options=options)
    return expect_z(psi, snake_order(lat), i)
