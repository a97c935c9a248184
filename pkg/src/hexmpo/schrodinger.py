"""Pure-state MPS evolution, forward-backward echoes and fidelity extrapolation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from hexmpo.circuits import (
    CircuitSpec,
    Step,
    ZZStep,
    circuit_program,
    compile_step,
    default_layers,
    inverse_program,
    is_trivial,
    restrict_state_program,
)
from hexmpo.lattice import Lattice, SnakeOrder, snake_order
from hexmpo.pauli import SINGLE, PauliString
from hexmpo.tensortrain import (
    CompressionOptions,
    FidelityLog,
    TensorTrain,
    apply_layer,
    canonicalize,
    compress_two_site,
    overlap,
)

UP = np.array([1.0, 0.0])


def up_train(n: int) -> TensorTrain:
    return TensorTrain.product([UP] * n)


def _support(observable: int | Iterable[int] | None) -> set[int] | None:
    if observable is None:
        return None
    if isinstance(observable, (int, np.integer)):
        return {int(observable)}
    return set(observable)


def run_state_program(
    psi: TensorTrain,
    steps: Sequence[Step],
    order: SnakeOrder,
    chi_max: int,
    options: CompressionOptions = CompressionOptions(),
    fidelity: FidelityLog | None = None,
) -> tuple[TensorTrain, FidelityLog]:
    """Apply state-order steps, compressing and renormalizing after every ZZ layer."""
    fidelity = FidelityLog() if fidelity is None else fidelity
    n = len(psi)
    for step in steps:
        if is_trivial(step):
            continue
        psi = apply_layer(psi, compile_step(step, False, n, order))
        if isinstance(step, ZZStep):
            psi, eps, f = compress_two_site(psi, chi_max, options=options)
            fidelity.record(eps, f, chi_max)
            psi = canonicalize(psi, 0)
            psi.log_norm = 0.0
    return psi, fidelity


def _program(spec: CircuitSpec, order: SnakeOrder) -> list[Step]:
    return circuit_program(spec, default_layers(spec, order))


def evolve_state(
    spec: CircuitSpec,
    D: int | None = None,
    chi_max: int = 64,
    *,
    observable: int | Iterable[int] | None = None,
    initial: TensorTrain | None = None,
    options: CompressionOptions = CompressionOptions(),
) -> tuple[TensorTrain, FidelityLog]:
    """MPS after ``D`` rounds from ``|up^N>`` (or ``initial``).

    With ``observable`` (a site or set of sites) only gates in its past lightcone are
    applied; expectations of that observable are unchanged.
    """
    spec = spec if D is None else spec.with_(depth=D)
    order = snake_order(spec.lattice)
    steps = _program(spec, order)
    sup = _support(observable)
    if sup is not None:
        steps = restrict_state_program(steps, sup)
    psi = up_train(spec.n_sites) if initial is None else initial
    return run_state_program(psi, steps, order, chi_max, options)


def echo_state(
    lat: Lattice,
    theta_forward: float,
    theta_backward: float,
    D: int,
    chi_max: int,
    *,
    theta_J: float = -math.pi / 2,
    observable: int | Iterable[int] | None = None,
    options: CompressionOptions = CompressionOptions(),
) -> tuple[TensorTrain, FidelityLog]:
    """``[U^dagger(theta_backward)]^D U(theta_forward)^D |up>`` with truncation at every layer."""
    order = snake_order(lat)
    fwd = _program(CircuitSpec(theta_J, theta_forward, D, lat), order)
    bwd = inverse_program(_program(CircuitSpec(theta_J, theta_backward, D, lat), order))
    steps = fwd + bwd
    sup = _support(observable)
    if sup is not None:
        steps = restrict_state_program(steps, sup)
    return run_state_program(up_train(lat.site_count), steps, order, chi_max, options)


def forward_backward(
    theta: float,
    D: int,
    chi_max: int,
    lat: Lattice | None = None,
    *,
    observable: int | Iterable[int] | None = None,
    options: CompressionOptions = CompressionOptions(),
) -> TensorTrain:
    """Forward ``D`` rounds at ``theta`` then backward ``D`` rounds at ``pi/2``."""
    from hexmpo.lattice import build_two_hexagon_21

    lat = build_two_hexagon_21() if lat is None else lat
    psi, _ = echo_state(lat, theta, math.pi / 2, D, chi_max, observable=observable,
                        options=options)
    return psi


def apply_pauli_train(psi: TensorTrain, order: SnakeOrder, P: PauliString) -> TensorTrain:
    out = psi.copy()
    for s, c in enumerate(P.letters):
        if c != "I":
            k = order.position[s]
            out.tensors[k] = np.einsum("ij,ljr->lir", SINGLE[c], out.tensors[k])
    out.tensors[0] = out.tensors[0] * P.sign
    out.center = None
    return out


def expect_pauli_state(psi: TensorTrain, order: SnakeOrder, P: PauliString) -> float:
    num = overlap(psi, apply_pauli_train(psi, order, P))
    return float((num / overlap(psi, psi)).real)


def expect_z(psi: TensorTrain, order: SnakeOrder, site: int) -> float:
    return expect_pauli_state(psi, order, PauliString.single(len(psi), site, "Z"))


def state_to_dense(psi: TensorTrain, order: SnakeOrder) -> np.ndarray:
    """Dense amplitudes with lattice site 0 as the most significant bit."""
    n = len(psi)
    v = psi.to_dense().reshape([2] * n)
    return v.transpose([order.position[s] for s in range(n)]).reshape(-1)


# ---------------------------------------------------------------------------
# extrapolation


class ExtrapolationError(ValueError):
    """Raised when a fidelity extrapolation is ill-posed."""


class NonMonotonicWarning(UserWarning):
    """Values do not change monotonically with bond dimension."""


@dataclass
class ExtrapolationFit:
    """Least-squares fit ``value = a * log(F) + b`` over the three largest-chi points."""

    points: list[tuple[float, float, int]]
    a: float
    b: float
    residual: float
    monotonic: bool
    forced: bool = False

    @property
    def extrapolated(self) -> float | None:
        """Value at ``F = 1``; None when the points are non-monotonic and not forced."""
        if self.monotonic or self.forced:
            return self.b
        return None

    @property
    def quality(self) -> str:
        return "ok" if self.monotonic else ("forced-non-monotonic" if self.forced else "non-monotonic")


def extrapolate_fidelity(
    points: Sequence[tuple[float, float, int]], force: bool = False
) -> ExtrapolationFit:
    """Fit ``value = a log(F) + b`` to ``(F, value, chi)`` triples.

    Args:
        points: at least three triples with ``0 < F <= 1``.
        force: report the extrapolated value even for non-monotonic data.
    """
    pts = [(float(F), float(v), int(chi)) for F, v, chi in points]
    if len(pts) < 3:
        raise ExtrapolationError(f"need at least 3 points, got {len(pts)}")
    if any(not (F > 0) or F > 1 + 1e-12 for F, _, _ in pts):
        raise ExtrapolationError("fidelities must lie in (0, 1]")
    top = sorted(pts, key=lambda p: p[2])[-3:]
    logf = np.array([math.log(F) for F, _, _ in top])
    vals = np.array([v for _, v, _ in top])
    if np.ptp(logf) == 0:
        raise ExtrapolationError("the three largest-chi points share one fidelity")
    A = np.column_stack([logf, np.ones_like(logf)])
    (a, b), *_ = np.linalg.lstsq(A, vals, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([a, b]) - vals) ** 2)))
    diffs = np.diff(vals)
    monotonic = bool(np.all(diffs >= -1e-15) or np.all(diffs <= 1e-15))
    if not monotonic:
        warnings.warn("values are non-monotonic in chi; extrapolation is unreliable",
                      NonMonotonicWarning, stacklevel=2)
    return ExtrapolationFit(top, float(a), float(b), resid, monotonic, force)
