"""Dense statevector oracle for up to 24 qubits.

Amplitudes are stored as an array of shape ``(2,) * N`` with site ``k`` on axis ``k``
(site 0 is the most significant bit of the flat index). ZZ layers multiply by a
broadcast diagonal phase; single-site gates contract one axis.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hexmpo.circuits import (
    CircuitSpec,
    RXStep,
    Step,
    ZZStep,
    circuit_program,
    inverse_program,
    rx_matrix,
)
from hexmpo.lattice import Lattice
from hexmpo.pauli import SINGLE, PauliString

MAX_QUBITS = 24
NORM_TOL = 1e-10


class TooLargeError(ValueError):
    """Raised when a dense simulation would exceed the qubit ceiling."""


@dataclass
class StateVector:
    amplitudes: np.ndarray  # shape (2,) * n

    @property
    def n(self) -> int:
        return self.amplitudes.ndim

    @classmethod
    def product(cls, vectors: Sequence[np.ndarray]) -> StateVector:
        n = len(vectors)
        if n > MAX_QUBITS:
            raise TooLargeError(f"{n} qubits exceeds the dense ceiling of {MAX_QUBITS}")
        out = np.ones((), dtype=complex)
        for v in vectors:
            out = np.multiply.outer(out, np.asarray(v, dtype=complex))
        return cls(out)

    @classmethod
    def up(cls, n: int) -> StateVector:
        return cls.product([np.array([1, 0])] * n)

    @classmethod
    def plus(cls, n: int) -> StateVector:
        return cls.product([np.array([1, 1]) / math.sqrt(2)] * n)

    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy())


def apply_single(psi: StateVector, site: int, g: np.ndarray) -> StateVector:
    a = np.tensordot(g, psi.amplitudes, axes=(1, site))
    return StateVector(np.moveaxis(a, 0, site))


def _z_signs(n: int, site: int) -> np.ndarray:
    shape = [1] * n
    shape[site] = 2
    return np.array([1.0, -1.0]).reshape(shape)


def zz_phase(n: int, bonds: Sequence[tuple[int, int]], angles: Sequence[float]) -> np.ndarray:
    """Broadcast diagonal of ``prod exp(-i angle Z_a Z_b / 2)``."""
    return _zz_phase_cached(n, tuple(bonds), tuple(float(a) for a in angles))


@lru_cache(maxsize=4)
def _zz_phase_cached(n: int, bonds: tuple, angles: tuple) -> np.ndarray:
    total = np.zeros([2] * n)
    for (a, b), ang in zip(bonds, angles):
        total = total + ang * (_z_signs(n, a) * _z_signs(n, b))
    return np.exp(-0.5j * total)


def apply_step(psi: StateVector, step) -> StateVector:
    n = psi.n
    if isinstance(step, ZZStep):
        step = _Diagonal(step.layer.bonds, step.angles)
    if isinstance(step, _Diagonal):
        if not step.bonds:
            return psi
        return StateVector(psi.amplitudes * zz_phase(n, step.bonds, step.angles))
    sites = range(n) if step.sites is None else step.sites
    for s in sites:
        sign = 1 if step.signs is None else step.signs[s]
        psi = apply_single(psi, s, rx_matrix(sign * step.theta))
    return psi


def run_program(psi: StateVector, steps: Sequence[Step], check_norm: bool = True) -> StateVector:
    for step in steps:
        psi = apply_step(psi, step)
        if check_norm and abs(psi.norm() - 1.0) > NORM_TOL:
            raise FloatingPointError(f"norm drifted to {psi.norm()!r}")
    return psi


@dataclass(frozen=True)
class _Diagonal:
    bonds: tuple[tuple[int, int], ...]
    angles: tuple[float, ...]


def _merged(steps: Sequence[Step]) -> list:
    """Merge consecutive ZZ steps into one diagonal (they commute)."""
    out: list = []
    for step in steps:
        if isinstance(step, ZZStep):
            if out and isinstance(out[-1], _Diagonal):
                prev = out.pop()
                out.append(_Diagonal(prev.bonds + step.layer.bonds, prev.angles + step.angles))
            else:
                out.append(_Diagonal(step.layer.bonds, step.angles))
        else:
            out.append(step)
    return out


def evolve(psi: StateVector, spec: CircuitSpec) -> StateVector:
    """Apply the full program of ``spec`` gate by gate."""
    if spec.n_sites > MAX_QUBITS:
        raise TooLargeError(f"{spec.n_sites} qubits exceeds the dense ceiling of {MAX_QUBITS}")
    return run_program(psi, _merged(circuit_program(spec)))


def evolve_inverse(psi: StateVector, spec: CircuitSpec) -> StateVector:
    """Apply the inverse of the full program of ``spec``."""
    if spec.n_sites > MAX_QUBITS:
        raise TooLargeError(f"{spec.n_sites} qubits exceeds the dense ceiling of {MAX_QUBITS}")
    return run_program(psi, _merged(inverse_program(circuit_program(spec))))


def apply_pauli(psi: StateVector, P: PauliString) -> StateVector:
    for k, c in enumerate(P.letters):
        if c != "I":
            psi = apply_single(psi, k, SINGLE[c])
    return StateVector(psi.amplitudes * P.sign)


def expect_pauli(psi: StateVector, P: PauliString) -> float:
    """``<psi|P|psi>`` for a Hermitian string."""
    if not P.is_hermitian:
        raise ValueError("expectation requested for a non-Hermitian string")
    v = np.vdot(psi.amplitudes, apply_pauli(psi.copy(), P).amplitudes)
    return float(v.real)


def magnetization(psi: StateVector, letter: str = "Z") -> np.ndarray:
    """``<sigma_k>`` on every site for ``letter`` in X, Y, Z."""
    if letter not in "XYZ":
        raise ValueError(f"unknown Pauli letter {letter!r}")
    out = np.empty(psi.n)
    for k in range(psi.n):
        a = np.moveaxis(psi.amplitudes, k, 0).reshape(2, -1)
        if letter == "Z":
            out[k] = np.vdot(a[0], a[0]).real - np.vdot(a[1], a[1]).real
        elif letter == "X":
            out[k] = 2 * np.vdot(a[0], a[1]).real
        else:
            out[k] = 2 * np.vdot(a[0], a[1]).imag
    return out


def expect_z_after(spec: CircuitSpec, site: int) -> float:
    """``<up| U^dagger^D Z_site U^D |up>`` for the circuit of ``spec``."""
    psi = evolve(StateVector.up(spec.n_sites), spec)
    return expect_pauli(psi, PauliString.single(spec.n_sites, site, "Z"))


def z_trace(spec: CircuitSpec, site: int) -> list[float]:
    """``<Z_site(D)>`` for ``D = 0..depth`` in one pass (standard variants only)."""
    n = spec.n_sites
    psi = StateVector.up(n)
    rnd = _merged(circuit_program(spec.with_(depth=1, variant="standard")))
    z = PauliString.single(n, site, "Z")
    out = [expect_pauli(psi, z)]
    for _ in range(spec.depth):
        psi = run_program(psi, rnd)
        out.append(expect_pauli(psi, z))
    return out


def echo_state(spec_forward: CircuitSpec, spec_backward: CircuitSpec) -> StateVector:
    """``[U^dagger(backward)]^D U(forward)^D |up>``."""
    psi = evolve(StateVector.up(spec_forward.n_sites), spec_forward)
    return evolve_inverse(psi, spec_backward)


def echo_value(lat: Lattice, theta: float, theta_prime: float, D: int, site: int,
               theta_J: float = -math.pi / 2) -> float:
    """``Z_site(D | theta, theta')``: ``<Z>`` in ``U^dagger(theta)^D U(theta')^D |up>``."""
    fwd = CircuitSpec(theta_J, theta_prime, D, lat)
    bwd = CircuitSpec(theta_J, theta, D, lat)
    return expect_pauli(echo_state(fwd, bwd), PauliString.single(lat.site_count, site, "Z"))


# ---------------------------------------------------------------------------
# double slit

DOUBLE_SLIT_THETA_J = -math.pi / 4
DOUBLE_SLIT_THETA_H = math.pi / 2


def flux_bond_of(lat: Lattice) -> tuple[int, int]:
    a, b = lat.label("flux_a"), lat.label("flux_b")
    return (min(a, b), max(a, b))


def double_slit_spec(lat: Lattice, flux: float, D: int = 1, flux_bond=None) -> CircuitSpec:
    """``V = U(-pi/4, pi/2)`` with the flux bond negated when ``flux = pi``."""
    threaded = abs(math.remainder(flux, 2 * math.pi)) > 1e-9
    bond = (flux_bond or flux_bond_of(lat)) if threaded else None
    return CircuitSpec(DOUBLE_SLIT_THETA_J, DOUBLE_SLIT_THETA_H, D, lat, flux_bond=bond)


def double_slit_table(
    lat: Lattice, source: int, D_max: int, flux: float, flux_bond=None
) -> np.ndarray:
    """``C_{source, j}(D)`` for every site ``j`` and ``D = 0..D_max``; shape ``(D_max+1, N)``.

    ``C_ij(D) = <-> | Z_i V^dagger^D X_j V^D Z_i | ->`` with ``|->`` the all-plus state.
    """
    spec = double_slit_spec(lat, flux, 1, flux_bond)
    n = lat.site_count
    psi = apply_single(StateVector.plus(n), source, SINGLE["Z"])
    rnd = _merged(circuit_program(spec))
    rows = [magnetization(psi, "X")]
    for _ in range(D_max):
        psi = run_program(psi, rnd)
        rows.append(magnetization(psi, "X"))
    return np.array(rows)


def double_slit(lat: Lattice, i: int, j: int, D: int, flux: float, flux_bond=None) -> float:
    """Single correlator ``C_ij(D)``."""
    return float(double_slit_table(lat, i, D, flux, flux_bond)[D, j])
