"""Exact Pauli-string evolution at Clifford angles.

A rotation ``g = exp(-i theta Q / 2)`` with ``theta = k pi / 2`` maps Pauli strings to
Pauli strings. For ``P`` anticommuting with ``Q``:

* Heisenberg rule ``g^dagger P g = (cos theta + i sin theta Q) P``
* forward rule ``g P g^dagger = (cos theta - i sin theta Q) P``

and ``P`` is unchanged otherwise. With the forward rule at ``theta_h = pi/2`` a single
site cycles ``Z -> -Y -> -Z -> Y -> Z``, while ``Y -> Z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from hexmpo.circuits import CircuitSpec, RXStep, Step, ZZStep, build_round, circuit_program
from hexmpo.lattice import Lattice, lightcone
from hexmpo.pauli import SINGLE, PauliString


class NonCliffordError(ValueError):
    """Raised when an angle is not a multiple of pi/2."""


def quarter_turns(theta: float, atol: float = 1e-12) -> int:
    """``k mod 4`` for ``theta = k pi / 2``; raises for any other angle."""
    k = theta / (math.pi / 2)
    r = round(k)
    if abs(k - r) > atol:
        raise NonCliffordError(f"angle {theta!r} is not a multiple of pi/2")
    return r % 4


def conjugate_rotation(P: PauliString, Q: PauliString, theta: float, heisenberg: bool = True) -> PauliString:
    """Conjugate ``P`` by ``exp(-i theta Q / 2)`` (Heisenberg or forward)."""
    k = quarter_turns(theta)
    if k == 0 or P.commutes(Q):
        return P
    if k == 2:
        return -P
    sin = 1 if k == 1 else -1
    if not heisenberg:
        sin = -sin
    return (Q * P).scaled(1 if sin == 1 else 3)


def _zz(n: int, a: int, b: int) -> PauliString:
    return PauliString.from_sites(n, {a: "Z", b: "Z"})


def _apply_step(P: PauliString, step: Step, heisenberg: bool) -> PauliString:
    n = len(P)
    if isinstance(step, ZZStep):
        for (a, b), ang in zip(step.layer.bonds, step.angles):
            P = conjugate_rotation(P, _zz(n, a, b), ang, heisenberg)
        return P
    sites = range(n) if step.sites is None else step.sites
    for s in sites:
        sign = 1 if step.signs is None else step.signs[s]
        P = conjugate_rotation(P, PauliString.single(n, s, "X"), sign * step.theta, heisenberg)
    return P


def _check_spec(spec: CircuitSpec) -> None:
    quarter_turns(spec.theta_J)
    quarter_turns(spec.theta_h)


def conjugate_by_round(P: PauliString, spec: CircuitSpec, heisenberg: bool = True) -> PauliString:
    """Conjugate by one round: ``U^dagger P U`` (Heisenberg) or ``U P U^dagger``."""
    _check_spec(spec)
    steps = build_round(spec).steps
    for step in (reversed(steps) if heisenberg else steps):
        P = _apply_step(P, step, heisenberg)
    return P


def evolve_string(P: PauliString, spec: CircuitSpec, heisenberg: bool = True) -> PauliString:
    """Conjugate through the full program of ``spec`` (``depth`` rounds and any extras)."""
    _check_spec(spec)
    steps = circuit_program(spec)
    for step in (reversed(steps) if heisenberg else steps):
        P = _apply_step(P, step, heisenberg)
    return P


def heisenberg_trace(P: PauliString, spec: CircuitSpec) -> list[PauliString]:
    """``[O(0), O(1), ..., O(depth)]`` with ``O(D) = U^dagger^D P U^D``."""
    out = [P]
    for _ in range(spec.depth):
        out.append(conjugate_by_round(out[-1], spec, heisenberg=True))
    return out


def _clifford_spec(lat: Lattice, D: int, theta_J: float, theta_h: float) -> CircuitSpec:
    return CircuitSpec(theta_J=theta_J, theta_h=theta_h, depth=D, lattice=lat)


def stabilizer(
    lat: Lattice, site: int, D: int, theta_J: float = -math.pi / 2, theta_h: float = math.pi / 2
) -> PauliString:
    """``U^D Z_site U^dagger^D``: the string whose expectation after ``D`` rounds is 1."""
    if D < 0:
        raise ValueError("D must be >= 0")
    spec = _clifford_spec(lat, D, theta_J, theta_h)
    P = PauliString.single(lat.site_count, site, "Z")
    for _ in range(D):
        P = conjugate_by_round(P, spec, heisenberg=False)
    return P


def modified_stabilizer(lat: Lattice, site: int, D: int) -> PauliString:
    """``R_X(pi/2) [U^D Z_site U^dagger^D] R_X(pi/2)^dagger`` (one extra kick at the end)."""
    P = stabilizer(lat, site, D)
    return _apply_step(P, RXStep(math.pi / 2), heisenberg=False)


def support_growth(
    lat: Lattice,
    site: int,
    D_max: int,
    theta_J: float = -math.pi / 2,
    theta_h: float = math.pi / 2,
) -> list[int]:
    """Support size of ``U^dagger^D Z_site U^D`` for ``D = 0..D_max``."""
    spec = _clifford_spec(lat, D_max, theta_J, theta_h)
    return [p.weight for p in heisenberg_trace(PauliString.single(lat.site_count, site), spec)]


def growth_within_lightcone(lat: Lattice, site: int, D_max: int) -> bool:
    spec = _clifford_spec(lat, D_max, -math.pi / 2, math.pi / 2)
    trace = heisenberg_trace(PauliString.single(lat.site_count, site), spec)
    return all(set(p.support) <= lightcone(lat, site, d) for d, p in enumerate(trace))


# ---------------------------------------------------------------------------
# S operators and the commutation identity


@dataclass(frozen=True)
class SOperator:
    site: int
    neighbors: tuple[int, ...]
    string: PauliString

    def power(self, n: int) -> PauliString:
        return self.string ** n


def s_operator(lat: Lattice, a: int) -> SOperator:
    """``S_a = prod_{b in NN(a)} (i Z_a Z_b)`` as a phase-tracked string."""
    nbrs = tuple(lat.neighbors(a))
    out = PauliString.identity(lat.site_count)
    for b in nbrs:
        out = out * _zz(lat.site_count, a, b).scaled(1)
    return SOperator(a, nbrs, out)


MAX_DENSE_SITES = 12


def pauli_sparse(P: PauliString) -> sp.csr_matrix:
    """Sparse ``2**N`` matrix of a Pauli string, phase included. Site 0 is the top bit."""
    out = sp.identity(1, dtype=complex, format="csr")
    for c in P.letters:
        out = sp.kron(out, sp.csr_matrix(SINGLE[c]), format="csr")
    return P.sign * out


def zz_diagonal(lat: Lattice, theta_J: float) -> np.ndarray:
    """Diagonal of ``prod_bonds exp(-i theta_J Z Z / 2)``."""
    n = lat.site_count
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    z = 1 - 2 * bits
    phase = np.zeros(2**n)
    for a, b in lat.edges:
        phase += z[:, a] * z[:, b]
    return np.exp(-0.5j * theta_J * phase)


def pauli_exp(P: PauliString, x: complex) -> sp.csr_matrix:
    """``exp(x P)`` for a Pauli string, using ``P^2 = +-1``."""
    M = pauli_sparse(P)
    n = 2 ** len(P)
    sq = (P * P).sign  # +1 or -1 times identity
    eye = sp.identity(n, dtype=complex, format="csr")
    if sq == 1:
        return (np.cosh(x) * eye + np.sinh(x) * M).tocsr()
    return (np.cos(x) * eye + np.sin(x) * M).tocsr()


def verify_commutation(
    lat: Lattice, a: int, theta_h: float, n: int, theta_J: float = -math.pi / 2
) -> float:
    """Max-norm deviation between ``R_ZZ^n e^{-i theta X_a/2}`` and ``e^{-i theta X_a S_a^n/2} R_ZZ^n``."""
    if lat.site_count > MAX_DENSE_SITES:
        raise ValueError(f"dense check limited to {MAX_DENSE_SITES} sites, got {lat.site_count}")
    N = lat.site_count
    rzz_n = sp.diags(zz_diagonal(lat, theta_J) ** n, format="csr")
    xa = PauliString.single(N, a, "X")
    lhs = rzz_n @ pauli_exp(xa, -0.5j * theta_h)
    rhs = pauli_exp(xa * s_operator(lat, a).power(n), -0.5j * theta_h) @ rzz_n
    diff = (lhs - rhs).tocoo()
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0


def up_expectation(P: PauliString) -> float:
    """``<up^N| P |up^N>`` in closed form (real for Hermitian strings)."""
    v = P.up_expectation()
    return float(np.real(v))


def letter_counts(P: PauliString) -> dict[str, int]:
    return P.counts()


def strings_equal_up_to_sites(P: PauliString, Q: PauliString, sites: Sequence[int]) -> bool:
    return all(P.letters[s] == Q.letters[s] for s in sites)
