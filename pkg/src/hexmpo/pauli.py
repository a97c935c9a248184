"""Signed Pauli strings with exact phase tracking.

A string is ``i**phase * P_0 P_1 ... P_{n-1}`` with letters ``I, X, Y, Z``. Phases live
in Z4 and are never represented by floating point numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

LETTERS = "IXYZ"
_CODE = {c: k for k, c in enumerate(LETTERS)}

# single-site products a*b = i**_MUL_PHASE[a,b] * _MUL_LETTER[a,b]
_MUL_LETTER = np.zeros((4, 4), dtype=np.int8)
_MUL_PHASE = np.zeros((4, 4), dtype=np.int8)


def _fill_tables() -> None:
    # XY = iZ, YZ = iX, ZX = iY
    cyc = {(1, 2): 3, (2, 3): 1, (3, 1): 2}
    for a in range(4):
        for b in range(4):
            if a == 0 or b == 0:
                _MUL_LETTER[a, b] = a or b
            elif a == b:
                _MUL_LETTER[a, b] = 0
            elif (a, b) in cyc:
                _MUL_LETTER[a, b] = cyc[(a, b)]
                _MUL_PHASE[a, b] = 1
            else:
                _MUL_LETTER[a, b] = cyc[(b, a)]
                _MUL_PHASE[a, b] = 3


_fill_tables()

_PHASE_TEXT = {0: "+1", 1: "+i", 2: "-1", 3: "-i"}
_TEXT_PHASE = {v: k for k, v in _PHASE_TEXT.items()}


@dataclass(frozen=True)
class PauliString:
    phase: int
    letters: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", self.phase % 4)
        if any(c not in _CODE for c in self.letters):
            raise ValueError(f"invalid Pauli letters in {self.letters!r}")

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(0, "I" * n)

    @classmethod
    def from_sites(cls, n: int, ops: Mapping[int, str], phase: int = 0) -> PauliString:
        buf = ["I"] * n
        for site, op in ops.items():
            buf[site] = op
        return cls(phase, "".join(buf))

    @classmethod
    def single(cls, n: int, site: int, op: str = "Z") -> PauliString:
        return cls.from_sites(n, {site: op})

    @classmethod
    def parse(cls, text: str, n: int) -> PauliString:
        """Parse the compact form ``+1 X3 Y17 Z42`` (phase token optional)."""
        tokens = text.split()
        phase = 0
        if tokens and tokens[0] in _TEXT_PHASE:
            phase = _TEXT_PHASE[tokens.pop(0)]
        ops = {}
        for tok in tokens:
            op, site = tok[0].upper(), int(tok[1:])
            if op not in "XYZ" or not 0 <= site < n:
                raise ValueError(f"bad Pauli token {tok!r}")
            ops[site] = op
        return cls.from_sites(n, ops, phase)

    def __len__(self) -> int:
        return len(self.letters)

    def codes(self) -> np.ndarray:
        return np.array([_CODE[c] for c in self.letters], dtype=np.int8)

    @classmethod
    def from_codes(cls, phase: int, codes: np.ndarray) -> PauliString:
        return cls(int(phase), "".join(LETTERS[int(c)] for c in codes))

    def __mul__(self, other: PauliString) -> PauliString:
        if len(self) != len(other):
            raise ValueError("Pauli strings of different length")
        a, b = self.codes(), other.codes()
        letters = _MUL_LETTER[a, b]
        phase = self.phase + other.phase + int(_MUL_PHASE[a, b].sum())
        return PauliString.from_codes(phase, letters)

    def __neg__(self) -> PauliString:
        return PauliString(self.phase + 2, self.letters)

    def scaled(self, k: int) -> PauliString:
        """Multiply by ``i**k``."""
        return PauliString(self.phase + k, self.letters)

    def __pow__(self, n: int) -> PauliString:
        out = PauliString.identity(len(self))
        for _ in range(n):
            out = out * self
        return out

    def commutes(self, other: PauliString) -> bool:
        a, b = self.codes(), other.codes()
        clash = (a != 0) & (b != 0) & (a != b)
        return int(clash.sum()) % 2 == 0

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def support(self) -> list[int]:
        return [k for k, c in enumerate(self.letters) if c != "I"]

    def counts(self) -> dict[str, int]:
        return {c: self.letters.count(c) for c in "XYZ"}

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    @property
    def sign(self) -> complex:
        return (1, 1j, -1, -1j)[self.phase]

    def is_identity(self) -> bool:
        return self.weight == 0

    def up_expectation(self) -> complex:
        """``<up...up| P |up...up>``: the phase if only I/Z letters appear, else 0."""
        if any(c in "XY" for c in self.letters):
            return 0
        return self.sign

    def compact(self) -> str:
        body = " ".join(f"{c}{k}" for k, c in enumerate(self.letters) if c != "I")
        return f"{_PHASE_TEXT[self.phase]} {body}".rstrip()

    def __str__(self) -> str:
        return self.compact()


SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
