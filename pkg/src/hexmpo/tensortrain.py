"""Tensor trains shared by pure states (physical dimension 2) and vectorized operators (4).

Site tensors have shape ``(left, phys, right)``. A real ``log_norm`` is kept outside the
tensors so that long evolutions never under- or overflow: the represented vector is
``exp(log_norm) * contract(tensors)``.

Vectorized operators use the fused index ``s = 2 * ket + bra`` (row-major ``vec``) and
the inner product ``<A|B> = Tr(A^dagger B) / 2^N``. Under that product each Pauli
string has unit norm, which is what the per-site normalization ``vec(P) / sqrt(2)``
gives.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

SV_FLOOR = 1e-14
DEGENERACY_RTOL = 1e-10
GRAM_RTOL = 64 * np.finfo(float).eps


class TensorTrainError(ValueError):
    """Raised on inconsistent shapes or dimensions."""


@dataclass
class TensorTrain:
    """Open-boundary tensor train with a factored-out scale.

    Attributes:
        tensors: rank-3 arrays ``(left, phys, right)``, boundary bonds of size 1.
        log_norm: natural log of the scale multiplying the contracted tensors.
        center: orthogonality center if the train is known to be canonical, else None.
    """

    tensors: list[np.ndarray]
    log_norm: float = 0.0
    center: int | None = None

    def __post_init__(self) -> None:
        if not self.tensors:
            raise TensorTrainError("a tensor train needs at least one site")
        d = self.tensors[0].shape[1]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise TensorTrainError("boundary bond dimensions must be 1")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != d:
                raise TensorTrainError(f"site {k}: expected (left, {d}, right), got {t.shape}")
            if k and self.tensors[k - 1].shape[2] != t.shape[0]:
                raise TensorTrainError(f"bond mismatch between sites {k - 1} and {k}")

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def physical_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bond_dims(self) -> list[int]:
        """Internal bond dimensions, ``len - 1`` entries."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> TensorTrain:
        return TensorTrain([t.copy() for t in self.tensors], self.log_norm, self.center)

    @classmethod
    def product(cls, vectors: Sequence[np.ndarray]) -> TensorTrain:
        """Product train from one local vector per site."""
        tensors = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors]
        return cls(tensors)

    @classmethod
    def random(
        cls, n: int, d: int, chi: int, rng: np.random.Generator | None = None
    ) -> TensorTrain:
        """Random complex train with bonds capped at ``chi`` (and by the Hilbert space)."""
        rng = np.random.default_rng() if rng is None else rng
        bonds = [1]
        for k in range(1, n):
            bonds.append(min(chi, d**k, d ** (n - k)))
        bonds.append(1)
        tensors = []
        for k in range(n):
            shape = (bonds[k], d, bonds[k + 1])
            tensors.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
        return cls(tensors)

    def to_dense(self) -> np.ndarray:
        """Full vector of length ``d**N``, scale included. Small trains only."""
        out = self.tensors[0].reshape(self.physical_dim, -1)
        for t in self.tensors[1:]:
            out = (out @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
        return out.reshape(-1) * math.exp(self.log_norm)

    def norm(self) -> float:
        return math.sqrt(max(overlap(self, self).real, 0.0))


@dataclass(frozen=True)
class CompiledLayer:
    """Operator train applied by :func:`apply_layer`.

    ``tensors[k]`` has shape ``(left, out, in, right)`` or is None for an identity site
    with trivial bonds on both sides.
    """

    tensors: tuple[np.ndarray | None, ...]
    physical_dim: int

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def max_bond(self) -> int:
        return max((t.shape[3] for t in self.tensors[:-1] if t is not None), default=1)

    @property
    def bond_dims(self) -> list[int]:
        return [1 if t is None else t.shape[3] for t in self.tensors[:-1]]

    def site_tensor(self, k: int) -> np.ndarray:
        t = self.tensors[k]
        if t is None:
            return np.eye(self.physical_dim, dtype=complex).reshape(
                1, self.physical_dim, self.physical_dim, 1
            )
        return t

    def to_dense(self) -> np.ndarray:
        """Dense ``d**N x d**N`` matrix. Small layers only."""
        d = self.physical_dim
        out = self.site_tensor(0)[0]  # (out, in, right)
        for k in range(1, len(self)):
            w = self.site_tensor(k)
            out = np.einsum("oir,rpjs->opijs", out, w)
            a, b, c, e, f = out.shape
            out = out.reshape(a * b, c * e, f)
        return out[:, :, 0].reshape(d ** len(self), d ** len(self))


# ---------------------------------------------------------------------------
# decompositions


def _svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        log.debug("gesdd failed on %s matrix, retrying with gesvd", m.shape)
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


@dataclass
class Truncation:
    """Outcome of one truncated SVD."""

    kept: int
    discarded_weight: float  # sum of squared singular values dropped above the floor
    split_multiplet: bool


def truncated_svd(
    m: np.ndarray, chi_max: int, floor: float = SV_FLOOR
) -> tuple[np.ndarray, np.ndarray, np.ndarray, Truncation]:
    """SVD keeping at most ``chi_max`` values and dropping everything below ``floor``.

    Ties at the cut keep the first values in LAPACK's descending order, so the choice
    is deterministic. Splitting a degenerate multiplet is reported in the result.
    """
    u, s, vh = _svd(m)
    above = int(np.count_nonzero(s > floor))
    keep = max(1, min(chi_max, above))
    split = False
    if keep < above:
        ref = s[keep - 1]
        split = abs(s[keep] - ref) <= DEGENERACY_RTOL * max(ref, floor)
        if split:
            log.info("truncation at %d splits a degenerate multiplet (s=%.6g)", keep, ref)
    dropped = float(np.sum(s[keep:above] ** 2))
    return u[:, :keep], s[:keep], vh[:keep], Truncation(keep, dropped, split)


def _left_qr(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l, d, r = t.shape
    q, rr = np.linalg.qr(t.reshape(l * d, r))
    return q.reshape(l, d, -1), rr


def _right_qr(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (L, Q) with ``t = L @ Q`` and Q a right isometry."""
    l, d, r = t.shape
    q, rr = np.linalg.qr(t.reshape(l, d * r).T)
    return rr.T, q.T.reshape(-1, d, r)


def canonicalize(tt: TensorTrain, center: int) -> TensorTrain:
    """Mixed-canonical form around ``center`` with a unit-norm center tensor.

    The norm moves into ``log_norm`` so the represented vector is unchanged. A zero
    vector is returned as-is apart from the isometries.
    """
    n = len(tt)
    if not 0 <= center < n:
        raise TensorTrainError(f"center {center} outside 0..{n - 1}")
    ts = [t for t in tt.tensors]
    for k in range(center):
        q, r = _left_qr(ts[k])
        ts[k] = q
        ts[k + 1] = np.tensordot(r, ts[k + 1], axes=(1, 0))
    for k in range(n - 1, center, -1):
        l, q = _right_qr(ts[k])
        ts[k] = q
        ts[k - 1] = np.tensordot(ts[k - 1], l, axes=(2, 0))
    nrm = float(np.linalg.norm(ts[center]))
    log_norm = tt.log_norm
    if nrm > 0:
        ts[center] = ts[center] / nrm
        log_norm += math.log(nrm)
    return TensorTrain(ts, log_norm, center)


def is_canonical(tt: TensorTrain, center: int, atol: float = 1e-10) -> bool:
    for k, t in enumerate(tt.tensors):
        l, d, r = t.shape
        if k < center:
            m = t.reshape(l * d, r)
            if not np.allclose(m.conj().T @ m, np.eye(r), atol=atol):
                return False
        elif k > center:
            m = t.reshape(l, d * r)
            if not np.allclose(m @ m.conj().T, np.eye(l), atol=atol):
                return False
    return True


def normalized(tt: TensorTrain) -> TensorTrain:
    out = canonicalize(tt, 0) if tt.center is None else tt.copy()
    out.log_norm = 0.0
    return out


# ---------------------------------------------------------------------------
# contractions


def overlap(a: TensorTrain, b: TensorTrain) -> complex:
    """``<a|b>`` including both scales (complex conjugate on ``a``)."""
    if len(a) != len(b) or a.physical_dim != b.physical_dim:
        raise TensorTrainError("overlap of trains with different lengths or dimensions")
    env = np.ones((1, 1), dtype=complex)
    for x, y in zip(a.tensors, b.tensors):
        env = np.tensordot(env, y, axes=(1, 0))  # (ax, d, by)
        env = np.tensordot(x.conj(), env, axes=([0, 1], [0, 1]))
    return complex(env[0, 0]) * math.exp(a.log_norm + b.log_norm)


def apply_layer(tt: TensorTrain, layer: CompiledLayer) -> TensorTrain:
    """Exact application of an operator train; bonds multiply by the layer's bonds."""
    if len(layer) != len(tt) or layer.physical_dim != tt.physical_dim:
        raise TensorTrainError(
            f"layer ({len(layer)} sites, d={layer.physical_dim}) does not match "
            f"train ({len(tt)} sites, d={tt.physical_dim})"
        )
    out = []
    for t, w in zip(tt.tensors, layer.tensors):
        if w is None:
            out.append(t)
            continue
        a, _, _, b = w.shape
        l, _, r = t.shape
        new = np.einsum("aoib,lir->alobr", w, t, optimize=True)
        out.append(new.reshape(a * l, w.shape[1], b * r))
    return TensorTrain(out, tt.log_norm, None)


# ---------------------------------------------------------------------------
# compression


@dataclass(frozen=True)
class CompressionOptions:
    """Variational sweep controls. One sweep is a left-to-right plus right-to-left pass."""

    min_sweeps: int = 2
    max_sweeps: int = 10
    tol: float = 1e-12
    floor: float = SV_FLOOR
    # discarded weight below this is rounding noise: keep the SVD result, skip the sweeps
    noise_weight: float = 1e-20
    # partial Gram eigendecomposition inside the sweeps for large, truncated blocks
    gram: bool = True
    gram_min_dim: int = 256


def _svd_truncate_from_right(
    ref: list[np.ndarray], chi_max: int, floor: float
) -> tuple[list[np.ndarray], list[float]]:
    """Right-to-left truncation sweep over a left-canonical list (modified in place).

    Returns the list and the discarded weight above the floor at each site ``k``, i.e.
    on the bond between ``k - 1`` and ``k`` (entry 0 is always 0).
    """
    n = len(ref)
    dropped = [0.0] * n
    for k in range(n - 1, 0, -1):
        l, d, r = ref[k].shape
        u, s, vh, info = truncated_svd(ref[k].reshape(l, d * r), chi_max, floor)
        dropped[k] = info.discarded_weight
        ref[k] = vh.reshape(-1, d, r)
        ref[k - 1] = np.tensordot(ref[k - 1], u * s, axes=(2, 0))
    return ref, dropped


def _env_left(env: np.ndarray, c: np.ndarray, r: np.ndarray) -> np.ndarray:
    x = np.tensordot(env, r, axes=(1, 0))  # (a, d, rb)
    return np.tensordot(c.conj(), x, axes=([0, 1], [0, 1]))


def _env_right(env: np.ndarray, c: np.ndarray, r: np.ndarray) -> np.ndarray:
    x = np.tensordot(r, env, axes=(2, 1))  # (rb, d, a)
    return np.tensordot(c.conj(), x, axes=([1, 2], [1, 2]))


def _two_site_target(
    lenv: np.ndarray, r0: np.ndarray, r1: np.ndarray, renv: np.ndarray
) -> np.ndarray:
    x = np.tensordot(lenv, r0, axes=(1, 0))  # (a, i, c)
    y = np.tensordot(r1, renv, axes=(2, 1))  # (c, j, e)
    return np.tensordot(x, y, axes=(2, 0))  # (a, i, j, e)


def _dominant_subspace(
    m: np.ndarray, chi_max: int, options: CompressionOptions, left: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Best rank-``chi_max`` split ``m = iso @ rest`` (``left``) or ``rest @ iso``.

    ``iso`` is an exact isometry and ``rest`` the exact projection of ``m`` onto it, so
    ``||rest||`` is the captured norm. Large, strongly truncated matrices use a partial
    eigendecomposition of the Gram matrix, which is cheaper than a full SVD; the
    directions it cannot resolve (below ~1e-7 of the top singular value) are dropped.
    """
    rows, cols = m.shape
    side = rows if left else cols
    if not (options.gram and min(rows, cols) >= options.gram_min_dim and side >= 2 * chi_max):
        u, s, vh, _ = truncated_svd(m, chi_max, options.floor)
        return (u, s[:, None] * vh) if left else (vh, u * s)
    g = m @ m.conj().T if left else m.T @ m.conj()
    w, x = scipy.linalg.eigh(g, driver="evx", subset_by_index=[side - chi_max, side - 1])
    w, x = w[::-1], x[:, ::-1]
    cut = max(options.floor**2, GRAM_RTOL * max(w[0], 0.0))
    keep = max(1, int(np.count_nonzero(w > cut)))
    x = x[:, :keep]
    if left:
        return x, x.conj().T @ m
    vh = x.T  # rows of vh span the dominant right singular subspace
    return vh, m @ vh.conj().T


def compress_two_site(
    tt: TensorTrain,
    chi_max: int,
    reference: TensorTrain | None = None,
    options: CompressionOptions = CompressionOptions(),
) -> tuple[TensorTrain, float, float]:
    """Two-site variational compression of ``reference`` to bonds ``<= chi_max``.

    Args:
        tt: target to compress, or the initial guess when ``reference`` is given.
        chi_max: bond dimension cap, at least 1.
        reference: uncompressed target. Defaults to ``tt``.
        options: sweep controls.

    Returns:
        ``(compressed, epsilon, f)``. ``compressed`` is the projection of the reference
        (not renormalized), ``f = |<c|r>|^2`` and ``epsilon = ||c - r||`` for unit
        normalized ``c`` and ``r``, so that ``epsilon**2 = 2 (1 - sqrt(f))``.
    """
    if chi_max < 1:
        raise TensorTrainError("chi_max must be >= 1")
    target = tt if reference is None else reference
    n = len(target)
    if n == 1:
        return target.copy(), 0.0, 1.0

    ref = canonicalize(target, n - 1)  # left-canonical, unit norm
    r_t = ref.tensors
    if reference is not None and len(tt) == n and tt.max_bond <= chi_max:
        c_t = list(canonicalize(tt, 0).tensors)
        lo, hi = 0, n - 1
    else:
        c_t, dropped = _svd_truncate_from_right(list(r_t), chi_max, options.floor)
        total = sum(dropped)
        if total <= options.noise_weight:
            f = max(0.0, 1.0 - total)
            eps = math.sqrt(max(2.0 * (1.0 - math.sqrt(f)), 0.0))
            return TensorTrain(c_t, ref.log_norm, None), eps, f
        # Bonds outside [lo, hi] were not truncated, so the blocks beyond them already
        # span the reference's subspaces there; only the window needs optimizing.
        cut = [k for k in range(1, n) if dropped[k] > 0]
        lo, hi = cut[0] - 1, cut[-1]
        for k in range(lo):
            q, r = _left_qr(c_t[k])
            c_t[k] = q
            c_t[k + 1] = np.tensordot(r, c_t[k + 1], axes=(1, 0))

    lenv: list[np.ndarray | None] = [None] * (n + 1)
    renv: list[np.ndarray | None] = [None] * (n + 1)
    lenv[0] = np.ones((1, 1), dtype=complex)
    renv[n] = np.ones((1, 1), dtype=complex)
    for k in range(lo):
        lenv[k + 1] = _env_left(lenv[k], c_t[k], r_t[k])
    for k in range(n - 1, lo + 1, -1):
        renv[k] = _env_right(renv[k + 1], c_t[k], r_t[k])

    prev = -1.0
    ov = 0.0
    for sweep in range(options.max_sweeps):
        for k in range(lo, hi):  # left to right
            theta = _two_site_target(lenv[k], r_t[k], r_t[k + 1], renv[k + 2])
            a, i, j, e = theta.shape
            u, rest = _dominant_subspace(theta.reshape(a * i, j * e), chi_max, options, left=True)
            c_t[k] = u.reshape(a, i, -1)
            c_t[k + 1] = rest.reshape(-1, j, e)
            lenv[k + 1] = _env_left(lenv[k], c_t[k], r_t[k])
        for k in range(hi - 1, lo - 1, -1):  # right to left
            theta = _two_site_target(lenv[k], r_t[k], r_t[k + 1], renv[k + 2])
            a, i, j, e = theta.shape
            vh, rest = _dominant_subspace(theta.reshape(a * i, j * e), chi_max, options, left=False)
            c_t[k + 1] = vh.reshape(-1, j, e)
            c_t[k] = rest.reshape(a, i, -1)
            renv[k + 1] = _env_right(renv[k + 2], c_t[k + 1], r_t[k + 1])
        ov = float(np.linalg.norm(rest))
        if sweep + 1 >= options.min_sweeps and ov - prev < options.tol:
            break
        prev = ov
    log_norm = ref.log_norm
    if ov > 0:  # keep the center tensor at unit norm; the vector is unchanged
        c_t[lo] = c_t[lo] / ov
        log_norm += math.log(ov)
    ov = min(ov, 1.0)
    out = TensorTrain(c_t, log_norm, lo)
    return out, math.sqrt(max(2.0 * (1.0 - ov), 0.0)), ov * ov


def truncate_svd(tt: TensorTrain, chi_max: int, floor: float = SV_FLOOR) -> tuple[TensorTrain, float]:
    """Plain SVD truncation (no sweeps). Returns the train and its fidelity ``f``."""
    ref = canonicalize(tt, len(tt) - 1)
    full = ref.copy()
    ts, _ = _svd_truncate_from_right(list(ref.tensors), chi_max, floor)
    out = TensorTrain(ts, ref.log_norm, None)
    ov = abs(overlap(normalized(out), normalized(full)))
    return out, ov * ov


# ---------------------------------------------------------------------------
# entanglement


def schmidt_values(tt: TensorTrain, cut: int) -> np.ndarray:
    """Normalized Schmidt values across the bond between sites ``cut - 1`` and ``cut``."""
    n = len(tt)
    if not 1 <= cut < n:
        raise TensorTrainError(f"cut {cut} outside 1..{n - 1}")
    c = canonicalize(tt, cut - 1) if tt.center != cut - 1 else tt
    t = c.tensors[cut - 1]
    s = np.linalg.svd(t.reshape(-1, t.shape[2]), compute_uv=False)
    nrm = np.linalg.norm(s)
    return s / nrm if nrm > 0 else s


def schmidt_spectra(tt: TensorTrain) -> list[np.ndarray]:
    """Schmidt values at every cut, from one left-to-right canonical sweep."""
    c = canonicalize(tt, 0)
    ts = list(c.tensors)
    out = []
    for k in range(len(ts) - 1):
        l, d, r = ts[k].shape
        u, s, vh = _svd(ts[k].reshape(l * d, r))
        ts[k + 1] = np.tensordot(s[:, None] * vh, ts[k + 1], axes=(1, 0))
        nrm = np.linalg.norm(s)
        out.append(s / nrm if nrm > 0 else s)
    return out


def _entropy(s: np.ndarray) -> float:
    p = s**2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def entanglement_entropy(tt: TensorTrain, cut: int) -> float:
    """Von Neumann entropy (natural log) across the bond before site ``cut``."""
    return _entropy(schmidt_values(tt, cut))


def entropy_profile(tt: TensorTrain) -> list[float]:
    return [_entropy(s) for s in schmidt_spectra(tt)]


def max_oee(tt: TensorTrain) -> float:
    """Largest entanglement entropy over all cuts of an operator train."""
    if tt.physical_dim != 4:
        raise TensorTrainError("max_oee expects a vectorized operator (physical_dim 4)")
    return max(entropy_profile(tt), default=0.0)


# ---------------------------------------------------------------------------
# fidelity bookkeeping


@dataclass
class FidelityEntry:
    step: int
    epsilon: float
    f: float
    chi_max: int


@dataclass
class FidelityLog:
    """Per-compression errors and the running circuit fidelity ``F_D = prod f_t``."""

    entries: list[FidelityEntry] = field(default_factory=list)

    def record(self, epsilon: float, f: float, chi_max: int) -> None:
        self.entries.append(FidelityEntry(len(self.entries), epsilon, f, chi_max))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def cumulative(self) -> float:
        return float(np.prod([e.f for e in self.entries])) if self.entries else 1.0

    def cumulative_series(self) -> list[float]:
        return list(np.cumprod([e.f for e in self.entries]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "epsilon", "f", "chi_max", "F_cumulative"])
            for e, cum in zip(self.entries, self.cumulative_series()):
                w.writerow([e.step, repr(e.epsilon), repr(e.f), e.chi_max, repr(float(cum))])

    @classmethod
    def from_csv(cls, path: str | Path) -> FidelityLog:
        out = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out.entries.append(
                    FidelityEntry(int(row["step"]), float(row["epsilon"]), float(row["f"]),
                                  int(row["chi_max"]))
                )
        return out

    def summary(self) -> dict:
        return {
            "steps": len(self.entries),
            "F_D": self.cumulative,
            "max_epsilon": max((e.epsilon for e in self.entries), default=0.0),
            "truncated_steps": sum(e.epsilon > 0 for e in self.entries),
        }


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"HEXMPO-TT\n"


def save_checkpoint(tt: TensorTrain, path: str | Path, dtype: str = "complex128") -> None:
    """Write a JSON header followed by the raw little-endian payload.

    Layout: magic line, 8-byte little-endian header length, UTF-8 JSON header, then each
    site tensor in C order.
    """
    if dtype not in ("complex64", "complex128"):
        raise TensorTrainError(f"unsupported checkpoint dtype {dtype!r}")
    header = {
        "physical_dim": tt.physical_dim,
        "bond_dims": tt.bond_dims,
        "shapes": [list(t.shape) for t in tt.tensors],
        "log_norm": tt.log_norm,
        "center": tt.center,
        "dtype": dtype,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for t in tt.tensors:
            fh.write(np.ascontiguousarray(t, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


def load_checkpoint(path: str | Path) -> TensorTrain:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise TensorTrainError(f"{path}: not a tensor-train checkpoint")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size))
        dt = np.dtype(header["dtype"]).newbyteorder("<")
        tensors = []
        for shape in header["shapes"]:
            count = int(np.prod(shape))
            buf = fh.read(count * dt.itemsize)
            tensors.append(np.frombuffer(buf, dtype=dt).astype(complex).reshape(shape))
    return TensorTrain(tensors, float(header["log_norm"]), header["center"])
