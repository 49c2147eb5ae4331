"""Seeded generation of Gaussian sensing matrices, sparse/compressible signals
and sphere-uniform noise, plus best-k-term approximation.

Conventions
-----------
- All randomness goes through numpy's PCG64 bit generator (``np.random.Generator``
  over ``np.random.PCG64``).  Every generator here is a pure function of its
  arguments and its seed: calling it twice with identical arguments returns
  bit-identical output, and generated arrays are marked read-only so they can
  be shared freely across concurrent workers.
- Supports are 0-based ``int64`` arrays internally.  Serialized instance files
  store 1-based indices (matching the usual {1, ..., p} convention).
- A sensing matrix has i.i.d. N(0, 1/n) entries, stored dense in column-major
  (Fortran) order since downstream certificate checks iterate over columns.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MAX_ENTRIES",
    "SensingMatrix",
    "SignalSpec",
    "ProblemInstance",
    "derive_seed",
    "gaussian_matrix",
    "sparse_signal",
    "sphere_noise",
    "compressible_signal",
    "best_k_term",
    "make_instance",
    "save_instance",
    "load_instance",
]

# Refuse to allocate matrices beyond this many entries (~16 GiB of float64).
MAX_ENTRIES = 2**31


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def derive_seed(master: int, trial_index: int, stream: int) -> int:
    """Derive an independent 64-bit sub-seed from (master, trial_index, stream).

    The derivation is the first 8 bytes (little endian) of
    ``SHA-256(b"sparselab-seed:<master>:<trial_index>:<stream>")``, so it is
    stable across platforms and Python versions, and collision-free for all
    practical ranges.
    """
    payload = f"sparselab-seed:{int(master)}:{int(trial_index)}:{int(stream)}"
    digest = hashlib.sha256(payload.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class SensingMatrix:
    """Dense n x p measurement matrix with i.i.d. N(0, 1/n) entries."""

    n: int
    p: int
    entries: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if self.entries.shape != (self.n, self.p):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match (n, p)=({self.n}, {self.p})"
            )

    def column(self, j: int) -> np.ndarray:
        """Column a_j, 0-based."""
        return self.entries[:, j]

    def columns(self, idx) -> np.ndarray:
        """Sub-matrix A_I for a 0-based index array."""
        return self.entries[:, idx]


@dataclass(frozen=True)
class SignalSpec:
    """Sparse ground-truth vector stored as (support, values).

    ``support`` is strictly increasing, 0-based; ``values`` holds the nonzero
    magnitudes on the support, so ``k = len(support)`` equals the l0
    pseudo-norm of the dense view.
    """

    p: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if sup.shape != val.shape or sup.ndim != 1:
            raise ValueError("support and values must be 1-d arrays of equal length")
        if sup.size:
            if sup.min() < 0 or sup.max() >= self.p:
                raise ValueError("support indices out of range")
            if np.any(np.diff(sup) <= 0):
                raise ValueError("support must be strictly increasing")
            if np.any(val == 0.0):
                raise ValueError("values on the support must be nonzero")
        object.__setattr__(self, "support", _freeze(sup))
        object.__setattr__(self, "values", _freeze(val))

    @property
    def k(self) -> int:
        return int(self.support.size)

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self.values)

    @property
    def min_magnitude(self) -> float:
        """Smallest nonzero magnitude (0.0 for the empty signal)."""
        return float(np.min(np.abs(self.values))) if self.k else 0.0

    def dense(self) -> np.ndarray:
        x = np.zeros(self.p)
        x[self.support] = self.values
        return x


@dataclass(frozen=True)
class ProblemInstance:
    """Bundled (A, x0, w, y, eps) with the seeds that produced it.

    Invariant: ``y`` is exactly ``A[:, support] @ values + w`` as computed at
    construction time (bit-for-bit reproducible from the seed record).
    """

    a: SensingMatrix
    x0: SignalSpec
    w: np.ndarray
    y: np.ndarray
    eps: float
    seed_record: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.a.n

    @property
    def p(self) -> int:
        return self.a.p


def gaussian_matrix(n: int, p: int, seed: int) -> SensingMatrix:
    """n x p matrix with i.i.d. N(0, 1/n) entries, deterministic in ``seed``.

    Entries are standard normals from PCG64 drawn column by column (the
    stream fills column a_1 first, then a_2, ...) and scaled by 1/sqrt(n);
    storage is column-major.
    """
    if n < 1 or p < 1:
        raise ValueError(f"matrix dimensions must be positive, got (n, p)=({n}, {p})")
    if n * p > MAX_ENTRIES:
        raise ValueError(f"entry count {n}*{p} exceeds MAX_ENTRIES={MAX_ENTRIES}")
    entries = _rng(seed).standard_normal((p, n)).T
    entries *= 1.0 / np.sqrt(n)
    return SensingMatrix(n=n, p=p, entries=_freeze(entries), seed=seed)


def sparse_signal(p: int, k: int, big_t: float, seed: int) -> SignalSpec:
    """k-sparse signal: uniform random k-subset support, values +-T equiprobably."""
    if not 0 <= k <= p:
        raise ValueError(f"need 0 <= k <= p, got k={k}, p={p}")
    if big_t <= 0:
        raise ValueError(f"signal level T must be positive, got {big_t}")
    rng = _rng(seed)
    support = np.sort(rng.choice(p, size=k, replace=False)).astype(np.int64)
    signs = rng.integers(0, 2, size=k) * 2 - 1
    return SignalSpec(p=p, support=support, values=big_t * signs.astype(np.float64))


def sphere_noise(n: int, eps: float, seed: int) -> np.ndarray:
    """Noise of exact l2 norm ``eps`` with direction uniform on the unit sphere."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if eps < 0:
        raise ValueError(f"noise radius must be nonnegative, got {eps}")
    if eps == 0:
        return _freeze(np.zeros(n))
    g = _rng(seed).standard_normal(n)
    return _freeze(g * (eps / np.linalg.norm(g)))


def compressible_signal(p: int, k: int, big_t: float, tail_decay: float, seed: int) -> np.ndarray:
    """Dense weakly-sparse vector: k head entries of magnitude T on a random
    support, and a power-law tail of magnitudes T*(k/(k+j))^tail_decay for
    j = 1..p-k, all with independent random signs.

    The head entries are the k largest magnitudes by construction; tail
    magnitudes strictly decrease with rank j.  ``k = 0`` degenerates to the
    zero vector.
    """
    if not 0 <= k <= p:
        raise ValueError(f"need 0 <= k <= p, got k={k}, p={p}")
    if big_t <= 0:
        raise ValueError(f"signal level T must be positive, got {big_t}")
    if tail_decay <= 0:
        raise ValueError(f"tail_decay must be positive, got {tail_decay}")
    rng = _rng(seed)
    perm = rng.permutation(p)
    signs = (rng.integers(0, 2, size=p) * 2 - 1).astype(np.float64)
    x = np.zeros(p)
    x[perm[:k]] = big_t * signs[:k]
    if k < p:
        j = np.arange(1, p - k + 1, dtype=np.float64)
        tail = big_t * (k / (k + j)) ** tail_decay
        x[perm[k:]] = tail * signs[k:]
    return _freeze(x)


def best_k_term(x: np.ndarray, k: int) -> SignalSpec:
    """Best k-term approximation: keep the k largest-magnitude entries.

    Ties are broken by smallest index first (stable sort on magnitudes).
    Zero entries are never part of the returned support, so the result may
    have fewer than k nonzeros.
    """
    x = np.asarray(x, dtype=np.float64)
    p = x.size
    if not 0 <= k <= p:
        raise ValueError(f"need 0 <= k <= p, got k={k}, p={p}")
    order = np.argsort(-np.abs(x), kind="stable")
    keep = order[:k]
    keep = keep[x[keep] != 0.0]
    support = np.sort(keep).astype(np.int64)
    return SignalSpec(p=p, support=support, values=x[support])


def make_instance(
    n: int,
    p: int,
    k: int,
    big_t: float,
    eps: float,
    seed: int,
    trial_index: int = 0,
) -> ProblemInstance:
    """Generate a full problem instance from one master seed.

    Sub-seeds are derived on streams 0 (matrix), 1 (signal), 2 (noise) so the
    three components are independent and individually reproducible.
    """
    seeds = {
        "master": int(seed),
        "trial_index": int(trial_index),
        "matrix": derive_seed(seed, trial_index, 0),
        "signal": derive_seed(seed, trial_index, 1),
        "noise": derive_seed(seed, trial_index, 2),
    }
    a = gaussian_matrix(n, p, seeds["matrix"])
    x0 = sparse_signal(p, k, big_t, seeds["signal"])
    w = sphere_noise(n, eps, seeds["noise"])
    y = a.entries[:, x0.support] @ x0.values + w
    return ProblemInstance(a=a, x0=x0, w=w, y=_freeze(y), eps=float(eps), seed_record=seeds)


# --- instance container -----------------------------------------------------
#
# Instances are stored as a documented binary container: a NumPy ``.npz``
# archive with the fields below.  The matrix and noise are *not* stored;
# they are regenerated bit-for-bit from the recorded seeds, and y is
# recomputed as A[:, support] @ values + w.  Support indices are stored
# 1-based in the file.
#
#   format_version : int64 scalar, currently 1
#   n, p           : int64 scalars
#   eps            : float64 scalar
#   seed_master, seed_trial, seed_matrix, seed_signal, seed_noise : uint64
#   support        : int64 array, 1-based, strictly increasing
#   values         : float64 array, same length as support

_FORMAT_VERSION = 1


def save_instance(inst: ProblemInstance, path: str | Path) -> None:
    """Write an instance to its .npz container (requires a seed record)."""
    rec = inst.seed_record
    needed = {"master", "trial_index", "matrix", "signal", "noise"}
    if not needed <= set(rec):
        raise ValueError("instance has no complete seed record; cannot serialize")
    np.savez(
        path,
        format_version=np.int64(_FORMAT_VERSION),
        n=np.int64(inst.n),
        p=np.int64(inst.p),
        eps=np.float64(inst.eps),
        seed_master=np.uint64(rec["master"]),
        seed_trial=np.uint64(rec["trial_index"]),
        seed_matrix=np.uint64(rec["matrix"]),
        seed_signal=np.uint64(rec["signal"]),
        seed_noise=np.uint64(rec["noise"]),
        support=(inst.x0.support + 1).astype(np.int64),
        values=inst.x0.values.astype(np.float64),
    )


def load_instance(path: str | Path) -> ProblemInstance:
    """Rebuild an instance from its .npz container, bit-for-bit."""
    with np.load(path) as f:
        version = int(f["format_version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported instance format version {version}")
        n, p = int(f["n"]), int(f["p"])
        eps = float(f["eps"])
        seeds = {
            "master": int(f["seed_master"]),
            "trial_index": int(f["seed_trial"]),
            "matrix": int(f["seed_matrix"]),
            "signal": int(f["seed_signal"]),
            "noise": int(f["seed_noise"]),
        }
        support = f["support"].astype(np.int64) - 1
        values = f["values"].astype(np.float64)
    a = gaussian_matrix(n, p, seeds["matrix"])
    x0 = SignalSpec(p=p, support=support, values=values)
    w = sphere_noise(n, eps, seeds["noise"])
    y = a.entries[:, x0.support] @ x0.values + w
    return ProblemInstance(a=a, x0=x0, w=w, y=_freeze(y), eps=eps, seed_record=seeds)
