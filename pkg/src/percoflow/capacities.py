"""Edge capacity laws and the seeded, order-independent capacity field.

Capacities are never stored: t(e) is recomputed on demand as a pure function
of (master seed, replica index, canonical edge).  Each edge hashes its
integer coordinates and axis through a splitmix64-style finalizer chain into
a 64-bit key; a replica draws by finalizing (replica state XOR edge key) and
pushing the resulting uniform through the law's inverse CDF.  Shuffling the
evaluation order or splitting work across processes cannot change a single
value.

Flow arithmetic happens on quantized integer capacities q(e) = round(t(e)*Q)
with Q = 2^20, so max-flow equals min-cut exactly, with no tolerances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityOverflow
from .geometry import as_frac
from .lattice import LatticeEdge

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

#: quantization scale for integer flow arithmetic
DEFAULT_Q = 1 << 20

#: per-instance guard: the sum of quantized capacities must stay below this
CAPACITY_BUDGET = 1 << 62

# Bond percolation thresholds.  p_c(2) = 1/2 exactly (self-duality of the
# square lattice).  p_c(3) has no known closed form; 0.2488126 is the
# standard high-precision simulation value (Lorenz & Ziff 1998).  Nothing
# here depends on its later digits.
P_C = {2: Fraction(1, 2), 3: 0.2488126}


def _finalize_int(x: int) -> int:
    """splitmix64 output stage on a python int (masked to 64 bits)."""
    x &= _MASK
    x ^= x >> 30
    x = (x * _MUL1) & _MASK
    x ^= x >> 27
    x = (x * _MUL2) & _MASK
    x ^= x >> 31
    return x


def _finalize_u64(x: np.ndarray) -> np.ndarray:
    """Same finalizer, vectorized over a uint64 array (wrapping multiplies)."""
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MUL1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MUL2)
    x ^= x >> np.uint64(31)
    return x


def mix64(seed: int, *words: int) -> int:
    """Chain arbitrary integer words into one 64-bit value, starting at seed."""
    h = seed & _MASK
    for w in words:
        h = _finalize_int(h ^ ((w & _MASK) * _GOLDEN & _MASK))
    return h


def derive_seed(master: int, tag: str, *words: int) -> int:
    """Stable sub-seed for an independent stream (tag plus integer context).

    The tag bytes are absorbed 8 at a time so different stream names decouple
    even when the numeric context coincides.
    """
    data = tag.encode("utf-8")
    tag_words = [
        int.from_bytes(data[i : i + 8], "big") for i in range(0, len(data), 8)
    ]
    return mix64(master, len(data), *tag_words, *words)


def edge_keys(edge_z: np.ndarray, edge_axis: np.ndarray) -> np.ndarray:
    """Per-edge 64-bit hash keys from canonical (z, axis).  Shape (E,)."""
    E = len(edge_axis)
    k = np.full(E, _finalize_int(0x0EDBE11CE), dtype=np.uint64)
    g = np.uint64(_GOLDEN)
    for col in range(edge_z.shape[1]):
        w = edge_z[:, col].astype(np.int64).astype(np.uint64)
        k = _finalize_u64(k ^ (w * g))
    k = _finalize_u64(k ^ (edge_axis.astype(np.uint64) * g))
    return k


def _uniforms(state: int, keys: np.ndarray) -> np.ndarray:
    """One u in [0,1) per edge: 53 mixed bits of finalize(state ^ key)."""
    h = _finalize_u64(np.uint64(state) ^ keys)
    return (h >> np.uint64(11)).astype(np.float64) * (2.0**-53)


@dataclass(frozen=True)
class CapacityLaw:
    """A nonnegative capacity distribution with its analytic summaries.

    atom0 is P[t=0] (exact for the discrete laws), mean is E[t], and
    has_exp_moment records that E[exp(theta t)] is finite for some theta > 0
    (true for every kind here: all are bounded).
    """

    kind: str
    params: tuple
    atom0: Fraction
    mean: float
    has_exp_moment: bool
    max_value: float

    def values_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF map, vectorized."""
        if self.kind == "constant":
            (a,) = self.params
            return np.full_like(u, float(a))
        if self.kind == "bernoulli":
            p, a = self.params
            return np.where(u < float(p), float(a), 0.0)
        if self.kind == "two_point":
            p, a, b = self.params
            return np.where(u < float(p), float(a), float(b))
        if self.kind == "uniform_int":
            lo, hi = self.params
            return lo + np.minimum(
                np.floor(u * (hi - lo + 1)), float(hi - lo)
            )
        if self.kind == "exponential":
            (rate,) = self.params
            t_cut = 40.0 / float(rate)
            return np.minimum(-np.log1p(-u) / float(rate), t_cut)
        raise ValueError(f"unknown law kind {self.kind!r}")

    def label(self) -> str:
        inner = ",".join(repr(float(p)) for p in self.params)
        return f"{self.kind}({inner})"

    def to_dict(self) -> dict:
        keys = {
            "constant": ("a",),
            "bernoulli": ("p", "a"),
            "two_point": ("p", "a", "b"),
            "uniform_int": ("lo", "hi"),
            "exponential": ("rate",),
        }[self.kind]
        out = {"kind": self.kind}
        for k, v in zip(keys, self.params):
            out[k] = int(v) if self.kind == "uniform_int" else float(v)
        return out


def constant(a) -> CapacityLaw:
    a = float(a)
    if a < 0:
        raise ValueError("constant law needs a >= 0")
    return CapacityLaw(
        "constant", (a,), Fraction(1 if a == 0 else 0), a, True, a
    )


def bernoulli(p, a) -> CapacityLaw:
    pf = as_frac(p)
    a = float(a)
    if not 0 <= pf <= 1 or a < 0:
        raise ValueError("bernoulli law needs p in [0,1] and a >= 0")
    atom0 = 1 - pf if a > 0 else Fraction(1)
    return CapacityLaw("bernoulli", (float(pf), a), atom0, float(pf) * a, True, a)


def two_point(p, a, b) -> CapacityLaw:
    pf = as_frac(p)
    a, b = float(a), float(b)
    if not 0 <= pf <= 1 or a < 0 or b < 0:
        raise ValueError("two_point law needs p in [0,1] and a,b >= 0")
    atom0 = (pf if a == 0 else 0) + ((1 - pf) if b == 0 else 0)
    return CapacityLaw(
        "two_point",
        (float(pf), a, b),
        Fraction(atom0),
        float(pf) * a + float(1 - pf) * b,
        True,
        max(a, b),
    )


def uniform_int(lo, hi) -> CapacityLaw:
    lo, hi = int(lo), int(hi)
    if not 0 <= lo <= hi:
        raise ValueError("uniform_int law needs 0 <= lo <= hi")
    atom0 = Fraction(1, hi - lo + 1) if lo == 0 else Fraction(0)
    return CapacityLaw(
        "uniform_int", (lo, hi), atom0, (lo + hi) / 2.0, True, float(hi)
    )


def exponential(rate) -> CapacityLaw:
    rate = float(rate)
    if rate <= 0:
        raise ValueError("exponential law needs rate > 0")
    t_cut = 40.0 / rate
    # capping at t_cut makes every moment finite; the lost mass is e^-40
    mean = (1.0 - np.exp(-40.0)) / rate
    return CapacityLaw("exponential", (rate,), Fraction(0), mean, True, t_cut)


_BUILDERS = {
    "constant": constant,
    "bernoulli": bernoulli,
    "two_point": two_point,
    "uniform_int": uniform_int,
    "exponential": exponential,
}


def parse_law(spec: dict) -> CapacityLaw:
    """Build a law from its JSON form, e.g. {"kind":"bernoulli","p":0.6,"a":1}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"law spec must be a dict with a 'kind': {spec!r}")
    kind = spec["kind"]
    if kind not in _BUILDERS:
        raise ValueError(
            f"unknown law kind {kind!r}; expected one of {sorted(_BUILDERS)}"
        )
    args = {k: v for k, v in spec.items() if k != "kind"}
    try:
        return _BUILDERS[kind](**args)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from exc


def law_checks(law: CapacityLaw, d: int) -> dict:
    """Summarize the law against the d-dimensional percolation threshold.

    subcritical means atom0 < 1 - p_c(d): the regime where the flow constant
    is positive.  A supercritical law only triggers a warning; estimates on
    it are legitimate (they should come out near zero).
    """
    if d not in P_C:
        raise ValueError(f"d must be one of {sorted(P_C)}, got {d}")
    threshold = 1 - P_C[d]
    sub = law.atom0 < threshold
    if not sub:
        warnings.warn(
            f"law {law.label()} has P[t=0] = {float(law.atom0):.4g} >= "
            f"1 - p_c({d}) = {float(threshold):.4g}: flow constant degenerates",
            stacklevel=2,
        )
    return {
        "atom0": float(law.atom0),
        "mean": float(law.mean),
        "has_exp_moment": law.has_exp_moment,
        "subcritical": bool(sub),
    }


@dataclass(frozen=True)
class CapacityField:
    """A law plus a master seed: the full i.i.d. capacity assignment.

    All sampling goes through precomputed edge keys so repeated replicas
    over one instance pay the coordinate hashing only once.
    """

    law: CapacityLaw
    seed: int
    Q: int = DEFAULT_Q

    def replica_state(self, replica: int = 0) -> int:
        return mix64(self.seed, 0x5EED, replica)

    def values(self, keys: np.ndarray, replica: int = 0) -> np.ndarray:
        """Real-valued capacities t(e) for the given edge keys."""
        return self.law.values_from_uniform(
            _uniforms(self.replica_state(replica), keys)
        )

    def quantized(self, keys: np.ndarray, replica: int = 0) -> np.ndarray:
        """Integer capacities q(e) = round(t(e) * Q), overflow-guarded."""
        q = np.rint(self.values(keys, replica) * self.Q).astype(np.int64)
        check_budget(q)
        return q

    def sample(self, e: LatticeEdge, replica: int = 0) -> float:
        """Scalar convenience: the capacity of one canonical edge."""
        z = np.array([e.z], dtype=np.int64)
        ax = np.array([e.axis], dtype=np.int64)
        return float(self.values(edge_keys(z, ax), replica)[0])


def check_budget(q: np.ndarray) -> None:
    """Reject instances whose total quantized capacity could overflow int64."""
    total = int(q.sum(dtype=np.int64)) if len(q) else 0
    if total >= CAPACITY_BUDGET or total < 0:
        raise CapacityOverflow(
            f"sum of quantized capacities {total} breaches the 2^62 budget"
        )
