"""Counter-based random numbers and the six data-generating distributions.

Uniforms come from Philox4x32-10 keyed by the master seed, with the stream
id in the upper half of the counter.  Any (seed, stream, position) triple
can therefore be evaluated directly, which lets the simulation engine build
the uniforms of thousands of replicates in one vectorized call while staying
bit-identical to drawing them one stream at a time.

Every sampler consumes a fixed number of uniforms per draw (no rejection
loops), so the layout of a replicate's stream never depends on the values
drawn.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .special import ln_gamma, std_normal_cdf

_MASK32 = np.uint64(0xFFFFFFFF)
_MASK64 = (1 << 64) - 1
_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85
_PHILOX_ROUNDS = 10
_TWO_M53 = 2.0 ** -53


def philox4x32(ctr, key):
    """Philox4x32-10 block function.

    ``ctr`` is an integer array of shape (..., 4) with 32-bit words,
    ``key`` a pair of 32-bit words.  Returns the (..., 4) output words.
    """
    c = np.asarray(ctr, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
    k0 = int(key[0]) & 0xFFFFFFFF
    k1 = int(key[1]) & 0xFFFFFFFF
    for rnd in range(_PHILOX_ROUNDS):
        if rnd:
            k0 = (k0 + _PHILOX_W0) & 0xFFFFFFFF
            k1 = (k1 + _PHILOX_W1) & 0xFFFFFFFF
        p0 = c0 * _PHILOX_M0
        p1 = c2 * _PHILOX_M1
        c0, c1, c2, c3 = (
            (p1 >> np.uint64(32)) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> np.uint64(32)) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
    return np.stack([c0, c1, c2, c3], axis=-1)


def mix64(z):
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    scalar = np.ndim(z) == 0
    v = np.atleast_1d(np.asarray(z, dtype=np.uint64)).copy()
    v ^= v >> np.uint64(30)
    v *= np.uint64(0xBF58476D1CE4E5B9)
    v ^= v >> np.uint64(27)
    v *= np.uint64(0x94D049BB133111EB)
    v ^= v >> np.uint64(31)
    return int(v[0]) if scalar else v


def uniform_matrix(master_seed: int, stream_ids, count: int, offset: int = 0) -> np.ndarray:
    """Uniforms in (0, 1) for many streams at once.

    Row ``i`` holds positions ``offset .. offset+count-1`` of stream
    ``stream_ids[i]``.  Each Philox block yields two doubles built from the
    top 53 bits of its two 64-bit halves.
    """
    streams = np.atleast_1d(np.asarray(stream_ids, dtype=np.uint64))
    if count == 0:
        return np.empty((streams.size, 0))
    first_block = offset // 2
    last_block = (offset + count - 1) // 2
    blocks = np.arange(first_block, last_block + 1, dtype=np.uint64)
    ctr = np.empty((streams.size, blocks.size, 4), dtype=np.uint64)
    ctr[..., 0] = blocks & _MASK32
    ctr[..., 1] = blocks >> np.uint64(32)
    ctr[..., 2] = (streams & _MASK32)[:, None]
    ctr[..., 3] = (streams >> np.uint64(32))[:, None]
    seed = int(master_seed) & _MASK64
    out = philox4x32(ctr, (seed & 0xFFFFFFFF, seed >> 32))
    lo = out[..., 0] | (out[..., 1] << np.uint64(32))
    hi = out[..., 2] | (out[..., 3] << np.uint64(32))
    words = np.stack([lo, hi], axis=-1).reshape(streams.size, -1)
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    start = offset - 2 * first_block
    return u[:, start:start + count]


@dataclass
class RngState:
    """One reproducible stream: (master_seed, stream_id) plus a read position.

    Not safe to share between concurrent consumers; derive one stream per
    unit of work instead.
    """

    master_seed: int
    stream_id: int
    position: int = field(default=0)

    def uniforms(self, k: int) -> np.ndarray:
        u = uniform_matrix(self.master_seed, [self.stream_id], k, self.position)[0]
        self.position += k
        return u


def rng_new(master_seed: int, stream_id: int) -> RngState:
    return RngState(int(master_seed) & _MASK64, int(stream_id) & _MASK64)


class Family(str, enum.Enum):
    NORMAL = "normal"
    LOGISTIC = "logistic"
    UNIFORM = "uniform"
    GAMMA = "gamma"
    EXPONENTIAL = "exponential"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class DistributionSpec:
    """A data-generating distribution with closed-form moments.

    Parameters by family:

    * normal: (mean, sd)
    * logistic: (location, scale)
    * uniform: (low, high)
    * gamma: (shape, scale); shape must be a positive integer
    * exponential: (rate,)
    * mixture: (weight, location) for ``(1-w) N(0,1) + w N(location, 1)``
    """

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.family is Family.GAMMA:
            shape, scale = self.params
            if shape < 1 or shape != int(shape) or scale <= 0:
                raise UsageError("gamma sampler needs an integer shape >= 1 and scale > 0")
        if self.true_sd <= 0:
            raise UsageError(f"{self.family.value} parameters give non-positive sd")

    @property
    def name(self) -> str:
        return self.family.value

    @property
    def true_mean(self) -> float:
        f, p = self.family, self.params
        if f is Family.NORMAL or f is Family.LOGISTIC:
            return p[0]
        if f is Family.UNIFORM:
            return 0.5 * (p[0] + p[1])
        if f is Family.GAMMA:
            return p[0] * p[1]
        if f is Family.EXPONENTIAL:
            return 1.0 / p[0]
        return p[0] * p[1]

    @property
    def true_sd(self) -> float:
        f, p = self.family, self.params
        if f is Family.NORMAL:
            return p[1]
        if f is Family.LOGISTIC:
            return p[1] * math.pi / math.sqrt(3.0)
        if f is Family.UNIFORM:
            return (p[1] - p[0]) / math.sqrt(12.0)
        if f is Family.GAMMA:
            return math.sqrt(p[0]) * p[1]
        if f is Family.EXPONENTIAL:
            return 1.0 / p[0]
        w, loc = p
        second = (1.0 - w) * 1.0 + w * (loc * loc + 1.0)
        return math.sqrt(second - (w * loc) ** 2)


CANONICAL: dict[str, DistributionSpec] = {
    "normal": DistributionSpec(Family.NORMAL, (0.0, 1.0)),
    "logistic": DistributionSpec(Family.LOGISTIC, (0.0, 1.0)),
    "uniform": DistributionSpec(Family.UNIFORM, (0.0, 1.0)),
    "gamma": DistributionSpec(Family.GAMMA, (2.0, 1.0)),
    "exponential": DistributionSpec(Family.EXPONENTIAL, (1.0,)),
    "mixture": DistributionSpec(Family.MIXTURE, (0.1, 7.5)),
}


def get_spec(name: str) -> DistributionSpec:
    try:
        return CANONICAL[name.lower()]
    except KeyError:
        valid = ", ".join(CANONICAL)
        raise UsageError(f"unknown distribution {name!r}; valid names: {valid}") from None


def _normals_needed(n: int) -> int:
    return 2 * ((n + 1) // 2)


def uniforms_needed(spec: DistributionSpec, n: int) -> int:
    """Number of uniforms ``transform`` consumes to produce ``n`` draws."""
    f = spec.family
    if f is Family.NORMAL:
        return _normals_needed(n)
    if f is Family.GAMMA:
        return int(spec.params[0]) * n
    if f is Family.MIXTURE:
        return n + _normals_needed(n)
    return n


def _box_muller(u: np.ndarray, n: int) -> np.ndarray:
    r = np.sqrt(-2.0 * np.log(u[..., 0::2]))
    theta = 2.0 * np.pi * u[..., 1::2]
    z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
    return z.reshape(*u.shape[:-1], -1)[..., :n]


def transform(spec: DistributionSpec, u: np.ndarray, n: int) -> np.ndarray:
    """Map uniforms (last axis, length ``uniforms_needed``) to ``n`` draws."""
    f, p = spec.family, spec.params
    if f is Family.NORMAL:
        return p[0] + p[1] * _box_muller(u, n)
    if f is Family.LOGISTIC:
        return p[0] + p[1] * np.log(u / (1.0 - u))
    if f is Family.UNIFORM:
        return p[0] + (p[1] - p[0]) * u
    if f is Family.EXPONENTIAL:
        return -np.log(u) / p[0]
    if f is Family.GAMMA:
        k = int(p[0])
        logs = np.log(u[..., : k * n])
        acc = -logs[..., :n]
        for j in range(1, k):
            acc = acc - logs[..., j * n:(j + 1) * n]
        return p[1] * acc
    w, loc = p
    pick = u[..., :n] < w
    return _box_muller(u[..., n:], n) + loc * pick


def sample(spec: DistributionSpec, n: int, rng: RngState) -> np.ndarray:
    """``n`` independent draws from ``spec`` using the next uniforms of ``rng``."""
    if n < 1:
        raise UsageError(f"sample size must be >= 1, got {n}")
    return transform(spec, rng.uniforms(uniforms_needed(spec, n)), n)


def pdf(spec: DistributionSpec, x):
    x = np.asarray(x, dtype=float)
    f, p = spec.family, spec.params
    if f is Family.NORMAL:
        z = (x - p[0]) / p[1]
        out = np.exp(-0.5 * z * z) / (p[1] * math.sqrt(2.0 * math.pi))
    elif f is Family.LOGISTIC:
        e = np.exp(-np.abs(x - p[0]) / p[1])
        out = e / (p[1] * (1.0 + e) ** 2)
    elif f is Family.UNIFORM:
        out = np.where((x >= p[0]) & (x <= p[1]), 1.0 / (p[1] - p[0]), 0.0)
    elif f is Family.GAMMA:
        shape, scale = p
        pos = np.where(x > 0, x, 1.0)
        dens = np.exp((shape - 1.0) * np.log(pos) - pos / scale - ln_gamma(shape) - shape * math.log(scale))
        out = np.where(x > 0, dens, 0.0)
    elif f is Family.EXPONENTIAL:
        out = np.where(x >= 0, p[0] * np.exp(-p[0] * np.maximum(x, 0.0)), 0.0)
    else:
        w, loc = p
        phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)  # noqa: E731
        out = (1.0 - w) * phi(x) + w * phi(x - loc)
    return float(out) if out.ndim == 0 else out


def cdf(spec: DistributionSpec, x):
    x = np.asarray(x, dtype=float)
    f, p = spec.family, spec.params
    if f is Family.NORMAL:
        out = np.asarray(std_normal_cdf((x - p[0]) / p[1]))
    elif f is Family.LOGISTIC:
        out = 0.5 * (1.0 + np.tanh(0.5 * (x - p[0]) / p[1]))
    elif f is Family.UNIFORM:
        out = np.clip((x - p[0]) / (p[1] - p[0]), 0.0, 1.0)
    elif f is Family.GAMMA:
        k, scale = int(p[0]), p[1]
        z = np.maximum(x, 0.0) / scale
        term = np.ones_like(z)
        acc = np.ones_like(z)
        for j in range(1, k):
            term = term * z / j
            acc = acc + term
        out = np.where(x > 0, 1.0 - np.exp(-z) * acc, 0.0)
    elif f is Family.EXPONENTIAL:
        out = np.where(x > 0, -np.expm1(-p[0] * np.maximum(x, 0.0)), 0.0)
    else:
        w, loc = p
        out = (1.0 - w) * np.asarray(std_normal_cdf(x)) + w * np.asarray(std_normal_cdf(x - loc))
    return float(out) if out.ndim == 0 else out


def standardized_shift(spec: DistributionSpec, delta_in_sd: float) -> float:
    """Location shift of ``delta_in_sd`` true standard deviations."""
    return delta_in_sd * spec.true_sd
