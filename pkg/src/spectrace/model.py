"""Domain types for the channel-decomposed operator and its diagonal potential.

The operator A is described by its eigenvalues gamma_k (one per channel).
The potential is diagonal in the eigenbasis of A: channel k carries a scalar
function q_k(t) written as a finite cosine series, so its mean over [0, 1]
vanishes exactly and derivatives are analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SpecError

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class Branch(str, Enum):
    OSCILLATORY = "oscillatory"
    PRINCIPAL = "principal"
    NEGATIVE = "negative"


def _finite_real(value, what: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what} must be a real number, got {value!r}") from exc
    if isinstance(value, complex) or not math.isfinite(v):
        raise SpecError(f"{what} must be a finite real number, got {value!r}")
    return v


@dataclass(frozen=True)
class OperatorSpec:
    """Channel eigenvalues of A, optionally generated by gamma_k = a * k**alpha.

    When (a, alpha) are known the law also defines gamma_k beyond K, which the
    counting module uses to bound truncation effects.
    """

    gammas: tuple[float, ...]
    a: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        gs = tuple(_finite_real(g, "gamma") for g in self.gammas)
        if not gs:
            raise SpecError("at least one channel is required")
        for k, g in enumerate(gs, start=1):
            if g <= 1.0:
                raise SpecError(f"gamma_{k} = {g!r} violates A > I (need gamma > 1)")
        for k in range(1, len(gs)):
            if gs[k] < gs[k - 1]:
                raise SpecError(f"gammas must be nondecreasing (gamma_{k + 1} < gamma_{k})")
        if (self.a is None) != (self.alpha is None):
            raise SpecError("a and alpha must be given together")
        object.__setattr__(self, "gammas", gs)

    @property
    def K(self) -> int:
        return len(self.gammas)

    @property
    def generated(self) -> bool:
        return self.a is not None

    def gamma(self, k: int) -> float:
        """gamma_k for 1-based k; beyond K only when the growth law is known."""
        if 1 <= k <= self.K:
            return self.gammas[k - 1]
        if k > self.K and self.generated:
            return self.a * k ** self.alpha
        raise SpecError(f"channel {k} outside 1..{self.K}")


def make_operator_spec(a: float, alpha: float, K: int) -> OperatorSpec:
    a = _finite_real(a, "a")
    alpha = _finite_real(alpha, "alpha")
    if a <= 0 or alpha <= 0:
        raise SpecError("a and alpha must be positive")
    if int(K) != K or K < 1:
        raise SpecError("K must be a positive integer")
    if a <= 1.0:
        raise SpecError(f"gamma_1 = a = {a!r} violates A > I (need a > 1)")
    gammas = tuple(a * k ** alpha for k in range(1, int(K) + 1))
    return OperatorSpec(gammas, a=a, alpha=alpha)


def operator_from_gammas(gammas: Iterable[float]) -> OperatorSpec:
    return OperatorSpec(tuple(gammas))


@dataclass(frozen=True)
class ChannelPotential:
    """q(t) = offset + sum_j coeffs[j-1] * cos(pi j t).

    The offset exists for shifted-gamma checks with constant potentials; a
    PotentialSpec only admits zero offset.
    """

    coeffs: tuple[float, ...] = ()
    offset: float = 0.0

    def __post_init__(self):
        cs = tuple(_finite_real(c, "coefficient") for c in self.coeffs)
        while cs and cs[-1] == 0.0:
            cs = cs[:-1]
        object.__setattr__(self, "coeffs", cs)
        object.__setattr__(self, "offset", _finite_real(self.offset, "offset"))

    @classmethod
    def constant(cls, c: float) -> "ChannelPotential":
        return cls((), c)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs and self.offset == 0.0

    def __call__(self, t, order: int = 0):
        if order not in (0, 1, 2):
            raise SpecError(f"derivative order must be 0, 1 or 2, got {order!r}")
        tt = np.asarray(t, dtype=float)
        out = np.full(tt.shape, self.offset if order == 0 else 0.0)
        for j, c in enumerate(self.coeffs, start=1):
            if c == 0.0:
                continue
            w = math.pi * j
            if order == 0:
                out += c * np.cos(w * tt)
            elif order == 1:
                out -= c * w * np.sin(w * tt)
            else:
                out -= c * w * w * np.cos(w * tt)
        return float(out) if out.ndim == 0 else out

    def sup_norm(self) -> float:
        """max |q| on [0, 1], from a dense sample refined by the analytic bound."""
        if not self.coeffs:
            return abs(self.offset)
        n = max(4097, 64 * len(self.coeffs) + 1)
        t = np.linspace(0.0, 1.0, n)
        v = np.abs(self(t))
        i = int(np.argmax(v))
        # refine around the sampled maximum with a few Newton steps on q'
        best = float(v[i])
        s = float(t[i])
        for _ in range(20):
            d2 = self(s, 2)
            if d2 == 0.0:
                break
            s_new = min(1.0, max(0.0, s - self(s, 1) / d2))
            if s_new == s:
                break
            s = s_new
        return max(best, abs(self(s)))

    def scaled(self, factor: float) -> "ChannelPotential":
        return ChannelPotential(tuple(factor * c for c in self.coeffs), factor * self.offset)


_ZERO = ChannelPotential()


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Diagonal potential: channel index -> ChannelPotential (zero mean)."""

    channels: Mapping[int, ChannelPotential] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, ch in dict(self.channels).items():
            if isinstance(k, bool) or int(k) != k or k < 1:
                raise SpecError(f"channel index must be a positive integer, got {k!r}")
            if not isinstance(ch, ChannelPotential):
                ch = ChannelPotential(tuple(ch))
            if ch.offset != 0.0:
                raise SpecError(f"channel {k}: potential must have zero mean (no constant term)")
            if not ch.is_zero:
                clean[int(k)] = ch
        object.__setattr__(self, "channels", MappingProxyType(dict(sorted(clean.items()))))

    @classmethod
    def from_coefficients(cls, mapping: Mapping[int, Sequence[float]]) -> "PotentialSpec":
        return cls({int(k): ChannelPotential(tuple(v)) for k, v in mapping.items()})

    def __eq__(self, other):
        return isinstance(other, PotentialSpec) and dict(self.channels) == dict(other.channels)

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(self.channels)

    def channel(self, k: int) -> ChannelPotential:
        return self.channels.get(k, _ZERO)

    def scaled(self, factor: float) -> "PotentialSpec":
        return PotentialSpec({k: ch.scaled(factor) for k, ch in self.channels.items()})


def eval_potential(p: PotentialSpec, k: int, t, order: int = 0):
    """q_k^(order)(t); inactive channels evaluate to zero."""
    return p.channel(k)(t, order)


def trace_endpoint(p: PotentialSpec, endpoint: int) -> float:
    """tr q(endpoint) = sum over active channels of q_k(endpoint)."""
    if endpoint not in (0, 1):
        raise SpecError("endpoint must be 0 or 1")
    return math.fsum(float(ch(float(endpoint))) for ch in p.channels.values())


@dataclass(frozen=True)
class EigenvalueRecord:
    """One eigenvalue of one channel.

    root_param is x (oscillatory, lam = gamma + x**2) or w (principal and
    negative, lam = gamma - w**2). For oscillatory records the long-double
    offset u = x - pi*m is kept as well: at large m the double x cannot carry
    enough digits for the characteristic function to be evaluated accurately.
    """

    k: int
    branch: Branch
    m: int | None
    root_param: float
    lam: float
    residual: float
    offset: np.longdouble | None = field(default=None, compare=False, repr=False)
    lam_ld: np.longdouble | None = field(default=None, compare=False, repr=False)

    @property
    def key(self) -> tuple[int, str, int]:
        return (self.k, self.branch.value, -1 if self.m is None else self.m)

    def check(self, gamma: float, tol: float) -> list[str]:
        """Return a list of violated record invariants (empty when sound)."""
        bad = []
        x = self.root_param
        if self.branch is Branch.OSCILLATORY:
            if self.m is None or self.m < 0:
                bad.append("oscillatory record needs m >= 0")
            elif not (math.pi * self.m < x < math.pi * (self.m + 1)):
                bad.append("root outside its bracket")
            want = gamma + x * x
        else:
            want = gamma - x * x
            if self.branch is Branch.PRINCIPAL and not (0.0 < self.lam < gamma):
                bad.append("principal eigenvalue outside (0, gamma)")
            if self.branch is Branch.NEGATIVE and not self.lam < 0.0:
                bad.append("negative-branch eigenvalue not negative")
        if abs(self.lam - want) > 1e-12 * max(1.0, abs(want), gamma):
            bad.append("lam inconsistent with root_param")
        if not (0.0 <= self.residual <= tol):
            bad.append("residual above tolerance")
        return bad
