"""Scheme integers for an (M, N, T, q) instance: sub-packetization, type counts, rate."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, gcd

from sympy import isprime, nextprime


class ParameterError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """A derived quantity violates an identity it must satisfy (implementation bug)."""


def default_field_size(n: int) -> int:
    """Smallest prime q >= N."""
    return n if isprime(n) else int(nextprime(n))


def capacity(m: int, n: int, t: int) -> Fraction:
    """T-PIR capacity ``(1 - T/N) / (1 - (T/N)**M)``."""
    if m < 1 or t < 1 or t >= n:
        raise ParameterError(f"capacity needs M >= 1 and 1 <= T < N, got M={m}, N={n}, T={t}")
    ratio = Fraction(t, n)
    return (1 - ratio) / (1 - ratio**m)


@dataclass(frozen=True)
class SchemeParams:
    """All derived integers of one scheme instance.

    Sequences are stored 0-based: ``alpha[i - 1]`` is the count for type
    cardinality i.  ``d_arr`` has M - 1 entries.
    """

    M: int
    N: int
    T: int
    q: int
    d: int
    n: int
    t: int
    Ltilde: int
    L: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    d_arr: tuple[int, ...]
    D: int

    @property
    def rate(self) -> Fraction:
        return Fraction(self.L, self.D)

    @property
    def small_regime(self) -> bool:
        """True when T < N < 2T."""
        return self.N < 2 * self.T

    def a(self, i: int) -> int:
        """alpha_i, 1-based."""
        return self.alpha[i - 1]

    def b(self, i: int) -> int:
        """beta_i, 1-based."""
        return self.beta[i - 1]

    def rows_per_type(self, i: int) -> int:
        """d_i, 1-based."""
        return self.d_arr[i - 1]

    def server_group_count(self, server: int, size: int) -> int:
        """How many sums of one fixed full type of cardinality ``size`` a server answers."""
        return self.a(size) if server <= self.T else self.b(size)


def _exact_int(x: Fraction, what: str) -> int:
    if x.denominator != 1:
        raise ConsistencyError(f"{what} = {x} is not an integer")
    return int(x)


def derive_params(M: int, N: int, T: int, q: int | None = None) -> SchemeParams:
    if M < 2:
        raise ParameterError(f"need M >= 2 records, got {M}")
    if T < 1 or T >= N:
        raise ParameterError(f"need 1 <= T < N, got N={N}, T={T}")
    if q is None:
        q = default_field_size(N)
    if q < N:
        raise ParameterError(f"field size q={q} must be >= N={N}")
    if not isprime(q):
        raise ParameterError(f"field size q={q} must be prime")

    d = gcd(N, T)
    n, t = N // d, T // d
    ltilde = n ** (M - 2)
    d_arr = [(n - t) ** (i - 1) * t ** (M - 1 - i) for i in range(1, M)]

    if N >= 2 * T:
        alpha1, beta1 = t ** (M - 2), 0
    else:
        alpha1 = _exact_int(Fraction(t ** (M - 1) - (t - n) ** (M - 1), n), "alpha_1")
        beta1 = _exact_int(Fraction(t * (t ** (M - 2) - (t - n) ** (M - 2)), n), "beta_1")
    alpha, beta = [alpha1], [beta1]
    for di in d_arr:
        alpha.append(di - alpha[-1])
        beta.append(di - beta[-1])

    p = SchemeParams(
        M=M, N=N, T=T, q=q, d=d, n=n, t=t,
        Ltilde=ltilde, L=N * ltilde,
        alpha=tuple(alpha), beta=tuple(beta), d_arr=tuple(d_arr),
        D=d * (n**M - t**M) // (n - t),
    )
    problems = check_params(p)
    if problems:
        raise ConsistencyError("; ".join(problems))
    return p


def check_params(p: SchemeParams) -> list[str]:
    """Every identity the derived integers must satisfy; empty list when sound."""
    M, N, T, d, n, t = p.M, p.N, p.T, p.d, p.n, p.t
    out = []
    if p.L != d * n ** (M - 1):
        out.append(f"L={p.L} != d*n^(M-1)={d * n ** (M - 1)}")
    if min(p.alpha) < 0 or min(p.beta) < 0 or min(p.d_arr) < 0:
        out.append("negative alpha/beta/d entries")
    for i in range(1, M):
        a, b, di = p.a(i), p.b(i), p.rows_per_type(i)
        if T * a + (N - T) * b != di * T:
            out.append(f"T*alpha_{i} + (N-T)*beta_{i} != d_{i}*T")
        if a + p.a(i + 1) != di or b + p.b(i + 1) != di:
            out.append(f"alpha/beta recurrence broken at i={i}")
    for i in range(1, M + 1):
        if T * p.a(i) + (N - T) * p.b(i) != d * (n - t) ** (i - 1) * t ** (M - i):
            out.append(f"download identity fails at i={i}")
    weighted_a = sum(comb(M - 1, i - 1) * p.a(i) for i in range(1, M + 1))
    weighted_b = sum(comb(M - 1, i - 1) * p.b(i) for i in range(1, M + 1))
    if weighted_a != p.Ltilde or weighted_b != p.Ltilde:
        out.append(f"desired-symbol totals ({weighted_a}, {weighted_b}) != L~={p.Ltilde}")
    if sum(comb(M - 2, i - 1) * p.rows_per_type(i) for i in range(1, M)) != p.Ltilde:
        out.append("row blocks do not tile L~")
    first, rest = per_server_counts(p)
    if T * first + (N - T) * rest != p.D:
        out.append(f"per-server counts ({first}, {rest}) do not sum to D={p.D}")
    if p.rate != capacity(M, N, T):
        out.append(f"rate {p.rate} != capacity {capacity(M, N, T)}")
    return out


def per_server_counts(p: SchemeParams) -> tuple[int, int]:
    """Answer count for each of servers 1..T and for each of servers T+1..N."""
    first = sum(comb(p.M, i) * p.a(i) for i in range(1, p.M + 1))
    rest = sum(comb(p.M, i) * p.b(i) for i in range(1, p.M + 1))
    return first, rest
