"""Prime-field arithmetic, fixed-point encoding, and threshold secret sharing.

Every protocol value is an element of Z_p.  Real-valued vectors enter the
field through a fixed-point map (scale by 10^rho, negatives embedded as
p - |x|).  Shamir shares are polynomial evaluations: party u (0-based)
holds the value at point u + 1, so any t parties can interpolate the
constant term.  Multiplication of shared values uses pre-dealt
multiplication triples, which keeps the share degree at t - 1.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dataclass_field
from typing import Iterable, Mapping, Sequence

MERSENNE_61 = (1 << 61) - 1  # default working modulus for protocol runs
SMALL_TEST_PRIME = 97        # small field used by the statistical hiding tests

SQUARED_EUCLIDEAN = "squared-euclidean"
INNER_PRODUCT = "inner-product"
METRICS = (SQUARED_EUCLIDEAN, INNER_PRODUCT)


class InsufficientShares(Exception):
    """Fewer than t distinct labeled shares were supplied."""


class TripleReuse(Exception):
    """A multiplication triple was consumed a second time."""


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n below 3.3 * 10^24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldParams:
    """Field modulus plus the sharing policy (n parties, threshold t).

    The modulus must dominate 2^k, the fixed-point scale 10^rho, and the
    party count, otherwise shares or encodings would wrap.
    """

    p: int = MERSENNE_61
    k: int = 40
    rho: int = 4
    n: int = 3
    t: int = 2

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"modulus {self.p} is not prime")
        floor = max(1 << self.k, 10 ** self.rho, self.n)
        if self.p < floor:
            raise ValueError(
                f"modulus {self.p} below required floor max(2^k, 10^rho, n) = {floor}"
            )
        if not 1 <= self.t <= self.n:
            raise ValueError(f"threshold t={self.t} outside 1..n={self.n}")

    @property
    def scale(self) -> int:
        return 10 ** self.rho

    @property
    def half(self) -> int:
        # values above this reconstruct as negatives
        return self.p // 2


def signed_value(x: int, p: int) -> int:
    """Map a field element to its signed representative in (-p/2, p/2]."""
    return x - p if x > p // 2 else x


def encode_scalar(v: float | int, params: FieldParams) -> int:
    m = round(v * params.scale)
    if 2 * abs(m) >= params.p:
        raise OverflowError(f"scaled coordinate {m} exceeds signed field range")
    return m % params.p


def decode_scalar(x: int, params: FieldParams, power: int = 1) -> float:
    """Inverse of the fixed-point map; power=2 decodes products of encodings."""
    return signed_value(x % params.p, params.p) / params.scale ** power


def encode_vector(v: Sequence[float | int], params: FieldParams) -> list[int]:
    return [encode_scalar(c, params) for c in v]


def scale_vector(v: Sequence[float | int], rho: int) -> tuple[int, ...]:
    """Signed integer form of a vector at scale 10^rho (no field reduction);
    plaintext twins work on these so their arithmetic matches the field's."""
    s = 10 ** rho
    return tuple(round(c * s) for c in v)


def decode_vector(xs: Sequence[int], params: FieldParams, power: int = 1) -> list[float]:
    return [decode_scalar(x, params, power) for x in xs]


def distance_range_ok(params: FieldParams, dim: int, max_abs: float) -> bool:
    """Whether a dim-length metric over coordinates bounded by max_abs fits
    the signed range (precondition of the shared distance circuit)."""
    m = round(max_abs * params.scale)
    return 2 * dim * m * m < params.p


class KeyedPrg:
    """Deterministic byte stream: SHA-256 in counter mode over (seed, domain).

    All protocol randomness (share polynomial coefficients, triples, level
    draws, synthetic data) comes from instances of this class, which makes
    every run replayable from its seed.
    """

    def __init__(self, seed: int | str | bytes, domain: str = ""):
        if isinstance(seed, int):
            seed = seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        self._key = hashlib.sha256(seed + b"|" + domain.encode()).digest()
        self._counter = 0
        self._buf = b""

    def child(self, domain: str) -> "KeyedPrg":
        return KeyedPrg(self._key, domain)

    def _refill(self):
        self._buf += hashlib.sha256(
            self._key + self._counter.to_bytes(8, "big")
        ).digest()
        self._counter += 1

    def bytes(self, nbytes: int) -> bytes:
        while len(self._buf) < nbytes:
            self._refill()
        out, self._buf = self._buf[:nbytes], self._buf[nbytes:]
        return out

    def rand_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        nbits = bound.bit_length()
        nbytes = (nbits + 7) // 8
        mask = (1 << nbits) - 1
        while True:
            x = int.from_bytes(self.bytes(nbytes), "big") & mask
            if x < bound:
                return x

    def randfield(self, p: int) -> int:
        return self.rand_below(p)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return self.rand_below(1 << 53) / (1 << 53)


def poly_eval(coeffs: Sequence[int], x: int, p: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def ss_share(secret: int, params: FieldParams, rng) -> list[int]:
    """Split a field element into n shares; index u holds the evaluation at u+1.

    The polynomial has degree t - 1 with constant term `secret`; coefficients
    are drawn from `rng` (anything exposing randfield(p))."""
    p = params.p
    coeffs = [secret % p] + [rng.randfield(p) for _ in range(params.t - 1)]
    return [poly_eval(coeffs, u + 1, p) for u in range(params.n)]


_weight_cache: dict[tuple[int, tuple[int, ...]], tuple[int, ...]] = {}


def lagrange_weights_at_zero(points: Sequence[int], p: int) -> tuple[int, ...]:
    """Interpolation weights w_j with sum(w_j * f(x_j)) = f(0)."""
    key = (p, tuple(points))
    cached = _weight_cache.get(key)
    if cached is not None:
        return cached
    ws = []
    for xj in points:
        num, den = 1, 1
        for xm in points:
            if xm == xj:
                continue
            num = num * xm % p
            den = den * (xm - xj) % p
        ws.append(num * pow(den, -1, p) % p)
    out = tuple(ws)
    _weight_cache[key] = out
    return out


def ss_recon(shares: Mapping[int, int] | Iterable[tuple[int, int]],
             params: FieldParams) -> int:
    """Lagrange-interpolate the secret at 0 from labeled shares.

    `shares` maps party id (0-based) to share value; the first t labels in
    sorted order are used.  Raises InsufficientShares below threshold."""
    if isinstance(shares, Mapping):
        items = sorted(shares.items())
    else:
        items = sorted(dict(shares).items())
    if len(items) < params.t:
        raise InsufficientShares(
            f"got {len(items)} shares, threshold is {params.t}"
        )
    items = items[: params.t]
    points = [u + 1 for u, _ in items]
    ws = lagrange_weights_at_zero(points, params.p)
    return sum(w * v for w, (_, v) in zip(ws, items)) % params.p


@dataclass
class ShareVector:
    """A party-indexed bundle of shares for one field vector.

    shares[u] is party u's coordinate-wise share list; the simulator keeps
    all of them in one object, with disclosure discipline enforced by the
    protocol code rather than by physical separation."""

    dim: int
    shares: list[list[int]]
    params: FieldParams

    @classmethod
    def from_field(cls, values: Sequence[int], params: FieldParams, rng) -> "ShareVector":
        cols = [ss_share(v, params, rng) for v in values]
        shares = [[col[u] for col in cols] for u in range(params.n)]
        return cls(dim=len(values), shares=shares, params=params)

    @classmethod
    def from_plain(cls, vec: Sequence[float | int], params: FieldParams, rng) -> "ShareVector":
        return cls.from_field(encode_vector(vec, params), params, rng)

    @classmethod
    def of_constant(cls, value: int, dim: int, params: FieldParams) -> "ShareVector":
        # constant polynomial: every party holds the public value itself
        v = value % params.p
        return cls(dim=dim, shares=[[v] * dim for _ in range(params.n)], params=params)

    def reconstruct(self, party_ids: Sequence[int] | None = None) -> list[int]:
        if party_ids is None:
            party_ids = range(self.params.t)
        party_ids = sorted(party_ids)
        if len(party_ids) < self.params.t:
            raise InsufficientShares(
                f"got {len(party_ids)} parties, threshold is {self.params.t}"
            )
        party_ids = party_ids[: self.params.t]
        ws = lagrange_weights_at_zero([u + 1 for u in party_ids], self.params.p)
        p = self.params.p
        rows = [self.shares[u] for u in party_ids]
        return [
            sum(w * row[j] for w, row in zip(ws, rows)) % p
            for j in range(self.dim)
        ]


def _check_compatible(x: ShareVector, y: ShareVector):
    if x.params != y.params or x.dim != y.dim:
        raise ValueError("share vectors disagree on params or dimension")


def share_add(x: ShareVector, y: ShareVector) -> ShareVector:
    _check_compatible(x, y)
    p = x.params.p
    return ShareVector(
        dim=x.dim,
        shares=[[(a + b) % p for a, b in zip(xu, yu)]
                for xu, yu in zip(x.shares, y.shares)],
        params=x.params,
    )


def share_sub(x: ShareVector, y: ShareVector) -> ShareVector:
    _check_compatible(x, y)
    p = x.params.p
    return ShareVector(
        dim=x.dim,
        shares=[[(a - b) % p for a, b in zip(xu, yu)]
                for xu, yu in zip(x.shares, y.shares)],
        params=x.params,
    )


def share_neg(x: ShareVector) -> ShareVector:
    p = x.params.p
    return ShareVector(
        dim=x.dim,
        shares=[[(-a) % p for a in xu] for xu in x.shares],
        params=x.params,
    )


def share_coord_sum(x: ShareVector) -> ShareVector:
    """Local sum of all coordinates into a width-1 shared scalar."""
    p = x.params.p
    return ShareVector(
        dim=1,
        shares=[[sum(xu) % p] for xu in x.shares],
        params=x.params,
    )


@dataclass
class BeaverTriple:
    """Shares of (a, b, c) with c = a * b coordinate-wise; single use."""

    a: list[list[int]]
    b: list[list[int]]
    c: list[list[int]]
    width: int
    params: FieldParams
    consumed: bool = False


class TripleDealer:
    """Trusted dealer drawing triples from a seeded stream.

    Simulation-only scaffolding standing in for a multiplication
    preprocessing phase; the stream is deterministic so runs replay."""

    def __init__(self, params: FieldParams, rng: KeyedPrg):
        self.params = params
        self.rng = rng
        self.issued = 0

    def triple(self, width: int) -> BeaverTriple:
        p = self.params.p
        n = self.params.n
        avals = [self.rng.randfield(p) for _ in range(width)]
        bvals = [self.rng.randfield(p) for _ in range(width)]
        cvals = [a * b % p for a, b in zip(avals, bvals)]
        cols_a = [ss_share(v, self.params, self.rng) for v in avals]
        cols_b = [ss_share(v, self.params, self.rng) for v in bvals]
        cols_c = [ss_share(v, self.params, self.rng) for v in cvals]
        self.issued += 1
        return BeaverTriple(
            a=[[col[u] for col in cols_a] for u in range(n)],
            b=[[col[u] for col in cols_b] for u in range(n)],
            c=[[col[u] for col in cols_c] for u in range(n)],
            width=width,
            params=self.params,
        )


def _open_to_public(share_rows: list[list[int]], params: FieldParams) -> list[int]:
    """Reconstruct each coordinate from the first t parties' broadcast shares."""
    ws = lagrange_weights_at_zero(list(range(1, params.t + 1)), params.p)
    p = params.p
    width = len(share_rows[0])
    rows = share_rows[: params.t]
    return [sum(w * row[j] for w, row in zip(ws, rows)) % p for j in range(width)]


def share_mul(x: ShareVector, y: ShareVector, triple: BeaverTriple,
              network=None, tag: str = "mul") -> ShareVector:
    """Coordinate-wise product of two shared vectors via one masked opening.

    Each party broadcasts its shares of x - a and y - b; the opened masks
    never reveal x or y because a, b are uniform.  Consumes the triple."""
    _check_compatible(x, y)
    if triple.consumed:
        raise TripleReuse("multiplication triple already consumed")
    if triple.width != x.dim or triple.params != x.params:
        raise ValueError("triple width/params mismatch")
    triple.consumed = True
    params = x.params
    p = params.p
    n = params.n
    d_rows = [[(xv - av) % p for xv, av in zip(x.shares[u], triple.a[u])]
              for u in range(n)]
    e_rows = [[(yv - bv) % p for yv, bv in zip(y.shares[u], triple.b[u])]
              for u in range(n)]
    if network is not None:
        network.open_round(tag, {u: (d_rows[u], e_rows[u]) for u in range(n)})
    dvals = _open_to_public(d_rows, params)
    evals = _open_to_public(e_rows, params)
    ledger = getattr(network, "ledger", None)
    if ledger is not None:
        ledger.ac_mul_ops += x.dim
        ledger.recon_ops += 2 * x.dim
    out = []
    for u in range(n):
        au, bu, cu = triple.a[u], triple.b[u], triple.c[u]
        out.append([
            (cu[j] + dvals[j] * bu[j] + evals[j] * au[j] + dvals[j] * evals[j]) % p
            for j in range(x.dim)
        ])
    return ShareVector(dim=x.dim, shares=out, params=params)


def ac_distance(x: ShareVector, y: ShareVector, metric: str,
                dealer: TripleDealer, network=None) -> ShareVector:
    """Shared distance circuit; reconstructs to the plaintext metric at
    scale 10^(2 rho).

    squared-euclidean needs one squaring round over the difference vector;
    inner-product one product round.  Cosine similarity is handled upstream
    by normalizing plaintext inputs before encoding, which reduces it to
    inner-product."""
    if metric not in METRICS:
        raise ValueError(f"unsupported metric {metric!r}")
    if metric == SQUARED_EUCLIDEAN:
        diff = share_sub(x, y)
        sq = share_mul(diff, diff, dealer.triple(x.dim), network, tag="dist")
        return share_coord_sum(sq)
    prod = share_mul(x, y, dealer.triple(x.dim), network, tag="dist")
    return share_coord_sum(prod)


def ac_compare_sign(a: ShareVector, b: ShareVector, coordinator: int,
                    network=None) -> int:
    """Sign of (a - b) as seen by the coordinator, who alone reconstructs.

    The coordinator gathers t shares of the difference, interprets the
    signed value, and announces only the sign; other parties never see the
    magnitude.  Returns -1, 0 or 1."""
    _check_compatible(a, b)
    if a.dim != 1:
        raise ValueError("comparison expects shared scalars")
    params = a.params
    p = params.p
    delta = [(a.shares[u][0] - b.shares[u][0]) % p for u in range(params.n)]
    contributors = sorted(set(range(params.t)) | {coordinator})[: params.t]
    if len(contributors) < params.t:
        raise InsufficientShares("not enough parties for comparison")
    if network is not None:
        network.gather_round("cmp", coordinator,
                             {u: delta[u] for u in contributors})
    value = ss_recon({u: delta[u] for u in contributors}, params)
    sig = signed_value(value, p)
    sign = (sig > 0) - (sig < 0)
    if network is not None:
        network.broadcast(coordinator, "cmp-bit", sign)
    ledger = getattr(network, "ledger", None)
    if ledger is not None:
        ledger.ac_compare_ops += 1
        ledger.recon_ops += 1
    return sign


def ac_compare(a: ShareVector, b: ShareVector, coordinator: int,
               network=None) -> bool:
    """Strict comparison a > b over shares (sign reveal at the coordinator)."""
    return ac_compare_sign(a, b, coordinator, network) > 0
