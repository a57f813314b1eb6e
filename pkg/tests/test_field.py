import itertools
import random

import pytest
from scipy.stats import chi2_contingency

from shareann.field import (
    INNER_PRODUCT,
    MERSENNE_61,
    SQUARED_EUCLIDEAN,
    FieldParams,
    InsufficientShares,
    KeyedPrg,
    ShareVector,
    TripleDealer,
    TripleReuse,
    ac_compare,
    ac_compare_sign,
    ac_distance,
    decode_scalar,
    decode_vector,
    encode_scalar,
    encode_vector,
    is_prime,
    scale_vector,
    share_add,
    share_mul,
    share_sub,
    ss_recon,
    ss_share,
)

P97 = FieldParams(p=97, k=6, rho=1, n=3, t=2)
DEFAULT = FieldParams()


class FixedCoeffs:
    """Stand-in randomness source yielding a scripted coefficient stream."""

    def __init__(self, values):
        self.values = list(values)

    def randfield(self, p):
        return self.values.pop(0) % p


def test_field_params_validation():
    with pytest.raises(ValueError):
        FieldParams(p=91, k=4, rho=1, n=3, t=2)  # 91 = 7 * 13
    with pytest.raises(ValueError):
        FieldParams(p=5, k=1, rho=0, n=7, t=2)  # modulus below party count
    with pytest.raises(ValueError):
        FieldParams(p=97, k=6, rho=1, n=3, t=4)  # t > n
    with pytest.raises(ValueError):
        FieldParams(p=97, k=6, rho=3, n=3, t=2)  # 10^rho above modulus
    assert DEFAULT.p == MERSENNE_61
    assert is_prime(DEFAULT.p)


def test_encode_decode_roundtrip():
    params = FieldParams(rho=2)
    v = (1.5, -2.0)
    assert decode_vector(encode_vector(v, params), params) == [1.5, -2.0]
    zeros = encode_vector([0.0] * 5, params)
    assert zeros == [0] * 5
    assert scale_vector(v, 2) == (150, -200)


def test_encode_overflow():
    small = FieldParams(p=97, k=6, rho=1, n=3, t=2)
    with pytest.raises(OverflowError):
        encode_scalar(7.0, small)  # 70 > 97/2
    encode_scalar(4.0, small)  # 40 < 48.5 fits


def test_encode_roundtrip_random():
    params = FieldParams(rho=4)
    rng = random.Random(11)
    for _ in range(200):
        x = round(rng.uniform(-50, 50), 4)
        assert decode_scalar(encode_scalar(x, params), params) == pytest.approx(x, abs=1e-9)


def test_keyed_prg_determinism():
    a = KeyedPrg(7, "x")
    b = KeyedPrg(7, "x")
    assert [a.randfield(97) for _ in range(20)] == [b.randfield(97) for _ in range(20)]
    assert KeyedPrg(7, "x").bytes(8) != KeyedPrg(7, "y").bytes(8)
    u = KeyedPrg(3).random()
    assert 0.0 <= u < 1.0


def test_share_worked_example():
    # polynomial 42 + 7x over Z_97 evaluated at 1, 2, 3
    shares = ss_share(42, P97, FixedCoeffs([7]))
    assert shares == [49, 56, 63]
    assert ss_recon({0: 49, 1: 56}, P97) == 42
    assert ss_recon({1: 56, 2: 63}, P97) == 42
    assert ss_recon({0: 49, 2: 63}, P97) == 42


def test_degree_zero_sharing():
    params = FieldParams(p=97, k=6, rho=1, n=4, t=1)
    shares = ss_share(42, params, FixedCoeffs([]))
    assert shares == [42, 42, 42, 42]


def test_insufficient_shares():
    shares = ss_share(13, P97, KeyedPrg(1))
    with pytest.raises(InsufficientShares):
        ss_recon({0: shares[0]}, P97)


def test_threshold_reconstruction_all_subsets():
    # every t-subset of every (n, t) configuration up to n=6 reconstructs
    rng = KeyedPrg(5)
    secrets = 0
    for n in range(1, 7):
        for t in range(1, n + 1):
            params = FieldParams(p=MERSENNE_61, k=40, rho=2, n=n, t=t)
            for _ in range(48):
                s = rng.randfield(params.p)
                shares = ss_share(s, params, rng)
                secrets += 1
                for subset in itertools.combinations(range(n), t):
                    assert ss_recon({u: shares[u] for u in subset}, params) == s
    assert secrets >= 1000


def test_share_roundtrip_many():
    rng = KeyedPrg(9)
    for _ in range(1000):
        s = rng.randfield(P97.p)
        assert ss_recon(dict(enumerate(ss_share(s, P97, rng))), P97) == s


def test_single_share_hiding_chi_square():
    # marginal distribution of one share must not depend on the secret
    trials = 10_000
    observations = []
    for secret, tag in ((10, "a"), (55, "b")):
        rng = KeyedPrg(31, tag)
        counts = [0] * 97
        for _ in range(trials):
            counts[ss_share(secret, P97, rng)[0]] += 1
        observations.append(counts)
    _, pvalue, _, _ = chi2_contingency(observations)
    assert pvalue > 0.01


def test_share_vector_roundtrip_and_subsets():
    rng = KeyedPrg(2)
    params = FieldParams(rho=3, n=5, t=3)
    sv = ShareVector.from_plain([1.25, -0.5, 0.0], params, rng)
    expected = encode_vector([1.25, -0.5, 0.0], params)
    for subset in itertools.combinations(range(5), 3):
        assert sv.reconstruct(subset) == expected
    with pytest.raises(InsufficientShares):
        sv.reconstruct([0, 1])


def test_homomorphism_add_mul():
    rng = KeyedPrg(4)
    params = FieldParams(n=4, t=2)
    dealer = TripleDealer(params, KeyedPrg(4, "dealer"))
    p = params.p
    for _ in range(1000):
        x = rng.randfield(p)
        y = rng.randfield(p)
        xs = ShareVector.from_field([x], params, rng)
        ys = ShareVector.from_field([y], params, rng)
        assert share_add(xs, ys).reconstruct() == [(x + y) % p]
        assert share_sub(xs, ys).reconstruct() == [(x - y) % p]
        prod = share_mul(xs, ys, dealer.triple(1))
        assert prod.reconstruct() == [x * y % p]


def test_share_mul_examples_and_triple_reuse():
    rng = KeyedPrg(6)
    params = FieldParams(n=3, t=2)
    dealer = TripleDealer(params, KeyedPrg(6, "dealer"))
    three = ShareVector.from_field([3], params, rng)
    four = ShareVector.from_field([4], params, rng)
    assert share_add(three, four).reconstruct() == [7]
    five = ShareVector.from_field([5], params, rng)
    six = ShareVector.from_field([6], params, rng)
    assert share_mul(five, six, dealer.triple(1)).reconstruct() == [30]
    zero = ShareVector.from_field([0], params, rng)
    assert share_mul(zero, six, dealer.triple(1)).reconstruct() == [0]
    triple = dealer.triple(1)
    share_mul(five, six, triple)
    with pytest.raises(TripleReuse):
        share_mul(five, six, triple)


def test_ac_distance_examples():
    params = FieldParams(rho=0)
    rng = KeyedPrg(8)
    dealer = TripleDealer(params, KeyedPrg(8, "dealer"))
    x = ShareVector.from_plain((1, 2), params, rng)
    y = ShareVector.from_plain((4, 6), params, rng)
    assert ac_distance(x, y, SQUARED_EUCLIDEAN, dealer).reconstruct() == [25]
    assert ac_distance(x, x, SQUARED_EUCLIDEAN, dealer).reconstruct() == [0]
    e1 = ShareVector.from_plain((1, 0), params, rng)
    e2 = ShareVector.from_plain((0, 1), params, rng)
    assert ac_distance(e1, e2, INNER_PRODUCT, dealer).reconstruct() == [0]


def test_ac_distance_exact_on_random_integers():
    params = FieldParams(rho=0, n=4, t=3)
    rng = KeyedPrg(12)
    dealer = TripleDealer(params, KeyedPrg(12, "dealer"))
    pyrng = random.Random(12)
    for _ in range(50):
        a = [pyrng.randrange(-1000, 1000) for _ in range(8)]
        b = [pyrng.randrange(-1000, 1000) for _ in range(8)]
        xs = ShareVector.from_plain(a, params, rng)
        ys = ShareVector.from_plain(b, params, rng)
        sq = ac_distance(xs, ys, SQUARED_EUCLIDEAN, dealer).reconstruct()[0]
        assert sq == sum((u - v) ** 2 for u, v in zip(a, b))
        ip = ac_distance(xs, ys, INNER_PRODUCT, dealer).reconstruct()[0]
        expected = sum(u * v for u, v in zip(a, b)) % params.p
        assert ip == expected


def test_ac_compare():
    params = FieldParams(rho=0)
    rng = KeyedPrg(3)
    s25 = ShareVector.from_plain([25], params, rng)
    s9 = ShareVector.from_plain([9], params, rng)
    s0 = ShareVector.from_plain([0], params, rng)
    s1 = ShareVector.from_plain([1], params, rng)
    assert ac_compare(s25, s9, 0) is True
    assert ac_compare(s9, s9, 0) is False
    assert ac_compare(s0, s1, 0) is False
    assert ac_compare_sign(s9, s25, 1) == -1
    assert ac_compare_sign(s9, s9, 2) == 0
