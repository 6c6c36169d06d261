//! Scalar types and small arithmetic helpers shared across the crate.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Exact rational scalar used for every series coefficient.
pub type QRat = BigRational;

/// Integer `n` as a rational.
pub fn qq(n: i64) -> QRat {
    QRat::from_integer(BigInt::from(n))
}

/// The fraction `n/d` as a rational. Panics if `d == 0`.
pub fn qq_frac(n: i64, d: i64) -> QRat {
    QRat::new(BigInt::from(n), BigInt::from(d))
}

/// Exact conversion to `i64`, if the rational is an integer that fits.
pub fn qrat_to_i64(x: &QRat) -> Option<i64> {
    if x.is_integer() {
        x.numer().to_i64()
    } else {
        None
    }
}

/// `n!` as a big integer.
pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= BigInt::from(k);
    }
    acc
}

/// Least positive inverse of `a` modulo `m > 1`, if `gcd(a, m) == 1`.
pub fn inv_mod(a: i64, m: i64) -> Option<i64> {
    assert!(m > 1, "inv_mod needs modulus > 1");
    let e = a.extended_gcd(&m);
    if e.gcd != 1 && e.gcd != -1 {
        return None;
    }
    // e.x * a + e.y * m == e.gcd; normalise to the least positive residue.
    let mut x = e.x * e.gcd.signum();
    x = x.rem_euclid(m);
    if x == 0 {
        None
    } else {
        Some(x)
    }
}

/// Floor of the square root of a nonnegative integer.
pub fn isqrt(n: i64) -> i64 {
    assert!(n >= 0, "isqrt of negative number");
    num_integer::Roots::sqrt(&n)
}

/// Sum of `d^power` over the positive divisors `d` of `n > 0`.
pub fn divisor_power_sum(n: i64, power: u32) -> BigInt {
    assert!(n > 0, "divisor sum needs a positive argument");
    let mut total = BigInt::zero();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            total += BigInt::from(d).pow(power);
            let e = n / d;
            if e != d {
                total += BigInt::from(e).pow(power);
            }
        }
        d += 1;
    }
    total
}

/// Positive divisors of `n > 0`, ascending.
pub fn divisors(n: i64) -> Vec<i64> {
    assert!(n > 0, "divisors of nonpositive number");
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

/// Distinct prime factors of `n > 1`, ascending.
pub fn prime_factors(n: i64) -> Vec<i64> {
    assert!(n > 1, "prime_factors needs n > 1");
    let mut rest = n;
    let mut ps = Vec::new();
    let mut p = 2;
    while p * p <= rest {
        if rest % p == 0 {
            ps.push(p);
            while rest % p == 0 {
                rest /= p;
            }
        }
        p += 1;
    }
    if rest > 1 {
        ps.push(rest);
    }
    ps
}

/// True if `n > 0` has no repeated prime factor.
pub fn is_squarefree(n: i64) -> bool {
    assert!(n > 0);
    if n == 1 {
        return true;
    }
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        if rest % p == 0 {
            rest /= p;
            if rest % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Deterministic primality test, exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    // Miller–Rabin with a base set sufficient for all 64-bit integers.
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `a * b mod m` without overflow.
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// `a^e mod m` by binary exponentiation.
pub fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    acc
}

/// Reduce a rational with denominator coprime to `q` into `Z/q`.
pub fn qrat_mod(x: &QRat, q: u64) -> Option<u64> {
    let qm = BigInt::from(q);
    let num = x.numer().mod_floor(&qm).to_u64()?;
    let den = x.denom().mod_floor(&qm).to_u64()?;
    if den == 0 || BigInt::from(den).gcd(&qm) != BigInt::one() {
        return None;
    }
    let inv = pow_mod(den, q - 2, q); // q prime in all call sites
    Some(mul_mod(num, inv, q))
}
