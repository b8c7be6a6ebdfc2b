//! Finite-field arithmetic for the prime-power MUB constructions.
//!
//! [`FiniteField`] is a table-driven GF(p^n). Elements are plain indices
//! `0..q`; the index of an element is `sum c_i p^i` where `c_i` are its
//! coefficients over the polynomial basis `1, x, ..., x^{n-1}`.
//!
//! [`GaloisRing4`] is GR(4, n) = Z_4[x]/(H(x)), where `H` is the Hensel lift of
//! the same primitive polynomial used for GF(2^n). Its Teichmüller set drives
//! the characteristic-2 construction, where the additive characters of
//! GF(2^n) alone do not give unbiased bases.

use crate::error::{Result, SqstError};

/// Largest field order built unless the caller asks for more.
pub const DEFAULT_MAX_ORDER: usize = 64;

/// Conway polynomials for the extension fields with `p^n <= 64`,
/// coefficients listed from the constant term up to the (monic) leading term.
const CONWAY: &[(u32, u32, &[u32])] = &[
    (2, 2, &[1, 1, 1]),
    (2, 3, &[1, 1, 0, 1]),
    (2, 4, &[1, 1, 0, 0, 1]),
    (2, 5, &[1, 0, 1, 0, 0, 1]),
    (2, 6, &[1, 1, 0, 1, 1, 0, 1]),
    (3, 2, &[2, 2, 1]),
    (3, 3, &[1, 2, 0, 1]),
    (5, 2, &[2, 4, 1]),
    (7, 2, &[3, 6, 1]),
];

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut f = 2;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 1;
    }
    true
}

/// Splits `d` into `(p, n)` with `d = p^n`, or `None` if `d` is not a prime power.
pub fn prime_power(d: usize) -> Option<(u32, u32)> {
    if d < 2 {
        return None;
    }
    let d = d as u64;
    let mut p = 2;
    while !d.is_multiple_of(p) {
        p += 1;
    }
    let mut rest = d;
    let mut n = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        n += 1;
    }
    (rest == 1).then_some((p as u32, n))
}

/// GF(p^n) with full addition and multiplication tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteField {
    p: u32,
    n: u32,
    q: usize,
    modulus: Vec<u32>,
    add: Vec<u32>,
    mul: Vec<u32>,
    trace: Vec<u32>,
}

/// Builds GF(p^n) with the default order limit of 64.
pub fn build_field(p: u32, n: u32) -> Result<FiniteField> {
    FiniteField::with_max_order(p, n, DEFAULT_MAX_ORDER)
}

impl FiniteField {
    pub fn with_max_order(p: u32, n: u32, max_order: usize) -> Result<Self> {
        if !is_prime(p as u64) {
            return Err(SqstError::NotPrime(p));
        }
        if n == 0 {
            return Err(SqstError::InvalidArgument(
                "extension degree must be at least 1".into(),
            ));
        }
        let q = (p as u128)
            .checked_pow(n)
            .filter(|&q| q <= max_order as u128);
        let Some(q) = q else {
            return Err(SqstError::FieldTooLarge {
                p,
                n,
                max: max_order,
            });
        };
        let q = q as usize;

        let modulus = if n == 1 {
            vec![p - smallest_primitive_root(p), 1]
        } else {
            match CONWAY.iter().find(|(cp, cn, _)| *cp == p && *cn == n) {
                Some((_, _, c)) => c.to_vec(),
                None => first_primitive_polynomial(p, n),
            }
        };

        let digits = |mut a: usize| -> Vec<u32> {
            (0..n)
                .map(|_| {
                    let c = (a % p as usize) as u32;
                    a /= p as usize;
                    c
                })
                .collect()
        };
        let index = |c: &[u32]| -> usize {
            c.iter()
                .rev()
                .fold(0, |acc, &x| acc * p as usize + x as usize)
        };

        let mut add = vec![0u32; q * q];
        for a in 0..q {
            let da = digits(a);
            for b in 0..q {
                let db = digits(b);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a * q + b] = index(&s) as u32;
            }
        }

        let mut mul = vec![0u32; q * q];
        if n == 1 {
            for a in 0..q {
                for b in 0..q {
                    mul[a * q + b] = ((a * b) % q) as u32;
                }
            }
        } else {
            let powers = primitive_powers(p, &modulus).expect("tabulated polynomial is primitive");
            let exp: Vec<usize> = powers.iter().map(|c| index(c)).collect();
            let mut log = vec![0usize; q];
            for (i, &e) in exp.iter().enumerate() {
                log[e] = i;
            }
            for a in 1..q {
                for b in 1..q {
                    mul[a * q + b] = exp[(log[a] + log[b]) % (q - 1)] as u32;
                }
            }
        }

        let mut field = FiniteField {
            p,
            n,
            q,
            modulus,
            add,
            mul,
            trace: vec![0; q],
        };
        field.trace = (0..q)
            .map(|x| {
                let mut frob = x;
                let mut acc = 0usize;
                for _ in 0..n {
                    acc = field.add(acc, frob);
                    frob = field.pow(frob, p as u64);
                }
                debug_assert!(acc < p as usize, "field trace left the prime subfield");
                acc as u32
            })
            .collect();
        Ok(field)
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> usize {
        self.q
    }

    /// Defining polynomial, constant term first. For prime fields this is
    /// `x - g` with `g` the smallest primitive root.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        self.add[a * self.q + b] as usize
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.q + b] as usize
    }

    pub fn neg(&self, a: usize) -> usize {
        (0..self.q)
            .find(|&b| self.add(a, b) == 0)
            .expect("additive inverse exists")
    }

    pub fn inv(&self, a: usize) -> Option<usize> {
        (a != 0)
            .then(|| (1..self.q).find(|&b| self.mul(a, b) == 1))
            .flatten()
    }

    pub fn pow(&self, a: usize, mut e: u64) -> usize {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Absolute trace to the prime subfield, returned as an integer in `0..p`.
    #[inline]
    pub fn trace(&self, a: usize) -> u32 {
        self.trace[a]
    }
}

fn smallest_primitive_root(p: u32) -> u32 {
    if p == 2 {
        return 1;
    }
    let p = p as u64;
    (2..p)
        .find(|&g| {
            let mut x = 1;
            (1..p - 1).all(|_| {
                x = x * g % p;
                x != 1
            })
        })
        .expect("every prime has a primitive root") as u32
}

/// Powers `x^0 .. x^{q-2}` of `x` modulo `modulus` over Z_p, or `None` if `x`
/// does not generate the full multiplicative group (modulus not primitive).
fn primitive_powers(p: u32, modulus: &[u32]) -> Option<Vec<Vec<u32>>> {
    let n = modulus.len() - 1;
    let q = (p as usize).pow(n as u32);
    let mut cur = vec![0u32; n];
    cur[0] = 1;
    let mut out = Vec::with_capacity(q - 1);
    let mut seen = vec![false; q];
    for _ in 0..q - 1 {
        let idx = cur
            .iter()
            .rev()
            .fold(0usize, |acc, &x| acc * p as usize + x as usize);
        if idx == 0 || seen[idx] {
            return None;
        }
        seen[idx] = true;
        out.push(cur.clone());
        // multiply by x and reduce x^n = -sum modulus[i] x^i
        let top = cur[n - 1];
        for i in (1..n).rev() {
            cur[i] = cur[i - 1];
        }
        cur[0] = 0;
        for i in 0..n {
            cur[i] = (cur[i] + (p - modulus[i] % p) * top) % p;
        }
    }
    (cur[0] == 1 && cur[1..].iter().all(|&c| c == 0)).then_some(out)
}

/// Lexicographically first monic primitive polynomial of degree `n` over Z_p.
fn first_primitive_polynomial(p: u32, n: u32) -> Vec<u32> {
    let count = (p as u64).pow(n);
    for code in 0..count {
        let mut poly: Vec<u32> = (0..n)
            .scan(code, |c, _| {
                let d = (*c % p as u64) as u32;
                *c /= p as u64;
                Some(d)
            })
            .collect();
        poly.push(1);
        if poly[0] != 0 && primitive_powers(p, &poly).is_some() {
            return poly;
        }
    }
    unreachable!("primitive polynomials exist for every degree")
}

/// GR(4, n): Galois ring of characteristic 4 lifting GF(2^n).
#[derive(Debug, Clone)]
pub struct GaloisRing4 {
    n: usize,
    modulus: Vec<u8>,
    teichmuller: Vec<Vec<u8>>,
    basis_trace: Vec<u8>,
}

impl GaloisRing4 {
    /// Lifts the primitive polynomial of `field` (which must have characteristic 2).
    pub fn lift(field: &FiniteField) -> Result<Self> {
        if field.characteristic() != 2 {
            return Err(SqstError::InvalidArgument(
                "Galois ring lift needs characteristic 2".into(),
            ));
        }
        let n = field.degree() as usize;
        let modulus = hensel_lift(field.modulus());
        let ring = GaloisRing4 {
            n,
            modulus,
            teichmuller: Vec::new(),
            basis_trace: Vec::new(),
        };

        let d = 1usize << n;
        let mut powers = Vec::with_capacity(d - 1);
        let mut cur = ring.one();
        for _ in 0..d - 1 {
            powers.push(cur.clone());
            cur = ring.mul_x(&cur);
        }
        debug_assert_eq!(cur, ring.one(), "lifted root must have order 2^n - 1");

        let basis_trace = (0..n)
            .map(|j| {
                let mut acc = vec![0u8; n];
                let mut e = j;
                for _ in 0..n {
                    acc = ring.add(&acc, &powers[e % (d - 1)]);
                    e *= 2;
                }
                debug_assert!(
                    acc[1..].iter().all(|&c| c == 0),
                    "ring trace must land in Z_4"
                );
                acc[0]
            })
            .collect();

        let mut teichmuller = Vec::with_capacity(d);
        teichmuller.push(vec![0u8; n]);
        teichmuller.extend(powers);
        Ok(GaloisRing4 {
            basis_trace,
            teichmuller,
            ..ring
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    /// Lifted defining polynomial over Z_4, constant term first.
    pub fn modulus(&self) -> &[u8] {
        &self.modulus
    }

    /// Teichmüller set `{0, 1, xi, ..., xi^{2^n - 2}}` in that order.
    pub fn teichmuller(&self) -> &[Vec<u8>] {
        &self.teichmuller
    }

    fn one(&self) -> Vec<u8> {
        let mut v = vec![0u8; self.n];
        v[0] = 1;
        v
    }

    pub fn add(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        a.iter().zip(b).map(|(x, y)| (x + y) & 3).collect()
    }

    pub fn scale(&self, c: u8, a: &[u8]) -> Vec<u8> {
        a.iter().map(|x| (x * c) & 3).collect()
    }

    fn mul_x(&self, a: &[u8]) -> Vec<u8> {
        let n = self.n;
        let top = a[n - 1];
        let mut out = vec![0u8; n];
        out[1..n].copy_from_slice(&a[..n - 1]);
        for (o, &h) in out.iter_mut().zip(&self.modulus) {
            *o = (*o + 4 - ((h * top) & 3)) & 3;
        }
        out
    }

    pub fn mul(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        let n = self.n;
        let mut prod = vec![0u8; 2 * n - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) & 3;
            }
        }
        for t in (n..2 * n - 1).rev() {
            let c = prod[t];
            if c == 0 {
                continue;
            }
            for i in 0..=n {
                let k = t - n + i;
                prod[k] = (prod[k] + 4 - ((c * self.modulus[i]) & 3)) & 3;
            }
        }
        prod.truncate(n);
        prod
    }

    /// Generalized trace GR(4, n) -> Z_4.
    pub fn trace(&self, a: &[u8]) -> u8 {
        a.iter()
            .zip(&self.basis_trace)
            .fold(0u8, |acc, (x, t)| (acc + x * t) & 3)
    }
}

/// Graeffe-style Hensel lift of a binary polynomial to Z_4:
/// `H(x^2) = (-1)^n (e(x)^2 - o(x)^2) mod 4` with `e`, `o` the even and odd parts.
fn hensel_lift(h: &[u32]) -> Vec<u8> {
    let n = h.len() - 1;
    let even: Vec<i64> = h
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 0 { c as i64 } else { 0 })
        .collect();
    let odd: Vec<i64> = h
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 1 { c as i64 } else { 0 })
        .collect();
    let square = |v: &[i64]| {
        let mut out = vec![0i64; 2 * v.len() - 1];
        for (i, a) in v.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    let e2 = square(&even);
    let o2 = square(&odd);
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    (0..=n)
        .map(|i| (sign * (e2[2 * i] - o2[2 * i])).rem_euclid(4) as u8)
        .collect()
}
