//! NIST P-256 arithmetic over `num-bigint`, in plain affine coordinates.
//!
//! Includes scalar multiplication, point compression/decompression, ECDSA
//! (both with a caller-supplied nonce and with RFC 6979 deterministic
//! nonces) and the ECDH x-coordinate computation.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::sha256::{hmac_sha256, sha256};

fn big(hex: &str) -> BigInt {
    BigInt::parse_bytes(hex.as_bytes(), 16).unwrap()
}

/// Field prime p.
pub fn field_prime() -> BigInt {
    big("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff")
}

/// Group order n.
pub fn group_order() -> BigInt {
    big("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551")
}

fn curve_b() -> BigInt {
    big("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b")
}

/// The base point G.
pub fn generator() -> Point {
    Point::Affine {
        x: big("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
        y: big("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
    }
}

/// An affine curve point or the point at infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Point {
    Identity,
    Affine { x: BigInt, y: BigInt },
}

fn modp(v: &BigInt) -> BigInt {
    let p = field_prime();
    ((v % &p) + &p) % &p
}

fn modn(v: &BigInt) -> BigInt {
    let n = group_order();
    ((v % &n) + &n) % &n
}

fn inv_mod(a: &BigInt, m: &BigInt) -> BigInt {
    // m is prime throughout, so Fermat works.
    a.modpow(&(m - 2), m)
}

impl Point {
    pub fn is_identity(&self) -> bool {
        matches!(self, Point::Identity)
    }

    /// Check the curve equation y^2 = x^3 - 3x + b (identity counts as valid).
    pub fn is_on_curve(&self) -> bool {
        match self {
            Point::Identity => true,
            Point::Affine { x, y } => {
                let p = field_prime();
                let lhs = modp(&(y * y));
                let rhs = modp(&(x * x * x - 3 * x + curve_b()));
                lhs == rhs && x < &p && y < &p && !x.sign().eq(&num_bigint::Sign::Minus)
            }
        }
    }

    pub fn x_bytes(&self) -> [u8; 32] {
        match self {
            Point::Identity => panic!("identity has no coordinates"),
            Point::Affine { x, .. } => to_32(x),
        }
    }

    pub fn y_bytes(&self) -> [u8; 32] {
        match self {
            Point::Identity => panic!("identity has no coordinates"),
            Point::Affine { y, .. } => to_32(y),
        }
    }
}

fn to_32(v: &BigInt) -> [u8; 32] {
    let (_, bytes) = v.to_bytes_be();
    let mut out = [0u8; 32];
    out[32 - bytes.len()..].copy_from_slice(&bytes);
    out
}

fn from_be(bytes: &[u8]) -> BigInt {
    BigInt::from_bytes_be(num_bigint::Sign::Plus, bytes)
}

/// Point addition (handles doubling and the identity).
pub fn add(a: &Point, b: &Point) -> Point {
    let p = field_prime();
    match (a, b) {
        (Point::Identity, _) => b.clone(),
        (_, Point::Identity) => a.clone(),
        (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => {
            if x1 == x2 && modp(&(y1 + y2)).is_zero() {
                return Point::Identity;
            }
            let lambda = if x1 == x2 && y1 == y2 {
                if y1.is_zero() {
                    return Point::Identity;
                }
                modp(&((3 * x1 * x1 - BigInt::from(3)) * inv_mod(&modp(&(2 * y1)), &p)))
            } else {
                modp(&((y2 - y1) * inv_mod(&modp(&(x2 - x1)), &p)))
            };
            let x3 = modp(&(&lambda * &lambda - x1 - x2));
            let y3 = modp(&(&lambda * (x1 - &x3) - y1));
            Point::Affine { x: x3, y: y3 }
        }
    }
}

/// Double-and-add scalar multiplication.
pub fn scalar_mul(k: &BigInt, point: &Point) -> Point {
    let mut result = Point::Identity;
    let mut addend = point.clone();
    let mut k = modn(k);
    while !k.is_zero() {
        if (&k & BigInt::one()) == BigInt::one() {
            result = add(&result, &addend);
        }
        addend = add(&addend, &addend);
        k >>= 1;
    }
    result
}

/// Recover the point with the requested y parity from an x-coordinate.
/// Returns `None` when x^3 - 3x + b is a quadratic non-residue.
pub fn decompress(x_bytes: &[u8; 32], even_y: bool) -> Option<Point> {
    let p = field_prime();
    let x = from_be(x_bytes);
    if x >= p {
        return None;
    }
    let rhs = modp(&(&x * &x * &x - 3 * &x + curve_b()));
    // p = 3 mod 4, so the square root (when it exists) is rhs^((p+1)/4).
    let y = rhs.modpow(&((&p + 1u8) >> 2), &p);
    if modp(&(&y * &y)) != rhs {
        return None;
    }
    let y = if (&y & BigInt::one() == BigInt::one()) == even_y { modp(&-&y) } else { y };
    Some(Point::Affine { x, y })
}

/// ECDH: x-coordinate of d * Q.
pub fn ecdh_x(scalar: &[u8; 32], peer: &Point) -> Option<[u8; 32]> {
    let product = scalar_mul(&from_be(scalar), peer);
    match product {
        Point::Identity => None,
        _ => Some(product.x_bytes()),
    }
}

/// ECDSA signature as a pair of 32-byte scalars.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcdsaSig {
    pub r: [u8; 32],
    pub s: [u8; 32],
}

fn hash_to_int(message: &[u8]) -> BigInt {
    from_be(&sha256(message))
}

/// ECDSA-SHA256 signing with an explicit nonce k. Returns `None` when k
/// produces a zero r or s (caller retries with a new nonce).
pub fn ecdsa_sign_with_k(key: &[u8; 32], message: &[u8], k: &BigInt) -> Option<EcdsaSig> {
    let n = group_order();
    let d = from_be(key);
    let r_point = scalar_mul(k, &generator());
    let r = match &r_point {
        Point::Identity => return None,
        Point::Affine { x, .. } => modn(x),
    };
    if r.is_zero() {
        return None;
    }
    let e = hash_to_int(message);
    let s = modn(&(inv_mod(&modn(k), &n) * (e + &r * d)));
    if s.is_zero() {
        return None;
    }
    Some(EcdsaSig { r: to_32(&r), s: to_32(&s) })
}

/// RFC 6979 deterministic nonce for P-256 / SHA-256.
pub fn rfc6979_nonce(key: &[u8; 32], message: &[u8]) -> BigInt {
    let n = group_order();
    let h1 = sha256(message);
    // bits2octets: reduce the digest mod n and re-encode.
    let bits2octets = to_32(&modn(&from_be(&h1)));

    let mut v = [0x01u8; 32];
    let mut k = [0x00u8; 32];

    let mut buf = Vec::with_capacity(97);
    buf.extend_from_slice(&v);
    buf.push(0x00);
    buf.extend_from_slice(key);
    buf.extend_from_slice(&bits2octets);
    k = hmac_sha256(&k, &buf);
    v = hmac_sha256(&k, &v);

    buf.clear();
    buf.extend_from_slice(&v);
    buf.push(0x01);
    buf.extend_from_slice(key);
    buf.extend_from_slice(&bits2octets);
    k = hmac_sha256(&k, &buf);
    v = hmac_sha256(&k, &v);

    loop {
        v = hmac_sha256(&k, &v);
        let candidate = from_be(&v);
        if !candidate.is_zero() && candidate < n {
            return candidate;
        }
        buf.clear();
        buf.extend_from_slice(&v);
        buf.push(0x00);
        k = hmac_sha256(&k, &buf);
        v = hmac_sha256(&k, &v);
    }
}

/// ECDSA-SHA256 signing with the RFC 6979 deterministic nonce.
pub fn ecdsa_sign_deterministic(key: &[u8; 32], message: &[u8]) -> EcdsaSig {
    let mut k = rfc6979_nonce(key, message);
    loop {
        if let Some(sig) = ecdsa_sign_with_k(key, message, &k) {
            return sig;
        }
        // Practically unreachable; step the nonce rather than loop forever.
        k = modn(&(k + 1u8));
    }
}

/// ECDSA-SHA256 verification.
pub fn ecdsa_verify(public: &Point, message: &[u8], sig: &EcdsaSig) -> bool {
    let n = group_order();
    if !public.is_on_curve() || public.is_identity() {
        return false;
    }
    let r = from_be(&sig.r);
    let s = from_be(&sig.s);
    if r.is_zero() || s.is_zero() || r >= n || s >= n {
        return false;
    }
    let e = hash_to_int(message);
    let w = inv_mod(&s, &n);
    let u1 = modn(&(&e * &w));
    let u2 = modn(&(&r * &w));
    let point = add(&scalar_mul(&u1, &generator()), &scalar_mul(&u2, public));
    match point {
        Point::Identity => false,
        Point::Affine { x, .. } => modn(&x) == r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hx32(s: &str) -> [u8; 32] {
        let v: Vec<u8> =
            (0..64).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect();
        v.try_into().unwrap()
    }

    #[test]
    fn generator_is_on_curve() {
        assert!(generator().is_on_curve());
    }

    #[test]
    fn doubling_matches_addition_chain() {
        let g = generator();
        let two_g = add(&g, &g);
        let three_g = add(&two_g, &g);
        assert_eq!(scalar_mul(&BigInt::from(3), &g), three_g);
        assert!(three_g.is_on_curve());
    }

    #[test]
    fn order_times_generator_is_identity() {
        assert!(scalar_mul(&group_order(), &generator()).is_identity());
    }

    #[test]
    fn cavp_ecdh_p256_count0() {
        // NIST CAVP KAS ECC CDH P-256, COUNT = 0.
        let d = hx32("7d7dc5f71eb29ddaf80d6214632eeae03d9058af1fb6d22ed80badb62bc1a534");
        let qx = hx32("700c48f77f56584c5cc632ca65640db91b6bacce3a4df6b42ce7cc838833d287");
        let qy = hx32("db71e509e3fd9b060ddb20ba5c51dcc5948d46fbf640dfe0441782cab85fa4ac");
        let peer = Point::Affine {
            x: BigInt::from_bytes_be(num_bigint::Sign::Plus, &qx),
            y: BigInt::from_bytes_be(num_bigint::Sign::Plus, &qy),
        };
        assert!(peer.is_on_curve());
        let z = ecdh_x(&d, &peer).unwrap();
        assert_eq!(
            z,
            hx32("46fc62106420ff012e54a434fbdd2d25ccc5852060561e68040dd7778997bd7b")
        );
        // The same vector pins the public key of d.
        let own = scalar_mul(&BigInt::from_bytes_be(num_bigint::Sign::Plus, &d), &generator());
        assert_eq!(
            own.x_bytes(),
            hx32("ead218590119e8876b29146ff89ca61770c4edbbf97d38ce385ed281d8a6b230")
        );
        assert_eq!(
            own.y_bytes(),
            hx32("28af61281fd35e2fa7002523acc85a429cb06ee6648325389f59edfce1405141")
        );
    }

    #[test]
    fn rfc6979_p256_sha256_sample() {
        // RFC 6979 A.2.5, message "sample".
        let key = hx32("c9afa9d845ba75166b5c215767b1d6934e50c3db36e89b127b8a622b120f6721");
        let k = rfc6979_nonce(&key, b"sample");
        assert_eq!(
            to_32(&k),
            hx32("a6e3c57dd01abe90086538398355dd4c3b17aa873382b0f24d6129493d8aad60")
        );
        let sig = ecdsa_sign_deterministic(&key, b"sample");
        assert_eq!(
            sig.r,
            hx32("efd48b2aacb6a8fd1140dd9cd45e81d69d2c877b56aaf991c34d0ea84eaf3716")
        );
        assert_eq!(
            sig.s,
            hx32("f7cb1c942d657c41d436c7a1b6e29f65f3e900dbb9aff4064dc4ab2f843acda8")
        );
        let public = scalar_mul(
            &BigInt::from_bytes_be(num_bigint::Sign::Plus, &key),
            &generator(),
        );
        assert!(ecdsa_verify(&public, b"sample", &sig));
        assert!(!ecdsa_verify(&public, b"samplf", &sig));
    }

    #[test]
    fn decompress_roundtrip() {
        let g = generator();
        let gx = g.x_bytes();
        let even = decompress(&gx, true).unwrap();
        let odd = decompress(&gx, false).unwrap();
        assert!(even.is_on_curve() && odd.is_on_curve());
        assert_eq!(even.y_bytes()[31] & 1, 0);
        assert_eq!(odd.y_bytes()[31] & 1, 1);
        // G itself has an odd y.
        assert_eq!(odd, g);
    }
}
