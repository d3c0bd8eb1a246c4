//! ECDSA over P-256 with SHA-256, in the fixed-width 64-byte `r ‖ s` form.

use core::fmt;

use p256::ecdsa::signature::{RandomizedSigner, Signer, Verifier};
use p256::ecdsa::{Signature as P256Signature, SigningKey, VerifyingKey};
use p256::elliptic_curve::sec1::ToEncodedPoint;
use rand_core::{CryptoRng, RngCore};

use super::{CryptoError, PrivateScalar, PublicKey};

/// A signature as two 32-byte big-endian scalars, encoded `r ‖ s`.
///
/// Signatures produced by this module always have `r` and `s` in `1..n`;
/// the container itself accepts arbitrary bytes so that tampered
/// certificates can still be parsed and then rejected by verification.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    bytes: [u8; 64],
}

impl Signature {
    pub const ENCODED_LEN: usize = 64;

    pub fn from_bytes(bytes: [u8; 64]) -> Self {
        Self { bytes }
    }

    pub fn encode(&self) -> [u8; 64] {
        self.bytes
    }

    pub fn r_bytes(&self) -> &[u8] {
        &self.bytes[..32]
    }

    pub fn s_bytes(&self) -> &[u8] {
        &self.bytes[32..]
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(self.bytes))
    }
}

/// Sign `message` with a random per-signature nonce.
pub fn ecdsa_sign<R: RngCore + CryptoRng>(
    key: &PrivateScalar,
    message: &[u8],
    rng: &mut R,
) -> Result<Signature, CryptoError> {
    let signing = SigningKey::from_bytes(key.as_bytes().into())
        .map_err(|_| CryptoError::InvalidScalar)?;
    let sig: P256Signature =
        signing.try_sign_with_rng(rng, message).map_err(|_| CryptoError::RandomnessFailure)?;
    Ok(Signature { bytes: sig.to_bytes().into() })
}

/// Sign `message` with the RFC 6979 deterministic nonce.
///
/// Used wherever reproducibility matters: certificate issuance and
/// known-answer cross-checks against an independent implementation.
pub fn ecdsa_sign_deterministic(key: &PrivateScalar, message: &[u8]) -> Signature {
    let signing =
        SigningKey::from_bytes(key.as_bytes().into()).expect("scalar validated on construction");
    let sig: P256Signature = signing.sign(message);
    Signature { bytes: sig.to_bytes().into() }
}

/// Verify an ECDSA-SHA256 signature. Malformed inputs (out-of-range `r` or
/// `s`) reject rather than fail.
pub fn ecdsa_verify(key: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    let Ok(parsed) = P256Signature::from_slice(&sig.bytes) else {
        return false;
    };
    let encoded = key.as_affine().to_encoded_point(false);
    let Ok(verifying) = VerifyingKey::from_encoded_point(&encoded) else {
        return false;
    };
    verifying.verify(message, &parsed).is_ok()
}

#[cfg(test)]
mod tests {
    use super::super::generate_keypair;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn hx32(s: &str) -> [u8; 32] {
        hex::decode(s).unwrap().try_into().unwrap()
    }

    #[test]
    fn sign_verify_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let kp = generate_keypair(&mut rng).unwrap();
        let sig = ecdsa_sign(kp.private(), b"round trip", &mut rng).unwrap();
        assert!(ecdsa_verify(kp.public(), b"round trip", &sig));
        assert!(!ecdsa_verify(kp.public(), b"round trap", &sig));
    }

    #[test]
    fn verification_rejects_a_foreign_key() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let signer = generate_keypair(&mut rng).unwrap();
        let other = generate_keypair(&mut rng).unwrap();
        let sig = ecdsa_sign(signer.private(), b"message", &mut rng).unwrap();
        assert!(!ecdsa_verify(other.public(), b"message", &sig));
    }

    #[test]
    fn deterministic_signing_matches_the_independent_oracle() {
        // RFC 6979 A.2.5 key over "sample", pinned both here and in the
        // oracle's own test suite.
        let key = PrivateScalar::from_bytes(hx32(
            "c9afa9d845ba75166b5c215767b1d6934e50c3db36e89b127b8a622b120f6721",
        ))
        .unwrap();
        let sig = ecdsa_sign_deterministic(&key, b"sample");
        let oracle = refcrypto::p256::ecdsa_sign_deterministic(key.as_bytes(), b"sample");
        assert_eq!(sig.r_bytes(), oracle.r);
        assert_eq!(sig.s_bytes(), oracle.s);

        // And over arbitrary messages.
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for i in 0..8u32 {
            let kp = generate_keypair(&mut rng).unwrap();
            let message = format!("message number {i}");
            let sig = ecdsa_sign_deterministic(kp.private(), message.as_bytes());
            let oracle =
                refcrypto::p256::ecdsa_sign_deterministic(kp.private().as_bytes(), message.as_bytes());
            assert_eq!(sig.r_bytes(), oracle.r, "r mismatch at {i}");
            assert_eq!(sig.s_bytes(), oracle.s, "s mismatch at {i}");
        }
    }

    #[test]
    fn production_and_oracle_verifiers_accept_each_other() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let kp = generate_keypair(&mut rng).unwrap();
        let message = b"cross verification";

        let sig = ecdsa_sign(kp.private(), message, &mut rng).unwrap();
        let oracle_pk = refcrypto::p256::decompress(kp.public().x(), true).unwrap();
        let oracle_sig = refcrypto::p256::EcdsaSig {
            r: sig.r_bytes().try_into().unwrap(),
            s: sig.s_bytes().try_into().unwrap(),
        };
        assert!(refcrypto::p256::ecdsa_verify(&oracle_pk, message, &oracle_sig));

        let from_oracle = refcrypto::p256::ecdsa_sign_deterministic(kp.private().as_bytes(), message);
        let mut bytes = [0u8; 64];
        bytes[..32].copy_from_slice(&from_oracle.r);
        bytes[32..].copy_from_slice(&from_oracle.s);
        assert!(ecdsa_verify(kp.public(), message, &Signature::from_bytes(bytes)));
    }

    #[test]
    fn any_flipped_signature_bit_rejects() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let kp = generate_keypair(&mut rng).unwrap();
        let message = b"bit flip sweep";
        let sig = ecdsa_sign(kp.private(), message, &mut rng).unwrap();
        for bit in 0..512 {
            let mut bytes = sig.encode();
            bytes[bit / 8] ^= 1 << (bit % 8);
            assert!(
                !ecdsa_verify(kp.public(), message, &Signature::from_bytes(bytes)),
                "bit {bit} still verified"
            );
        }
    }

    #[test]
    fn zero_r_or_s_rejects() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let kp = generate_keypair(&mut rng).unwrap();
        let sig = ecdsa_sign(kp.private(), b"zeroes", &mut rng).unwrap();
        let mut zero_r = sig.encode();
        zero_r[..32].fill(0);
        let mut zero_s = sig.encode();
        zero_s[32..].fill(0);
        assert!(!ecdsa_verify(kp.public(), b"zeroes", &Signature::from_bytes(zero_r)));
        assert!(!ecdsa_verify(kp.public(), b"zeroes", &Signature::from_bytes(zero_s)));
    }
}
