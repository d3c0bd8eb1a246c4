//! Cryptographic primitives and the derived functions of the handshake.
//!
//! Everything here is a pure function of its inputs plus an explicit
//! randomness source, so the whole module is safe to use from multiple
//! threads. Curve arithmetic is NIST P-256, signatures are ECDSA with
//! SHA-256, and all key derivation is built on AES-128 CMAC.

mod cmac;
mod kdf;
mod keys;
mod session;
mod sign;

pub use cmac::aes_cmac;
pub use kdf::{
    f4_confirm, f5_ltk, AddrType, ConfirmValue, DeviceAddress, Ltk, Nonce128, SALT,
};
pub use keys::{ecdh, generate_keypair, KeyPair, PrivateScalar, PublicKey, SharedSecret};
pub use session::{
    session_open, session_seal, Direction, SessionChannel, SessionError, SESSION_OVERHEAD,
};
pub use sign::{ecdsa_sign, ecdsa_sign_deterministic, ecdsa_verify, Signature};

use thiserror::Error;

/// Failures of the primitive operations.
///
/// Protocol-level rejections (bad certificates, mismatched confirm values)
/// are not crypto errors; they are modeled by the calling modules.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    /// The injected randomness source could not produce bytes.
    #[error("randomness source failed")]
    RandomnessFailure,
    /// A scalar encoding fell outside the range `1..n`.
    #[error("private scalar out of range")]
    InvalidScalar,
    /// A public key failed point validation (off-curve or identity).
    #[error("invalid public-key point")]
    InvalidPoint,
    /// Scalar multiplication produced the point at infinity.
    #[error("ECDH result is the point at infinity")]
    IdentityResult,
    /// Key derivation refuses an all-zero shared secret.
    #[error("shared secret is all-zero")]
    ZeroSecret,
}
