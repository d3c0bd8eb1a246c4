//! Certificate-based authentication for BLE devices that have no keyboard or
//! display and are therefore stuck with Just Works pairing.
//!
//! Just Works runs an unauthenticated ECDH exchange: nothing ties the public
//! key a device receives to the device it believes it is talking to, so an
//! active attacker can silently terminate both sides of the exchange. This
//! crate implements a lightweight fix: every device carries a 103-byte
//! certificate binding its static MAC address to a P-256 public key, signed
//! by a certification authority, and the pairing handshake verifies the peer
//! certificate before any key material is derived.
//!
//! The pieces:
//!
//! - [`crypto`] — P-256 key generation with an even-y convention (so public
//!   keys travel as bare 32-byte x-coordinates), ECDH, ECDSA, AES-CMAC, the
//!   `f4`/`f5` confirm and LTK derivations, and counter-mode link encryption.
//! - [`cert`] — encoder/decoder/verifier for the fixed 103-byte certificate,
//!   plus the X.509 size-comparison report.
//! - [`authority`] — a miniature certification authority: root key custody,
//!   manufacturer registration, countersigned issuance, and a registry.
//! - [`wire`] — framed handshake messages with a bit-exact encoding.
//! - [`pairing`] — central and peripheral handshake state machines deriving
//!   a shared Long Term Key.
//! - [`adversary`] — a simulated link layer with pluggable man-in-the-middle
//!   strategies, plus the unauthenticated Just Works control arm they are
//!   measured against.
//! - [`key_update`] — certificate revocation by key rotation, pushed as a
//!   sealed firmware-update-style package with a freshness window.
//! - [`energy`] — the analytical radio/crypto energy model.

pub mod adversary;
pub mod authority;
pub mod cert;
pub mod crypto;
pub mod energy;
pub mod key_update;
pub mod pairing;
pub mod wire;
