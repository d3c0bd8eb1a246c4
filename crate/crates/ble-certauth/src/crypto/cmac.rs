//! AES-128 CMAC (RFC 4493), the building block of the `f4`/`f5` derivations.

use aes::Aes128;
use cmac::{Cmac, Mac};

/// Compute the AES-128 CMAC of `message` under a 16-byte key.
///
/// Total function: any message length including empty is valid, and the
/// output is always 16 bytes.
pub fn aes_cmac(key: &[u8; 16], message: &[u8]) -> [u8; 16] {
    let mut mac = <Cmac<Aes128> as Mac>::new_from_slice(key).expect("key length is fixed");
    mac.update(message);
    mac.finalize().into_bytes().into()
}
