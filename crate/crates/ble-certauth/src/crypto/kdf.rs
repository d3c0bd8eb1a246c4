//! The confirm-value and LTK derivations (`f4` and `f5`), both CMAC-based.

use core::fmt;
use core::str::FromStr;

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

use super::{aes_cmac, CryptoError, PublicKey, SharedSecret};

/// The fixed 128-bit salt keying the first CMAC stage of the LTK derivation.
pub const SALT: [u8; 16] = [
    0x6c, 0x88, 0x83, 0x91, 0xaa, 0xf5, 0xa5, 0x38, 0x60, 0x37, 0x0b, 0xdb, 0x5a, 0x60, 0x83,
    0xbe,
];

/// A 128-bit nonce drawn from the injected randomness source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Nonce128([u8; 16]);

impl Nonce128 {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Result<Self, CryptoError> {
        let mut bytes = [0u8; 16];
        rng.try_fill_bytes(&mut bytes).map_err(|_| CryptoError::RandomnessFailure)?;
        Ok(Self(bytes))
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// The 128-bit commitment the peripheral sends before nonces are revealed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConfirmValue([u8; 16]);

impl ConfirmValue {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// The 128-bit Long Term Key. Wiped on drop, redacted in `Debug`.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct Ltk([u8; 16]);

impl Ltk {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for Ltk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Ltk(<redacted>)")
    }
}

/// BLE address type octet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AddrType {
    Public = 0x00,
    StaticRandom = 0x01,
}

/// A 56-bit device address: 6-byte hardware address plus the type octet.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeviceAddress {
    addr: [u8; 6],
    addr_type: AddrType,
}

impl DeviceAddress {
    pub const ENCODED_LEN: usize = 7;

    pub fn new(addr: [u8; 6], addr_type: AddrType) -> Self {
        Self { addr, addr_type }
    }

    pub fn public(addr: [u8; 6]) -> Self {
        Self::new(addr, AddrType::Public)
    }

    pub fn addr(&self) -> &[u8; 6] {
        &self.addr
    }

    pub fn addr_type(&self) -> AddrType {
        self.addr_type
    }

    /// The 7-byte encoding fed into the LTK derivation: address then type.
    pub fn encode(&self) -> [u8; 7] {
        let mut out = [0u8; 7];
        out[..6].copy_from_slice(&self.addr);
        out[6] = self.addr_type as u8;
        out
    }

    pub fn decode(bytes: &[u8; 7]) -> Option<Self> {
        let addr_type = match bytes[6] {
            0x00 => AddrType::Public,
            0x01 => AddrType::StaticRandom,
            _ => return None,
        };
        Some(Self { addr: bytes[..6].try_into().expect("fixed width"), addr_type })
    }
}

impl fmt::Display for DeviceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:02X}:{:02X}:{:02X}:{:02X}:{:02X}:{:02X}",
            self.addr[0], self.addr[1], self.addr[2], self.addr[3], self.addr[4], self.addr[5]
        )
    }
}

impl fmt::Debug for DeviceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeviceAddress({self}, {:?})", self.addr_type)
    }
}

/// Error parsing a `AA:BB:CC:DD:EE:FF` address string.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("expected six colon-separated hex octets, got {0:?}")]
pub struct AddressParseError(String);

impl FromStr for DeviceAddress {
    type Err = AddressParseError;

    /// Parses `AA:BB:CC:DD:EE:FF` as a public-type address.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut addr = [0u8; 6];
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(AddressParseError(s.to_string()));
        }
        for (byte, part) in addr.iter_mut().zip(parts) {
            if part.len() != 2 {
                return Err(AddressParseError(s.to_string()));
            }
            *byte = u8::from_str_radix(part, 16).map_err(|_| AddressParseError(s.to_string()))?;
        }
        Ok(Self::public(addr))
    }
}

/// `f4`: the confirm value, a CMAC keyed by the peripheral's nonce over both
/// public-key x-coordinates in central-then-peripheral order.
pub fn f4_confirm(pk_c: &PublicKey, pk_p: &PublicKey, n_p: &Nonce128) -> ConfirmValue {
    let mut message = [0u8; 64];
    message[..32].copy_from_slice(pk_c.x());
    message[32..].copy_from_slice(pk_p.x());
    ConfirmValue(aes_cmac(n_p.as_bytes(), &message))
}

/// `f5`: the LTK derivation.
///
/// An intermediate key `T = CMAC(SALT, shared-secret x)` keys a second CMAC
/// over the 46-byte concatenation `N_c ‖ N_p ‖ MAC_c ‖ MAC_p` (16 + 16 + 7 +
/// 7 bytes, each address encoded as hardware address then type octet).
pub fn f5_ltk(
    secret: &SharedSecret,
    n_c: &Nonce128,
    n_p: &Nonce128,
    mac_c: &DeviceAddress,
    mac_p: &DeviceAddress,
) -> Result<Ltk, CryptoError> {
    if secret.is_zero() {
        return Err(CryptoError::ZeroSecret);
    }
    let t = aes_cmac(&SALT, secret.as_bytes());
    let mut message = [0u8; 46];
    message[..16].copy_from_slice(n_c.as_bytes());
    message[16..32].copy_from_slice(n_p.as_bytes());
    message[32..39].copy_from_slice(&mac_c.encode());
    message[39..].copy_from_slice(&mac_p.encode());
    Ok(Ltk(aes_cmac(&t, &message)))
}

#[cfg(test)]
mod tests {
    use super::super::generate_keypair;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn fixtures() -> (PublicKey, PublicKey, Nonce128) {
        let mut rng = ChaCha12Rng::seed_from_u64(0xf4);
        let pk_c = *generate_keypair(&mut rng).unwrap().public();
        let pk_p = *generate_keypair(&mut rng).unwrap().public();
        let n_p = Nonce128::random(&mut rng).unwrap();
        (pk_c, pk_p, n_p)
    }

    #[test]
    fn salt_has_the_published_value() {
        assert_eq!(hex::encode(SALT), "6c888391aaf5a53860370bdb5a6083be");
    }

    #[test]
    fn f4_matches_the_cmac_composition_oracle() {
        let (pk_c, pk_p, n_p) = fixtures();
        let confirm = f4_confirm(&pk_c, &pk_p, &n_p);
        let mut message = Vec::new();
        message.extend_from_slice(pk_c.x());
        message.extend_from_slice(pk_p.x());
        assert_eq!(
            confirm.as_bytes(),
            &refcrypto::cmac::cmac(n_p.as_bytes(), &message)
        );
        assert_eq!(confirm, f4_confirm(&pk_c, &pk_p, &n_p), "deterministic");
    }

    #[test]
    fn f4_depends_on_every_bit_of_the_central_key() {
        let (pk_c, pk_p, n_p) = fixtures();
        let confirm = f4_confirm(&pk_c, &pk_p, &n_p);
        for bit in 0..256 {
            let mut message = [0u8; 64];
            message[..32].copy_from_slice(pk_c.x());
            message[32..].copy_from_slice(pk_p.x());
            message[bit / 8] ^= 1 << (bit % 8);
            let flipped = refcrypto::cmac::cmac(n_p.as_bytes(), &message);
            assert_ne!(confirm.as_bytes(), &flipped, "bit {bit} did not change the confirm");
        }
    }

    #[test]
    fn f5_matches_the_two_stage_composition_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(0xf5);
        let a = generate_keypair(&mut rng).unwrap();
        let b = generate_keypair(&mut rng).unwrap();
        let secret = super::super::ecdh(a.private(), b.public()).unwrap();
        let n_c = Nonce128::random(&mut rng).unwrap();
        let n_p = Nonce128::random(&mut rng).unwrap();
        let mac_c = DeviceAddress::public([0xaa, 0xbb, 0xcc, 0x01, 0x02, 0x03]);
        let mac_p = DeviceAddress::new([0x10, 0x20, 0x30, 0x40, 0x50, 0x60], AddrType::StaticRandom);

        let ltk = f5_ltk(&secret, &n_c, &n_p, &mac_c, &mac_p).unwrap();

        let t = refcrypto::cmac::cmac(&SALT, secret.as_bytes());
        let mut message = Vec::new();
        message.extend_from_slice(n_c.as_bytes());
        message.extend_from_slice(n_p.as_bytes());
        message.extend_from_slice(&mac_c.encode());
        message.extend_from_slice(&mac_p.encode());
        assert_eq!(ltk.as_bytes(), &refcrypto::cmac::cmac(&t, &message));

        // Same canonical input ordering from either perspective, same key.
        assert_eq!(ltk, f5_ltk(&secret, &n_c, &n_p, &mac_c, &mac_p).unwrap());
    }

    #[test]
    fn f5_changes_when_the_central_nonce_changes() {
        let mut rng = ChaCha12Rng::seed_from_u64(0xf6);
        let secret = SharedSecret::from_bytes([7u8; 32]);
        let n_c = Nonce128::random(&mut rng).unwrap();
        let n_c2 = Nonce128::random(&mut rng).unwrap();
        let n_p = Nonce128::random(&mut rng).unwrap();
        let mac = DeviceAddress::public([1, 2, 3, 4, 5, 6]);
        let a = f5_ltk(&secret, &n_c, &n_p, &mac, &mac).unwrap();
        let b = f5_ltk(&secret, &n_c2, &n_p, &mac, &mac).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn f5_rejects_an_all_zero_secret() {
        let secret = SharedSecret::from_bytes([0u8; 32]);
        let n = Nonce128::from_bytes([1u8; 16]);
        let mac = DeviceAddress::public([0; 6]);
        assert_eq!(f5_ltk(&secret, &n, &n, &mac, &mac), Err(CryptoError::ZeroSecret));
    }

    #[test]
    fn address_encoding_and_parsing() {
        let addr = DeviceAddress::new([0xaa, 0x1b, 0xcc, 0x0d, 0xee, 0x6f], AddrType::StaticRandom);
        let encoded = addr.encode();
        assert_eq!(encoded.len(), DeviceAddress::ENCODED_LEN);
        assert_eq!(encoded[6], 0x01);
        assert_eq!(DeviceAddress::decode(&encoded), Some(addr));
        let mut bad = encoded;
        bad[6] = 0x02;
        assert_eq!(DeviceAddress::decode(&bad), None);

        let parsed: DeviceAddress = "AA:1B:CC:0D:EE:6F".parse().unwrap();
        assert_eq!(parsed.addr(), addr.addr());
        assert_eq!(parsed.addr_type(), AddrType::Public);
        assert_eq!(parsed.to_string(), "AA:1B:CC:0D:EE:6F");
        assert!("AA:1B:CC:0D:EE".parse::<DeviceAddress>().is_err());
        assert!("AA:1B:CC:0D:EE:ZZ".parse::<DeviceAddress>().is_err());
    }
}
