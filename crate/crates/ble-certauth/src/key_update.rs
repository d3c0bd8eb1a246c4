//! Certificate revocation by key rotation, delivered as a firmware-update
//! style package.
//!
//! There is no revocation list: when a device key must be retired, the
//! manufacturer generates a replacement keypair, has the authority reissue
//! the certificate for the device's serial, and pushes both to the device
//! in a sealed [`UpdatePackage`]. The device opens the package with a
//! manufacturing secret hard-coded at build time, checks the timestamp
//! against a freshness window, confirms scalar and certificate describe
//! the same key, and only then swaps its identity — atomically, so a
//! rejected package leaves the old identity fully usable.
//!
//! Sealing construction: the 16-byte manufacturing secret is expanded with
//! AES-CMAC under three fixed labels into independent subkeys — one for a
//! synthetic IV, one for AES-128-CTR encryption of the scalar, one for the
//! package tag (encrypt-then-MAC over every field). Only a party holding
//! the manufacturing secret can produce a package the device accepts.

use std::collections::BTreeMap;

use aes::cipher::{KeyIvInit, StreamCipher};
use aes::Aes128;
use serde::Serialize;
use thiserror::Error;

use crate::authority::{AuthorityError, RootAuthority};
use crate::cert::{BleCertificate, CertDecodeError, CERT_LEN};
use crate::crypto::{aes_cmac, KeyPair, PrivateScalar};
use crate::pairing::{DeviceIdentity, IdentityError};

type Ctr = ctr::Ctr128BE<Aes128>;

/// How far (in seconds, either direction) a package timestamp may deviate
/// from the device clock and still be accepted.
pub const DEFAULT_FRESHNESS_WINDOW: u64 = 300;

const SEALED_LEN: usize = 48;
const TAG_LEN: usize = 16;

fn subkey(manufacturing_secret: &[u8; 16], label: &[u8]) -> [u8; 16] {
    aes_cmac(manufacturing_secret, label)
}

fn seal_scalar(
    manufacturing_secret: &[u8; 16],
    serial: &[u8; 6],
    timestamp: u64,
    scalar: &[u8; 32],
    subject_key: &[u8; 32],
) -> [u8; SEALED_LEN] {
    // Synthetic IV bound to the package context: distinct rotations give
    // distinct IVs even under the same wrapping key.
    let mut context = Vec::with_capacity(1 + 6 + 8 + 32);
    context.push(0x01);
    context.extend_from_slice(serial);
    context.extend_from_slice(&timestamp.to_be_bytes());
    context.extend_from_slice(subject_key);
    let iv = aes_cmac(&subkey(manufacturing_secret, b"key-wrap-iv"), &context);

    let mut ciphertext = *scalar;
    Ctr::new(&subkey(manufacturing_secret, b"key-wrap").into(), &iv.into())
        .apply_keystream(&mut ciphertext);

    let mut sealed = [0u8; SEALED_LEN];
    sealed[..16].copy_from_slice(&iv);
    sealed[16..].copy_from_slice(&ciphertext);
    sealed
}

fn unseal_scalar(manufacturing_secret: &[u8; 16], sealed: &[u8; SEALED_LEN]) -> [u8; 32] {
    let iv: [u8; 16] = sealed[..16].try_into().expect("sealed blob layout");
    let mut plaintext: [u8; 32] = sealed[16..].try_into().expect("sealed blob layout");
    Ctr::new(&subkey(manufacturing_secret, b"key-wrap").into(), &iv.into())
        .apply_keystream(&mut plaintext);
    plaintext
}

fn package_tag(
    manufacturing_secret: &[u8; 16],
    certificate: &BleCertificate,
    sealed: &[u8; SEALED_LEN],
    timestamp: u64,
) -> [u8; TAG_LEN] {
    let mut message = Vec::with_capacity(CERT_LEN + SEALED_LEN + 8);
    message.extend_from_slice(&certificate.encode());
    message.extend_from_slice(sealed);
    message.extend_from_slice(&timestamp.to_be_bytes());
    aes_cmac(&subkey(manufacturing_secret, b"package-tag"), &message)
}

/// The sealed rotation payload: replacement certificate, wrapped
/// replacement scalar, issue timestamp, and an authentication tag over
/// all of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdatePackage {
    certificate: BleCertificate,
    sealed_scalar: [u8; SEALED_LEN],
    timestamp: u64,
    tag: [u8; TAG_LEN],
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PackageDecodeError {
    #[error("an update package is {} bytes, got {0}", UpdatePackage::ENCODED_LEN)]
    BadLength(usize),
    #[error(transparent)]
    BadCertificate(#[from] CertDecodeError),
}

impl UpdatePackage {
    /// 103-byte certificate ‖ 48-byte sealed scalar ‖ 8-byte big-endian
    /// timestamp ‖ 16-byte tag.
    pub const ENCODED_LEN: usize = CERT_LEN + SEALED_LEN + 8 + TAG_LEN;

    pub fn certificate(&self) -> &BleCertificate {
        &self.certificate
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn encode(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[..CERT_LEN].copy_from_slice(&self.certificate.encode());
        out[CERT_LEN..CERT_LEN + SEALED_LEN].copy_from_slice(&self.sealed_scalar);
        out[CERT_LEN + SEALED_LEN..CERT_LEN + SEALED_LEN + 8]
            .copy_from_slice(&self.timestamp.to_be_bytes());
        out[CERT_LEN + SEALED_LEN + 8..].copy_from_slice(&self.tag);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PackageDecodeError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(PackageDecodeError::BadLength(bytes.len()));
        }
        Ok(Self {
            certificate: BleCertificate::decode(&bytes[..CERT_LEN])?,
            sealed_scalar: bytes[CERT_LEN..CERT_LEN + SEALED_LEN]
                .try_into()
                .expect("length checked"),
            timestamp: u64::from_be_bytes(
                bytes[CERT_LEN + SEALED_LEN..CERT_LEN + SEALED_LEN + 8]
                    .try_into()
                    .expect("length checked"),
            ),
            tag: bytes[CERT_LEN + SEALED_LEN + 8..].try_into().expect("length checked"),
        })
    }
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("no manufacturing secret provisioned for this serial")]
    UnknownDevice,
    #[error("certificate reissue failed: {0}")]
    Issuance(#[from] AuthorityError),
}

/// The manufacturer's side of the rotation flow: custody of each shipped
/// device's manufacturing secret.
#[derive(Debug, Default)]
pub struct ManufacturerVault {
    secrets: BTreeMap<[u8; 6], [u8; 16]>,
}

impl ManufacturerVault {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the secret burned into a device at build time. The same
    /// secret goes into the device's [`DeviceKeystore`].
    pub fn provision_device(&mut self, serial: [u8; 6], manufacturing_secret: [u8; 16]) {
        self.secrets.insert(serial, manufacturing_secret);
    }

    /// Reissue the device's certificate for `new_keypair` and seal both
    /// into a package only that device can open. The authority replaces
    /// its registry entry in the same step, so the old certificate is no
    /// longer the one served for this serial.
    pub fn build_update(
        &self,
        authority: &mut RootAuthority,
        serial: [u8; 6],
        new_keypair: &KeyPair,
        now: u64,
    ) -> Result<UpdatePackage, UpdateError> {
        let secret = self.secrets.get(&serial).ok_or(UpdateError::UnknownDevice)?;
        let certificate = authority.reissue(serial, *new_keypair.public().x())?;
        let sealed_scalar = seal_scalar(
            secret,
            &serial,
            now,
            new_keypair.private().as_bytes(),
            new_keypair.public().x(),
        );
        let tag = package_tag(secret, &certificate, &sealed_scalar, now);
        Ok(UpdatePackage { certificate, sealed_scalar, timestamp: now, tag })
    }
}

/// Why a device dropped the connection instead of applying an update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DisconnectReason {
    /// The package tag does not verify under this device's manufacturing
    /// secret.
    BadAuth,
    /// The timestamp lies outside the freshness window (either direction).
    StaleTimestamp,
    /// The sealed scalar does not correspond to the certificate's subject
    /// key.
    KeyCertMismatch,
}

impl std::fmt::Display for DisconnectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DisconnectReason::BadAuth => "package authentication failed",
            DisconnectReason::StaleTimestamp => "timestamp outside freshness window",
            DisconnectReason::KeyCertMismatch => "sealed key does not match certificate",
        })
    }
}

/// Result of presenting an [`UpdatePackage`] to a device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UpdateOutcome {
    Applied,
    Disconnected(DisconnectReason),
}

/// A device's long-lived secrets: the immutable manufacturing secret and
/// the active scalar/certificate pair.
pub struct DeviceKeystore {
    manufacturing_secret: [u8; 16],
    scalar: PrivateScalar,
    certificate: BleCertificate,
}

impl DeviceKeystore {
    pub fn new(
        manufacturing_secret: [u8; 16],
        scalar: PrivateScalar,
        certificate: BleCertificate,
    ) -> Result<Self, IdentityError> {
        if scalar.public_key().x() != certificate.subject_public_key() {
            return Err(IdentityError::KeyMismatch);
        }
        Ok(Self { manufacturing_secret, scalar, certificate })
    }

    pub fn certificate(&self) -> &BleCertificate {
        &self.certificate
    }

    /// The active private scalar — exposed so a host can persist the
    /// keystore across restarts, which real hardware does in a secure
    /// element rather than through an accessor.
    pub fn private_scalar(&self) -> &PrivateScalar {
        &self.scalar
    }

    /// The pairing identity for the currently active key.
    pub fn identity(&self) -> DeviceIdentity {
        DeviceIdentity::new(KeyPair::from_private(self.scalar.clone()), self.certificate)
            .expect("keystore invariant: scalar matches certificate")
    }

    /// Validate and apply a rotation package: tag first, then freshness,
    /// then scalar/certificate agreement. The keystore changes only on
    /// [`UpdateOutcome::Applied`], and then as one atomic swap.
    pub fn apply_update(
        &mut self,
        package: &UpdatePackage,
        now: u64,
        window: u64,
    ) -> UpdateOutcome {
        let expected = package_tag(
            &self.manufacturing_secret,
            &package.certificate,
            &package.sealed_scalar,
            package.timestamp,
        );
        if expected != package.tag {
            return UpdateOutcome::Disconnected(DisconnectReason::BadAuth);
        }
        if now.abs_diff(package.timestamp) > window {
            return UpdateOutcome::Disconnected(DisconnectReason::StaleTimestamp);
        }
        let unwrapped = unseal_scalar(&self.manufacturing_secret, &package.sealed_scalar);
        let Ok(scalar) = PrivateScalar::from_bytes(unwrapped) else {
            return UpdateOutcome::Disconnected(DisconnectReason::KeyCertMismatch);
        };
        if scalar.public_key().x() != package.certificate.subject_public_key() {
            return UpdateOutcome::Disconnected(DisconnectReason::KeyCertMismatch);
        }
        self.scalar = scalar;
        self.certificate = package.certificate;
        UpdateOutcome::Applied
    }
}
