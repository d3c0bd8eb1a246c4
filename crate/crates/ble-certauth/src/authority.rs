//! The certificate authority: a root key, enrolled manufacturer keys, and
//! an append-only registry of issued certificates.
//!
//! Manufacturers do not get intermediate certificates. A manufacturer
//! enrolls a signing key with the authority once; afterwards each issuance
//! request carries the device serial and subject key signed by that key. A
//! request names no manufacturer — the authority accepts it if the
//! signature verifies under *any* enrolled key, which keeps the request at
//! 102 bytes and makes the signature the sole gate. Requests for a serial
//! that already has a certificate are refused; rotation goes through
//! [`RootAuthority::reissue`], which replaces the registry entry instead of
//! adding a second live certificate for the same device.
//!
//! State persists as flat files under a directory: `root.key` (32-byte
//! scalar, hex), `root.pub` (32-byte x-coordinate, hex — the y-coordinate
//! is implied by the even-y convention), `manufacturers.log` and
//! `registry.log` (append-only, one hex entry per line; for the registry
//! the latest line for a serial wins, which is how reissuance survives a
//! reload).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cert::{BleCertificate, CERT_LEN};
use crate::crypto::{
    ecdsa_sign_deterministic, ecdsa_verify, generate_keypair, CryptoError, KeyPair, PrivateScalar,
    PublicKey, Signature,
};
use rand_core::{CryptoRng, RngCore};

/// A manufacturer's signed request for a device certificate. The signature
/// covers `serial ‖ subject_public_key` (38 bytes).
#[derive(Clone, Copy, Debug)]
pub struct IssuanceRequest {
    pub serial: [u8; 6],
    pub subject_public_key: [u8; 32],
    pub manufacturer_signature: Signature,
}

/// Handle returned by manufacturer enrollment; stable across reloads
/// (enrollment order in the log).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegistrationId(pub u32);

impl std::fmt::Display for RegistrationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "manufacturer #{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum AuthorityError {
    #[error("this manufacturer key is already registered")]
    DuplicateManufacturer,
    #[error("request signature does not verify under any registered manufacturer key")]
    RequestRejected,
    #[error("a certificate for this serial already exists")]
    DuplicateSerial,
    #[error("subject key is not certifiable: {0}")]
    BadSubjectKey(CryptoError),
    #[error("no certificate on record for this serial")]
    UnknownSerial,
    #[error("crypto failure: {0}")]
    Crypto(#[from] CryptoError),
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
    #[error("stored state is corrupt: {0}")]
    CorruptState(String),
}

/// The root authority. Owns the root signing key and all issuance state.
pub struct RootAuthority {
    root: KeyPair,
    manufacturers: Vec<PublicKey>,
    registry: BTreeMap<[u8; 6], BleCertificate>,
    home: Option<PathBuf>,
}

impl RootAuthority {
    /// Create a fresh authority with a newly generated root key. If `home`
    /// is given, the root key and every later mutation are persisted there.
    pub fn init_root<R: RngCore + CryptoRng>(
        rng: &mut R,
        home: Option<&Path>,
    ) -> Result<Self, AuthorityError> {
        let root = generate_keypair(rng)?;
        let authority = Self {
            root,
            manufacturers: Vec::new(),
            registry: BTreeMap::new(),
            home: home.map(Path::to_path_buf),
        };
        if let Some(dir) = &authority.home {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("root.key"), hex::encode(authority.root.private().as_bytes()))?;
            fs::write(dir.join("root.pub"), hex::encode(authority.root.public().x()))?;
        }
        Ok(authority)
    }

    /// Reload a previously initialized authority from its state directory.
    pub fn load(home: &Path) -> Result<Self, AuthorityError> {
        let key_hex = fs::read_to_string(home.join("root.key"))?;
        let key_bytes: [u8; 32] = hex::decode(key_hex.trim())
            .map_err(|e| AuthorityError::CorruptState(format!("root.key: {e}")))?
            .try_into()
            .map_err(|_| AuthorityError::CorruptState("root.key: wrong length".into()))?;
        let private = PrivateScalar::from_bytes(key_bytes)
            .map_err(|e| AuthorityError::CorruptState(format!("root.key: {e}")))?;
        let root = KeyPair::from_private(private);

        let mut manufacturers = Vec::new();
        if let Ok(log) = fs::read_to_string(home.join("manufacturers.log")) {
            for (lineno, line) in log.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let key = parse_public_key_hex(line).ok_or_else(|| {
                    AuthorityError::CorruptState(format!("manufacturers.log line {}", lineno + 1))
                })?;
                manufacturers.push(key);
            }
        }

        let mut registry = BTreeMap::new();
        if let Ok(log) = fs::read_to_string(home.join("registry.log")) {
            for (lineno, line) in log.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let raw = hex::decode(line).map_err(|_| {
                    AuthorityError::CorruptState(format!("registry.log line {}", lineno + 1))
                })?;
                if raw.len() != CERT_LEN {
                    return Err(AuthorityError::CorruptState(format!(
                        "registry.log line {}: wrong length",
                        lineno + 1
                    )));
                }
                let cert = BleCertificate::decode(&raw).map_err(|e| {
                    AuthorityError::CorruptState(format!("registry.log line {}: {e}", lineno + 1))
                })?;
                // Later lines supersede earlier ones: reissuance appends.
                registry.insert(*cert.serial(), cert);
            }
        }

        Ok(Self { root, manufacturers, registry, home: Some(home.to_path_buf()) })
    }

    /// The public half of the root key; devices embed this to verify peers.
    pub fn root_public_key(&self) -> &PublicKey {
        self.root.public()
    }

    /// Enroll a manufacturer signing key. Requests signed by it are
    /// accepted from then on.
    pub fn register_manufacturer(
        &mut self,
        key: PublicKey,
    ) -> Result<RegistrationId, AuthorityError> {
        if self.manufacturers.contains(&key) {
            return Err(AuthorityError::DuplicateManufacturer);
        }
        self.manufacturers.push(key);
        if let Some(dir) = &self.home {
            append_line(&dir.join("manufacturers.log"), &hex::encode(key.x()))?;
        }
        Ok(RegistrationId(self.manufacturers.len() as u32))
    }

    /// Issue a certificate for a new device.
    ///
    /// Checks, in order: the request signature under the enrolled
    /// manufacturer keys, serial uniqueness, and that the subject
    /// x-coordinate reconstructs to a curve point under the even-y
    /// convention.
    pub fn issue(&mut self, request: &IssuanceRequest) -> Result<BleCertificate, AuthorityError> {
        let message = request_message(&request.serial, &request.subject_public_key);
        let signed_by_member = self
            .manufacturers
            .iter()
            .any(|key| ecdsa_verify(key, &message, &request.manufacturer_signature));
        if !signed_by_member {
            return Err(AuthorityError::RequestRejected);
        }
        if self.registry.contains_key(&request.serial) {
            return Err(AuthorityError::DuplicateSerial);
        }
        PublicKey::from_x_even_y(request.subject_public_key)
            .map_err(AuthorityError::BadSubjectKey)?;
        let cert = BleCertificate::sign_new(
            request.serial,
            request.subject_public_key,
            self.root.private(),
        );
        self.record(cert)?;
        Ok(cert)
    }

    /// Replace the certificate for an already-registered serial with one
    /// for a new subject key. This is the rotation path: unlike
    /// [`issue`], the serial must exist, and no manufacturer signature is
    /// rechecked — the rotation machinery authenticates with the device's
    /// manufacturing secret instead.
    ///
    /// [`issue`]: RootAuthority::issue
    pub fn reissue(
        &mut self,
        serial: [u8; 6],
        new_subject_key: [u8; 32],
    ) -> Result<BleCertificate, AuthorityError> {
        if !self.registry.contains_key(&serial) {
            return Err(AuthorityError::UnknownSerial);
        }
        PublicKey::from_x_even_y(new_subject_key).map_err(AuthorityError::BadSubjectKey)?;
        let cert = BleCertificate::sign_new(serial, new_subject_key, self.root.private());
        self.record(cert)?;
        Ok(cert)
    }

    /// Look up the live certificate for a serial.
    pub fn lookup(&self, serial: &[u8; 6]) -> Option<&BleCertificate> {
        self.registry.get(serial)
    }

    /// Number of live certificates.
    pub fn issued_count(&self) -> usize {
        self.registry.len()
    }

    fn record(&mut self, cert: BleCertificate) -> Result<(), AuthorityError> {
        if let Some(dir) = &self.home {
            append_line(&dir.join("registry.log"), &hex::encode(cert.encode()))?;
        }
        self.registry.insert(*cert.serial(), cert);
        Ok(())
    }
}

/// Build and sign an issuance request with a manufacturer key. Lives here
/// so manufacturers, tests, and the CLI produce identical request bytes.
pub fn sign_request(
    manufacturer_key: &PrivateScalar,
    serial: [u8; 6],
    subject_public_key: [u8; 32],
) -> IssuanceRequest {
    let message = request_message(&serial, &subject_public_key);
    IssuanceRequest {
        serial,
        subject_public_key,
        manufacturer_signature: ecdsa_sign_deterministic(manufacturer_key, &message),
    }
}

fn request_message(serial: &[u8; 6], subject_key: &[u8; 32]) -> [u8; 38] {
    let mut message = [0u8; 38];
    message[..6].copy_from_slice(serial);
    message[6..].copy_from_slice(subject_key);
    message
}

/// Parse the 64-hex-char x-only public key encoding used everywhere keys
/// hit disk (even-y convention supplies the other coordinate).
pub fn parse_public_key_hex(line: &str) -> Option<PublicKey> {
    let raw = hex::decode(line.trim()).ok()?;
    let x: [u8; 32] = raw.try_into().ok()?;
    PublicKey::from_x_even_y(x).ok()
}

fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(file, "{line}")
}
