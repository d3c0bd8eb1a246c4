//! On-disk formats shared by the subcommands.
//!
//! Key material travels in small hex files: a private scalar is 64 hex
//! chars on one line, a public key is its 64-hex-char x-coordinate, a
//! certificate is its 206-hex-char encoding (raw 103-byte files are also
//! accepted). Issuance requests and update packages are single hex lines
//! of their wire encodings.

use std::fs;
use std::path::{Path, PathBuf};

use ble_certauth::authority::{parse_public_key_hex, IssuanceRequest};
use ble_certauth::cert::{BleCertificate, CERT_LEN};
use ble_certauth::crypto::{PrivateScalar, PublicKey, Signature};
use ble_certauth::key_update::UpdatePackage;
use rand_chacha::ChaCha12Rng;
use rand_core::{OsRng, RngCore, SeedableRng};

/// State directory: the `BLE_CERTAUTH_HOME` environment variable wins,
/// then `--home`, then `.ble-certauth` in the working directory.
pub fn resolve_home(flag: Option<&Path>) -> PathBuf {
    std::env::var_os("BLE_CERTAUTH_HOME")
        .map(PathBuf::from)
        .or_else(|| flag.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(".ble-certauth"))
}

/// A caller-supplied seed, or a fresh one from the OS. Returns the seed
/// actually used so randomized runs can be reproduced.
pub fn seeded_rng(seed: Option<u64>) -> (u64, ChaCha12Rng) {
    let seed = seed.unwrap_or_else(|| OsRng.next_u64());
    (seed, ChaCha12Rng::seed_from_u64(seed))
}

pub fn parse_serial(text: &str) -> Result<[u8; 6], String> {
    let compact: String = text.chars().filter(|c| *c != ':').collect();
    let bytes = hex::decode(&compact)
        .map_err(|_| format!("`{text}` is not a hardware address (aa:bb:cc:dd:ee:ff)"))?;
    bytes
        .try_into()
        .map_err(|_| format!("`{text}` must be exactly 6 bytes"))
}

pub fn format_serial(serial: &[u8; 6]) -> String {
    serial.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(":")
}

pub fn read_to_string(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_scalar_file(path: &Path) -> Result<PrivateScalar, String> {
    let text = read_to_string(path)?;
    let bytes: [u8; 32] = hex::decode(text.trim())
        .map_err(|e| format!("{}: {e}", path.display()))?
        .try_into()
        .map_err(|_| format!("{}: a private key is 64 hex chars", path.display()))?;
    PrivateScalar::from_bytes(bytes).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_scalar_file(path: &Path, scalar: &PrivateScalar) -> Result<(), String> {
    write_file(path, &format!("{}\n", hex::encode(scalar.as_bytes())))
}

pub fn read_public_file(path: &Path) -> Result<PublicKey, String> {
    let text = read_to_string(path)?;
    parse_public_key_hex(text.trim())
        .ok_or_else(|| format!("{}: expected a 64-hex-char public key x-coordinate", path.display()))
}

pub fn write_public_file(path: &Path, key: &PublicKey) -> Result<(), String> {
    write_file(path, &format!("{}\n", hex::encode(key.x())))
}

/// Accepts the hex-armored form (one 206-char line) or the raw 103 bytes.
pub fn read_cert_file(path: &Path) -> Result<BleCertificate, String> {
    let raw = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let bytes = match std::str::from_utf8(&raw) {
        Ok(text)
            if text.trim().len() == 2 * CERT_LEN
                && text.trim().chars().all(|c| c.is_ascii_hexdigit()) =>
        {
            hex::decode(text.trim()).expect("checked hex")
        }
        _ => raw,
    };
    BleCertificate::decode(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_cert_file(path: &Path, cert: &BleCertificate) -> Result<(), String> {
    write_file(path, &format!("{}\n", hex::encode(cert.encode())))
}

/// Issuance request wire form: serial ‖ subject x ‖ signature, hex-armored.
pub fn encode_request(request: &IssuanceRequest) -> String {
    let mut bytes = Vec::with_capacity(6 + 32 + 64);
    bytes.extend_from_slice(&request.serial);
    bytes.extend_from_slice(&request.subject_public_key);
    bytes.extend_from_slice(&request.manufacturer_signature.encode());
    hex::encode(bytes)
}

pub fn read_request_file(path: &Path) -> Result<IssuanceRequest, String> {
    let text = read_to_string(path)?;
    let bytes = hex::decode(text.trim()).map_err(|e| format!("{}: {e}", path.display()))?;
    if bytes.len() != 102 {
        return Err(format!(
            "{}: an issuance request is 102 bytes, got {}",
            path.display(),
            bytes.len()
        ));
    }
    Ok(IssuanceRequest {
        serial: bytes[..6].try_into().expect("length checked"),
        subject_public_key: bytes[6..38].try_into().expect("length checked"),
        manufacturer_signature: Signature::from_bytes(
            bytes[38..].try_into().expect("length checked"),
        ),
    })
}

pub fn read_package_file(path: &Path) -> Result<UpdatePackage, String> {
    let text = read_to_string(path)?;
    let bytes = hex::decode(text.trim()).map_err(|e| format!("{}: {e}", path.display()))?;
    UpdatePackage::decode(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_package_file(path: &Path, package: &UpdatePackage) -> Result<(), String> {
    write_file(path, &format!("{}\n", hex::encode(package.encode())))
}

pub fn parse_secret_hex(text: &str) -> Result<[u8; 16], String> {
    hex::decode(text)
        .map_err(|_| "manufacturing secret must be hex".to_string())?
        .try_into()
        .map_err(|_| "manufacturing secret must be 32 hex chars (16 bytes)".to_string())
}

/// Print the single JSON document a `--format json` invocation emits.
pub fn print_json<T: serde::Serialize>(value: &T) -> Result<(), String> {
    let doc = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    println!("{doc}");
    Ok(())
}
