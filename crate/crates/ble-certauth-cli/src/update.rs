//! Key-rotation workflows. The `--home` directory holds both sides of the
//! simulated deployment: the manufacturer's secret vault (`vault.log`) and
//! one JSON keystore file per device (`devices/<serial>.json`).

use std::path::Path;

use ble_certauth::authority::RootAuthority;
use ble_certauth::crypto::generate_keypair;
use ble_certauth::key_update::{
    DeviceKeystore, ManufacturerVault, UpdateOutcome, DEFAULT_FRESHNESS_WINDOW,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::files::{
    format_serial, parse_secret_hex, parse_serial, print_json, read_cert_file, read_package_file,
    read_scalar_file, read_to_string, seeded_rng, write_file, write_package_file,
};
use crate::Format;

/// Serialized device keystore. This plays the role of the device's secure
/// storage; it lives under `--home` only because the CLI simulates both
/// ends of the deployment.
#[derive(Serialize, Deserialize)]
struct DeviceFile {
    serial: String,
    manufacturing_secret: String,
    scalar: String,
    certificate: String,
}

fn device_path(home: &Path, serial: &[u8; 6]) -> std::path::PathBuf {
    home.join("devices").join(format!("{}.json", hex::encode(serial)))
}

fn load_keystore(home: &Path, serial: &[u8; 6]) -> Result<(DeviceKeystore, [u8; 16]), String> {
    let path = device_path(home, serial);
    let file: DeviceFile =
        serde_json::from_str(&read_to_string(&path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let secret = parse_secret_hex(&file.manufacturing_secret)?;
    let scalar_bytes: [u8; 32] = hex::decode(&file.scalar)
        .map_err(|e| format!("{}: {e}", path.display()))?
        .try_into()
        .map_err(|_| format!("{}: scalar must be 64 hex chars", path.display()))?;
    let scalar = ble_certauth::crypto::PrivateScalar::from_bytes(scalar_bytes)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let cert_bytes = hex::decode(&file.certificate)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let certificate = ble_certauth::cert::BleCertificate::decode(&cert_bytes)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let keystore = DeviceKeystore::new(secret, scalar, certificate)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((keystore, secret))
}

fn store_keystore(
    home: &Path,
    serial: &[u8; 6],
    keystore: &DeviceKeystore,
    secret: &[u8; 16],
) -> Result<(), String> {
    let file = DeviceFile {
        serial: hex::encode(serial),
        manufacturing_secret: hex::encode(secret),
        scalar: hex::encode(keystore.private_scalar().as_bytes()),
        certificate: hex::encode(keystore.certificate().encode()),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| e.to_string())?;
    write_file(&device_path(home, serial), &format!("{text}\n"))
}

fn vault_entries(home: &Path) -> Result<Vec<([u8; 6], [u8; 16])>, String> {
    let path = home.join("vault.log");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut entries = Vec::new();
    for (lineno, line) in read_to_string(&path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (serial_hex, secret_hex) = line
            .split_once(' ')
            .ok_or_else(|| format!("vault.log line {}: expected `serial secret`", lineno + 1))?;
        let serial = parse_serial(serial_hex)?;
        let secret = parse_secret_hex(secret_hex)?;
        entries.retain(|(s, _)| *s != serial);
        entries.push((serial, secret));
    }
    Ok(entries)
}

fn load_vault(home: &Path) -> Result<ManufacturerVault, String> {
    let mut vault = ManufacturerVault::new();
    for (serial, secret) in vault_entries(home)? {
        vault.provision_device(serial, secret);
    }
    Ok(vault)
}

/// Record a device: its manufacturing secret into the vault, and its
/// initial scalar + certificate into the device keystore file.
pub fn provision(
    home: &Path,
    serial_text: &str,
    secret_hex: &str,
    device_key: &Path,
    cert: &Path,
    format: Format,
) -> Result<(), String> {
    let serial = parse_serial(serial_text)?;
    let secret = parse_secret_hex(secret_hex)?;
    let scalar = read_scalar_file(device_key)?;
    let certificate = read_cert_file(cert)?;
    if certificate.serial() != &serial {
        return Err(format!(
            "certificate names {} but --serial says {}",
            format_serial(certificate.serial()),
            format_serial(&serial)
        ));
    }
    let keystore =
        DeviceKeystore::new(secret, scalar, certificate).map_err(|e| e.to_string())?;

    let mut lines: Vec<String> = vault_entries(home)?
        .into_iter()
        .filter(|(s, _)| *s != serial)
        .map(|(s, sec)| format!("{} {}", hex::encode(s), hex::encode(sec)))
        .collect();
    lines.push(format!("{} {}", hex::encode(serial), hex::encode(secret)));
    write_file(&home.join("vault.log"), &format!("{}\n", lines.join("\n")))?;
    store_keystore(home, &serial, &keystore, &secret)?;

    match format {
        Format::Json => print_json(&json!({
            "serial": format_serial(&serial),
            "device_file": device_path(home, &serial).display().to_string(),
        })),
        Format::Text => {
            println!("provisioned device {}", format_serial(&serial));
            Ok(())
        }
    }
}

/// Manufacturer side: generate a replacement keypair, have the authority
/// reissue, seal everything into a package file.
pub fn build(
    home: &Path,
    serial_text: &str,
    now: u64,
    seed: Option<u64>,
    out: &Path,
    format: Format,
) -> Result<(), String> {
    let serial = parse_serial(serial_text)?;
    let vault = load_vault(home)?;
    let mut authority = RootAuthority::load(home).map_err(|e| e.to_string())?;
    let (_, mut rng) = seeded_rng(seed);
    let replacement = generate_keypair(&mut rng).map_err(|e| e.to_string())?;
    let package = vault
        .build_update(&mut authority, serial, &replacement, now)
        .map_err(|e| e.to_string())?;
    write_package_file(out, &package)?;
    match format {
        Format::Json => print_json(&json!({
            "serial": format_serial(&serial),
            "timestamp": package.timestamp(),
            "new_subject_public_key": hex::encode(package.certificate().subject_public_key()),
            "package_file": out.display().to_string(),
        })),
        Format::Text => {
            println!(
                "built update package for {} (timestamp {}) to {}",
                format_serial(&serial),
                package.timestamp(),
                out.display()
            );
            Ok(())
        }
    }
}

/// Device side: validate and apply a package against the stored keystore.
pub fn apply(
    home: &Path,
    serial_text: &str,
    package_path: &Path,
    now: u64,
    window: Option<u64>,
    format: Format,
) -> Result<(), String> {
    let serial = parse_serial(serial_text)?;
    let window = window.unwrap_or(DEFAULT_FRESHNESS_WINDOW);
    let (mut keystore, secret) = load_keystore(home, &serial)?;
    let package = read_package_file(package_path)?;
    match keystore.apply_update(&package, now, window) {
        UpdateOutcome::Applied => {
            store_keystore(home, &serial, &keystore, &secret)?;
            match format {
                Format::Json => print_json(&json!({
                    "serial": format_serial(&serial),
                    "outcome": "applied",
                    "subject_public_key":
                        hex::encode(keystore.certificate().subject_public_key()),
                })),
                Format::Text => {
                    println!(
                        "update applied; {} now holds key {}",
                        format_serial(&serial),
                        hex::encode(keystore.certificate().subject_public_key())
                    );
                    Ok(())
                }
            }
        }
        UpdateOutcome::Disconnected(reason) => {
            Err(format!("device disconnected: {reason}"))
        }
    }
}
