//! Authority management (`bleca …`), key generation, issuance-request
//! signing, and certificate inspection.

use std::path::Path;

use ble_certauth::authority::{sign_request, RootAuthority};
use ble_certauth::crypto::generate_keypair;
use serde_json::json;

use crate::files::{
    format_serial, parse_serial, print_json, read_cert_file, read_public_file, read_scalar_file,
    seeded_rng, write_cert_file, write_public_file, write_scalar_file,
};
use crate::Format;

pub fn bleca_init(home: &Path, seed: Option<u64>, format: Format) -> Result<(), String> {
    if home.join("root.key").exists() {
        return Err(format!(
            "{} already holds an authority root key; refusing to overwrite it",
            home.display()
        ));
    }
    let (_, mut rng) = seeded_rng(seed);
    let authority = RootAuthority::init_root(&mut rng, Some(home)).map_err(|e| e.to_string())?;
    let root_hex = hex::encode(authority.root_public_key().x());
    match format {
        Format::Json => print_json(&json!({
            "home": home.display().to_string(),
            "root_public_key": root_hex,
        })),
        Format::Text => {
            println!("initialized certification authority in {}", home.display());
            println!("root public key: {root_hex}");
            Ok(())
        }
    }
}

pub fn bleca_register(home: &Path, key_path: &Path, format: Format) -> Result<(), String> {
    let mut authority = RootAuthority::load(home).map_err(|e| e.to_string())?;
    let key = read_public_file(key_path)?;
    let id = authority.register_manufacturer(key).map_err(|e| e.to_string())?;
    match format {
        Format::Json => print_json(&json!({
            "registration": id.0,
            "manufacturer_public_key": hex::encode(key.x()),
        })),
        Format::Text => {
            println!("registered {id}");
            Ok(())
        }
    }
}

pub fn bleca_issue(
    home: &Path,
    request_path: &Path,
    cert_out: &Path,
    format: Format,
) -> Result<(), String> {
    let mut authority = RootAuthority::load(home).map_err(|e| e.to_string())?;
    let request = crate::files::read_request_file(request_path)?;
    let cert = authority.issue(&request).map_err(|e| e.to_string())?;
    write_cert_file(cert_out, &cert)?;
    match format {
        Format::Json => print_json(&json!({
            "serial": format_serial(cert.serial()),
            "subject_public_key": hex::encode(cert.subject_public_key()),
            "certificate": hex::encode(cert.encode()),
            "certificate_file": cert_out.display().to_string(),
        })),
        Format::Text => {
            println!(
                "issued certificate for {} to {}",
                format_serial(cert.serial()),
                cert_out.display()
            );
            Ok(())
        }
    }
}

pub fn bleca_lookup(home: &Path, serial_text: &str, format: Format) -> Result<(), String> {
    let authority = RootAuthority::load(home).map_err(|e| e.to_string())?;
    let serial = parse_serial(serial_text)?;
    let cert = authority
        .lookup(&serial)
        .ok_or_else(|| format!("no certificate issued for {}", format_serial(&serial)))?;
    match format {
        Format::Json => print_json(&json!({
            "serial": format_serial(cert.serial()),
            "subject_public_key": hex::encode(cert.subject_public_key()),
            "certificate": hex::encode(cert.encode()),
        })),
        Format::Text => {
            println!("{}", hex::encode(cert.encode()));
            Ok(())
        }
    }
}

pub fn keygen(
    out: &Path,
    pub_out: Option<&Path>,
    seed: Option<u64>,
    reveal_keys: bool,
    format: Format,
) -> Result<(), String> {
    let (_, mut rng) = seeded_rng(seed);
    let keypair = generate_keypair(&mut rng).map_err(|e| e.to_string())?;
    write_scalar_file(out, keypair.private())?;
    if let Some(path) = pub_out {
        write_public_file(path, keypair.public())?;
    }
    let public_hex = hex::encode(keypair.public().x());
    match format {
        Format::Json => {
            let mut doc = json!({
                "public_key": public_hex,
                "private_key_file": out.display().to_string(),
            });
            if reveal_keys {
                doc["private_key"] = json!(hex::encode(keypair.private().as_bytes()));
            }
            print_json(&doc)
        }
        Format::Text => {
            println!("public key:  {public_hex}");
            println!("private key: written to {}", out.display());
            if reveal_keys {
                println!("private key: {}", hex::encode(keypair.private().as_bytes()));
            }
            Ok(())
        }
    }
}

pub fn sign_request_cmd(
    key_path: &Path,
    serial_text: &str,
    subject_path: &Path,
    out: &Path,
    format: Format,
) -> Result<(), String> {
    let manufacturer = read_scalar_file(key_path)?;
    let serial = parse_serial(serial_text)?;
    let subject = read_public_file(subject_path)?;
    let request = sign_request(&manufacturer, serial, *subject.x());
    crate::files::write_file(out, &format!("{}\n", crate::files::encode_request(&request)))?;
    match format {
        Format::Json => print_json(&json!({
            "serial": format_serial(&serial),
            "subject_public_key": hex::encode(subject.x()),
            "request_file": out.display().to_string(),
        })),
        Format::Text => {
            println!(
                "signed issuance request for {} to {}",
                format_serial(&serial),
                out.display()
            );
            Ok(())
        }
    }
}

pub fn certinfo(cert_path: &Path, root_path: Option<&Path>, format: Format) -> Result<(), String> {
    let cert = read_cert_file(cert_path)?;
    let verified = match root_path {
        Some(path) => {
            let root = read_public_file(path)?;
            cert.verify(&root).map_err(|e| e.to_string())?;
            Some(true)
        }
        None => None,
    };
    match format {
        Format::Json => {
            let mut doc = json!({
                "version": cert.version(),
                "serial": format_serial(cert.serial()),
                "subject_public_key": hex::encode(cert.subject_public_key()),
                "signature_r": hex::encode(cert.signature().r_bytes()),
                "signature_s": hex::encode(cert.signature().s_bytes()),
            });
            if let Some(ok) = verified {
                doc["verified"] = json!(ok);
            }
            print_json(&doc)
        }
        Format::Text => {
            println!("version:     0x{:02x}", cert.version());
            println!("serial:      {}", format_serial(cert.serial()));
            println!("subject key: {}", hex::encode(cert.subject_public_key()));
            println!("signature r: {}", hex::encode(cert.signature().r_bytes()));
            println!("signature s: {}", hex::encode(cert.signature().s_bytes()));
            if verified == Some(true) {
                println!("signature:   valid under the given root");
            }
            Ok(())
        }
    }
}
