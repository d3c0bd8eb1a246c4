//! The `energy` subcommand: evaluate the radio transfer model for a
//! certificate of a given size and report the handshake's cryptographic
//! overhead from the cost table.

use std::num::NonZeroU32;
use std::path::Path;

use ble_certauth::energy::{
    cert_transfer_energy_with, pairing_overhead, CryptoCostTable, EnergyParams,
};
use serde_json::json;

use crate::files::{print_json, read_to_string};
use crate::Format;

pub fn energy(
    params_path: &Path,
    cert_size: u32,
    max_payload: u32,
    table_path: Option<&Path>,
    format: Format,
) -> Result<(), String> {
    let params = EnergyParams::parse(&read_to_string(params_path)?)
        .map_err(|e| format!("{}: {e}", params_path.display()))?;
    let table: CryptoCostTable = match table_path {
        Some(path) => serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| format!("{}: {e}", path.display()))?,
        None => CryptoCostTable::default(),
    };
    let cert_size = NonZeroU32::new(cert_size).ok_or("--cert-size must be positive")?;
    let max_payload = NonZeroU32::new(max_payload).ok_or("--max-payload must be positive")?;

    let fragments = cert_size.get().div_ceil(max_payload.get());
    let (tx, rx) = cert_transfer_energy_with(&params, cert_size, max_payload);
    let verify_and_ecdh = pairing_overhead(&table, 0, 1, 1);
    let with_sign = pairing_overhead(&table, 1, 1, 1);

    match format {
        Format::Json => print_json(&json!({
            "params": params,
            "cert_size": cert_size.get(),
            "max_payload": max_payload.get(),
            "fragments": fragments,
            "transfer_tx_uj": tx,
            "transfer_rx_uj": rx,
            "crypto_table": table,
            "handshake_overhead_mj": {
                "verify_and_ecdh": verify_and_ecdh,
                "with_sign": with_sign,
            },
        })),
        Format::Text => {
            println!(
                "radio: e_wu={} e_tx={} e_rx={} e_ifs={} e_slp={} µJ, l_hdr={} B",
                params.e_wu, params.e_tx, params.e_rx, params.e_ifs, params.e_slp, params.l_hdr
            );
            println!(
                "transfer: {} B in {} fragment(s) (max payload {} B)",
                cert_size, fragments, max_payload
            );
            println!("  transmit: {tx:.2} µJ");
            println!("  receive:  {rx:.2} µJ");
            println!("crypto costs (mJ/op): ecdhe={} sign={} verify={}",
                table.ecdhe_mj_per_op, table.ecdsa_sign_mj_per_op, table.ecdsa_verify_mj_per_op);
            println!("crypto costs (µJ/B): sha256={} hmac={} aes128={}",
                table.sha256_uj_per_byte, table.hmac_sha256_uj_per_byte, table.aes128_uj_per_byte);
            println!("handshake overhead per endpoint:");
            println!("  verify + ecdh:        {verify_and_ecdh:.2} mJ");
            println!("  verify + ecdh + sign: {with_sign:.2} mJ");
            Ok(())
        }
    }
}
