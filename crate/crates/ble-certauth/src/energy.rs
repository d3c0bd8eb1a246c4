//! Analytical energy model for certificate exchange over BLE.
//!
//! Two ingredients:
//!
//! * a radio event model — the energy to transmit or receive an `l_P`-byte
//!   payload split into `n` link-layer fragments, accounting for wake-up,
//!   per-fragment headers, inter-frame spaces, and return to sleep;
//! * a measured per-operation cost table for the cryptography (Cortex-M0+
//!   class hardware), from which the handshake's added energy is summed.
//!
//! All arithmetic is in microjoules internally; the crypto table speaks
//! millijoules per operation because that is how the measurements are
//! quoted, and [`pairing_overhead`] reports in millijoules accordingly.
//! Every function here is pure: identical inputs give bit-identical
//! results.
//!
//! The transmit equation charges the transmitter `n·l_HDR·E_RX` for
//! received headers — acknowledgment-style reception within the event.
//! That term is part of the model being implemented and is kept exactly
//! as defined.

use std::num::NonZeroU32;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// BLE link-layer header length in bytes; the one radio parameter with a
/// fixed value.
pub const DEFAULT_BLE_HEADER_LEN: u32 = 14;

/// Largest link-layer payload per fragment (4.2+ data channel PDU).
pub const DEFAULT_MAX_PAYLOAD: u32 = 251;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EnergyError {
    #[error("fragment count must be at least 1")]
    BadFragmentCount,
    #[error("parameter `{0}` must be a finite, non-negative number")]
    BadParam(&'static str),
    #[error("parameter `{0}` missing (the radio constants have no defaults)")]
    MissingParam(&'static str),
    #[error("parameter file line {line}: {reason}")]
    BadParamFile { line: usize, reason: String },
}

/// Radio energy constants. There are no built-in values: every deployment
/// measures its own radio, so all five energies are required configuration.
/// Only the header length has a default, because the link layer fixes it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyParams {
    /// Energy to wake the radio, µJ.
    pub e_wu: f64,
    /// Transmit energy per byte, µJ/B.
    pub e_tx: f64,
    /// Receive energy per byte, µJ/B.
    pub e_rx: f64,
    /// Energy per inter-frame space, µJ.
    pub e_ifs: f64,
    /// Energy to return to sleep, µJ.
    pub e_slp: f64,
    /// Link-layer header length, bytes.
    pub l_hdr: u32,
}

impl EnergyParams {
    pub fn new(e_wu: f64, e_tx: f64, e_rx: f64, e_ifs: f64, e_slp: f64) -> Result<Self, EnergyError> {
        for (name, value) in [
            ("e_wu", e_wu),
            ("e_tx", e_tx),
            ("e_rx", e_rx),
            ("e_ifs", e_ifs),
            ("e_slp", e_slp),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(EnergyError::BadParam(name));
            }
        }
        Ok(Self { e_wu, e_tx, e_rx, e_ifs, e_slp, l_hdr: DEFAULT_BLE_HEADER_LEN })
    }

    pub fn with_l_hdr(mut self, l_hdr: u32) -> Self {
        self.l_hdr = l_hdr;
        self
    }

    /// Parse a flat `key = value` parameter file. Blank lines and `#`
    /// comments are ignored; the five radio energies are mandatory,
    /// `l_hdr` is optional, anything else is an error.
    pub fn parse(text: &str) -> Result<Self, EnergyError> {
        let mut seen: Vec<(&str, f64)> = Vec::new();
        let mut l_hdr = DEFAULT_BLE_HEADER_LEN;
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(EnergyError::BadParamFile {
                    line,
                    reason: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key == "l_hdr" {
                l_hdr = value.parse().map_err(|_| EnergyError::BadParamFile {
                    line,
                    reason: format!("`{value}` is not a byte count"),
                })?;
                continue;
            }
            let canonical = ["e_wu", "e_tx", "e_rx", "e_ifs", "e_slp"]
                .into_iter()
                .find(|known| *known == key)
                .ok_or_else(|| EnergyError::BadParamFile {
                    line,
                    reason: format!("unknown parameter `{key}`"),
                })?;
            if seen.iter().any(|(name, _)| *name == canonical) {
                return Err(EnergyError::BadParamFile {
                    line,
                    reason: format!("duplicate parameter `{key}`"),
                });
            }
            let parsed: f64 = value.parse().map_err(|_| EnergyError::BadParamFile {
                line,
                reason: format!("`{value}` is not a number"),
            })?;
            seen.push((canonical, parsed));
        }

        let fetch = |name: &'static str| {
            seen.iter()
                .find(|(key, _)| *key == name)
                .map(|(_, value)| *value)
                .ok_or(EnergyError::MissingParam(name))
        };
        Ok(Self::new(
            fetch("e_wu")?,
            fetch("e_tx")?,
            fetch("e_rx")?,
            fetch("e_ifs")?,
            fetch("e_slp")?,
        )?
        .with_l_hdr(l_hdr))
    }
}

/// Measured energy of the cryptographic operations on Cortex-M0+ class
/// hardware. Defaults are the published measurements; callers may
/// substitute their own.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoCostTable {
    pub ecdhe_mj_per_op: f64,
    pub ecdsa_sign_mj_per_op: f64,
    pub ecdsa_verify_mj_per_op: f64,
    pub sha256_uj_per_byte: f64,
    pub hmac_sha256_uj_per_byte: f64,
    pub aes128_uj_per_byte: f64,
}

impl Default for CryptoCostTable {
    fn default() -> Self {
        Self {
            ecdhe_mj_per_op: 34.13,
            ecdsa_sign_mj_per_op: 11.86,
            ecdsa_verify_mj_per_op: 35.09,
            sha256_uj_per_byte: 0.041,
            hmac_sha256_uj_per_byte: 0.056,
            aes128_uj_per_byte: 0.134,
        }
    }
}

/// Energy (µJ) for the transmitter's side of one radio event carrying an
/// `payload_bytes`-byte payload in `fragments` fragments:
///
/// `E_T = E_WU + n·l_HDR·E_RX + (2n−1)·E_IFS + (n·l_HDR + l_P)·E_TX + E_SLP`
pub fn tx_energy(
    params: &EnergyParams,
    payload_bytes: u32,
    fragments: u32,
) -> Result<f64, EnergyError> {
    if fragments < 1 {
        return Err(EnergyError::BadFragmentCount);
    }
    let n = f64::from(fragments);
    let l_p = f64::from(payload_bytes);
    let l_hdr = f64::from(params.l_hdr);
    Ok(params.e_wu
        + n * l_hdr * params.e_rx
        + (2.0 * n - 1.0) * params.e_ifs
        + (n * l_hdr + l_p) * params.e_tx
        + params.e_slp)
}

/// Energy (µJ) for the receiver's side of the same event — the mirror of
/// [`tx_energy`] with the transmit and receive roles swapped:
///
/// `E_R = E_WU + (n·l_HDR + l_P)·E_RX + (2n−1)·E_IFS + n·l_HDR·E_TX + E_SLP`
pub fn rx_energy(
    params: &EnergyParams,
    payload_bytes: u32,
    fragments: u32,
) -> Result<f64, EnergyError> {
    if fragments < 1 {
        return Err(EnergyError::BadFragmentCount);
    }
    let n = f64::from(fragments);
    let l_p = f64::from(payload_bytes);
    let l_hdr = f64::from(params.l_hdr);
    Ok(params.e_wu
        + (n * l_hdr + l_p) * params.e_rx
        + (2.0 * n - 1.0) * params.e_ifs
        + n * l_hdr * params.e_tx
        + params.e_slp)
}

/// Added cryptographic energy of a handshake, in mJ: `signs` signature
/// creations, `verifies` signature checks, `ecdh_ops` key agreements.
pub fn pairing_overhead(
    table: &CryptoCostTable,
    signs: u32,
    verifies: u32,
    ecdh_ops: u32,
) -> f64 {
    f64::from(signs) * table.ecdsa_sign_mj_per_op
        + f64::from(verifies) * table.ecdsa_verify_mj_per_op
        + f64::from(ecdh_ops) * table.ecdhe_mj_per_op
}

/// Radio energy to send and to receive one certificate of `cert_size`
/// bytes, fragmenting at [`DEFAULT_MAX_PAYLOAD`]. Returns `(tx µJ, rx µJ)`.
pub fn cert_transfer_energy(params: &EnergyParams, cert_size: NonZeroU32) -> (f64, f64) {
    cert_transfer_energy_with(
        params,
        cert_size,
        NonZeroU32::new(DEFAULT_MAX_PAYLOAD).expect("251 is nonzero"),
    )
}

/// [`cert_transfer_energy`] with an explicit maximum fragment payload.
pub fn cert_transfer_energy_with(
    params: &EnergyParams,
    cert_size: NonZeroU32,
    max_payload: NonZeroU32,
) -> (f64, f64) {
    let fragments = cert_size.get().div_ceil(max_payload.get());
    let tx = tx_energy(params, cert_size.get(), fragments).expect("fragments >= 1 by ceiling");
    let rx = rx_energy(params, cert_size.get(), fragments).expect("fragments >= 1 by ceiling");
    (tx, rx)
}
