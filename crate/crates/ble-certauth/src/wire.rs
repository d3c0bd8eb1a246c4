//! Handshake framing: one opcode byte followed by a fixed-width payload.
//!
//! The request/response bodies are 7 bytes, mirroring the SMP pairing
//! feature exchange; certificates ride in full (103 bytes); confirm values
//! and nonces are bare 16-byte payloads. Frames 0x12/0x13 carry raw public
//! keys for the certificate-less Just Works control arm used by the attack
//! harness. All multi-byte fields are big-endian.

use serde::Serialize;
use thiserror::Error;

use crate::cert::{BleCertificate, CertDecodeError, CERT_LEN};
use crate::crypto::{ConfirmValue, Nonce128};

pub mod opcode {
    pub const PAIRING_REQ: u8 = 0x01;
    pub const PAIRING_RSP: u8 = 0x02;
    pub const CERT_CENTRAL: u8 = 0x10;
    pub const CERT_PERIPHERAL: u8 = 0x11;
    pub const RAW_KEY_CENTRAL: u8 = 0x12;
    pub const RAW_KEY_PERIPHERAL: u8 = 0x13;
    pub const CONFIRM: u8 = 0x20;
    pub const NONCE_CENTRAL: u8 = 0x21;
    pub const NONCE_PERIPHERAL: u8 = 0x22;
    pub const SESSION_FRAME: u8 = 0x30;
    pub const FAIL: u8 = 0xff;
}

/// Bit mask of the certificate-authentication flag inside the AuthReq
/// octet: the lowest reserved position, bit 5.
pub const CERT_AUTH_BIT: u8 = 0x20;

/// The authentication-requirements octet of the pairing feature exchange.
/// Bits 0–1 bonding, 2 MITM, 3 secure connections, 4 keypress, 5 the
/// certificate-authentication flag (a reserved position in plain SMP);
/// bits 6–7 must stay zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthReq {
    pub bonding: u8,
    pub mitm: bool,
    pub sc: bool,
    pub keypress: bool,
    pub cert_auth: bool,
}

impl AuthReq {
    pub fn encode(&self) -> u8 {
        (self.bonding & 0b11)
            | u8::from(self.mitm) << 2
            | u8::from(self.sc) << 3
            | u8::from(self.keypress) << 4
            | u8::from(self.cert_auth) << 5
    }

    pub fn decode(byte: u8) -> Result<Self, FrameError> {
        if byte & 0b1100_0000 != 0 {
            return Err(FrameError::BadFeatures("reserved AuthReq bits set"));
        }
        Ok(Self {
            bonding: byte & 0b11,
            mitm: byte & 1 << 2 != 0,
            sc: byte & 1 << 3 != 0,
            keypress: byte & 1 << 4 != 0,
            cert_auth: byte & CERT_AUTH_BIT != 0,
        })
    }
}

/// IO capability value for a device with neither keyboard nor display —
/// the combination that forces Just Works in standard pairing.
pub const IO_CAP_NO_INPUT_NO_OUTPUT: u8 = 0x03;

/// The 7-byte body of PAIRING_REQ / PAIRING_RSP: io capability, OOB flag,
/// AuthReq octet, maximum key size, the two key-distribution bitmaps, and
/// one reserved zero byte of padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairingFeatures {
    pub io_capability: u8,
    pub oob_data: bool,
    pub auth_req: AuthReq,
    pub max_key_size: u8,
    pub initiator_key_dist: u8,
    pub responder_key_dist: u8,
}

impl PairingFeatures {
    pub const ENCODED_LEN: usize = 7;

    /// The feature set both arms of this artifact exchange: no IO, no OOB,
    /// bonding requested, secure connections, 128-bit keys. Only the
    /// certificate-authentication flag varies.
    pub fn just_works(cert_auth: bool) -> Self {
        Self {
            io_capability: IO_CAP_NO_INPUT_NO_OUTPUT,
            oob_data: false,
            auth_req: AuthReq { bonding: 1, mitm: false, sc: true, keypress: false, cert_auth },
            max_key_size: 16,
            initiator_key_dist: 0,
            responder_key_dist: 0,
        }
    }

    pub fn encode(&self) -> [u8; Self::ENCODED_LEN] {
        [
            self.io_capability,
            u8::from(self.oob_data),
            self.auth_req.encode(),
            self.max_key_size,
            self.initiator_key_dist,
            self.responder_key_dist,
            0,
        ]
    }

    pub fn decode(bytes: &[u8; Self::ENCODED_LEN]) -> Result<Self, FrameError> {
        if bytes[0] > 0x04 {
            return Err(FrameError::BadFeatures("io capability out of range"));
        }
        if bytes[1] > 1 {
            return Err(FrameError::BadFeatures("OOB flag must be 0 or 1"));
        }
        if !(7..=16).contains(&bytes[3]) {
            return Err(FrameError::BadFeatures("max key size outside 7..=16"));
        }
        if bytes[6] != 0 {
            return Err(FrameError::BadFeatures("reserved padding byte set"));
        }
        Ok(Self {
            io_capability: bytes[0],
            oob_data: bytes[1] == 1,
            auth_req: AuthReq::decode(bytes[2])?,
            max_key_size: bytes[3],
            initiator_key_dist: bytes[4],
            responder_key_dist: bytes[5],
        })
    }
}

/// Reason byte carried by a FAIL frame; doubles as the terminal failure
/// cause recorded in a pairing state machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FailReason {
    InvalidCertificate,
    ConfirmMismatch,
    WrongState,
    MalformedMessage,
    UnsupportedPeer,
}

impl FailReason {
    pub fn as_byte(self) -> u8 {
        match self {
            FailReason::InvalidCertificate => 0x01,
            FailReason::ConfirmMismatch => 0x02,
            FailReason::WrongState => 0x03,
            FailReason::MalformedMessage => 0x04,
            FailReason::UnsupportedPeer => 0x05,
        }
    }

    pub fn from_byte(byte: u8) -> Option<Self> {
        Some(match byte {
            0x01 => FailReason::InvalidCertificate,
            0x02 => FailReason::ConfirmMismatch,
            0x03 => FailReason::WrongState,
            0x04 => FailReason::MalformedMessage,
            0x05 => FailReason::UnsupportedPeer,
            _ => return None,
        })
    }
}

impl std::fmt::Display for FailReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailReason::InvalidCertificate => "invalid certificate",
            FailReason::ConfirmMismatch => "confirm mismatch",
            FailReason::WrongState => "wrong state",
            FailReason::MalformedMessage => "malformed message",
            FailReason::UnsupportedPeer => "unsupported peer",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("empty frame")]
    Empty,
    #[error("unknown opcode {0:#04x}")]
    UnknownOpcode(u8),
    #[error("opcode {opcode:#04x} expects a {expected}-byte payload, got {got}")]
    BadLength { opcode: u8, expected: usize, got: usize },
    #[error("malformed feature body: {0}")]
    BadFeatures(&'static str),
    #[error("unknown failure reason {0:#04x}")]
    UnknownFailReason(u8),
    #[error(transparent)]
    BadCertificate(#[from] CertDecodeError),
}

/// One framed handshake message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireMessage {
    PairingRequest(PairingFeatures),
    PairingResponse(PairingFeatures),
    CertCentral(BleCertificate),
    CertPeripheral(BleCertificate),
    RawKeyCentral([u8; 32]),
    RawKeyPeripheral([u8; 32]),
    Confirm(ConfirmValue),
    NonceCentral(Nonce128),
    NoncePeripheral(Nonce128),
    SessionFrame(Vec<u8>),
    Fail(FailReason),
}

impl WireMessage {
    pub fn opcode(&self) -> u8 {
        match self {
            WireMessage::PairingRequest(_) => opcode::PAIRING_REQ,
            WireMessage::PairingResponse(_) => opcode::PAIRING_RSP,
            WireMessage::CertCentral(_) => opcode::CERT_CENTRAL,
            WireMessage::CertPeripheral(_) => opcode::CERT_PERIPHERAL,
            WireMessage::RawKeyCentral(_) => opcode::RAW_KEY_CENTRAL,
            WireMessage::RawKeyPeripheral(_) => opcode::RAW_KEY_PERIPHERAL,
            WireMessage::Confirm(_) => opcode::CONFIRM,
            WireMessage::NonceCentral(_) => opcode::NONCE_CENTRAL,
            WireMessage::NoncePeripheral(_) => opcode::NONCE_PERIPHERAL,
            WireMessage::SessionFrame(_) => opcode::SESSION_FRAME,
            WireMessage::Fail(_) => opcode::FAIL,
        }
    }

    /// Frame name for transcripts and logs.
    pub fn label(&self) -> &'static str {
        match self {
            WireMessage::PairingRequest(_) => "PAIRING_REQ",
            WireMessage::PairingResponse(_) => "PAIRING_RSP",
            WireMessage::CertCentral(_) => "CERT_CENTRAL",
            WireMessage::CertPeripheral(_) => "CERT_PERIPHERAL",
            WireMessage::RawKeyCentral(_) => "RAW_KEY_CENTRAL",
            WireMessage::RawKeyPeripheral(_) => "RAW_KEY_PERIPHERAL",
            WireMessage::Confirm(_) => "CONFIRM",
            WireMessage::NonceCentral(_) => "NONCE_CENTRAL",
            WireMessage::NoncePeripheral(_) => "NONCE_PERIPHERAL",
            WireMessage::SessionFrame(_) => "SESSION_FRAME",
            WireMessage::Fail(_) => "FAIL",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.opcode()];
        match self {
            WireMessage::PairingRequest(f) | WireMessage::PairingResponse(f) => {
                out.extend_from_slice(&f.encode());
            }
            WireMessage::CertCentral(c) | WireMessage::CertPeripheral(c) => {
                out.extend_from_slice(&c.encode());
            }
            WireMessage::RawKeyCentral(x) | WireMessage::RawKeyPeripheral(x) => {
                out.extend_from_slice(x);
            }
            WireMessage::Confirm(v) => out.extend_from_slice(v.as_bytes()),
            WireMessage::NonceCentral(n) | WireMessage::NoncePeripheral(n) => {
                out.extend_from_slice(n.as_bytes());
            }
            WireMessage::SessionFrame(payload) => out.extend_from_slice(payload),
            WireMessage::Fail(reason) => out.push(reason.as_byte()),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let (&op, payload) = bytes.split_first().ok_or(FrameError::Empty)?;
        let expect = |len: usize| {
            if payload.len() == len {
                Ok(())
            } else {
                Err(FrameError::BadLength { opcode: op, expected: len, got: payload.len() })
            }
        };
        Ok(match op {
            opcode::PAIRING_REQ | opcode::PAIRING_RSP => {
                expect(PairingFeatures::ENCODED_LEN)?;
                let features =
                    PairingFeatures::decode(payload.try_into().expect("length checked"))?;
                if op == opcode::PAIRING_REQ {
                    WireMessage::PairingRequest(features)
                } else {
                    WireMessage::PairingResponse(features)
                }
            }
            opcode::CERT_CENTRAL | opcode::CERT_PERIPHERAL => {
                expect(CERT_LEN)?;
                let cert = BleCertificate::decode(payload)?;
                if op == opcode::CERT_CENTRAL {
                    WireMessage::CertCentral(cert)
                } else {
                    WireMessage::CertPeripheral(cert)
                }
            }
            opcode::RAW_KEY_CENTRAL | opcode::RAW_KEY_PERIPHERAL => {
                expect(32)?;
                let x: [u8; 32] = payload.try_into().expect("length checked");
                if op == opcode::RAW_KEY_CENTRAL {
                    WireMessage::RawKeyCentral(x)
                } else {
                    WireMessage::RawKeyPeripheral(x)
                }
            }
            opcode::CONFIRM => {
                expect(16)?;
                WireMessage::Confirm(ConfirmValue::from_bytes(
                    payload.try_into().expect("length checked"),
                ))
            }
            opcode::NONCE_CENTRAL | opcode::NONCE_PERIPHERAL => {
                expect(16)?;
                let nonce = Nonce128::from_bytes(payload.try_into().expect("length checked"));
                if op == opcode::NONCE_CENTRAL {
                    WireMessage::NonceCentral(nonce)
                } else {
                    WireMessage::NoncePeripheral(nonce)
                }
            }
            opcode::SESSION_FRAME => WireMessage::SessionFrame(payload.to_vec()),
            opcode::FAIL => {
                expect(1)?;
                WireMessage::Fail(
                    FailReason::from_byte(payload[0])
                        .ok_or(FrameError::UnknownFailReason(payload[0]))?,
                )
            }
            other => return Err(FrameError::UnknownOpcode(other)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn sample_cert() -> BleCertificate {
        let mut rng = ChaCha12Rng::seed_from_u64(0x31f0);
        let issuer = generate_keypair(&mut rng).unwrap();
        let subject = generate_keypair(&mut rng).unwrap();
        BleCertificate::sign_new([1, 2, 3, 4, 5, 6], *subject.public().x(), issuer.private())
    }

    #[test]
    fn the_cert_auth_flag_is_bit_five() {
        let mut req = PairingFeatures::just_works(false);
        assert_eq!(req.encode()[2] & CERT_AUTH_BIT, 0);
        req.auth_req.cert_auth = true;
        assert_eq!(req.encode()[2] & CERT_AUTH_BIT, CERT_AUTH_BIT);
        assert_eq!(CERT_AUTH_BIT, 1 << 5);
    }

    #[test]
    fn pairing_request_has_the_golden_encoding() {
        let msg = WireMessage::PairingRequest(PairingFeatures::just_works(true));
        // opcode, io=NoInputNoOutput, no OOB, AuthReq = bonding|sc|cert_auth,
        // 16-byte keys, empty key distribution, reserved pad.
        assert_eq!(msg.encode(), vec![0x01, 0x03, 0x00, 0x29, 0x10, 0x00, 0x00, 0x00]);
    }

    #[test]
    fn every_variant_roundtrips() {
        let cert = sample_cert();
        let messages = vec![
            WireMessage::PairingRequest(PairingFeatures::just_works(true)),
            WireMessage::PairingResponse(PairingFeatures::just_works(false)),
            WireMessage::CertCentral(cert),
            WireMessage::CertPeripheral(cert),
            WireMessage::RawKeyCentral([0xaa; 32]),
            WireMessage::RawKeyPeripheral([0x55; 32]),
            WireMessage::Confirm(ConfirmValue::from_bytes([7; 16])),
            WireMessage::NonceCentral(Nonce128::from_bytes([8; 16])),
            WireMessage::NoncePeripheral(Nonce128::from_bytes([9; 16])),
            WireMessage::SessionFrame(vec![]),
            WireMessage::SessionFrame(vec![1, 2, 3, 4, 5]),
            WireMessage::Fail(FailReason::ConfirmMismatch),
        ];
        for msg in messages {
            let bytes = msg.encode();
            assert_eq!(bytes[0], msg.opcode(), "{} must lead with its opcode", msg.label());
            assert_eq!(WireMessage::decode(&bytes).unwrap(), msg);
        }
    }

    #[test]
    fn decode_rejects_malformed_frames() {
        assert_eq!(WireMessage::decode(&[]), Err(FrameError::Empty));
        assert_eq!(WireMessage::decode(&[0x77, 1, 2]), Err(FrameError::UnknownOpcode(0x77)));
        assert_eq!(
            WireMessage::decode(&[opcode::CONFIRM, 1, 2, 3]),
            Err(FrameError::BadLength { opcode: 0x20, expected: 16, got: 3 })
        );
        let mut long_nonce = vec![opcode::NONCE_CENTRAL];
        long_nonce.extend_from_slice(&[0; 17]);
        assert!(matches!(
            WireMessage::decode(&long_nonce),
            Err(FrameError::BadLength { expected: 16, got: 17, .. })
        ));
        assert_eq!(
            WireMessage::decode(&[opcode::FAIL, 0x09]),
            Err(FrameError::UnknownFailReason(0x09))
        );
        assert_eq!(
            WireMessage::decode(&[opcode::FAIL]),
            Err(FrameError::BadLength { opcode: 0xff, expected: 1, got: 0 })
        );
    }

    #[test]
    fn feature_bodies_reject_out_of_spec_values() {
        let good = PairingFeatures::just_works(true).encode();
        for (index, value, why) in [
            (0usize, 0x05u8, "io capability"),
            (1, 0x02, "oob flag"),
            (2, 0xc0, "reserved auth bits"),
            (3, 0x06, "key size low"),
            (3, 0x11, "key size high"),
            (6, 0x01, "reserved pad"),
        ] {
            let mut bad = good;
            bad[index] = value;
            assert!(
                PairingFeatures::decode(&bad).is_err(),
                "expected rejection for {why}"
            );
        }
        assert_eq!(PairingFeatures::decode(&good).unwrap(), PairingFeatures::just_works(true));
    }

    #[test]
    fn tampered_cert_version_inside_a_frame_fails_decode() {
        let mut bytes = WireMessage::CertPeripheral(sample_cert()).encode();
        bytes[1] = 0x02;
        assert!(matches!(
            WireMessage::decode(&bytes),
            Err(FrameError::BadCertificate(CertDecodeError::BadVersion(0x02)))
        ));
    }

    #[test]
    fn fail_reason_bytes_roundtrip_and_unknowns_are_refused() {
        for reason in [
            FailReason::InvalidCertificate,
            FailReason::ConfirmMismatch,
            FailReason::WrongState,
            FailReason::MalformedMessage,
            FailReason::UnsupportedPeer,
        ] {
            assert_eq!(FailReason::from_byte(reason.as_byte()), Some(reason));
        }
        assert_eq!(FailReason::from_byte(0x00), None);
        assert_eq!(FailReason::from_byte(0x06), None);
    }
}
