//! The 103-byte BLE-profiled certificate.
//!
//! Layout (all offsets fixed):
//!
//! | bytes    | field                                  |
//! |----------|----------------------------------------|
//! | 0        | version, always `0x01`                 |
//! | 1..7     | serial: the device's static MAC        |
//! | 7..39    | subject public key x-coordinate        |
//! | 39..103  | ECDSA signature `r ‖ s` over bytes 0..39 |
//!
//! The subject key is stored as a bare x-coordinate and reconstructed with
//! the even-y convention; the authority refuses to certify a key that would
//! not survive that round trip. There is no issuer field (a verifier trusts
//! exactly one authority key, configured out-of-band) and no validity
//! period (expiry is handled by the key-rotation flow).

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{
    ecdsa_sign_deterministic, ecdsa_verify, PrivateScalar, PublicKey, Signature,
};

/// Total encoded width.
pub const CERT_LEN: usize = 103;
/// The signature covers this prefix: version ‖ serial ‖ subject key.
pub const SIGNED_PAYLOAD_LEN: usize = 39;
/// The only version this artifact emits or accepts.
pub const CERT_VERSION: u8 = 0x01;

/// A parsed certificate. Immutable once constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BleCertificate {
    version: u8,
    serial: [u8; 6],
    subject_public_key: [u8; 32],
    signature: Signature,
}

/// Parse failures. Signature validity is deliberately not checked here;
/// that is [`BleCertificate::verify`]'s job.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum CertDecodeError {
    #[error("certificate must be {CERT_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("unsupported certificate version {0:#04x}")]
    BadVersion(u8),
}

/// Verification rejection reasons.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum CertVerifyError {
    #[error("signature does not verify under the authority key")]
    BadSignature,
    #[error("subject key is not a valid curve point")]
    BadPoint,
}

impl BleCertificate {
    /// Assemble a certificate from already-signed parts.
    pub fn new(serial: [u8; 6], subject_public_key: [u8; 32], signature: Signature) -> Self {
        Self { version: CERT_VERSION, serial, subject_public_key, signature }
    }

    /// Sign a fresh certificate over `serial` and `subject_public_key` with
    /// the issuer's key. Signing is deterministic so that issuance is
    /// replayable.
    pub fn sign_new(
        serial: [u8; 6],
        subject_public_key: [u8; 32],
        issuer: &PrivateScalar,
    ) -> Self {
        let payload = signed_payload(&serial, &subject_public_key);
        let signature = ecdsa_sign_deterministic(issuer, &payload);
        Self::new(serial, subject_public_key, signature)
    }

    pub fn version(&self) -> u8 {
        self.version
    }

    pub fn serial(&self) -> &[u8; 6] {
        &self.serial
    }

    pub fn subject_public_key(&self) -> &[u8; 32] {
        &self.subject_public_key
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// The 39 bytes the signature covers.
    pub fn signed_payload(&self) -> [u8; SIGNED_PAYLOAD_LEN] {
        signed_payload(&self.serial, &self.subject_public_key)
    }

    /// Encode to the fixed 103-byte layout.
    pub fn encode(&self) -> [u8; CERT_LEN] {
        let mut out = [0u8; CERT_LEN];
        out[..SIGNED_PAYLOAD_LEN].copy_from_slice(&self.signed_payload());
        out[SIGNED_PAYLOAD_LEN..].copy_from_slice(&self.signature.encode());
        out
    }

    /// Parse exactly 103 bytes. The signature is carried as-is.
    pub fn decode(bytes: &[u8]) -> Result<Self, CertDecodeError> {
        if bytes.len() != CERT_LEN {
            return Err(CertDecodeError::BadLength(bytes.len()));
        }
        if bytes[0] != CERT_VERSION {
            return Err(CertDecodeError::BadVersion(bytes[0]));
        }
        Ok(Self {
            version: bytes[0],
            serial: bytes[1..7].try_into().expect("fixed width"),
            subject_public_key: bytes[7..39].try_into().expect("fixed width"),
            signature: Signature::from_bytes(bytes[39..].try_into().expect("fixed width")),
        })
    }

    /// Verify under the issuing authority's public key.
    ///
    /// Accepts iff the signature covers the first 39 encoded bytes and the
    /// subject x-coordinate reconstructs to a curve point; on success the
    /// reconstructed (even-y) subject key is returned.
    pub fn verify(&self, authority_key: &PublicKey) -> Result<PublicKey, CertVerifyError> {
        if !ecdsa_verify(authority_key, &self.signed_payload(), &self.signature) {
            return Err(CertVerifyError::BadSignature);
        }
        PublicKey::from_x_even_y(self.subject_public_key)
            .map_err(|_| CertVerifyError::BadPoint)
    }
}

fn signed_payload(serial: &[u8; 6], subject_key: &[u8; 32]) -> [u8; SIGNED_PAYLOAD_LEN] {
    let mut payload = [0u8; SIGNED_PAYLOAD_LEN];
    payload[0] = CERT_VERSION;
    payload[1..7].copy_from_slice(serial);
    payload[7..].copy_from_slice(subject_key);
    payload
}

/// One row of the size comparison between a plain X.509 v3 certificate and
/// the BLE-profiled layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SizeRow {
    pub field: &'static str,
    pub x509_bytes: u32,
    pub ble_bytes: u32,
}

/// The field-by-field size comparison with totals and the reduction ratio.
#[derive(Clone, Debug, Serialize)]
pub struct CertSizeReport {
    pub rows: Vec<SizeRow>,
    pub x509_total: u32,
    pub ble_total: u32,
    pub reduction_percent: f64,
}

/// Reference sizes of a representative web X.509 v3 certificate next to the
/// BLE-profiled fields. The X.509 column is fixed reference data, not the
/// output of a parser.
pub fn size_report() -> CertSizeReport {
    let rows = vec![
        SizeRow { field: "Version", x509_bytes: 5, ble_bytes: 1 },
        SizeRow { field: "Serial Number", x509_bytes: 18, ble_bytes: 6 },
        SizeRow { field: "Signature", x509_bytes: 15, ble_bytes: 0 },
        SizeRow { field: "Issuer", x509_bytes: 114, ble_bytes: 0 },
        SizeRow { field: "Validity", x509_bytes: 32, ble_bytes: 0 },
        SizeRow { field: "Subject", x509_bytes: 168, ble_bytes: 0 },
        SizeRow { field: "Subject public key info", x509_bytes: 294, ble_bytes: 32 },
        SizeRow { field: "Issuer and subject unique ID", x509_bytes: 0, ble_bytes: 0 },
        SizeRow { field: "Extensions", x509_bytes: 596, ble_bytes: 0 },
        SizeRow { field: "Signature Algorithm", x509_bytes: 15, ble_bytes: 0 },
        SizeRow { field: "Signature", x509_bytes: 261, ble_bytes: 64 },
    ];
    let x509_total = rows.iter().map(|r| r.x509_bytes).sum();
    let ble_total = rows.iter().map(|r| r.ble_bytes).sum();
    let reduction_percent = f64::from(x509_total - ble_total) / f64::from(x509_total) * 100.0;
    CertSizeReport { rows, x509_total, ble_total, reduction_percent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_keypair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn fixture() -> (crate::crypto::KeyPair, BleCertificate) {
        let mut rng = ChaCha12Rng::seed_from_u64(0xce47);
        let authority = generate_keypair(&mut rng).unwrap();
        let subject = generate_keypair(&mut rng).unwrap();
        let cert =
            BleCertificate::sign_new([0xaa, 0xbb, 0xcc, 1, 2, 3], *subject.public().x(), authority.private());
        (authority, cert)
    }

    #[test]
    fn encoding_is_exactly_103_bytes_with_the_fixed_layout() {
        let (_, cert) = fixture();
        let bytes = cert.encode();
        assert_eq!(bytes.len(), CERT_LEN);
        assert_eq!(bytes[0], 0x01, "version at offset 0");
        assert_eq!(&bytes[1..7], cert.serial());
        assert_eq!(&bytes[7..39], cert.subject_public_key());
        assert_eq!(&bytes[39..], &cert.signature().encode());
    }

    #[test]
    fn decode_inverts_encode_for_random_certificates() {
        let mut rng = ChaCha12Rng::seed_from_u64(0xce48);
        for _ in 0..20 {
            let kp = generate_keypair(&mut rng).unwrap();
            let issuer = generate_keypair(&mut rng).unwrap();
            let mut serial = [0u8; 6];
            rand::RngCore::fill_bytes(&mut rng, &mut serial);
            let cert = BleCertificate::sign_new(serial, *kp.public().x(), issuer.private());
            assert_eq!(BleCertificate::decode(&cert.encode()), Ok(cert));
        }
    }

    #[test]
    fn decode_rejects_wrong_lengths_and_versions() {
        let (_, cert) = fixture();
        let bytes = cert.encode();
        assert_eq!(BleCertificate::decode(&bytes[..102]), Err(CertDecodeError::BadLength(102)));
        assert_eq!(BleCertificate::decode(&[]), Err(CertDecodeError::BadLength(0)));
        let mut long = bytes.to_vec();
        long.push(0);
        assert_eq!(BleCertificate::decode(&long), Err(CertDecodeError::BadLength(104)));
        let mut wrong_version = bytes;
        wrong_version[0] = 0x02;
        assert_eq!(
            BleCertificate::decode(&wrong_version),
            Err(CertDecodeError::BadVersion(0x02))
        );
    }

    #[test]
    fn issued_certificates_verify_and_return_the_even_y_subject() {
        let (authority, cert) = fixture();
        let subject = cert.verify(authority.public()).unwrap();
        assert_eq!(subject.x(), cert.subject_public_key());
        assert!(subject.has_even_y());
    }

    #[test]
    fn tampering_any_serial_byte_breaks_the_signature() {
        let (authority, cert) = fixture();
        for i in 0..6 {
            let mut bytes = cert.encode();
            bytes[1 + i] ^= 0xff;
            let tampered = BleCertificate::decode(&bytes).unwrap();
            assert_eq!(
                tampered.verify(authority.public()),
                Err(CertVerifyError::BadSignature),
                "serial byte {i}"
            );
        }
    }

    #[test]
    fn a_signed_non_residue_subject_key_rejects_as_bad_point() {
        // Sign an x-coordinate with no curve solution (found via the
        // independent oracle) so the signature is valid but the point is not.
        let mut rng = ChaCha12Rng::seed_from_u64(0xce49);
        let authority = generate_keypair(&mut rng).unwrap();
        let mut x = [0u8; 32];
        let mut non_residue = None;
        for candidate in 1u8..=60 {
            x[31] = candidate;
            if refcrypto::p256::decompress(&x, true).is_none() {
                non_residue = Some(x);
                break;
            }
        }
        let cert =
            BleCertificate::sign_new([9; 6], non_residue.expect("small non-residue"), authority.private());
        assert_eq!(cert.verify(authority.public()), Err(CertVerifyError::BadPoint));
    }

    #[test]
    fn changing_signature_bytes_never_changes_the_signed_payload() {
        let (_, cert) = fixture();
        let mut bytes = cert.encode();
        for i in SIGNED_PAYLOAD_LEN..CERT_LEN {
            bytes[i] ^= 0x55;
        }
        let mangled = BleCertificate::decode(&bytes).unwrap();
        assert_eq!(mangled.signed_payload(), cert.signed_payload());
    }

    #[test]
    fn size_report_reproduces_the_reference_totals() {
        let report = size_report();
        assert_eq!(report.ble_total, 103);
        assert_eq!(report.x509_total, 1518);
        assert!((report.reduction_percent - 93.2).abs() < 0.05);
        assert_eq!(report.rows.len(), 11);
        let row_sum: u32 = report.rows.iter().map(|r| r.ble_bytes).sum();
        assert_eq!(row_sum as usize, CERT_LEN);
    }
}
