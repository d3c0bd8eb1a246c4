//! Link encryption under the derived LTK.
//!
//! The construction is encrypt-then-MAC under two subkeys split off the LTK
//! with CMAC: AES-128 in counter mode for confidentiality and AES-128 CMAC
//! over the frame header and ciphertext for integrity. Each frame carries a
//! direction octet and a 64-bit message counter; receivers reject any frame
//! whose counter does not strictly increase, which makes replay detection a
//! local check.
//!
//! Frame layout: `direction (1) ‖ counter (8, big-endian) ‖ ciphertext ‖
//! tag (16)`.

use aes::cipher::{KeyIvInit, StreamCipher};
use aes::Aes128;
use thiserror::Error;

use super::{aes_cmac, Ltk};

type Ctr = ctr::Ctr128BE<Aes128>;

/// Bytes a sealed frame adds on top of the plaintext length.
pub const SESSION_OVERHEAD: usize = 1 + 8 + 16;

const ENC_LABEL: &[u8] = b"link-encrypt";
const MAC_LABEL: &[u8] = b"link-authenticate";

/// Which way a frame travels; bound into both the keystream and the tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    CentralToPeripheral = 0x00,
    PeripheralToCentral = 0x01,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::CentralToPeripheral => Direction::PeripheralToCentral,
            Direction::PeripheralToCentral => Direction::CentralToPeripheral,
        }
    }

    fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0x00 => Some(Direction::CentralToPeripheral),
            0x01 => Some(Direction::PeripheralToCentral),
            _ => None,
        }
    }
}

/// Session failures. Malformed frames are indistinguishable from tampered
/// ones and also report `AuthFailure`.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("frame failed authentication")]
    AuthFailure,
    #[error("frame counter did not increase")]
    ReplayDetected,
}

fn subkeys(ltk: &Ltk) -> ([u8; 16], [u8; 16]) {
    (aes_cmac(ltk.as_bytes(), ENC_LABEL), aes_cmac(ltk.as_bytes(), MAC_LABEL))
}

/// The counter occupies high IV bytes so that CTR block increments within a
/// frame can never collide with the next frame's keystream.
fn iv(direction: Direction, counter: u64) -> [u8; 16] {
    let mut iv = [0u8; 16];
    iv[0] = direction as u8;
    iv[1..9].copy_from_slice(&counter.to_be_bytes());
    iv
}

/// Encrypt and authenticate one frame.
pub fn session_seal(ltk: &Ltk, direction: Direction, counter: u64, plaintext: &[u8]) -> Vec<u8> {
    let (enc_key, mac_key) = subkeys(ltk);
    let mut frame = Vec::with_capacity(plaintext.len() + SESSION_OVERHEAD);
    frame.push(direction as u8);
    frame.extend_from_slice(&counter.to_be_bytes());
    frame.extend_from_slice(plaintext);
    Ctr::new(&enc_key.into(), &iv(direction, counter).into())
        .apply_keystream(&mut frame[9..]);
    let tag = aes_cmac(&mac_key, &frame);
    frame.extend_from_slice(&tag);
    frame
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Authenticate and decrypt one frame.
///
/// `last_counter` is the highest counter previously accepted from this
/// direction (`None` before the first frame); the frame's own counter must
/// exceed it. Returns the accepted counter with the plaintext.
pub fn session_open(
    ltk: &Ltk,
    direction: Direction,
    last_counter: Option<u64>,
    frame: &[u8],
) -> Result<(u64, Vec<u8>), SessionError> {
    if frame.len() < SESSION_OVERHEAD {
        return Err(SessionError::AuthFailure);
    }
    let (body, tag) = frame.split_at(frame.len() - 16);
    let (enc_key, mac_key) = subkeys(ltk);
    if !ct_eq(&aes_cmac(&mac_key, body), tag) {
        return Err(SessionError::AuthFailure);
    }
    if Direction::from_byte(body[0]) != Some(direction) {
        return Err(SessionError::AuthFailure);
    }
    let counter = u64::from_be_bytes(body[1..9].try_into().expect("fixed width"));
    if last_counter.is_some_and(|last| counter <= last) {
        return Err(SessionError::ReplayDetected);
    }
    let mut plaintext = body[9..].to_vec();
    Ctr::new(&enc_key.into(), &iv(direction, counter).into())
        .apply_keystream(&mut plaintext);
    Ok((counter, plaintext))
}

/// A stateful per-endpoint wrapper that assigns send counters and tracks the
/// peer's receive counter.
pub struct SessionChannel {
    ltk: Ltk,
    outbound: Direction,
    next_send: u64,
    last_received: Option<u64>,
}

impl SessionChannel {
    /// `outbound` is the direction frames sealed by this endpoint travel.
    pub fn new(ltk: Ltk, outbound: Direction) -> Self {
        Self { ltk, outbound, next_send: 0, last_received: None }
    }

    pub fn seal(&mut self, plaintext: &[u8]) -> Vec<u8> {
        let frame = session_seal(&self.ltk, self.outbound, self.next_send, plaintext);
        self.next_send += 1;
        frame
    }

    pub fn open(&mut self, frame: &[u8]) -> Result<Vec<u8>, SessionError> {
        let (counter, plaintext) =
            session_open(&self.ltk, self.outbound.flip(), self.last_received, frame)?;
        self.last_received = Some(counter);
        Ok(plaintext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn ltk() -> Ltk {
        Ltk::from_bytes(*b"sixteen byte key")
    }

    #[test]
    fn open_inverts_seal_up_to_the_mtu() {
        let mut rng = ChaCha12Rng::seed_from_u64(30);
        for _ in 0..50 {
            let len = rng.gen_range(0..=251);
            let mut plaintext = vec![0u8; len];
            rng.fill_bytes(&mut plaintext);
            let counter = rng.gen_range(0..u64::MAX);
            let frame =
                session_seal(&ltk(), Direction::CentralToPeripheral, counter, &plaintext);
            assert_eq!(frame.len(), plaintext.len() + SESSION_OVERHEAD);
            let (got_counter, opened) =
                session_open(&ltk(), Direction::CentralToPeripheral, None, &frame).unwrap();
            assert_eq!(got_counter, counter);
            assert_eq!(opened, plaintext);
        }
    }

    #[test]
    fn any_flipped_ciphertext_bit_fails_authentication() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let frame = session_seal(&ltk(), Direction::PeripheralToCentral, 3, b"tamper target");
        for _ in 0..100 {
            let mut tampered = frame.clone();
            let bit = rng.gen_range(0..tampered.len() * 8);
            tampered[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(
                session_open(&ltk(), Direction::PeripheralToCentral, None, &tampered),
                Err(SessionError::AuthFailure),
                "bit {bit} was accepted"
            );
        }
    }

    #[test]
    fn replayed_and_reordered_counters_are_rejected() {
        let frame = session_seal(&ltk(), Direction::CentralToPeripheral, 5, b"hello");
        let (counter, _) =
            session_open(&ltk(), Direction::CentralToPeripheral, None, &frame).unwrap();
        assert_eq!(
            session_open(&ltk(), Direction::CentralToPeripheral, Some(counter), &frame),
            Err(SessionError::ReplayDetected)
        );
        assert_eq!(
            session_open(&ltk(), Direction::CentralToPeripheral, Some(9), &frame),
            Err(SessionError::ReplayDetected),
            "stale counter"
        );
    }

    #[test]
    fn direction_is_bound_into_the_frame() {
        let frame = session_seal(&ltk(), Direction::CentralToPeripheral, 0, b"oneway");
        assert_eq!(
            session_open(&ltk(), Direction::PeripheralToCentral, None, &frame),
            Err(SessionError::AuthFailure)
        );
    }

    #[test]
    fn truncated_frames_fail_closed() {
        let frame = session_seal(&ltk(), Direction::CentralToPeripheral, 0, b"x");
        for len in 0..frame.len() {
            assert_eq!(
                session_open(&ltk(), Direction::CentralToPeripheral, None, &frame[..len]),
                Err(SessionError::AuthFailure),
                "length {len}"
            );
        }
    }

    #[test]
    fn channels_converse_and_catch_replay() {
        let mut central = SessionChannel::new(ltk(), Direction::CentralToPeripheral);
        let mut peripheral = SessionChannel::new(ltk(), Direction::PeripheralToCentral);

        let f1 = central.seal(b"ping");
        assert_eq!(peripheral.open(&f1).unwrap(), b"ping");
        let f2 = peripheral.seal(b"pong");
        assert_eq!(central.open(&f2).unwrap(), b"pong");
        let f3 = central.seal(b"again");
        assert_eq!(peripheral.open(&f3).unwrap(), b"again");
        assert_eq!(peripheral.open(&f3), Err(SessionError::ReplayDetected));
    }
}
