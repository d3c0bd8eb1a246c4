//! Central and peripheral handshake state machines.
//!
//! The flow, after the standard feature exchange carries the
//! certificate-authentication flag:
//!
//! ```text
//! central                                peripheral
//!   | PAIRING_REQ  (cert_auth=1)           |
//!   |                 PAIRING_RSP (echoed) |
//!   | CERT_CENTRAL                         |  verify under root,
//!   |                                      |  ECDH, draw N_p,
//!   |      CERT_PERIPHERAL ‖ CONFIRM(C_p)  |  C_p = f4(PK_c, PK_p, N_p)
//!   |  verify, ECDH, draw N_c              |
//!   | NONCE_CENTRAL                        |  LTK = f5(...), Established
//!   |                     NONCE_PERIPHERAL |
//!   |  recompute C_p; match → LTK,         |
//!   |  Established; else FAIL              |
//! ```
//!
//! The peripheral commits to its nonce via the confirm value *before* it
//! learns the central's nonce, so neither side can steer the derived key;
//! the central's recomputation of C_p is what catches tampering.
//!
//! Failure handling: protocol-level rejections (bad certificate, confirm
//! mismatch, out-of-order or unsupported messages) are not `Err` — they
//! emit a FAIL frame for the peer and park the state machine in the
//! terminal `Failed` state. `Err` is reserved for local faults: API misuse
//! (wrong role/state for `start_pairing`, reading an LTK too early) and a
//! failing randomness source. Terminal states absorb all further traffic
//! silently, so a flood of stale frames cannot re-open a dead handshake.

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::cert::BleCertificate;
use crate::crypto::{
    ecdh, f4_confirm, f5_ltk, CryptoError, DeviceAddress, Direction, KeyPair, Ltk, Nonce128,
    PublicKey, SessionChannel, SharedSecret,
};
use crate::wire::{FailReason, PairingFeatures, WireMessage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Central,
    Peripheral,
}

/// Handshake progress. Transitions only move forward; `Established` and
/// `Failed` are terminal. `NoncesExchanged` is pass-through: the machine
/// enters it when the second nonce lands and leaves it within the same
/// message, so callers observe it only in the trace of a debugger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingState {
    Idle,
    FeatureExchanged,
    CertSent,
    CertVerified,
    ConfirmExchanged,
    NoncesExchanged,
    Established,
    Failed(FailReason),
}

impl PairingState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, PairingState::Established | PairingState::Failed(_))
    }
}

/// A device's provisioned credentials: its keypair, the matching
/// authority-issued certificate, and the address the certificate binds.
/// The address is the certificate serial with the public address type —
/// the serial *is* the device's static MAC.
#[derive(Clone)]
pub struct DeviceIdentity {
    keypair: KeyPair,
    certificate: BleCertificate,
    address: DeviceAddress,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("certificate subject key does not match the keypair")]
    KeyMismatch,
}

impl DeviceIdentity {
    pub fn new(keypair: KeyPair, certificate: BleCertificate) -> Result<Self, IdentityError> {
        if certificate.subject_public_key() != keypair.public().x() {
            return Err(IdentityError::KeyMismatch);
        }
        let address = DeviceAddress::public(*certificate.serial());
        Ok(Self { keypair, certificate, address })
    }

    pub fn certificate(&self) -> &BleCertificate {
        &self.certificate
    }

    pub fn public_key(&self) -> &PublicKey {
        self.keypair.public()
    }

    pub fn address(&self) -> DeviceAddress {
        self.address
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum PairingError {
    #[error("operation requires the other role")]
    WrongRole,
    #[error("operation not valid in the current state")]
    WrongState,
    #[error("no key: the handshake has not established a session")]
    NotEstablished,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// One endpoint's handshake state machine. Single-threaded: one message at
/// a time; separate contexts are fully independent.
pub struct PairingContext {
    role: Role,
    state: PairingState,
    identity: DeviceIdentity,
    root_key: PublicKey,
    peer_key: Option<PublicKey>,
    peer_address: Option<DeviceAddress>,
    secret: Option<SharedSecret>,
    local_nonce: Option<Nonce128>,
    peer_nonce: Option<Nonce128>,
    expected_confirm: Option<crate::crypto::ConfirmValue>,
    ltk: Option<Ltk>,
}

impl PairingContext {
    pub fn new(role: Role, identity: DeviceIdentity, root_key: PublicKey) -> Self {
        Self {
            role,
            state: PairingState::Idle,
            identity,
            root_key,
            peer_key: None,
            peer_address: None,
            secret: None,
            local_nonce: None,
            peer_nonce: None,
            expected_confirm: None,
            ltk: None,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn state(&self) -> PairingState {
        self.state
    }

    pub fn local_address(&self) -> DeviceAddress {
        self.identity.address()
    }

    /// The peer's address as bound by its verified certificate; absent
    /// until that certificate has been accepted.
    pub fn peer_address(&self) -> Option<DeviceAddress> {
        self.peer_address
    }

    pub fn fail_reason(&self) -> Option<FailReason> {
        match self.state {
            PairingState::Failed(reason) => Some(reason),
            _ => None,
        }
    }

    /// Open the handshake. Central only, from `Idle`.
    pub fn start_pairing(&mut self) -> Result<WireMessage, PairingError> {
        if self.role != Role::Central {
            return Err(PairingError::WrongRole);
        }
        if self.state != PairingState::Idle {
            return Err(PairingError::WrongState);
        }
        self.state = PairingState::FeatureExchanged;
        Ok(WireMessage::PairingRequest(PairingFeatures::just_works(true)))
    }

    /// Feed one inbound message; returns the frames to send in reply.
    ///
    /// `Err` only on randomness failure (and never after a state change);
    /// every protocol-level rejection returns `Ok` with a FAIL frame and
    /// parks the machine in `Failed`.
    pub fn handle_message<R: RngCore + CryptoRng>(
        &mut self,
        message: &WireMessage,
        rng: &mut R,
    ) -> Result<Vec<WireMessage>, PairingError> {
        if self.state.is_terminal() {
            return Ok(Vec::new());
        }
        if let WireMessage::Fail(reason) = message {
            // The peer already aborted; adopt its verdict without replying,
            // so two failing endpoints cannot ping-pong FAIL frames.
            self.state = PairingState::Failed(*reason);
            return Ok(Vec::new());
        }

        match (self.role, self.state, message) {
            (Role::Peripheral, PairingState::Idle, WireMessage::PairingRequest(features)) => {
                if !features.auth_req.cert_auth {
                    return Ok(self.fail(FailReason::UnsupportedPeer));
                }
                self.state = PairingState::FeatureExchanged;
                Ok(vec![WireMessage::PairingResponse(PairingFeatures::just_works(true))])
            }

            (Role::Central, PairingState::FeatureExchanged, WireMessage::PairingResponse(features)) => {
                if !features.auth_req.cert_auth {
                    // The responder ignored the flag; refuse to degrade to
                    // plain Just Works.
                    return Ok(self.fail(FailReason::UnsupportedPeer));
                }
                self.state = PairingState::CertSent;
                Ok(vec![WireMessage::CertCentral(*self.identity.certificate())])
            }

            (Role::Peripheral, PairingState::FeatureExchanged, WireMessage::CertCentral(cert)) => {
                let Some(peer_key) = self.accept_peer_certificate(cert) else {
                    return Ok(self.fail(FailReason::InvalidCertificate));
                };
                let n_p = Nonce128::random(rng)?;
                let confirm = f4_confirm(&peer_key, self.identity.public_key(), &n_p);
                self.local_nonce = Some(n_p);
                self.state = PairingState::ConfirmExchanged;
                Ok(vec![
                    WireMessage::CertPeripheral(*self.identity.certificate()),
                    WireMessage::Confirm(confirm),
                ])
            }

            (Role::Central, PairingState::CertSent, WireMessage::CertPeripheral(cert)) => {
                if self.accept_peer_certificate(cert).is_none() {
                    return Ok(self.fail(FailReason::InvalidCertificate));
                }
                self.state = PairingState::CertVerified;
                Ok(Vec::new())
            }

            (Role::Central, PairingState::CertVerified, WireMessage::Confirm(value)) => {
                let n_c = Nonce128::random(rng)?;
                self.expected_confirm = Some(*value);
                self.local_nonce = Some(n_c);
                self.state = PairingState::ConfirmExchanged;
                Ok(vec![WireMessage::NonceCentral(n_c)])
            }

            (Role::Peripheral, PairingState::ConfirmExchanged, WireMessage::NonceCentral(n_c)) => {
                self.peer_nonce = Some(*n_c);
                self.state = PairingState::NoncesExchanged;
                let n_p = self.local_nonce.expect("set when confirm was sent");
                self.derive_ltk(*n_c, n_p)?;
                self.state = PairingState::Established;
                Ok(vec![WireMessage::NoncePeripheral(n_p)])
            }

            (Role::Central, PairingState::ConfirmExchanged, WireMessage::NoncePeripheral(n_p)) => {
                self.peer_nonce = Some(*n_p);
                self.state = PairingState::NoncesExchanged;
                let recomputed = f4_confirm(
                    self.identity.public_key(),
                    self.peer_key.as_ref().expect("set at certificate verification"),
                    n_p,
                );
                if Some(recomputed) != self.expected_confirm {
                    return Ok(self.fail(FailReason::ConfirmMismatch));
                }
                let n_c = self.local_nonce.expect("set when nonce was sent");
                self.derive_ltk(n_c, *n_p)?;
                self.state = PairingState::Established;
                Ok(Vec::new())
            }

            // Anything else is out of order for the current role and state.
            _ => Ok(self.fail(FailReason::WrongState)),
        }
    }

    /// Record locally malformed (undecodable) inbound bytes. The link
    /// driver calls this when frame decoding fails; returns the FAIL frame
    /// to send, or nothing in a terminal state.
    pub fn note_malformed(&mut self) -> Option<WireMessage> {
        if self.state.is_terminal() {
            return None;
        }
        Some(self.fail(FailReason::MalformedMessage).remove(0))
    }

    /// The derived long-term key; only once `Established`.
    pub fn ltk(&self) -> Result<&Ltk, PairingError> {
        match (&self.state, &self.ltk) {
            (PairingState::Established, Some(key)) => Ok(key),
            _ => Err(PairingError::NotEstablished),
        }
    }

    /// An encrypt-then-MAC channel keyed by the established LTK, with this
    /// endpoint's role fixing the outbound direction.
    pub fn session_channel(&self) -> Result<SessionChannel, PairingError> {
        let ltk = self.ltk()?.clone();
        let outbound = match self.role {
            Role::Central => Direction::CentralToPeripheral,
            Role::Peripheral => Direction::PeripheralToCentral,
        };
        Ok(SessionChannel::new(ltk, outbound))
    }

    fn fail(&mut self, reason: FailReason) -> Vec<WireMessage> {
        self.state = PairingState::Failed(reason);
        vec![WireMessage::Fail(reason)]
    }

    /// Verify the peer certificate under the trusted root and, on success,
    /// bind its key and address and compute the shared secret.
    fn accept_peer_certificate(&mut self, cert: &BleCertificate) -> Option<PublicKey> {
        let peer_key = cert.verify(&self.root_key).ok()?;
        // ECDH with a verified non-identity point and an in-range scalar
        // cannot hit the identity, but treat any residual failure as an
        // unusable certificate rather than unwinding.
        let secret = ecdh(self.identity.keypair.private(), &peer_key).ok()?;
        self.peer_key = Some(peer_key);
        self.peer_address = Some(DeviceAddress::public(*cert.serial()));
        self.secret = Some(secret);
        Some(peer_key)
    }

    fn derive_ltk(&mut self, n_c: Nonce128, n_p: Nonce128) -> Result<(), PairingError> {
        let secret = self.secret.as_ref().expect("set at certificate verification");
        let (mac_c, mac_p) = match self.role {
            Role::Central => {
                (self.identity.address(), self.peer_address.expect("peer cert accepted"))
            }
            Role::Peripheral => {
                (self.peer_address.expect("peer cert accepted"), self.identity.address())
            }
        };
        self.ltk = Some(f5_ltk(secret, &n_c, &n_p, &mac_c, &mac_p)?);
        Ok(())
    }
}
