//! Simulated link layer with pluggable active adversaries, plus the
//! certificate-less Just Works control arm the attacks are measured
//! against.
//!
//! The attacker model is Dolev–Yao on the link: every frame passes through
//! the adversary, which may forward, rewrite, drop, or inject frames in
//! either direction. The attacker cannot break the cryptography and cannot
//! extract keys provisioned inside the honest endpoints.
//!
//! Five strategies ship:
//!
//! * `Passive` — records everything, changes nothing; the harness then
//!   checks that no key material can be lifted from the transcript.
//! * `CertSubstitute` — swaps one endpoint's certificate for the
//!   attacker's self-signed one (which certificate is targeted alternates
//!   with the seed).
//! * `KeySubstitute` — the classic MITM: the attacker terminates both
//!   sides with its own endpoints and keys, claiming each honest party's
//!   link address to the other.
//! * `NonceTamper` — flips one bit of the confirm value or of the
//!   revealed peripheral nonce (alternating by seed). The central's
//!   recomputation of the confirm catches either, so blind tampering with
//!   the commitment always surfaces. The central's own nonce frame is left
//!   alone deliberately: the confirm commits only to the keys and N_p, so
//!   a flipped N_c would surface as a dead session key rather than a
//!   handshake abort.
//! * `AddressSpoof` — the attacker claims the victim's hardware address.
//!   Against the full protocol the claim has to survive issuance (refused:
//!   one live certificate per serial) and verification (the fallback
//!   self-signed certificate is rejected). The baseline accepts any
//!   claimed address, so the same move hands the attacker the session.
//!
//! Every scenario is single-threaded and strictly scheduled, so a report
//! is a pure function of its strategy and seed.

use std::collections::VecDeque;

use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::authority::{sign_request, AuthorityError, RootAuthority};
use crate::cert::BleCertificate;
use crate::crypto::{
    ecdh, f4_confirm, f5_ltk, generate_keypair, ConfirmValue, DeviceAddress, Direction, KeyPair,
    Ltk, Nonce128, PublicKey, SharedSecret,
};
use crate::pairing::{DeviceIdentity, PairingContext, PairingError, Role};
use crate::wire::{opcode, FailReason, PairingFeatures, WireMessage};

const CENTRAL_MAC: [u8; 6] = [0x5c, 0x3a, 0x45, 0x10, 0x00, 0x01];
const PERIPHERAL_MAC: [u8; 6] = [0x70, 0xb8, 0xf6, 0x20, 0x00, 0x02];
const ATTACKER_MAC: [u8; 6] = [0xee, 0x66, 0x6e, 0x30, 0x00, 0x03];

/// The attack being simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AdversaryStrategy {
    Passive,
    CertSubstitute,
    KeySubstitute,
    NonceTamper,
    AddressSpoof,
}

impl AdversaryStrategy {
    pub const ALL: [AdversaryStrategy; 5] = [
        AdversaryStrategy::Passive,
        AdversaryStrategy::CertSubstitute,
        AdversaryStrategy::KeySubstitute,
        AdversaryStrategy::NonceTamper,
        AdversaryStrategy::AddressSpoof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryStrategy::Passive => "passive",
            AdversaryStrategy::CertSubstitute => "cert-sub",
            AdversaryStrategy::KeySubstitute => "key-sub",
            AdversaryStrategy::NonceTamper => "nonce-tamper",
            AdversaryStrategy::AddressSpoof => "addr-spoof",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// A link-level attacker. `on_frame` sees every frame and returns the
/// frames (with directions) that actually enter the link in its place —
/// an empty vector drops the frame, and injected frames may flow either
/// way, which is what lets a single hook express a full interposition.
pub trait LinkAdversary {
    fn name(&self) -> &'static str;
    fn on_frame(&mut self, direction: Direction, frame: &[u8]) -> Vec<(Direction, Vec<u8>)>;
    /// Session keys the attacker ended up sharing with an honest endpoint.
    fn held_ltks(&self) -> Vec<Ltk> {
        Vec::new()
    }
}

/// One frame as the adversary re-emitted it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeliveredFrame {
    pub direction: String,
    pub label: String,
    pub hex: String,
}

/// One intercepted frame: the original bytes and what was delivered in
/// their place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub seq: usize,
    pub direction: String,
    pub label: String,
    pub hex: String,
    pub delivered: Vec<DeliveredFrame>,
    pub modified: bool,
}

fn direction_str(direction: Direction) -> &'static str {
    match direction {
        Direction::CentralToPeripheral => "central->peripheral",
        Direction::PeripheralToCentral => "peripheral->central",
    }
}

fn frame_label(bytes: &[u8]) -> &'static str {
    WireMessage::decode(bytes).map(|m| m.label()).unwrap_or("INVALID")
}

/// The simulated link: one global FIFO (preserving per-direction order)
/// with the adversary spliced into every submission.
pub struct SimLink {
    queue: VecDeque<(Direction, Vec<u8>)>,
    transcript: Vec<TranscriptEntry>,
}

impl SimLink {
    pub fn new() -> Self {
        Self { queue: VecDeque::new(), transcript: Vec::new() }
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    fn submit(&mut self, adversary: &mut dyn LinkAdversary, direction: Direction, frame: Vec<u8>) {
        let delivered = adversary.on_frame(direction, &frame);
        let unmodified = delivered.len() == 1
            && delivered[0].0 == direction
            && delivered[0].1 == frame;
        self.transcript.push(TranscriptEntry {
            seq: self.transcript.len(),
            direction: direction_str(direction).to_owned(),
            label: frame_label(&frame).to_owned(),
            hex: hex::encode(&frame),
            delivered: delivered
                .iter()
                .map(|(d, f)| DeliveredFrame {
                    direction: direction_str(*d).to_owned(),
                    label: frame_label(f).to_owned(),
                    hex: hex::encode(f),
                })
                .collect(),
            modified: !unmodified,
        });
        self.queue.extend(delivered);
    }

    fn pop(&mut self) -> Option<(Direction, Vec<u8>)> {
        self.queue.pop_front()
    }
}

impl Default for SimLink {
    fn default() -> Self {
        Self::new()
    }
}

/// How a finished scenario is judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScenarioOutcome {
    /// Both honest endpoints established, their keys agree, and the
    /// attacker holds nothing.
    EstablishedSecurely,
    /// The handshake detected the attack and aborted with this reason.
    AbortedWithReason(FailReason),
    /// The harness proved the attacker holds a session key (or the
    /// endpoints were left with inconsistent keys) — the protocol failed
    /// to stop the attack.
    CompromiseDetectedByHarness,
}

/// Everything observable about one simulated run.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub protocol: &'static str,
    pub seed: u64,
    pub outcome: ScenarioOutcome,
    pub frames_exchanged: usize,
    pub abort_reason: Option<String>,
    /// Whether the two link endpoints derived the same key; only
    /// meaningful when both established.
    pub ltk_match: Option<bool>,
    pub notes: Vec<String>,
    pub transcript: Vec<TranscriptEntry>,
}

// ---------------------------------------------------------------------
// The Just Works control arm: LE-secure-connections-style numeric flow
// with raw public keys instead of certificates, and link addresses taken
// on faith from the connection.
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum JwState {
    Idle,
    FeatureExchanged,
    KeySent,
    KeyExchanged,
    ConfirmExchanged,
    Established,
    Failed(FailReason),
}

/// A certificate-less endpoint running plain ECDH Just Works pairing.
/// Addresses are connection parameters — nothing authenticates them,
/// which is precisely the weakness the control arm demonstrates.
pub struct JustWorksEndpoint {
    role: Role,
    state: JwState,
    local_address: DeviceAddress,
    peer_address: DeviceAddress,
    keypair: Option<KeyPair>,
    peer_key: Option<PublicKey>,
    secret: Option<SharedSecret>,
    local_nonce: Option<Nonce128>,
    expected_confirm: Option<ConfirmValue>,
    ltk: Option<Ltk>,
}

impl JustWorksEndpoint {
    pub fn new(role: Role, local_address: DeviceAddress, peer_address: DeviceAddress) -> Self {
        Self {
            role,
            state: JwState::Idle,
            local_address,
            peer_address,
            keypair: None,
            peer_key: None,
            secret: None,
            local_nonce: None,
            expected_confirm: None,
            ltk: None,
        }
    }

    pub fn start_pairing(&mut self) -> Result<WireMessage, PairingError> {
        if self.role != Role::Central {
            return Err(PairingError::WrongRole);
        }
        if self.state != JwState::Idle {
            return Err(PairingError::WrongState);
        }
        self.state = JwState::FeatureExchanged;
        Ok(WireMessage::PairingRequest(PairingFeatures::just_works(false)))
    }

    pub fn handle_message<R: RngCore + rand_core::CryptoRng>(
        &mut self,
        message: &WireMessage,
        rng: &mut R,
    ) -> Result<Vec<WireMessage>, PairingError> {
        if self.is_terminal() {
            return Ok(Vec::new());
        }
        if let WireMessage::Fail(reason) = message {
            self.state = JwState::Failed(*reason);
            return Ok(Vec::new());
        }
        match (self.role, self.state, message) {
            // A legacy responder ignores reserved AuthReq bits entirely,
            // so a certificate-auth request gets a plain response — that
            // mismatch is the downgrade the full protocol refuses.
            (Role::Peripheral, JwState::Idle, WireMessage::PairingRequest(_)) => {
                self.state = JwState::FeatureExchanged;
                Ok(vec![WireMessage::PairingResponse(PairingFeatures::just_works(false))])
            }
            (Role::Central, JwState::FeatureExchanged, WireMessage::PairingResponse(_)) => {
                let keypair = generate_keypair(rng)?;
                let x = *keypair.public().x();
                self.keypair = Some(keypair);
                self.state = JwState::KeySent;
                Ok(vec![WireMessage::RawKeyCentral(x)])
            }
            (Role::Peripheral, JwState::FeatureExchanged, WireMessage::RawKeyCentral(x)) => {
                let Some(peer_key) = self.accept_raw_key(*x) else {
                    return Ok(self.fail(FailReason::MalformedMessage));
                };
                let keypair = generate_keypair(rng)?;
                let secret = match ecdh(keypair.private(), &peer_key) {
                    Ok(secret) => secret,
                    Err(_) => return Ok(self.fail(FailReason::MalformedMessage)),
                };
                let n_p = Nonce128::random(rng)?;
                let confirm = f4_confirm(&peer_key, keypair.public(), &n_p);
                let x_p = *keypair.public().x();
                self.keypair = Some(keypair);
                self.peer_key = Some(peer_key);
                self.secret = Some(secret);
                self.local_nonce = Some(n_p);
                self.state = JwState::ConfirmExchanged;
                Ok(vec![WireMessage::RawKeyPeripheral(x_p), WireMessage::Confirm(confirm)])
            }
            (Role::Central, JwState::KeySent, WireMessage::RawKeyPeripheral(x)) => {
                let Some(peer_key) = self.accept_raw_key(*x) else {
                    return Ok(self.fail(FailReason::MalformedMessage));
                };
                let keypair = self.keypair.as_ref().expect("generated when key was sent");
                let secret = match ecdh(keypair.private(), &peer_key) {
                    Ok(secret) => secret,
                    Err(_) => return Ok(self.fail(FailReason::MalformedMessage)),
                };
                self.peer_key = Some(peer_key);
                self.secret = Some(secret);
                self.state = JwState::KeyExchanged;
                Ok(Vec::new())
            }
            (Role::Central, JwState::KeyExchanged, WireMessage::Confirm(value)) => {
                let n_c = Nonce128::random(rng)?;
                self.expected_confirm = Some(*value);
                self.local_nonce = Some(n_c);
                self.state = JwState::ConfirmExchanged;
                Ok(vec![WireMessage::NonceCentral(n_c)])
            }
            (Role::Peripheral, JwState::ConfirmExchanged, WireMessage::NonceCentral(n_c)) => {
                let n_p = self.local_nonce.expect("set when confirm was sent");
                self.derive_ltk(*n_c, n_p)?;
                self.state = JwState::Established;
                Ok(vec![WireMessage::NoncePeripheral(n_p)])
            }
            (Role::Central, JwState::ConfirmExchanged, WireMessage::NoncePeripheral(n_p)) => {
                let recomputed = f4_confirm(
                    self.keypair.as_ref().expect("key sent").public(),
                    self.peer_key.as_ref().expect("key received"),
                    n_p,
                );
                if Some(recomputed) != self.expected_confirm {
                    return Ok(self.fail(FailReason::ConfirmMismatch));
                }
                let n_c = self.local_nonce.expect("set when nonce was sent");
                self.derive_ltk(n_c, *n_p)?;
                self.state = JwState::Established;
                Ok(Vec::new())
            }
            _ => Ok(self.fail(FailReason::WrongState)),
        }
    }

    pub fn note_malformed(&mut self) -> Option<WireMessage> {
        if self.is_terminal() {
            return None;
        }
        Some(self.fail(FailReason::MalformedMessage).remove(0))
    }

    pub fn ltk(&self) -> Result<&Ltk, PairingError> {
        match (&self.state, &self.ltk) {
            (JwState::Established, Some(key)) => Ok(key),
            _ => Err(PairingError::NotEstablished),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.state, JwState::Established | JwState::Failed(_))
    }

    pub fn is_established(&self) -> bool {
        self.state == JwState::Established
    }

    pub fn fail_reason(&self) -> Option<FailReason> {
        match self.state {
            JwState::Failed(reason) => Some(reason),
            _ => None,
        }
    }

    fn fail(&mut self, reason: FailReason) -> Vec<WireMessage> {
        self.state = JwState::Failed(reason);
        vec![WireMessage::Fail(reason)]
    }

    fn accept_raw_key(&self, x: [u8; 32]) -> Option<PublicKey> {
        PublicKey::from_x_even_y(x).ok()
    }

    fn derive_ltk(&mut self, n_c: Nonce128, n_p: Nonce128) -> Result<(), PairingError> {
        let secret = self.secret.as_ref().expect("set at key exchange");
        let (mac_c, mac_p) = match self.role {
            Role::Central => (self.local_address, self.peer_address),
            Role::Peripheral => (self.peer_address, self.local_address),
        };
        self.ltk = Some(f5_ltk(secret, &n_c, &n_p, &mac_c, &mac_p)?);
        Ok(())
    }
}

/// Either protocol arm behind one driving interface.
enum SimEndpoint {
    Cert(PairingContext),
    JustWorks(JustWorksEndpoint),
}

impl SimEndpoint {
    fn start(&mut self) -> Vec<u8> {
        match self {
            SimEndpoint::Cert(ctx) => ctx.start_pairing(),
            SimEndpoint::JustWorks(ep) => ep.start_pairing(),
        }
        .expect("scenario centrals start exactly once from Idle")
        .encode()
    }

    fn handle(&mut self, bytes: &[u8], rng: &mut ChaCha12Rng) -> Vec<Vec<u8>> {
        match WireMessage::decode(bytes) {
            Ok(message) => {
                let replies = match self {
                    SimEndpoint::Cert(ctx) => ctx.handle_message(&message, rng),
                    SimEndpoint::JustWorks(ep) => ep.handle_message(&message, rng),
                }
                .expect("a seeded ChaCha stream cannot fail");
                replies.iter().map(WireMessage::encode).collect()
            }
            Err(_) => {
                let fail = match self {
                    SimEndpoint::Cert(ctx) => ctx.note_malformed(),
                    SimEndpoint::JustWorks(ep) => ep.note_malformed(),
                };
                fail.map(|m| m.encode()).into_iter().collect()
            }
        }
    }

    fn is_established(&self) -> bool {
        match self {
            SimEndpoint::Cert(ctx) => ctx.state() == crate::pairing::PairingState::Established,
            SimEndpoint::JustWorks(ep) => ep.is_established(),
        }
    }

    fn fail_reason(&self) -> Option<FailReason> {
        match self {
            SimEndpoint::Cert(ctx) => ctx.fail_reason(),
            SimEndpoint::JustWorks(ep) => ep.fail_reason(),
        }
    }

    fn ltk(&self) -> Option<Ltk> {
        match self {
            SimEndpoint::Cert(ctx) => ctx.ltk().ok().cloned(),
            SimEndpoint::JustWorks(ep) => ep.ltk().ok().cloned(),
        }
    }
}

// ---------------------------------------------------------------------
// Shipped adversaries
// ---------------------------------------------------------------------

struct PassiveTap;

impl LinkAdversary for PassiveTap {
    fn name(&self) -> &'static str {
        "passive"
    }

    fn on_frame(&mut self, direction: Direction, frame: &[u8]) -> Vec<(Direction, Vec<u8>)> {
        vec![(direction, frame.to_vec())]
    }
}

struct CertSubstitute {
    target: u8,
    attacker_cert: BleCertificate,
}

impl LinkAdversary for CertSubstitute {
    fn name(&self) -> &'static str {
        "cert-sub"
    }

    fn on_frame(&mut self, direction: Direction, frame: &[u8]) -> Vec<(Direction, Vec<u8>)> {
        if frame.first() == Some(&self.target) {
            let substituted = if self.target == opcode::CERT_CENTRAL {
                WireMessage::CertCentral(self.attacker_cert)
            } else {
                WireMessage::CertPeripheral(self.attacker_cert)
            };
            return vec![(direction, substituted.encode())];
        }
        vec![(direction, frame.to_vec())]
    }
}

struct NonceTamper {
    target: u8,
    bit_index: u32,
    done: bool,
}

impl LinkAdversary for NonceTamper {
    fn name(&self) -> &'static str {
        "nonce-tamper"
    }

    fn on_frame(&mut self, direction: Direction, frame: &[u8]) -> Vec<(Direction, Vec<u8>)> {
        if !self.done && frame.first() == Some(&self.target) && frame.len() == 17 {
            self.done = true;
            let mut tampered = frame.to_vec();
            let bit = self.bit_index % 128;
            tampered[1 + (bit / 8) as usize] ^= 1 << (bit % 8);
            return vec![(direction, tampered)];
        }
        vec![(direction, frame.to_vec())]
    }
}

/// Full interposition: the attacker runs a peripheral persona toward the
/// real central and a central persona toward the real peripheral, wiring
/// the two handshakes together through itself.
struct KeySubstituteMitm {
    toward_central: SimEndpoint,
    toward_peripheral: SimEndpoint,
    rng: ChaCha12Rng,
    started: bool,
}

impl LinkAdversary for KeySubstituteMitm {
    fn name(&self) -> &'static str {
        "key-sub"
    }

    fn on_frame(&mut self, direction: Direction, frame: &[u8]) -> Vec<(Direction, Vec<u8>)> {
        let mut out = Vec::new();
        match direction {
            Direction::CentralToPeripheral => {
                // Consume the honest central's frame with the peripheral
                // persona; replies travel back toward the central.
                for reply in self.toward_central.handle(frame, &mut self.rng) {
                    out.push((Direction::PeripheralToCentral, reply));
                }
                if !self.started {
                    self.started = true;
                    out.push((Direction::CentralToPeripheral, self.toward_peripheral.start()));
                }
            }
            Direction::PeripheralToCentral => {
                for reply in self.toward_peripheral.handle(frame, &mut self.rng) {
                    out.push((Direction::CentralToPeripheral, reply));
                }
            }
        }
        out
    }

    fn held_ltks(&self) -> Vec<Ltk> {
        [self.toward_central.ltk(), self.toward_peripheral.ltk()]
            .into_iter()
            .flatten()
            .collect()
    }
}

// ---------------------------------------------------------------------
// Provisioning and the scenario driver
// ---------------------------------------------------------------------

/// Everything a full-protocol scenario starts from. Scalars are retained
/// (by the harness, not the endpoints) so the transcript can be scanned
/// for leaked key material afterwards.
pub(crate) struct CertArmSetup {
    pub authority: RootAuthority,
    pub root: PublicKey,
    pub central: PairingContext,
    pub peripheral: PairingContext,
    pub central_scalar: [u8; 32],
    pub peripheral_scalar: [u8; 32],
    pub attacker: KeyPair,
    pub attacker_identity: DeviceIdentity,
    pub central_rng: ChaCha12Rng,
    pub peripheral_rng: ChaCha12Rng,
    pub attacker_rng: ChaCha12Rng,
}

/// Deterministic provisioning: authority, one registered manufacturer,
/// two issued devices, one attacker with a self-signed certificate, and
/// independently seeded per-party randomness.
pub(crate) fn provision_cert_arm(seed: u64) -> CertArmSetup {
    let mut master = ChaCha12Rng::seed_from_u64(seed);
    let mut authority =
        RootAuthority::init_root(&mut master, None).expect("seeded rng cannot fail");
    let maker = generate_keypair(&mut master).expect("seeded rng");
    authority.register_manufacturer(*maker.public()).expect("first registration");

    let central_kp = generate_keypair(&mut master).expect("seeded rng");
    let peripheral_kp = generate_keypair(&mut master).expect("seeded rng");
    let attacker = generate_keypair(&mut master).expect("seeded rng");

    let central_cert = authority
        .issue(&sign_request(maker.private(), CENTRAL_MAC, *central_kp.public().x()))
        .expect("fresh serial");
    let peripheral_cert = authority
        .issue(&sign_request(maker.private(), PERIPHERAL_MAC, *peripheral_kp.public().x()))
        .expect("fresh serial");
    let attacker_cert =
        BleCertificate::sign_new(ATTACKER_MAC, *attacker.public().x(), attacker.private());

    let root = *authority.root_public_key();
    let central_scalar = *central_kp.private().as_bytes();
    let peripheral_scalar = *peripheral_kp.private().as_bytes();
    let central_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
    let peripheral_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
    let attacker_rng = ChaCha12Rng::seed_from_u64(master.next_u64());

    CertArmSetup {
        authority,
        root,
        central: PairingContext::new(
            Role::Central,
            DeviceIdentity::new(central_kp, central_cert).expect("issued for this key"),
            root,
        ),
        peripheral: PairingContext::new(
            Role::Peripheral,
            DeviceIdentity::new(peripheral_kp, peripheral_cert).expect("issued for this key"),
            root,
        ),
        central_scalar,
        peripheral_scalar,
        attacker: attacker.clone(),
        attacker_identity: DeviceIdentity::new(attacker, attacker_cert)
            .expect("self-signed for this key"),
        central_rng,
        peripheral_rng,
        attacker_rng,
    }
}

struct ArmRun {
    scenario: String,
    protocol: &'static str,
    seed: u64,
    central: SimEndpoint,
    peripheral: SimEndpoint,
    /// True when the peripheral slot is attacker-controlled (address
    /// spoofing), so its key counts as attacker-held.
    peripheral_is_attacker: bool,
    adversary: Box<dyn LinkAdversary>,
    central_rng: ChaCha12Rng,
    peripheral_rng: ChaCha12Rng,
    /// Reference key material the transcript must never contain.
    secret_material: Vec<Vec<u8>>,
    notes: Vec<String>,
}

fn execute(mut run: ArmRun) -> ScenarioReport {
    let mut link = SimLink::new();
    let opening = run.central.start();
    link.submit(run.adversary.as_mut(), Direction::CentralToPeripheral, opening);

    let mut hops = 0usize;
    while let Some((direction, frame)) = link.pop() {
        hops += 1;
        assert!(
            hops < 256,
            "scenario `{}` did not quiesce; a custom adversary is flooding the link",
            run.scenario
        );
        let replies_direction;
        let replies = match direction {
            Direction::CentralToPeripheral => {
                replies_direction = Direction::PeripheralToCentral;
                run.peripheral.handle(&frame, &mut run.peripheral_rng)
            }
            Direction::PeripheralToCentral => {
                replies_direction = Direction::CentralToPeripheral;
                run.central.handle(&frame, &mut run.central_rng)
            }
        };
        for reply in replies {
            link.submit(run.adversary.as_mut(), replies_direction, reply);
        }
    }

    let central_ltk = run.central.ltk();
    let peripheral_ltk = run.peripheral.ltk();
    let mut attacker_ltks = run.adversary.held_ltks();
    if run.peripheral_is_attacker {
        attacker_ltks.extend(peripheral_ltk.clone());
    }

    // Scan every byte that crossed the link for key material the harness
    // knows about: the endpoint scalars and any derived session keys.
    let mut run_secrets = run.secret_material.clone();
    for key in central_ltk.iter().chain(peripheral_ltk.iter()) {
        run_secrets.push(key.as_bytes().to_vec());
    }
    let mut wire_bytes = Vec::new();
    for entry in link.transcript() {
        wire_bytes.extend(hex::decode(&entry.hex).expect("transcript stores valid hex"));
        for frame in &entry.delivered {
            wire_bytes.extend(hex::decode(&frame.hex).expect("transcript stores valid hex"));
        }
    }
    let leaked = run_secrets
        .iter()
        .any(|secret| wire_bytes.windows(secret.len()).any(|window| window == &secret[..]));

    let abort = run.central.fail_reason().or_else(|| run.peripheral.fail_reason());
    let (outcome, ltk_match) = if let Some(reason) = abort {
        (ScenarioOutcome::AbortedWithReason(reason), None)
    } else if run.central.is_established() && run.peripheral.is_established() {
        let ltk_match = central_ltk.is_some() && central_ltk == peripheral_ltk;
        let attacker_holds_a_key = attacker_ltks
            .iter()
            .any(|k| Some(k) == central_ltk.as_ref() || Some(k) == peripheral_ltk.as_ref());
        if attacker_holds_a_key || leaked || !ltk_match {
            (ScenarioOutcome::CompromiseDetectedByHarness, Some(ltk_match))
        } else {
            (ScenarioOutcome::EstablishedSecurely, Some(ltk_match))
        }
    } else {
        panic!(
            "scenario `{}` stalled: the link drained before both endpoints became terminal",
            run.scenario
        );
    };

    ScenarioReport {
        scenario: run.scenario,
        protocol: run.protocol,
        seed: run.seed,
        outcome,
        frames_exchanged: link.transcript().len(),
        abort_reason: match outcome {
            ScenarioOutcome::AbortedWithReason(reason) => Some(reason.to_string()),
            _ => None,
        },
        ltk_match,
        notes: run.notes,
        transcript: link.transcript().to_vec(),
    }
}

/// Run one attack against the full certificate-authenticated protocol.
pub fn run_scenario(strategy: AdversaryStrategy, seed: u64) -> ScenarioReport {
    let mut setup = provision_cert_arm(seed);
    let mut notes = Vec::new();
    let mut peripheral = SimEndpoint::Cert(setup.peripheral);
    let mut peripheral_is_attacker = false;

    let adversary: Box<dyn LinkAdversary> = match strategy {
        AdversaryStrategy::Passive => Box::new(PassiveTap),
        AdversaryStrategy::CertSubstitute => Box::new(CertSubstitute {
            // Alternate which side's certificate is forged, so both
            // verification sites get exercised across a trial batch.
            target: if seed % 2 == 0 { opcode::CERT_PERIPHERAL } else { opcode::CERT_CENTRAL },
            attacker_cert: *setup.attacker_identity.certificate(),
        }),
        AdversaryStrategy::KeySubstitute => Box::new(KeySubstituteMitm {
            toward_central: SimEndpoint::Cert(PairingContext::new(
                Role::Peripheral,
                setup.attacker_identity.clone(),
                setup.root,
            )),
            toward_peripheral: SimEndpoint::Cert(PairingContext::new(
                Role::Central,
                setup.attacker_identity.clone(),
                setup.root,
            )),
            rng: setup.attacker_rng,
            started: false,
        }),
        AdversaryStrategy::NonceTamper => Box::new(NonceTamper {
            target: if seed % 2 == 0 { opcode::CONFIRM } else { opcode::NONCE_PERIPHERAL },
            bit_index: setup.attacker_rng.next_u32(),
            done: false,
        }),
        AdversaryStrategy::AddressSpoof => {
            // Route 1: the attacker asks the authority to certify its key
            // under the victim's address — refused even for a registered
            // manufacturer, because the serial already has a certificate.
            setup
                .authority
                .register_manufacturer(*setup.attacker.public())
                .expect("attacker key differs from the honest manufacturer's");
            let refusal = setup
                .authority
                .issue(&sign_request(
                    setup.attacker.private(),
                    PERIPHERAL_MAC,
                    *setup.attacker.public().x(),
                ))
                .expect_err("victim serial already registered");
            assert!(matches!(refusal, AuthorityError::DuplicateSerial));
            notes.push(format!(
                "issuance request binding the victim address to the attacker key was refused: {refusal}"
            ));
            // Route 2: fall back to a self-signed certificate carrying the
            // victim's address and take the peripheral's place on the link.
            let spoofed_cert = BleCertificate::sign_new(
                PERIPHERAL_MAC,
                *setup.attacker.public().x(),
                setup.attacker.private(),
            );
            let spoofed_identity =
                DeviceIdentity::new(setup.attacker.clone(), spoofed_cert).expect("matching key");
            peripheral = SimEndpoint::Cert(PairingContext::new(
                Role::Peripheral,
                spoofed_identity,
                setup.root,
            ));
            peripheral_is_attacker = true;
            notes.push("attacker answers on the link claiming the victim's address".to_owned());
            Box::new(PassiveTap)
        }
    };

    execute(ArmRun {
        scenario: strategy.name().to_owned(),
        protocol: "cert-auth",
        seed,
        central: SimEndpoint::Cert(setup.central),
        peripheral,
        peripheral_is_attacker,
        adversary,
        central_rng: setup.central_rng,
        peripheral_rng: setup.peripheral_rng,
        secret_material: vec![setup.central_scalar.to_vec(), setup.peripheral_scalar.to_vec()],
        notes,
    })
}

/// Run the same attack against the certificate-less Just Works control
/// arm. This is the contrast experiment: key substitution and address
/// spoofing go undetected here.
pub fn run_baseline_justworks(strategy: AdversaryStrategy, seed: u64) -> ScenarioReport {
    let mut master = ChaCha12Rng::seed_from_u64(seed);
    let central_addr = DeviceAddress::public(CENTRAL_MAC);
    let peripheral_addr = DeviceAddress::public(PERIPHERAL_MAC);
    let central_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
    let peripheral_rng = ChaCha12Rng::seed_from_u64(master.next_u64());
    let mut attacker_rng = ChaCha12Rng::seed_from_u64(master.next_u64());

    let mut notes = Vec::new();
    let peripheral = SimEndpoint::JustWorks(JustWorksEndpoint::new(
        Role::Peripheral,
        peripheral_addr,
        central_addr,
    ));
    let mut peripheral_is_attacker = false;

    let adversary: Box<dyn LinkAdversary> = match strategy {
        AdversaryStrategy::Passive => Box::new(PassiveTap),
        AdversaryStrategy::CertSubstitute => {
            notes.push(
                "the baseline exchanges no certificates; nothing to substitute".to_owned(),
            );
            Box::new(PassiveTap)
        }
        AdversaryStrategy::KeySubstitute => Box::new(KeySubstituteMitm {
            // Each persona claims the honest party's address to the other
            // side — the baseline has no way to notice.
            toward_central: SimEndpoint::JustWorks(JustWorksEndpoint::new(
                Role::Peripheral,
                peripheral_addr,
                central_addr,
            )),
            toward_peripheral: SimEndpoint::JustWorks(JustWorksEndpoint::new(
                Role::Central,
                central_addr,
                peripheral_addr,
            )),
            rng: attacker_rng,
            started: false,
        }),
        AdversaryStrategy::NonceTamper => Box::new(NonceTamper {
            target: if seed % 2 == 0 { opcode::CONFIRM } else { opcode::NONCE_PERIPHERAL },
            bit_index: attacker_rng.next_u32(),
            done: false,
        }),
        AdversaryStrategy::AddressSpoof => {
            // The attacker simply *is* the peripheral: baseline addresses
            // are claims, so the honest central cannot tell the difference
            // between the victim's endpoint and the attacker's.
            peripheral_is_attacker = true;
            notes.push(
                "baseline link addresses are unauthenticated claims; the attacker answers as the victim"
                    .to_owned(),
            );
            Box::new(PassiveTap)
        }
    };

    // For address spoofing the peripheral endpoint runs on the attacker's
    // randomness, underlining that it is attacker code.
    let peripheral_rng = if peripheral_is_attacker {
        ChaCha12Rng::seed_from_u64(seed ^ 0xadd2_e55e)
    } else {
        peripheral_rng
    };

    execute(ArmRun {
        scenario: strategy.name().to_owned(),
        protocol: "just-works",
        seed,
        central: SimEndpoint::JustWorks(JustWorksEndpoint::new(
            Role::Central,
            central_addr,
            peripheral_addr,
        )),
        peripheral,
        peripheral_is_attacker,
        adversary,
        central_rng,
        peripheral_rng,
        secret_material: Vec::new(),
        notes,
    })
}
