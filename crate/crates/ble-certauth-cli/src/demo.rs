//! The handshake walkthrough (`pair-demo`) and the adversary experiments
//! (`attack-demo`).
//!
//! Both are fully deterministic once a seed is fixed: the same seed gives
//! byte-identical transcripts across runs and machines.

use std::collections::BTreeMap;

use ble_certauth::adversary::{
    run_baseline_justworks, run_scenario, AdversaryStrategy, ScenarioOutcome, ScenarioReport,
};
use ble_certauth::authority::{sign_request, RootAuthority};
use ble_certauth::crypto::generate_keypair;
use ble_certauth::pairing::{DeviceIdentity, PairingContext, Role};
use ble_certauth::wire::WireMessage;
use rand_chacha::ChaCha12Rng;
use rand_core::SeedableRng;
use serde::Serialize;
use serde_json::json;

use crate::files::{print_json, seeded_rng};
use crate::Format;

const CENTRAL_MAC: [u8; 6] = [0x5c, 0x3a, 0x45, 0x10, 0x00, 0x01];
const PERIPHERAL_MAC: [u8; 6] = [0x70, 0xb8, 0xf6, 0x20, 0x00, 0x02];

#[derive(Serialize)]
struct DemoFrame {
    seq: usize,
    direction: &'static str,
    label: &'static str,
    hex: String,
}

/// Provision an authority and two certified endpoints, then run the
/// handshake over a clean link, logging every frame.
pub fn pair_demo(seed: Option<u64>, reveal_keys: bool, format: Format) -> Result<(), String> {
    let (seed, mut rng) = seeded_rng(seed);
    let mut authority =
        RootAuthority::init_root(&mut rng, None).map_err(|e| e.to_string())?;
    let maker = generate_keypair(&mut rng).map_err(|e| e.to_string())?;
    authority.register_manufacturer(*maker.public()).map_err(|e| e.to_string())?;
    let central_kp = generate_keypair(&mut rng).map_err(|e| e.to_string())?;
    let peripheral_kp = generate_keypair(&mut rng).map_err(|e| e.to_string())?;
    let central_cert = authority
        .issue(&sign_request(maker.private(), CENTRAL_MAC, *central_kp.public().x()))
        .map_err(|e| e.to_string())?;
    let peripheral_cert = authority
        .issue(&sign_request(maker.private(), PERIPHERAL_MAC, *peripheral_kp.public().x()))
        .map_err(|e| e.to_string())?;
    let root = *authority.root_public_key();

    let mut central = PairingContext::new(
        Role::Central,
        DeviceIdentity::new(central_kp, central_cert).expect("issued for this key"),
        root,
    );
    let mut peripheral = PairingContext::new(
        Role::Peripheral,
        DeviceIdentity::new(peripheral_kp, peripheral_cert).expect("issued for this key"),
        root,
    );

    let mut central_rng = ChaCha12Rng::seed_from_u64(seed ^ 0x0c11);
    let mut peripheral_rng = ChaCha12Rng::seed_from_u64(seed ^ 0x0f22);
    let mut frames = Vec::new();
    let log = |direction: &'static str, message: &WireMessage, frames: &mut Vec<DemoFrame>| {
        frames.push(DemoFrame {
            seq: frames.len(),
            direction,
            label: message.label(),
            hex: hex::encode(message.encode()),
        });
    };

    let mut inbound = vec![central.start_pairing().map_err(|e| e.to_string())?];
    loop {
        let mut replies = Vec::new();
        for message in &inbound {
            log("central->peripheral", message, &mut frames);
            replies.extend(
                peripheral
                    .handle_message(message, &mut peripheral_rng)
                    .map_err(|e| e.to_string())?,
            );
        }
        if replies.is_empty() {
            break;
        }
        inbound.clear();
        for message in &replies {
            log("peripheral->central", message, &mut frames);
            inbound.extend(
                central.handle_message(message, &mut central_rng).map_err(|e| e.to_string())?,
            );
        }
        if inbound.is_empty() {
            break;
        }
    }

    let ltk_match = match (central.ltk(), peripheral.ltk()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    let ltk_hex = central.ltk().ok().map(|k| hex::encode(k.as_bytes()));

    match format {
        Format::Json => {
            let mut doc = json!({
                "seed": seed,
                "frames": frames,
                "central_state": format!("{:?}", central.state()),
                "peripheral_state": format!("{:?}", peripheral.state()),
                "ltk_match": ltk_match,
            });
            if reveal_keys {
                doc["ltk"] = json!(ltk_hex);
            }
            print_json(&doc)
        }
        Format::Text => {
            println!("seed: {seed}");
            for frame in &frames {
                println!(
                    "[{}] {:<21} {:<16} {}",
                    frame.seq, frame.direction, frame.label, frame.hex
                );
            }
            println!("central state:    {:?}", central.state());
            println!("peripheral state: {:?}", peripheral.state());
            println!("ltk match:        {}", if ltk_match { "yes" } else { "no" });
            if reveal_keys {
                if let Some(hex) = ltk_hex {
                    println!("ltk:              {hex}");
                }
            } else {
                println!("(session key withheld; pass --reveal-keys to print it)");
            }
            Ok(())
        }
    }
}

fn describe(outcome: &ScenarioOutcome) -> String {
    match outcome {
        ScenarioOutcome::EstablishedSecurely => "established securely".into(),
        ScenarioOutcome::AbortedWithReason(reason) => format!("aborted ({reason})"),
        ScenarioOutcome::CompromiseDetectedByHarness => {
            "COMPROMISED (attacker holds a session key)".into()
        }
    }
}

pub fn attack_demo(
    strategy: AdversaryStrategy,
    baseline: bool,
    seed: Option<u64>,
    trials: u32,
    show_transcript: bool,
    format: Format,
) -> Result<(), String> {
    if trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let (base_seed, _) = seeded_rng(seed);
    let reports: Vec<ScenarioReport> = (0..u64::from(trials))
        .map(|offset| {
            let trial_seed = base_seed.wrapping_add(offset);
            if baseline {
                run_baseline_justworks(strategy, trial_seed)
            } else {
                run_scenario(strategy, trial_seed)
            }
        })
        .collect();

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for report in &reports {
        *counts.entry(describe(&report.outcome)).or_default() += 1;
    }

    match format {
        Format::Json => print_json(&json!({
            "strategy": strategy.name(),
            "protocol": reports[0].protocol,
            "base_seed": base_seed,
            "trials": trials,
            "outcome_counts": counts,
            "results": reports,
        })),
        Format::Text => {
            println!(
                "strategy: {}   protocol: {}   trials: {}   base seed: {}",
                strategy.name(),
                reports[0].protocol,
                trials,
                base_seed
            );
            for report in &reports {
                println!(
                    "seed {:>20}: {} after {} frames",
                    report.seed,
                    describe(&report.outcome),
                    report.frames_exchanged
                );
                for note in &report.notes {
                    println!("    note: {note}");
                }
                if show_transcript {
                    for entry in &report.transcript {
                        println!(
                            "    [{}] {:<21} {:<16} {}{}",
                            entry.seq,
                            entry.direction,
                            entry.label,
                            entry.hex,
                            if entry.modified { "   [modified by attacker]" } else { "" }
                        );
                        if entry.modified {
                            for delivered in &entry.delivered {
                                println!(
                                    "         -> delivered {:<21} {:<16} {}",
                                    delivered.direction, delivered.label, delivered.hex
                                );
                            }
                        }
                    }
                }
            }
            println!("summary:");
            for (outcome, count) in &counts {
                println!("  {count}/{trials} {outcome}");
            }
            Ok(())
        }
    }
}
