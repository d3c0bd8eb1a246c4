//! `ble-certauth` — one binary tying the library's workflows together:
//! run a certification authority, inspect certificates, walk through the
//! handshake, replay attacks against both protocol arms, rotate device
//! keys, and evaluate the energy model.
//!
//! State (root key, registry, manufacturer vault, device keystores) lives
//! in a single directory chosen by `BLE_CERTAUTH_HOME`, then `--home`,
//! then `./.ble-certauth`.
//!
//! Exit codes: 0 success, 1 operational failure (with a reason on
//! stderr), 2 usage error. With `--format json` exactly one JSON document
//! is written to standard output.

mod ca;
mod demo;
mod files;
mod report;
mod update;

use std::path::PathBuf;

use ble_certauth::adversary::AdversaryStrategy;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Passive,
    CertSub,
    KeySub,
    NonceTamper,
    AddrSpoof,
}

impl From<StrategyArg> for AdversaryStrategy {
    fn from(arg: StrategyArg) -> Self {
        match arg {
            StrategyArg::Passive => AdversaryStrategy::Passive,
            StrategyArg::CertSub => AdversaryStrategy::CertSubstitute,
            StrategyArg::KeySub => AdversaryStrategy::KeySubstitute,
            StrategyArg::NonceTamper => AdversaryStrategy::NonceTamper,
            StrategyArg::AddrSpoof => AdversaryStrategy::AddressSpoof,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ble-certauth",
    version,
    about = "Certificate-authenticated BLE pairing: authority, demos, rotation, energy model"
)]
struct Cli {
    /// State directory (BLE_CERTAUTH_HOME takes precedence)
    #[arg(long, global = true, value_name = "DIR")]
    home: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certification-authority operations
    #[command(subcommand)]
    Bleca(BlecaCommand),
    /// Generate a P-256 keypair (private scalar to file, x-only public key)
    Keygen(KeygenArgs),
    /// Sign an issuance request with a manufacturer key
    SignRequest(SignRequestArgs),
    /// Decode a certificate file and optionally verify it against a root key
    Certinfo(CertinfoArgs),
    /// Provision two devices and walk through one full handshake
    PairDemo(PairDemoArgs),
    /// Run an adversary strategy against the full protocol or the Just Works baseline
    AttackDemo(AttackDemoArgs),
    /// Key-rotation workflows
    #[command(subcommand)]
    KeyUpdate(KeyUpdateCommand),
    /// Evaluate the radio/crypto energy model
    Energy(EnergyArgs),
}

#[derive(Subcommand)]
enum BlecaCommand {
    /// Create a new authority root key in the state directory
    Init {
        /// Deterministic root-key generation (omit for OS randomness)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enroll a manufacturer's public key
    Register {
        /// File holding the manufacturer's 64-hex-char public key
        #[arg(long, value_name = "FILE")]
        key: PathBuf,
    },
    /// Issue a certificate from a signed request
    Issue {
        /// Request file produced by `sign-request`
        #[arg(long, value_name = "FILE")]
        request: PathBuf,
        /// Where to write the issued certificate
        #[arg(long, value_name = "FILE")]
        cert_out: PathBuf,
    },
    /// Print the live certificate for a serial
    Lookup {
        /// Hardware address, e.g. 5c:3a:45:10:00:01
        #[arg(long)]
        serial: String,
    },
}

#[derive(Args)]
struct KeygenArgs {
    /// Where to write the private scalar (64 hex chars)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Optionally also write the public key (64 hex chars, x-only)
    #[arg(long, value_name = "FILE")]
    pub_out: Option<PathBuf>,
    /// Deterministic generation (omit for OS randomness)
    #[arg(long)]
    seed: Option<u64>,
    /// Also print the private scalar to stdout
    #[arg(long)]
    reveal_keys: bool,
}

#[derive(Args)]
struct SignRequestArgs {
    /// Manufacturer private-key file
    #[arg(long, value_name = "FILE")]
    key: PathBuf,
    /// Device hardware address, e.g. 5c:3a:45:10:00:01
    #[arg(long)]
    serial: String,
    /// File holding the device's public key
    #[arg(long, value_name = "FILE")]
    subject: PathBuf,
    /// Where to write the signed request
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct CertinfoArgs {
    /// Certificate file (hex-armored or raw 103 bytes)
    #[arg(long, value_name = "FILE")]
    cert: PathBuf,
    /// Verify against this root public key
    #[arg(long, value_name = "FILE")]
    root: Option<PathBuf>,
}

#[derive(Args)]
struct PairDemoArgs {
    /// Seed for the whole provisioning + handshake run (omit for OS randomness)
    #[arg(long)]
    seed: Option<u64>,
    /// Print the derived session key
    #[arg(long)]
    reveal_keys: bool,
}

#[derive(Args)]
struct AttackDemoArgs {
    /// Adversary strategy
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Attack the certificate-less Just Works baseline instead
    #[arg(long)]
    baseline: bool,
    /// Base seed; trial t runs with seed base+t (omit for OS randomness)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent trials
    #[arg(long, default_value_t = 1)]
    trials: u32,
    /// Print the full frame transcript of each trial (text mode)
    #[arg(long)]
    transcript: bool,
}

#[derive(Subcommand)]
enum KeyUpdateCommand {
    /// Record a device's manufacturing secret and initial keystore
    Provision {
        /// Device hardware address
        #[arg(long)]
        serial: String,
        /// Manufacturing secret, 32 hex chars
        #[arg(long)]
        secret: String,
        /// Device private-key file
        #[arg(long, value_name = "FILE")]
        device_key: PathBuf,
        /// Device certificate file
        #[arg(long, value_name = "FILE")]
        cert: PathBuf,
    },
    /// Build a sealed rotation package (reissues the certificate)
    Build {
        /// Device hardware address
        #[arg(long)]
        serial: String,
        /// Package timestamp, seconds since epoch
        #[arg(long)]
        now: u64,
        /// Deterministic replacement-key generation (omit for OS randomness)
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the package
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Apply a rotation package to a stored device keystore
    Apply {
        /// Device hardware address
        #[arg(long)]
        serial: String,
        /// Package file from `key-update build`
        #[arg(long, value_name = "FILE")]
        package: PathBuf,
        /// Device clock, seconds since epoch
        #[arg(long)]
        now: u64,
        /// Freshness window in seconds (default 300)
        #[arg(long)]
        window: Option<u64>,
    },
}

#[derive(Args)]
struct EnergyArgs {
    /// key=value file with e_wu, e_tx, e_rx, e_ifs, e_slp (µJ) and optional l_hdr
    #[arg(long, value_name = "FILE")]
    params: PathBuf,
    /// Payload size to move, bytes
    #[arg(long, default_value_t = 103)]
    cert_size: u32,
    /// Link-layer fragment payload limit, bytes
    #[arg(long, default_value_t = ble_certauth::energy::DEFAULT_MAX_PAYLOAD)]
    max_payload: u32,
    /// JSON file overriding the measured per-operation cost table
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<(), String> {
    let home = files::resolve_home(cli.home.as_deref());
    let format = cli.format;
    match cli.command {
        Command::Bleca(BlecaCommand::Init { seed }) => ca::bleca_init(&home, seed, format),
        Command::Bleca(BlecaCommand::Register { key }) => {
            ca::bleca_register(&home, &key, format)
        }
        Command::Bleca(BlecaCommand::Issue { request, cert_out }) => {
            ca::bleca_issue(&home, &request, &cert_out, format)
        }
        Command::Bleca(BlecaCommand::Lookup { serial }) => {
            ca::bleca_lookup(&home, &serial, format)
        }
        Command::Keygen(args) => {
            ca::keygen(&args.out, args.pub_out.as_deref(), args.seed, args.reveal_keys, format)
        }
        Command::SignRequest(args) => {
            ca::sign_request_cmd(&args.key, &args.serial, &args.subject, &args.out, format)
        }
        Command::Certinfo(args) => ca::certinfo(&args.cert, args.root.as_deref(), format),
        Command::PairDemo(args) => demo::pair_demo(args.seed, args.reveal_keys, format),
        Command::AttackDemo(args) => demo::attack_demo(
            args.strategy.into(),
            args.baseline,
            args.seed,
            args.trials,
            args.transcript,
            format,
        ),
        Command::KeyUpdate(KeyUpdateCommand::Provision { serial, secret, device_key, cert }) => {
            update::provision(&home, &serial, &secret, &device_key, &cert, format)
        }
        Command::KeyUpdate(KeyUpdateCommand::Build { serial, now, seed, out }) => {
            update::build(&home, &serial, now, seed, &out, format)
        }
        Command::KeyUpdate(KeyUpdateCommand::Apply { serial, package, now, window }) => {
            update::apply(&home, &serial, &package, now, window, format)
        }
        Command::Energy(args) => report::energy(
            &args.params,
            args.cert_size,
            args.max_payload,
            args.table.as_deref(),
            format,
        ),
    }
}

fn main() {
    // Rust ignores SIGPIPE by default, turning `ble-certauth … | head` into
    // a broken-pipe panic mid-print. Restore the conventional Unix fate.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(message) = dispatch(cli) {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}
