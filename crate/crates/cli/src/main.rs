use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pairsonic::modem::{self, default_modem, FrameKind, OobFrame};
use pairsonic::report::{render_table, scaling_report};
use pairsonic::sim::{
    attack_catalog, noise_benchmark, preset, preset_names, rows_to_csv, run_campaign,
    run_session_with, AdversaryPolicy, CampaignSpec, NoiseModel, SimConfig, UserScript,
};

/// Exit code for a protocol abort (or a failed campaign assertion).
const EXIT_ABORT: u8 = 2;
const EXIT_USAGE: u8 = 1;

#[derive(Parser)]
#[command(
    name = "pairsonic",
    version,
    about = "Acoustic group pairing: simulator, attack campaigns and modem tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one group exchange and write its transcript.
    Run(RunArgs),
    /// Sweep presets x seeds x group sizes x noise and write a CSV.
    Campaign(CampaignArgs),
    /// Encode one frame to a WAV (or raw f32) file.
    ModemEncode(EncodeArgs),
    /// Decode every frame found in a WAV (or raw f32) file.
    ModemDecode(DecodeArgs),
    /// Manual-step and protocol-time comparison per group size.
    ScalingReport(ScalingArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(2..))]
    n: u16,
    /// Attack preset; see `--list-attacks`.
    #[arg(long, default_value = "none", conflicts_with = "policy_file")]
    attack: String,
    /// Adversary policy in the rule-file format.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    #[arg(long, env = "PAIRSONIC_SEED", default_value_t = 0)]
    seed: u64,
    /// confirm-all, reject-one or rushing:<p>.
    #[arg(long, default_value = "confirm-all", value_parser = parse_users)]
    users: UserScript,
    /// clean, awgn:<snr_db> or impulsive:<rate>:<amplitude>.
    #[arg(long, default_value = "clean", value_parser = parse_noise)]
    noise: NoiseModel,
    /// Members (by index) out of earshot of the group.
    #[arg(long, value_delimiter = ',')]
    out_of_range: Vec<usize>,
    /// Transcript destination (JSON lines).
    #[arg(long, short, default_value = "transcript.jsonl")]
    output: PathBuf,
    #[arg(long)]
    list_attacks: bool,
}

#[derive(Args)]
struct CampaignArgs {
    /// Comma-separated presets, or `all`.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    attack: Vec<String>,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, env = "PAIRSONIC_SEED", default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value = "2,4,6", value_delimiter = ',', value_parser = clap::value_parser!(u16).range(2..))]
    n: Vec<u16>,
    #[arg(long, default_value = "clean", value_delimiter = ',', value_parser = parse_noise)]
    noise: Vec<NoiseModel>,
    #[arg(long, default_value = "confirm-all", value_parser = parse_users)]
    users: UserScript,
    /// Modem trials per noise condition for the decode-success table.
    #[arg(long, default_value_t = 20)]
    bench_trials: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    /// verify-hash or network-init.
    #[arg(long, default_value = "verify-hash", value_parser = parse_kind)]
    kind: FrameKind,
    /// Frame payload as hex.
    #[arg(long, default_value = "")]
    payload: String,
    /// `.wav` for 16-bit PCM, anything else for raw little-endian f32.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// WAV (16-bit or float) or raw little-endian f32.
    #[arg(long, short)]
    input: PathBuf,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u16).range(2..))]
    max_n: u16,
    #[arg(long)]
    json: bool,
}

fn parse_users(s: &str) -> Result<UserScript, String> {
    UserScript::parse(s).ok_or_else(|| format!("unknown user script `{s}`"))
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    NoiseModel::parse(s).ok_or_else(|| format!("unknown noise model `{s}`"))
}

fn parse_kind(s: &str) -> Result<FrameKind, String> {
    match s {
        "verify-hash" | "verify" => Ok(FrameKind::VerifyHash),
        "network-init" | "init" => Ok(FrameKind::NetworkInit),
        _ => Err(format!("unknown frame kind `{s}`")),
    }
}

fn load_policy(attack: &str, file: Option<&Path>) -> Result<AdversaryPolicy> {
    if let Some(path) = file {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path
            .file_stem()
            .map_or("custom".into(), |s| s.to_string_lossy().into_owned());
        return Ok(AdversaryPolicy::parse(&name, &text)?);
    }
    match preset(attack) {
        Some(p) => Ok(p),
        None => bail!(
            "unknown attack `{attack}` (known: {})",
            preset_names().join(", ")
        ),
    }
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    if a.list_attacks {
        for p in attack_catalog() {
            println!("{p}");
        }
        return Ok(0);
    }
    let n = a.n as usize;
    if let Some(&i) = a.out_of_range.iter().find(|&&i| i >= n) {
        bail!("--out-of-range index {i} is not a member of a group of {n}");
    }
    let policy = load_policy(&a.attack, a.policy_file.as_deref())?;
    let cfg = SimConfig {
        noise: a.noise,
        out_of_range: a.out_of_range,
        ..Default::default()
    };
    let report = run_session_with(n, &policy, a.users, a.seed, &cfg)?;
    std::fs::write(&a.output, report.transcript.to_jsonl())
        .with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "n={} attack={} users={} noise={} seed={} ticks={} ({:.2} s)",
        n,
        report.policy,
        report.users,
        report.noise.label(),
        report.seed,
        report.ticks,
        report.seconds()
    );
    for r in &report.results {
        let flags = if r.outcome.flags.any() {
            format!(" flags={:?}", r.outcome.flags)
        } else {
            String::new()
        };
        println!(
            "  member {} {:?} {:?} contacts={}{}{}",
            r.endpoint,
            r.role,
            r.outcome.verdict,
            r.outcome.contacts.len(),
            flags,
            if r.false_accept { " FALSE-ACCEPT" } else { "" }
        );
    }
    println!(
        "transcript: {} ({} records)",
        a.output.display(),
        report.transcript.records.len()
    );
    Ok(if report.all_imported() { 0 } else { EXIT_ABORT })
}

fn cmd_campaign(a: CampaignArgs) -> Result<u8> {
    let policies = if a.attack.iter().any(|s| s == "all") {
        attack_catalog()
    } else {
        a.attack
            .iter()
            .map(|s| load_policy(s, None))
            .collect::<Result<_>>()?
    };
    let spec = CampaignSpec {
        policies,
        group_sizes: a.n.iter().map(|&n| n as usize).collect(),
        seeds: a.first_seed..a.first_seed + a.seeds,
        noises: a.noise.clone(),
        users: a.users,
        config: SimConfig::default(),
    };
    let rows = run_campaign(&spec)?;
    let csv = rows_to_csv(&rows)?;
    // Summary goes wherever the CSV does not.
    let mut summary = String::new();
    summary.push_str(&format!(
        "{:<24} {:>3} {:<18} {:>8} {:>9} {:>6}\n",
        "attack", "n", "noise", "sessions", "accepted", "false"
    ));
    let mut cells: Vec<(String, usize, String)> = rows
        .iter()
        .map(|r| (r.policy.clone(), r.n, r.noise.clone()))
        .collect();
    cells.sort();
    cells.dedup();
    for (p, n, noise) in &cells {
        let cell: Vec<_> = rows
            .iter()
            .filter(|r| &r.policy == p && r.n == *n && &r.noise == noise)
            .collect();
        let accepted = cell.iter().filter(|r| r.imported == r.n).count();
        let fa: usize = cell.iter().map(|r| r.false_accepts).sum();
        summary.push_str(&format!(
            "{:<24} {:>3} {:<18} {:>8} {:>9} {:>6}\n",
            p,
            n,
            noise,
            cell.len(),
            accepted,
            fa
        ));
    }
    if a.bench_trials > 0 {
        summary.push_str(&format!(
            "\n{:<18} {:>7} {:>8} {:>8}\n",
            "noise", "trials", "decoded", "matched"
        ));
        for p in noise_benchmark(&a.noise, a.bench_trials, a.first_seed) {
            summary.push_str(&format!(
                "{:<18} {:>7} {:>8} {:>8}\n",
                p.noise, p.trials, p.decoded, p.matched
            ));
        }
    }
    let false_accepts: usize = rows.iter().map(|r| r.false_accepts).sum();
    let ok = false_accepts == 0;
    summary.push_str(&format!(
        "\nzero-false-accept assertion: {} ({} sessions, {} false accepts)\n",
        if ok { "PASS" } else { "FAIL" },
        rows.len(),
        false_accepts
    ));
    match &a.output {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(if ok { 0 } else { EXIT_ABORT })
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn cmd_encode(a: EncodeArgs) -> Result<u8> {
    let payload = hex::decode(a.payload.trim()).context("payload must be hex")?;
    let frame = OobFrame::new(a.kind, payload)?;
    let m = default_modem();
    let samples = m.encode(&frame)?;
    if is_wav(&a.output) {
        modem::wav::write_wav(&a.output, &samples, m.profile().sample_rate)?;
    } else {
        let f = std::fs::File::create(&a.output)
            .with_context(|| format!("creating {}", a.output.display()))?;
        modem::wav::write_raw_f32(std::io::BufWriter::new(f), &samples)?;
    }
    println!(
        "{:?} frame, {} payload bytes -> {} samples ({:.3} s) in {}",
        frame.kind,
        frame.payload.len(),
        samples.len(),
        samples.len() as f64 / m.profile().sample_rate as f64,
        a.output.display()
    );
    Ok(0)
}

fn cmd_decode(a: DecodeArgs) -> Result<u8> {
    let m = default_modem();
    let samples = if is_wav(&a.input) {
        modem::wav::read_wav(&a.input, m.profile().sample_rate)?
    } else {
        let f = std::fs::File::open(&a.input)
            .with_context(|| format!("opening {}", a.input.display()))?;
        modem::wav::read_raw_f32(std::io::BufReader::new(f))?
    };
    let detections = m.scan(&samples);
    let mut decoded = 0;
    for d in &detections {
        match &d.frame {
            Some(f) => {
                decoded += 1;
                println!(
                    "offset={} kind={:?} payload={}",
                    d.offset,
                    f.kind,
                    hex::encode(&f.payload)
                );
            }
            None => println!("offset={} corrupt", d.offset),
        }
    }
    if detections.is_empty() {
        println!("no frame found");
    }
    Ok(if decoded > 0 { 0 } else { EXIT_ABORT })
}

fn cmd_scaling(a: ScalingArgs) -> Result<u8> {
    let rows = scaling_report(a.max_n as usize)?;
    if a.json {
        for r in &rows {
            println!("{}", serde_json::to_string(r)?);
        }
    } else {
        print!("{}", render_table(&rows));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Campaign(a) => cmd_campaign(a),
        Command::ModemEncode(a) => cmd_encode(a),
        Command::ModemDecode(a) => cmd_decode(a),
        Command::ScalingReport(a) => cmd_scaling(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
