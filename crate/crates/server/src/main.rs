use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coregulate::clock::SystemClock;
use coregulate::config::{load_keywords, load_lexicon, load_profiles, load_session_config};
use coregulate::event_log::replay;
use coregulate::gateway::{Gateway, GatewayConfig};
use coregulate::orchestrator::{Orchestrator, OrchestratorConfig};
use coregulate::provider::{HttpProvider, HttpProviderConfig, MockProvider, Provider};
use coregulate::synth::{simulate, to_jsonl, ScenarioSpec};
use coregulate::{report, synth};
use coregulate_core::{Mode, SessionConfig, TriggerParams};
use rand::SeedableRng;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "coregulate",
    version,
    about = "Collaborative learning sessions with routed and proactive agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the session server.
    Serve(ServeArgs),
    /// Analyse a session log offline.
    Replay(ReplayArgs),
    /// Generate a synthetic session log.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Miracle,
    Generic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Miracle => Mode::Miracle,
            ModeArg::Generic => Mode::GenericAssistant,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Mock,
    /// Chat-completion endpoint from COREGULATE_PROVIDER_* variables.
    Http,
}

/// Trigger threshold overrides. Durations are in seconds.
#[derive(Args, Clone, Default)]
struct TriggerArgs {
    /// Session or trigger config JSON; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Silence before a member counts as inactive [default: 180].
    #[arg(long, value_name = "SECS")]
    t_inactive: Option<f64>,
    /// Width of each participation window [default: 120].
    #[arg(long, value_name = "SECS")]
    w_participation: Option<f64>,
    /// Current/previous window ratio below which participation has declined [default: 0.5].
    #[arg(long, value_name = "RATIO")]
    decline_ratio: Option<f64>,
    /// Events the previous window needs before a decline can fire [default: 4].
    #[arg(long, value_name = "EVENTS")]
    min_prev_rate: Option<u32>,
    /// Whiteboard idle time, while chat goes on, that counts as a stall [default: 300].
    #[arg(long, value_name = "SECS")]
    t_stall: Option<f64>,
    /// Minimum gap between firings of one kind at one target [default: 300].
    #[arg(long, value_name = "SECS")]
    cooldown: Option<f64>,
    /// Timer evaluation period [default: 5].
    #[arg(long, value_name = "SECS")]
    tick: Option<f64>,
    /// Frustration phrases, one per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, value_enum, default_value = "miracle")]
    mode: ModeArg,
    /// Directory overriding `agents/*.json` and `keywords.json`.
    #[arg(long)]
    agents_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    provider: ProviderArg,
    /// Append every provider exchange to this JSONL file.
    #[arg(long)]
    record_provider: Option<PathBuf>,
    #[command(flatten)]
    triggers: TriggerArgs,
}

#[derive(Args)]
struct ReplayArgs {
    log: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    agents_dir: Option<PathBuf>,
    /// Route mentions with a live provider; the report is then not reproducible.
    #[arg(long, value_enum, default_value = "mock")]
    provider: ProviderArg,
    #[command(flatten)]
    triggers: TriggerArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario JSON. Without it a random scenario is drawn from the seed.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Overrides the scenario's mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    triggers: TriggerArgs,
}

/// A failure with its exit code.
struct Failure(u8, String);

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure(EXIT_USAGE, msg.to_string())
}

fn data(msg: impl std::fmt::Display) -> Failure {
    Failure(EXIT_DATA, msg.to_string())
}

fn secs(s: f64, flag: &str) -> Result<u64, Failure> {
    if !(s.is_finite() && s > 0.0) {
        return Err(usage(format!("--{flag} must be a positive number of seconds")));
    }
    Ok((s * 1000.0).round() as u64)
}

impl TriggerArgs {
    /// The session config file (if any) with flag overrides applied.
    fn session_config(&self) -> Result<SessionConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => load_session_config(path).map_err(data)?,
            None => SessionConfig::default(),
        };
        let p = &mut config.trigger_params;
        if let Some(v) = self.t_inactive {
            p.t_inactive_ms = secs(v, "t-inactive")?;
        }
        if let Some(v) = self.w_participation {
            p.w_participation_ms = secs(v, "w-participation")?;
        }
        if let Some(v) = self.decline_ratio {
            p.decline_ratio = v;
        }
        if let Some(v) = self.min_prev_rate {
            p.min_prev_rate = v;
        }
        if let Some(v) = self.t_stall {
            p.t_stall_ms = secs(v, "t-stall")?;
        }
        if let Some(v) = self.cooldown {
            p.cooldown_ms = secs(v, "cooldown")?;
        }
        if let Some(v) = self.tick {
            p.tick_ms = secs(v, "tick")?;
        }
        if let Some(path) = &self.lexicon {
            p.frustration_lexicon = load_lexicon(path).map_err(data)?;
        }
        p.validate().map_err(usage)?;
        Ok(config)
    }

    fn params(&self) -> Result<TriggerParams, Failure> {
        Ok(self.session_config()?.trigger_params)
    }
}

fn orchestrator(
    provider: ProviderArg,
    agents_dir: Option<&Path>,
    record: Option<&Path>,
) -> Result<Arc<Orchestrator>, Failure> {
    let profiles = load_profiles(agents_dir).map_err(usage)?;
    let lexicon = load_keywords(agents_dir).map_err(usage)?;
    let mut config = OrchestratorConfig::default();
    let backend: Arc<dyn Provider> = match provider {
        ProviderArg::Mock => {
            let mock = MockProvider::new(lexicon.clone());
            match record {
                Some(path) => Arc::new(coregulate::provider::RecordingProvider::new(mock, path).map_err(data)?),
                None => Arc::new(mock),
            }
        }
        ProviderArg::Http => {
            let http = HttpProviderConfig::from_env()
                .ok_or_else(|| usage(format!("--provider http needs {}", HttpProviderConfig::ENV_ENDPOINT)))?;
            config.timeout = http.timeout;
            let http = HttpProvider::new(http).map_err(usage)?;
            match record {
                Some(path) => Arc::new(coregulate::provider::RecordingProvider::new(http, path).map_err(data)?),
                None => Arc::new(http),
            }
        }
    };
    Ok(Arc::new(Orchestrator::new(backend, profiles, lexicon, config)))
}

async fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut defaults = args.triggers.session_config()?;
    defaults.mode = args.mode.into();
    std::fs::create_dir_all(&args.data_dir).map_err(|e| data(format!("{}: {e}", args.data_dir.display())))?;
    let orchestrator = orchestrator(
        args.provider,
        args.agents_dir.as_deref(),
        args.record_provider.as_deref(),
    )?;
    let provider_name = orchestrator.provider().name().to_owned();
    let mut config = GatewayConfig::new(&args.data_dir);
    config.defaults = defaults.clone();
    let gateway = Gateway::new(config, orchestrator, Arc::new(SystemClock));
    let listener = tokio::net::TcpListener::bind(args.bind)
        .await
        .map_err(|e| data(format!("cannot bind {}: {e}", args.bind)))?;
    let params = serde_json::to_string(&defaults.trigger_params).expect("params always serialize");
    println!(
        "coregulate listening on {} | mode {} | provider {provider_name} | data {}",
        listener.local_addr().map_or(args.bind, |a| a),
        defaults.mode.as_str(),
        args.data_dir.display()
    );
    println!("trigger params {params}");
    let _ = std::io::stdout().flush();
    axum::serve(listener, gateway.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| data(format!("server error: {e}")))
}

async fn run_replay(args: ReplayArgs) -> Result<(), Failure> {
    let config = args.triggers.session_config()?;
    let replayed = replay(&args.log).map_err(|e| data(format!("{}: {e}", args.log.display())))?;
    if let Some(t) = &replayed.torn_tail {
        eprintln!(
            "warning: ignored torn final record on line {} ({} bytes)",
            t.line, t.bytes
        );
    }
    let orchestrator = orchestrator(args.provider, args.agents_dir.as_deref(), None)?;
    let report = report::build(
        &replayed.events,
        &config.trigger_params,
        &config.task_prompt,
        &orchestrator,
    )
    .await
    .map_err(|e| data(format!("{}: invalid event sequence: {e}", args.log.display())))?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("reports always serialize")
        );
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Failure> {
    let params = args.triggers.params()?;
    let mut spec = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ScenarioSpec>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ScenarioSpec::random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(args.seed)),
    };
    if let Some(mode) = args.mode {
        spec.mode = mode.into();
    }
    let profiles = load_profiles(None).map_err(usage)?;
    let lexicon = load_keywords(None).map_err(usage)?;
    let synthesized = simulate(&spec, args.seed, &params, &profiles, &lexicon).map_err(|e| match e {
        synth::SynthError::BadSpec(_) => usage(e),
    })?;
    let text = to_jsonl(&synthesized.events);
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(data),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "coregulate=info,warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Synth(args) => run_synth(args),
        command => {
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => return report_failure(data(format!("cannot start runtime: {e}"))),
            };
            runtime.block_on(async {
                match command {
                    Command::Serve(args) => serve(args).await,
                    Command::Replay(args) => run_replay(args).await,
                    Command::Synth(_) => unreachable!("handled above"),
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report_failure(f),
    }
}

fn report_failure(Failure(code, msg): Failure) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}
