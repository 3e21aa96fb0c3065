use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use flexmarket_client::{Client, ClientError};
use flexmarket_core::api::{codes, AuditRequest, CreateSession};
use flexmarket_core::io::{
    load_bids, load_book, load_trade_log, trade_log_to_string, write_book, LoadError, MarketConfig, NetworkFile,
    PolicySelector, EXIT_INFEASIBLE_BASELINE, EXIT_INPUT,
};
use flexmarket_core::market::{BidRecord, CounterpartyOrder, OrderBook, Outcome, TradeLogEntry};

const EXIT_TRANSPORT: u8 = 1;
const EXIT_VIOLATIONS: u8 = 4;

#[derive(Parser)]
#[command(name = "flexmarket", version, about = "Network-aware flexibility market")]
struct Cli {
    /// Service to talk to. Without it an in-process server is started.
    #[arg(long, global = true, env = "FLEXMARKET_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Replay a bid stream through a fresh market.
    Run(RunArgs),
    /// Validate a network and its baseline, or audit a trade log.
    Check {
        #[arg(long)]
        network: PathBuf,
        /// Activate every subset of the log's conditional matches and report overloads.
        #[arg(long, requires = "trades")]
        exhaustive: bool,
        #[arg(long)]
        trades: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Print the PTDF matrix and baseline flows as JSON.
    Ptdf {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretty-print an order book dump.
    Book { path: PathBuf },
}

#[derive(Parser)]
struct RunArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    bids: PathBuf,
    /// Market configuration (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PolicySelector>,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long)]
    max_combinations: Option<usize>,
    #[arg(long, value_enum)]
    order: Option<Order>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Check activation combinations on one thread.
    #[arg(long)]
    sequential: bool,
    /// Directory for trades.jsonl and book.json; the log goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Order {
    Fifo,
    BestPrice,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code: code as u8,
            message: message.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::new(e.exit_code(), e.to_string())
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = match &e {
            ClientError::Api { code, .. } if code == codes::INFEASIBLE_BASELINE => EXIT_INFEASIBLE_BASELINE,
            ClientError::Api { status, .. } if (400..500).contains(status) => EXIT_INPUT,
            ClientError::InvalidUrl(_) => EXIT_INPUT,
            _ => EXIT_TRANSPORT as i32,
        };
        Failure::new(code, e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_TRANSPORT as i32, format!("{}: {e}", path.display())))
}

async fn connect(server: Option<String>) -> Result<Client, Failure> {
    let url = match server {
        Some(url) => url,
        None => {
            let addr = flexmarket_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
                .await
                .map_err(|e| Failure::new(EXIT_TRANSPORT as i32, format!("cannot start local server: {e}")))?;
            format!("http://{addr}")
        }
    };
    Ok(Client::new(&url)?)
}

fn market_config(args: &RunArgs) -> Result<MarketConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => MarketConfig::load(path)?,
        None => MarketConfig::default(),
    };
    if let Some(p) = args.policy {
        config.policy = p;
    }
    if let Some(s) = &args.scenarios {
        config.scenarios = Some(s.clone());
    }
    if let Some(k) = args.max_combinations {
        config.max_combinations = k;
    }
    if let Some(o) = args.order {
        config.order = match o {
            Order::Fifo => CounterpartyOrder::Fifo,
            Order::BestPrice => CounterpartyOrder::BestPrice,
        };
    }
    if let Some(t) = args.tolerance {
        config.tolerance_kw = t;
    }
    if args.sequential {
        config.parallel = false;
    }
    Ok(config)
}

async fn run(client: &Client, args: RunArgs) -> Result<(), Failure> {
    let config = market_config(&args)?.to_clearing()?;
    let network = NetworkFile::load(&args.network)?;
    let bids = load_bids(&args.bids)?;

    let session = client.create_session(&CreateSession { network, config }).await?;
    let id = session.session_id;
    let mut result = Ok(());
    for bid in bids {
        let bid_id = bid.id.clone();
        if let Err(e) = client.submit_bid(&id, &BidRecord::from(bid)).await {
            let mut f = Failure::from(e);
            f.message = format!("bid {bid_id}: {}", f.message);
            result = Err(f);
            break;
        }
    }
    if result.is_ok() {
        let log = client.trades(&id).await?;
        let book = client.session(&id).await?.book;
        result = emit(&log, &book, args.out.as_deref());
    }
    let _ = client.delete_session(&id).await;
    result
}

fn emit(log: &[TradeLogEntry], book: &OrderBook, out: Option<&Path>) -> Result<(), Failure> {
    let text = trade_log_to_string(log);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::new(EXIT_TRANSPORT as i32, format!("{}: {e}", dir.display())))?;
            write_file(&dir.join("trades.jsonl"), &text)?;
            write_book(dir.join("book.json"), book)
                .map_err(|e| Failure::new(EXIT_TRANSPORT as i32, format!("book.json: {e}")))?;
        }
        None => print!("{text}"),
    }
    let matched: Vec<_> = log.iter().filter(|e| e.outcome.is_match()).collect();
    let rejected = log.iter().filter(|e| e.outcome == Outcome::RejectedCongestion).count();
    eprintln!(
        "{} evaluations, {} matches ({} kW), {} rejected for congestion, {} offers and {} requests resting",
        log.len(),
        matched.len(),
        matched.iter().map(|e| e.quantity_kw).sum::<f64>(),
        rejected,
        book.offers.len(),
        book.requests.len()
    );
    Ok(())
}

async fn check(
    client: &Client,
    network: &Path,
    trades: Option<PathBuf>,
    exhaustive: bool,
    tolerance: Option<f64>,
) -> Result<(), Failure> {
    let file = NetworkFile::load(network)?;
    if !exhaustive {
        let ptdf = client.ptdf(&file).await?;
        let limits = file.lines.iter().map(|l| l.limit_kw);
        println!("network ok: {} buses, {} lines, slack {}", ptdf.buses.len(), ptdf.line_ids.len(), ptdf.slack_bus);
        for ((id, flow), limit) in ptdf.line_ids.iter().zip(&ptdf.baseline_flows_kw).zip(limits) {
            println!("  {id:>8}  {flow:>12.4} / {limit} kW");
        }
        return Ok(());
    }
    let trades = trades.expect("required by clap");
    let req = AuditRequest {
        network: file,
        trades: load_trade_log(&trades)?,
        tolerance_kw: tolerance,
    };
    let audit = client.audit(&req).await?;
    if audit.reports.is_empty() {
        println!(
            "all {} activation subsets of {} conditional matches are line-feasible",
            1u64 << audit.conditional_matches,
            audit.conditional_matches
        );
        return Ok(());
    }
    for r in &audit.reports {
        let overloads: Vec<String> = r
            .violations
            .iter()
            .map(|v| format!("{} {:.4} kW (limit {}, over by {:.4})", v.line, v.flow_kw, v.limit_kw, v.overload_kw))
            .collect();
        println!("{{{}}}: {}", r.subset.join(", "), overloads.join("; "));
    }
    Err(Failure {
        code: EXIT_VIOLATIONS,
        message: format!("{} activation subsets overload a line", audit.reports.len()),
    })
}

async fn ptdf(client: &Client, network: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let resp = client.ptdf(&NetworkFile::load(network)?).await?;
    let text = serde_json::to_string_pretty(&resp).expect("serializable") + "\n";
    match out {
        Some(path) => write_file(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_book(path: &Path) -> Result<(), Failure> {
    let book = load_book(path)?;
    for (title, bids) in [("offers", &book.offers), ("requests", &book.requests)] {
        println!("{title} ({})", bids.len());
        for b in bids {
            let cond = b.conditionality.map(|c| format!(" {c:?}").to_lowercase()).unwrap_or_default();
            println!(
                "  #{:<4} {:<12} {:<4} bus {:<4} {:>10.3} kW @ {:.4}{cond}",
                b.sequence, b.id, b.direction, b.bus, b.quantity_kw, b.price_eur_per_kw
            );
        }
    }
    println!("matches ({})", book.matches.len());
    for m in &book.matches {
        println!(
            "  {:<6} {} -> {:<10} {:<4} {}>{} {:>10.3} kW @ {:.4} {:?}",
            m.id, m.offer_id, m.request_id, m.direction, m.inject_bus, m.withdraw_bus, m.quantity_kw, m.price_eur_per_kw,
            m.conditionality
        );
    }
    println!("baseline injections");
    for (bus, kw) in &book.baseline.injection_kw {
        println!("  bus {bus:<4} {kw:>12.4} kW");
    }
    Ok(())
}

async fn serve(bind: SocketAddr) -> Result<(), Failure> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| Failure::new(EXIT_TRANSPORT as i32, format!("cannot bind {bind}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr().unwrap());
    tokio::select! {
        r = flexmarket_server::serve(listener) => r.map_err(|e| Failure::new(EXIT_TRANSPORT as i32, e.to_string())),
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}

async fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve { bind } => serve(bind).await,
        Command::Book { path } => print_book(&path),
        Command::Run(args) => run(&connect(cli.server).await?, args).await,
        Command::Check {
            network,
            exhaustive,
            trades,
            tolerance,
        } => check(&connect(cli.server).await?, &network, trades, exhaustive, tolerance).await,
        Command::Ptdf { network, out } => ptdf(&connect(cli.server).await?, &network, out).await,
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
