use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use mcshoot_cli::{parse_config_str, run, RunError};

/// Multiplicity and limit analysis for the one-dimensional prescribed mean
/// curvature Neumann problem.
#[derive(Parser, Debug)]
#[command(name = "mcshoot", version)]
struct Cli {
    /// JSON config file; flags below override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// constant, affine, exponential or cosine-perturbed
    #[arg(long, global = true)]
    weight: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    p: Option<f64>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Neumann eigenvalues λ₁..λ_k of −u″ = λ a u.
    Eig {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Rotation numbers of Cauchy trajectories.
    Rotation {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        d: Option<f64>,
        /// lo,hi,count
        #[arg(long, value_delimiter = ',')]
        d_range: Option<Vec<f64>>,
    },
    /// All 2k shooting solutions for one regularization index.
    SolveApprox {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Follows one family along the ladder to its limit.
    Limit {
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        side: Option<String>,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<u32>>,
        #[arg(long)]
        delta_jump: Option<f64>,
        #[arg(long)]
        limit_tol: Option<f64>,
        #[arg(long)]
        energy_tol: Option<f64>,
        #[arg(long)]
        guard_band: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Level sets and periods of the autonomous Hamiltonian system.
    Phase {
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// u_min,u_max
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u_range: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        amplitudes: Option<Vec<f64>>,
    },
    /// Classical-solution criteria, no solving.
    Check {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Runs the invariant suite.
    Verify,
}

fn set(obj: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        obj.insert(key.to_string(), v);
    }
}

fn child<'a>(obj: &'a mut Map<String, Value>, key: &str) -> &'a mut Map<String, Value> {
    let slot = obj.entry(key.to_string()).or_insert_with(|| json!({}));
    if !slot.is_object() {
        *slot = json!({});
    }
    slot.as_object_mut().expect("object")
}

fn merged(cli: Cli) -> Result<String, RunError> {
    let mut root = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                RunError::Config(mcshoot_cli::ConfigError { key: "<file>".into(), msg: format!("{}: {e}", path.display()) })
            })?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(o)) => o,
                // let the parser produce the message
                _ => return Ok(text),
            }
        }
        None => Map::new(),
    };
    let o = &mut root;
    set(o, "output_dir", cli.out.map(|p| json!(p.to_string_lossy())));
    set(o, "tol", cli.tol.map(|x| json!(x)));
    {
        let problem = child(o, "problem");
        let w = child(problem, "weight");
        if let Some(f) = &cli.weight {
            w.clear();
            w.insert("family".into(), json!(f));
        }
        if !w.contains_key("family") && [cli.a0, cli.a1, cli.sigma, cli.eps].iter().any(Option::is_some) {
            w.insert("family".into(), json!("constant"));
        }
        set(w, "a0", cli.a0.map(|x| json!(x)));
        set(w, "a1", cli.a1.map(|x| json!(x)));
        set(w, "sigma", cli.sigma.map(|x| json!(x)));
        set(w, "eps", cli.eps.map(|x| json!(x)));
        if w.is_empty() {
            problem.remove("weight");
        }
        let nl = child(problem, "nonlinearity");
        if (cli.lambda.is_some() || cli.p.is_some()) && nl.is_empty() {
            nl.insert("lambda".into(), json!(1.5));
            nl.insert("p".into(), json!(11.0));
        }
        set(nl, "lambda", cli.lambda.map(|x| json!(x)));
        set(nl, "p", cli.p.map(|x| json!(x)));
        if nl.is_empty() {
            problem.remove("nonlinearity");
        }
        if problem.is_empty() {
            o.remove("problem");
        }
    }
    let mode = match cli.cmd {
        None => None,
        Some(Cmd::Eig { k }) => {
            set(o, "k", k.map(|x| json!(x)));
            Some("eig")
        }
        Some(Cmd::Rotation { n, d, d_range }) => {
            set(o, "n", n.map(|x| json!(x)));
            if d.is_some() || d_range.is_some() {
                o.remove("d");
                o.remove("d_range");
            }
            set(o, "d", d.map(|x| json!(x)));
            set(o, "d_range", d_range.map(|x| json!(x)));
            Some("rotation")
        }
        Some(Cmd::SolveApprox { n, k }) => {
            set(o, "n", n.map(|x| json!(x)));
            set(o, "k", k.map(|x| json!(x)));
            Some("solve-approx")
        }
        Some(Cmd::Limit { j, side, ladder, delta_jump, limit_tol, energy_tol, guard_band, samples }) => {
            set(o, "j", j.map(|x| json!(x)));
            set(o, "side", side.map(|x| json!(x)));
            set(o, "ladder", ladder.map(|x| json!(x)));
            set(o, "delta_jump", delta_jump.map(|x| json!(x)));
            set(o, "limit_tol", limit_tol.map(|x| json!(x)));
            set(o, "energy_tol", energy_tol.map(|x| json!(x)));
            set(o, "guard_band", guard_band.map(|x| json!(x)));
            set(o, "limit_samples", samples.map(|x| json!(x)));
            Some("limit")
        }
        Some(Cmd::Phase { levels, u_range, samples, amplitudes }) => {
            set(o, "levels", levels.map(|x| json!(x)));
            set(o, "u_range", u_range.map(|x| json!(x)));
            set(o, "samples", samples.map(|x| json!(x)));
            set(o, "amplitudes", amplitudes.map(|x| json!(x)));
            Some("phase")
        }
        Some(Cmd::Check { k }) => {
            set(o, "k", k.map(|x| json!(x)));
            Some("check")
        }
        Some(Cmd::Verify) => Some("verify"),
    };
    set(o, "mode", mode.map(|m| json!(m)));
    Ok(Value::Object(root).to_string())
}

fn init_threads() {
    if let Ok(s) = std::env::var("MCSHOOT_THREADS") {
        match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: MCSHOOT_THREADS ignored: {e}");
                }
            }
            _ => eprintln!("warning: MCSHOOT_THREADS must be a positive integer, got '{s}'"),
        }
    }
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    if let RunError::Hypothesis(h) = e {
        println!("{}", serde_json::to_string_pretty(h.as_ref()).unwrap_or_default());
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let text = match merged(cli) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let cfg = match parse_config_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(&RunError::Config(e)),
    };
    match run(&cfg) {
        Ok(s) => {
            eprintln!("wrote {} file(s) to {}", s.files.len() + 1, s.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
