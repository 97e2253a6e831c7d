//! Batch command-line front end: validate/evaluate/encode circuits, build
//! and run the simulating transformers, reproduce the attention tables,
//! compile transformers back to circuits, and fuzz the simulation oracle.
//!
//! Exit codes: 0 success (for `simulate`: outputs match), 1 semantic error
//! or mismatch, 2 argument parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use circformer::circuit::{
    parse_circuit, random_circuit, render_circuit, render_circuit_with_comments, Circuit,
    ExtensionRegistry, RandomCircuitSpec,
};
use circformer::circuitizer::compile;
use circformer::constructions::{build, simulate, ConstructionFamily};
use circformer::encoding::{
    embed, encode, parse_sequence, render_raw_sequence, render_sequence, TypeConstants,
};
use circformer::engine::{parse_config, render_config, run, TraceMode, TransformerConfig};
use circformer::numerics::Rational;

#[derive(Parser)]
#[command(
    name = "circformer",
    version,
    about = "arithmetic circuits <-> hard-attention transformers, exactly"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a circuit file against all structural invariants.
    Validate { circuit: PathBuf },
    /// Evaluate a circuit on an input vector.
    Eval {
        circuit: PathBuf,
        #[arg(long, value_name = "r1,r2,...", default_value = "", allow_hyphen_values = true)]
        input: String,
    },
    /// Encode a circuit and inputs as a vector sequence.
    Encode {
        circuit: PathBuf,
        #[arg(long, value_name = "r1,r2,...", default_value = "", allow_hyphen_values = true)]
        input: String,
        /// Extend vectors to this dimension (7, 8 or 9) on the way out.
        #[arg(long)]
        embed: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit the simulating transformer config for a circuit class.
    Build {
        #[command(flatten)]
        kind: KindArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a transformer config on a sequence file.
    Run {
        config: PathBuf,
        sequence: PathBuf,
        /// Also print per-layer attention, pooled vectors and outputs.
        #[arg(long)]
        trace: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate a circuit through its transformer and compare with direct
    /// evaluation.
    Simulate {
        #[command(flatten)]
        kind: KindArgs,
        circuit: PathBuf,
        #[arg(long, value_name = "r1,r2,...", default_value = "", allow_hyphen_values = true)]
        input: String,
    },
    /// Print one attention-score matrix (rows are keys y, columns queries x).
    Attn {
        config: PathBuf,
        sequence: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        head: usize,
    },
    /// Compile a transformer config into one circuit at a fixed length.
    Compile {
        config: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the simulate-equals-evaluate oracle on random circuits.
    Fuzz {
        #[command(flatten)]
        kind: KindArgs,
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 24)]
        max_gates: usize,
        /// Reproducer file written on the first mismatch.
        #[arg(long, default_value = "fuzz-repro.circ")]
        repro: PathBuf,
        /// Worker threads; trials are sharded deterministically.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct KindArgs {
    /// gen | fac | fsac | fnc | ext:<name,...> | sign
    #[arg(long)]
    kind: String,
    /// Two-layer blocks to stack; circuits of depth up to this simulate
    /// exactly.
    #[arg(long)]
    depth: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read `{}`: {e}", path.display()))
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| format!("cannot write `{}`: {e}", p.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_inputs(s: &str) -> Result<Vec<Rational>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<Rational>().map_err(|e| e.to_string()))
        .collect()
}

fn load_circuit(path: &Path) -> Result<Circuit, String> {
    parse_circuit(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_config(path: &Path, registry: &ExtensionRegistry) -> Result<TransformerConfig, String> {
    let base = path.parent().map(Path::to_path_buf);
    parse_config(&read(path)?, base.as_deref(), registry)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_kind(args: &KindArgs) -> Result<(ConstructionFamily, usize), String> {
    let family = ConstructionFamily::parse_cli(&args.kind)
        .ok_or_else(|| format!("unknown kind `{}`", args.kind))?;
    if args.depth < 1 {
        return Err("depth must be >= 1".into());
    }
    Ok((family, args.depth))
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    let registry = ExtensionRegistry::standard();
    match command {
        Command::Validate { circuit } => {
            let c = load_circuit(&circuit)?;
            let report = c.validate();
            print!("{report}");
            Ok(if report.is_valid() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Eval { circuit, input } => {
            let c = load_circuit(&circuit)?;
            let u = parse_inputs(&input)?;
            let out = c.evaluate(&u, &registry).map_err(|e| e.to_string())?;
            for v in out {
                println!("{v}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Encode {
            circuit,
            input,
            embed: target,
            output,
        } => {
            let c = load_circuit(&circuit)?;
            let u = parse_inputs(&input)?;
            let types = TypeConstants::for_registry(&registry);
            let mut seq = encode(&c, &u, &types).map_err(|e| e.to_string())?;
            if let Some(d) = target {
                seq = embed(&seq, d).map_err(|e| e.to_string())?;
            }
            write_out(output.as_deref(), &render_sequence(&seq))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Build { kind, output } => {
            let (family, depth) = parse_kind(&kind)?;
            let cfg = build(&family, depth, &registry).map_err(|e| e.to_string())?;
            let text = render_config(&cfg).map_err(|e| e.to_string())?;
            write_out(output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            sequence,
            trace,
            output,
        } => {
            let cfg = load_config(&config, &registry)?;
            let seq = parse_sequence(&read(&sequence)?).map_err(|e| e.to_string())?;
            let mode = if trace {
                TraceMode::Full
            } else {
                TraceMode::LastLayer
            };
            let (out, tr) = run(&cfg, &seq.raw(), mode).map_err(|e| e.to_string())?;
            let mut text = render_raw_sequence(cfg.dim, &out);
            if trace {
                text.push_str(&render_trace(&tr));
            }
            write_out(output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            kind,
            circuit,
            input,
        } => {
            let (family, depth) = parse_kind(&kind)?;
            let c = load_circuit(&circuit)?;
            let u = parse_inputs(&input)?;
            let (sim, _) = simulate(&family, depth, &c, &u, &registry, TraceMode::LastLayer)
                .map_err(|e| e.to_string())?;
            let direct = c.evaluate(&u, &registry).map_err(|e| e.to_string())?;
            for v in &sim {
                println!("{v}");
            }
            for v in &direct {
                println!("{v}");
            }
            if sim == direct {
                println!("MATCH");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("DIFF");
                Ok(ExitCode::from(1))
            }
        }
        Command::Attn {
            config,
            sequence,
            layer,
            head,
        } => {
            let cfg = load_config(&config, &registry)?;
            let seq = parse_sequence(&read(&sequence)?).map_err(|e| e.to_string())?;
            if layer < 1 || layer > cfg.layers.len() {
                return Err(format!(
                    "layer {layer} out of range 1..{}",
                    cfg.layers.len()
                ));
            }
            let (_, trace) = run(&cfg, &seq.raw(), TraceMode::Full).map_err(|e| e.to_string())?;
            let lt = trace.layer(layer).expect("full trace has every layer");
            if head < 1 || head > lt.attention.len() {
                return Err(format!(
                    "head {head} out of range 1..{}",
                    lt.attention.len()
                ));
            }
            let matrix = &lt.attention[head - 1];
            // rows are keys y, columns are queries x
            let n = matrix.size();
            for y in 0..n {
                let cells: Vec<String> = (0..n).map(|x| matrix.get(x, y).to_string()).collect();
                println!("{}", cells.join("\t"));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compile {
            config,
            length,
            output,
        } => {
            let cfg = load_config(&config, &registry)?;
            let compiled = compile(&cfg, length).map_err(|e| e.to_string())?;
            let text =
                render_circuit_with_comments(&compiled.circuit, &compiled.provenance_comments());
            write_out(output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fuzz {
            kind,
            count,
            seed,
            max_gates,
            repro,
            workers,
        } => {
            let (family, depth) = parse_kind(&kind)?;
            fuzz(
                &family, depth, count, seed, max_gates, &repro, workers, &registry,
            )
        }
    }
}

fn render_trace(trace: &circformer::engine::ExecutionTrace) -> String {
    let mut out = String::new();
    for (k, layer) in &trace.layers {
        for (h, matrix) in layer.attention.iter().enumerate() {
            out.push_str(&format!("# trace layer {k} head {} attention\n", h + 1));
            let n = matrix.size();
            for y in 0..n {
                let cells: Vec<String> = (0..n).map(|x| matrix.get(x, y).to_string()).collect();
                out.push_str(&cells.join("\t"));
                out.push('\n');
            }
            out.push_str(&format!("# trace layer {k} head {} pooled\n", h + 1));
            for v in &layer.pooled[h] {
                let cells: Vec<String> = v.iter().map(Rational::to_string).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out.push_str(&format!("# trace layer {k} output\n"));
        for v in &layer.outputs {
            let cells: Vec<String> = v.iter().map(Rational::to_string).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    out
}

struct FuzzFailure {
    trial: u64,
    circuit: Circuit,
    inputs: Vec<Rational>,
}

fn class_for(family: &ConstructionFamily) -> (circformer::circuit::CircuitClass, Vec<String>) {
    use circformer::circuit::CircuitClass;
    match family {
        ConstructionFamily::Generalized | ConstructionFamily::AvgFac => {
            (CircuitClass::Unbounded, vec![])
        }
        ConstructionFamily::AvgFsac => (CircuitClass::SemiUnbounded, vec![]),
        ConstructionFamily::HardFnc => (CircuitClass::Bounded, vec![]),
        ConstructionFamily::AvgExt(names) => (CircuitClass::SemiUnbounded, names.clone()),
        ConstructionFamily::AvgSign => (CircuitClass::SemiUnbounded, vec!["sign".into()]),
    }
}

fn mismatch(
    family: &ConstructionFamily,
    depth: usize,
    c: &Circuit,
    u: &[Rational],
    registry: &ExtensionRegistry,
) -> bool {
    let direct = match c.evaluate(u, registry) {
        Ok(v) => v,
        Err(_) => return false,
    };
    match simulate(family, depth, c, u, registry, TraceMode::LastLayer) {
        Ok((sim, _)) => sim != direct,
        // admissibility rejections are not oracle failures
        Err(_) => false,
    }
}

fn run_trial(
    family: &ConstructionFamily,
    depth: usize,
    seed: u64,
    trial: u64,
    max_gates: usize,
    registry: &ExtensionRegistry,
) -> Option<FuzzFailure> {
    let (class, whitelist) = class_for(family);
    let spec = RandomCircuitSpec {
        class,
        max_depth: depth.min(4),
        max_gates,
        extension_whitelist: whitelist,
        seed: seed.wrapping_add(trial),
    };
    let c = random_circuit(&spec, registry).ok()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial << 17));
    let u: Vec<Rational> = (0..c.input_count())
        .map(|_| Rational::ratio(rng.gen_range(-9..=9), rng.gen_range(1..=9)))
        .collect();
    mismatch(family, depth, &c, &u, registry).then_some(FuzzFailure {
        trial,
        circuit: c,
        inputs: u,
    })
}

/// Greedy shrink: simplify inputs toward small integers, then drop dead
/// gates, keeping the mismatch alive.
fn shrink(
    family: &ConstructionFamily,
    depth: usize,
    failure: &mut FuzzFailure,
    registry: &ExtensionRegistry,
) {
    let simple = [Rational::zero(), Rational::one(), Rational::from_int(-1)];
    for k in 0..failure.inputs.len() {
        for candidate in &simple {
            if &failure.inputs[k] == candidate {
                continue;
            }
            let mut trial = failure.inputs.clone();
            trial[k] = candidate.clone();
            if mismatch(family, depth, &failure.circuit, &trial, registry) {
                failure.inputs = trial;
                break;
            }
        }
    }
    while let Some(smaller) = drop_one_dead_gate(&failure.circuit) {
        if !mismatch(family, depth, &smaller, &failure.inputs, registry) {
            break;
        }
        failure.circuit = smaller;
    }
}

/// Removes the highest-index gate with no outgoing edges that is not an
/// output or input gate, renumbering the rest.
fn drop_one_dead_gate(c: &Circuit) -> Option<Circuit> {
    use circformer::circuit::{Edge, GateLabel};
    let mut has_out = vec![false; c.size() + 1];
    for e in c.edges() {
        has_out[e.from] = true;
    }
    let victim = (1..=c.size()).rev().find(|&idx| {
        !has_out[idx] && !matches!(c.gate(idx), GateLabel::Output(_) | GateLabel::Input(_))
    })?;
    let gates = c
        .gates()
        .filter(|&(idx, _)| idx != victim)
        .map(|(_, g)| g.clone())
        .collect();
    let renumber = |idx: usize| if idx > victim { idx - 1 } else { idx };
    let edges = c
        .edges()
        .iter()
        .filter(|e| e.to != victim && e.from != victim)
        .map(|e| Edge {
            from: renumber(e.from),
            to: renumber(e.to),
            alpha: e.alpha,
        })
        .collect();
    Some(Circuit::new(c.class(), gates, edges))
}

#[allow(clippy::too_many_arguments)]
fn fuzz(
    family: &ConstructionFamily,
    depth: usize,
    count: u64,
    seed: u64,
    max_gates: usize,
    repro: &Path,
    workers: Option<usize>,
    registry: &ExtensionRegistry,
) -> Result<ExitCode, String> {
    if let Some(w) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let failure = (0..count)
        .into_par_iter()
        .filter_map(|trial| run_trial(family, depth, seed, trial, max_gates, registry))
        .min_by_key(|f| f.trial);
    match failure {
        None => {
            println!("fuzz: {count} trials, all simulations match direct evaluation");
            Ok(ExitCode::SUCCESS)
        }
        Some(mut failure) => {
            shrink(family, depth, &mut failure, registry);
            let inputs: Vec<String> = failure.inputs.iter().map(Rational::to_string).collect();
            let mut text = String::new();
            text.push_str(&format!(
                "# fuzz reproducer: kind {} depth {depth} trial {}\n",
                family.cli_name(),
                failure.trial
            ));
            text.push_str(&format!(
                "# circformer simulate --kind {} --depth {depth} {} --input {}\n",
                family.cli_name(),
                repro.display(),
                inputs.join(",")
            ));
            text.push_str(&render_circuit(&failure.circuit));
            std::fs::write(repro, text)
                .map_err(|e| format!("cannot write `{}`: {e}", repro.display()))?;
            eprintln!(
                "fuzz: trial {} mismatched; reproducer written to {}",
                failure.trial,
                repro.display()
            );
            Ok(ExitCode::from(1))
        }
    }
}
