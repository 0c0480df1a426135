use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use hubbard_scatter::channel::channel_transmission;
use hubbard_scatter::evolve::{scaling_study, LineCollision, SPIN_DOWN, SPIN_UP};
use hubbard_scatter::gadget::{simulate_gate_G, GadgetConfig};
use hubbard_scatter::graph::parse_graph_file;
use hubbard_scatter::logic::{
    cnot, encode_bits, logical_unitary, majority_vote_error, measure_third_spin, ExchangeSchedule, GateSource,
};
use hubbard_scatter::phases::{channel_phase, phase_curve, tj_reflection, CurveModel, PhaseGate, RelativeKinematics};
use hubbard_scatter::scatter::{packet_routing, s_matrix, verify_switch, PacketShape};
use hubbard_scatter::switch::{catalog_switch, CERTIFICATION_TOLERANCE, DEFAULT_SWITCH};
use hubbard_scatter::synth::{golden_alpha, plan_power_with_budget, suitability, tj_coupling_for_alpha, DEFAULT_BUDGET};
use hubbard_scatter::{Coupled, Error, ModelParams, Momentum, ScatterGraph};

#[derive(Parser, Serialize)]
#[command(name = "hscat", version, about = "Wave-packet scattering experiments for the Hubbard and t-J models")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result here (atomically) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Certify a momentum switch at |k| = pi/4 (1 <-> 3) and pi/2 (2 <-> 3).
    SwitchVerify(SwitchVerifyArgs),
    /// Single-particle S-matrix of a graph, optionally with packet routing.
    #[command(name = "scatter-1p")]
    Scatter1p(Scatter1pArgs),
    /// Two-packet collision on a line with phase extraction.
    #[command(name = "scatter-2p")]
    Scatter2p(Scatter2pArgs),
    /// Closed-form singlet phase over a coupling grid (CSV).
    PhaseCurve(PhaseCurveArgs),
    /// Phase error and overlap deficit over packet lengths (CSV).
    ScalingStudy(ScalingArgs),
    /// Estimate the two-collision gate G from the four-switch gadget.
    #[command(name = "simulate-G")]
    SimulateG(SimulateArgs),
    /// Plan the number of G applications for a target phase.
    Synth(SynthArgs),
    /// Logical gate of an exchange schedule against CNOT.
    CnotSim(CnotArgs),
    /// Third-spin measurement statistics of a logical state.
    Measure(MeasureArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Tj,
    Hubbard,
    Xxz,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Shape {
    Square,
    Gaussian,
}

impl From<Shape> for PacketShape {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Square => PacketShape::Square,
            Shape::Gaussian => PacketShape::Gaussian,
        }
    }
}

#[derive(Args, Serialize)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "tj")]
    model: ModelKind,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long, default_value_t = 4.0)]
    u: f64,
    #[arg(long, default_value_t = 1.0)]
    jx: f64,
    #[arg(long, default_value_t = 1.0)]
    jz: f64,
}

impl ModelArgs {
    fn params(&self) -> ModelParams {
        match self.model {
            ModelKind::Tj => ModelParams::tj(self.t, self.j),
            ModelKind::Hubbard => ModelParams::hubbard(self.t, self.u),
            ModelKind::Xxz => ModelParams::xxz(self.t, self.jx, self.jz),
        }
    }
}

/// Head-on kinematics: `k1` moves right, `k2` is the speed of the packet
/// moving left (its momentum is `-k2`). Radians.
#[derive(Args, Serialize)]
struct KinArgs {
    #[arg(long)]
    k1: f64,
    #[arg(long)]
    k2: f64,
}

impl KinArgs {
    fn kinematics(&self) -> Result<RelativeKinematics, Error> {
        RelativeKinematics::head_on(self.k1, self.k2)
    }
}

#[derive(Args, Serialize)]
struct GraphArgs {
    /// Graph file (TOML: vertices, edges, terminals).
    #[arg(long, conflicts_with = "catalog")]
    graph: Option<PathBuf>,
    /// Catalog switch name.
    #[arg(long)]
    catalog: Option<String>,
}

#[derive(Args, Serialize)]
struct SwitchVerifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = CERTIFICATION_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args, Serialize)]
struct Scatter1pArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    k: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Also send a packet of this length in and report where it ends up.
    #[arg(long)]
    packet_length: Option<usize>,
    /// Zero-based terminal position the packet enters from.
    #[arg(long, default_value_t = 0)]
    input: usize,
    #[arg(long, value_enum, default_value = "square")]
    shape: Shape,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SpinPair {
    Ud,
    Du,
    Uu,
    Dd,
}

#[derive(Args, Serialize)]
struct Scatter2pArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    kin: KinArgs,
    #[arg(long, default_value_t = 32)]
    length: usize,
    #[arg(long, value_enum, default_value = "square")]
    shape: Shape,
    /// Spins of the left and right packets.
    #[arg(long, value_enum, default_value = "ud")]
    spins: SpinPair,
    #[arg(long, default_value_t = 512)]
    min_sites: usize,
    /// Also measure singlet-channel transmission.
    #[arg(long)]
    transmission: bool,
}

#[derive(Args, Serialize)]
struct PhaseCurveArgs {
    #[arg(long, value_enum, default_value = "tj")]
    model: ModelKind,
    #[command(flatten)]
    kin: KinArgs,
    /// `start:stop:count`, inclusive of both ends.
    #[arg(long)]
    grid: String,
    /// XXZ only: `Jz = anisotropy * J` with `Jx = J`.
    #[arg(long, default_value_t = 1.0)]
    anisotropy: f64,
}

#[derive(Args, Serialize)]
struct ScalingArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    kin: KinArgs,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    lengths: Vec<usize>,
    #[arg(long, value_enum, default_value = "square")]
    shape: Shape,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 16)]
    length: usize,
    #[arg(long, value_enum, default_value = "square")]
    shape: Shape,
    /// Feed the fast packet into the slow input and vice versa.
    #[arg(long)]
    swap_momenta: bool,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Collision phase theta (G advances the singlet by 2 theta).
    #[arg(long)]
    theta: f64,
    #[arg(long = "gamma-t", allow_hyphen_values = true)]
    gamma_t: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Suitability window `[1/(c eps), c/eps]`.
    #[arg(long, default_value_t = 10.0)]
    spread: f64,
}

#[derive(Args, Serialize)]
struct CnotArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Per-step phase precision for quantised pulses.
    #[arg(long)]
    epsilon: f64,
    /// Collision phase theta; defaults to the t-J value at (pi/4, pi/2)
    /// with theta/pi at the inverse golden ratio.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Logical {
    #[value(name = "0")]
    #[serde(rename = "0")]
    Zero,
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
}

#[derive(Args, Serialize)]
struct MeasureArgs {
    #[arg(long, value_enum)]
    state: Logical,
    #[arg(long, default_value_t = 1_000_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repetitions of the whole computation for majority voting.
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
}

enum Failure {
    Config(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

enum Body {
    Json(Value),
    Csv { columns: Vec<&'static str>, rows: Vec<Vec<String>> },
}

struct Output {
    body: Body,
    summary: Option<Value>,
    /// Numerical verdict to report through the exit code after writing.
    failed: Option<String>,
}

impl Output {
    fn json(v: impl Serialize) -> Self {
        Output { body: Body::Json(serde_json::to_value(v).expect("serialisable")), summary: None, failed: None }
    }
}

struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        // git object hashing (SHA-256 object format): "blob <len>\0<content>"
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(&bytes);
        let digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.0.insert(path.display().to_string(), digest);
        String::from_utf8(bytes).map_err(|_| Failure::Config(format!("{}: not UTF-8", path.display())))
    }
}

fn load_graph(args: &GraphArgs, inputs: &mut Inputs) -> Result<ScatterGraph, Failure> {
    if let Some(path) = &args.graph {
        let text = inputs.read(path)?;
        return parse_graph_file(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())));
    }
    Ok(catalog_switch(args.catalog.as_deref().unwrap_or(DEFAULT_SWITCH))?)
}

fn c(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Config(format!("--grid `{spec}`: expected start:stop:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect())
}

fn golden_theta() -> Result<f64, Error> {
    let kin = RelativeKinematics::head_on(PI / 4.0, PI / 2.0)?;
    let j = tj_coupling_for_alpha(&kin, golden_alpha(), 0.5, 3.0)?;
    Ok(tj_reflection(&kin, j)?.0.arg())
}

fn run(cmd: &Command, inputs: &mut Inputs) -> Result<Output, Failure> {
    match cmd {
        Command::SwitchVerify(a) => {
            let g = load_graph(&a.graph, inputs)?;
            let r = verify_switch(&g, Momentum::new(PI / 4.0), Momentum::new(PI / 2.0), a.tolerance)?;
            let failed = (!r.passed).then(|| format!("switch failed certification: {}", r.note.clone().unwrap_or_default()));
            Ok(Output { failed, ..Output::json(r) })
        }
        Command::Scatter1p(a) => {
            let g = load_graph(&a.graph, inputs)?;
            let k = Momentum::new(a.k);
            let s = s_matrix(&g, k, a.t)?;
            let entries: Vec<Vec<Value>> =
                (0..s.terminals()).map(|o| (0..s.terminals()).map(|i| c(s.get(o, i))).collect()).collect();
            let routing = match a.packet_length {
                Some(len) => Some(packet_routing(&g, k, a.input, len, a.shape.into())?),
                None => None,
            };
            Ok(Output::json(json!({
                "momentum": k.value(),
                "energy": k.energy(a.t),
                "entries": entries,
                "unitarity_defect": s.unitarity_defect(),
                "routing": routing,
            })))
        }
        Command::Scatter2p(a) => {
            let params = a.model.params();
            let kin = a.kin.kinematics()?;
            let mut run = LineCollision::new(params, kin, a.length);
            run.shape = a.shape.into();
            run.min_sites = a.min_sites;
            run.spins = match a.spins {
                SpinPair::Ud => (SPIN_UP, SPIN_DOWN),
                SpinPair::Du => (SPIN_DOWN, SPIN_UP),
                SpinPair::Uu => (SPIN_UP, SPIN_UP),
                SpinPair::Dd => (SPIN_DOWN, SPIN_DOWN),
            };
            let out = run.run()?;
            let mut analytic = serde_json::Map::new();
            for ch in Coupled::ALL {
                analytic.insert(ch.label().into(), json!(channel_phase(&params, &kin, ch).ok()));
            }
            let transmission = if a.transmission { Some(channel_transmission(&run, Coupled::Singlet)?) } else { None };
            Ok(Output {
                summary: Some(json!({
                    "phase_reference": "free fermions with the same statistics; hard-core and interaction phases are measured relative to it"
                })),
                ..Output::json(json!({ "collision": out, "analytic_phase": analytic, "singlet_transmission": transmission }))
            })
        }
        Command::PhaseCurve(a) => {
            let grid = parse_grid(&a.grid)?;
            let kin = a.kin.kinematics()?;
            let model = match a.model {
                ModelKind::Tj => CurveModel::TJ,
                ModelKind::Hubbard => CurveModel::Hubbard,
                ModelKind::Xxz => CurveModel::XXZ { anisotropy: a.anisotropy },
            };
            let rows = phase_curve(model, &kin, &grid)?;
            let rows = rows
                .iter()
                .map(|r| {
                    vec![
                        r.coupling.to_string(),
                        r.theta.to_string(),
                        r.theta_unwrapped.to_string(),
                        r.amplitude.re.to_string(),
                        r.amplitude.im.to_string(),
                        r.theta_t0_unwrapped.map_or(String::new(), |v| v.to_string()),
                        r.singular.to_string(),
                    ]
                })
                .collect();
            Ok(Output {
                body: Body::Csv {
                    columns: vec!["coupling", "theta", "theta_unwrapped", "amplitude_re", "amplitude_im", "theta_t0_unwrapped", "singular"],
                    rows,
                },
                summary: None,
                failed: None,
            })
        }
        Command::ScalingStudy(a) => {
            let st = scaling_study(a.model.params(), a.kin.kinematics()?, &a.lengths, a.shape.into())?;
            let rows = st
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.length.to_string(),
                        r.sites.to_string(),
                        r.theta_measured.to_string(),
                        r.theta_analytic.to_string(),
                        r.phase_error.to_string(),
                        r.overlap_deficit.to_string(),
                    ]
                })
                .collect();
            Ok(Output {
                body: Body::Csv {
                    columns: vec!["length", "sites", "theta_measured", "theta_analytic", "phase_error", "overlap_deficit"],
                    rows,
                },
                summary: Some(json!({
                    "deficit_decreasing": st.deficit_decreasing,
                    "error_decreasing": st.error_decreasing,
                    "deficit_slope": st.deficit_slope,
                })),
                failed: None,
            })
        }
        Command::SimulateG(a) => {
            let sw = load_graph(&a.graph, inputs)?;
            let mut cfg = GadgetConfig::new(a.model.params(), a.length);
            cfg.shape = a.shape.into();
            cfg.swap_momenta = a.swap_momenta;
            Ok(Output::json(simulate_gate_G(&sw, &cfg)?))
        }
        Command::Synth(a) => {
            let plan = plan_power_with_budget(a.theta, a.gamma_t, a.epsilon, a.budget)?;
            let suit = suitability(a.theta, a.epsilon, a.spread)?;
            Ok(Output::json(json!({
                "k": plan.k,
                "achieved_error": plan.achieved_error,
                "convergents_used": plan.convergents_used,
                "plan": plan,
                "suitability": suit,
            })))
        }
        Command::CnotSim(a) => {
            let text = inputs.read(&a.schedule)?;
            let schedule = ExchangeSchedule::parse(&text)?;
            if schedule.metadata.logical_qubits != 2 {
                return Err(Failure::Config("a CNOT schedule acts on 2 logical qubits".into()));
            }
            let theta = match a.theta {
                Some(t) => t,
                None => golden_theta()?,
            };
            let gate = PhaseGate::singlet(2.0 * theta);
            let target = cnot();
            let exact = logical_unitary(&schedule, &GateSource::Exact)?;
            let quant = logical_unitary(&schedule, &GateSource::Powers { gate, epsilon: a.epsilon })?;
            Ok(Output::json(json!({
                "max_element_error": quant.max_element_error(&target),
                "leakage": quant.leakage,
                "per_step_k": quant.steps.iter().map(|s| s.k).collect::<Vec<_>>(),
                "exact_error": exact.max_element_error(&target),
                "exact_leakage": exact.leakage,
                "theta": theta,
                "steps": quant.steps,
            })))
        }
        Command::Measure(a) => {
            let state = encode_bits(&[matches!(a.state, Logical::One)])?;
            let stats = measure_third_spin(&state, a.shots, a.seed)?;
            // Reading "down" as 1: a |1_L> run is wrong with probability 1 - p_down.
            let single_error = if matches!(a.state, Logical::One) { 1.0 - stats.p_down } else { stats.p_down };
            Ok(Output::json(json!({
                "stats": stats,
                "single_run_error": single_error,
                "repetitions": a.repetitions,
                "majority_vote_error": majority_vote_error(single_error, a.repetitions),
            })))
        }
    }
}

fn render(cli: &Cli, out: &Output, inputs: &Inputs) -> String {
    let name = serde_json::to_value(&cli.command)
        .ok()
        .and_then(|v| v.as_object().and_then(|o| o.keys().next().cloned()))
        .unwrap_or_default();
    let mut meta = json!({
        "tool": "hscat",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": &cli.command,
        "inputs": &inputs.0,
    });
    if let Some(s) = &out.summary {
        meta["summary"] = s.clone();
    }
    match &out.body {
        Body::Json(v) => {
            let mut s = serde_json::to_string_pretty(&json!({ "metadata": meta, "result": v })).expect("json");
            s.push('\n');
            s
        }
        Body::Csv { columns, rows } => {
            let mut s = String::new();
            writeln!(s, "# {}", serde_json::to_string(&meta).expect("json")).unwrap();
            writeln!(s, "{}", columns.join(",")).unwrap();
            for r in rows {
                writeln!(s, "{}", r.join(",")).unwrap();
            }
            s
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let mut inputs = Inputs(BTreeMap::new());
    let out = match run(&cli.command, &mut inputs) {
        Ok(o) => o,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            return ExitCode::from(3);
        }
    };
    let text = render(&cli, &out, &inputs);
    match &cli.out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if let Some(m) = out.failed {
        eprintln!("numerical failure: {m}");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
