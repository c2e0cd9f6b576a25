//! `diffcover`: classify expressions, build and verify maps, assemble the
//! covering map, and run the minimum-image experiment.
//!
//! Every run prints (or writes with `--out`) one JSON report. Exit codes:
//! 0 pass, 1 a check failed, 2 infeasible or out of budget, 3 usage error.

mod sidecar;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffcover::assemble::{self, AssembleConfig, Mode};
use diffcover::cert::Certificate;
use diffcover::construct::{construct, ConstructConfig};
use diffcover::expr::{build_graph, classify, parse, Expression};
use diffcover::maps::MapSet;
use diffcover::verify::{image_exhaustive, image_sampled, min_image_experiment};
use diffcover::Error;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const FORMAT: &str = "diffcover-report/1";

#[derive(Parser, Debug)]
#[command(name = "diffcover", version, about = "Small image maps for quadratic expressions over Z_q")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Canonical form, quadratic graph and case of an expression.
    Classify {
        #[arg(long)]
        expr: String,
    },
    /// Build maps for one expression and check them against their certificate.
    Construct(ConstructArgs),
    /// Re-check a report written by `construct --out`.
    Verify {
        /// Report file holding the artifact.
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, value_enum, default_value_t = CheckMode::Exhaustive)]
        mode: CheckMode,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Assemble the map for the family l·x² + k·x and check witnesses.
    Assemble(AssembleArgs),
    /// Coordinates, case counts and feasibility without building anything.
    Estimate {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Smallest |{α(x)·y + β(y)·x}| over all maps on Z_p × Z_q.
    Experiment {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        q: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum CheckMode {
    Exhaustive,
    Sampled,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite an existing `--out` file.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long)]
    expr: String,
    /// Explicit primes, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "prime_window")]
    primes: Option<Vec<u64>>,
    /// Prime search window lo:hi.
    #[arg(long, value_parser = parse_window)]
    prime_window: Option<(u64, u64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = CheckMode::Exhaustive)]
    mode: CheckMode,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 100_000_000)]
    budget: u64,
    #[arg(long, default_value_t = 64)]
    max_retries: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Base primes for the one-variable linear expressions.
    #[arg(long, value_delimiter = ',')]
    primes: Option<Vec<u64>>,
}

#[derive(Args, Debug)]
struct AssembleArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Refuse to build unless every stage meets the bounds.
    #[arg(long, conflicts_with = "relaxed")]
    strict: bool,
    /// Build what is buildable and report the density reached (default).
    #[arg(long)]
    relaxed: bool,
    /// Random difference witnesses and sum elements to check.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    /// Check every difference witness when q is at most this.
    #[arg(long, default_value_t = 1_000_000)]
    exhaustive_limit: u64,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_window(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: u64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: u64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if lo >= hi {
        return Err(format!("empty window {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Why a run did not pass.
#[derive(Debug)]
enum Failure {
    Check(String),
    Infeasible(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Usage(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Check(_) => "check_failed",
            Failure::Infeasible(_) => "infeasible",
            Failure::Usage(_) => "usage",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Infeasible(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if let Error::Budget(_) = e {
            return Failure::Infeasible(format!("{msg}; raise --budget or use --mode sampled"));
        }
        match e {
            Error::Violation(_) | Error::ModulusMismatch | Error::NotInvertible(_) => Failure::Check(msg),
            Error::Infeasible(_) | Error::WindowExhausted(_) | Error::RetriesExhausted { .. } | Error::Budget(_) | Error::Unsupported(_) => {
                Failure::Infeasible(msg)
            }
            Error::Parse { .. } | Error::NotPrime(_) | Error::RepeatedPrime(_) | Error::PrimeTooSmall { .. } | Error::Precondition(_) => {
                Failure::Usage(msg)
            }
        }
    }
}

/// Accumulates the fixed report sections.
struct Report {
    command: &'static str,
    config: Value,
    modulus: Value,
    expressions: Vec<Value>,
    certificates: Vec<Value>,
    image_reports: Vec<Value>,
    density_bound: Value,
    extra: Map<String, Value>,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(command: &'static str, config: impl Serialize) -> Self {
        Report {
            command,
            config: to_value(config),
            modulus: Value::Null,
            expressions: Vec::new(),
            certificates: Vec::new(),
            image_reports: Vec::new(),
            density_bound: Value::Null,
            extra: Map::new(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool) {
        self.checks.push((name.to_string(), ok));
    }

    fn first_failed(&self) -> Option<&str> {
        self.checks.iter().find(|c| !c.1).map(|c| c.0.as_str())
    }

    fn finish(self, failure: Option<&Failure>, wall_ms: f64) -> Value {
        let mut image_reports = Value::Array(self.image_reports);
        let inner_ms = strip_timing(&mut image_reports);
        let mut doc = json!({
            "format": FORMAT,
            "command": self.command,
            "config": self.config,
            "modulus": self.modulus,
            "expressions": self.expressions,
            "certificates": self.certificates,
            "image_reports": image_reports,
            "density_bound": self.density_bound,
            "checks": self.checks.iter().map(|(n, ok)| json!({ "name": n, "pass": ok })).collect::<Vec<_>>(),
            "pass": failure.is_none(),
            "failure": failure.map(|f| json!({ "kind": f.kind(), "exit_code": f.code(), "message": f.message() })),
            "timing": { "wall_ms": wall_ms, "image_ms": inner_ms },
        });
        if let Value::Object(m) = &mut doc {
            m.extend(self.extra);
        }
        doc
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Removes every "wall_ms" key so equal runs give equal reports; returns
/// their sum.
fn strip_timing(v: &mut Value) -> f64 {
    match v {
        Value::Object(m) => {
            let own = m.remove("wall_ms").and_then(|x| x.as_f64()).unwrap_or(0.0);
            m.values_mut().map(strip_timing).fold(own, |a, b| a + b)
        }
        Value::Array(a) => a.iter_mut().map(strip_timing).fold(0.0, |a, b| a + b),
        _ => 0.0,
    }
}

fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    let shift = den.bits().saturating_sub(60);
    let (n, d) = (num >> shift, den >> shift);
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}

fn density_of(cert: &Certificate, maps: &MapSet) -> Value {
    let q = maps.modulus.q();
    json!({
        "claimed_size": cert.claimed_size.to_string(),
        "q": q.to_string(),
        "ratio": ratio_f64(&cert.claimed_size, &q),
    })
}

fn expression_entry(e: &Expression) -> Result<Value, Failure> {
    let cls = classify(e)?;
    Ok(json!({
        "input": e.to_string(),
        "normalized": cls.normalized.to_string(),
        "graph": build_graph(&cls.normalized).describe(),
        "tag": cls.tag.name(),
        "handler": cls.tag.handler(),
        "transform": to_value(&cls.transform),
    }))
}

/// How an image is checked against its certificate.
struct Check {
    mode: CheckMode,
    samples: u64,
    seed: u64,
    budget: u64,
}

fn check_image(r: &mut Report, e: &Expression, maps: &MapSet, cert: &Certificate, how: Check) -> Result<(), Failure> {
    let img = match how.mode {
        CheckMode::Exhaustive => image_exhaustive(e, maps, Some(cert), how.budget)?,
        CheckMode::Sampled => image_sampled(e, maps, cert, how.samples, how.seed)?,
    };
    r.check("image within certificate", img.pass);
    if let Some(n) = &img.image_size {
        let within = n.parse::<BigUint>().map(|n| n <= cert.claimed_size).unwrap_or(false);
        r.check("image size within claim", within);
    }
    r.image_reports.push(to_value(&img));
    Ok(())
}

fn run_classify(r: &mut Report, text: &str) -> Result<(), Failure> {
    let e = parse(text)?;
    r.expressions.push(expression_entry(&e)?);
    Ok(())
}

#[derive(Serialize)]
struct ConstructRun<'a> {
    expression: &'a str,
    construct: ConstructConfig,
    mode: CheckMode,
    samples: u64,
}

fn construct_config(a: &ConstructArgs) -> ConstructConfig {
    let mut cfg = ConstructConfig {
        epsilon: a.epsilon,
        primes: a.primes.clone(),
        seed: a.seed,
        max_retries: a.max_retries,
        budget: a.budget,
        ..Default::default()
    };
    if let Some(w) = a.prime_window {
        cfg.window = w;
    }
    cfg
}

fn run_construct(r: &mut Report, a: &ConstructArgs) -> Result<(), Failure> {
    let e = parse(&a.expr)?;
    r.expressions.push(expression_entry(&e)?);
    let cfg = construct_config(a);
    let c = construct(&e, &cfg)?;
    r.modulus = to_value(&*c.maps.modulus);
    r.certificates.push(json!({ "kind": c.certificate.kind_name(), "claimed_size": c.certificate.claimed_size.to_string() }));
    r.density_bound = density_of(&c.certificate, &c.maps);
    r.extra.insert("details".into(), Value::Object(c.details.clone()));
    r.extra.insert("artifact".into(), json!({ "expression": e.to_string(), "maps": to_value(&c.maps), "certificate": to_value(&c.certificate) }));
    check_image(r, &e, &c.maps, &c.certificate, Check { mode: a.mode, samples: a.samples, seed: a.seed, budget: a.budget })
}

#[derive(Serialize)]
struct VerifyRun<'a> {
    artifact: &'a Path,
    mode: CheckMode,
    samples: u64,
    seed: u64,
    budget: u64,
}

fn run_verify(r: &mut Report, v: &VerifyRun) -> Result<(), Failure> {
    let doc = sidecar::read(v.artifact).map_err(Failure::Usage)?;
    let art = doc.get("artifact").ok_or_else(|| Failure::Usage(format!("{}: no artifact section", v.artifact.display())))?;
    let text = art["expression"].as_str().ok_or_else(|| Failure::Usage("artifact has no expression".into()))?;
    let e = parse(text)?;
    let maps: MapSet = serde_json::from_value(art["maps"].clone()).map_err(|err| Failure::Usage(format!("maps: {err}")))?;
    let cert: Certificate = serde_json::from_value(art["certificate"].clone()).map_err(|err| Failure::Usage(format!("certificate: {err}")))?;
    if maps.vars.len() != e.num_vars() {
        return Err(Failure::Usage(format!("{} maps for {} variables", maps.vars.len(), e.num_vars())));
    }
    r.expressions.push(expression_entry(&e)?);
    r.modulus = to_value(&*maps.modulus);
    r.certificates.push(json!({ "kind": cert.kind_name(), "claimed_size": cert.claimed_size.to_string() }));
    r.density_bound = density_of(&cert, &maps);
    check_image(r, &e, &maps, &cert, Check { mode: v.mode, samples: v.samples, seed: v.seed, budget: v.budget })
}

#[derive(Serialize)]
struct AssembleRun {
    l: usize,
    k: usize,
    epsilon: f64,
    assemble: AssembleConfig,
    samples: u64,
    exhaustive_limit: u64,
}

fn run_assemble(r: &mut Report, run: &AssembleRun) -> Result<(), Failure> {
    let plan = assemble::plan(run.l, run.k, run.epsilon)?;
    r.expressions = plan.expressions.iter().map(|e| json!(e.to_string())).collect();
    let est = assemble::estimate(&plan, run.assemble.base_primes.as_deref(), &run.assemble.limits);
    r.extra.insert("estimate".into(), to_value(&est));
    let b = assemble::assemble(&plan, &run.assemble)?;
    r.modulus = to_value(&*b.phi.modulus);
    r.certificates = b
        .phi
        .stage1
        .iter()
        .map(|s| json!({ "expression": s.expr, "coords": [s.coords.start, s.coords.end], "kind": s.certificate.kind_name(), "claimed_size": s.certificate.claimed_size.to_string() }))
        .collect();
    r.density_bound = to_value(&b.density);
    r.check("density within epsilon", b.density.within_epsilon);
    r.extra.insert("phi".into(), to_value(&b.phi));
    let mut rng = ChaCha8Rng::seed_from_u64(run.assemble.seed);
    let cover = assemble::witness_sweep(&b, run.exhaustive_limit, run.samples, &mut rng);
    r.check("difference witnesses", cover.pass);
    r.image_reports.push(json!({ "kind": "difference_witnesses", "report": to_value(&cover) }));
    if plan.l == 0 {
        let mut uncertified = 0u64;
        let mut first = None;
        for _ in 0..run.samples {
            let s = assemble::sample_sum_element(&b, &mut rng)?;
            if !s.certified {
                uncertified += 1;
                first.get_or_insert(s);
            }
        }
        r.check("sum elements certified", uncertified == 0);
        r.image_reports.push(json!({ "kind": "sum_elements", "samples": run.samples, "uncertified": uncertified, "witness": to_value(&first) }));
    }
    Ok(())
}

fn run_estimate(r: &mut Report, f: &FamilyArgs) -> Result<(), Failure> {
    let plan = assemble::plan(f.l, f.k, f.epsilon)?;
    r.expressions = plan.expressions.iter().map(|e| json!(e.to_string())).collect();
    let est = assemble::estimate(&plan, f.primes.as_deref(), &assemble::Limits::default());
    r.density_bound = json!({ "epsilon": f.epsilon, "strict_feasible": est.strict_feasible });
    r.extra.insert("estimate".into(), to_value(&est));
    Ok(())
}

fn run_experiment(r: &mut Report, p: u64, q: u64) -> Result<(), Failure> {
    let m = min_image_experiment(p, q)?;
    r.extra.insert("experiment".into(), to_value(&m));
    Ok(())
}

/// Refuses to clobber an existing report unless forced.
fn guard_out(o: &OutArgs) -> Result<(), Failure> {
    match &o.out {
        Some(p) if p.exists() && !o.force => Err(Failure::Usage(format!("{} exists; pass --force to overwrite", p.display()))),
        _ => Ok(()),
    }
}

fn emit(doc: Value, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(p) => {
            let doc = sidecar::split_and_write(doc, p)?;
            eprintln!("{}: pass = {}", p.display(), doc["pass"]);
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &doc)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let t0 = Instant::now();
    let none = OutArgs { out: None, force: false };
    let (mut report, out, result) = match &cli.cmd {
        Cmd::Classify { expr } => {
            let mut r = Report::new("classify", json!({ "expression": expr }));
            let res = run_classify(&mut r, expr);
            (r, none, res)
        }
        Cmd::Construct(a) => {
            let run = ConstructRun { expression: &a.expr, construct: construct_config(a), mode: a.mode, samples: a.samples };
            let mut r = Report::new("construct", &run);
            let res = guard_out(&a.out).and_then(|_| run_construct(&mut r, a));
            (r, a.out.clone(), res)
        }
        Cmd::Verify { artifact, mode, samples, seed, budget, out } => {
            let run = VerifyRun { artifact, mode: *mode, samples: *samples, seed: *seed, budget: *budget };
            let mut r = Report::new("verify", &run);
            let res = guard_out(out).and_then(|_| run_verify(&mut r, &run));
            (r, out.clone(), res)
        }
        Cmd::Assemble(a) => {
            let f = &a.family;
            let cfg = AssembleConfig {
                base_primes: f.primes.clone(),
                mode: if a.strict { Mode::Strict } else { Mode::Relaxed },
                seed: a.seed,
                ..Default::default()
            };
            let run = AssembleRun { l: f.l, k: f.k, epsilon: f.epsilon, assemble: cfg, samples: a.samples, exhaustive_limit: a.exhaustive_limit };
            let mut r = Report::new("assemble", &run);
            let res = guard_out(&a.out).and_then(|_| run_assemble(&mut r, &run));
            (r, a.out.clone(), res)
        }
        Cmd::Estimate { family, out } => {
            let mut r = Report::new("estimate", json!({ "l": family.l, "k": family.k, "epsilon": family.epsilon, "primes": family.primes }));
            let res = guard_out(out).and_then(|_| run_estimate(&mut r, family));
            (r, out.clone(), res)
        }
        Cmd::Experiment { p, q, out } => {
            let mut r = Report::new("experiment", json!({ "p": p, "q": q }));
            let res = guard_out(out).and_then(|_| run_experiment(&mut r, *p, *q));
            (r, out.clone(), res)
        }
    };
    let failure = match result {
        Err(f) => Some(f),
        Ok(()) => report.first_failed().map(|n| Failure::Check(format!("{n} failed"))),
    };
    if let Some(f) = &failure {
        eprintln!("diffcover: {}", f.message());
    }
    // a usage failure on --out must not touch the existing file
    let target = match &failure {
        Some(Failure::Usage(_)) => None,
        _ => out.out.as_deref(),
    };
    report.extra.retain(|_, v| !v.is_null());
    let doc = report.finish(failure.as_ref(), t0.elapsed().as_secs_f64() * 1e3);
    if let Err(e) = emit(doc, target).or_else(|e| if e.kind() == std::io::ErrorKind::BrokenPipe { Ok(()) } else { Err(e) }) {
        eprintln!("diffcover: writing report: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(failure.map_or(0, |f| f.code()))
}
