//! `bellpv` command line.
//!
//! Every output starts with a header line holding the fully resolved command,
//! so rerunning that line reproduces the output. Exit codes: 0 on success, 2
//! on configuration errors, 1 on runtime failures.

mod behavior_file;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use behavior_file::{format_behavior, parse_behavior};

use crate::bounds::{pv_bound_closed, pv_bound_geometric_mc, pv_bound_quadrature, BoundChoice, BoundResult};
use crate::error::{Error, Result};
use crate::inequalities::{
    cg3_eta_critical, chsh_eta_value, chsh_symmetric_critical, eval_cg3, ic_critical_search, ic_maximize,
    optimal_rotation, rotated_ghz_behavior, rotated_ghz_quantum_terms, IcSearchOptions, NamedExpression, IC_LOCAL_BOUND,
};
use crate::localpolytope::{build_lp, check_local_model, extract_inequality, Verdict};
use crate::montecarlo::{
    compare_models, critical_eta_estimate, estimate_pv, relative_growth, sig6, sweep_eta, write_csv, CriticalOptions,
    EstimateRecord, ModelAgreement, RunConfig, Sidedness,
};
use crate::parallel::Execution;
use crate::quantum::{DetectionKind, PureState};

/// Environment variable supplying the default `--workers`.
pub const WORKERS_ENV: &str = "BELLPV_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "bellpv", version, about = "Probability of Bell violation with random settings and lossy detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the probability of violation at one efficiency.
    Estimate(EstimateArgs),
    /// Estimate over a grid of symmetric efficiencies.
    Sweep(EstimateArgs),
    /// Two-qubit lower bounds on the probability of violation.
    Bound(BoundArgs),
    /// Critical efficiency from per-frame thresholds.
    Critical(CriticalArgs),
    /// Evaluate a named Bell expression.
    Ineq(IneqArgs),
    /// Relative growth of the violation probability with the settings count.
    Growth(GrowthArgs),
    /// Decide locality of a behavior file and extract a violated inequality.
    Certify(CertifyArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value = "singlet")]
    state: String,
    /// Checked against the state's qubit count.
    #[arg(long)]
    parties: Option<usize>,
    /// One count for all parties or a comma list.
    #[arg(long, default_value = "2")]
    settings: String,
    #[arg(long, default_value = "binning")]
    model: String,
    #[arg(long, conflicts_with_all = ["eta_grid", "eta_asym"])]
    eta: Option<f64>,
    /// `lo:hi:step`
    #[arg(long, conflicts_with = "eta_asym")]
    eta_grid: Option<String>,
    /// Per-party efficiencies, comma separated.
    #[arg(long)]
    eta_asym: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Thread count; defaults to $BELLPV_WORKERS, then all cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// `one` or `two`.
    #[arg(long, default_value = "one")]
    sided: String,
    /// Progress messages on stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Run both detection models on the same frames and report agreement.
    #[arg(long)]
    compare_models: bool,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "closed")]
    method: String,
    /// `sym` reads `--eta` as (eta, eta), `asym` as (1, eta).
    #[arg(long, default_value = "sym")]
    case: String,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10_000)]
    frames: u64,
    #[arg(long, default_value_t = 1e-4)]
    bisect_tol: f64,
    #[arg(long, default_value_t = 4)]
    refine_frames: usize,
    #[arg(long, default_value_t = 6000)]
    refine_steps: usize,
}

#[derive(Args, Debug)]
struct IneqArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    name: String,
    #[arg(long)]
    report_critical: bool,
    /// GHZ rotation phase for the three-party expressions.
    #[arg(long)]
    phi: Option<f64>,
    /// Quantum CHSH value for `chsh-eta`.
    #[arg(long)]
    q: Option<f64>,
    /// Optimizer starts for `ic`.
    #[arg(long, default_value_t = 64)]
    starts: usize,
}

#[derive(Args, Debug)]
struct GrowthArgs {
    #[command(flatten)]
    common: Common,
    /// Settings counts to compare, ascending.
    #[arg(long, default_value = "2,3,4")]
    m_list: String,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    /// Behavior file (`N m1..mN d` header, one row per setting tuple).
    file: PathBuf,
    /// Also write the phase-one LP in CPLEX LP format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

/// Flags of the resolved command, in echo order.
struct Echo {
    parts: Vec<String>,
}

impl Echo {
    fn new(cmd: &str) -> Self {
        Self { parts: vec!["bellpv".into(), cmd.into()] }
    }

    fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.parts.push(format!("--{name}"));
        self.parts.push(value.to_string());
        self
    }

    fn switch(&mut self, name: &str, on: bool) -> &mut Self {
        if on {
            self.parts.push(format!("--{name}"));
        }
        self
    }

    fn line(&self) -> String {
        self.parts.join(" ")
    }
}

struct Ctx {
    format: Format,
    out: Box<dyn Write>,
}

impl Ctx {
    fn emit_csv(&mut self, echo: &Echo, body: &str) -> Result<()> {
        writeln!(self.out, "# {}", echo.line())?;
        self.out.write_all(body.as_bytes())?;
        Ok(())
    }

    fn emit_json(&mut self, echo: &Echo, command: &str, payload: Value) -> Result<()> {
        let v = json!({ "command": command, "echo": echo.line(), "result": payload });
        writeln!(self.out, "{}", serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?)?;
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::config(flag, format!("cannot parse {t:?}"))))
        .collect()
}

/// Parses `lo:hi:step` into an ascending grid inside `[0, 1]`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::config("--eta-grid", format!("cannot parse {t:?} in {s:?}"))))
        .collect::<Result<_>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(Error::config("--eta-grid", format!("expected lo:hi:step, got {s:?}")));
    };
    if !(step > 0.0) || lo > hi || lo < 0.0 || hi > 1.0 {
        return Err(Error::config("--eta-grid", format!("need 0 <= lo <= hi <= 1 and step > 0, got {s:?}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect())
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl Common {
    fn format(&self) -> Result<Format> {
        match self.format.as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            f => Err(Error::config("--format", format!("expected csv or json, got {f:?}"))),
        }
    }

    fn state(&self) -> Result<PureState> {
        let s = PureState::from_name(&self.state).map_err(|e| Error::config("--state", e.to_string()))?;
        if let Some(p) = self.parties {
            if p != s.parties() {
                return Err(Error::config("--parties", format!("state {} has {} parties, not {p}", self.state, s.parties())));
            }
        }
        Ok(s)
    }

    fn model(&self) -> Result<DetectionKind> {
        self.model.parse()
    }

    fn settings(&self, parties: usize) -> Result<Vec<usize>> {
        let v: Vec<usize> = parse_list("--settings", &self.settings)?;
        if v.contains(&0) {
            return Err(Error::config("--settings", "setting counts must be positive"));
        }
        match v.len() {
            1 => Ok(vec![v[0]; parties]),
            n if n == parties => Ok(v),
            n => Err(Error::config("--settings", format!("{n} counts for {parties} parties"))),
        }
    }

    /// Per-party efficiencies from `--eta` or `--eta-asym` (default 1).
    fn etas(&self, parties: usize) -> Result<Vec<f64>> {
        if self.eta_grid.is_some() {
            return Err(Error::config("--eta-grid", "this command takes --eta or --eta-asym"));
        }
        let v = match (&self.eta, &self.eta_asym) {
            (Some(e), _) => vec![*e; parties],
            (None, Some(s)) => {
                let v: Vec<f64> = parse_list("--eta-asym", s)?;
                if v.len() != parties {
                    return Err(Error::config("--eta-asym", format!("{} values for {parties} parties", v.len())));
                }
                v
            }
            (None, None) => vec![1.0; parties],
        };
        if let Some(e) = v.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            let flag = if self.eta.is_some() { "--eta" } else { "--eta-asym" };
            return Err(Error::config(flag, format!("efficiency {e} outside [0, 1]")));
        }
        Ok(v)
    }

    fn sided(&self) -> Result<Sidedness> {
        self.sided.parse()
    }

    fn workers(&self) -> Result<Option<usize>> {
        if self.workers.is_some() {
            return Ok(self.workers);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::config("--workers", format!("${WORKERS_ENV}={v:?} is not a count"))),
            _ => Ok(None),
        }
    }

    fn run_config(&self) -> Result<RunConfig> {
        let state = self.state()?;
        let n = state.parties();
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::config("--confidence", "must lie in (0, 1)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("--tol", "must be positive"));
        }
        if self.samples == 0 {
            return Err(Error::config("--samples", "must be at least 1"));
        }
        Ok(RunConfig {
            state_name: self.state.clone(),
            state,
            settings: self.settings(n)?,
            model: self.model()?,
            etas: vec![1.0; n],
            samples: self.samples,
            seed: self.seed,
            tol: self.tol,
            workers: self.workers()?,
            exec: Execution::Parallel,
            confidence: self.confidence,
            sided: self.sided()?,
            progress: self.progress,
        })
    }

    fn open(&self) -> Result<Ctx> {
        let out: Box<dyn Write> = match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Ctx { format: self.format()?, out })
    }

    /// Echo of the flags shared by the sampling commands.
    fn echo_run(&self, cmd: &str, c: &RunConfig) -> Echo {
        let mut e = Echo::new(cmd);
        e.flag("state", &c.state_name)
            .flag("parties", c.parties())
            .flag("settings", fmt_list(&c.settings))
            .flag("model", c.model);
        e
    }

    fn echo_tail(&self, e: &mut Echo, c: &RunConfig) {
        e.flag("samples", c.samples)
            .flag("seed", c.seed)
            .flag("tol", format!("{:e}", c.tol))
            .flag("confidence", c.confidence)
            .flag("sided", c.sided)
            .flag("format", &self.format);
    }
}

fn echo_etas(e: &mut Echo, etas: &[f64]) {
    if etas.windows(2).all(|w| w[0] == w[1]) {
        e.flag("eta", etas[0]);
    } else {
        e.flag("eta-asym", fmt_list(etas));
    }
}

fn agreement_csv(rows: &[ModelAgreement]) -> String {
    let mut s = String::from("eta,n,agree,disagree,excluded,agreement\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.eta.iter().map(|e| sig6(*e)).collect::<Vec<_>>().join(";"),
            r.n,
            r.agree,
            r.disagree,
            r.excluded,
            sig6(r.rate())
        ));
    }
    s
}

fn records_csv(records: &[EstimateRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

fn finish_records(ctx: &mut Ctx, echo: &Echo, cmd: &str, records: &[EstimateRecord]) -> Result<()> {
    match ctx.format {
        Format::Csv => ctx.emit_csv(echo, &records_csv(records)?),
        Format::Json => ctx.emit_json(echo, cmd, to_json(&records)),
    }
}

fn finish_agreement(ctx: &mut Ctx, echo: &Echo, cmd: &str, rows: &[ModelAgreement]) -> Result<()> {
    match ctx.format {
        Format::Csv => ctx.emit_csv(echo, &agreement_csv(rows)),
        Format::Json => ctx.emit_json(echo, cmd, to_json(&rows)),
    }
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let c0 = a.common.run_config()?;
    let c = RunConfig { etas: a.common.etas(c0.parties())?, ..c0 };
    c.validate()?;
    let mut echo = a.common.echo_run("estimate", &c);
    echo_etas(&mut echo, &c.etas);
    a.common.echo_tail(&mut echo, &c);
    echo.switch("compare-models", a.compare_models);
    let mut ctx = a.common.open()?;
    if a.compare_models {
        let r = compare_models(&c)?;
        finish_agreement(&mut ctx, &echo, "estimate", &[r])
    } else {
        let r = estimate_pv(&c)?;
        finish_records(&mut ctx, &echo, "estimate", &[r])
    }
}

fn cmd_sweep(a: &EstimateArgs) -> Result<()> {
    let c = a.common.run_config()?;
    let spec = a.common.eta_grid.as_deref().ok_or_else(|| Error::config("--eta-grid", "sweep needs --eta-grid lo:hi:step"))?;
    let grid = parse_grid(spec)?;
    c.validate()?;
    let mut echo = a.common.echo_run("sweep", &c);
    echo.flag("eta-grid", spec);
    a.common.echo_tail(&mut echo, &c);
    echo.switch("compare-models", a.compare_models);
    let mut ctx = a.common.open()?;
    if a.compare_models {
        let rows = grid
            .iter()
            .enumerate()
            .map(|(i, &eta)| {
                let ci = RunConfig { seed: crate::montecarlo::sweep_point_seed(c.seed, i), ..c.with_eta(eta) };
                compare_models(&ci)
            })
            .collect::<Result<Vec<_>>>()?;
        finish_agreement(&mut ctx, &echo, "sweep", &rows)
    } else {
        let r = sweep_eta(&c, &grid)?;
        finish_records(&mut ctx, &echo, "sweep", &r)
    }
}

fn cmd_bound(a: &BoundArgs) -> Result<()> {
    let method: BoundChoice = a.method.parse()?;
    let pair = |eta: f64| -> Result<(f64, f64)> {
        match a.case.as_str() {
            "sym" => Ok((eta, eta)),
            "asym" => Ok((1.0, eta)),
            c => Err(Error::config("--case", format!("expected sym or asym, got {c:?}"))),
        }
    };
    let cm = &a.common;
    let mut echo = Echo::new("bound");
    echo.flag("method", &a.method);
    let pairs: Vec<(f64, f64)> = if let Some(g) = &cm.eta_grid {
        echo.flag("case", &a.case).flag("eta-grid", g);
        parse_grid(g)?.into_iter().map(pair).collect::<Result<_>>()?
    } else if let Some(s) = &cm.eta_asym {
        let v: Vec<f64> = parse_list("--eta-asym", s)?;
        if v.len() != 2 {
            return Err(Error::config("--eta-asym", "bounds take exactly two efficiencies"));
        }
        echo.flag("eta-asym", fmt_list(&v));
        vec![(v[0], v[1])]
    } else {
        let eta = cm.eta.unwrap_or(1.0);
        echo.flag("case", &a.case).flag("eta", eta);
        vec![pair(eta)?]
    };
    for &(x, y) in &pairs {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::config("--eta", format!("efficiency pair ({x}, {y}) outside [0, 1]")));
        }
    }
    if method == BoundChoice::Mc {
        echo.flag("samples", cm.samples).flag("seed", cm.seed);
    }
    echo.flag("format", &cm.format);
    let mut ctx = cm.open()?;
    let results = pairs
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| match method {
            BoundChoice::Closed => pv_bound_closed(x, y),
            BoundChoice::Quadrature => pv_bound_quadrature(x, y),
            BoundChoice::Mc => pv_bound_geometric_mc(x, y, cm.samples, crate::parallel::derive_seed(cm.seed, i as u64)),
        })
        .collect::<Result<Vec<BoundResult>>>()?;
    match ctx.format {
        Format::Csv => {
            let mut s = String::from("eta_a,eta_b,method,value,error_estimate\n");
            for r in &results {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    sig6(r.eta_a),
                    sig6(r.eta_b),
                    r.method,
                    sig6(r.value),
                    sig6(r.error_estimate)
                ));
            }
            ctx.emit_csv(&echo, &s)
        }
        Format::Json => ctx.emit_json(&echo, "bound", to_json(&results)),
    }
}

fn cmd_critical(a: &CriticalArgs) -> Result<()> {
    let c = a.common.run_config()?;
    let opts = CriticalOptions {
        frames: a.frames,
        tol: a.bisect_tol,
        refine_frames: a.refine_frames,
        refine_steps: a.refine_steps,
        ..CriticalOptions::default()
    };
    if a.frames == 0 {
        return Err(Error::config("--frames", "must be at least 1"));
    }
    if !(a.bisect_tol > 0.0 && a.bisect_tol < 1.0) {
        return Err(Error::config("--bisect-tol", "must lie in (0, 1)"));
    }
    let mut echo = a.common.echo_run("critical", &c);
    echo.flag("frames", a.frames)
        .flag("bisect-tol", a.bisect_tol)
        .flag("refine-frames", a.refine_frames)
        .flag("refine-steps", a.refine_steps)
        .flag("seed", c.seed)
        .flag("tol", format!("{:e}", c.tol))
        .flag("format", &a.common.format);
    let mut ctx = a.common.open()?;
    let e = critical_eta_estimate(&c, &opts)?;
    match ctx.format {
        Format::Csv => {
            let body = format!(
                "state,model,N,m,frames,bisected,eta_sampled,eta_refined,seed\n{},{},{},{},{},{},{},{},{}\n",
                c.state_name,
                c.model,
                c.parties(),
                c.settings.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"),
                e.frames,
                e.bisected,
                sig6(e.eta_sampled),
                sig6(e.eta_refined),
                c.seed
            );
            ctx.emit_csv(&echo, &body)
        }
        Format::Json => ctx.emit_json(
            &echo,
            "critical",
            json!({
                "state": c.state_name, "model": c.model, "parties": c.parties(), "settings": c.settings,
                "frames": e.frames, "bisected": e.bisected, "eta_sampled": e.eta_sampled,
                "eta_refined": e.eta_refined, "seed": c.seed,
            }),
        ),
    }
}

fn cmd_ineq(a: &IneqArgs) -> Result<()> {
    let name: NamedExpression = a.name.parse()?;
    let cm = &a.common;
    let mut echo = Echo::new("ineq");
    echo.flag("name", name);
    let mut rows: Vec<(String, f64)> = Vec::new();
    match name {
        NamedExpression::ChshEta => {
            let q = a.q.unwrap_or(2.0 + std::f64::consts::SQRT_2);
            echo.flag("q", q);
            if a.report_critical {
                rows.push(("eta_critical".into(), chsh_symmetric_critical(q)?));
            } else {
                let e = cm.etas(2)?;
                echo_etas(&mut echo, &e);
                rows.push(("value".into(), chsh_eta_value(q, e[0], e[1])));
                rows.push(("local_bound".into(), 3.0));
            }
        }
        NamedExpression::Ic => {
            let state = cm.state()?;
            if state.parties() != 3 {
                return Err(Error::config("--state", "I_C needs a three-qubit state"));
            }
            let opts = IcSearchOptions { starts: a.starts.max(1), seed: cm.seed, ..IcSearchOptions::default() };
            echo.flag("state", &cm.state).flag("starts", opts.starts).flag("seed", cm.seed);
            let best = if a.report_critical {
                let g = cm.eta_grid.clone().unwrap_or_else(|| "0.6:1:0.001".into());
                echo.flag("eta-grid", &g);
                ic_critical_search(&state, &parse_grid(&g)?, &opts)?
            } else {
                let e = cm.etas(3)?;
                if e.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::config("--eta-asym", "I_C is evaluated at symmetric efficiency"));
                }
                echo.flag("eta", e[0]);
                ic_maximize(&state, e[0], &opts)?
            };
            if a.report_critical {
                rows.push(("eta_critical".into(), best.eta));
            }
            rows.push(("value".into(), best.value));
            // the excess near the critical point is far below six digits
            rows.push(("violation".into(), best.value - IC_LOCAL_BOUND));
            rows.push(("schmidt_ratio".into(), best.schmidt_ratio));
            rows.push(("local_bound".into(), IC_LOCAL_BOUND));
        }
        NamedExpression::Iabc1 | NamedExpression::Iabc2 | NamedExpression::MerminCg => {
            let expr = name.cg3().expect("three-party expression");
            let default_phi = if name == NamedExpression::Iabc1 { optimal_rotation() } else { 0.0 };
            let phi = a.phi.unwrap_or(default_phi);
            echo.flag("phi", phi);
            let t = rotated_ghz_quantum_terms(phi)?;
            let (i, j, k) =
                if name == NamedExpression::Iabc1 { (t.i222, t.j222, t.k22) } else { (t.i_tilde, t.j_tilde, t.k_tilde) };
            rows.push(("I".into(), i));
            rows.push(("J".into(), j));
            rows.push(("K".into(), k));
            if a.report_critical {
                rows.push(("eta_critical".into(), cg3_eta_critical(i, j, k)?));
            } else {
                let e = cm.etas(3)?;
                if e.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::config("--eta-asym", "the rotated-GHZ evaluation uses symmetric efficiency"));
                }
                echo.flag("eta", e[0]);
                rows.push(("value".into(), eval_cg3(&rotated_ghz_behavior(phi, e[0])?, &expr)?));
                rows.push(("local_bound".into(), expr.local_bound));
            }
        }
    }
    echo.switch("report-critical", a.report_critical).flag("format", &cm.format);
    let mut ctx = cm.open()?;
    match ctx.format {
        Format::Csv => {
            let mut s = String::from("name,quantity,value\n");
            for (q, v) in &rows {
                s.push_str(&format!("{name},{q},{}\n", sig6(*v)));
            }
            ctx.emit_csv(&echo, &s)
        }
        Format::Json => {
            let map: serde_json::Map<String, Value> = rows.iter().map(|(q, v)| (q.clone(), json!(v))).collect();
            ctx.emit_json(&echo, "ineq", json!({ "name": name.to_string(), "values": map }))
        }
    }
}

fn cmd_growth(a: &GrowthArgs) -> Result<()> {
    let c0 = a.common.run_config()?;
    let c = RunConfig { etas: a.common.etas(c0.parties())?, ..c0 };
    let ms: Vec<usize> = parse_list("--m-list", &a.m_list)?;
    if ms.len() < 2 || ms.windows(2).any(|w| w[1] <= w[0]) || ms[0] == 0 {
        return Err(Error::config("--m-list", "need at least two ascending positive counts"));
    }
    let mut echo = Echo::new("growth");
    echo.flag("state", &c.state_name).flag("parties", c.parties()).flag("model", c.model).flag("m-list", fmt_list(&ms));
    echo_etas(&mut echo, &c.etas);
    a.common.echo_tail(&mut echo, &c);
    let records = ms
        .iter()
        .map(|&m| {
            let cm = c.with_settings(m);
            cm.validate()?;
            estimate_pv(&cm)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut growth = Vec::new();
    for w in records.windows(2) {
        let g = relative_growth(w[0].p_hat, w[1].p_hat)?;
        growth.push((w[0].settings[0], w[1].settings[0], w[0].p_hat, w[1].p_hat, g));
    }
    let mut ctx = a.common.open()?;
    match ctx.format {
        Format::Csv => {
            let mut s = String::from("m1,m2,p_m1,p_m2,growth_percent\n");
            for (m1, m2, p1, p2, g) in &growth {
                s.push_str(&format!("{m1},{m2},{},{},{}\n", sig6(*p1), sig6(*p2), sig6(*g)));
            }
            ctx.emit_csv(&echo, &s)
        }
        Format::Json => {
            let g: Vec<Value> = growth
                .iter()
                .map(|(m1, m2, p1, p2, g)| json!({"m1": m1, "m2": m2, "p_m1": p1, "p_m2": p2, "growth_percent": g}))
                .collect();
            ctx.emit_json(&echo, "growth", json!({ "records": to_json(&records), "growth": g }))
        }
    }
}

fn cmd_certify(a: &CertifyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| Error::Io(format!("{}: {e}", a.file.display())))?;
    let behavior = parse_behavior(&text)?;
    let lp = build_lp(&behavior)?;
    if let Some(p) = &a.dump_lp {
        lp.dump_lp(BufWriter::new(File::create(p)?))?;
    }
    let res = check_local_model(&lp, a.common.tol);
    let mut echo = Echo::new("certify");
    echo.flag("tol", format!("{:e}", a.common.tol)).flag("format", &a.common.format);
    echo.parts.push(a.file.display().to_string());
    let functional = if res.verdict == Verdict::Nonlocal { Some(extract_inequality(&res)?) } else { None };
    let mut ctx = a.common.open()?;
    match ctx.format {
        Format::Csv => {
            let mut s = format!("# verdict {} slack {:e} iterations {}\n", res.verdict, res.slack, res.iterations);
            if let Some(f) = &functional {
                s.push_str(&format!("# local_bound {} value {}\n", sig6(f.local_bound()), sig6(f.value(&behavior)?)));
                s.push_str("settings,outcomes,coefficient\n");
                let sc = f.scenario();
                for x in 0..sc.setting_tuples() {
                    for o in 0..sc.outcome_tuples() {
                        let c = f.coefficients()[x * sc.outcome_tuples() + o];
                        s.push_str(&format!(
                            "{},{},{}\n",
                            fmt_list(&sc.decode_settings(x)).replace(',', ";"),
                            fmt_list(&sc.decode_outcomes(o)).replace(',', ";"),
                            sig6(c)
                        ));
                    }
                }
            }
            ctx.emit_csv(&echo, &s)
        }
        Format::Json => {
            let value = functional.as_ref().map(|f| f.value(&behavior)).transpose()?;
            ctx.emit_json(
                &echo,
                "certify",
                json!({
                    "verdict": res.verdict, "slack": res.slack, "iterations": res.iterations,
                    "note": res.note, "functional": functional.as_ref().map(to_json), "value": value,
                }),
            )
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Critical(a) => cmd_critical(a),
        Command::Ineq(a) => cmd_ineq(a),
        Command::Growth(a) => cmd_growth(a),
        Command::Certify(a) => cmd_certify(a),
    }
}

/// Exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::InvalidState(_) | Error::ScenarioTooLarge { .. } => 2,
        Error::EfficiencyOutOfRange(_) => 2,
        _ => 1,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0.83:1.0:0.01").unwrap();
        assert_eq!(g.len(), 18);
        assert_eq!(g[17], 1.0);
        assert_eq!(g[1], 0.84);
        for bad in ["0.9:0.8:0.01", "0.1:0.2", "a:b:c", "0:1:0", "0.5:1.5:0.1"] {
            assert!(matches!(parse_grid(bad), Err(Error::Config { .. })), "{bad}");
        }
    }

    #[test]
    fn config_errors_exit_two() {
        assert_eq!(run(["bellpv", "estimate", "--state", "nope"]), 2);
        assert_eq!(run(["bellpv", "estimate", "--model", "coin"]), 2);
        assert_eq!(run(["bellpv", "estimate", "--settings", "9", "--model", "three-outcome"]), 2);
        assert_eq!(run(["bellpv", "sweep", "--eta-grid", "1:0:0.1"]), 2);
        assert_eq!(run(["bellpv", "estimate", "--bogus"]), 2);
        assert_eq!(run(["bellpv", "bound", "--method", "closed", "--eta-asym", "0.9,0.8"]), 2);
    }
}
