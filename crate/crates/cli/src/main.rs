//! Command-line driver: reproducible experiments with CSV/JSON output.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
//! 4 failed certificate or verification threshold, 5 sampling failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use dpmpc::analysis::{dp_region, gmps_and_mechanism, tradeoff_region, Mechanism, TradeoffRegion};
use dpmpc::decision::{accuracy, optimal_average_decision, optimal_worstcase_decision};
use dpmpc::function::build_weight_tensor;
use dpmpc::geometry::{certify_average_optimality, certify_worstcase_optimality, Certification};
use dpmpc::multibit::{
    compare_curves, curves_to_csv, hamming_distance_function, hamming_interactive_protocol,
    hamming_measure, selector_function, selector_interactive_protocol,
};
use dpmpc::oracle::{gaps_to_csv, run_experiment, ExperimentManifest, FunctionSpec, MeasureSpec};
use dpmpc::protocol::randomized_response;
use dpmpc::{
    AccuracyMeasure, Error, FunctionTable, Mode, PrivacyBudget, Protocol,
    CERTIFICATE_MARGIN_TOL,
};

#[derive(Parser)]
#[command(name = "dpmpc", version, about = "Optimal private protocol analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy of randomized response under its optimal decision rule.
    Accuracy(Common),
    /// Dual certificate that no feasible protocol does better.
    Certify(Common),
    /// Sampling sweep comparing random feasible protocols to randomized
    /// response.
    Verify(Common),
    /// Hypothesis-testing region vertices of a binary-input mechanism.
    Region(RegionArgs),
    /// Accuracy curves of an interactive multi-bit protocol against
    /// randomized response.
    Compare(CompareArgs),
    /// Optimal decision rule for randomized response, as CSV.
    Decision(DecisionArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of parties.
    #[arg(long)]
    k: Option<usize>,
    /// Per-party budget ratio(s); one value broadcasts to all parties.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lambda: Vec<f64>,
    /// Function: xor, and, selector, hamming, or a JSON file path.
    #[arg(long)]
    f: Option<String>,
    /// Measure: indicator, graded, or a JSON file path.
    #[arg(long)]
    measure: Option<String>,
    /// average or worst-case.
    #[arg(long)]
    mode: Option<String>,
    /// Epsilon grid (comma separated); each point becomes a homogeneous
    /// budget exp(eps).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eps: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Pass/fail tolerance where the command has one.
    #[arg(long)]
    tol: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RegionArgs {
    #[command(flatten)]
    common: Common,
    /// rr, gmps, dp, or a JSON file with {"row0": [...], "row1": [...]};
    /// defaults to rr.
    #[arg(long)]
    mechanism: Option<String>,
}

#[derive(Args, Clone)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// selector or hamming; defaults to selector.
    #[arg(long)]
    example: Option<String>,
}

#[derive(Args, Clone)]
struct DecisionArgs {
    #[command(flatten)]
    common: Common,
    /// Condition the rule on this party's own bit (1-based).
    #[arg(long)]
    condition: Option<usize>,
}

/// File-side mirror of the flags, plus manifest-style aliases.
#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    k: Option<usize>,
    lambda: Option<f64>,
    lambdas: Option<Vec<f64>>,
    f: Option<String>,
    function: Option<FunctionSpec>,
    measure: Option<MeasureSpec>,
    mode: Option<String>,
    eps: Option<Vec<f64>>,
    seed: Option<u64>,
    samples: Option<usize>,
    tol: Option<f64>,
    out: Option<String>,
    mechanism: Option<String>,
    example: Option<String>,
    condition: Option<usize>,
}

struct Resolved {
    k: Option<usize>,
    lambdas: Vec<f64>,
    function: Option<FunctionSpec>,
    measure: Option<MeasureSpec>,
    mode: Mode,
    eps: Vec<f64>,
    seed: u64,
    samples: Option<usize>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    mechanism: Option<String>,
    example: Option<String>,
    condition: Option<usize>,
}

fn load_config(path: &PathBuf) -> Result<FileConfig, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("config {}: {e}", path.display())))
}

fn resolve(common: &Common) -> Result<Resolved, Error> {
    let file = match &common.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let lambdas = if !common.lambda.is_empty() {
        common.lambda.clone()
    } else if let Some(list) = file.lambdas {
        list
    } else if let Some(one) = file.lambda {
        vec![one]
    } else {
        Vec::new()
    };
    let mut embedded_measure = None;
    let function = match &common.f {
        Some(name) => {
            let (spec, measure) = parse_function_source(name)?;
            embedded_measure = measure;
            Some(spec)
        }
        None => file.function.or_else(|| file.f.map(FunctionSpec::Named)),
    };
    let measure = match &common.measure {
        Some(name) => Some(parse_measure_source(name)?),
        None => file.measure.or(embedded_measure),
    };
    let mode = common
        .mode
        .clone()
        .or(file.mode)
        .map_or(Ok(Mode::Average), |m| m.parse())?;
    Ok(Resolved {
        k: common.k.or(file.k),
        lambdas,
        function,
        measure,
        mode,
        eps: if common.eps.is_empty() {
            file.eps.unwrap_or_default()
        } else {
            common.eps.clone()
        },
        seed: common.seed.or(file.seed).unwrap_or(0),
        samples: common.samples.or(file.samples),
        tol: common.tol.or(file.tol),
        out: common.out.clone().or(file.out.map(PathBuf::from)),
        mechanism: file.mechanism,
        example: file.example,
        condition: file.condition,
    })
}

/// A function flag is a builtin name or a path to a JSON table, which may
/// also embed an accuracy measure.
fn parse_function_source(
    source: &str,
) -> Result<(FunctionSpec, Option<MeasureSpec>), Error> {
    match source {
        "xor" | "and" | "selector" | "hamming" => {
            Ok((FunctionSpec::Named(source.into()), None))
        }
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config(format!("function {path}: {e}")))?;
            let (table, measure) = dpmpc::function::from_json(&text)?;
            let values = (0..dpmpc::bits::domain_size(table.k()))
                .map(|x| table.value(x))
                .collect();
            let spec = FunctionSpec::Table {
                labels: table.labels().to_vec(),
                table: values,
            };
            let measure = measure.map(|m| {
                let n = m.labels().len();
                MeasureSpec::Matrix {
                    labels: m.labels().to_vec(),
                    w: (0..n)
                        .map(|y| (0..n).map(|t| m.score(y, t)).collect())
                        .collect(),
                }
            });
            Ok((spec, measure))
        }
    }
}

fn parse_measure_source(source: &str) -> Result<MeasureSpec, Error> {
    match source {
        "indicator" | "graded" => Ok(MeasureSpec::Named(source.into())),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config(format!("measure {path}: {e}")))?;
            let doc: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("measure {path}: {e}")))?;
            serde_json::from_value(doc)
                .map_err(|e| Error::Parse(format!("measure {path}: {e}")))
        }
    }
}

impl Resolved {
    /// Party count, inferred from the budget list or the builtin function
    /// when not given explicitly.
    fn party_count(&self) -> Result<usize, Error> {
        if let Some(k) = self.k {
            return Ok(k);
        }
        if self.lambdas.len() > 1 {
            return Ok(self.lambdas.len());
        }
        match &self.function {
            Some(FunctionSpec::Named(n)) if n == "selector" => Ok(3),
            Some(FunctionSpec::Named(n)) if n == "hamming" => Ok(4),
            Some(FunctionSpec::Table { table, .. }) if table.len().is_power_of_two() => {
                Ok(table.len().trailing_zeros() as usize)
            }
            _ => Err(Error::config("k is required (flag --k or config)")),
        }
    }

    fn budget(&self) -> Result<PrivacyBudget, Error> {
        let k = self.party_count()?;
        match self.lambdas.len() {
            0 => {
                if self.eps.len() == 1 {
                    PrivacyBudget::homogeneous(k, self.eps[0].exp())
                } else {
                    Err(Error::config("a budget is required (--lambda or single --eps)"))
                }
            }
            1 => PrivacyBudget::homogeneous(k, self.lambdas[0]),
            n if n == k => PrivacyBudget::new(self.lambdas.clone()),
            n => Err(Error::config(format!("{n} budget values for k={k} parties"))),
        }
    }

    fn function_table(&self) -> Result<FunctionTable, Error> {
        let k = self.party_count()?;
        self.function
            .as_ref()
            .ok_or_else(|| Error::config("a function is required (--f)"))?
            .resolve(k)
    }

    fn measure_for(&self, f: &FunctionTable) -> Result<AccuracyMeasure, Error> {
        match &self.measure {
            Some(spec) => spec.resolve(f.labels()),
            None => match &self.function {
                // The distance example is graded by default; everything
                // else scores exact hits.
                Some(FunctionSpec::Named(n)) if n == "hamming" => {
                    AccuracyMeasure::graded(f.labels().to_vec())
                }
                _ => AccuracyMeasure::indicator(f.labels().to_vec()),
            },
        }
    }

    fn emit(&self, data: &str) -> Result<(), Error> {
        match &self.out {
            Some(path) => fs::write(path, data)
                .map_err(|e| Error::config(format!("write {}: {e}", path.display()))),
            None => {
                print!("{data}");
                Ok(())
            }
        }
    }
}

fn best_accuracy(
    p: &Protocol,
    weights: &dpmpc::WeightTensor,
    mode: Mode,
    condition: Option<usize>,
) -> Result<f64, Error> {
    let rule = match mode {
        Mode::Average => optimal_average_decision(p, weights, condition)?,
        Mode::WorstCase => optimal_worstcase_decision(p, weights, condition)?,
    };
    Ok(accuracy(p, &rule, weights, mode)?.value)
}

fn cmd_accuracy(cfg: &Resolved) -> Result<u8, Error> {
    let k = cfg.party_count()?;
    let f = cfg.function_table()?;
    let measure = cfg.measure_for(&f)?;
    let weights = build_weight_tensor(&f, &measure)?;
    let mut rows = Vec::new();
    if cfg.eps.is_empty() {
        let budget = cfg.budget()?;
        let eps = budget
            .lambdas()
            .iter()
            .map(|l| l.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        rows.push((eps, budget));
    } else {
        for &eps in &cfg.eps {
            rows.push((eps, PrivacyBudget::homogeneous(k, eps.exp())?));
        }
    }
    let mut csv = String::from("epsilon,accuracy\n");
    for (eps, budget) in rows {
        let rr = randomized_response(&budget);
        let acc = best_accuracy(&rr, &weights, cfg.mode, None)?;
        csv.push_str(&format!("{eps},{acc}\n"));
    }
    cfg.emit(&csv)?;
    Ok(0)
}

fn cmd_certify(cfg: &Resolved) -> Result<u8, Error> {
    let budget = cfg.budget()?;
    let f = cfg.function_table()?;
    let measure = cfg.measure_for(&f)?;
    let weights = build_weight_tensor(&f, &measure)?;
    let cert: Certification = match cfg.mode {
        Mode::Average => certify_average_optimality(&weights, &budget)?,
        Mode::WorstCase => certify_worstcase_optimality(&weights, &budget)?,
    };
    if budget.is_degenerate() {
        let parties: Vec<String> = budget
            .degenerate_parties()
            .iter()
            .map(|i| (i + 1).to_string())
            .collect();
        eprintln!(
            "note: degenerate budget (lambda = 1 for party {}): corner columns coincide",
            parties.join(", ")
        );
    }
    if cert.tied_corners > 0 {
        eprintln!(
            "note: optimum is attained by multiple rules ({} corners tied)",
            cert.tied_corners
        );
    }
    let tol = cfg.tol.unwrap_or(CERTIFICATE_MARGIN_TOL);
    let c = &cert.certificate;
    cfg.emit(&format!("{}\n", c.to_json()))?;
    if c.min_margin < -tol {
        eprintln!("certificate margin {} below -{tol}", c.min_margin);
        return Ok(4);
    }
    if c.min_margin < 0.0 {
        eprintln!("warning: certificate margin {} is negative roundoff", c.min_margin);
    }
    Ok(0)
}

fn cmd_verify(cfg: &Resolved) -> Result<u8, Error> {
    let samples = cfg.samples.unwrap_or(0);
    if samples == 0 {
        return Err(Error::config("verify needs --samples >= 1"));
    }
    let budget = cfg.budget()?;
    let man = ExperimentManifest {
        k: budget.k(),
        lambdas: budget.lambdas().to_vec(),
        function: cfg
            .function
            .clone()
            .ok_or_else(|| Error::config("a function is required (--f)"))?,
        measure: cfg.measure.clone().unwrap_or_else(|| {
            MeasureSpec::Named(
                match &cfg.function {
                    Some(FunctionSpec::Named(n)) if n == "hamming" => "graded",
                    _ => "indicator",
                }
                .into(),
            )
        }),
        mode: cfg.mode.as_str().to_string(),
        samples,
        seed: cfg.seed,
    };
    let gaps = run_experiment(&man)?;
    cfg.emit(&gaps_to_csv(&gaps))?;
    let tol = cfg.tol.unwrap_or(1e-9);
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        eprintln!("minimum optimality gap {min} below -{tol}");
        return Ok(4);
    }
    Ok(0)
}

#[derive(Deserialize)]
struct MechanismDoc {
    row0: Vec<f64>,
    row1: Vec<f64>,
}

fn region_to_csv(region: &TradeoffRegion) -> String {
    let mut out = String::from("p_md,p_fa\n");
    for (md, fa) in region.vertices() {
        out.push_str(&format!("{md},{fa}\n"));
    }
    out
}

fn cmd_region(args: &RegionArgs) -> Result<u8, Error> {
    let cfg = resolve(&args.common)?;
    let which = args
        .mechanism
        .clone()
        .or_else(|| cfg.mechanism.clone())
        .unwrap_or_else(|| "rr".into());
    let lambda = if !cfg.lambdas.is_empty() {
        cfg.lambdas[0]
    } else if cfg.eps.len() == 1 {
        cfg.eps[0].exp()
    } else {
        return Err(Error::config("region needs --lambda or a single --eps"));
    };
    let region = match which.as_str() {
        "rr" => tradeoff_region(&Mechanism::randomized_response(lambda)),
        "gmps" => tradeoff_region(&gmps_and_mechanism(lambda)),
        "dp" => dp_region(lambda),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config(format!("mechanism {path}: {e}")))?;
            let doc: MechanismDoc = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("mechanism {path}: {e}")))?;
            tradeoff_region(&Mechanism::new(doc.row0, doc.row1)?)
        }
    };
    cfg.emit(&region_to_csv(&region))?;
    Ok(0)
}

fn cmd_compare(args: &CompareArgs) -> Result<u8, Error> {
    let cfg = resolve(&args.common)?;
    let example = args
        .example
        .clone()
        .or_else(|| cfg.example.clone())
        .unwrap_or_else(|| "selector".into());
    let grid: Vec<f64> = if cfg.eps.is_empty() {
        (0..21).map(|i| 0.25 * f64::from(i)).collect()
    } else {
        cfg.eps.clone()
    };
    let rows = match example.as_str() {
        "selector" => {
            let f = selector_function();
            let measure = cfg.measure_for(&f)?;
            compare_curves(
                |l| Ok(selector_interactive_protocol(l).induced().clone()),
                |l| Ok(randomized_response(&PrivacyBudget::homogeneous(3, l)?)),
                &f,
                &measure,
                &grid,
                cfg.mode,
            )?
        }
        "hamming" => {
            let f = hamming_distance_function();
            let measure = match &cfg.measure {
                Some(spec) => spec.resolve(f.labels())?,
                None => hamming_measure(),
            };
            compare_curves(
                |l| Ok(hamming_interactive_protocol(l)?.induced().clone()),
                |l| Ok(randomized_response(&PrivacyBudget::homogeneous(4, l)?)),
                &f,
                &measure,
                &grid,
                cfg.mode,
            )?
        }
        other => return Err(Error::config(format!("unknown example {other:?}"))),
    };
    cfg.emit(&curves_to_csv(&rows))?;
    Ok(0)
}

fn cmd_decision(args: &DecisionArgs) -> Result<u8, Error> {
    let cfg = resolve(&args.common)?;
    let condition = args.condition.or(cfg.condition);
    let budget = cfg.budget()?;
    let f = cfg.function_table()?;
    let measure = cfg.measure_for(&f)?;
    let weights = build_weight_tensor(&f, &measure)?;
    let rr = randomized_response(&budget);
    let condition = match condition {
        Some(i) if i >= 1 && i <= budget.k() => Some(i - 1),
        Some(i) => {
            return Err(Error::config(format!(
                "condition party {i} out of range 1..={}",
                budget.k()
            )))
        }
        None => None,
    };
    let rule = match cfg.mode {
        Mode::Average => optimal_average_decision(&rr, &weights, condition)?,
        Mode::WorstCase => optimal_worstcase_decision(&rr, &weights, condition)?,
    };
    cfg.emit(&rule.to_csv())?;
    Ok(0)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Solver { .. } => 3,
        Error::Sampling(_) => 5,
        _ => 2,
    }
}

fn run(command: &Command) -> Result<u8, Error> {
    match command {
        Command::Accuracy(c) => cmd_accuracy(&resolve(c)?),
        Command::Certify(c) => cmd_certify(&resolve(c)?),
        Command::Verify(c) => cmd_verify(&resolve(c)?),
        Command::Region(a) => cmd_region(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Decision(a) => cmd_decision(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
