//! Command-line front end for the `tlscond` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cond_bounds::{bounds_report, BoundFamily};
use crate::cond_exact::{build_k_matrix, condition, ExactFormulaWork, Method};
use crate::error::{Result, TlsError};
use crate::generators::{generate_ab_alpha, kamm_nagy_problem, GeneratorConfig, KammNagyConfig};
use crate::io::{load_problem, save_problem, ProblemFormat};
use crate::perturb_lab::{monte_carlo_validate, ValidationConfig, DEFAULT_TOLERANCE};
use crate::problem::TlsProblem;
use crate::report::{save_report, ReportDocument, ReportFormat, ReportRow};
use crate::tables::{render_text, run_table_example1, run_table_example2, TableOptions};
use crate::tls::{residual_diagnostics, solve_tls, svd_bundle, CrossCheck, GolubCheck};

#[derive(Debug, Parser)]
#[command(name = "tlscond", version, about = "Total least squares solutions and their condition numbers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the TLS problem stored in a file
    Solve(InputArgs),
    /// Exact condition numbers
    Cond {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
    },
    /// Lower/upper bounds against the exact condition number
    Bounds(InputArgs),
    /// Generate a test problem
    Gen(GenArgs),
    /// Compare the condition number with perturbed re-solves
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Absolute step; defaults to 1e-8·‖[A b]‖_F
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
    },
    /// Reproduce the layout of the experiment tables
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Problem file format; guessed from the extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the report here instead of printing a text summary
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON instead of CSV for --out (and for stdout when set without --out)
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Mm,
    Csv,
}

impl From<FormatArg> for ProblemFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Mm => ProblemFormat::MatrixMarket,
            FormatArg::Csv => ProblemFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kron,
    Cholesky,
    Svd,
    Baboulin,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Kron => vec![Method::Kronecker],
            MethodArg::Cholesky => vec![Method::Cholesky],
            MethodArg::Svd => vec![Method::Svd],
            MethodArg::Baboulin => vec![Method::Baboulin],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Alpha,
    Kammnagy,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub m: usize,
    /// Columns of A (alpha kind only)
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub omega: usize,
    #[arg(long, default_value_t = 1.25)]
    pub spread: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub example: u8,
    /// Seeds per row; values are medians over them
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Row sizes for example 1
    #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 300, 500])]
    pub m_list: Vec<usize>,
    /// Shapes `MxN` for example 2
    #[arg(long, value_delimiter = ',', default_values_t = vec!["500x350".to_string()])]
    pub shapes: Vec<String>,
    /// Alphas for example 2
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 1e-5, 1e-7])]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let bad = || TlsError::InvalidArgument(format!("shape must look like 500x350, got '{s}'"));
    let (m, n) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((m.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
}

fn load(input: &InputArgs) -> Result<TlsProblem> {
    let format = input
        .format
        .map(ProblemFormat::from)
        .unwrap_or_else(|| ProblemFormat::from_path(&input.input));
    load_problem(&input.input, format)
}

fn emit(doc: &ReportDocument, output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    let format = if output.json { ReportFormat::Json } else { ReportFormat::Csv };
    match &output.out {
        Some(path) => {
            save_report(doc, path, format)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None if output.json => writeln!(out, "{}", doc.to_json()?)?,
        None => write!(out, "{}", render_text(doc))?,
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_solve(input: &InputArgs, out: &mut dyn Write) -> Result<()> {
    let problem = load(input)?;
    let bundle = svd_bundle(&problem)?;
    let solution = solve_tls(&problem, &bundle)?;
    let diag = residual_diagnostics(&problem, &bundle, &solution);

    let mut doc = ReportDocument::new();
    doc.set_meta("input", input.input.display().to_string());
    doc.set_meta("m", problem.rows());
    doc.set_meta("n", problem.cols());
    let mut row = ReportRow::new(problem.label())
        .with("alpha", Some(solution.alpha))
        .with("x_norm", Some(solution.x.norm()))
        .with("r_norm", Some(solution.r.norm()))
        .with("sigma_last", Some(bundle.sigma_last()))
        .with("sigma_hat_n", Some(bundle.sigma_hat[problem.cols() - 1]))
        .with("rel_gap", Some(solution.gap.rel_gap))
        .with(
            "cross_check_rel_diff",
            match solution.cross_check {
                CrossCheck::Compared { rel_diff, .. } => Some(rel_diff),
                CrossCheck::Skipped { .. } => None,
            },
        );
    if let GolubCheck::Evaluated { lower, gap, upper, .. } = diag.golub {
        row = row
            .with("golub_lower", Some(lower))
            .with("golub_gap", Some(gap))
            .with("golub_upper", Some(upper));
    }
    for (j, v) in solution.x.iter().enumerate() {
        row.push(&format!("x{}", j + 1), Some(*v));
    }
    doc.rows.push(row);

    if input.output.out.is_some() || input.output.json {
        return emit(&doc, &input.output, out);
    }
    writeln!(out, "problem {} ({} x {})", problem.label(), problem.rows(), problem.cols())?;
    writeln!(out, "x = {}", fmt_vec(solution.x.as_slice()))?;
    writeln!(out, "alpha = {:.6e}", solution.alpha)?;
    writeln!(out, "residual norm = {:.6e}", solution.r.norm())?;
    writeln!(out, "1 - sigma_(n+1)/sigma_hat_n = {:.6e}", solution.gap.rel_gap)?;
    match solution.cross_check {
        CrossCheck::Compared { rel_diff, agrees } => {
            writeln!(out, "normal-equation cross-check: rel diff {rel_diff:.3e} ({})", if agrees { "ok" } else { "MISMATCH" })?
        }
        CrossCheck::Skipped { .. } => writeln!(out, "normal-equation cross-check: skipped (gap too small)")?,
    }
    writeln!(out, "identities hold: {}", diag.identities.hold())?;
    Ok(())
}

fn cmd_cond(input: &InputArgs, method: MethodArg, out: &mut dyn Write) -> Result<()> {
    let problem = load(input)?;
    let bundle = svd_bundle(&problem)?;
    let solution = solve_tls(&problem, &bundle)?;
    let methods = method.methods();
    let work = if methods.contains(&Method::Kronecker) {
        build_k_matrix(&problem, &bundle, &solution)?
    } else {
        ExactFormulaWork::compact(&problem, &bundle, &solution)?
    };

    let mut doc = ReportDocument::new();
    doc.set_meta("input", input.input.display().to_string());
    let mut first_error = None;
    let mut notes = Vec::new();
    for m in methods {
        match condition(m, &work, &problem, &bundle, &solution) {
            Ok(est) => {
                notes.extend(est.warnings.iter().cloned());
                doc.rows.push(
                    ReportRow::new(m.name())
                        .with("kappa_abs", Some(est.kappa_abs))
                        .with("kappa_rel", est.kappa_rel),
                );
            }
            Err(e) => {
                notes.push(format!("{m}: {e}"));
                doc.rows.push(ReportRow::new(m.name()).with("kappa_abs", None).with("kappa_rel", None));
                first_error.get_or_insert(e);
            }
        }
    }
    if !notes.is_empty() {
        doc.set_meta("notes", notes.clone());
    }
    emit(&doc, &input.output, out)?;
    if input.output.out.is_none() && !input.output.json {
        for n in &notes {
            writeln!(out, "note: {n}")?;
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn cmd_bounds(input: &InputArgs, out: &mut dyn Write) -> Result<()> {
    let problem = load(input)?;
    let bundle = svd_bundle(&problem)?;
    let solution = solve_tls(&problem, &bundle)?;
    let work = ExactFormulaWork::compact(&problem, &bundle, &solution)?;
    let report = bounds_report(&problem, &bundle, &solution, &work)?;

    let mut doc = ReportDocument::new();
    doc.set_meta("input", input.input.display().to_string());
    doc.set_meta("kappa", report.kappa_reference);
    doc.set_meta("kappa_rel", report.kappa_reference_rel);
    doc.set_meta("alpha", report.alpha);
    doc.set_meta("rho", report.rho);
    doc.set_meta("upper_chain_holds", report.upper_chain.holds());
    if let Some(d) = report.dominance {
        doc.set_meta("kappa2_dominance_predicate", d.predicate);
        doc.set_meta("kappa2_dominance_simple", d.simple_condition);
    }
    for family in BoundFamily::ALL {
        let abs = report.pair(family);
        let rel = report.relative_pair(family);
        doc.rows.push(
            ReportRow::new(family.name())
                .with("lower", abs.lower)
                .with("upper", abs.upper)
                .with("lower_rel", rel.lower)
                .with("upper_rel", rel.upper)
                .with("encloses", report.verdict(family).map(|v| f64::from(u8::from(v))))
                .with("sharpness", report.sharpness(family)),
        );
    }
    emit(&doc, &input.output, out)?;
    if input.output.out.is_none() && !input.output.json {
        writeln!(out, "kappa = {:.6e}, alpha = {:.6e}, rho = {:.6}", report.kappa_reference, report.alpha, report.rho)?;
    }
    report.ensure_sound()
}

fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let problem = match args.kind {
        KindArg::Alpha => {
            let n = args
                .n
                .ok_or_else(|| TlsError::InvalidArgument("--n is required for --kind alpha".into()))?;
            let alpha = args
                .alpha
                .ok_or_else(|| TlsError::InvalidArgument("--alpha is required for --kind alpha".into()))?;
            GeneratorConfig::new(args.m, n, alpha, args.seed).validate()?;
            generate_ab_alpha(args.m, n, alpha, args.seed)?
        }
        KindArg::Kammnagy => {
            let cfg = KammNagyConfig {
                m: args.m,
                omega: args.omega,
                spread: args.spread,
                gamma: args.gamma,
                seed: args.seed,
            };
            if args.n.is_some_and(|n| n != cfg.n()) {
                return Err(TlsError::InvalidArgument(format!("kammnagy fixes n = m - 2*omega = {}", cfg.n())));
            }
            kamm_nagy_problem(&cfg)?
        }
    };
    let format = args
        .format
        .map(ProblemFormat::from)
        .unwrap_or_else(|| ProblemFormat::from_path(&args.out));
    save_problem(&problem, &args.out, format)?;
    writeln!(out, "wrote {} ({} x {})", args.out.display(), problem.rows(), problem.cols() + 1)?;
    Ok(())
}

fn cmd_validate(input: &InputArgs, trials: usize, step: Option<f64>, seed: u64, tol: f64, out: &mut dyn Write) -> Result<()> {
    if step.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        return Err(TlsError::InvalidArgument("--step must be positive".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(TlsError::InvalidArgument("--tol must lie in (0, 1)".into()));
    }
    let problem = load(input)?;
    let config = ValidationConfig {
        trials,
        step,
        seed,
        tolerance: tol,
    };
    let summary = monte_carlo_validate(&problem, &config)?;
    let mut doc = summary.to_report(problem.label());
    doc.set_meta("input", input.input.display().to_string());
    doc.set_meta("seed", seed);
    emit(&doc, &input.output, out)?;
    if !(summary.sound() && summary.attained()) {
        return Err(TlsError::BoundViolation(format!(
            "max ratio {:?}, worst-direction ratio {:e}, kappa {:e}",
            summary.max_observed_ratio, summary.worst_direction_ratio, summary.kappa_reference
        )));
    }
    Ok(())
}

fn cmd_table(args: &TableArgs, out: &mut dyn Write) -> Result<()> {
    if args.seeds == 0 {
        return Err(TlsError::InvalidArgument("--seeds must be at least 1".into()));
    }
    let options = TableOptions {
        seed: args.seed,
        seeds: args.seeds,
    };
    let doc = match args.example {
        1 => run_table_example1(&args.m_list, &options)?,
        _ => {
            let shapes = args.shapes.iter().map(|s| parse_shape(s)).collect::<Result<Vec<_>>>()?;
            run_table_example2(&shapes, &args.alphas, &options)?
        }
    };
    if args.output.out.is_some() {
        write!(out, "{}", render_text(&doc))?;
    }
    emit(&doc, &args.output, out)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Solve(input) => cmd_solve(input, out),
        Command::Cond { input, method } => cmd_cond(input, *method, out),
        Command::Bounds(input) => cmd_bounds(input, out),
        Command::Gen(args) => cmd_gen(args, out),
        Command::Validate {
            input,
            trials,
            step,
            seed,
            tol,
        } => cmd_validate(input, *trials, *step, *seed, *tol, out),
        Command::Table(args) => cmd_table(args, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_parse() {
        assert_eq!(parse_shape("500x350").unwrap(), (500, 350));
        assert!(parse_shape("500").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
