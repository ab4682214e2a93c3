//! Experiment tables: relative condition number, bounds and gap ratios per
//! generated problem, as medians over a run of seeds.

use rayon::prelude::*;
use serde_json::Value;

use crate::cond_bounds::{bounds_report, BoundFamily};
use crate::cond_exact::ExactFormulaWork;
use crate::error::Result;
use crate::generators::{generate_ab_alpha, kamm_nagy_problem, KammNagyConfig};
use crate::problem::TlsProblem;
use crate::report::{ReportDocument, ReportRow};
use crate::tls::{solve_tls, svd_bundle};

/// Measured columns, in output order.
pub const TABLE_COLUMNS: [&str; 8] = [
    "sigma_ratio",
    "sigma_ratio_hat",
    "one_minus_sigma_ratio_hat",
    "kappa_rel",
    "kappa2_lower_rel",
    "kappa2_upper_rel",
    "kappa1_upper_rel",
    "bhm",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableOptions {
    /// First seed; a row uses `seed, seed + 1, …, seed + seeds − 1`.
    pub seed: u64,
    pub seeds: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { seed: 1, seeds: 1 }
    }
}

impl TableOptions {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed + k).collect()
    }
}

/// One problem's table values; a failed sandwich verdict is an error.
pub fn table_values(problem: &TlsProblem) -> Result<Vec<Option<f64>>> {
    let bundle = svd_bundle(problem)?;
    let solution = solve_tls(problem, &bundle)?;
    let work = ExactFormulaWork::compact(problem, &bundle, &solution)?;
    let report = bounds_report(problem, &bundle, &solution, &work)?;
    report.ensure_sound()?;
    let rel = |f: BoundFamily, upper: bool| {
        let p = report.relative_pair(f);
        if upper {
            p.upper
        } else {
            p.lower
        }
    };
    Ok(vec![
        Some(report.rho),
        Some(solution.gap.ratio_sigma_hat_n),
        Some(solution.gap.rel_gap),
        report.kappa_reference_rel,
        rel(BoundFamily::Kappa2Lower, false),
        rel(BoundFamily::Kappa2Upper, true),
        rel(BoundFamily::Kappa1, true),
        rel(BoundFamily::Bhm, true),
    ])
}

/// Median of the present values, `None` if there are none.
pub fn median(values: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

struct RowSpec {
    label: String,
    leading: Vec<(&'static str, f64)>,
}

fn build_table<F>(specs: Vec<RowSpec>, options: &TableOptions, make: F) -> Result<Vec<ReportRow>>
where
    F: Fn(usize, u64) -> Result<TlsProblem> + Sync,
{
    let seeds = options.seed_list();
    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let values: Vec<Vec<Option<f64>>> = jobs
        .par_iter()
        .map(|&(r, s)| table_values(&make(r, s)?))
        .collect::<Result<_>>()?;

    Ok(specs
        .into_iter()
        .enumerate()
        .map(|(r, row_spec)| {
            let mine = &values[r * seeds.len()..(r + 1) * seeds.len()];
            let mut row = ReportRow::new(row_spec.label);
            for (name, v) in row_spec.leading {
                row.push(name, Some(v));
            }
            for (c, name) in TABLE_COLUMNS.iter().enumerate() {
                let column: Vec<Option<f64>> = mine.iter().map(|v| v[c]).collect();
                row.push(name, median(&column));
            }
            row
        })
        .collect())
}

fn seeds_meta(options: &TableOptions) -> Value {
    Value::from(options.seed_list())
}

/// Toeplitz deblurring problems (`ω = 8`, spread 1.25, `γ = 10⁻³`), one row
/// per `m`.
pub fn run_table_example1(m_list: &[usize], options: &TableOptions) -> Result<ReportDocument> {
    let template = KammNagyConfig::new(0, 0);
    run_table_example1_with(m_list, &template, options)
}

/// As [`run_table_example1`] with the kernel and noise taken from
/// `template`; its `m` and `seed` are ignored.
pub fn run_table_example1_with(
    m_list: &[usize],
    template: &KammNagyConfig,
    options: &TableOptions,
) -> Result<ReportDocument> {
    let mut doc = ReportDocument::new();
    doc.set_meta("example", 1);
    doc.set_meta("generator", "kammnagy");
    doc.set_meta("omega", template.omega);
    doc.set_meta("spread", template.spread);
    doc.set_meta("gamma", template.gamma);
    doc.set_meta("seeds", seeds_meta(options));
    doc.set_meta("statistic", "median");

    let specs = m_list
        .iter()
        .map(|&m| RowSpec {
            label: format!("m={m}"),
            leading: vec![("m", m as f64)],
        })
        .collect();
    doc.rows = build_table(specs, options, |r, seed| {
        let cfg = KammNagyConfig {
            m: m_list[r],
            seed,
            ..template.clone()
        };
        kamm_nagy_problem(&cfg)
    })?;
    Ok(doc)
}

/// Problems with controlled `α`, one row per `(m, n)` and `α`, shapes
/// outermost.
pub fn run_table_example2(
    shapes: &[(usize, usize)],
    alphas: &[f64],
    options: &TableOptions,
) -> Result<ReportDocument> {
    let mut doc = ReportDocument::new();
    doc.set_meta("example", 2);
    doc.set_meta("generator", "alpha");
    doc.set_meta("seeds", seeds_meta(options));
    doc.set_meta("statistic", "median");

    let grid: Vec<(usize, usize, f64)> = shapes
        .iter()
        .flat_map(|&(m, n)| alphas.iter().map(move |&a| (m, n, a)))
        .collect();
    let specs = grid
        .iter()
        .map(|&(m, n, a)| RowSpec {
            label: format!("m={m} n={n} alpha={a:e}"),
            leading: vec![("m", m as f64), ("n", n as f64), ("alpha", a)],
        })
        .collect();
    doc.rows = build_table(specs, options, |r, seed| {
        let (m, n, a) = grid[r];
        generate_ab_alpha(m, n, a, seed)
    })?;
    Ok(doc)
}

/// Three significant digits, scientific.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.2e}")
}

/// Plain-text rendering of a report with 3 significant digits per value.
pub fn render_text(doc: &ReportDocument) -> String {
    let Some(first) = doc.rows.first() else {
        return String::from("(no rows)\n");
    };
    let mut header = vec!["label".to_string()];
    header.extend(first.fields.iter().map(|(k, _)| k.clone()));
    let body: Vec<Vec<String>> = doc
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![row.label.clone()];
            cells.extend(row.fields.iter().map(|(k, v)| match v {
                None => "-".to_string(),
                Some(v) if matches!(k.as_str(), "m" | "n") => format!("{v}"),
                Some(v) => fmt_sci(*v),
            }));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(&header);
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}
