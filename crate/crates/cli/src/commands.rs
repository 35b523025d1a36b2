use anyhow::{bail, Context, Result};
use serde::Serialize;

use lpconc::anti_concentration::{find_p_star, Method, PStarOptions};
use lpconc::diagnostics::{
    concentration_curve, drop_constant_columns, load_csv, mode_shift, perturb, standardize, synthetic_cube,
    CurveNormalization, CurvePoint, Dataset, LoadOptions, MissingPolicy, PerturbReport,
};
use lpconc::distributions::{AssumptionReport, MomentReport};
use lpconc::embedding_lab::{concentration_table, contrast_table, EmbeddingKind, TableCell};
use lpconc::monte_carlo::{curve_sweep, default_p_grid, relative_contrast, ContrastSummary, Normalization, DEFAULT_N_GRID};
use lpconc::rate_engine::{contrast_bounds_for, phi, rate, small_p_rate, uniform_rate, ContrastBounds, RateResult, UniformRate};
use lpconc::{DistributionSpec, Sign};

use crate::output::{emit, num, opt, Table};
use crate::{Cli, Command, DataArgs, DataNorm, Format, McNorm, Missing, PStarMethod};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Rates(a) => rates(cli, a),
        Command::Curve(a) => curve(cli, a),
        Command::Contrast(a) => contrast(cli, a),
        Command::Pstar(a) => pstar(cli, a),
        Command::Embedsim(a) => embedsim(cli, a),
        Command::Diagnose(a) => diagnose(cli, a),
        Command::Perturb(a) => perturb_cmd(cli, a),
        Command::Validate(a) => validate(cli, a),
    }
}

fn parse_dist(text: &str) -> Result<DistributionSpec> {
    DistributionSpec::parse(text).with_context(|| format!("invalid distribution '{text}'"))
}

fn sign_name(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

fn mc_norm(n: McNorm) -> Normalization {
    match n {
        McNorm::Analytic => Normalization::AnalyticMu,
        McNorm::Empirical => Normalization::EmpiricalMu,
    }
}

fn data_norm(n: DataNorm) -> CurveNormalization {
    match n {
        DataNorm::Pooled => CurveNormalization::Pooled,
        DataNorm::PerColumn => CurveNormalization::PerColumn,
    }
}

fn p_grid_or_default(p: &[f64]) -> Vec<f64> {
    if p.is_empty() {
        default_p_grid()
    } else {
        p.to_vec()
    }
}

#[derive(Serialize)]
struct RateRow {
    p: f64,
    delta: f64,
    sign: Sign,
    rate: RateResult,
    small_p_limit: Option<f64>,
    phi_delta2: Option<f64>,
}

#[derive(Serialize)]
struct UniformRow {
    delta: f64,
    sign: Sign,
    uniform_rate: UniformRate,
}

#[derive(Serialize)]
struct RatesResult {
    rates: Vec<RateRow>,
    uniform: Vec<UniformRow>,
}

fn rates(cli: &Cli, a: &crate::RatesArgs) -> Result<()> {
    let dist = parse_dist(&a.dist)?;
    let mut rows = Vec::new();
    let mut uniform = Vec::new();
    let mut table = Table::new(&["p", "delta", "sign", "quantity", "value"]);
    for &delta in &a.delta {
        for sign in [Sign::Plus, Sign::Minus] {
            let limit = if a.closed_form && dist.atom_at_zero() == 0.0 { small_p_rate(&dist, delta, sign).ok() } else { None };
            for &p in &a.p {
                let r = rate(&dist, p, delta, sign)?;
                let phi_delta2 = if a.closed_form { phi(&dist, p).ok().map(|v| v * delta * delta) } else { None };
                let row = |q: &str, v: String| vec![num(p), num(delta), sign_name(sign).into(), q.into(), v];
                table.push(row("rate", num(r.value)));
                table.push(row("argmax_t", opt(r.argmax_t)));
                if a.closed_form {
                    table.push(row("small_p_limit", opt(limit)));
                    table.push(row("phi_delta2", opt(phi_delta2)));
                }
                rows.push(RateRow { p, delta, sign, rate: r, small_p_limit: limit, phi_delta2 });
            }
            if a.uniform {
                let u = uniform_rate(&dist, delta, sign)?;
                table.push(vec![String::new(), num(delta), sign_name(sign).into(), "uniform_rate".into(), num(u.value)]);
                table.push(vec![String::new(), num(delta), sign_name(sign).into(), "uniform_argmin_p".into(), opt(u.argmin_p)]);
                uniform.push(UniformRow { delta, sign, uniform_rate: u });
            }
        }
    }
    emit(cli, Format::Csv, &RatesResult { rates: rows, uniform }, &table)
}

fn curve(cli: &Cli, a: &crate::CurveArgs) -> Result<()> {
    let dist = parse_dist(&a.dist)?;
    let p_grid = p_grid_or_default(&a.p);
    let n_grid = if a.n.is_empty() { DEFAULT_N_GRID.to_vec() } else { a.n.clone() };
    let g = curve_sweep(&dist, &p_grid, &n_grid, a.delta, a.m, a.seed, mc_norm(a.normalization))?;
    let mut table = Table::new(&["p", "n", "freq", "ci_halfwidth"]);
    for (i, &p) in g.p_grid.iter().enumerate() {
        for (j, &n) in g.n_grid.iter().enumerate() {
            table.push(vec![num(p), n.to_string(), opt(g.freq[i][j]), opt(g.ci_halfwidth[i][j])]);
        }
    }
    emit(cli, Format::Json, &g, &table)
}

#[derive(Serialize)]
struct ContrastResult {
    cells: Vec<ContrastSummary>,
    /// Lower bounds per `n`, present for laws without an atom at zero.
    bounds: Vec<(usize, Option<ContrastBounds>)>,
}

fn contrast(cli: &Cli, a: &crate::ContrastArgs) -> Result<()> {
    let dist = parse_dist(&a.dist)?;
    let mut cells = Vec::new();
    let mut table = Table::new(&["p", "n", "quantity", "value"]);
    for &n in &a.n {
        for &p in &a.p {
            let s = relative_contrast(&dist, n, p, a.m, a.seed, a.delta, mc_norm(a.normalization))?;
            for (q, v) in [
                ("median_rc", s.median_rc),
                ("freq_below_delta", s.freq_below_delta),
                ("ci_halfwidth", s.ci_halfwidth),
                ("half_band_freq", s.half_band_freq),
                ("skip_rate", s.skip_rate),
            ] {
                table.push(vec![num(p), n.to_string(), q.into(), num(v)]);
            }
            cells.push(s);
        }
    }
    let bounds = a
        .n
        .iter()
        .map(|&n| (n, if dist.atom_at_zero() == 0.0 { contrast_bounds_for(&dist, a.delta, n as u64).ok() } else { None }))
        .collect();
    emit(cli, Format::Json, &ContrastResult { cells, bounds }, &table)
}

fn pstar(cli: &Cli, a: &crate::PStarArgs) -> Result<()> {
    let dist = parse_dist(&a.dist)?;
    let opts = PStarOptions {
        method: a.method.map(|m| match m {
            PStarMethod::Exact => Method::ExactBinomial,
            PStarMethod::Mc => Method::MonteCarlo,
        }),
        mc_samples: a.mc_samples,
        seed: a.seed,
        c_const: a.c_const,
    };
    let r = find_p_star(&dist, a.n, a.delta, a.target, opts)?;
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["p_star".into(), opt(r.p_star)]);
    table.push(vec!["exact_prob_at_p_star".into(), num(r.exact_prob_at_p_star)]);
    table.push(vec!["binomial_mode_prob".into(), num(r.binomial_mode_prob)]);
    table.push(vec!["conservative_n".into(), num(r.conservative_n)]);
    table.push(vec!["empirical_n".into(), r.empirical_n.map(|v| v.to_string()).unwrap_or_default()]);
    emit(cli, Format::Json, &r, &table)
}

#[derive(Serialize)]
struct EmbedResult {
    concentration: Vec<TableCell>,
    median_relative_contrast: Vec<TableCell>,
}

fn embedsim(cli: &Cli, a: &crate::EmbedArgs) -> Result<()> {
    let kinds: Vec<EmbeddingKind> = a.kinds.iter().map(|k| EmbeddingKind::parse(k)).collect::<Result<_, _>>()?;
    if a.m < 2 {
        bail!("--M must be at least 2");
    }
    let conc = concentration_table(&kinds, &a.p, a.delta, a.m, a.seed)?;
    let rc = contrast_table(&kinds, &a.p, a.m / 2, a.seed)?;
    let mut table = Table::new(&["table", "kind", "p", "value"]);
    for (name, cells) in [("concentration", &conc), ("median_relative_contrast", &rc)] {
        for c in cells {
            table.push(vec![name.into(), c.kind.name().into(), num(c.p), num(c.value)]);
        }
    }
    emit(cli, Format::Json, &EmbedResult { concentration: conc, median_relative_contrast: rc }, &table)
}

#[derive(Serialize)]
struct DataSummary {
    rows: usize,
    cols: usize,
    constant_columns: Vec<String>,
    rows_dropped: usize,
    cells_imputed: usize,
    mode_shift_columns: Option<usize>,
    mode_shift_zeros: Option<usize>,
    zero_fraction: f64,
    warnings: Vec<String>,
}

fn load_data(a: &DataArgs) -> Result<(Dataset, DataSummary)> {
    let mut data = match (&a.input, &a.synthetic) {
        (Some(path), None) => {
            let mut opts = LoadOptions {
                policy: match a.missing {
                    Missing::Reject => MissingPolicy::Reject,
                    Missing::Mean => MissingPolicy::MeanImpute,
                },
                ..LoadOptions::default()
            };
            opts.missing_markers.extend(a.missing_marker.iter().cloned());
            load_csv(path, &opts)?
        }
        (None, Some(shape)) => {
            let (m, n) = shape
                .split_once('x')
                .and_then(|(m, n)| Some((m.trim().parse::<usize>().ok()?, n.trim().parse::<usize>().ok()?)))
                .filter(|&(m, n)| m > 0 && n > 0)
                .with_context(|| format!("--synthetic expects MxN with positive sizes, got '{shape}'"))?;
            synthetic_cube(m, n, a.data_seed)
        }
        _ => bail!("one of --input or --synthetic is required"),
    };
    let constant_columns = data.constant_columns.iter().map(|&j| data.names[j].clone()).collect();
    if a.drop_constant {
        data = drop_constant_columns(&data);
    }
    if a.standardize {
        data = standardize(&data)?;
    }
    let (mut shifted_cols, mut shifted_zeros) = (None, None);
    if let Some(k) = a.mode_shift {
        let r = mode_shift(&data, k)?;
        shifted_cols = Some(r.affected_columns);
        shifted_zeros = Some(r.zeros_introduced);
        data = r.data;
    }
    let total = data.values.data.len().max(1) as f64;
    let summary = DataSummary {
        rows: data.rows(),
        cols: data.cols(),
        constant_columns,
        rows_dropped: data.rows_dropped,
        cells_imputed: data.cells_imputed,
        mode_shift_columns: shifted_cols,
        mode_shift_zeros: shifted_zeros,
        zero_fraction: data.values.data.iter().filter(|v| **v == 0.0).count() as f64 / total,
        warnings: data.warnings.clone(),
    };
    Ok((data, summary))
}

#[derive(Serialize)]
struct DiagnoseResult {
    data: DataSummary,
    curve: Vec<CurvePoint>,
}

fn diagnose(cli: &Cli, a: &crate::DiagnoseArgs) -> Result<()> {
    let (data, summary) = load_data(&a.data)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let curve = concentration_curve(&data, &p_grid_or_default(&a.p), a.delta, data_norm(a.normalization))?;
    let mut table = Table::new(&["p", "fraction"]);
    for c in &curve {
        table.push(vec![num(c.p), opt(c.fraction)]);
    }
    emit(cli, Format::Json, &DiagnoseResult { data: summary, curve }, &table)
}

#[derive(Serialize)]
struct PerturbResult {
    data: DataSummary,
    reports: Vec<PerturbReport>,
}

fn perturb_cmd(cli: &Cli, a: &crate::PerturbArgs) -> Result<()> {
    let (data, summary) = load_data(&a.data)?;
    let p_grid = p_grid_or_default(&a.p);
    let mut reports = Vec::new();
    let mut table = Table::new(&["gap_prob", "p", "quantity", "value"]);
    for &gap in &a.gap {
        let r = perturb(&data, gap, a.seed, &p_grid, a.delta, data_norm(a.normalization))?;
        for (q, v) in [
            ("realized_fraction", r.realized_fraction),
            ("wasserstein_total", r.wasserstein_total),
            ("ks_min_pvalue", r.ks_min_pvalue),
            ("ks_statistic_max", r.ks_statistic_max),
        ] {
            table.push(vec![num(gap), String::new(), q.into(), num(v)]);
        }
        for c in &r.curves {
            table.push(vec![num(gap), num(c.p), "frac_original".into(), opt(c.frac_original)]);
            table.push(vec![num(gap), num(c.p), "frac_perturbed".into(), opt(c.frac_perturbed)]);
        }
        reports.push(r);
    }
    emit(cli, Format::Json, &PerturbResult { data: summary, reports }, &table)
}

#[derive(Serialize)]
struct ValidateResult {
    distribution: String,
    assumptions: AssumptionReport,
    moments: Vec<MomentReport>,
}

fn validate(cli: &Cli, a: &crate::ValidateArgs) -> Result<()> {
    let dist = parse_dist(&a.dist)?;
    dist.validate()?;
    let assumptions = dist.validate_assumptions();
    let moments: Vec<MomentReport> = a.p.iter().map(|&p| dist.moment_report(p)).collect::<Result<_, _>>()?;
    let mut table = Table::new(&["p", "quantity", "value"]);
    for (q, v) in [
        ("a1_holds", assumptions.a1_holds),
        ("a2_holds", assumptions.a2_holds),
        ("a3_holds", assumptions.a3_holds),
        ("a4_holds", assumptions.a4_holds),
    ] {
        table.push(vec![String::new(), q.into(), v.to_string()]);
    }
    table.push(vec![String::new(), "atom_at_zero".into(), num(assumptions.atom_at_zero)]);
    for m in &moments {
        table.push(vec![num(m.p), "mu_p".into(), num(m.mu_p)]);
    }
    emit(cli, Format::Json, &ValidateResult { distribution: dist.to_string(), assumptions, moments }, &table)
}
