use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use kshrink_core::estimators::{self, EstimateSet, EstimatorKind};
use kshrink_core::model::io::{format_f64, read_ksample_csv, read_regression_csv};
use kshrink_core::model::{canonicalize_ksample, canonicalize_regression, pooled_summary};
use kshrink_core::montecarlo::{run_experiment, validate_identities, validate_uer};
use kshrink_core::risk::{check_hb1_conditions, check_hb2_conditions, ConditionReport};
use kshrink_core::{CanonicalModel, ExperimentConfig, LossSpec, QSpec, ShrinkageFunctions, TrueParameters};
use kshrink_core::{DMatrix, DVector};

use crate::config::{DataFormat, EstimateSection, FileConfig};
use crate::error::CliError;
use crate::Cli;

/// Header of the `estimate` output.
pub const ESTIMATE_HEADER: [&str; 5] = ["estimator", "item", "population", "coordinate", "value"];

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Input(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(r) = cli.replicates {
        cfg.replicates = r;
    }
    if let Some(s2) = cli.sigma2 {
        cfg.sigma2 = s2;
    }
    if !cli.estimator.is_empty() {
        cfg.estimators = cli.estimator.clone();
    }
}

fn run_and_report(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let table = run_experiment(cfg)?;
    match &cli.output {
        Some(path) => {
            table.write_csv(open_output(Some(path))?)?;
            print!("{}", table.to_text());
        }
        None => table.write_csv(open_output(None)?)?,
    }
    Ok(())
}

pub fn simulate(cli: &Cli, file: &FileConfig) -> Result<(), CliError> {
    let mut cfg = file
        .experiment
        .clone()
        .ok_or_else(|| CliError::Input("simulate needs an [experiment] section in --config".into()))?;
    apply_overrides(cli, &mut cfg);
    run_and_report(cli, &cfg)
}

pub fn table1(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::reference();
    apply_overrides(cli, &mut cfg);
    run_and_report(cli, &cfg)
}

/// Reads the data files named by `--input` and reduces them to canonical form.
/// Returns the model and one label per population.
fn load_model(cli: &Cli, sec: &EstimateSection) -> Result<(CanonicalModel, Vec<String>), CliError> {
    if cli.input.is_empty() {
        return Err(CliError::Input("estimate needs --input".into()));
    }
    let read = |p: &Path| File::open(p).map_err(|e| CliError::Input(format!("cannot open {}: {e}", p.display())));
    let in_file = |p: &Path, e: kshrink_core::Error| CliError::Input(format!("{}: {e}", p.display()));
    let format = if cli.input.len() > 1 { DataFormat::Regression } else { sec.format };
    match format {
        DataFormat::Ksample => {
            let path = &cli.input[0];
            let data = read_ksample_csv(read(path)?).map_err(|e| in_file(path, e))?;
            let p = data.groups[0][0].len();
            let k = data.labels.len();
            let v0 = match sec.v0.len() {
                1 => vec![sec.v0[0].to_matrix(p)?; k],
                len if len == k => sec.v0.iter().map(|s| s.to_matrix(p)).collect::<Result<Vec<_>, _>>()?,
                len => return Err(CliError::Input(format!("{len} v0 matrices for {k} groups"))),
            };
            let m = canonicalize_ksample(&data.groups, &v0)?;
            Ok((m, data.labels))
        }
        DataFormat::Regression => {
            let mut ys: Vec<DVector<f64>> = Vec::new();
            let mut zs: Vec<DMatrix<f64>> = Vec::new();
            for path in &cli.input {
                let (y, z) = read_regression_csv(read(path)?).map_err(|e| in_file(path, e))?;
                ys.push(y);
                zs.push(z);
            }
            let labels = (1..=ys.len()).map(|i| i.to_string()).collect();
            Ok((canonicalize_regression(&ys, &zs)?, labels))
        }
    }
}

fn loss_spec(q: &QSpec, v: &[DMatrix<f64>]) -> Result<LossSpec, CliError> {
    let p = v.first().map_or(0, |m| m.nrows());
    Ok(match q {
        QSpec::InverseOfV => LossSpec::inverse_of(v)?,
        QSpec::Identity => LossSpec::identity(v)?,
        QSpec::Explicit(specs) => {
            if specs.len() != v.len() {
                return Err(CliError::Input(format!("{} Q matrices for {} populations", specs.len(), v.len())));
            }
            let q = specs.iter().map(|s| s.to_matrix(p)).collect::<Result<Vec<_>, _>>()?;
            LossSpec::new(q, v)?
        }
    })
}

/// Applies every requested estimator to the data, in order.
pub fn estimate_all(
    m: &CanonicalModel,
    sec: &EstimateSection,
    kinds: &[EstimatorKind],
    hyper: &kshrink_core::Hyperparameters,
) -> Result<Vec<(EstimatorKind, EstimateSet)>, CliError> {
    let ls = loss_spec(&sec.q, &m.v)?;
    let ps = pooled_summary(m, &ls)?;
    kinds
        .iter()
        .map(|&kind| Ok((kind, estimators::estimate(kind, m, &ls, &ps, hyper)?)))
        .collect()
}

pub fn write_estimates<W: Write>(w: W, labels: &[String], results: &[(EstimatorKind, EstimateSet)]) -> Result<(), CliError> {
    let to_input = |e: csv::Error| CliError::Input(e.to_string());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(ESTIMATE_HEADER).map_err(to_input)?;
    for (kind, est) in results {
        for (label, mu) in labels.iter().zip(&est.mu_hat) {
            for (j, value) in mu.iter().enumerate() {
                wr.write_record([kind.name(), "mu_hat", label, &(j + 1).to_string(), &format_f64(*value)])
                    .map_err(to_input)?;
            }
        }
        for (name, value) in &est.diagnostics {
            wr.write_record([kind.name(), name, "", "", &format_f64(*value)]).map_err(to_input)?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn estimate(cli: &Cli, file: &FileConfig) -> Result<(), CliError> {
    let sec = file.estimate.clone().unwrap_or_default();
    let hyper = file.hyper.unwrap_or_default();
    let kinds = if cli.estimator.is_empty() { sec.estimators.clone() } else { cli.estimator.clone() };
    let (m, labels) = load_model(cli, &sec)?;
    let results = estimate_all(&m, &sec, &kinds, &hyper)?;
    write_estimates(open_output(cli.output.as_deref())?, &labels, &results)
}

fn print_report(name: &str, r: &ConditionReport) {
    println!("{name}: minimax = {}", r.minimax);
    if let Some(pp) = r.proper_prior {
        println!("{name}: proper_prior = {pp}");
    }
    if let Some(f) = r.proper_minimax_feasible {
        println!("{name}: proper_minimax_feasible = {f}");
    }
    for (key, value) in &r.margins {
        println!("{name}:   {key:<16} {value}");
    }
    for key in &r.failed {
        println!("{name}: FAILED {key}");
    }
}

pub fn check_conditions(file: &FileConfig) -> Result<(), CliError> {
    let c = file.conditions.clone().unwrap_or_default();
    let hb1 = check_hb1_conditions(c.a, c.c, c.p, c.k, c.n);
    let hb2 = check_hb2_conditions(c.a, c.b, c.c, c.p, c.k, c.n);
    println!("a = {}, b = {}, c = {}, p = {}, k = {}, n = {}", c.a, c.b, c.c, c.p, c.k, c.n);
    print_report("HB1", &hb1);
    print_report("HB2", &hb2);
    if hb1.minimax && hb2.minimax {
        Ok(())
    } else {
        Err(CliError::Failed("minimaxity conditions not satisfied".into()))
    }
}

/// Shrinkage functions checked by `validate`.
pub fn uer_members(cfg: &ExperimentConfig) -> Result<Vec<ShrinkageFunctions>, CliError> {
    let (p, k, n) = (cfg.p, cfg.k, cfg.n);
    let qmin = cfg.loss_spec(&cfg.v_matrices()?)?.qmin;
    let t1 = (p as f64 * (k as f64 - 1.0) - 2.0) / (n as f64 + 2.0);
    let t2 = (p as f64 - 2.0) / (n as f64 + 2.0);
    let h = cfg.hyper;
    Ok(vec![
        ShrinkageFunctions::truncated_phi(t1),
        ShrinkageFunctions::truncated_pair(t1, t2),
        ShrinkageFunctions::hb1(qmin, p, k, n, h.a, h.c),
    ])
}

/// Truth points checked by `validate`: the first, the "i j_p" and the last mean configuration.
pub fn uer_points(cfg: &ExperimentConfig) -> Result<Vec<TrueParameters>, CliError> {
    let mut truths = cfg.truths()?;
    let ramp = TrueParameters::new(
        (1..=cfg.k).map(|i| DVector::from_element(cfg.p, i as f64)).collect(),
        cfg.sigma2,
    )?;
    let last = truths.pop();
    let mut out = vec![truths.first().cloned().unwrap_or_else(|| ramp.clone()), ramp];
    out.extend(last);
    Ok(out)
}

pub fn validate(cli: &Cli, file: &FileConfig) -> Result<(), CliError> {
    let mut ident = file.identities.clone().unwrap_or_default();
    if let Some(s) = cli.seed {
        ident.seed = s;
    }
    if let Some(t) = cli.threads {
        ident.threads = Some(t);
    }
    if let Some(r) = cli.replicates {
        ident.draws = r;
    }
    let mut cfg = file.experiment.clone().unwrap_or_else(|| {
        let mut c = ExperimentConfig::reference();
        c.replicates = 100_000;
        c
    });
    apply_overrides(cli, &mut cfg);

    let mut ok = true;
    let report = validate_identities(&ident)?;
    for c in &report.checks {
        println!(
            "{} {:<28} lhs {:.6} rhs {:.6} se {:.2e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.lhs,
            c.rhs,
            c.se_diff
        );
    }
    ok &= report.passed;

    let points = uer_points(&cfg)?;
    for sf in uer_members(&cfg)? {
        let r = validate_uer(&cfg, &sf, &points)?;
        for pt in &r.points {
            println!(
                "{} uer {:<28} point {} uer {:.6} loss {:.6} se {:.2e}",
                if pt.passed { "PASS" } else { "FAIL" },
                r.label,
                pt.index,
                pt.mean_uer,
                pt.mean_loss,
                pt.se_diff
            );
        }
        ok &= r.passed;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed("at least one Monte Carlo check failed".into()))
    }
}
