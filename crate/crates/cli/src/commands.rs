//! One function per subcommand; each writes its CSV outputs and a JSON
//! provenance sidecar into the output directory.

use std::path::{Path, PathBuf};

use aggar_core::disagg::{
    estimate, evaluate_phi_hat, evaluation_grid, handbook_normalizer_gram, mise_experiment, sample_autocovs,
    select_k, truncate, GegenbauerBasis, IseReference,
};
use aggar_core::limits::{self, run_scaling_experiment, IidNormalSource, PanelSource, ScalingExperiment};
use aggar_core::{simulate_aggregate, LevyTriplet, MixingLaw};
use serde_json::json;

use crate::config::{RunConfig, SourceKey};
use crate::error::CliError;
use crate::output::{ensure_dir, num, opt_num, read_series, write_csv, write_json, Provenance};

const AUTOCOV_LAGS: usize = 100;

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(out)?;
    let panel = cfg.panel()?;
    let series = simulate_aggregate(&panel)?;
    let series_csv = out.join("series.csv");
    write_csv(
        &series_csv,
        &["t", "value"],
        series.values.iter().enumerate().map(|(t, v)| vec![(t + 1).to_string(), num(*v)]),
    )?;
    let lags = AUTOCOV_LAGS.min(series.values.len() - 1);
    let r = sample_autocovs(&series.values, lags)?;
    let autocov_csv = out.join("autocov.csv");
    write_csv(&autocov_csv, &["lag", "r_hat"], r.iter().enumerate().map(|(j, v)| vec![j.to_string(), num(*v)]))?;
    let outputs = vec![series_csv, autocov_csv];
    let details = json!({
        "sigma_w2": series.sigma_w2_true,
        "init_bias_bound": series.init_bias_bound,
        "n": series.values.len(),
    });
    let sidecar = out.join("series.json");
    write_json(&sidecar, &Provenance::new("simulate", cfg, &outputs, details))?;
    Ok(with(outputs, sidecar))
}

fn with(mut v: Vec<PathBuf>, p: PathBuf) -> Vec<PathBuf> {
    v.push(p);
    v
}

/// Stable index reported next to a regime: 2 without jumps.
fn alpha_of(t: &LevyTriplet) -> Option<f64> {
    if t.has_jumps() {
        t.small_jump_index()
    } else {
        Some(2.0)
    }
}

pub fn theory(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(out)?;
    let m = cfg.mixing()?;
    let t = cfg.triplet()?;
    let s2 = t.second_moment();
    let cov_csv = out.join("covariance.csv");
    let r: Vec<f64> = (0..=cfg.theory.max_lag).map(|k| m.theoretical_r(k, s2)).collect::<Result<_, _>>()?;
    write_csv(&cov_csv, &["t", "r"], r.iter().enumerate().map(|(k, v)| vec![k.to_string(), num(*v)]))?;
    let cf_csv = out.join("cf.csv");
    let mut cf_rows = Vec::new();
    for &th in &cfg.theory.thetas {
        let v = limits::theta_log_cf(th, &m, &t, cfg.theory.tol)?;
        cf_rows.push(vec![num(th), num(v.re), num(v.im)]);
    }
    write_csv(&cf_csv, &["theta", "log_cf_re", "log_cf_im"], cf_rows)?;
    let mut outputs = vec![cov_csv, cf_csv];
    let mut details = json!({ "sigma_w2": s2 });
    if m.edge_beta().is_some() {
        let report = limits::classify(&m, &t)?;
        let regime_csv = out.join("regime.csv");
        write_csv(
            &regime_csv,
            &["regime", "beta", "alpha", "exponent", "limit"],
            [vec![
                report.regime.label().into(),
                opt_num(m.edge_beta()),
                opt_num(alpha_of(&t)),
                num(report.exponent),
                report.limit_name.clone(),
            ]],
        )?;
        outputs.push(regime_csv);
        details["regime"] = json!({
            "regime": report.regime.label(),
            "exponent": report.exponent,
            "limit": report.limit_name,
            "constants": report.constants,
        });
    }
    let conditions = m.check_conditions(cfg.disagg.q);
    details["conditions"] = json!({
        "q": cfg.disagg.q,
        "q_valid": conditions.q_valid,
        "moment_ok": conditions.moment_ok,
        "phicond_ok": conditions.phicond_ok,
        "q_admissible_range": [conditions.q_admissible_range.0, conditions.q_admissible_range.1],
    });
    let sidecar = out.join("theory.json");
    write_json(&sidecar, &Provenance::new("theory", cfg, &outputs, details))?;
    Ok(with(outputs, sidecar))
}

pub fn scaling(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(out)?;
    let sc = &cfg.scaling;
    let grid = sc.grid();
    let (exp, regime_row): (ScalingExperiment, [String; 4]) = match sc.source {
        SourceKey::IidNormal => (
            run_scaling_experiment(&IidNormalSource { seed: cfg.seed }, &grid, sc.replications, sc.scale_stat.into())?,
            ["oracle".into(), "NA".into(), num(2.0), num(0.5)],
        ),
        SourceKey::Panel => {
            let panel = cfg.panel()?;
            let row = match panel.mixing.edge_beta() {
                Some(beta) => {
                    let report = limits::classify(&panel.mixing, &panel.triplet)?;
                    [report.regime.label().into(), num(beta), opt_num(alpha_of(&panel.triplet)), num(report.exponent)]
                }
                None => ["NA".into(), "NA".into(), opt_num(alpha_of(&panel.triplet)), "NA".into()],
            };
            let source = PanelSource { template: panel };
            (run_scaling_experiment(&source, &grid, sc.replications, sc.scale_stat.into())?, row)
        }
    };
    let sums_csv = out.join("partial_sums.csv");
    let mut rows = Vec::with_capacity(exp.sums.len() * grid.len());
    for (g, &n) in exp.n_grid.iter().enumerate() {
        for (r, s) in exp.sums.iter().enumerate() {
            rows.push(vec![n.to_string(), r.to_string(), num(s[g])]);
        }
    }
    write_csv(&sums_csv, &["n", "replicate", "S_n"], rows)?;
    let summary_csv = out.join("scaling_summary.csv");
    let [regime, beta, alpha, h_theory] = regime_row;
    write_csv(
        &summary_csv,
        &["regime", "beta", "alpha", "H_theory", "H_hat", "stderr"],
        [vec![regime, beta, alpha, h_theory, num(exp.exponent), num(exp.stderr)]],
    )?;
    let outputs = vec![sums_csv, summary_csv];
    let details = json!({
        "n_grid": exp.n_grid,
        "scales": exp.scales,
        "exponent": exp.exponent,
        "stderr": exp.stderr,
        "replications": exp.replications,
        "scale_stat": format!("{:?}", exp.scale_stat),
    });
    let sidecar = out.join("scaling.json");
    write_json(&sidecar, &Provenance::new("scaling", cfg, &outputs, details))?;
    Ok(with(outputs, sidecar))
}

pub fn disagg(cfg: &RunConfig, out: &Path, normalizer_diagnostic: bool) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(out)?;
    let d = &cfg.disagg;
    let (series, truth): (Vec<f64>, Option<MixingLaw>) = match &d.input {
        Some(path) => (read_series(Path::new(path))?, None),
        None => {
            let panel = cfg.panel()?;
            (simulate_aggregate(&panel)?.values, Some(panel.mixing))
        }
    };
    let auto_k = select_k(series.len(), d.gamma)?;
    let ks = d.k.clone().unwrap_or_else(|| vec![auto_k]);
    if ks.is_empty() {
        return Err(CliError::Config("[disagg] k must list at least one degree".into()));
    }
    if d.grid_points == 0 {
        return Err(CliError::Config("[disagg] grid_points must be positive".into()));
    }
    let k_max = *ks.iter().max().expect("nonempty");
    let basis = GegenbauerBasis::new(d.q, k_max)?;
    let full = estimate(&series, &basis, d.sigma_w2)?;
    let reference = match &truth {
        Some(m) if m.check_conditions(d.q).phicond_ok => Some(IseReference::new(m, &basis)?),
        _ => None,
    };
    let grid = evaluation_grid(d.grid_points);
    let mut outputs = Vec::new();
    let mut estimates = Vec::new();
    for &k in &ks {
        let est = truncate(&full, k);
        let path = out.join(format!("phi_hat_K{k}.csv"));
        let rows: Vec<Vec<String>> = grid
            .iter()
            .map(|&x| evaluate_phi_hat(&est, &basis, x).map(|v| vec![num(x), num(v)]))
            .collect::<Result<_, _>>()?;
        write_csv(&path, &["x", "phi_hat"], rows)?;
        let sidecar = out.join(format!("phi_hat_K{k}.json"));
        write_json(
            &sidecar,
            &json!({
                "q": est.q,
                "K": est.degree,
                "zeta": est.zeta,
                "sigma_w2": est.sigma_w2,
                "mode": est.mode,
                "n": est.n,
                "ise": reference.as_ref().map(|r| r.ise(&est)),
            }),
        )?;
        estimates.push(json!({ "K": k, "ise": reference.as_ref().map(|r| r.ise(&est)) }));
        outputs.push(path);
        outputs.push(sidecar);
    }
    if normalizer_diagnostic {
        let path = out.join("normalizer_diagnostic.csv");
        let k = k_max.min(20);
        let standard = GegenbauerBasis::new(d.q, k)?.gram(k + 2)?;
        let handbook = handbook_normalizer_gram(d.q, k)?;
        let mut rows = Vec::new();
        for j in 0..=k {
            for i in 0..=k {
                rows.push(vec![j.to_string(), i.to_string(), num(standard[j][i]), num(handbook[j][i])]);
            }
        }
        write_csv(&path, &["j", "k", "gram_standard", "gram_handbook"], rows)?;
        eprintln!(
            "normalizer diagnostic (q = {}): <G0,G0> = {} with the standard norm, {} with the printed constant",
            d.q, standard[0][0], handbook[0][0]
        );
        outputs.push(path);
    }
    let details = json!({
        "n": series.len(),
        "K_selected": auto_k,
        "gamma": d.gamma,
        "estimates": estimates,
    });
    let sidecar = out.join("disagg.json");
    write_json(&sidecar, &Provenance::new("disagg", cfg, &outputs, details))?;
    Ok(with(outputs, sidecar))
}

pub fn mise(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(out)?;
    let panel = cfg.panel()?;
    let ms = &cfg.mise;
    let rows = mise_experiment(&panel, &ms.q_grid, &ms.k_grid, ms.replications)?;
    let path = out.join("mise.csv");
    write_csv(
        &path,
        &["q", "K", "mise", "stderr"],
        rows.iter().map(|r| vec![num(r.q), r.k.to_string(), num(r.mise), num(r.stderr)]),
    )?;
    let outputs = vec![path];
    let sidecar = out.join("mise.json");
    write_json(&sidecar, &Provenance::new("mise", cfg, &outputs, json!({ "replications": ms.replications })))?;
    Ok(with(outputs, sidecar))
}

