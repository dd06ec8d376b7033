//! The four commands, as functions returning what they print.

use std::fs;
use std::path::Path;

use continuum::eval::{
    correlations, kde_1d, kde_grid, latent_scatter, nn_regress, KdeReport, LatentScatter, NnRegressionReport,
};
use continuum::kernels::{median_heuristic, KernelSpec};
use continuum::model::{encode, read_checkpoint, train, write_checkpoint, ModelError, WaeParams};
use continuum::seeded_rng;
use continuum::stats::{hsic_b, mmd_u_sq, permutation_null, MIN_PERMUTATIONS};
use continuum::synth::{export_dataset, generate, import_dataset, MANIFEST};
use continuum::table::read_matrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde_json::json;

use crate::config::{EvalOptions, RunConfig};
use crate::error::CliError;
use crate::report::{
    kde_csv, metrics_csv, regression_csv, scatter_csv, scatter_svg, AxisSummary, HsicSummary, KdeLevel,
    KdeSummary, PcSummary, RegressionSummary, Summary,
};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const EVAL_DIR: &str = "eval";

/// Eval RNG streams (training uses 10–12).
const STREAM_NN: u64 = 20;
const STREAM_PERM_IND: u64 = 21;
const STREAM_PERM_DEP: u64 = 22;

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn gen_data(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let spec = cfg.synthetic_spec()?;
    let ds = generate(&spec)?;
    let dir = cfg.data_dir(out_dir);
    export_dataset(&ds, &dir)?;
    let mut report = format!(
        "wrote {} images to {} (train {}, test {})\n",
        ds.len(),
        dir.display(),
        ds.train.len(),
        ds.test.len()
    );
    for level in 1..=spec.levels {
        let count = ds.levels.iter().filter(|&&l| l == level as f64).count();
        report.push_str(&format!("level {level}: {count}\n"));
    }
    Ok(report)
}

pub fn train_run(cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let config = cfg.training_config()?;
    let data_dir = cfg.data_dir(out_dir);
    if !data_dir.join(MANIFEST).is_file() {
        return Err(CliError::io(
            &data_dir.join(MANIFEST),
            "dataset not found (run gen-data first)",
        ));
    }
    let ds = import_dataset(&data_dir)?;
    let (x, s) = ds.train_set();
    let outcome = train(&config, &x, &s).map_err(|e| match e {
        ModelError::NonFinite { step, source } => {
            CliError::numeric(format!("training aborted at step {step}: {source}"))
        }
        other => other.into(),
    })?;
    create_dir(out_dir)?;
    write(&out_dir.join(METRICS_FILE), &metrics_csv(&outcome.trace))?;
    let ckpt = out_dir.join(CHECKPOINT_FILE);
    write_checkpoint(&ckpt, &config, &outcome.params)?;
    let mut report = format!("trained {} steps on {} rows\n", config.steps, x.nrows());
    if let Some(last) = outcome.trace.last() {
        report.push_str(&format!(
            "final: recon {:.6} mmd {:.6} hsic_ind {:.6} hsic_dep {:.6} total {:.6}\n",
            last.recon, last.mmd, last.hsic_ind, last.hsic_dep, last.total
        ));
    }
    report.push_str(&format!("wrote {} and {}\n", out_dir.join(METRICS_FILE).display(), ckpt.display()));
    Ok(report)
}

/// Everything `eval` computes for one model and test set.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: Summary,
    pub scatter: LatentScatter,
    pub kde: KdeReport,
    pub regression: NnRegressionReport,
}

fn rbf_median(x: ArrayView2<f64>) -> Result<KernelSpec, CliError> {
    let s2 = median_heuristic(x).map_err(|e| CliError::config(e.to_string()))?;
    KernelSpec::rbf(s2).map_err(|e| CliError::config(e.to_string()))
}

/// `hsic_b` with median-trick RBF kernels on both sides, plus its
/// permutation null when `permutations > 0`.
pub fn hsic_with_null(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    permutations: usize,
    rng: &mut continuum::Rng,
) -> Result<HsicSummary, CliError> {
    let (ka, kb) = (rbf_median(a)?, rbf_median(b)?);
    if permutations == 0 {
        return Ok(HsicSummary {
            value: hsic_b(&ka, &kb, a, b)?.value,
            permutations,
            p_value: None,
            null_q95: None,
        });
    }
    let null = permutation_null(&ka, &kb, a, b, permutations, rng)?;
    Ok(HsicSummary {
        value: null.observed,
        permutations,
        p_value: Some(null.p_value),
        null_q95: Some(null.quantile(0.95)),
    })
}

pub fn evaluate(
    params: &WaeParams,
    test_x: &Array2<f64>,
    test_s: &Array1<f64>,
    opts: &EvalOptions,
    seed: u64,
) -> Result<Evaluation, CliError> {
    let d_z = params.d_z();
    if d_z < 2 {
        return Err(CliError::config(format!("evaluation needs d_z >= 2, checkpoint has {d_z}")));
    }
    let z = encode(&params.encoder, test_x.view())?;
    let corr = correlations(z.z.view(), test_s.view())?;
    let scatter = latent_scatter(z.z.view(), test_s.view())?;
    let grid = kde_grid(scatter.z_dep.view(), test_s.view(), opts.kde_points);
    let kde = kde_1d(scatter.z_dep.view(), test_s.view(), &grid)?;
    let regression = nn_regress(
        &params.decoder,
        test_x.view(),
        test_s.view(),
        opts.k,
        opts.n_gen,
        opts.mode,
        &mut seeded_rng(seed, STREAM_NN),
    )?;
    let s_col = test_s.clone().insert_axis(Axis(1));
    let z_ind = z.ind().to_owned();
    let z_dep = z.dep().to_owned().insert_axis(Axis(1));
    let hsic_ind = hsic_with_null(z_ind.view(), s_col.view(), opts.permutations, &mut seeded_rng(seed, STREAM_PERM_IND))?;
    let hsic_dep = hsic_with_null(z_dep.view(), s_col.view(), opts.permutations, &mut seeded_rng(seed, STREAM_PERM_DEP))?;

    let summary = Summary {
        seed,
        n_test: test_x.nrows(),
        d_z,
        spearman_dep: corr[0].spearman,
        max_abs_spearman_ind: corr[1..].iter().map(|c| c.spearman.abs()).fold(0.0, f64::max),
        correlations: corr
            .iter()
            .map(|c| AxisSummary {
                axis: c.axis,
                pearson: c.pearson,
                spearman: c.spearman,
                zero_variance: c.zero_variance,
            })
            .collect(),
        regression: RegressionSummary {
            k: opts.k,
            n_gen: opts.n_gen,
            mode: opts.mode.name(),
            slope: regression.fit.slope,
            intercept: regression.fit.intercept,
            r: regression.fit.r,
        },
        hsic_ind,
        hsic_dep,
        pc1: PcSummary {
            direction: scatter.pc.direction.to_vec(),
            variance: scatter.pc.variance,
            degenerate: scatter.pc.degenerate,
        },
        kde: KdeSummary {
            levels: kde
                .curves
                .iter()
                .map(|c| KdeLevel {
                    level: c.level,
                    count: c.count,
                    bandwidth: c.bandwidth,
                })
                .collect(),
            skipped_levels: kde.skipped.iter().map(|&(l, _)| l).collect(),
        },
    };
    Ok(Evaluation {
        summary,
        scatter,
        kde,
        regression,
    })
}

pub fn eval_run(cfg: &RunConfig, out_dir: &Path, checkpoint: Option<&Path>) -> Result<String, CliError> {
    let opts = cfg.eval_options()?;
    let ckpt = checkpoint.map_or_else(|| out_dir.join(CHECKPOINT_FILE), Path::to_path_buf);
    let (_, params) = read_checkpoint(&ckpt)?;
    let expected = cfg.training_config_with_seed(0)?.d_z;
    if params.d_z() != expected {
        return Err(CliError::config(format!(
            "checkpoint {} has d_z = {}, config expects {expected}",
            ckpt.display(),
            params.d_z()
        )));
    }
    let ds = import_dataset(&cfg.data_dir(out_dir))?;
    if ds.test.is_empty() {
        return Err(CliError::config("dataset has no test split"));
    }
    if ds.images.ncols() != params.d_x() {
        return Err(CliError::config(format!(
            "checkpoint expects {} pixels per image, dataset has {}",
            params.d_x(),
            ds.images.ncols()
        )));
    }
    let (tx, ts) = ds.test_set();
    let seed = cfg.seed.unwrap_or(0);
    let ev = evaluate(&params, &tx, &ts, &opts, seed)?;

    let dir = out_dir.join(EVAL_DIR);
    create_dir(&dir)?;
    write(&dir.join("scatter.csv"), &scatter_csv(&ev.scatter))?;
    write(&dir.join("kde.csv"), &kde_csv(&ev.kde))?;
    write(&dir.join("regression.csv"), &regression_csv(&ev.regression))?;
    let summary = serde_json::to_string_pretty(&ev.summary).expect("summary serializes");
    write(&dir.join("summary.json"), &(summary.clone() + "\n"))?;
    if opts.svg {
        write(&dir.join("scatter.svg"), &scatter_svg(&ev.scatter))?;
    }
    let mut report = summary;
    report.push('\n');
    for (level, count) in &ev.kde.skipped {
        eprintln!("warning: level {level} has {count} test point(s); no KDE curve");
    }
    Ok(report)
}

/// Parses `rbf` (median trick), `rbf:<sigma_sq>` or `imq`.
pub fn parse_kernel(name: &str, data: ArrayView2<f64>) -> Result<KernelSpec, CliError> {
    match name {
        "rbf" => rbf_median(data),
        "imq" => Ok(KernelSpec::Imq),
        other => {
            let s2 = other
                .strip_prefix("rbf:")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CliError::config(format!("unknown kernel {other:?} (expected rbf, rbf:<sigma_sq> or imq)")))?;
            KernelSpec::rbf(s2).map_err(|e| CliError::config(e.to_string()))
        }
    }
}

fn kernel_json(k: &KernelSpec) -> serde_json::Value {
    match k {
        KernelSpec::Rbf { sigma_sq } => json!({"name": "rbf", "sigma_sq": sigma_sq}),
        KernelSpec::Imq => json!({"name": "imq"}),
    }
}

pub fn hsic_run(
    x_path: &Path,
    y_path: &Path,
    kernel: &str,
    permutations: usize,
    mmd: bool,
    seed: u64,
) -> Result<String, CliError> {
    let x = read_matrix(x_path)?;
    let y = read_matrix(y_path)?;
    let value = if mmd {
        if permutations > 0 {
            return Err(CliError::config("--permutations applies to HSIC only"));
        }
        if x.ncols() != y.ncols() {
            return Err(CliError::config(format!(
                "MMD needs equal column counts, got {} and {}",
                x.ncols(),
                y.ncols()
            )));
        }
        let pooled = ndarray::concatenate(Axis(0), &[x.view(), y.view()]).expect("same width");
        let k = parse_kernel(kernel, pooled.view())?;
        let est = mmd_u_sq(&k, x.view(), y.view())?;
        json!({
            "statistic": "mmd_u_sq",
            "value": est.value,
            "m": est.m,
            "n": est.n,
            "kernel": kernel_json(&k),
        })
    } else {
        if permutations != 0 && permutations < MIN_PERMUTATIONS {
            return Err(CliError::config(format!(
                "--permutations must be 0 or at least {MIN_PERMUTATIONS}"
            )));
        }
        if x.nrows() != y.nrows() {
            return Err(CliError::config(format!(
                "HSIC needs paired rows, got {} and {}",
                x.nrows(),
                y.nrows()
            )));
        }
        let kx = parse_kernel(kernel, x.view())?;
        let ky = parse_kernel(kernel, y.view())?;
        let (value, p) = if permutations > 0 {
            let null = permutation_null(&kx, &ky, x.view(), y.view(), permutations, &mut seeded_rng(seed, 0))?;
            (null.observed, Some(null.p_value))
        } else {
            (hsic_b(&kx, &ky, x.view(), y.view())?.value, None)
        };
        json!({
            "statistic": "hsic_b",
            "value": value,
            "n": x.nrows(),
            "kernel_x": kernel_json(&kx),
            "kernel_y": kernel_json(&ky),
            "permutations": permutations,
            "p_value": p,
        })
    };
    Ok(format!("{value}\n"))
}
