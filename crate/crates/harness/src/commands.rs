//! Subcommand implementations. Each command writes its CSV artifacts into the
//! output directory and returns the human-readable table destined for
//! standard output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use e2e_tcn::checkpoint;
use e2e_tcn::dataset::{save_csv, Window};
use e2e_tcn::quadstate::truncate_state;
use e2e_tcn::tcn::LossKind;

use crate::config::{ExperimentConfig, ModelKind};
use crate::data::{load_trajectories, prepare, PreparedData};
use crate::error::HarnessError;
use crate::reference::{ABLATION_REFERENCES, REFERENCE_LABEL, SCALING_REFERENCES};
use crate::report::{
    box_stats_csv, horizon_csv, percentile_csv, render_aligned, summary_steps, summary_table,
    HorizonErrors,
};
use crate::run::{evaluate_model, predict_windows, train_model, TrainedModel};

fn ensure_out(out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, loss) in curve.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, loss).unwrap();
    }
    out
}

/// Loads the model to evaluate: the parameter-free physics model directly
/// from the config, anything else from a checkpoint file.
fn load_model(
    cfg: &ExperimentConfig,
    checkpoint_path: Option<&Path>,
) -> Result<TrainedModel, HarnessError> {
    if cfg.kind == ModelKind::Physics {
        return Ok(TrainedModel {
            kind: ModelKind::Physics,
            networks: Vec::new(),
            norm: e2e_tcn::dataset::NormStats::identity(),
            physics: cfg.physics.clone(),
            optimizers: Vec::new(),
            loss_curves: Vec::new(),
        });
    }
    let path = checkpoint_path.ok_or_else(|| {
        HarnessError::Config(format!(
            "model kind `{}` needs --checkpoint <path>",
            cfg.kind.label()
        ))
    })?;
    let ckpt = checkpoint::load(path)?;
    TrainedModel::from_checkpoint(ckpt, cfg.kind, &cfg.physics)
}

/// Trains the configured model, then writes the checkpoint and one per-epoch
/// loss CSV per component network.
pub fn cmd_train(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<String, HarnessError> {
    if cfg.kind == ModelKind::Physics {
        return Err(HarnessError::Config(
            "model kind `physics` has no trainable parameters".into(),
        ));
    }
    ensure_out(out)?;
    let data = prepare(cfg, seed)?;
    let model = train_model(cfg, &data, seed)?;
    let ckpt = model.to_checkpoint().expect("non-physics model");
    let ckpt_path = out.join("model.ckpt");
    checkpoint::save(&ckpt_path, &ckpt)?;
    let mut table = String::new();
    for (i, curve) in model.loss_curves.iter().enumerate() {
        let name = out.join(format!("loss_{i}.csv"));
        write_file(&name, &loss_curve_csv(curve))?;
        writeln!(
            table,
            "network {i}: {} epochs, final loss {}",
            curve.len(),
            curve
                .last()
                .map(|l| format!("{l:.6e}"))
                .unwrap_or_else(|| "n/a".into()),
        )
        .unwrap();
    }
    writeln!(
        table,
        "wrote {} ({} windows trained, {} held out)",
        ckpt_path.display(),
        data.train_windows.len(),
        data.test_windows.len()
    )
    .unwrap();
    Ok(table)
}

fn run_evaluation(
    cfg: &ExperimentConfig,
    seed: u64,
    checkpoint_path: Option<&Path>,
) -> Result<(PreparedData, TrainedModel, HorizonErrors), HarnessError> {
    let data = prepare(cfg, seed)?;
    let mut model = load_model(cfg, checkpoint_path)?;
    if model.kind != ModelKind::Physics {
        // Evaluate with the checkpoint's stored normalization if present;
        // otherwise fall back to the stats fitted on this run's training split.
        if model.norm == e2e_tcn::dataset::NormStats::identity() {
            model.norm = data.norm.clone();
        }
    }
    let errors = evaluate_model(
        &model,
        &data,
        &data.test_windows,
        cfg.data.past,
        cfg.data.future,
        cfg.data.dt,
    )?;
    Ok((data, model, errors))
}

/// Evaluates over the test windows and writes the horizon/percentile CSVs
/// plus an aligned summary table with the published reference rows.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
    checkpoint_path: Option<&Path>,
) -> Result<String, HarnessError> {
    ensure_out(out)?;
    let (_, model, errors) = run_evaluation(cfg, seed, checkpoint_path)?;
    write_file(&out.join("horizon.csv"), &horizon_csv(&errors))?;
    write_file(&out.join("percentiles.csv"), &percentile_csv(&errors))?;
    let table = summary_table(model.kind.label(), &errors);
    write_file(&out.join("summary.txt"), &table)?;
    Ok(table)
}

/// Trains and evaluates one end-to-end model per layer count; records
/// parameter count, single-sample throughput and summary-horizon MSE.
pub fn cmd_scaling(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
    layers: &[usize],
) -> Result<String, HarnessError> {
    if layers.len() < 2 {
        return Err(HarnessError::Config(
            "scaling needs at least 2 layer counts".into(),
        ));
    }
    ensure_out(out)?;
    let mut base = cfg.clone();
    base.kind = ModelKind::EndToEnd;
    let data = prepare(&base, seed)?;
    let steps = summary_steps(base.data.future, base.data.dt);
    let probe = data.e2e_examples(&data.test_windows[..1], base.data.past, base.data.future)?;

    let mut csv = String::from(
        "layers,params,fps,velocity_mse_045,body_rate_mse_045,velocity_mse_090,body_rate_mse_090,source\n",
    );
    let mut rows: Vec<Vec<String>> = Vec::new();
    for &l in layers {
        let mut run_cfg = base.clone();
        run_cfg.blocks = l;
        let model = train_model(&run_cfg, &data, seed)?;
        let net = &model.networks[0];
        let params = net.param_count();
        // Median of 100 timed single-sample forward passes.
        let mut times: Vec<f64> = (0..100)
            .map(|_| {
                let start = Instant::now();
                net.predict(&probe[0].input).map(|_| start.elapsed().as_secs_f64())
            })
            .collect::<Result<_, _>>()?;
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let fps = 1.0 / ((times[49] + times[50]) / 2.0);
        let errors = evaluate_model(
            &model,
            &data,
            &data.test_windows,
            run_cfg.data.past,
            run_cfg.data.future,
            run_cfg.data.dt,
        )?;
        let (vel, rate) = errors.mse_curves();
        // Columns fixed at the 0.45 s / 0.90 s summary points (clamped to
        // the configured horizon).
        let s45 = *steps.get(1).unwrap_or(&1);
        let s90 = *steps.last().unwrap();
        writeln!(
            csv,
            "{},{},{},{},{},{},{},measured",
            l,
            params,
            fps,
            vel[s45 - 1],
            rate[s45 - 1],
            vel[s90 - 1],
            rate[s90 - 1]
        )
        .unwrap();
        rows.push(vec![
            l.to_string(),
            params.to_string(),
            format!("{fps:.1}"),
            format!("{:.4e}", vel[s45 - 1]),
            format!("{:.4e}", rate[s45 - 1]),
            format!("{:.4e}", vel[s90 - 1]),
            format!("{:.4e}", rate[s90 - 1]),
            "measured".into(),
        ]);
    }
    for r in SCALING_REFERENCES {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.layers, r.params, r.fps, r.t045.0, r.t045.1, r.t090.0, r.t090.1, REFERENCE_LABEL
        )
        .unwrap();
        rows.push(vec![
            r.layers.to_string(),
            r.params.to_string(),
            r.fps.to_string(),
            r.t045.0.to_string(),
            r.t045.1.to_string(),
            r.t090.0.to_string(),
            r.t090.1.to_string(),
            REFERENCE_LABEL.to_string(),
        ]);
    }
    write_file(&out.join("scaling.csv"), &csv)?;
    let header: Vec<String> = [
        "layers", "params", "fps", "vel@0.45s", "rate@0.45s", "vel@0.90s", "rate@0.90s", "source",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let table = render_aligned(&header, &rows);
    write_file(&out.join("scaling.txt"), &table)?;
    Ok(table)
}

/// The six architecture-switch rows of the ablation grid.
pub const ABLATION_VARIANTS: [(&str, bool, f64, bool, LossKind); 6] = [
    ("none", false, 0.0, false, LossKind::L2),
    ("BN", true, 0.0, false, LossKind::L2),
    ("BN+Drop", true, 0.1, false, LossKind::L2),
    ("BN+SG", true, 0.0, true, LossKind::L2),
    ("BN+WL2", true, 0.0, false, LossKind::WL2),
    ("BN+L1", true, 0.0, false, LossKind::L1),
];

/// Trains the six ablation variants on shared data and seed; reports
/// velocity and body-rate MSE at the 0.45 s summary point.
pub fn cmd_ablate(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<String, HarnessError> {
    ensure_out(out)?;
    let mut base = cfg.clone();
    base.kind = ModelKind::EndToEnd;
    let data = prepare(&base, seed)?;
    let steps = summary_steps(base.data.future, base.data.dt);
    let s45 = *steps.get(1).unwrap_or(&1);

    let mut csv = String::from("variant,velocity_mse,body_rate_mse,source\n");
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (label, bn, drop, sg, loss) in ABLATION_VARIANTS {
        let mut run_cfg = base.clone();
        run_cfg.batchnorm = bn;
        run_cfg.dropout = drop;
        run_cfg.shortened_gradient = sg;
        run_cfg.loss = loss;
        let model = train_model(&run_cfg, &data, seed)?;
        let errors = evaluate_model(
            &model,
            &data,
            &data.test_windows,
            run_cfg.data.past,
            run_cfg.data.future,
            run_cfg.data.dt,
        )?;
        let (vel, rate) = errors.mse_curves();
        writeln!(csv, "{},{},{},measured", label, vel[s45 - 1], rate[s45 - 1]).unwrap();
        rows.push(vec![
            label.to_string(),
            format!("{:.4e}", vel[s45 - 1]),
            format!("{:.4e}", rate[s45 - 1]),
            "measured".into(),
        ]);
    }
    for r in ABLATION_REFERENCES {
        writeln!(csv, "{},{},{},{}", r.variant, r.velocity, r.body_rate, REFERENCE_LABEL).unwrap();
        rows.push(vec![
            r.variant.to_string(),
            r.velocity.to_string(),
            r.body_rate.to_string(),
            REFERENCE_LABEL.to_string(),
        ]);
    }
    write_file(&out.join("ablation.csv"), &csv)?;
    let header: Vec<String> = ["variant", "velocity_mse", "body_rate_mse", "source"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table = render_aligned(&header, &rows);
    write_file(&out.join("ablation.txt"), &table)?;
    Ok(table)
}

/// Mean combined squared error of one window over the whole horizon.
fn window_error(errors: &HorizonErrors, w: usize) -> f64 {
    let steps = errors.steps() as f64;
    errors.velocity[w]
        .iter()
        .zip(&errors.body_rate[w])
        .map(|(v, r)| 0.5 * (v + r))
        .sum::<f64>()
        / steps
}

/// Summary covariates of one window: mean rates of change of position and
/// motor command, and roll/pitch variance, over the past+future span.
fn window_covariates(
    data: &PreparedData,
    w: &Window,
    past: usize,
    future: usize,
    dt: f64,
) -> (f64, f64, f64, f64) {
    let traj = &data.trajectories[w.traj_id];
    let span = (w.t0 + 1 - past)..=(w.t0 + future);
    let idx: Vec<usize> = span.collect();
    let mut pos_rate = 0.0;
    let mut cmd_rate = 0.0;
    for pair in idx.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        pos_rate += (traj.states[b].r - traj.states[a].r).norm() / dt;
        let mut du = 0.0;
        for m in 0..4 {
            du += (traj.controls[b].0[m] - traj.controls[a].0[m]).powi(2);
        }
        cmd_rate += du.sqrt() / dt;
    }
    let n = (idx.len() - 1) as f64;
    pos_rate /= n;
    cmd_rate /= n;
    let variance = |channel: usize| {
        let vals: Vec<f64> = idx.iter().map(|&k| traj.states[k].eta[channel]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64
    };
    (pos_rate, cmd_rate, variance(0), variance(1))
}

/// Error-distribution statistics plus a dump of the worst ceil(0.1 N)
/// windows with their prediction-vs-truth traces and summary covariates.
pub fn cmd_errdist(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
    checkpoint_path: Option<&Path>,
) -> Result<String, HarnessError> {
    ensure_out(out)?;
    let (data, model, errors) = run_evaluation(cfg, seed, checkpoint_path)?;
    write_file(&out.join("box_stats.csv"), &box_stats_csv(&errors))?;
    write_file(&out.join("percentiles.csv"), &percentile_csv(&errors))?;

    let n = errors.windows();
    let keep = (n as f64 * 0.1).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        window_error(&errors, b)
            .partial_cmp(&window_error(&errors, a))
            .unwrap()
            .then(a.cmp(&b))
    });
    let outliers = &order[..keep];
    let outlier_windows: Vec<Window> = outliers.iter().map(|&i| data.test_windows[i]).collect();
    let preds = predict_windows(
        &model,
        &data,
        &outlier_windows,
        cfg.data.past,
        cfg.data.future,
        cfg.data.dt,
    )?;

    let mut csv =
        String::from("rank,trajectory,t0,mean_error,position_rate,command_rate,roll_var,pitch_var\n");
    for (rank, (&i, w)) in outliers.iter().zip(&outlier_windows).enumerate() {
        let (pos_rate, cmd_rate, roll_var, pitch_var) =
            window_covariates(&data, w, cfg.data.past, cfg.data.future, cfg.data.dt);
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            rank + 1,
            w.traj_id,
            w.t0,
            window_error(&errors, i),
            pos_rate,
            cmd_rate,
            roll_var,
            pitch_var
        )
        .unwrap();
        // Prediction-vs-truth trace for this window.
        let mut trace = String::from(
            "step,t,pred_wx,pred_wy,pred_wz,pred_vx,pred_vy,pred_vz,\
             true_wx,true_wy,true_wz,true_vx,true_vy,true_vz\n",
        );
        let traj = &data.trajectories[w.traj_id];
        for (s, pred) in preds[rank].iter().enumerate() {
            let truth = truncate_state(&traj.states[w.t0 + 1 + s]).to_array();
            let p = pred.to_array();
            write!(trace, "{},{}", s + 1, (s + 1) as f64 * cfg.data.dt).unwrap();
            for v in p.iter().chain(truth.iter()) {
                write!(trace, ",{v}").unwrap();
            }
            trace.push('\n');
        }
        write_file(&out.join(format!("outlier_{:03}.csv", rank + 1)), &trace)?;
    }
    write_file(&out.join("outliers.csv"), &csv)?;

    let mut table = summary_table(model.kind.label(), &errors);
    writeln!(
        table,
        "\n{} of {} test windows dumped as outliers (see outliers.csv)",
        keep, n
    )
    .unwrap();
    Ok(table)
}

/// Generates synthetic telemetry and writes one CSV flight per trajectory.
pub fn cmd_synth(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<String, HarnessError> {
    ensure_out(out)?;
    let trajectories = load_trajectories(cfg, seed)?;
    for (i, traj) in trajectories.iter().enumerate() {
        let path = out.join(format!("flight_{i:03}.csv"));
        save_csv(&path, traj).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(format!(
        "wrote {} flights of {} samples to {}\n",
        trajectories.len(),
        cfg.data.samples,
        out.display()
    ))
}
