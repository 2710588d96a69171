//! Pipelines behind each subcommand and their CSV outputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use pqmt::classifier::{train, TrainConfig};
use pqmt::dataio::{load_idx, subset_classes, write_json, Cell, Dataset, Split, Table};
use pqmt::experiments::{
    marginals_from_ensemble, run_device_hysteresis, run_ensemble, run_network_hysteresis, DeviceConfig, Drive, NetworkConfig,
};
use pqmt::metrics::separability;
use pqmt::reservoir::{results_table, ImageResult, Readout, Reservoir, ReservoirConfig};
use pqmt::UpdateOrder;

use crate::config::{Command, Resolved};

pub fn dispatch(cmd: Command, resolved: &Value, out: &Path) -> Result<Value> {
    let cfg = Resolved(resolved);
    match cmd {
        Command::DeviceHysteresis => device(&cfg, out),
        Command::NetworkHysteresis => network(&cfg, out),
        Command::Ensemble => ensemble(&cfg, out),
        Command::Marginal => marginal(&cfg, out),
        Command::Reservoir => reservoir(&cfg, out),
        Command::Train => train_readout(&cfg, out),
    }
}

fn write(table: &Table, out: &Path, name: &str) -> Result<()> {
    let path = out.join(name);
    table.write(&path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn half_flag(first_half: bool) -> Cell {
    Cell::Int(i64::from(!first_half))
}

fn occupation_label(occ: &[u8]) -> String {
    occ.iter().map(u8::to_string).collect()
}

fn drive(cfg: &Resolved) -> Drive {
    Drive {
        tau_osc: cfg.f64("drive.tau_osc"),
        steps_per_cycle: cfg.usize("drive.steps_per_cycle"),
        cycles: cfg.usize("drive.cycles"),
    }
}

fn order(cfg: &Resolved) -> UpdateOrder {
    match cfg.str("memory.update_order") {
        "transmit-then-update" => UpdateOrder::TransmitThenUpdate,
        _ => UpdateOrder::UpdateThenTransmit,
    }
}

fn network_config(cfg: &Resolved, d: f64, tau_ratio: f64) -> NetworkConfig {
    NetworkConfig {
        drive: drive(cfg),
        modes: cfg.usize("network.modes"),
        tau_ratio,
        n_max: cfg.f64("memory.n_max"),
        photon_bound: cfg.u64("network.photon_bound") as u32,
        p: cfg.opt_f64("memory.p"),
        d,
        order: order(cfg),
    }
}

fn device(cfg: &Resolved, out: &Path) -> Result<Value> {
    let config = DeviceConfig {
        drive: drive(cfg),
        tau_ratio: cfg.f64("memory.tau_ratio"),
        n_max: cfg.f64("memory.n_max"),
        p: cfg.f64("memory.p"),
        d: cfg.f64("memory.d"),
        order: order(cfg),
        ne_levels: cfg.f64_list("gate_levels"),
    };
    let runs = run_device_hysteresis(&config)?;
    let mut areas = Table::new(["nE", "S_n", "S_gamma", "mean_T", "mean_nC", "cycles", "converged"]);
    for run in &runs {
        let mut curve = Table::new(["t", "nA", "nC", "gammaA", "gammaC", "halfcycle"]);
        for r in run.measured() {
            curve.push(vec![
                r.time.into(),
                r.n_a.into(),
                r.n_c.into(),
                r.gamma_a.into(),
                r.gamma_c.into(),
                half_flag(r.first_half),
            ])?;
        }
        write(&curve, out, &format!("ne{}.csv", run.n_e))?;
        areas.push(vec![
            run.n_e.into(),
            run.s_n.into(),
            run.s_gamma.into(),
            run.mean_transmittance.into(),
            run.mean_n_c.into(),
            run.cycles.into(),
            run.converged.into(),
        ])?;
    }
    write(&areas, out, "areas.csv")?;
    Ok(json!({ "window": config.params()?.window() }))
}

fn network(cfg: &Resolved, out: &Path) -> Result<Value> {
    let (i, j) = (cfg.u8_list("pair.i"), cfg.u8_list("pair.j"));
    let mut areas = Table::new(["d", "S_gamma", "cycles", "converged"]);
    let mut p = None;
    for d in cfg.f64_list("memory.d_values") {
        let config = network_config(cfg, d, cfg.f64("memory.tau_ratio"));
        p = Some(config.params()?.p);
        let run = run_network_hysteresis(&config, &i, &j)?;
        let last = run.cycles - 1;
        let mut curve = Table::new(["t", "gammaIn", "gammaOut", "halfcycle"]);
        for r in run.records.iter().filter(|r| r.cycle == last) {
            curve.push(vec![r.time.into(), r.gamma_in.into(), r.gamma_out.into(), half_flag(r.first_half)])?;
        }
        write(&curve, out, &format!("curve_d{d}.csv"))?;
        areas.push(vec![d.into(), run.s_gamma.into(), run.cycles.into(), run.converged.into()])?;
    }
    write(&areas, out, "areas.csv")?;
    Ok(json!({ "p": p }))
}

fn ensemble(cfg: &Resolved, out: &Path) -> Result<Value> {
    let ratios = cfg.f64_list("ensemble.tau_ratios");
    let include_vacuum = cfg.bool("ensemble.include_vacuum");
    let mut means = Table::new(["d", "ratio", "mean_S_gamma", "realizations"]);
    for d in cfg.f64_list("memory.d_values") {
        let config = network_config(cfg, d, ratios[0]);
        for res in run_ensemble(&config, &ratios, include_vacuum)? {
            let mut table = Table::new(["ratio", "realization_i", "realization_j", "S_gamma"]);
            for r in &res.realizations {
                table.push(vec![
                    res.tau_ratio.into(),
                    occupation_label(&r.i).into(),
                    occupation_label(&r.j).into(),
                    r.s_gamma.into(),
                ])?;
            }
            write(&table, out, &format!("ensemble_d{d}_ratio{}.csv", res.tau_ratio))?;
            means.push(vec![d.into(), res.tau_ratio.into(), res.mean.into(), res.realizations.len().into()])?;
        }
    }
    write(&means, out, "means.csv")?;
    Ok(json!({ "include_vacuum": include_vacuum }))
}

fn marginal(cfg: &Resolved, out: &Path) -> Result<Value> {
    let tau_ratio = cfg.f64("memory.tau_ratio");
    let mut table = Table::new(["d", "state", "mean_S_gamma"]);
    let mut spread = Table::new(["d", "min", "max", "spread"]);
    for d in cfg.f64_list("memory.d_values") {
        let config = network_config(cfg, d, tau_ratio);
        let res = run_ensemble(&config, &[tau_ratio], true)?.remove(0);
        let marginals = marginals_from_ensemble(&res);
        for (state, mean) in &marginals {
            table.push(vec![d.into(), occupation_label(state).into(), (*mean).into()])?;
        }
        let lo = marginals.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let hi = marginals.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
        spread.push(vec![d.into(), lo.into(), hi.into(), (hi - lo).into()])?;
    }
    write(&table, out, "marginals.csv")?;
    write(&spread, out, "marginal_spread.csv")?;
    Ok(json!({ "excluded": "vacuum" }))
}

fn reservoir_config(cfg: &Resolved, d: f64, seed: u64) -> ReservoirConfig {
    ReservoirConfig {
        n_max: cfg.f64("reservoir.n_max"),
        epsilon: cfg.f64("reservoir.epsilon"),
        seed_u1: seed.wrapping_mul(2).wrapping_add(1),
        seed_u2: seed.wrapping_mul(2).wrapping_add(2),
        d,
        p: cfg.opt_f64("reservoir.p"),
        window: cfg.usize("reservoir.window"),
        reset_per_image: cfg.bool("reservoir.reset_per_image"),
        readout: match cfg.str("reservoir.readout") {
            "update" => Readout::Update,
            _ => Readout::Frozen,
        },
    }
}

/// Base seed followed by `repeats - 1` consecutive seeds.
fn seeds(cfg: &Resolved) -> Vec<u64> {
    let base = cfg.u64("seed");
    (0..cfg.u64("repeats")).map(|r| base.wrapping_add(r)).collect()
}

fn load(cfg: &Resolved, images: &str, labels: &str, per_class: &str, split: Split) -> Result<Dataset<f64>> {
    let (ip, lp) = (cfg.str(images), cfg.str(labels));
    let full = load_idx::<f64>(ip, lp, split).with_context(|| format!("loading `{images}`"))?;
    let mut ds = subset_classes(&full, &cfg.u8_list("data.classes"))?;
    if let Some(n) = cfg.opt_usize(per_class) {
        ds = ds.take_per_class(n);
    }
    if ds.is_empty() {
        anyhow::bail!("no images of the selected classes in {ip}");
    }
    log::info!("{ip}: {} images, classes {:?}", ds.len(), ds.label_histogram());
    Ok(ds)
}

fn reservoir(cfg: &Resolved, out: &Path) -> Result<Value> {
    let data = load(cfg, "data.images", "data.labels", "data.per_class", Split::Train)?;
    let mut summary = Table::new(["d", "seed", "mean_L_T", "min_L_T", "max_L_T", "spread_L_T"]);
    let mut meta = Vec::new();
    for d in cfg.f64_list("reservoir.d_values") {
        for seed in seeds(cfg) {
            let res = Reservoir::new(reservoir_config(cfg, d, seed))?;
            let results = res.run_dataset(&data.images, &data.labels)?;
            write(&results_table(&results)?, out, &format!("features_d{d}_seed{seed}.csv"))?;
            let t: Vec<Vec<f64>> = results.iter().map(|r| r.t_vector.clone()).collect();
            let l = separability(&t)?;
            let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = l.iter().sum::<f64>() / l.len() as f64;
            summary.push(vec![d.into(), Cell::Text(seed.to_string()), mean.into(), lo.into(), hi.into(), (hi - lo).into()])?;
            meta.push(res.metadata());
        }
    }
    write(&summary, out, "separability.csv")?;
    Ok(json!({ "reservoirs": meta }))
}

fn split_features(results: &[ImageResult]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        results.iter().map(|r| r.features.clone()).collect(),
        results.iter().map(|r| r.label as usize).collect(),
    )
}

fn train_readout(cfg: &Resolved, out: &Path) -> Result<Value> {
    let train_set = load(cfg, "data.train_images", "data.train_labels", "data.train_per_class", Split::Train)?;
    let test_set = load(cfg, "data.test_images", "data.test_labels", "data.test_per_class", Split::Test)?;
    let classes = cfg.u8_list("data.classes").len();
    let report_last = cfg.usize("training.report_last");
    let epochs = cfg.usize("training.epochs");
    let mut metrics = Table::new(["d", "epoch", "loss", "accuracy", "confidence"]);
    let mut summary = Table::new(["d", "accuracy", "confidence", "accuracy_x_confidence"]);
    let seed_list = seeds(cfg);
    let mut meta = Vec::new();
    for d in cfg.f64_list("reservoir.d_values") {
        let mut per_epoch = vec![[0.0f64; 3]; epochs];
        let mut last = [0.0f64; 4];
        for &seed in &seed_list {
            let res = Reservoir::new(reservoir_config(cfg, d, seed))?;
            let (xf, yf) = split_features(&res.run_dataset(&train_set.images, &train_set.labels)?);
            let (xt, yt) = split_features(&res.run_dataset(&test_set.images, &test_set.labels)?);
            let tc = TrainConfig {
                epochs,
                learning_rate: cfg.f64("training.learning_rate"),
                batch_size: cfg.usize("training.batch_size"),
                beta1: cfg.f64("training.beta1"),
                beta2: cfg.f64("training.beta2"),
                epsilon: cfg.f64("training.epsilon"),
                seed,
            };
            let outcome = train(&xf, &yf, classes, &tc, Some((&xt, &yt)))?;
            let mut per_seed = Table::new([
                "epoch",
                "train_loss",
                "train_accuracy",
                "train_confidence",
                "loss",
                "accuracy",
                "confidence",
            ]);
            for m in &outcome.history {
                let e = m.eval.expect("held-out set supplied");
                per_seed.push(vec![
                    m.epoch.into(),
                    m.train.loss.into(),
                    m.train.accuracy.into(),
                    m.train.confidence.into(),
                    e.loss.into(),
                    e.accuracy.into(),
                    e.confidence.into(),
                ])?;
                let acc = &mut per_epoch[m.epoch - 1];
                acc[0] += e.loss;
                acc[1] += e.accuracy;
                acc[2] += e.confidence;
            }
            write(&per_seed, out, &format!("metrics_d{d}_seed{seed}.csv"))?;
            let fin = outcome.final_average(report_last);
            last[0] += fin.loss;
            last[1] += fin.accuracy;
            last[2] += fin.confidence;
            last[3] += fin.accuracy * fin.confidence;
            let checkpoint = json!({ "model": outcome.model, "config": tc, "d": d });
            let path = out.join(format!("model_d{d}_seed{seed}.json"));
            write_json(&path, &checkpoint)?;
            meta.push(res.metadata());
        }
        let n = seed_list.len() as f64;
        for (k, acc) in per_epoch.iter().enumerate() {
            metrics.push(vec![d.into(), (k + 1).into(), (acc[0] / n).into(), (acc[1] / n).into(), (acc[2] / n).into()])?;
        }
        metrics.push(vec![
            d.into(),
            format!("last{report_last}").into(),
            (last[0] / n).into(),
            (last[1] / n).into(),
            (last[2] / n).into(),
        ])?;
        summary.push(vec![d.into(), (last[1] / n).into(), (last[2] / n).into(), (last[3] / n).into()])?;
    }
    write(&metrics, out, "metrics.csv")?;
    write(&summary, out, "summary.csv")?;
    Ok(json!({ "seeds": seed_list, "reservoirs": meta, "train_size": train_set.len(), "test_size": test_set.len() }))
}
