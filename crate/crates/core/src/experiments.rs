//! Hysteresis experiments under periodic drive: the two-mode device, the
//! cyclic network, ensembles over drive pairs, and per-state marginals.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Occupation, PureState};
use crate::memdevice::{inflection_point, MemParams, UpdateOrder};
use crate::metrics::{last_cycle_curve, steady_state_deviation, CycleTagged, LoopCurve};
use crate::network::{run_device_periodic, run_periodic, DeviceRecord, PeriodicSchedule, PqmtDevice, PqmtNetwork, StepRecord};

/// Largest cycle count the steady-state guard escalates to.
pub const MAX_CYCLES: usize = 32;
/// Allowed last-two-cycle deviation, relative to each observable's range.
pub const STEADY_TOLERANCE: f64 = 1e-6;

/// Time grid of a periodic drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub tau_osc: f64,
    pub steps_per_cycle: usize,
    /// Cycles simulated; the last one is measured.
    pub cycles: usize,
}

impl Default for Drive {
    fn default() -> Self {
        Self {
            tau_osc: 1.0,
            steps_per_cycle: 400,
            cycles: 5,
        }
    }
}

impl Drive {
    pub fn dt(&self) -> f64 {
        self.tau_osc / self.steps_per_cycle as f64
    }

    fn schedule(&self, cycles: usize) -> Result<PeriodicSchedule<f64>> {
        PeriodicSchedule::new(self.tau_osc, cycles, self.steps_per_cycle)
    }

    fn params(&self, tau_ratio: f64, n_max: f64, p: f64, d: f64) -> Result<MemParams<f64>> {
        if !(tau_ratio > 0.0) || !tau_ratio.is_finite() {
            return Err(Error::param("tau_ratio", "must be positive"));
        }
        MemParams::new(tau_ratio * self.tau_osc, self.dt(), n_max, p, d)
    }
}

/// Records of a run that passed (or exhausted) the steady-state guard.
#[derive(Debug, Clone, PartialEq)]
pub struct Steady<R> {
    pub records: Vec<R>,
    pub cycles: usize,
    pub deviation: f64,
    pub converged: bool,
}

/// Runs `run(cycles)` and doubles the cycle count until the last two cycles
/// agree to [`STEADY_TOLERANCE`] or [`MAX_CYCLES`] is reached.
pub fn run_until_steady<R: CycleTagged>(
    cycles: usize,
    run: impl Fn(usize) -> Result<Vec<R>>,
    observables: &[&dyn Fn(&R) -> f64],
) -> Result<Steady<R>> {
    let mut cycles = cycles.max(2);
    loop {
        let records = run(cycles)?;
        let deviation = steady_state_deviation(&records, observables).unwrap_or(f64::INFINITY);
        let converged = deviation <= STEADY_TOLERANCE;
        if converged || cycles >= MAX_CYCLES {
            if !converged {
                log::warn!("no steady state after {cycles} cycles (deviation {deviation:e})");
            }
            return Ok(Steady {
                records,
                cycles,
                deviation,
                converged,
            });
        }
        cycles = (cycles * 2).min(MAX_CYCLES);
    }
}

/// `(cos(πt/τ)|0⟩ + sin(πt/τ)|1⟩)_A ⊗ (√(1-n_E)|0⟩ + √n_E|1⟩)_E` on two modes.
pub fn device_drive_state(basis: &Arc<FockBasis>, t: f64, tau_osc: f64, n_e: f64) -> Result<PureState<f64>> {
    if !(0.0..=1.0).contains(&n_e) {
        return Err(Error::param("n_e", "gate level must lie in [0, 1]"));
    }
    if basis.modes() != 2 || basis.photon_bound() < 2 {
        return Err(Error::param("basis", "device drive needs two modes with photon bound at least 2"));
    }
    let phase = std::f64::consts::PI * t / tau_osc;
    let (a0, a1) = (phase.cos(), phase.sin());
    let (e0, e1) = ((1.0 - n_e).sqrt(), n_e.sqrt());
    let c = |v: f64| Complex64::new(v, 0.0);
    PureState::from_terms(
        Arc::clone(basis),
        &[
            (&[0, 0], c(a0 * e0)),
            (&[1, 0], c(a1 * e0)),
            (&[0, 1], c(a0 * e1)),
            (&[1, 1], c(a1 * e1)),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub drive: Drive,
    /// `τ_int / τ_osc`.
    pub tau_ratio: f64,
    pub n_max: f64,
    pub p: f64,
    pub d: f64,
    pub order: UpdateOrder,
    pub ne_levels: Vec<f64>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            drive: Drive::default(),
            tau_ratio: 0.3,
            n_max: 1.0,
            p: 0.5,
            d: 10.0,
            order: UpdateOrder::default(),
            ne_levels: vec![0.0, 0.5, 1.0],
        }
    }
}

impl DeviceConfig {
    pub fn params(&self) -> Result<MemParams<f64>> {
        self.drive.params(self.tau_ratio, self.n_max, self.p, self.d)
    }
}

/// Steady-state loops of the device at one gate level.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRun {
    pub n_e: f64,
    pub records: Vec<DeviceRecord<f64>>,
    /// `(⟨n_A⟩, ⟨n_C⟩)` over the measured cycle.
    pub photon_curve: LoopCurve<f64>,
    /// `(γ_A, γ_C)` over the measured cycle.
    pub coherence_curve: LoopCurve<f64>,
    pub s_n: f64,
    pub s_gamma: f64,
    /// Cycle-averaged transmittance of the measured cycle.
    pub mean_transmittance: f64,
    pub mean_n_c: f64,
    pub cycles: usize,
    pub deviation: f64,
    pub converged: bool,
}

impl DeviceRun {
    pub fn measured(&self) -> &[DeviceRecord<f64>] {
        let last = self.cycles - 1;
        let start = self.records.iter().position(|r| r.cycle == last).unwrap_or(0);
        &self.records[start..]
    }
}

pub fn run_device_level(config: &DeviceConfig, n_e: f64) -> Result<DeviceRun> {
    let params = config.params()?;
    let basis = Arc::new(FockBasis::enumerate(2, 2)?);
    let drive = config.drive;
    device_drive_state(&basis, 0.0, drive.tau_osc, n_e)?;
    let run = |cycles| {
        let mut device = PqmtDevice::new(params)?.with_order(config.order);
        run_device_periodic(
            &mut device,
            |t| device_drive_state(&basis, t, drive.tau_osc, n_e),
            &drive.schedule(cycles)?,
        )
    };
    let steady = run_until_steady(
        drive.cycles,
        run,
        &[&|r: &DeviceRecord<f64>| r.n_c, &|r| r.gamma_c, &|r| r.transmittance],
    )?;
    let photon_curve = last_cycle_curve(&steady.records, |r| r.n_a, |r| r.n_c)?;
    let coherence_curve = last_cycle_curve(&steady.records, |r| r.gamma_a, |r| r.gamma_c)?;
    let mut out = DeviceRun {
        n_e,
        s_n: photon_curve.area(),
        s_gamma: coherence_curve.area(),
        photon_curve,
        coherence_curve,
        mean_transmittance: 0.0,
        mean_n_c: 0.0,
        cycles: steady.cycles,
        deviation: steady.deviation,
        converged: steady.converged,
        records: steady.records,
    };
    let measured = out.measured();
    let count = measured.len() as f64;
    let mean_t = measured.iter().map(|r| r.transmittance).sum::<f64>() / count;
    let mean_n_c = measured.iter().map(|r| r.n_c).sum::<f64>() / count;
    out.mean_transmittance = mean_t;
    out.mean_n_c = mean_n_c;
    Ok(out)
}

/// One run per gate level, in the configured order.
pub fn run_device_hysteresis(config: &DeviceConfig) -> Result<Vec<DeviceRun>> {
    config.ne_levels.par_iter().map(|&n_e| run_device_level(config, n_e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub drive: Drive,
    pub modes: usize,
    /// `τ_int / τ_osc`.
    pub tau_ratio: f64,
    pub n_max: f64,
    pub photon_bound: u32,
    /// Gate inflection point; the network-size default when absent.
    pub p: Option<f64>,
    pub d: f64,
    pub order: UpdateOrder,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            drive: Drive::default(),
            modes: 4,
            tau_ratio: 0.7,
            n_max: 2.0,
            photon_bound: 2,
            p: None,
            d: 10.0,
            order: UpdateOrder::default(),
        }
    }
}

impl NetworkConfig {
    pub fn params(&self) -> Result<MemParams<f64>> {
        let p = match self.p {
            Some(p) => p,
            None => inflection_point(self.modes)?,
        };
        self.drive.params(self.tau_ratio, self.n_max, p, self.d)
    }

    pub fn basis(&self) -> Result<Arc<FockBasis>> {
        Ok(Arc::new(FockBasis::enumerate(self.modes, self.photon_bound)?))
    }
}

/// `cos(πt/τ)|i⟩ + sin(πt/τ)|j⟩`.
pub fn pair_drive_state(basis: &Arc<FockBasis>, i: &[u8], j: &[u8], t: f64, tau_osc: f64) -> Result<PureState<f64>> {
    let phase = std::f64::consts::PI * t / tau_osc;
    PureState::from_terms(
        Arc::clone(basis),
        &[(i, Complex64::new(phase.cos(), 0.0)), (j, Complex64::new(phase.sin(), 0.0))],
    )
}

fn check_pair(basis: &FockBasis, i: &[u8], j: &[u8]) -> Result<()> {
    for occ in [i, j] {
        if occ.len() != basis.modes() {
            return Err(Error::DimensionMismatch {
                what: "drive occupation",
                expected: basis.modes(),
                found: occ.len(),
            });
        }
        if basis.index_of(occ).is_none() {
            return Err(Error::PhotonBoundExceeded {
                occupation: occ.to_vec(),
                bound: basis.photon_bound(),
            });
        }
    }
    if i == j {
        return Err(Error::param("pair", "drive states must differ"));
    }
    Ok(())
}

/// Steady-state coherence loop of the network under one drive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRun {
    pub i: Occupation,
    pub j: Occupation,
    pub records: Vec<StepRecord<f64>>,
    /// `(γ_in, γ_out)` over the measured cycle.
    pub coherence_curve: LoopCurve<f64>,
    pub s_gamma: f64,
    pub cycles: usize,
    pub deviation: f64,
    pub converged: bool,
}

pub fn run_network_hysteresis(config: &NetworkConfig, i: &[u8], j: &[u8]) -> Result<NetworkRun> {
    let basis = config.basis()?;
    run_pair(config, &config.params()?, &basis, i, j)
}

fn run_pair(config: &NetworkConfig, params: &MemParams<f64>, basis: &Arc<FockBasis>, i: &[u8], j: &[u8]) -> Result<NetworkRun> {
    check_pair(basis, i, j)?;
    let drive = config.drive;
    let run = |cycles| {
        let mut net = PqmtNetwork::new(config.modes, *params)?.with_order(config.order);
        run_periodic(&mut net, |t| pair_drive_state(basis, i, j, t, drive.tau_osc), &drive.schedule(cycles)?)
    };
    let steady = run_until_steady(drive.cycles, run, &[&|r: &StepRecord<f64>| r.gamma_out])?;
    let coherence_curve = last_cycle_curve(&steady.records, |r| r.gamma_in, |r| r.gamma_out)?;
    Ok(NetworkRun {
        i: i.to_vec(),
        j: j.to_vec(),
        s_gamma: coherence_curve.area(),
        coherence_curve,
        records: steady.records,
        cycles: steady.cycles,
        deviation: steady.deviation,
        converged: steady.converged,
    })
}

/// Basis states eligible as drive components, in basis order.
pub fn ensemble_states(basis: &FockBasis, include_vacuum: bool) -> Vec<Occupation> {
    basis
        .occupations()
        .iter()
        .filter(|o| include_vacuum || o.iter().any(|&n| n > 0))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub i: Occupation,
    pub j: Occupation,
    pub s_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub tau_ratio: f64,
    pub d: f64,
    /// Unordered pairs `i < j` in basis order.
    pub realizations: Vec<Realization>,
    pub mean: f64,
}

/// `S_γ` of every unordered pair of distinct eligible states, per memory ratio.
pub fn run_ensemble(config: &NetworkConfig, tau_ratios: &[f64], include_vacuum: bool) -> Result<Vec<EnsembleResult>> {
    if config.modes < 2 {
        return Err(Error::param("modes", "an ensemble needs at least two modes"));
    }
    let basis = config.basis()?;
    let states = ensemble_states(&basis, include_vacuum);
    let pairs: Vec<(usize, usize)> = (0..states.len()).flat_map(|a| (a + 1..states.len()).map(move |b| (a, b))).collect();
    tau_ratios
        .iter()
        .map(|&tau_ratio| {
            let cfg = NetworkConfig { tau_ratio, ..config.clone() };
            let params = cfg.params()?;
            let realizations = pairs
                .par_iter()
                .map(|&(a, b)| {
                    let run = run_pair(&cfg, &params, &basis, &states[a], &states[b])?;
                    Ok(Realization {
                        i: run.i,
                        j: run.j,
                        s_gamma: run.s_gamma,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mean = realizations.iter().map(|r| r.s_gamma).sum::<f64>() / realizations.len().max(1) as f64;
            Ok(EnsembleResult {
                tau_ratio,
                d: config.d,
                realizations,
                mean,
            })
        })
        .collect()
}

fn is_vacuum(occ: &[u8]) -> bool {
    occ.iter().all(|&n| n == 0)
}

/// Mean `S_γ(i, j)` over every `j ≠ i`, computed directly.
pub fn marginal_hysteresis(config: &NetworkConfig, i: &[u8]) -> Result<f64> {
    if is_vacuum(i) {
        return Err(Error::param("i", "the vacuum is excluded from marginals"));
    }
    let basis = config.basis()?;
    if basis.index_of(i).is_none() || i.len() != basis.modes() {
        return Err(Error::PhotonBoundExceeded {
            occupation: i.to_vec(),
            bound: basis.photon_bound(),
        });
    }
    let params = config.params()?;
    let others: Vec<&Occupation> = basis.occupations().iter().filter(|o| o.as_slice() != i).collect();
    let areas = others
        .par_iter()
        .map(|j| Ok(run_pair(config, &params, &basis, i, j)?.s_gamma))
        .collect::<Result<Vec<f64>>>()?;
    Ok(areas.iter().sum::<f64>() / areas.len() as f64)
}

/// Marginals of every non-vacuum state from an ensemble that includes the
/// vacuum, using `S_γ(i, j) = S_γ(j, i)` (swapping the pair is a half-period
/// shift of the drive).
pub fn marginals_from_ensemble(result: &EnsembleResult) -> Vec<(Occupation, f64)> {
    let mut states: Vec<Occupation> = result.realizations.iter().flat_map(|r| [r.i.clone(), r.j.clone()]).collect();
    states.sort_by(|a, b| (a.iter().map(|&n| n as u32).sum::<u32>(), a).cmp(&(b.iter().map(|&n| n as u32).sum::<u32>(), b)));
    states.dedup();
    states
        .into_iter()
        .filter(|s| !is_vacuum(s))
        .map(|s| {
            let areas: Vec<f64> = result
                .realizations
                .iter()
                .filter(|r| r.i == s || r.j == s)
                .map(|r| r.s_gamma)
                .collect();
            let mean = areas.iter().sum::<f64>() / areas.len() as f64;
            (s, mean)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_mode() -> Arc<FockBasis> {
        Arc::new(FockBasis::enumerate(2, 2).unwrap())
    }

    #[test]
    fn device_drive_examples() {
        let b = two_mode();
        let psi = device_drive_state(&b, 0.0, 1.0, 0.3).unwrap();
        assert_abs_diff_eq!(psi.mean_photon_number(0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.mean_photon_number(1).unwrap(), 0.3, epsilon = 1e-15);
        let half = device_drive_state(&b, 0.5, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(half.amplitudes()[b.index_of(&[1, 0]).unwrap()].re.abs(), 1.0, epsilon = 1e-15);
        for t in [0.1, 0.37, 0.8] {
            let psi = device_drive_state(&b, t, 1.0, 0.5).unwrap();
            assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(psi.mean_photon_number(0).unwrap(), (std::f64::consts::PI * t).sin().powi(2), epsilon = 1e-14);
        }
        assert!(device_drive_state(&b, 0.0, 1.0, 1.5).is_err());
        assert!(device_drive_state(&b, 0.0, 1.0, -0.1).is_err());
    }

    fn quick_device() -> DeviceConfig {
        DeviceConfig {
            drive: Drive {
                steps_per_cycle: 100,
                cycles: 3,
                ..Drive::default()
            },
            ..DeviceConfig::default()
        }
    }

    #[test]
    fn gate_off_matches_decoupled_device() {
        let cfg = quick_device();
        let off = run_device_level(&cfg, 1.0).unwrap();
        let free = run_device_level(&DeviceConfig { d: 0.0, ..cfg }, 1.0).unwrap();
        assert_eq!(off.records.len(), free.records.len());
        for (a, b) in off.records.iter().zip(&free.records) {
            assert_abs_diff_eq!(a.n_c, b.n_c, epsilon = 1e-12);
            assert_abs_diff_eq!(a.gamma_c, b.gamma_c, epsilon = 1e-12);
        }
        assert!(off.converged);
    }

    #[test]
    fn memoryless_device_has_no_loop() {
        let cfg = DeviceConfig {
            tau_ratio: 1.0 / 100.0,
            ..quick_device()
        };
        let run = run_device_level(&cfg, 1.0).unwrap();
        assert!(run.s_n <= 1e-4 * run.photon_curve.bounding_box_area(), "S_n = {}", run.s_n);
    }

    #[test]
    fn steady_guard_escalates_cycles() {
        #[derive(Clone)]
        struct R(usize, f64);
        impl CycleTagged for R {
            fn cycle(&self) -> usize {
                self.0
            }
            fn first_half(&self) -> bool {
                true
            }
        }
        // Decays by 1e-2 per cycle, so it needs four cycles to settle.
        let run = |cycles: usize| Ok((0..cycles * 4).map(|k| R(k / 4, (k % 4) as f64 + 10f64.powi(-2 * (k / 4) as i32))).collect());
        let s = run_until_steady(2, run, &[&|r: &R| r.1]).unwrap();
        assert_eq!(s.cycles, 8);
        assert!(s.converged);
        let never = |cycles: usize| Ok((0..cycles * 4).map(|k| R(k / 4, (k / 4) as f64)).collect());
        let s = run_until_steady(5, never, &[&|r: &R| r.1]).unwrap();
        assert_eq!(s.cycles, MAX_CYCLES);
        assert!(!s.converged);
    }

    fn quick_network(d: f64) -> NetworkConfig {
        NetworkConfig {
            drive: Drive {
                steps_per_cycle: 80,
                cycles: 3,
                ..Drive::default()
            },
            d,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn pair_validation() {
        let cfg = quick_network(10.0);
        assert!(run_network_hysteresis(&cfg, &[0, 0, 1, 1], &[0, 0, 1, 1]).is_err());
        assert!(run_network_hysteresis(&cfg, &[0, 0, 0, 3], &[0, 0, 1, 1]).is_err());
        assert!(run_network_hysteresis(&cfg, &[0, 0, 1], &[0, 0, 1, 1]).is_err());
        assert!(marginal_hysteresis(&cfg, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn swapped_pair_gives_same_area() {
        let cfg = quick_network(10.0);
        let a = run_network_hysteresis(&cfg, &[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        let b = run_network_hysteresis(&cfg, &[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap();
        assert!(a.s_gamma > 0.0);
        assert_abs_diff_eq!(a.s_gamma, b.s_gamma, epsilon = 1e-8);
    }

    #[test]
    fn ensemble_counts_and_marginals() {
        let cfg = NetworkConfig {
            modes: 2,
            ..quick_network(5.0)
        };
        let basis = cfg.basis().unwrap();
        assert_eq!(ensemble_states(&basis, true).len(), 6);
        assert_eq!(ensemble_states(&basis, false).len(), 5);
        let res = run_ensemble(&cfg, &[0.7], true).unwrap();
        assert_eq!(res[0].realizations.len(), 15);
        let marg = marginals_from_ensemble(&res[0]);
        assert_eq!(marg.len(), 5);
        let direct = marginal_hysteresis(&NetworkConfig { tau_ratio: 0.7, ..cfg.clone() }, &marg[2].0).unwrap();
        assert_abs_diff_eq!(direct, marg[2].1, epsilon = 1e-8);
        // Averaging marginals = averaging ordered pairs with a non-vacuum first entry.
        let ordered: Vec<f64> = res[0]
            .realizations
            .iter()
            .flat_map(|r| [(&r.i, r.s_gamma), (&r.j, r.s_gamma)])
            .filter(|(i, _)| !is_vacuum(i))
            .map(|(_, s)| s)
            .collect();
        let lhs = marg.iter().map(|m| m.1).sum::<f64>() / marg.len() as f64;
        assert_abs_diff_eq!(lhs, ordered.iter().sum::<f64>() / ordered.len() as f64, epsilon = 1e-12);
        assert_eq!(run_ensemble(&cfg, &[0.7], false).unwrap()[0].realizations.len(), 10);
    }
}
