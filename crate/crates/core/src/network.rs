//! The two-mode memtransistor harness and the cyclically gate-coupled network.
//!
//! Port B of every interferometer carries vacuum, so transmission through a
//! unit is the single-mode attenuation channel at the unit's current
//! transmittance; the detector port carrying the lost photons is traced out.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, MixedState, PartialTrace, PureState};
use crate::memdevice::{MemParams, PqmtUnit, UpdateOrder};
use crate::metrics::{l1_coherence, CycleTagged};
use crate::optics::AttenuationChannel;
use crate::scalar::Real;

/// Observables of one device time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord<T> {
    pub time: T,
    pub cycle: usize,
    pub first_half: bool,
    pub n_a: T,
    pub n_e: T,
    pub n_c: T,
    pub gamma_a: T,
    pub gamma_c: T,
    pub transmittance: T,
}

impl<T> CycleTagged for DeviceRecord<T> {
    fn cycle(&self) -> usize {
        self.cycle
    }
    fn first_half(&self) -> bool {
        self.first_half
    }
}

/// A memtransistor fed by a joint state over ports A (mode 0) and E (mode 1).
#[derive(Debug, Clone)]
pub struct PqmtDevice<T> {
    unit: PqmtUnit<T>,
    order: UpdateOrder,
    plan: Option<DevicePlan>,
}

#[derive(Debug, Clone)]
struct DevicePlan {
    basis: Arc<FockBasis>,
    channel: AttenuationChannel,
    keep_a: PartialTrace,
}

impl<T: Real> PqmtDevice<T> {
    pub fn new(params: MemParams<T>) -> Result<Self> {
        Ok(Self::from_unit(PqmtUnit::new(params)?))
    }

    pub fn from_unit(unit: PqmtUnit<T>) -> Self {
        Self {
            unit,
            order: UpdateOrder::default(),
            plan: None,
        }
    }

    pub fn with_order(mut self, order: UpdateOrder) -> Self {
        self.order = order;
        self
    }

    pub fn unit(&self) -> &PqmtUnit<T> {
        &self.unit
    }

    pub fn unit_mut(&mut self) -> &mut PqmtUnit<T> {
        &mut self.unit
    }

    fn plan_for(&mut self, basis: &Arc<FockBasis>) -> Result<&DevicePlan> {
        if basis.modes() != 2 {
            return Err(Error::DimensionMismatch {
                what: "device input modes",
                expected: 2,
                found: basis.modes(),
            });
        }
        if self.plan.as_ref().is_none_or(|p| *p.basis != **basis) {
            self.plan = Some(DevicePlan {
                basis: Arc::clone(basis),
                channel: AttenuationChannel::new(basis, 0)?,
                keep_a: PartialTrace::new(basis, &[0])?,
            });
        }
        Ok(self.plan.as_ref().expect("plan just built"))
    }

    /// Measures `⟨n_A⟩, ⟨n_E⟩`, updates the unit, transmits mode A and returns
    /// the reduced output state at port C.
    pub fn step(&mut self, rho_ae: &MixedState<T>, time: T) -> Result<(MixedState<T>, DeviceRecord<T>)> {
        let n_a = rho_ae.mean_photon_number(0)?;
        let n_e = rho_ae.mean_photon_number(1)?;
        self.plan_for(rho_ae.basis())?;
        let used = match self.order {
            UpdateOrder::UpdateThenTransmit => self.unit.step(n_a, n_e)?,
            UpdateOrder::TransmitThenUpdate => self.unit.transmittance(),
        };
        let plan = self.plan.as_ref().expect("plan built above");
        let transmitted = plan.channel.apply(rho_ae, used)?;
        let rho_c = plan.keep_a.apply(&transmitted)?;
        let rho_a = plan.keep_a.apply(rho_ae)?;
        if self.order == UpdateOrder::TransmitThenUpdate {
            self.unit.step(n_a, n_e)?;
        }
        let record = DeviceRecord {
            time,
            cycle: 0,
            first_half: true,
            n_a,
            n_e,
            n_c: rho_c.mean_photon_number(0)?,
            gamma_a: l1_coherence(&rho_a),
            gamma_c: l1_coherence(&rho_c),
            transmittance: used,
        };
        Ok((rho_c, record))
    }
}

/// Convenience form of [`PqmtDevice::step`] on a bare unit.
pub fn device_step<T: Real>(unit: &mut PqmtUnit<T>, rho_ae: &MixedState<T>) -> Result<(MixedState<T>, DeviceRecord<T>)> {
    let mut device = PqmtDevice::from_unit(unit.clone());
    let out = device.step(rho_ae, T::zero())?;
    *unit = device.unit;
    Ok(out)
}

/// Observables of one network time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub time: T,
    pub cycle: usize,
    pub first_half: bool,
    /// `⟨n_A,q⟩` of the input per mode.
    pub n_in: Vec<T>,
    /// Transmittance each unit applied during this step.
    pub transmittance: Vec<T>,
    pub gamma_in: T,
    pub gamma_out: T,
    /// `⟨n_C,q⟩` of the output per mode.
    pub n_out: Vec<T>,
}

impl<T> CycleTagged for StepRecord<T> {
    fn cycle(&self) -> usize {
        self.cycle
    }
    fn first_half(&self) -> bool {
        self.first_half
    }
}

/// `N` memtransistors in parallel; unit `q` is gated by the input of mode `(q + 1) mod N`.
#[derive(Debug, Clone)]
pub struct PqmtNetwork<T> {
    params: MemParams<T>,
    units: Vec<PqmtUnit<T>>,
    order: UpdateOrder,
    channels: Option<(Arc<FockBasis>, Vec<AttenuationChannel>)>,
}

impl<T: Real> PqmtNetwork<T> {
    pub fn new(size: usize, params: MemParams<T>) -> Result<Self> {
        if size == 0 {
            return Err(Error::param("size", "network needs at least one unit"));
        }
        let unit = PqmtUnit::new(params)?;
        Ok(Self {
            params,
            units: vec![unit; size],
            order: UpdateOrder::default(),
            channels: None,
        })
    }

    pub fn with_order(mut self, order: UpdateOrder) -> Self {
        self.order = order;
        self
    }

    pub fn size(&self) -> usize {
        self.units.len()
    }

    pub fn params(&self) -> &MemParams<T> {
        &self.params
    }

    pub fn units(&self) -> &[PqmtUnit<T>] {
        &self.units
    }

    pub fn units_mut(&mut self) -> &mut [PqmtUnit<T>] {
        &mut self.units
    }

    /// Index of the mode whose input gates unit `q`.
    pub fn gate_source(&self, q: usize) -> usize {
        (q + 1) % self.units.len()
    }

    pub fn transmittances(&self) -> Vec<T> {
        self.units.iter().map(PqmtUnit::transmittance).collect()
    }

    pub fn reset(&mut self) {
        for u in &mut self.units {
            u.reset();
        }
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        for u in &mut self.units {
            u.set_frozen(frozen);
        }
    }

    /// Steps every unit from one synchronous snapshot of per-mode inputs.
    pub fn update(&mut self, n_in: &[T]) -> Result<Vec<T>> {
        if n_in.len() != self.units.len() {
            return Err(Error::DimensionMismatch {
                what: "network inputs",
                expected: self.units.len(),
                found: n_in.len(),
            });
        }
        let n = self.units.len();
        for (q, unit) in self.units.iter_mut().enumerate() {
            unit.step(n_in[q], n_in[(q + 1) % n])?;
        }
        Ok(self.transmittances())
    }

    fn channels_for(&mut self, basis: &Arc<FockBasis>) -> Result<&[AttenuationChannel]> {
        if basis.modes() != self.units.len() {
            return Err(Error::DimensionMismatch {
                what: "network state modes",
                expected: self.units.len(),
                found: basis.modes(),
            });
        }
        if self.channels.as_ref().is_none_or(|(b, _)| **b != **basis) {
            let chans = (0..basis.modes())
                .map(|q| AttenuationChannel::new(basis, q))
                .collect::<Result<Vec<_>>>()?;
            self.channels = Some((Arc::clone(basis), chans));
        }
        Ok(&self.channels.as_ref().expect("channels just built").1)
    }

    /// Applies every unit's attenuation, modes in index order, at the given transmittances.
    pub fn transmit_with(&mut self, rho: &MixedState<T>, transmittance: &[T]) -> Result<MixedState<T>> {
        let chans = self.channels_for(rho.basis())?;
        let mut out = rho.clone();
        for (chan, &t) in chans.iter().zip(transmittance) {
            out = chan.apply(&out, t)?;
        }
        Ok(out)
    }

    /// Applies every unit's attenuation at its current transmittance.
    pub fn transmit(&mut self, rho: &MixedState<T>) -> Result<MixedState<T>> {
        let t = self.transmittances();
        self.transmit_with(rho, &t)
    }

    /// One synchronous network step driven by `psi_in`.
    pub fn step(&mut self, psi_in: &PureState<T>, time: T) -> Result<(MixedState<T>, StepRecord<T>)> {
        if psi_in.basis().modes() != self.units.len() {
            return Err(Error::DimensionMismatch {
                what: "network input modes",
                expected: self.units.len(),
                found: psi_in.basis().modes(),
            });
        }
        let n_in = psi_in.mean_photon_numbers();
        let used = match self.order {
            UpdateOrder::UpdateThenTransmit => self.update(&n_in)?,
            UpdateOrder::TransmitThenUpdate => self.transmittances(),
        };
        let rho_in = psi_in.to_mixed();
        let rho_out = self.transmit_with(&rho_in, &used)?;
        if self.order == UpdateOrder::TransmitThenUpdate {
            self.update(&n_in)?;
        }
        let record = StepRecord {
            time,
            cycle: 0,
            first_half: true,
            gamma_in: l1_coherence(&rho_in),
            gamma_out: l1_coherence(&rho_out),
            n_out: rho_out.mean_photon_numbers(),
            n_in,
            transmittance: used,
        };
        Ok((rho_out, record))
    }
}

/// Time grid of a periodic drive: step `k` sits at `t = k·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicSchedule<T> {
    pub tau_osc: T,
    pub cycles: usize,
    pub steps_per_cycle: usize,
}

impl<T: Real> PeriodicSchedule<T> {
    pub fn new(tau_osc: T, cycles: usize, steps_per_cycle: usize) -> Result<Self> {
        if !(tau_osc > T::zero()) || !tau_osc.is_finite() {
            return Err(Error::param("tau_osc", "must be positive"));
        }
        if cycles < 1 {
            return Err(Error::param("cycles", "at least one cycle is required"));
        }
        if steps_per_cycle < 2 {
            return Err(Error::param("steps_per_cycle", "at least two steps per cycle are required"));
        }
        Ok(Self {
            tau_osc,
            cycles,
            steps_per_cycle,
        })
    }

    pub fn dt(&self) -> T {
        self.tau_osc / T::from_count(self.steps_per_cycle)
    }

    pub fn total_steps(&self) -> usize {
        self.cycles * self.steps_per_cycle
    }

    /// `(time, cycle index, first-half flag)` for step `k`.
    pub fn tag(&self, k: usize) -> (T, usize, bool) {
        let phase = k % self.steps_per_cycle;
        (
            T::from_count(k) * self.dt(),
            k / self.steps_per_cycle,
            2 * phase < self.steps_per_cycle,
        )
    }

    fn check_params(&self, params: &MemParams<T>) -> Result<()> {
        let dt = self.dt();
        if (params.dt - dt).abs() > dt * T::lit(1e-9) {
            return Err(Error::param("dt", "memory time step differs from the drive time step"));
        }
        Ok(())
    }
}

/// Drives the network for `schedule.total_steps()` steps.
pub fn run_periodic<T: Real>(
    net: &mut PqmtNetwork<T>,
    drive: impl Fn(T) -> Result<PureState<T>>,
    schedule: &PeriodicSchedule<T>,
) -> Result<Vec<StepRecord<T>>> {
    schedule.check_params(net.params())?;
    (0..schedule.total_steps())
        .map(|k| {
            let (t, cycle, first_half) = schedule.tag(k);
            let (_, mut rec) = net.step(&drive(t)?, t)?;
            rec.cycle = cycle;
            rec.first_half = first_half;
            Ok(rec)
        })
        .collect()
}

/// Drives the two-mode device for `schedule.total_steps()` steps.
pub fn run_device_periodic<T: Real>(
    device: &mut PqmtDevice<T>,
    drive: impl Fn(T) -> Result<PureState<T>>,
    schedule: &PeriodicSchedule<T>,
) -> Result<Vec<DeviceRecord<T>>> {
    schedule.check_params(device.unit().params())?;
    (0..schedule.total_steps())
        .map(|k| {
            let (t, cycle, first_half) = schedule.tag(k);
            let (_, mut rec) = device.step(&drive(t)?.to_mixed(), t)?;
            rec.cycle = cycle;
            rec.first_half = first_half;
            Ok(rec)
        })
        .collect()
}
