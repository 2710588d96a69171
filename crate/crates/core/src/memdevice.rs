//! Memristive update laws for a single interferometer.
//!
//! The memristor (PQMR) transmittance is a windowed average of the input
//! photon number; the memtransistor (PQMT) multiplies it by a sigmoidal gate
//! driven by a joint history of the input and a gate port. Integrals over
//! `[t - τ_int, t]` are left-Riemann means over the last
//! `w = round(τ_int / dt)` samples.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemParams<T> {
    /// Memory time, in the same unit as `dt`.
    pub tau_int: T,
    pub dt: T,
    /// Largest expected mean photon number `⟨n⟩_max`.
    pub n_max: T,
    /// Inflection point of the gate, in `[0, 1]`.
    pub p: T,
    /// Memory-sharing strength, `d ≥ 0`.
    pub d: T,
}

impl<T: Real> MemParams<T> {
    pub fn new(tau_int: T, dt: T, n_max: T, p: T, d: T) -> Result<Self> {
        let params = Self { tau_int, dt, n_max, p, d };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_int > T::zero()) || !self.tau_int.is_finite() {
            return Err(Error::param("tau_int", "must be positive"));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.n_max > T::zero()) || !self.n_max.is_finite() {
            return Err(Error::param("n_max", "must be positive"));
        }
        if !(self.p >= T::zero() && self.p <= T::one()) {
            return Err(Error::param("p", "must lie in [0, 1]"));
        }
        if !(self.d >= T::zero()) || !self.d.is_finite() {
            return Err(Error::param("d", "must be non-negative"));
        }
        if self.raw_window() < 1 {
            return Err(Error::param("tau_int", "memory window rounds to zero samples"));
        }
        Ok(())
    }

    fn raw_window(&self) -> usize {
        (self.tau_int / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Number of samples in the memory window, at least 1.
    pub fn window(&self) -> usize {
        self.raw_window().max(1)
    }
}

/// Coefficients of the piecewise gate: `a₁e^{dx}` below `p`, `a₂ - a₃e^{-dx}` above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateCoefficients<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
}

impl<T: Real> GateCoefficients<T> {
    /// Fixed by `G(1) = 1` plus continuity and differentiability at `p`.
    pub fn new(p: T, d: T) -> Self {
        let two = T::lit(2.0);
        let denom = two * (d * p).exp() - (two * d * p - d).exp();
        assert!(denom > T::zero(), "gate normalization must be positive");
        let a1 = denom.recip();
        Self {
            a1,
            a2: two * (d * p).exp() * a1,
            a3: (two * d * p).exp() * a1,
        }
    }

    pub fn eval(&self, x: T, p: T, d: T) -> T {
        if x < p {
            self.a1 * (d * x).exp()
        } else {
            self.a2 - self.a3 * (-d * x).exp()
        }
    }
}

/// Sigmoidal gate `G_{p,d}(x)`, monotone with `G(1) = 1`.
///
/// Evaluated in the factored form `e^{d(x-p)} / (2 - e^{d(p-1)})` and
/// `(2 - e^{d(p-x)}) / (2 - e^{d(p-1)})`, which matches the
/// [`GateCoefficients`] expansion without overflowing for large `d`.
pub fn gate_function<T: Real>(x: T, p: T, d: T) -> T {
    let two = T::lit(2.0);
    let denom = two - (d * (p - T::one())).exp();
    debug_assert!(denom > T::zero());
    if x < p {
        (d * (x - p)).exp() / denom
    } else {
        (two - (d * (p - x)).exp()) / denom
    }
}

fn clamp_unit<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// Windowed memristor transmittance `0.5 + mean(0.5 - n_A/n_max)`.
pub fn pqmr_transmittance<T: Real>(n_a: &[T], n_max: T) -> Result<T> {
    if n_a.is_empty() {
        return Err(Error::Empty("transmittance history"));
    }
    let sum: T = n_a.iter().map(|&n| pqmr_term(n, n_max)).sum();
    Ok(clamp_unit(T::lit(0.5) + sum / T::from_count(n_a.len())))
}

/// History map `0.5 + mean(0.5 - √((n_A/n_max)(1 - n_E/n_max)))`.
pub fn history_map<T: Real>(samples: &[(T, T)], n_max: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Empty("gate history"));
    }
    let sum: T = samples.iter().map(|&(a, e)| history_term(a, e, n_max)).sum();
    Ok(clamp_unit(T::lit(0.5) + sum / T::from_count(samples.len())))
}

#[inline]
fn pqmr_term<T: Real>(n_a: T, n_max: T) -> T {
    T::lit(0.5) - n_a / n_max
}

#[inline]
fn history_term<T: Real>(n_a: T, n_e: T, n_max: T) -> T {
    let radicand = (n_a / n_max) * (T::one() - n_e / n_max);
    T::lit(0.5) - radicand.max(T::zero()).sqrt()
}

/// Inflection point `1 - √((1/N)(1 - 1/N))` for an `N`-unit network.
pub fn inflection_point<T: Real>(units: usize) -> Result<T> {
    if units == 0 {
        return Err(Error::param("units", "network size must be at least 1"));
    }
    let inv = T::from_count(units).recip();
    Ok(T::one() - (inv * (T::one() - inv)).sqrt())
}

/// `⟨n_A⟩ = ⟨n_D⟩ / (1 - T)`.
pub fn infer_input_photons<T: Real>(n_d: T, transmittance: T) -> Result<T> {
    if !(transmittance >= T::zero() && transmittance <= T::one()) {
        return Err(Error::param("transmittance", "must lie in [0, 1]"));
    }
    if transmittance == T::one() {
        return Err(Error::InferenceUndefined);
    }
    Ok(n_d / (T::one() - transmittance))
}

/// One buffered measurement together with its two integrand values.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample<T> {
    n_a: T,
    n_e: T,
    pqmr: T,
    history: T,
}

/// Fixed-length ring buffer of `(⟨n_A⟩, ⟨n_E⟩)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer<T> {
    n_max: T,
    samples: VecDeque<Sample<T>>,
}

impl<T: Real> HistoryBuffer<T> {
    /// A full buffer of `window` copies of the neutral pair `(n_max/2, n_max)`.
    pub fn neutral(window: usize, n_max: T) -> Self {
        let mut buf = Self {
            n_max,
            samples: VecDeque::with_capacity(window),
        };
        let neutral = buf.sample(n_max / T::lit(2.0), n_max);
        buf.samples.extend(std::iter::repeat_n(neutral, window.max(1)));
        buf
    }

    fn sample(&self, n_a: T, n_e: T) -> Sample<T> {
        Sample {
            n_a,
            n_e,
            pqmr: pqmr_term(n_a, self.n_max),
            history: history_term(n_a, n_e, self.n_max),
        }
    }

    pub fn window(&self) -> usize {
        self.samples.len()
    }

    /// Pushes a sample, evicting the oldest.
    pub fn push(&mut self, n_a: T, n_e: T) {
        let s = self.sample(n_a, n_e);
        self.samples.pop_front();
        self.samples.push_back(s);
    }

    pub fn pairs(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.samples.iter().map(|s| (s.n_a, s.n_e))
    }

    pub fn pqmr_transmittance(&self) -> T {
        let sum: T = self.samples.iter().map(|s| s.pqmr).sum();
        clamp_unit(T::lit(0.5) + sum / T::from_count(self.samples.len()))
    }

    pub fn history_map(&self) -> T {
        let sum: T = self.samples.iter().map(|s| s.history).sum();
        clamp_unit(T::lit(0.5) + sum / T::from_count(self.samples.len()))
    }
}

/// Within one time step, whether the fresh sample updates the transmittance
/// before the channel acts or only afterwards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateOrder {
    #[default]
    UpdateThenTransmit,
    TransmitThenUpdate,
}

/// A single memtransistor.
#[derive(Debug, Clone, PartialEq)]
pub struct PqmtUnit<T> {
    params: MemParams<T>,
    history: HistoryBuffer<T>,
    transmittance: T,
    theta: T,
    frozen: bool,
}

impl<T: Real> PqmtUnit<T> {
    pub fn new(params: MemParams<T>) -> Result<Self> {
        params.validate()?;
        let history = HistoryBuffer::neutral(params.window(), params.n_max);
        let mut unit = Self {
            params,
            history,
            transmittance: T::zero(),
            theta: T::zero(),
            frozen: false,
        };
        unit.set_transmittance(pqmt_transmittance(&unit));
        Ok(unit)
    }

    pub fn params(&self) -> &MemParams<T> {
        &self.params
    }

    pub fn history(&self) -> &HistoryBuffer<T> {
        &self.history
    }

    pub fn transmittance(&self) -> T {
        self.transmittance
    }

    /// MZI phase with `T = cos²(θ/2)`, in `[0, π]`.
    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// While frozen, [`step`](Self::step) leaves history and transmittance untouched.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    /// Overrides the transmittance (and phase) directly.
    pub fn set_transmittance(&mut self, t: T) {
        self.transmittance = clamp_unit(t);
        self.theta = T::lit(2.0) * self.transmittance.sqrt().acos();
    }

    /// Refills the history with neutral samples.
    pub fn reset(&mut self) {
        self.history = HistoryBuffer::neutral(self.params.window(), self.params.n_max);
        self.set_transmittance(pqmt_transmittance(self));
    }

    /// Buffers one `(⟨n_A⟩, ⟨n_E⟩)` measurement and recomputes `T`.
    pub fn step(&mut self, n_a: T, n_e: T) -> Result<T> {
        if n_a.is_nan() || n_e.is_nan() {
            return Err(Error::NonFinite("memristor input"));
        }
        if self.frozen {
            return Ok(self.transmittance);
        }
        let n_a = self.clamp_input("n_a", n_a);
        let mut n_e = self.clamp_input("n_e", n_e);
        // The gate term is √(1 - n_E/n_max): rounding noise in a measured
        // n_E = n_max would otherwise surface at the √ε level.
        if self.params.n_max - n_e <= self.params.n_max * T::lit(64.0) * T::epsilon() {
            n_e = self.params.n_max;
        }
        self.history.push(n_a, n_e);
        let t = pqmt_transmittance(self);
        self.set_transmittance(t);
        Ok(t)
    }

    fn clamp_input(&self, name: &str, x: T) -> T {
        let n_max = self.params.n_max;
        let slack = n_max * T::lit(1e-9);
        if x < -slack || x > n_max + slack {
            log::warn!("{name} = {x} outside [0, {n_max}]; clamping (check n_max)");
        }
        x.max(T::zero()).min(n_max)
    }
}

/// `T_PQMR · G(H)` from the unit's current history.
pub fn pqmt_transmittance<T: Real>(unit: &PqmtUnit<T>) -> T {
    let params = unit.params();
    let base = unit.history.pqmr_transmittance();
    let gate = gate_function(unit.history.history_map(), params.p, params.d);
    clamp_unit(base * gate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(window: usize, n_max: f64, p: f64, d: f64) -> MemParams<f64> {
        MemParams::new(window as f64, 1.0, n_max, p, d).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(MemParams::new(0.0, 1.0, 1.0, 0.5, 1.0).is_err());
        assert!(MemParams::new(1.0, 1.0, 0.0, 0.5, 1.0).is_err());
        assert!(MemParams::new(1.0, 1.0, 1.0, 1.5, 1.0).is_err());
        assert!(MemParams::new(1.0, 1.0, 1.0, 0.5, -1.0).is_err());
        assert!(MemParams::new(0.4, 1.0, 1.0, 0.5, 1.0).is_err());
        assert_eq!(MemParams::new(0.3, 1.0 / 400.0, 1.0, 0.5, 10.0).unwrap().window(), 120);
    }

    #[test]
    fn pqmr_examples() {
        assert_eq!(pqmr_transmittance(&[0.5; 4], 1.0).unwrap(), 0.5);
        assert_eq!(pqmr_transmittance(&[0.0; 4], 1.0).unwrap(), 1.0);
        assert_eq!(pqmr_transmittance(&[2.0; 4], 2.0).unwrap(), 0.0);
        assert!(pqmr_transmittance::<f64>(&[], 1.0).is_err());
    }

    #[test]
    fn history_map_examples() {
        assert_eq!(history_map(&[(0.3, 1.0), (0.9, 1.0)], 1.0).unwrap(), 1.0);
        assert_eq!(history_map(&[(3.0, 0.0); 3], 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(history_map(&[(0.25, 0.0); 5], 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(history_map::<f64>(&[], 1.0).is_err());
    }

    #[test]
    fn gate_examples() {
        for x in [0.0, 0.3, 0.7, 1.0] {
            assert_eq!(gate_function(x, 0.4, 0.0), 1.0);
        }
        // a₁ = 1/(2e⁵ - 1) at p = 0.5, d = 10.
        let a1 = 1.0 / (2.0 * 5f64.exp() - 1.0);
        assert_abs_diff_eq!(gate_function(0.0, 0.5, 10.0), a1, epsilon = 1e-15);
        assert_abs_diff_eq!(a1, 3.3804e-3, epsilon = 1e-7);
        assert_abs_diff_eq!(gate_function(0.5, 0.5, 10.0), 2.0 * 5f64.exp() * a1 - 10f64.exp() * a1 * (-5f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(gate_function(0.5, 0.5, 10.0), 0.50170, epsilon = 1e-5);
        assert_eq!(gate_function(1.0, 0.3, 7.0), 1.0);
    }

    #[test]
    fn factored_gate_matches_coefficients() {
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for d in [0.0, 1.0, 5.0, 10.0, 20.0] {
                let coeffs = GateCoefficients::new(p, d);
                for i in 0..=100 {
                    let x = i as f64 / 100.0;
                    let g = gate_function(x, p, d);
                    assert!((g - coeffs.eval(x, p, d)).abs() <= 1e-12 * coeffs.a2.max(1.0), "p={p} d={d} x={x}");
                }
            }
        }
    }

    #[test]
    fn gate_smooth_at_inflection() {
        let h = 1e-6;
        for p in [0.1f64, 0.5, 0.9] {
            for d in [1.0f64, 10.0, 20.0] {
                let left = gate_function(p - 1e-13, p, d);
                let right = gate_function(p, p, d);
                assert!((left - right).abs() <= 1e-10);
                let dl = (gate_function(p - h, p, d) - gate_function(p - 3.0 * h, p, d)) / (2.0 * h);
                let dr = (gate_function(p + 3.0 * h, p, d) - gate_function(p + h, p, d)) / (2.0 * h);
                // One-sided slopes sampled 2h from p; both tend to d/(2 - e^{d(p-1)}).
                let exact = d / (2.0 - (d * (p - 1.0)).exp());
                assert!((dl - dr).abs() <= 1e-8, "p={p} d={d}: {dl} vs {dr}");
                assert!((dl - exact).abs() <= 4.0 * d * d * h * exact);
                assert!((dr - exact).abs() <= 4.0 * d * d * h * exact);
            }
        }
    }

    #[test]
    fn pqmt_reductions() {
        let mut a = PqmtUnit::new(params(5, 1.0, 0.5, 0.0)).unwrap();
        let mut b = PqmtUnit::new(params(5, 1.0, 0.5, 10.0)).unwrap();
        let mut c = PqmtUnit::new(params(5, 1.0, 0.5, 10.0)).unwrap();
        for k in 0..20 {
            let na = (k as f64 * 0.3).sin().powi(2);
            a.step(na, 0.2).unwrap();
            b.step(na, 1.0).unwrap();
            c.step(na, 0.2).unwrap();
            let na_hist: Vec<f64> = a.history().pairs().map(|(x, _)| x).collect();
            let base = pqmr_transmittance(&na_hist, 1.0).unwrap();
            assert_eq!(a.transmittance(), base);
            assert_eq!(b.transmittance(), base);
            // Neutral padding carries nE = n_max, so only real samples with nA > 0 gate.
            if c.history().pairs().any(|(x, e)| x * (1.0 - e) > 0.0) {
                assert!(c.transmittance() < base);
            }
        }
    }

    #[test]
    fn step_examples() {
        let p = params(4, 2.0, 0.5, 10.0);
        let mut unit = PqmtUnit::new(p).unwrap();
        assert_eq!(unit.transmittance(), 0.5);
        unit.step(1.0, 2.0).unwrap();
        assert_eq!(unit.transmittance(), 0.5);
        for _ in 0..4 {
            unit.step(0.0, 2.0).unwrap();
        }
        assert_eq!(unit.transmittance(), 1.0);
        assert_eq!(unit.theta(), 0.0);
        for _ in 0..4 {
            unit.step(2.0, 0.0).unwrap();
        }
        assert_eq!(unit.transmittance(), 0.0);
        assert!(unit.step(f64::NAN, 0.0).is_err());
        // Out-of-range input is clamped.
        unit.step(-1.0, 5.0).unwrap();
        assert!(unit.history().pairs().last() == Some((0.0, 2.0)));
    }

    #[test]
    fn frozen_unit_ignores_samples() {
        let mut unit = PqmtUnit::new(params(3, 1.0, 0.5, 1.0)).unwrap();
        unit.set_transmittance(0.3);
        unit.set_frozen(true);
        unit.step(1.0, 0.0).unwrap();
        assert_eq!(unit.transmittance(), 0.3);
        assert_abs_diff_eq!((unit.theta() / 2.0).cos().powi(2), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn inflection_examples() {
        assert_abs_diff_eq!(inflection_point::<f64>(2).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(inflection_point::<f64>(4).unwrap(), 1.0 - 0.1875f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(inflection_point::<f64>(4).unwrap(), 0.56699, epsilon = 1e-5);
        assert_abs_diff_eq!(inflection_point::<f64>(9).unwrap(), 0.68573, epsilon = 1e-5);
        assert!(inflection_point::<f64>(0).is_err());
    }

    #[test]
    fn inference_examples() {
        assert_eq!(infer_input_photons(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(infer_input_photons(0.25, 0.5).unwrap(), 0.5);
        assert!(matches!(infer_input_photons(0.1, 1.0), Err(Error::InferenceUndefined)));
    }

    #[test]
    fn works_in_single_precision() {
        let p = MemParams::<f32>::new(3.0, 1.0, 1.0, 0.5, 10.0).unwrap();
        let mut unit = PqmtUnit::new(p).unwrap();
        for _ in 0..3 {
            unit.step(0.0, 1.0).unwrap();
        }
        assert_eq!(unit.transmittance(), 1.0f32);
        assert!(gate_function(0.2f32, 0.5, 20.0) > 0.0);
    }

    proptest! {
        #[test]
        fn gate_monotone_and_bounded(p in 0.0f64..=1.0, d in 0.0f64..25.0, x1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let (glo, ghi) = (gate_function(lo, p, d), gate_function(hi, p, d));
            prop_assert!(glo <= ghi + 1e-15);
            prop_assert!(glo > 0.0 && ghi <= 1.0 + 1e-15);
        }

        #[test]
        fn pqmt_never_exceeds_pqmr(samples in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..30), d in 0.0f64..20.0, p in 0.0f64..=1.0) {
            let mut unit = PqmtUnit::new(MemParams::new(4.0, 1.0, 1.0, p, d).unwrap()).unwrap();
            for (a, e) in samples {
                unit.step(a, e).unwrap();
                prop_assert!(unit.transmittance() <= unit.history().pqmr_transmittance() + 1e-15);
                prop_assert!((unit.transmittance() - (unit.theta() / 2.0).cos().powi(2)).abs() <= 1e-12);
            }
        }

        #[test]
        fn memoryless_unit_depends_on_last_sample(
            h1 in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..10),
            h2 in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..10),
            last in (0.0f64..=1.0, 0.0f64..=1.0),
        ) {
            let p = MemParams::new(1.0, 1.0, 1.0, 0.5, 10.0).unwrap();
            let run = |h: &[(f64, f64)]| {
                let mut u = PqmtUnit::new(p).unwrap();
                for &(a, e) in h { u.step(a, e).unwrap(); }
                u.step(last.0, last.1).unwrap()
            };
            prop_assert_eq!(run(&h1), run(&h2));
        }

        #[test]
        fn constant_input_reaches_fixed_point(a in 0.0f64..=2.0, e in 0.0f64..=2.0, w in 1usize..12) {
            let mut u = PqmtUnit::new(MemParams::new(w as f64, 1.0, 2.0, 0.57, 10.0).unwrap()).unwrap();
            for _ in 0..w { u.step(a, e).unwrap(); }
            let fixed = u.transmittance();
            for _ in 0..5 {
                prop_assert!((u.step(a, e).unwrap() - fixed).abs() <= 1e-15);
            }
        }
    }
}
