//! Image reservoir: each 28×28 image is fed column by column through a Haar
//! interferometer into a layer of memory-shared memtransistors, and read out
//! by photon-number-resolving detection after a second Haar interferometer.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{Cell, Table, PIXELS, SIDE};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, Occupation, PureState};
use crate::memdevice::{inflection_point, MemParams};
use crate::network::PqmtNetwork;
use crate::optics::{FockUnitary, ModeUnitary};

pub const MODES: usize = 9;
pub const PHOTON_BOUND: u32 = 3;
/// Pixels per column, one per encoding basis state.
pub const ENCODED_STATES: usize = SIDE;

/// Whether the read-out re-injection also updates the transmittances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    #[default]
    Frozen,
    Update,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_max: f64,
    pub epsilon: f64,
    pub seed_u1: u64,
    pub seed_u2: u64,
    pub d: f64,
    /// Gate inflection point; `inflection_point(9)` when absent.
    pub p: Option<f64>,
    /// Memory window in column steps.
    pub window: usize,
    pub reset_per_image: bool,
    pub readout: Readout,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            n_max: 3.0,
            epsilon: 1e-8,
            seed_u1: 1,
            seed_u2: 2,
            d: 10.0,
            p: None,
            window: 6,
            reset_per_image: true,
            readout: Readout::Frozen,
        }
    }
}

impl ReservoirConfig {
    pub fn params(&self) -> Result<MemParams<f64>> {
        if self.window < 1 {
            return Err(Error::param("window", "at least one column step"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::param("epsilon", "must be positive"));
        }
        let p = match self.p {
            Some(p) => p,
            None => inflection_point(MODES)?,
        };
        MemParams::new(self.window as f64, 1.0, self.n_max, p, self.d)
    }
}

/// Basis indices `b₁..b₂₈`: the first 28 states of photon number 1..=3 in basis order.
pub fn encoding_map(basis: &FockBasis) -> Result<Vec<usize>> {
    let start = basis.grade_range(1).start;
    let end = basis.grade_range(basis.photon_bound()).end;
    if end - start < ENCODED_STATES {
        return Err(Error::param("basis", "fewer than 28 non-vacuum states"));
    }
    Ok((start..start + ENCODED_STATES).collect())
}

/// SHA-256 of the encoding map, one `n₁,…,n₉` line per basis state.
pub fn encoding_hash(basis: &FockBasis, map: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in map {
        let line: Vec<String> = basis.occupation(i).iter().map(u8::to_string).collect();
        h.update(line.join(","));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// `normalize(Σ_j (a_j + ε)|b_j⟩)`.
pub fn encode_column(basis: &Arc<FockBasis>, map: &[usize], column: &[f64], epsilon: f64) -> Result<PureState<f64>> {
    if column.len() != map.len() {
        return Err(Error::DimensionMismatch {
            what: "column length",
            expected: map.len(),
            found: column.len(),
        });
    }
    if let Some(bad) = column.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::param("column", format!("pixel {bad} outside [0, 1]")));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (&i, &a) in map.iter().zip(column) {
        amps[i] = Complex64::new(a + epsilon, 0.0);
    }
    PureState::new(Arc::clone(basis), amps)?.normalize()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub index: usize,
    pub label: u8,
    /// Transmittances after the last column.
    pub t_vector: Vec<f64>,
    /// Photon-number-resolved outcome probabilities over the full basis.
    pub features: Vec<f64>,
}

/// Fixed interferometers and encoding for one configuration.
#[derive(Debug, Clone)]
pub struct Reservoir {
    config: ReservoirConfig,
    params: MemParams<f64>,
    basis: Arc<FockBasis>,
    map: Vec<usize>,
    u1: FockUnitary<f64>,
    u2: FockUnitary<f64>,
}

impl Reservoir {
    pub fn new(config: ReservoirConfig) -> Result<Self> {
        let params = config.params()?;
        let basis = Arc::new(FockBasis::enumerate(MODES, PHOTON_BOUND)?);
        let map = encoding_map(&basis)?;
        let u1 = FockUnitary::lift(&ModeUnitary::haar_random(MODES, config.seed_u1)?, &basis)?;
        let u2 = FockUnitary::lift(&ModeUnitary::haar_random(MODES, config.seed_u2)?, &basis)?;
        Ok(Self {
            config,
            params,
            basis,
            map,
            u1,
            u2,
        })
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn params(&self) -> &MemParams<f64> {
        &self.params
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn encoding(&self) -> &[usize] {
        &self.map
    }

    pub fn encoding_occupations(&self) -> Vec<Occupation> {
        self.map.iter().map(|&i| self.basis.occupation(i).to_vec()).collect()
    }

    pub fn encoding_hash(&self) -> String {
        encoding_hash(&self.basis, &self.map)
    }

    pub fn network(&self) -> Result<PqmtNetwork<f64>> {
        PqmtNetwork::new(MODES, self.params)
    }

    pub fn u1(&self) -> &FockUnitary<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &FockUnitary<f64> {
        &self.u2
    }

    fn check_image(image: &[f64]) -> Result<()> {
        if image.len() != PIXELS {
            return Err(Error::DimensionMismatch {
                what: "image pixels",
                expected: PIXELS,
                found: image.len(),
            });
        }
        Ok(())
    }

    /// `U₁|ψ_k⟩` for column `k` of a row-major image.
    pub fn inject(&self, image: &[f64], k: usize) -> Result<PureState<f64>> {
        let column: Vec<f64> = (0..SIDE).map(|r| image[r * SIDE + k]).collect();
        self.u1.apply_pure(&encode_column(&self.basis, &self.map, &column, self.config.epsilon)?)
    }

    /// Feeds all columns, then re-injects the last one for read-out.
    pub fn process_image(&self, net: &mut PqmtNetwork<f64>, image: &[f64], label: u8, index: usize) -> Result<ImageResult> {
        Self::check_image(image)?;
        if self.config.reset_per_image {
            net.reset();
        }
        net.set_frozen(false);
        let mut last = None;
        for k in 0..SIDE {
            let phi = self.inject(image, k)?;
            net.update(&phi.mean_photon_numbers())?;
            last = Some(phi);
        }
        let phi = last.expect("images have columns");
        let t_vector = net.transmittances();
        let applied = match self.config.readout {
            Readout::Frozen => t_vector.clone(),
            Readout::Update => net.update(&phi.mean_photon_numbers())?,
        };
        let features = self.readout(net, &phi, &applied)?;
        Ok(ImageResult {
            index,
            label,
            t_vector,
            features,
        })
    }

    /// Born distribution of `U₂ · loss(T) · |φ⟩⟨φ|`.
    pub fn readout(&self, net: &mut PqmtNetwork<f64>, phi: &PureState<f64>, transmittance: &[f64]) -> Result<Vec<f64>> {
        let rho = net.transmit_with(&phi.to_mixed(), transmittance)?;
        self.u2.output_populations(&rho)
    }

    /// Processes every image; results come back in input order.
    pub fn run_dataset(&self, images: &[Vec<f64>], labels: &[u8]) -> Result<Vec<ImageResult>> {
        if images.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: images.len(),
                found: labels.len(),
            });
        }
        if self.config.reset_per_image {
            images
                .par_iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (img, &y))| self.process_image(&mut self.network()?, img, y, i))
                .collect()
        } else {
            let mut net = self.network()?;
            images
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (img, &y))| self.process_image(&mut net, img, y, i))
                .collect()
        }
    }

    /// Provenance of the fixed pipeline, for output sidecars.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "p": self.params.p,
            "modes": MODES,
            "photon_bound": PHOTON_BOUND,
            "feature_dimension": self.basis.len(),
            "encoding": self.encoding_occupations(),
            "encoding_order": "graded-lexicographic, ascending",
            "encoding_sha256": self.encoding_hash(),
        })
    }
}

/// Header `label, T0..T8, f0..f219` for [`results_table`].
pub fn results_header(features: usize) -> Vec<String> {
    std::iter::once("label".to_owned())
        .chain((0..MODES).map(|q| format!("T{q}")))
        .chain((0..features).map(|i| format!("f{i}")))
        .collect()
}

pub fn results_table(results: &[ImageResult]) -> Result<Table> {
    let width = results.first().map_or(0, |r| r.features.len());
    let mut table = Table::new(results_header(width));
    for r in results {
        let row: Vec<Cell> = std::iter::once(Cell::from(r.label))
            .chain(r.t_vector.iter().map(|&t| t.into()))
            .chain(r.features.iter().map(|&f| f.into()))
            .collect();
        table.push(row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memdevice::{gate_function, pqmr_transmittance};
    use approx::assert_abs_diff_eq;

    fn basis() -> (Arc<FockBasis>, Vec<usize>) {
        let b = Arc::new(FockBasis::enumerate(MODES, PHOTON_BOUND).unwrap());
        let m = encoding_map(&b).unwrap();
        (b, m)
    }

    #[test]
    fn encoding_map_layout() {
        let (b, m) = basis();
        assert_eq!(b.len(), 220);
        assert_eq!(m.len(), 28);
        assert_eq!(b.occupation(m[0]), &[0, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(b.occupation(m[8]), &[1, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(b.occupation(m[9]), &[0, 0, 0, 0, 0, 0, 0, 0, 2]);
        assert!(m[9..].iter().all(|&i| b.total_photons(i) == 2));
        assert_eq!(encoding_hash(&b, &m).len(), 64);
    }

    #[test]
    fn encode_column_examples() {
        let (b, m) = basis();
        let black = encode_column(&b, &m, &[0.0; 28], 1e-8).unwrap();
        for &i in &m {
            assert_abs_diff_eq!(black.amplitudes()[i].re, 28f64.sqrt().recip(), epsilon = 1e-14);
        }
        let mut col = [0.0; 28];
        col[4] = 1.0;
        let eps = 1e-8;
        let psi = encode_column(&b, &m, &col, eps).unwrap();
        let expect = (1.0 + eps) / ((1.0 + eps).powi(2) + 27.0 * eps * eps).sqrt();
        assert_abs_diff_eq!(psi.amplitudes()[m[4]].re, expect, epsilon = 1e-14);
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-14);
        assert!(encode_column(&b, &m, &[0.0; 27], eps).is_err());
        let mut bad = [0.0; 28];
        bad[3] = 1.2;
        assert!(encode_column(&b, &m, &bad, eps).is_err());
    }

    fn image(seed: u64) -> Vec<f64> {
        (0..PIXELS).map(|p| (((p as u64 * 2654435761 + seed * 97) % 256) as f64) / 255.0).collect()
    }

    #[test]
    fn features_are_distributions_and_lose_photons() {
        let res = Reservoir::new(ReservoirConfig::default()).unwrap();
        let mut net = res.network().unwrap();
        let img = image(3);
        let out = res.process_image(&mut net, &img, 1, 0).unwrap();
        assert_eq!(out.features.len(), 220);
        assert!(out.features.iter().all(|&f| f >= -1e-12));
        assert_abs_diff_eq!(out.features.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let phi = res.inject(&img, SIDE - 1).unwrap();
        let n_in: f64 = phi.mean_photon_numbers().iter().sum();
        let n_out: f64 = out.features.iter().enumerate().map(|(i, p)| p * res.basis().total_photons(i) as f64).sum();
        assert!(n_out <= n_in + 1e-12);
    }

    #[test]
    fn unit_transmittance_reduces_to_born_rule() {
        let res = Reservoir::new(ReservoirConfig::default()).unwrap();
        let mut net = res.network().unwrap();
        let phi = res.inject(&image(5), SIDE - 1).unwrap();
        let features = res.readout(&mut net, &phi, &[1.0; MODES]).unwrap();
        let born = res.u2().apply_pure(&phi).unwrap().populations();
        for (a, b) in features.iter().zip(&born) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn decoupled_units_follow_own_history() {
        let cfg = ReservoirConfig { d: 0.0, ..ReservoirConfig::default() };
        let res = Reservoir::new(cfg).unwrap();
        let img = image(8);
        let out = res.process_image(&mut res.network().unwrap(), &img, 0, 0).unwrap();
        let w = cfg.window;
        for q in 0..MODES {
            let own: Vec<f64> = (SIDE - w..SIDE).map(|k| res.inject(&img, k).unwrap().mean_photon_numbers()[q]).collect();
            assert_abs_diff_eq!(out.t_vector[q], pqmr_transmittance(&own, cfg.n_max).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn black_image_reaches_constant_drive_fixed_point() {
        let cfg = ReservoirConfig::default();
        let res = Reservoir::new(cfg).unwrap();
        let out = res.process_image(&mut res.network().unwrap(), &vec![0.0; PIXELS], 0, 0).unwrap();
        let n = res.inject(&vec![0.0; PIXELS], 0).unwrap().mean_photon_numbers();
        let p = res.params().p;
        for q in 0..MODES {
            let (a, e) = (n[q] / cfg.n_max, n[(q + 1) % MODES] / cfg.n_max);
            let h = 1.0 - (a * (1.0 - e)).sqrt();
            let expect = (1.0 - a) * gate_function(h, p, cfg.d);
            assert_abs_diff_eq!(out.t_vector[q], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn reset_isolates_images() {
        let res = Reservoir::new(ReservoirConfig::default()).unwrap();
        let imgs: Vec<Vec<f64>> = (0..4).map(image).collect();
        let a = res.run_dataset(&imgs, &[0, 1, 2, 0]).unwrap();
        let rev: Vec<Vec<f64>> = imgs.iter().rev().cloned().collect();
        let b = res.run_dataset(&rev, &[0, 2, 1, 0]).unwrap();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            assert_eq!(x.t_vector, y.t_vector);
            assert_eq!(x.features, y.features);
        }
        let c = res.run_dataset(&imgs, &[0, 1, 2, 0]).unwrap();
        assert_eq!(a, c);
        let carry = Reservoir::new(ReservoirConfig { reset_per_image: false, ..ReservoirConfig::default() }).unwrap();
        let d = carry.run_dataset(&[imgs[0].clone(), imgs[0].clone()], &[0, 0]).unwrap();
        assert_eq!(d[0].t_vector, a[0].t_vector);
    }

    #[test]
    fn update_readout_differs_from_frozen() {
        let frozen = Reservoir::new(ReservoirConfig::default()).unwrap();
        let update = Reservoir::new(ReservoirConfig { readout: Readout::Update, ..ReservoirConfig::default() }).unwrap();
        let img = image(2);
        let a = frozen.process_image(&mut frozen.network().unwrap(), &img, 0, 0).unwrap();
        let b = update.process_image(&mut update.network().unwrap(), &img, 0, 0).unwrap();
        assert_eq!(a.t_vector, b.t_vector);
        assert_ne!(a.features, b.features);
    }

    #[test]
    fn table_layout() {
        let r = ImageResult {
            index: 0,
            label: 2,
            t_vector: vec![0.5; MODES],
            features: vec![0.0; 220],
        };
        let t = results_table(&[r]).unwrap();
        assert_eq!(t.header().len(), 1 + 9 + 220);
        assert_eq!(t.header()[10], "f0");
    }
}
