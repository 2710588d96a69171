//! The numerical core instantiated at `f32`.

use std::sync::Arc;

use num_complex::Complex32;
use pqmt::classifier::{train, TrainConfig};
use pqmt::fock::{FockBasis, PureState};
use pqmt::metrics::{l1_coherence, polygon_area};
use pqmt::optics::{attenuation_by_dilation, attenuation_channel, FockUnitary, ModeUnitary};
use pqmt::AreaConvention;

#[test]
fn f32_channel_and_lift() {
    let basis = Arc::new(FockBasis::enumerate(3, 2).unwrap());
    let amps: Vec<Complex32> = (0..basis.len()).map(|k| Complex32::new((k as f32).sin(), (k as f32 * 0.7).cos())).collect();
    let psi = PureState::new(basis.clone(), amps).unwrap().normalize().unwrap();
    let rho = psi.to_mixed();
    let k = attenuation_channel(&rho, 1, 0.3f32).unwrap();
    let d = attenuation_by_dilation(&rho, 1, 0.3f32).unwrap();
    assert!(k.matrix().max_abs_diff(d.matrix()) < 1e-5);
    assert!(k.is_valid(1e-5));

    let u = FockUnitary::lift(&ModeUnitary::<f32>::haar_random(3, 9).unwrap(), &basis).unwrap();
    let out = u.apply_pure(&psi).unwrap();
    assert!((out.norm_sqr() - 1.0).abs() < 1e-5);
    assert!(l1_coherence(&out.to_mixed()) >= 0.0);
}

#[test]
fn f32_area_and_training() {
    let square = [(0.0f32, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    assert!((polygon_area(&square, AreaConvention::default()).unwrap() - 1.0).abs() < 1e-6);

    let xs: Vec<Vec<f32>> = (0..40).map(|k| vec![(k % 2) as f32, 1.0 - (k % 2) as f32]).collect();
    let ys: Vec<usize> = (0..40).map(|k| k % 2).collect();
    let cfg = TrainConfig::<f32> {
        epochs: 50,
        learning_rate: 0.1,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let out = train(&xs, &ys, 2, &cfg, None).unwrap();
    assert_eq!(out.final_average(1).accuracy, 1.0);
}
