//! Observables: L1 coherence, hysteresis-loop areas, transmittance-vector separability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::MixedState;
use crate::scalar::Real;

/// Sum of the moduli of all off-diagonal density-matrix elements in the Fock basis.
pub fn l1_coherence<T: Real>(rho: &MixedState<T>) -> T {
    let m = rho.matrix();
    let n = m.rows();
    let mut total = T::zero();
    for r in 0..n {
        for (c, z) in m.row(r).iter().enumerate() {
            if r != c {
                total += z.norm();
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaConvention {
    /// Cut the curve into simple subloops at its self-crossings and add their absolute areas.
    #[default]
    SubloopSum,
    /// Absolute value of the net signed (shoelace) area.
    Signed,
}

/// Signed shoelace area of the implicitly closed polygon.
pub fn shoelace<T: Real>(points: &[(T, T)]) -> T {
    let n = points.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for k in 0..n {
        let (x0, y0) = points[k];
        let (x1, y1) = points[(k + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / T::lit(2.0)
}

/// Area enclosed by a closed polyline under `convention`.
pub fn polygon_area<T: Real>(points: &[(T, T)], convention: AreaConvention) -> Result<T> {
    if points.len() < 3 {
        return Err(Error::param("curve", "at least 3 points are required"));
    }
    Ok(match convention {
        AreaConvention::Signed => shoelace(points).abs(),
        AreaConvention::SubloopSum => subloop_area(points),
    })
}

/// Crossing of segment `p→q` with segment `a→b`, as `(t along p→q, point)`.
/// Accepts `t ∈ (0, 1]` and `s ∈ [0, 1)` so a crossing through a shared
/// vertex is reported once.
fn crossing<T: Real>(p: (T, T), q: (T, T), a: (T, T), b: (T, T)) -> Option<(T, (T, T))> {
    let r = (q.0 - p.0, q.1 - p.1);
    let s = (b.0 - a.0, b.1 - a.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom == T::zero() {
        return None;
    }
    let ap = (a.0 - p.0, a.1 - p.1);
    let t = (ap.0 * s.1 - ap.1 * s.0) / denom;
    let u = (ap.0 * r.1 - ap.1 * r.0) / denom;
    if t > T::zero() && t <= T::one() && u >= T::zero() && u < T::one() {
        Some((t, (p.0 + t * r.0, p.1 + t * r.1)))
    } else {
        None
    }
}

/// Loop erasure: walk the curve, and whenever the walk crosses its own
/// trail, cut the enclosed subloop off, bank its absolute area, and continue
/// from the crossing point.
fn subloop_area<T: Real>(points: &[(T, T)]) -> T {
    let n = points.len();
    let mut path: Vec<(T, T)> = Vec::with_capacity(n);
    path.push(points[0]);
    let mut total = T::zero();
    for k in 1..=n {
        let target = points[k % n];
        let mut start = *path.last().expect("path is never empty");
        loop {
            let mut best: Option<(usize, T, (T, T))> = None;
            // The last trail segment ends at `start`, so it is adjacent and skipped.
            for i in 0..path.len().saturating_sub(2) {
                if let Some((t, x)) = crossing(start, target, path[i], path[i + 1]) {
                    if best.is_none_or(|(_, bt, _)| t < bt) {
                        best = Some((i, t, x));
                    }
                }
            }
            let Some((i, _, x)) = best else { break };
            let mut lobe = Vec::with_capacity(path.len() - i);
            lobe.push(x);
            lobe.extend_from_slice(&path[i + 1..]);
            total += shoelace(&lobe).abs();
            path.truncate(i + 1);
            path.push(x);
            start = x;
        }
        if k < n {
            path.push(target);
        }
    }
    total + shoelace(&path).abs()
}

/// One steady-state period of an input–output curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopCurve<T> {
    pub points: Vec<(T, T)>,
    /// Index of the first point of the second half-cycle.
    pub half_cycle_split: usize,
}

impl<T: Real> LoopCurve<T> {
    pub fn new(points: Vec<(T, T)>, half_cycle_split: usize) -> Result<Self> {
        if points.len() < 8 {
            return Err(Error::param("curve", "a loop curve needs at least 8 points"));
        }
        if half_cycle_split > points.len() {
            return Err(Error::param("half_cycle_split", "beyond the end of the curve"));
        }
        Ok(Self { points, half_cycle_split })
    }

    pub fn area(&self) -> T {
        self.area_with(AreaConvention::SubloopSum)
    }

    pub fn area_with(&self, convention: AreaConvention) -> T {
        polygon_area(&self.points, convention).expect("loop curves hold at least 8 points")
    }

    /// Width times height of the axis-aligned bounding box.
    pub fn bounding_box_area(&self) -> T {
        let (mut x0, mut x1, mut y0, mut y1) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
        for &(x, y) in &self.points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        (x1 - x0) * (y1 - y0)
    }
}

/// Time-series records that know which drive cycle they belong to.
pub trait CycleTagged {
    fn cycle(&self) -> usize;
    fn first_half(&self) -> bool;
}

fn cycle_slice<R: CycleTagged>(records: &[R], cycle: usize) -> &[R] {
    let start = records.iter().position(|r| r.cycle() == cycle).unwrap_or(records.len());
    let len = records[start..].iter().take_while(|r| r.cycle() == cycle).count();
    &records[start..start + len]
}

/// Loop curve traced during the last recorded cycle.
pub fn last_cycle_curve<T: Real, R: CycleTagged>(
    records: &[R],
    x: impl Fn(&R) -> T,
    y: impl Fn(&R) -> T,
) -> Result<LoopCurve<T>> {
    let last = records.last().ok_or(Error::Empty("records"))?.cycle();
    let cycle = cycle_slice(records, last);
    if last == 0 {
        return Err(Error::param("records", "need at least one cycle after the transient"));
    }
    let split = cycle.iter().take_while(|r| r.first_half()).count();
    LoopCurve::new(cycle.iter().map(|r| (x(r), y(r))).collect(), split)
}

/// Subloop-summed area of the last recorded cycle.
pub fn area_from_records<T: Real, R: CycleTagged>(
    records: &[R],
    x: impl Fn(&R) -> T,
    y: impl Fn(&R) -> T,
) -> Result<T> {
    Ok(last_cycle_curve(records, x, y)?.area())
}

/// Largest deviation between the last two cycles, relative to the observable
/// range over those cycles. `None` if fewer than two full cycles are present.
pub fn steady_state_deviation<T: Real, R: CycleTagged>(records: &[R], observables: &[&dyn Fn(&R) -> T]) -> Option<T> {
    let last = records.last()?.cycle();
    if last == 0 {
        return None;
    }
    let (prev, cur) = (cycle_slice(records, last - 1), cycle_slice(records, last));
    if prev.len() != cur.len() || cur.is_empty() {
        return None;
    }
    let mut worst = T::zero();
    for obs in observables {
        let (mut lo, mut hi, mut dev) = (T::infinity(), T::neg_infinity(), T::zero());
        for (a, b) in prev.iter().zip(cur) {
            let (va, vb) = (obs(a), obs(b));
            lo = lo.min(va.min(vb));
            hi = hi.max(va.max(vb));
            dev = dev.max((va - vb).abs());
        }
        let range = hi - lo;
        let rel = if range > T::zero() { dev / range } else { dev };
        worst = worst.max(rel);
    }
    Some(worst)
}

/// Per-vector mean distance `Σ_j ‖T_i - T_j‖₂ / D` over a set of `D` vectors.
pub fn separability<T: Real>(vectors: &[Vec<T>]) -> Result<Vec<T>> {
    let first = vectors.first().ok_or(Error::Empty("transmittance vectors"))?;
    if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
        return Err(Error::DimensionMismatch {
            what: "transmittance vector",
            expected: first.len(),
            found: bad.len(),
        });
    }
    let count = T::from_count(vectors.len());
    Ok(vectors
        .iter()
        .map(|vi| {
            let sum: T = vectors
                .iter()
                .map(|vj| {
                    vi.iter()
                        .zip(vj)
                        .map(|(a, b)| (*a - *b) * (*a - *b))
                        .sum::<T>()
                        .sqrt()
                })
                .sum();
            sum / count
        })
        .collect())
}
