//! Magnetization, Néel order, structure factor, height maps, domain-wall
//! densities and hysteresis loop areas.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{Geometry, SpinLattice};
use crate::sample::SampleSet;
use crate::schedule::Direction;

/// Default side of the reciprocal-space grid.
pub const SSF_GRID: usize = 200;
/// Default number of shots averaged into one heatmap.
pub const SSF_SHOTS: usize = 100;

fn mean_stderr(values: impl ExactSizeIterator<Item = f64>) -> (f64, f64) {
    let n = values.len();
    let values: Vec<f64> = values.collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

fn check_sites(samples: &SampleSet, lattice: &SpinLattice) -> Result<()> {
    if samples.n_sites() != lattice.n_sites() {
        return Err(Error::SiteMismatch {
            got: samples.n_sites(),
            expected: lattice.n_sites(),
        });
    }
    Ok(())
}

fn shot_magnetization(shot: &[i8]) -> f64 {
    shot.iter().map(|&s| i64::from(s)).sum::<i64>() as f64 / shot.len() as f64
}

/// Mean and standard error over shots of the per-shot magnetization.
pub fn magnetization(samples: &SampleSet) -> (f64, f64) {
    mean_stderr(samples.iter().map(shot_magnetization))
}

fn shot_neel(shot: &[i8], lattice: &SpinLattice) -> Result<f64> {
    let labels = lattice.bipartition().ok_or(Error::MissingBipartition)?;
    let sum: i64 = shot
        .iter()
        .zip(labels)
        .map(|(&s, l)| i64::from(s * l.sign()))
        .sum();
    Ok(sum as f64 / shot.len() as f64)
}

/// Staggered magnetization, positive when sublattice A is up.
pub fn neel_order(samples: &SampleSet, lattice: &SpinLattice) -> Result<(f64, f64)> {
    check_sites(samples, lattice)?;
    let values = samples
        .iter()
        .map(|shot| shot_neel(shot, lattice))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_stderr(values.into_iter()))
}

/// Cell-centred momenta spanning the open interval `(-2pi, 2pi)`.
pub fn q_axis(grid: usize) -> Vec<f64> {
    let dq = 4.0 * PI / grid as f64;
    (0..grid).map(|k| -2.0 * PI + (k as f64 + 0.5) * dq).collect()
}

/// Averaged `|S(q)|` on a square momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub q: Vec<f64>,
    /// `values[a * grid + b]` is the entry at `(q[a], q[b])` = `(qx, qy)`.
    pub values: Vec<f64>,
    pub shots: usize,
}

impl Heatmap {
    pub fn grid(&self) -> usize {
        self.q.len()
    }

    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.grid() + b]
    }

    /// Grid indices of the largest entry (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        (best / self.grid(), best % self.grid())
    }

    /// Distance in grid cells from `(a, b)` to the nearest image of
    /// `(qx, qy)` under shifts by `2 pi`.
    pub fn cells_to(&self, (a, b): (usize, usize), (qx, qy): (f64, f64)) -> f64 {
        let dq = 4.0 * PI / self.grid() as f64;
        let wrap = |d: f64| {
            let r = libm::remainder(d, 2.0 * PI);
            r.abs() / dq
        };
        let (dx, dy) = (wrap(self.q[a] - qx), wrap(self.q[b] - qy));
        libm::sqrt(dx * dx + dy * dy)
    }
}

fn grid_dims(lattice: &SpinLattice) -> Result<(usize, usize)> {
    match lattice.geometry() {
        Some(Geometry::Grid { lx, ly }) => Ok((lx, ly)),
        _ => Err(Error::MissingGeometry),
    }
}

/// `S(q)` of one grid configuration at one momentum, via the factorised
/// form `|sum_i e^{i q.r_i} s_i|^2`.
pub fn structure_factor_at(shot: &[i8], lattice: &SpinLattice, qx: f64, qy: f64) -> Result<f64> {
    let (lx, _) = grid_dims(lattice)?;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &s) in shot.iter().enumerate() {
        let phase = qx * (i % lx) as f64 + qy * (i / lx) as f64;
        re += f64::from(s) * libm::cos(phase);
        im += f64::from(s) * libm::sin(phase);
    }
    Ok(re * re + im * im)
}

/// Shot-averaged `|S(q)|` over a `grid x grid` momentum mesh.
pub fn structure_factor(samples: &SampleSet, lattice: &SpinLattice, grid: usize) -> Result<Heatmap> {
    check_sites(samples, lattice)?;
    let (lx, ly) = grid_dims(lattice)?;
    let q = q_axis(grid);
    // e^{i q x} tables for every axis position.
    let phases = |len: usize| -> Vec<(f64, f64)> {
        q.iter()
            .flat_map(|&qv| (0..len).map(move |x| (libm::cos(qv * x as f64), libm::sin(qv * x as f64))))
            .collect()
    };
    let (px, py) = (phases(lx), phases(ly));
    let mut values = vec![0.0; grid * grid];
    let mut partial = vec![(0.0, 0.0); grid * ly];
    for shot in samples.iter() {
        // partial[a][y] = sum_x s(x, y) e^{i qx_a x}
        for a in 0..grid {
            for y in 0..ly {
                let (mut re, mut im) = (0.0, 0.0);
                for x in 0..lx {
                    let s = f64::from(shot[y * lx + x]);
                    let (c, sn) = px[a * lx + x];
                    re += s * c;
                    im += s * sn;
                }
                partial[a * ly + y] = (re, im);
            }
        }
        for a in 0..grid {
            for b in 0..grid {
                let (mut re, mut im) = (0.0, 0.0);
                for y in 0..ly {
                    let (fr, fi) = partial[a * ly + y];
                    let (c, sn) = py[b * ly + y];
                    re += fr * c - fi * sn;
                    im += fr * sn + fi * c;
                }
                values[a * grid + b] += re * re + im * im;
            }
        }
    }
    let shots = samples.shots();
    values.iter_mut().for_each(|v| *v /= shots as f64);
    Ok(Heatmap { q, values, shots })
}

/// Staggered height function `tau = (-1)^(ix+iy) s` of one grid shot.
pub fn height_map(shot: &[i8], lattice: &SpinLattice) -> Result<Vec<i8>> {
    let (lx, _) = grid_dims(lattice)?;
    if shot.len() != lattice.n_sites() {
        return Err(Error::SiteMismatch {
            got: shot.len(),
            expected: lattice.n_sites(),
        });
    }
    Ok(shot
        .iter()
        .enumerate()
        .map(|(i, &s)| if (i % lx + i / lx) % 2 == 0 { s } else { -s })
        .collect())
}

/// Fraction of ring bonds hosting a domain wall, split by wall sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallDensity {
    pub total: f64,
    pub down_down: f64,
    pub up_up: f64,
}

/// Shot-averaged domain-wall densities on a ring.
pub fn wall_density(samples: &SampleSet, lattice: &SpinLattice) -> Result<WallDensity> {
    check_sites(samples, lattice)?;
    if !lattice.is_ring() {
        return Err(Error::NotARing);
    }
    let n = samples.n_sites();
    let (mut dd, mut uu) = (0usize, 0usize);
    for shot in samples.iter() {
        for i in 0..n {
            match (shot[i], shot[(i + 1) % n]) {
                (1, 1) => uu += 1,
                (-1, -1) => dd += 1,
                _ => {}
            }
        }
    }
    let bonds = (n * samples.shots()) as f64;
    let (down_down, up_up) = (dd as f64 / bonds, uu as f64 / bonds);
    Ok(WallDensity {
        total: (dd + uu) as f64 / bonds,
        down_down,
        up_up,
    })
}

/// Per-step averaged observables of one hysteresis cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub h: f64,
    pub m_z: f64,
    pub m_z_stderr: f64,
    pub m_s: Option<f64>,
    pub wall_total: Option<f64>,
    pub wall_dd: Option<f64>,
    pub direction: Direction,
}

impl TraceStep {
    /// Every observable the lattice supports, evaluated on one step's shots.
    pub fn from_samples(
        samples: &SampleSet,
        lattice: &SpinLattice,
        direction: Direction,
    ) -> Result<Self> {
        check_sites(samples, lattice)?;
        let (m_z, m_z_stderr) = magnetization(samples);
        let m_s = match lattice.bipartition() {
            Some(_) => Some(neel_order(samples, lattice)?.0),
            None => None,
        };
        let walls = if lattice.is_ring() {
            Some(wall_density(samples, lattice)?)
        } else {
            None
        };
        Ok(TraceStep {
            h: samples.field_value,
            m_z,
            m_z_stderr,
            m_s,
            wall_total: walls.map(|w| w.total),
            wall_dd: walls.map(|w| w.down_down),
            direction,
        })
    }
}

/// Ordered field steps forming one closed cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisTrace {
    steps: Vec<TraceStep>,
}

impl HysteresisTrace {
    pub fn new(steps: Vec<TraceStep>) -> Result<Self> {
        let first = steps.first().ok_or(Error::EmptySamples)?.h;
        let last = steps[steps.len() - 1].h;
        if first != last {
            return Err(Error::OpenTrace { first, last });
        }
        for (k, s) in steps.iter().enumerate() {
            let in_unit = |v: f64| v.abs() <= 1.0 + 1e-12;
            let in_prob = |v: f64| (-1e-12..=1.0 + 1e-12).contains(&v);
            if !in_unit(s.m_z)
                || !s.m_s.is_none_or(in_unit)
                || !s.wall_total.is_none_or(in_prob)
                || !s.wall_dd.is_none_or(in_prob)
            {
                return Err(Error::DegenerateTrace(format!("step {k} out of range")));
            }
        }
        Ok(HysteresisTrace { steps })
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.steps.iter().map(|s| (s.h, s.m_z)).collect()
    }
}

/// `|closed integral M dH|` by the trapezoid rule over a closed `(H, M)` path.
pub fn loop_area_points(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::DegenerateTrace(format!("{} points, need at least 4", points.len())));
    }
    let (first, last) = (points[0].0, points[points.len() - 1].0);
    if first != last {
        return Err(Error::OpenTrace { first, last });
    }
    if points.iter().all(|p| p.0 == first) {
        return Err(Error::DegenerateTrace("field never changes".into()));
    }
    let area: f64 = points
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    Ok(area.abs())
}

pub fn loop_area(trace: &HysteresisTrace) -> Result<f64> {
    loop_area_points(&trace.points())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_odd_ring, make_open_grid, make_ring};

    fn checkerboard(lx: usize, ly: usize) -> Vec<i8> {
        (0..lx * ly)
            .map(|i| if (i % lx + i / lx) % 2 == 0 { 1 } else { -1 })
            .collect()
    }

    fn set(n: usize, shots: &[Vec<i8>]) -> SampleSet {
        SampleSet::new(n, shots.concat(), 0.0, "test").unwrap()
    }

    #[test]
    fn magnetization_examples() {
        assert_eq!(magnetization(&set(4, &[vec![1; 4]])), (1.0, 0.0));
        assert_eq!(magnetization(&set(4, &[checkerboard(2, 2)])), (0.0, 0.0));
        let (m, e) = magnetization(&set(3, &[vec![1; 3], vec![-1; 3]]));
        assert_eq!(m, 0.0);
        assert!((e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn neel_examples() {
        let g = make_open_grid(4, 4, 1.0).unwrap();
        assert_eq!(neel_order(&set(16, &[checkerboard(4, 4)]), &g).unwrap().0, 1.0);
        let flipped: Vec<i8> = checkerboard(4, 4).iter().map(|s| -s).collect();
        assert_eq!(neel_order(&set(16, &[flipped]), &g).unwrap().0, -1.0);
        assert_eq!(neel_order(&set(16, &[vec![1; 16]]), &g).unwrap().0, 0.0);
        let ring = make_odd_ring(5, 1.0).unwrap();
        assert_eq!(neel_order(&set(5, &[vec![1; 5]]), &ring), Err(Error::MissingBipartition));
    }

    #[test]
    fn structure_factor_examples() {
        let g = make_open_grid(2, 2, 1.0).unwrap();
        let cb = checkerboard(2, 2);
        assert_eq!(structure_factor_at(&cb, &g, PI, PI).unwrap(), 16.0);
        assert_eq!(structure_factor_at(&cb, &g, 0.0, 0.0).unwrap(), 0.0);
        let g = make_open_grid(5, 5, 1.0).unwrap();
        assert_eq!(structure_factor_at(&[1; 25], &g, 0.0, 0.0).unwrap(), 625.0);
        let ring = make_odd_ring(5, 1.0).unwrap();
        assert_eq!(structure_factor_at(&[1; 5], &ring, 0.0, 0.0), Err(Error::MissingGeometry));
    }

    #[test]
    fn heatmap_peaks() {
        let g = make_open_grid(6, 6, 1.0).unwrap();
        let hm = structure_factor(&set(36, &[checkerboard(6, 6)]), &g, 40).unwrap();
        let peak = hm.argmax();
        assert!(hm.cells_to(peak, (PI, PI)) < 1.0);
        let hm = structure_factor(&set(36, &[vec![-1; 36]]), &g, 40).unwrap();
        assert!(hm.cells_to(hm.argmax(), (0.0, 0.0)) < 1.0);
        // mesh entries agree with the pointwise form
        let shot = checkerboard(6, 6);
        let (a, b) = (7, 31);
        let direct = structure_factor_at(&shot, &g, hm.q[a], hm.q[b]).unwrap();
        let hm = structure_factor(&set(36, &[shot]), &g, 40).unwrap();
        assert!((hm.at(a, b) - direct).abs() < 1e-9);
    }

    #[test]
    fn height_map_examples() {
        let g = make_open_grid(4, 3, 1.0).unwrap();
        assert!(height_map(&checkerboard(4, 3), &g).unwrap().iter().all(|&t| t == 1));
        assert_eq!(height_map(&[1; 12], &g).unwrap(), checkerboard(4, 3));
        let mut one = checkerboard(4, 3);
        one[5] = -one[5];
        let tau = height_map(&one, &g).unwrap();
        assert_eq!(tau.iter().filter(|&&t| t == -1).count(), 1);
        assert_eq!(tau[5], -1);
        let ring = make_odd_ring(3, 1.0).unwrap();
        assert!(height_map(&[1; 3], &ring).is_err());
    }

    #[test]
    fn wall_density_examples() {
        let even = make_ring(6, 1.0).unwrap();
        let alt = vec![1, -1, 1, -1, 1, -1];
        let w = wall_density(&set(6, &[alt]), &even).unwrap();
        assert_eq!((w.total, w.down_down, w.up_up), (0.0, 0.0, 0.0));
        let odd = make_odd_ring(7, 1.0).unwrap();
        let ground = vec![1, -1, 1, -1, 1, -1, 1];
        assert_eq!(wall_density(&set(7, &[ground]), &odd).unwrap().total, 1.0 / 7.0);
        let w = wall_density(&set(7, &[vec![1; 7]]), &odd).unwrap();
        assert_eq!((w.total, w.down_down, w.up_up), (1.0, 0.0, 1.0));
        let g = make_open_grid(2, 2, 1.0).unwrap();
        assert_eq!(wall_density(&set(4, &[vec![1; 4]]), &g), Err(Error::NotARing));
    }

    #[test]
    fn loop_area_examples() {
        let rect = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (1.0, 1.0)];
        assert_eq!(loop_area_points(&rect).unwrap(), 4.0);
        let line = [(1.0, 0.5), (0.0, 0.0), (-1.0, -0.5), (0.0, 0.0), (1.0, 0.5)];
        assert_eq!(loop_area_points(&line).unwrap(), 0.0);
        let point = [(0.5, 0.1); 5];
        assert!(matches!(loop_area_points(&point), Err(Error::DegenerateTrace(_))));
        let open = [(1.0, 1.0), (0.0, 0.0), (-1.0, 1.0), (0.0, 0.0)];
        assert!(matches!(loop_area_points(&open), Err(Error::OpenTrace { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn closed_path() -> impl Strategy<Value = Vec<(f64, f64)>> {
            prop::collection::vec((-3.0f64..3.0, -1.0f64..1.0), 3..40).prop_map(|mut v| {
                v[1].0 = v[0].0 + 1.0;
                let first = v[0];
                v.push((first.0, first.1));
                v
            })
        }

        proptest! {
            #[test]
            fn area_invariant_under_rotation_and_reversal(path in closed_path(), shift in 0usize..40) {
                let area = loop_area_points(&path).unwrap();
                let body = &path[..path.len() - 1];
                let k = shift % body.len();
                let mut rotated: Vec<_> = body[k..].iter().chain(&body[..k]).copied().collect();
                rotated.push(rotated[0]);
                prop_assert!((loop_area_points(&rotated).unwrap() - area).abs() < 1e-9);
                let reversed: Vec<_> = path.iter().rev().copied().collect();
                prop_assert!((loop_area_points(&reversed).unwrap() - area).abs() < 1e-9);
            }

            #[test]
            fn zero_momentum_is_squared_magnetization(bits in prop::collection::vec(any::<bool>(), 16)) {
                let g = make_open_grid(4, 4, 1.0).unwrap();
                let shot: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
                let m: i64 = shot.iter().map(|&s| i64::from(s)).sum();
                prop_assert_eq!(structure_factor_at(&shot, &g, 0.0, 0.0).unwrap(), (m * m) as f64);
                let tau = height_map(&shot, &g).unwrap();
                let tau_mean = tau.iter().map(|&t| f64::from(t)).sum::<f64>() / 16.0;
                let s = set(16, &[shot]);
                prop_assert_eq!(tau_mean, neel_order(&s, &g).unwrap().0);
            }

            #[test]
            fn odd_ring_wall_count_is_odd(bits in prop::collection::vec(any::<bool>(), 11)) {
                let ring = make_odd_ring(11, 1.0).unwrap();
                let shot: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
                let w = wall_density(&set(11, &[shot]), &ring).unwrap();
                let walls = libm::round(w.total * 11.0) as i64;
                prop_assert_eq!(walls % 2, 1);
                prop_assert!((w.total - w.up_up - w.down_down).abs() < 1e-15);
            }
        }
    }
}
