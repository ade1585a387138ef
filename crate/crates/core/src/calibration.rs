//! Flux-bias-offset balancing: per-site offsets are nudged against the
//! deviation of each site's mean magnetization from the ensemble mean until
//! all sites respond alike at zero applied field.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution, Normal};

use crate::error::{Error, Result};
use crate::exact::{self, Temperature, TfimSpec};
use crate::lattice::SpinLattice;
use crate::rng;
use crate::sqa::AnnealSampler;

pub const DEFAULT_ITERATIONS: usize = 3000;
pub const DEFAULT_SHOTS: usize = 3000;
/// Step of the hardware procedure, in flux units.
pub const HARDWARE_STEP: f64 = 2e-6;
/// Inverse temperature of the free-spin benchmark, in field units.
pub const BENCHMARK_BETA: f64 = 25.0;
/// Default step in field units: `step * BENCHMARK_BETA = 0.025`, so a site's
/// bias relaxes by 2.5% per iteration and settles well inside 3000 of them.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Anything that reports per-site mean z-magnetization at zero h-gain under
/// additive per-site field offsets.
pub trait SiteSampler {
    fn n_sites(&self) -> usize;

    /// Mean of each site over `shots` shots. `key` selects an independent
    /// random block so repeated calls draw fresh samples.
    fn site_means(&self, offsets: &[f64], shots: usize, key: u64) -> Result<Vec<f64>>;
}

impl<S: SiteSampler + ?Sized> SiteSampler for &S {
    fn n_sites(&self) -> usize {
        (**self).n_sites()
    }

    fn site_means(&self, offsets: &[f64], shots: usize, key: u64) -> Result<Vec<f64>> {
        (**self).site_means(offsets, shots, key)
    }
}

fn check_len(offsets: &[f64], n: usize) -> Result<()> {
    if offsets.len() != n {
        return Err(Error::SiteMismatch {
            got: offsets.len(),
            expected: n,
        });
    }
    Ok(())
}

/// Uncoupled spins: site `i` is up with probability `(1 + tanh(beta o_i)) / 2`,
/// so a shot batch is one binomial draw per site.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpinSampler {
    pub n_sites: usize,
    pub beta: f64,
    pub seed: u64,
}

impl SiteSampler for FreeSpinSampler {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn site_means(&self, offsets: &[f64], shots: usize, key: u64) -> Result<Vec<f64>> {
        check_len(offsets, self.n_sites)?;
        let mut rng = rng::stream(self.seed, rng::domain::CALIBRATION, key, 0);
        offsets
            .iter()
            .map(|&o| {
                let p_up = 0.5 * (1.0 + libm::tanh(self.beta * o));
                if !p_up.is_finite() {
                    return Ok(f64::NAN);
                }
                let up = Binomial::new(shots as u64, p_up.clamp(0.0, 1.0))
                    .map_err(|e| Error::Calibration(format!("{e}")))?
                    .sample(&mut rng);
                Ok((2.0 * up as f64 - shots as f64) / shots as f64)
            })
            .collect()
    }
}

/// Exact thermal or ground-state sampling of a small lattice, with the
/// offsets as its only longitudinal field.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSiteSampler {
    pub lattice: SpinLattice,
    pub gamma: f64,
    pub temperature: Temperature,
    pub seed: u64,
}

impl SiteSampler for ExactSiteSampler {
    fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    fn site_means(&self, offsets: &[f64], shots: usize, key: u64) -> Result<Vec<f64>> {
        check_len(offsets, self.n_sites())?;
        let lattice = SpinLattice::new(self.n_sites(), self.lattice.edges().to_vec(), offsets.to_vec())?;
        let spec = TfimSpec::new(lattice, self.gamma, 1.0, self.temperature)?;
        Ok(exact::sample_z(&spec, shots, rng::mix(&[self.seed, key]))?.site_means())
    }
}

impl SiteSampler for AnnealSampler {
    fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    fn site_means(&self, offsets: &[f64], shots: usize, key: u64) -> Result<Vec<f64>> {
        Ok(self.sample(offsets, shots, key)?.site_means())
    }
}

/// Inner sampler plus a fixed per-site bias added to every offset it sees.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedSampler<S> {
    pub inner: S,
    bias: Vec<f64>,
}

impl<S: SiteSampler> BiasedSampler<S> {
    pub fn new(inner: S, bias: Vec<f64>) -> Result<Self> {
        check_len(&bias, inner.n_sites())?;
        if !bias.iter().all(|b| b.is_finite()) {
            return Err(Error::Calibration("bias must be finite".into()));
        }
        Ok(BiasedSampler { inner, bias })
    }

    /// Independent Gaussian biases of width `sigma`.
    pub fn gaussian(inner: S, sigma: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Calibration(format!("{e}")))?;
        let mut rng = rng::stream(seed, rng::domain::BIAS, 0, 0);
        let bias = (0..inner.n_sites()).map(|_| normal.sample(&mut rng)).collect();
        Self::new(inner, bias)
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

impl<S: SiteSampler> SiteSampler for BiasedSampler<S> {
    fn n_sites(&self) -> usize {
        self.inner.n_sites()
    }

    fn site_means(&self, offsets: &[f64], shots: usize, key: u64) -> Result<Vec<f64>> {
        check_len(offsets, self.bias.len())?;
        let total: Vec<f64> = offsets.iter().zip(&self.bias).map(|(o, b)| o + b).collect();
        self.inner.site_means(&total, shots, key)
    }
}

/// Population standard deviation across sites.
pub fn spread(per_site_means: &[f64]) -> f64 {
    let n = per_site_means.len() as f64;
    if per_site_means.is_empty() {
        return 0.0;
    }
    let mean = per_site_means.iter().sum::<f64>() / n;
    let var = per_site_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
    libm::sqrt(var)
}

/// One measurement of the loop: the offsets in force and what they produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub fbo: Vec<f64>,
    pub site_means: Vec<f64>,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationState {
    pub fbo: Vec<f64>,
    pub iteration: usize,
    /// Entry `k` is the measurement taken after `k` updates.
    pub history: Vec<CalibrationRecord>,
}

impl CalibrationState {
    pub fn spreads(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.spread).collect()
    }
}

/// Run `iterations` parallel updates `fbo_i <- fbo_i - step (m_i - mean m)`,
/// measuring `shots` shots before the first update and after each one.
pub fn calibrate<S: SiteSampler>(
    sampler: &S,
    iterations: usize,
    shots: usize,
    step: f64,
) -> Result<CalibrationState> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Calibration(format!("step = {step} must be positive")));
    }
    if shots == 0 {
        return Err(Error::Calibration("shots must be at least 1".into()));
    }
    let n = sampler.n_sites();
    let measure = |fbo: &[f64], iteration: usize| -> Result<CalibrationRecord> {
        let site_means = sampler.site_means(fbo, shots, iteration as u64)?;
        if site_means.iter().any(|m| m.is_nan()) {
            return Err(Error::NanMagnetization(iteration));
        }
        Ok(CalibrationRecord {
            fbo: fbo.to_vec(),
            spread: spread(&site_means),
            site_means,
        })
    };
    let mut fbo = alloc::vec![0.0; n];
    let mut history = Vec::with_capacity(iterations + 1);
    history.push(measure(&fbo, 0)?);
    for iteration in 1..=iterations {
        let means = &history[iteration - 1].site_means;
        let mean = means.iter().sum::<f64>() / n as f64;
        for (f, m) in fbo.iter_mut().zip(means) {
            *f -= step * (m - mean);
        }
        history.push(measure(&fbo, iteration)?);
    }
    Ok(CalibrationState {
        fbo,
        iteration: iterations,
        history,
    })
}

/// First index at which `spreads` rises more than `tolerance` above its
/// running minimum, if any.
pub fn first_rise(spreads: &[f64], tolerance: f64) -> Option<usize> {
    let mut low = f64::INFINITY;
    for (k, &s) in spreads.iter().enumerate() {
        if s > low + tolerance {
            return Some(k);
        }
        low = low.min(s);
    }
    None
}

/// Shot-noise scale of a single site mean, `1 / sqrt(shots)`.
pub fn noise_floor(shots: usize) -> f64 {
    1.0 / libm::sqrt(shots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_odd_ring;
    use alloc::vec;
    use proptest::prelude::*;

    fn free(n: usize, seed: u64) -> FreeSpinSampler {
        FreeSpinSampler {
            n_sites: n,
            beta: BENCHMARK_BETA,
            seed,
        }
    }

    #[test]
    fn spread_examples() {
        assert_eq!(spread(&[0.3; 5]), 0.0);
        assert_eq!(spread(&[1.0, -1.0]), 1.0);
    }

    #[test]
    fn zero_bias_keeps_offsets_near_zero() {
        let s = BiasedSampler::new(free(64, 1), vec![0.0; 64]).unwrap();
        let st = calibrate(&s, 200, 500, DEFAULT_STEP).unwrap();
        assert_eq!(st.history.len(), st.iteration + 1);
        let worst = st.fbo.iter().fold(0.0f64, |a, f| a.max(f.abs()));
        assert!(worst < 0.01, "{worst}");
        let floor = noise_floor(500);
        assert!(st.spreads().iter().all(|&s| s < 2.0 * floor));
    }

    #[test]
    fn single_biased_site_is_cancelled() {
        let mut bias = vec![0.0; 16];
        bias[3] = 0.02;
        let s = BiasedSampler::new(free(16, 2), bias).unwrap();
        let st = calibrate(&s, 600, 3000, DEFAULT_STEP).unwrap();
        // the ensemble mean absorbs 1/16 of the bias, so fbo_3 tends to -15/16 b
        assert!((st.fbo[3] + 0.02 * 15.0 / 16.0).abs() < 0.003, "{}", st.fbo[3]);
        let residual: Vec<f64> = st
            .history
            .iter()
            .map(|r| {
                let mean = r.site_means.iter().sum::<f64>() / 16.0;
                (r.site_means[3] - mean).abs()
            })
            .collect();
        let early: f64 = residual[..20].iter().sum::<f64>() / 20.0;
        let late: f64 = residual[residual.len() - 20..].iter().sum::<f64>() / 20.0;
        assert!(late < 0.25 * early);
    }

    #[test]
    fn deterministic_response_follows_closed_form() {
        // with noiseless means the residual bias contracts by (1 - step*beta)
        struct Exact(Vec<f64>);
        impl SiteSampler for Exact {
            fn n_sites(&self) -> usize {
                self.0.len()
            }
            fn site_means(&self, o: &[f64], _: usize, _: u64) -> Result<Vec<f64>> {
                Ok(o.iter().zip(&self.0).map(|(o, b)| libm::tanh(BENCHMARK_BETA * (o + b))).collect())
            }
        }
        let bias = vec![0.004, -0.004];
        let st = calibrate(&Exact(bias.clone()), 50, 1, DEFAULT_STEP).unwrap();
        let mut x = bias.clone();
        for _ in 0..50 {
            let m: Vec<f64> = x.iter().map(|v| libm::tanh(BENCHMARK_BETA * v)).collect();
            let mean = (m[0] + m[1]) / 2.0;
            for (xi, mi) in x.iter_mut().zip(&m) {
                *xi -= DEFAULT_STEP * (mi - mean);
            }
        }
        for i in 0..2 {
            assert!((st.fbo[i] + bias[i] - x[i]).abs() < 1e-15);
        }
        let s = st.spreads();
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = free(4, 0);
        assert!(calibrate(&s, 1, 10, 0.0).is_err());
        assert!(calibrate(&s, 1, 0, 1e-3).is_err());
        assert!(BiasedSampler::new(free(4, 0), vec![0.0; 3]).is_err());
    }

    #[test]
    fn nan_magnetization_aborts() {
        let s = BiasedSampler::new(free(2, 0), vec![0.0, 0.0]).unwrap();
        let mut bad = s.clone();
        bad.inner.beta = f64::NAN;
        assert_eq!(calibrate(&bad, 3, 10, 1e-3), Err(Error::NanMagnetization(0)));
    }

    #[test]
    fn first_rise_examples() {
        assert_eq!(first_rise(&[3.0, 2.0, 1.0, 1.0], 0.1), None);
        assert_eq!(first_rise(&[3.0, 1.0, 1.05, 1.2], 0.1), Some(3));
    }

    #[test]
    fn exact_and_sqa_samplers_plug_in() {
        let ring = make_odd_ring(5, 1.0).unwrap();
        let exact = ExactSiteSampler {
            lattice: ring.clone(),
            gamma: 0.3,
            temperature: Temperature::Beta(2.0),
            seed: 4,
        };
        let s = BiasedSampler::gaussian(exact, 0.05, 1).unwrap();
        let st = calibrate(&s, 3, 50, 0.01).unwrap();
        assert_eq!(st.history.len(), 4);
        let sqa = AnnealSampler {
            lattice: ring,
            table: crate::schedule::EnergyTable::synthetic(),
            config: crate::sqa::SqaConfig::new(1, 1, 1),
            s_final: 0.6,
            sweeps: 5,
        };
        assert_eq!(calibrate(&sqa, 2, 4, 0.01).unwrap().fbo.len(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn offset_sum_is_conserved(seed in 0u64..1000, step in 1e-4f64..0.05, sigma in 0.0f64..0.05) {
            let s = BiasedSampler::gaussian(free(32, seed), sigma.max(1e-9), seed).unwrap();
            let st = calibrate(&s, 30, 100, step).unwrap();
            for r in &st.history {
                prop_assert!(r.fbo.iter().sum::<f64>().abs() < 1e-9);
            }
        }
    }
}
