use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Z-basis measurements: `shots` rows of `n_sites` spins, each `+1` or `-1`,
/// tagged with the applied h-gain that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_sites: usize,
    spins: Vec<i8>,
    pub field_value: f64,
    pub lattice_ref: String,
}

impl SampleSet {
    pub fn new(
        n_sites: usize,
        spins: Vec<i8>,
        field_value: f64,
        lattice_ref: impl Into<String>,
    ) -> Result<Self> {
        if n_sites == 0 || spins.is_empty() {
            return Err(Error::EmptySamples);
        }
        if spins.len() % n_sites != 0 {
            return Err(Error::SiteMismatch {
                got: spins.len() % n_sites,
                expected: n_sites,
            });
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::NotASpin(bad));
        }
        Ok(SampleSet {
            n_sites,
            spins,
            field_value,
            lattice_ref: lattice_ref.into(),
        })
    }

    pub fn from_shots<'a>(
        shots: impl IntoIterator<Item = &'a [i8]>,
        field_value: f64,
        lattice_ref: impl Into<String>,
    ) -> Result<Self> {
        let mut n_sites = 0;
        let mut spins = Vec::new();
        for shot in shots {
            if n_sites == 0 {
                n_sites = shot.len();
            } else if shot.len() != n_sites {
                return Err(Error::SiteMismatch {
                    got: shot.len(),
                    expected: n_sites,
                });
            }
            spins.extend_from_slice(shot);
        }
        Self::new(n_sites, spins, field_value, lattice_ref)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn shots(&self) -> usize {
        self.spins.len() / self.n_sites
    }

    pub fn shot(&self, k: usize) -> &[i8] {
        &self.spins[k * self.n_sites..(k + 1) * self.n_sites]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[i8]> {
        self.spins.chunks_exact(self.n_sites)
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// First `count` shots (all of them if fewer).
    pub fn truncated(&self, count: usize) -> SampleSet {
        let keep = count.clamp(1, self.shots());
        SampleSet {
            n_sites: self.n_sites,
            spins: self.spins[..keep * self.n_sites].to_vec(),
            field_value: self.field_value,
            lattice_ref: self.lattice_ref.clone(),
        }
    }

    /// Per-site mean of the recorded spins.
    pub fn site_means(&self) -> Vec<f64> {
        let mut acc = alloc::vec![0i64; self.n_sites];
        for shot in self.iter() {
            for (a, &s) in acc.iter_mut().zip(shot) {
                *a += i64::from(s);
            }
        }
        let shots = self.shots() as f64;
        acc.into_iter().map(|a| a as f64 / shots).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation() {
        assert_eq!(SampleSet::new(2, vec![], 0.0, "x"), Err(Error::EmptySamples));
        assert_eq!(SampleSet::new(2, vec![1, 0], 0.0, "x"), Err(Error::NotASpin(0)));
        assert!(SampleSet::new(2, vec![1, -1, 1], 0.0, "x").is_err());
        let s = SampleSet::new(2, vec![1, -1, 1, 1], 0.5, "x").unwrap();
        assert_eq!(s.shots(), 2);
        assert_eq!(s.shot(1), [1, 1]);
        assert_eq!(s.site_means(), [1.0, 0.0]);
    }
}
