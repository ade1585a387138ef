//! Exact diagonalization oracle for small transverse-field Ising systems.
//!
//! The Hamiltonian is `sum_ij J_ij Z_i Z_j - h sum_i h_i Z_i - Gamma sum_i X_i`
//! in the computational basis, where bit `i` of a basis index is `0` for
//! `Z_i = +1` and `1` for `Z_i = -1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::SpinLattice;
use crate::rng;
use crate::sample::SampleSet;

/// Largest system the oracle accepts.
pub const MAX_SITES: usize = 20;
/// Largest system diagonalized densely; larger ones use Lanczos.
pub const DENSE_MAX_SITES: usize = 10;
/// Gibbs weight allowed outside the Lanczos-resolved states.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;
const MAX_LANCZOS_STATES: usize = 256;
const DEGENERACY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Beta(f64),
    /// Zero temperature: equal mixture over the (possibly degenerate)
    /// ground space.
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfimSpec {
    pub lattice: SpinLattice,
    pub gamma: f64,
    /// Multiplies the per-site lattice fields.
    pub field: f64,
    pub temperature: Temperature,
}

impl TfimSpec {
    pub fn new(lattice: SpinLattice, gamma: f64, field: f64, temperature: Temperature) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be non-negative")));
        }
        if let Temperature::Beta(b) = temperature {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("beta = {b} must be positive")));
            }
        }
        if lattice.n_sites() > MAX_SITES {
            return Err(Error::SizeCap {
                n_sites: lattice.n_sites(),
                cap: MAX_SITES,
            });
        }
        Ok(TfimSpec {
            lattice,
            gamma,
            field,
            temperature,
        })
    }
}

#[inline]
fn spin_of(index: usize, site: usize) -> i8 {
    if index >> site & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Decode a basis index into spins.
pub fn basis_spins(index: usize, n_sites: usize) -> Vec<i8> {
    (0..n_sites).map(|i| spin_of(index, i)).collect()
}

/// Sparse TFIM operator: explicit diagonal plus `-Gamma` on every
/// single-bit-flip pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TfimHamiltonian {
    n_sites: usize,
    diagonal: Vec<f64>,
    gamma: f64,
}

impl TfimHamiltonian {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diagonal[row]
        } else if (row ^ col).count_ones() == 1 {
            -self.gamma
        } else {
            0.0
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (idx, out) in y.iter_mut().enumerate() {
            let mut acc = self.diagonal[idx] * x[idx];
            if self.gamma != 0.0 {
                let mut off = 0.0;
                for i in 0..self.n_sites {
                    off += x[idx ^ (1 << i)];
                }
                acc -= self.gamma * off;
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diagonal));
        if self.gamma != 0.0 {
            for idx in 0..d {
                for i in 0..self.n_sites {
                    m[(idx, idx ^ (1 << i))] = -self.gamma;
                }
            }
        }
        m
    }
}

pub fn build_hamiltonian(spec: &TfimSpec) -> Result<TfimHamiltonian> {
    let n = spec.lattice.n_sites();
    if n > MAX_SITES {
        return Err(Error::SizeCap {
            n_sites: n,
            cap: MAX_SITES,
        });
    }
    let mut spins = vec![0i8; n];
    let diagonal = (0..1usize << n)
        .map(|idx| {
            for (i, s) in spins.iter_mut().enumerate() {
                *s = spin_of(idx, i);
            }
            spec.lattice.classical_energy(&spins, spec.field)
        })
        .collect();
    Ok(TfimHamiltonian {
        n_sites: n,
        diagonal,
        gamma: spec.gamma,
    })
}

/// Low-lying eigenpairs, ascending; `vectors[k]` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full spectrum of a dense symmetric matrix, ascending.
pub fn dense_eigen(m: DMatrix<f64>) -> Spectrum {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Spectrum {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect(),
    }
}

/// All eigenvalues of the full Hamiltonian, ascending (dense, small sizes).
pub fn full_spectrum(h: &TfimHamiltonian) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(h.to_dense()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = libm::sqrt(dot(v, v));
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
}

/// Lowest eigenpair of `h` restricted to the complement of `deflate`,
/// by restarted Lanczos with full reorthogonalization.
fn lanczos_lowest(h: &TfimHamiltonian, deflate: &[Vec<f64>], start_key: u64) -> Result<(f64, Vec<f64>)> {
    const KRYLOV: usize = 80;
    const RESTARTS: usize = 100;
    let dim = h.dim();
    let scale = h.diagonal.iter().fold(0.0f64, |m, d| m.max(d.abs())) + h.n_sites as f64 * h.gamma;
    let tol = 1e-10 * scale.max(1.0);

    let mut rng = rng::stream(0x5EED, rng::domain::SHOT, start_key, 0);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    for _ in 0..RESTARTS {
        project_out(&mut start, deflate);
        if normalize(&mut start) == 0.0 {
            return Err(Error::NotConverged("start vector vanished".into()));
        }
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut w = vec![0.0; dim];
        let steps = KRYLOV.min(dim - deflate.len());
        for j in 0..steps {
            h.apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            project_out(&mut w, deflate);
            project_out(&mut w, &basis);
            let b = normalize(&mut w);
            if j + 1 == steps || b < 1e-12 * scale.max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.clone());
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            t[(k, k)] = alpha[k];
            if k + 1 < m {
                t[(k, k + 1)] = beta[k];
                t[(k + 1, k)] = beta[k];
            }
        }
        let ritz = dense_eigen(t);
        let y = &ritz.vectors[0];
        let mut x = vec![0.0; dim];
        for (k, b) in basis.iter().enumerate() {
            axpy(y[k], b, &mut x);
        }
        project_out(&mut x, deflate);
        normalize(&mut x);
        h.apply(&x, &mut w);
        let theta = dot(&w, &x);
        axpy(-theta, &x, &mut w);
        project_out(&mut w, deflate);
        let residual = libm::sqrt(dot(&w, &w));
        if residual < tol {
            return Ok((theta, x));
        }
        start = x;
    }
    Err(Error::NotConverged(format!(
        "Lanczos residual above {tol:e} after {RESTARTS} restarts"
    )))
}

/// Eigenpairs needed to represent the z-basis distribution at this
/// temperature.
pub fn low_lying(h: &TfimHamiltonian, temperature: Temperature) -> Result<Spectrum> {
    if h.n_sites <= DENSE_MAX_SITES {
        return Ok(dense_eigen(h.to_dense()));
    }
    let dim = h.dim();
    let mut spectrum = Spectrum {
        values: Vec::new(),
        vectors: Vec::new(),
    };
    loop {
        if spectrum.values.len() >= MAX_LANCZOS_STATES.min(dim) {
            if spectrum.values.len() == dim {
                return Ok(spectrum);
            }
            return Err(Error::NotConverged(format!(
                "more than {MAX_LANCZOS_STATES} states carry Gibbs weight"
            )));
        }
        let (value, vector) = lanczos_lowest(h, &spectrum.vectors, spectrum.values.len() as u64)?;
        let e0 = spectrum.values.first().copied().unwrap_or(value);
        let done = match temperature {
            Temperature::Ground => value - e0 > DEGENERACY_TOLERANCE * e0.abs().max(1.0),
            Temperature::Beta(beta) => {
                let z: f64 = spectrum.values.iter().map(|e| libm::exp(-beta * (e - e0))).sum();
                let rest = (dim - spectrum.values.len()) as f64 * libm::exp(-beta * (value - e0));
                !spectrum.values.is_empty() && rest / z < TRUNCATION_TOLERANCE
            }
        };
        if done {
            return Ok(spectrum);
        }
        spectrum.values.push(value);
        spectrum.vectors.push(vector);
    }
}

fn state_weights(values: &[f64], temperature: Temperature) -> Vec<f64> {
    let e0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = match temperature {
        Temperature::Ground => values
            .iter()
            .map(|e| {
                if e - e0 <= DEGENERACY_TOLERANCE * e0.abs().max(1.0) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
        Temperature::Beta(beta) => values.iter().map(|e| libm::exp(-beta * (e - e0))).collect(),
    };
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// Probability of every z-basis configuration, indexed like the basis.
pub fn z_probabilities(spec: &TfimSpec) -> Result<Vec<f64>> {
    let h = build_hamiltonian(spec)?;
    if h.gamma == 0.0 {
        // already diagonal: basis states are eigenstates
        return Ok(state_weights(&h.diagonal, spec.temperature));
    }
    let spectrum = low_lying(&h, spec.temperature)?;
    let weights = state_weights(&spectrum.values, spec.temperature);
    let mut p = vec![0.0; h.dim()];
    for (w, v) in weights.iter().zip(&spectrum.vectors) {
        if *w == 0.0 {
            continue;
        }
        for (pi, a) in p.iter_mut().zip(v) {
            *pi += w * a * a;
        }
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

/// `shots` independent z-basis configurations; shot `k` draws from its own
/// stream keyed by `(seed, k)`.
pub fn sample_z(spec: &TfimSpec, shots: usize, seed: u64) -> Result<SampleSet> {
    let p = z_probabilities(spec)?;
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for x in &p {
        acc += x;
        cdf.push(acc);
    }
    let n = spec.lattice.n_sites();
    let mut spins = Vec::with_capacity(shots * n);
    for k in 0..shots {
        let u: f64 = rng::stream(seed, rng::domain::SHOT, k as u64, 0).random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(p.len() - 1);
        spins.extend((0..n).map(|i| spin_of(idx, i)));
    }
    SampleSet::new(n, spins, spec.field, "exact")
}

/// Dense `2n x 2n` one-wall Hamiltonian in the `|j, w>` basis
/// (index `2j` for `w = +1`, `2j + 1` for `w = -1`).
pub fn single_wall_hamiltonian(n: usize, coupling: f64, field: f64, gamma: f64) -> Result<DMatrix<f64>> {
    if n % 2 == 0 || n < 3 {
        return Err(Error::EvenRing(n));
    }
    let e_j = -coupling * (n as f64 - 2.0);
    let index = |j: usize, w: i8| 2 * j + usize::from(w < 0);
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for w in [1i8, -1] {
            let from = index(j, w);
            m[(from, from)] = e_j - field * f64::from(w);
            for to_bond in [(j + 1) % n, (j + n - 1) % n] {
                m[(index(to_bond, -w), from)] = -gamma;
            }
        }
    }
    Ok(m)
}

/// Sorted eigenvalues of [`single_wall_hamiltonian`].
pub fn single_wall_spectrum(n: usize, coupling: f64, field: f64, gamma: f64) -> Result<Vec<f64>> {
    let m = single_wall_hamiltonian(n, coupling, field, gamma)?;
    Ok(dense_eigen(m).values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_odd_ring, make_ring, ring_wall_count, Edge};

    fn pair(coupling: f64) -> SpinLattice {
        SpinLattice::new(2, vec![Edge::new(0, 1, coupling)], vec![1.0; 2]).unwrap()
    }

    #[test]
    fn single_spin_zeeman() {
        let l = SpinLattice::new(1, vec![], vec![1.0]).unwrap();
        let h = build_hamiltonian(&TfimSpec::new(l, 0.0, 1.0, Temperature::Ground).unwrap()).unwrap();
        assert_eq!(h.diagonal(), [-1.0, 1.0]);
        assert_eq!(h.to_dense(), DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn two_spin_levels() {
        let h = build_hamiltonian(&TfimSpec::new(pair(1.0), 0.0, 0.0, Temperature::Ground).unwrap()).unwrap();
        assert_eq!(full_spectrum(&h), [-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn hermitian_and_matvec_consistent() {
        let l = make_odd_ring(5, 1.0).unwrap();
        let h = build_hamiltonian(&TfimSpec::new(l, 0.3, 0.2, Temperature::Ground).unwrap()).unwrap();
        let d = h.to_dense();
        assert_eq!(d, d.transpose());
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 32];
        h.apply(&x, &mut y);
        let dy = &d * DVector::from_column_slice(&x);
        for (a, b) in y.iter().zip(dy.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(h.entry(0, 1), -0.3);
        assert_eq!(h.entry(0, 3), 0.0);
    }

    #[test]
    fn odd_ring_classical_ground_energy() {
        for n in (3..=15).step_by(2) {
            let l = make_odd_ring(n, 1.0).unwrap();
            let h = build_hamiltonian(&TfimSpec::new(l, 0.0, 0.0, Temperature::Ground).unwrap()).unwrap();
            let e0 = h.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(e0, -(n as f64 - 2.0));
        }
    }

    #[test]
    fn size_cap() {
        let l = make_odd_ring(21, 1.0).unwrap();
        assert!(matches!(
            TfimSpec::new(l, 0.0, 0.0, Temperature::Ground),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn classical_polarized_limit() {
        let l = make_odd_ring(5, 1.0).unwrap();
        let spec = TfimSpec::new(l, 0.0, 10.0, Temperature::Beta(5.0)).unwrap();
        let s = sample_z(&spec, 200, 1).unwrap();
        assert!(s.spins().iter().all(|&x| x == 1));
    }

    #[test]
    fn three_ring_degenerate_ground_space() {
        let l = make_odd_ring(3, 1.0).unwrap();
        let spec = TfimSpec::new(l, 0.0, 0.0, Temperature::Ground).unwrap();
        let p = z_probabilities(&spec).unwrap();
        // all states except the two polarized ones
        for (idx, &pi) in p.iter().enumerate() {
            let expect = if idx == 0 || idx == 7 { 0.0 } else { 1.0 / 6.0 };
            assert!((pi - expect).abs() < 1e-15);
        }
        let spec = TfimSpec::new(make_odd_ring(3, 1.0).unwrap(), 0.0, 0.0, Temperature::Beta(60.0)).unwrap();
        let q = z_probabilities(&spec).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let spec = TfimSpec::new(make_odd_ring(7, 1.0).unwrap(), 0.4, 0.1, Temperature::Beta(2.0)).unwrap();
        assert_eq!(sample_z(&spec, 50, 3).unwrap(), sample_z(&spec, 50, 3).unwrap());
        assert_ne!(sample_z(&spec, 50, 3).unwrap(), sample_z(&spec, 50, 4).unwrap());
    }

    #[test]
    fn samples_respect_parity() {
        for n in [5usize, 6, 7] {
            let spec = TfimSpec::new(make_ring(n, 1.0).unwrap(), 0.7, 0.3, Temperature::Beta(1.5)).unwrap();
            let s = sample_z(&spec, 300, 11).unwrap();
            for shot in s.iter() {
                assert_eq!(ring_wall_count(shot) % 2, n % 2);
            }
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let l = make_odd_ring(11, 1.0).unwrap();
        let spec = TfimSpec::new(l, 0.35, 0.2, Temperature::Ground).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let dense = full_spectrum(&h);
        let (e0, v) = lanczos_lowest(&h, &[], 0).unwrap();
        assert!((e0 - dense[0]).abs() < 1e-9);
        let (e1, _) = lanczos_lowest(&h, &[v], 1).unwrap();
        assert!((e1 - dense[1]).abs() < 1e-9);
    }

    #[test]
    fn lanczos_thermal_distribution_matches_dense() {
        let l = make_odd_ring(11, 1.0).unwrap();
        let spec = TfimSpec::new(l, 0.3, 0.4, Temperature::Beta(12.0)).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let lanczos = z_probabilities(&spec).unwrap();
        let dense = dense_eigen(h.to_dense());
        let w = state_weights(&dense.values, spec.temperature);
        let mut p = vec![0.0; h.dim()];
        for (wk, v) in w.iter().zip(&dense.vectors) {
            for (pi, a) in p.iter_mut().zip(v) {
                *pi += wk * a * a;
            }
        }
        let diff = p.iter().zip(&lanczos).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn single_wall_limits() {
        let flat = single_wall_spectrum(7, 1.0, 0.0, 0.0).unwrap();
        assert!(flat.iter().all(|&e| e == -5.0));
        let s = single_wall_spectrum(7, 1.0, 0.0, 0.1).unwrap();
        assert!(s[0] >= -5.0 - 0.2 - 1e-12 && s[13] <= -5.0 + 0.2 + 1e-12);
        assert!(single_wall_spectrum(6, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn single_wall_matches_bloch_bands() {
        let model = crate::theory::WallModel::new(5, 1.0, 0.3, 0.1).unwrap();
        let dense = single_wall_spectrum(5, 1.0, 0.3, 0.1).unwrap();
        for (a, b) in dense.iter().zip(model.band_energies()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
