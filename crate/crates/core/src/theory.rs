//! Closed-form domain-wall and droplet energetics.
//!
//! A single wall on an odd antiferromagnetic ring is labelled by its bond
//! `j` and sign `w = ±1`. The transverse field hops it one bond while
//! flipping its sign, and the longitudinal field splits the signs, giving a
//! two-band tight-binding chain diagonal in Bloch momentum `k = 2 pi m / n`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Parameters of the one-wall effective model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallModel {
    pub n: usize,
    pub coupling: f64,
    pub field: f64,
    pub gamma: f64,
}

impl WallModel {
    pub fn new(n: usize, coupling: f64, field: f64, gamma: f64) -> Result<Self> {
        if n % 2 == 0 || n < 3 {
            return Err(Error::EvenRing(n));
        }
        if coupling <= 0.0 {
            return Err(Error::ZeroCoupling);
        }
        Ok(WallModel {
            n,
            coupling,
            field,
            gamma,
        })
    }

    pub fn exchange_energy(&self) -> f64 {
        -self.coupling * (self.n as f64 - 2.0)
    }

    fn half_gap(&self, k: f64) -> f64 {
        let c = libm::cos(k);
        libm::sqrt(self.field * self.field + 4.0 * self.gamma * self.gamma * c * c)
    }

    /// `E_J ± sqrt(h^2 + 4 Gamma^2 cos^2 k)` at an arbitrary momentum.
    pub fn bands_at(&self, k: f64) -> (f64, f64) {
        let e = self.exchange_energy();
        let d = self.half_gap(k);
        (e + d, e - d)
    }

    /// All `2n` one-wall energies on the Bloch momenta, sorted ascending.
    pub fn band_energies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n)
            .flat_map(|m| {
                let (p, q) = self.bands_at(momentum(self.n, m));
                [p, q]
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Bloch momentum `2 pi m / n`.
pub fn momentum(n: usize, m: usize) -> f64 {
    2.0 * PI * m as f64 / n as f64
}

/// One-wall exchange energy `-J (n - 2)`: one frustrated bond, `n - 1`
/// satisfied ones.
pub fn exchange_energy(n: usize, coupling: f64) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::EvenRing(n));
    }
    Ok(-coupling * (n as f64 - 2.0))
}

/// `(E_+, E_-)` at mode `m` of a finite ring.
pub fn bands(model: &WallModel, m: usize) -> Result<(f64, f64)> {
    if m >= model.n {
        return Err(Error::ModeIndex { m, n: model.n });
    }
    Ok(model.bands_at(momentum(model.n, m)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupVelocity {
    Finite { plus: f64, minus: f64 },
    /// Zero field at `cos k = 0`: the two bands touch in a cusp and the
    /// velocity is undefined.
    Degenerate,
}

/// `dE_±/dk = ∓ 2 Gamma^2 sin 2k / sqrt(h^2 + 4 Gamma^2 cos^2 k)`.
pub fn group_velocity(model: &WallModel, k: f64) -> GroupVelocity {
    let d = model.half_gap(k);
    if d <= 1e-12 * (model.field.abs() + model.gamma.abs()) {
        if model.gamma == 0.0 {
            return GroupVelocity::Finite { plus: 0.0, minus: 0.0 };
        }
        return GroupVelocity::Degenerate;
    }
    let g2 = model.gamma * model.gamma;
    let v = -2.0 * g2 * libm::sin(2.0 * k) / d;
    GroupVelocity::Finite { plus: v, minus: -v }
}

/// Cost of flipping one spin inside a Néel region at zero transverse
/// field: two new walls (`4J`) against a Zeeman change of `2 h delta_m`.
pub fn pair_creation_energy(coupling: f64, field: f64, delta_m: i8) -> f64 {
    4.0 * coupling - 2.0 * field * f64::from(delta_m)
}

/// Inputs of the spherical-droplet nucleation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropletParams {
    pub coordination: f64,
    pub coupling: f64,
    pub field: f64,
    pub m0: f64,
    /// Geometric prefactor in `lambda = prefactor * c * J`.
    pub lambda_prefactor: f64,
}

impl DropletParams {
    pub fn new(coordination: f64, coupling: f64, field: f64, m0: f64) -> Result<Self> {
        if coordination < 3.0 {
            return Err(Error::InvalidParameter("coordination must be at least 3".into()));
        }
        if !(m0 > 0.0 && m0 <= 1.0) {
            return Err(Error::InvalidParameter("m0 must lie in (0, 1]".into()));
        }
        Ok(DropletParams {
            coordination,
            coupling,
            field,
            m0,
            lambda_prefactor: 1.0,
        })
    }

    /// Surface tension `lambda`.
    pub fn surface_tension(&self) -> f64 {
        self.lambda_prefactor * self.coordination * self.coupling
    }

    fn drive(&self) -> f64 {
        self.field.abs() * self.m0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropletEnergy {
    pub surface: f64,
    pub field: f64,
    pub total: f64,
}

/// Surface cost `4 pi lambda R^2` and Zeeman gain `-(4/3) pi R^3 (2|h| m0)`.
pub fn droplet(params: &DropletParams, radius: f64) -> DropletEnergy {
    let surface = 4.0 * PI * params.surface_tension() * radius * radius;
    let field = -(4.0 / 3.0) * PI * radius * radius * radius * 2.0 * params.drive();
    DropletEnergy {
        surface,
        field,
        total: surface + field,
    }
}

/// `dE_total / dR`.
pub fn droplet_slope(params: &DropletParams, radius: f64) -> f64 {
    8.0 * PI * params.surface_tension() * radius - 8.0 * PI * params.drive() * radius * radius
}

/// Critical radius `lambda / (|h| m0)` and barrier `E_total(R_c)
/// = (4 pi / 3) lambda^3 / (h m0)^2`.
pub fn critical_droplet(params: &DropletParams) -> Result<(f64, f64)> {
    let drive = params.drive();
    if drive == 0.0 {
        return Err(Error::ZeroField);
    }
    let lambda = params.surface_tension();
    let r_c = lambda / drive;
    let e_c = (4.0 * PI / 3.0) * lambda * lambda * lambda / (drive * drive);
    Ok((r_c, e_c))
}
