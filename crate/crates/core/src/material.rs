//! Compressible Neo-Hooke energy of the fictively undamaged material and the
//! damage-scaled stress response `S = f S₀`.

use nalgebra::{Matrix3, Matrix6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which coefficient multiplies `ln J` in the volumetric part
/// `g(J) = λ/4 (J² - 1) - c ln J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyVariant {
    /// `c = λ/4 + μ`; leaves a residual reference stress `λ/4 I`.
    PaperLogCoefficient,
    /// `c = λ/2 + μ`; the reference configuration is stress free.
    #[default]
    StressFreeLogCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Young's modulus (MPa).
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Lamé constants (MPa), derived.
    pub lambda: f64,
    pub mu: f64,
    /// Dissipation threshold `r` (MPa).
    pub dissipation: f64,
    /// Nonlocal parameter `β` (N = MPa mm²).
    pub beta: f64,
    /// Damage value at which an element is eroded.
    pub critical_damage: f64,
    /// Diagonal stiffness of an eroded element (N/mm).
    pub critical_stiffness: f64,
    pub energy_variant: EnergyVariant,
}

impl MaterialParams {
    pub fn new(
        youngs_modulus: f64,
        poisson_ratio: f64,
        dissipation: f64,
        beta: f64,
        critical_damage: f64,
        critical_stiffness: f64,
        energy_variant: EnergyVariant,
    ) -> Result<Self> {
        let (lambda, mu) = lame_constants(youngs_modulus, poisson_ratio)?;
        if !(dissipation > 0.0 && dissipation.is_finite()) {
            return Err(Error::validation("r", format!("must be > 0, got {dissipation}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::validation("beta", format!("must be >= 0, got {beta}")));
        }
        if !(critical_damage > 0.0 && critical_damage < 1.0) {
            return Err(Error::validation(
                "D_crit",
                format!("must lie in (0, 1), got {critical_damage}"),
            ));
        }
        if !(critical_stiffness > 0.0 && critical_stiffness.is_finite()) {
            return Err(Error::validation(
                "s_crit",
                format!("must be > 0, got {critical_stiffness}"),
            ));
        }
        Ok(MaterialParams {
            youngs_modulus,
            poisson_ratio,
            lambda,
            mu,
            dissipation,
            beta,
            critical_damage,
            critical_stiffness,
            energy_variant,
        })
    }

    /// Plate-with-hole column of the benchmark parameter table.
    pub fn plate_with_hole(beta: f64) -> Self {
        Self::new(500.0, 0.3, 5.0, beta, 0.95, 1e-8, EnergyVariant::default())
            .expect("valid table parameters")
    }

    /// U-shape column of the benchmark parameter table.
    pub fn u_shape() -> Self {
        Self::new(1000.0, 0.3, 0.5, 100.0, 0.995, 1e-8, EnergyVariant::default())
            .expect("valid table parameters")
    }

    /// Lower bound of the damage function, `1 - D_crit`.
    pub fn min_damage_function(&self) -> f64 {
        1.0 - self.critical_damage
    }

    fn log_coefficient(&self) -> f64 {
        match self.energy_variant {
            EnergyVariant::PaperLogCoefficient => self.lambda / 4.0 + self.mu,
            EnergyVariant::StressFreeLogCoefficient => self.lambda / 2.0 + self.mu,
        }
    }

    /// `λ/2 + μ - c`, the stress left at `C = I`.
    fn reference_stress(&self) -> f64 {
        match self.energy_variant {
            EnergyVariant::PaperLogCoefficient => self.lambda / 4.0,
            EnergyVariant::StressFreeLogCoefficient => 0.0,
        }
    }
}

pub fn lame_constants(youngs_modulus: f64, poisson_ratio: f64) -> Result<(f64, f64)> {
    if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
        return Err(Error::validation("E", format!("must be > 0, got {youngs_modulus}")));
    }
    if poisson_ratio >= 0.5 {
        return Err(Error::Material(format!(
            "Poisson ratio {poisson_ratio} >= 0.5 is incompressible"
        )));
    }
    if !(poisson_ratio >= 0.0) {
        return Err(Error::validation("nu", format!("must be >= 0, got {poisson_ratio}")));
    }
    let (e, nu) = (youngs_modulus, poisson_ratio);
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    Ok((lambda, mu))
}

/// Kinematic quantities at one material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationMeasures {
    pub f: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub i1: f64,
    pub j: f64,
}

impl DeformationMeasures {
    pub fn from_deformation_gradient(f: Matrix3<f64>) -> Self {
        let c = f.transpose() * f;
        DeformationMeasures {
            f,
            c,
            i1: c.trace(),
            j: f.determinant(),
        }
    }

    /// Measures from `C` alone, with `F` taken as the right stretch `U = √C`.
    pub fn from_right_cauchy_green(c: Matrix3<f64>) -> Self {
        let det = c.determinant();
        let eig = nalgebra::SymmetricEigen::new((c + c.transpose()) * 0.5);
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let u = eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose();
        DeformationMeasures {
            f: u,
            c,
            i1: c.trace(),
            j: if det > 0.0 { det.sqrt() } else { -1.0 },
        }
    }

    fn check(&self) -> Result<()> {
        if self.j > 0.0 && self.j.is_finite() {
            Ok(())
        } else {
            Err(Error::InvertedElement {
                element: None,
                det_f: self.j,
                step: None,
            })
        }
    }

    fn c_inverse(&self) -> Result<Matrix3<f64>> {
        let inv = self.c.try_inverse().ok_or(Error::InvertedElement {
            element: None,
            det_f: self.j,
            step: None,
        })?;
        Ok((inv + inv.transpose()) * 0.5)
    }
}

/// Neo-Hooke energy `Ψ₀ = μ/2 (I₁ - 3) + λ/4 (J² - 1) - c ln J` (MPa).
pub fn psi0(m: &DeformationMeasures, params: &MaterialParams) -> Result<f64> {
    m.check()?;
    let MaterialParams { lambda, mu, .. } = *params;
    Ok(0.5 * mu * (m.i1 - 3.0) + 0.25 * lambda * (m.j * m.j - 1.0)
        - params.log_coefficient() * m.j.ln())
}

fn pk2_undamaged(m: &DeformationMeasures, params: &MaterialParams) -> Result<Matrix3<f64>> {
    m.check()?;
    let c_inv = m.c_inverse()?;
    let MaterialParams { lambda, mu, .. } = *params;
    // S₀ = μ I + (λ/2 J² - c) C⁻¹, regrouped so that C = I is exact.
    let vol = 0.5 * lambda * (m.j * m.j - 1.0) + params.reference_stress();
    Ok((Matrix3::identity() - c_inv) * mu + c_inv * vol)
}

/// Damaged second Piola-Kirchhoff stress `S = f · 2 ∂Ψ₀/∂C` (MPa).
pub fn pk2_stress(m: &DeformationMeasures, f: f64, params: &MaterialParams) -> Result<Matrix3<f64>> {
    check_damage(f)?;
    Ok(pk2_undamaged(m, params)? * f)
}

fn check_damage(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation("f", format!("damage function must lie in (0, 1], got {f}")))
    }
}

/// Voigt index pairs, order 11, 22, 33, 12, 23, 13.
pub const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

/// Fourth-order material tangent `ℂ = 2 ∂S/∂C` with minor and major symmetry,
/// stored in Voigt form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialTangent(pub Matrix6<f64>);

impl MaterialTangent {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[(voigt_index(i, j), voigt_index(k, l))]
    }

    /// `ℂ : A` for a symmetric second-order tensor `A`.
    pub fn contract(&self, a: &Matrix3<f64>) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.get(i, j, k, l) * a[(k, l)];
                    }
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}

pub fn voigt_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (1, 2) => 4,
        (0, 2) => 5,
        _ => unreachable!("index out of range"),
    }
}

/// Consistent tangent at frozen damage, `f ℂ₀` with
/// `ℂ₀ = λJ² C⁻¹⊗C⁻¹ + (c - λJ²/2)(C⁻¹_ik C⁻¹_jl + C⁻¹_il C⁻¹_jk)`.
pub fn material_tangent(m: &DeformationMeasures, f: f64, params: &MaterialParams) -> Result<MaterialTangent> {
    check_damage(f)?;
    m.check()?;
    let ci = m.c_inverse()?;
    let lambda = params.lambda;
    let j2 = m.j * m.j;
    let a = lambda * j2;
    let b = params.log_coefficient() - 0.5 * lambda * j2;
    let mut out = Matrix6::zeros();
    for (p, &(i, j)) in VOIGT.iter().enumerate() {
        for (q, &(k, l)) in VOIGT.iter().enumerate() {
            out[(p, q)] = f
                * (a * ci[(i, j)] * ci[(k, l)]
                    + b * (ci[(i, k)] * ci[(j, l)] + ci[(i, l)] * ci[(j, k)]));
        }
    }
    Ok(MaterialTangent(out))
}
