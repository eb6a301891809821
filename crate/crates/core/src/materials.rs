//! Pointwise densities: elastic and coupling energies, internal energy, heat
//! capacity, both discrete dissipations and heat sources, and the pulled-back
//! conductivity. All derivatives are analytic.
//!
//! Arguments are 3×3 deformation gradients (plane-strain lifts in practice).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ddot, sym, visc_apply, Mat3};

/// θ-derivatives are refused below this temperature.
pub const THETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaterialKind {
    SimpleNeoHookean,
    #[serde(rename = "SMA")]
    Sma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DissipationVariant {
    /// `V[C₂ - C₁, C₂ - C₁]`, separately frame indifferent.
    V1,
    /// `2R(F₁, F₂ - F₁)`, the legacy linearized rate.
    V2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatSourceVariant {
    Vh1,
    Vh2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    pub kind: MaterialKind,
    /// Shear modulus.
    pub mu: f64,
    /// Bulk-type modulus.
    pub lambda: f64,
    /// Thermal coupling constant `C₁`.
    pub c1: f64,
    /// Martensite shear; ignored by the neo-Hookean model.
    #[serde(default)]
    pub eps: f64,
    pub nu_visc: f64,
    pub k_cond: f64,
    #[serde(default)]
    pub kappa: f64,
    pub dissipation_variant: DissipationVariant,
    pub heat_source_variant: HeatSourceVariant,
}

impl MaterialModel {
    pub fn neo_hookean(mu: f64, lambda: f64, c1: f64, nu_visc: f64, k_cond: f64) -> Self {
        MaterialModel {
            kind: MaterialKind::SimpleNeoHookean,
            mu,
            lambda,
            c1,
            eps: 0.0,
            nu_visc,
            k_cond,
            kappa: 0.0,
            dissipation_variant: DissipationVariant::V1,
            heat_source_variant: HeatSourceVariant::Vh1,
        }
    }

    pub fn sma(mu: f64, lambda: f64, c1: f64, eps: f64, nu_visc: f64, k_cond: f64) -> Self {
        MaterialModel { kind: MaterialKind::Sma, eps, ..Self::neo_hookean(mu, lambda, c1, nu_visc, k_cond) }
    }

    pub fn with_variants(mut self, d: DissipationVariant, h: HeatSourceVariant) -> Self {
        self.dissipation_variant = d;
        self.heat_source_variant = h;
        self
    }

    /// Every violated parameter constraint, by field name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("material.mu", self.mu),
            ("material.lambda", self.lambda),
            ("material.c1", self.c1),
            ("material.nu_visc", self.nu_visc),
            ("material.k_cond", self.k_cond),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive and finite (got {v})"));
            }
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            out.push(format!("material.kappa must be non-negative (got {})", self.kappa));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            out.push(format!("material.eps must be non-negative (got {})", self.eps));
        }
        out
    }

    // ---- elastic part -------------------------------------------------

    pub fn elastic_energy(&self, f: &Mat3) -> Result<f64> {
        match self.kind {
            MaterialKind::SimpleNeoHookean => neo_hookean_energy(f, self.mu, self.lambda),
            MaterialKind::Sma => martensite_energy(f, self.eps, self.mu, self.lambda),
        }
    }

    pub fn elastic_stress(&self, f: &Mat3) -> Result<Mat3> {
        z_eps_stress(f, self.elastic_shear(f)?, self.mu, self.lambda)
    }

    /// Directional derivative of [`Self::elastic_stress`] along `h`.
    pub fn elastic_hessian_apply(&self, f: &Mat3, h: &Mat3) -> Result<Mat3> {
        z_eps_hessian_apply(f, self.elastic_shear(f)?, self.mu, self.lambda, h)
    }

    /// Shear parameter of the active elastic branch.
    fn elastic_shear(&self, f: &Mat3) -> Result<f64> {
        match self.kind {
            MaterialKind::SimpleNeoHookean => Ok(0.0),
            MaterialKind::Sma => martensite_branch(f, self.eps, self.mu, self.lambda),
        }
    }

    // ---- coupling part ------------------------------------------------

    /// `W_A - W_M` for the SMA model, zero otherwise.
    fn phase_gap(&self, f: &Mat3) -> Result<f64> {
        match self.kind {
            MaterialKind::SimpleNeoHookean => {
                check_det(f)?;
                Ok(0.0)
            }
            MaterialKind::Sma => Ok(austenite_energy(f, self.mu, self.lambda)?
                - martensite_energy(f, self.eps, self.mu, self.lambda)?),
        }
    }

    fn phase_gap_stress(&self, f: &Mat3) -> Result<Mat3> {
        match self.kind {
            MaterialKind::SimpleNeoHookean => {
                check_det(f)?;
                Ok(Mat3::zeros())
            }
            MaterialKind::Sma => {
                let branch = martensite_branch(f, self.eps, self.mu, self.lambda)?;
                Ok(z_eps_stress(f, 0.0, self.mu, self.lambda)? - z_eps_stress(f, branch, self.mu, self.lambda)?)
            }
        }
    }

    pub fn coupling_energy(&self, f: &Mat3, theta: f64) -> Result<f64> {
        let gap = self.phase_gap(f)?;
        if theta <= 0.0 {
            return Ok(0.0);
        }
        Ok(phase_fraction(theta) * gap + self.c1 * theta * (1.0 - theta.ln()))
    }

    /// Strain-dependent part `a(θ)(W_A - W_M)` of the coupling energy.
    pub fn coupling_strain_energy(&self, f: &Mat3, theta: f64) -> Result<f64> {
        Ok(phase_fraction(theta.max(0.0)) * self.phase_gap(f)?)
    }

    /// Strain-independent part `C₁θ(1 - log θ)`, zero at `θ = 0`.
    pub fn coupling_thermal_energy(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            0.0
        } else {
            self.c1 * theta * (1.0 - theta.ln())
        }
    }

    /// `∂_F W^cpl`.
    pub fn coupling_stress(&self, f: &Mat3, theta: f64) -> Result<Mat3> {
        let gap = self.phase_gap_stress(f)?;
        Ok(gap * phase_fraction(theta.max(0.0)))
    }

    pub fn coupling_hessian_apply(&self, f: &Mat3, theta: f64, h: &Mat3) -> Result<Mat3> {
        match self.kind {
            MaterialKind::SimpleNeoHookean => {
                check_det(f)?;
                Ok(Mat3::zeros())
            }
            MaterialKind::Sma => {
                let branch = martensite_branch(f, self.eps, self.mu, self.lambda)?;
                let a = phase_fraction(theta.max(0.0));
                Ok((z_eps_hessian_apply(f, 0.0, self.mu, self.lambda, h)?
                    - z_eps_hessian_apply(f, branch, self.mu, self.lambda, h)?)
                    * a)
            }
        }
    }

    /// `∂_θ W^cpl`.
    pub fn coupling_dtheta(&self, f: &Mat3, theta: f64) -> Result<f64> {
        let gap = self.phase_gap(f)?;
        check_theta(theta)?;
        Ok(phase_fraction_d1(theta) * gap - self.c1 * theta.ln())
    }

    /// `∂_{Fθ} W^cpl`.
    pub fn coupling_df_dtheta(&self, f: &Mat3, theta: f64) -> Result<Mat3> {
        let gap = self.phase_gap_stress(f)?;
        check_theta(theta)?;
        Ok(gap * phase_fraction_d1(theta))
    }

    /// `∂_C Ŵ^cpl(C, θ)` computed directly in terms of `C = FᵀF`.
    pub fn coupling_stress_c(&self, c: &Mat3, theta: f64) -> Result<Mat3> {
        let det_c = c.determinant();
        if !(det_c > 0.0) {
            return Err(Error::NonPositiveDeterminant { det: det_c.signum() * det_c.abs().sqrt(), element: None });
        }
        match self.kind {
            MaterialKind::SimpleNeoHookean => Ok(Mat3::zeros()),
            MaterialKind::Sma => {
                let plus = z_eps_energy_c(c, self.eps, self.mu, self.lambda);
                let minus = z_eps_energy_c(c, -self.eps, self.mu, self.lambda);
                let branch = if plus <= minus { self.eps } else { -self.eps };
                let gap = z_eps_stress_c(c, 0.0, self.mu, self.lambda) - z_eps_stress_c(c, branch, self.mu, self.lambda);
                Ok(gap * phase_fraction(theta.max(0.0)))
            }
        }
    }

    // ---- thermal quantities -------------------------------------------

    /// `W^in = W^cpl - θ ∂_θ W^cpl`, extended by zero at `θ = 0`.
    pub fn internal_energy(&self, f: &Mat3, theta: f64) -> Result<f64> {
        let gap = self.phase_gap(f)?;
        if theta == 0.0 {
            return Ok(0.0);
        }
        let r = theta / (1.0 + theta);
        Ok(r * r * gap + self.c1 * theta)
    }

    /// `∫₀^θ W^in(F, s) ds` in closed form.
    pub fn internal_energy_primitive(&self, f: &Mat3, theta: f64) -> Result<f64> {
        let gap = self.phase_gap(f)?;
        Ok(gap * sq_fraction_primitive(theta) + 0.5 * self.c1 * theta * theta)
    }

    /// `-θ ∂²_θ W^cpl = ∂_θ W^in`.
    pub fn heat_capacity(&self, f: &Mat3, theta: f64) -> Result<f64> {
        let gap = self.phase_gap(f)?;
        let cap = self.c1 + 2.0 * theta * gap / (1.0 + theta).powi(3);
        if !(cap > 0.0) {
            return Err(Error::NonPositiveCapacity { capacity: cap });
        }
        Ok(cap)
    }

    /// Pulled-back conductivity `det(F) F⁻¹ (k Id) F⁻ᵀ`.
    pub fn conductivity_pullback(&self, f: &Mat3, _theta: f64) -> Result<Mat3> {
        let det = check_det(f)?;
        let finv = f.try_inverse().ok_or(Error::NonInvertible { det })?;
        Ok(sym(&(finv * finv.transpose())) * (det * self.k_cond))
    }

    // ---- dissipation --------------------------------------------------

    /// Discrete dissipation density `D²(F₁, F₂, θ)`.
    pub fn dissipation_density(&self, f1: &Mat3, f2: &Mat3, _theta: f64) -> Result<f64> {
        let delta = self.dissipation_strain(f1, f2)?;
        Ok(ddot(&visc_apply(self.nu_visc, &delta), &delta))
    }

    /// Symmetric strain increment measured by the selected dissipation.
    fn dissipation_strain(&self, f1: &Mat3, f2: &Mat3) -> Result<Mat3> {
        match self.dissipation_variant {
            DissipationVariant::V1 => {
                check_det(f1)?;
                check_det(f2)?;
                Ok(f2.transpose() * f2 - f1.transpose() * f1)
            }
            DissipationVariant::V2 => {
                let d = f2 - f1;
                Ok(d.transpose() * f1 + f1.transpose() * d)
            }
        }
    }

    /// `∂_{F₂} ½ D²(F₁, F₂)`.
    pub fn dissipation_stress(&self, f1: &Mat3, f2: &Mat3) -> Result<Mat3> {
        let delta = self.dissipation_strain(f1, f2)?;
        let base = match self.dissipation_variant {
            DissipationVariant::V1 => f2,
            DissipationVariant::V2 => f1,
        };
        Ok(base * visc_apply(self.nu_visc, &delta) * 2.0)
    }

    /// Directional derivative of [`Self::dissipation_stress`] in `F₂` along `h`.
    pub fn dissipation_hessian_apply(&self, f1: &Mat3, f2: &Mat3, h: &Mat3) -> Result<Mat3> {
        let nu = self.nu_visc;
        match self.dissipation_variant {
            DissipationVariant::V1 => {
                let delta = self.dissipation_strain(f1, f2)?;
                let d_delta = h.transpose() * f2 + f2.transpose() * h;
                Ok((h * visc_apply(nu, &delta) + f2 * visc_apply(nu, &d_delta)) * 2.0)
            }
            DissipationVariant::V2 => {
                let d_delta = h.transpose() * f1 + f1.transpose() * h;
                Ok(f1 * visc_apply(nu, &d_delta) * 2.0)
            }
        }
    }

    /// Viscous stress `∂_Ḟ R = 2F V Ċ`.
    pub fn viscous_stress(&self, f: &Mat3, fdot: &Mat3) -> Mat3 {
        let cdot = fdot.transpose() * f + f.transpose() * fdot;
        f * visc_apply(self.nu_visc, &cdot) * 2.0
    }

    /// Dissipation rate `ξ = V Ċ : Ċ`.
    pub fn xi_rate(&self, f: &Mat3, fdot: &Mat3, _theta: f64) -> Result<f64> {
        check_det(f)?;
        let cdot = fdot.transpose() * f + f.transpose() * fdot;
        Ok(ddot(&visc_apply(self.nu_visc, &cdot), &cdot))
    }

    /// Heat source `h_τ` of the thermal step at one material point.
    pub fn heat_source(&self, f_k: &Mat3, f_km1: &Mat3, theta_km1: f64, tau: f64) -> Result<f64> {
        check_det(f_k)?;
        check_det(f_km1)?;
        match self.heat_source_variant {
            HeatSourceVariant::Vh1 => {
                let c_km1 = f_km1.transpose() * f_km1;
                let dc = f_k.transpose() * f_k - c_km1;
                let diss = ddot(&visc_apply(self.nu_visc, &dc), &dc);
                let adiabatic = ddot(&self.coupling_stress_c(&c_km1, theta_km1)?, &dc);
                Ok(diss / (tau * tau) + adiabatic / tau)
            }
            HeatSourceVariant::Vh2 => {
                let df = f_k - f_km1;
                let diss = self.xi_rate(f_km1, &df, theta_km1)?;
                let adiabatic = ddot(&self.coupling_stress(f_km1, theta_km1)?, &df);
                Ok(diss / (tau * tau) + adiabatic / tau)
            }
        }
    }
}

fn check_det(f: &Mat3) -> Result<f64> {
    let det = f.determinant();
    if det > 0.0 {
        Ok(det)
    } else {
        Err(Error::NonPositiveDeterminant { det, element: None })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta < THETA_FLOOR {
        Err(Error::NonPositiveTemperature { theta })
    } else {
        Ok(())
    }
}

/// Austenite volume fraction `a(θ) = θ / (1 + θ)`.
pub fn phase_fraction(theta: f64) -> f64 {
    theta / (1.0 + theta)
}

pub fn phase_fraction_d1(theta: f64) -> f64 {
    1.0 / ((1.0 + theta) * (1.0 + theta))
}

pub fn phase_fraction_d2(theta: f64) -> f64 {
    -2.0 / (1.0 + theta).powi(3)
}

/// `∫₀^θ s²/(1+s)² ds = θ - 2 ln(1+θ) + θ/(1+θ)`.
fn sq_fraction_primitive(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        // series avoids cancellation: θ³/3 - θ⁴/2 + 3θ⁵/5 - 2θ⁶/3
        let t = theta;
        return t * t * t * (1.0 / 3.0 - t / 2.0 + 3.0 * t * t / 5.0 - 2.0 * t * t * t / 3.0);
    }
    theta - 2.0 * theta.ln_1p() + theta / (1.0 + theta)
}

/// Shear well `G_ε = Id + ε e₁⊗e₂`.
pub fn shear_well(eps: f64) -> Mat3 {
    let mut g = Mat3::identity();
    g[(0, 1)] = eps;
    g
}

fn well_metric(eps: f64) -> Mat3 {
    let g = shear_well(eps);
    g * g.transpose()
}

/// `Z_ε(F) = μ(det(F)^{-2/3}|F G_ε|² - 3)² + λ(det F + 1/det F - 2)²`.
pub fn z_eps_energy(f: &Mat3, eps: f64, mu: f64, lambda: f64) -> Result<f64> {
    let det = check_det(f)?;
    let a = well_metric(eps);
    let s = ddot(f, &(f * a));
    let iso = det.powf(-2.0 / 3.0) * s - 3.0;
    let vol = det + 1.0 / det - 2.0;
    Ok(mu * iso * iso + lambda * vol * vol)
}

/// `∂_F Z_ε`.
pub fn z_eps_stress(f: &Mat3, eps: f64, mu: f64, lambda: f64) -> Result<Mat3> {
    let det = check_det(f)?;
    let finv_t = f.try_inverse().ok_or(Error::NonInvertible { det })?.transpose();
    let a = well_metric(eps);
    let fa = f * a;
    let s = ddot(f, &fa);
    let jm = det.powf(-2.0 / 3.0);
    let iso = jm * s - 3.0;
    let d_iso = (fa * 2.0 - finv_t * (2.0 / 3.0 * s)) * jm;
    let vol = det + 1.0 / det - 2.0;
    let d_vol = finv_t * (det - 1.0 / det);
    Ok(d_iso * (2.0 * mu * iso) + d_vol * (2.0 * lambda * vol))
}

/// Second derivative of `Z_ε` applied to the direction `h`.
pub fn z_eps_hessian_apply(f: &Mat3, eps: f64, mu: f64, lambda: f64, h: &Mat3) -> Result<Mat3> {
    let det = check_det(f)?;
    let finv_t = f.try_inverse().ok_or(Error::NonInvertible { det })?.transpose();
    let a = well_metric(eps);
    let fa = f * a;
    let s = ddot(f, &fa);
    let jm = det.powf(-2.0 / 3.0);
    let tr_h = ddot(&finv_t, h);
    let dfinv_t = -(finv_t * h.transpose() * finv_t);

    let iso = jm * s - 3.0;
    let d_iso = (fa * 2.0 - finv_t * (2.0 / 3.0 * s)) * jm;
    let ds = 2.0 * ddot(&fa, h);
    let dd_iso = (fa * 2.0 - finv_t * (2.0 / 3.0 * s)) * (-2.0 / 3.0 * jm * tr_h)
        + (h * a * 2.0 - finv_t * (2.0 / 3.0 * ds) - dfinv_t * (2.0 / 3.0 * s)) * jm;

    let vol = det + 1.0 / det - 2.0;
    let d_vol = finv_t * (det - 1.0 / det);
    let dd_vol = finv_t * ((det + 1.0 / det) * tr_h) + dfinv_t * (det - 1.0 / det);

    Ok((d_iso * ddot(&d_iso, h) + dd_iso * iso) * (2.0 * mu)
        + (d_vol * ddot(&d_vol, h) + dd_vol * vol) * (2.0 * lambda))
}

/// `Z_ε` written as a function of `C = FᵀF`.
pub fn z_eps_energy_c(c: &Mat3, eps: f64, mu: f64, lambda: f64) -> f64 {
    let det_c = c.determinant();
    let j = det_c.sqrt();
    let iso = det_c.powf(-1.0 / 3.0) * ddot(c, &well_metric(eps)) - 3.0;
    let vol = j + 1.0 / j - 2.0;
    mu * iso * iso + lambda * vol * vol
}

/// `∂_C Ẑ_ε(C)`.
pub fn z_eps_stress_c(c: &Mat3, eps: f64, mu: f64, lambda: f64) -> Mat3 {
    let det_c = c.determinant();
    let j = det_c.sqrt();
    let a = well_metric(eps);
    let cinv = sym(&c.try_inverse().unwrap_or_else(Mat3::zeros));
    let jc = det_c.powf(-1.0 / 3.0);
    let ca = ddot(c, &a);
    let iso = jc * ca - 3.0;
    let d_iso = (a - cinv * (ca / 3.0)) * jc;
    let vol = j + 1.0 / j - 2.0;
    let d_vol = cinv * (0.5 * (j - 1.0 / j));
    d_iso * (2.0 * mu * iso) + d_vol * (2.0 * lambda * vol)
}

pub fn neo_hookean_energy(f: &Mat3, mu: f64, lambda: f64) -> Result<f64> {
    z_eps_energy(f, 0.0, mu, lambda)
}

pub fn austenite_energy(f: &Mat3, mu: f64, lambda: f64) -> Result<f64> {
    z_eps_energy(f, 0.0, mu, lambda)
}

/// `W_M = min(Z_ε, Z_{-ε})`.
pub fn martensite_energy(f: &Mat3, eps: f64, mu: f64, lambda: f64) -> Result<f64> {
    Ok(z_eps_energy(f, eps, mu, lambda)?.min(z_eps_energy(f, -eps, mu, lambda)?))
}

/// Signed shear of the active martensite well; ties go to `+ε`.
pub fn martensite_branch(f: &Mat3, eps: f64, mu: f64, lambda: f64) -> Result<f64> {
    let plus = z_eps_energy(f, eps, mu, lambda)?;
    let minus = z_eps_energy(f, -eps, mu, lambda)?;
    Ok(if plus <= minus { eps } else { -eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{lift_plane_strain, Mat2, Rotation};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nh() -> MaterialModel {
        MaterialModel::neo_hookean(1.3, 0.7, 2.0, 0.9, 0.4)
    }

    fn sma() -> MaterialModel {
        MaterialModel::sma(1.3, 1.3, 2.0, 0.05, 0.9, 0.4)
    }

    fn random_f(rng: &mut impl Rng) -> Mat3 {
        let q1 = *nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(nalgebra::Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
            rng.gen_range(-3.0..3.0),
        )
        .matrix();
        let q2 = *nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(nalgebra::Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
            rng.gen_range(-3.0..3.0),
        )
        .matrix();
        let s = nalgebra::Vector3::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        q1 * Mat3::from_diagonal(&s) * q2
    }

    fn fd_stress(energy: impl Fn(&Mat3) -> f64, f: &Mat3) -> Mat3 {
        let h = 1e-6 * f.norm();
        Mat3::from_fn(|i, j| {
            let mut p = *f;
            let mut m = *f;
            p[(i, j)] += h;
            m[(i, j)] -= h;
            (energy(&p) - energy(&m)) / (2.0 * h)
        })
    }

    #[test]
    fn z_eps_reference_values() {
        assert_eq!(z_eps_energy(&Mat3::identity(), 0.0, 1.0, 1.0).unwrap(), 0.0);
        let eps = 0.01;
        let z = z_eps_energy(&shear_well(-eps), eps, 1.0, 1.0).unwrap();
        assert!(z.abs() < 1e-28, "{z}");
        let z = z_eps_energy(&(Mat3::identity() * 2.0), 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(z, 2401.0 / 64.0, max_relative = 1e-14);
        assert!(matches!(
            z_eps_energy(&Mat3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -1.0)), 0.0, 1.0, 1.0),
            Err(Error::NonPositiveDeterminant { .. })
        ));
    }

    #[test]
    fn energies_vanish_on_wells() {
        let q = *Rotation::<3>::about_e3(0.7).matrix();
        assert!(neo_hookean_energy(&q, 1.0, 1.0).unwrap() < 1e-28);
        assert!(martensite_energy(&shear_well(0.01), 0.01, 1.0, 1.0).unwrap() < 1e-28);
        assert!(martensite_energy(&shear_well(-0.01), 0.01, 1.0, 1.0).unwrap() < 1e-28);
        assert!(austenite_energy(&shear_well(0.01), 1.0, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn elastic_stress_matches_differences() {
        assert_relative_eq!(nh().elastic_stress(&Mat3::identity()).unwrap(), Mat3::zeros(), epsilon = 1e-15);
        let f = Mat3::identity() * 2.0;
        let m = nh();
        let fd = fd_stress(|g| m.elastic_energy(g).unwrap(), &f);
        let an = m.elastic_stress(&f).unwrap();
        assert!((fd - an).norm() <= 1e-6 * an.norm());
    }

    #[test]
    fn stress_is_frame_indifferent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [nh(), sma()] {
            for _ in 0..50 {
                let f = random_f(&mut rng);
                let q = *Rotation::<3>::about_e3(rng.gen_range(-3.0..3.0)).matrix();
                let lhs = model.elastic_stress(&(q * f)).unwrap();
                let rhs = q * model.elastic_stress(&f).unwrap();
                assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
            }
        }
    }

    #[test]
    fn hessian_matches_stress_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let f = random_f(&mut rng);
            let h = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let step = 1e-6;
            for eps in [0.0, 0.05, -0.05] {
                let an = z_eps_hessian_apply(&f, eps, 1.3, 0.8, &h).unwrap();
                let fd = (z_eps_stress(&(f + h * step), eps, 1.3, 0.8).unwrap()
                    - z_eps_stress(&(f - h * step), eps, 1.3, 0.8).unwrap())
                    / (2.0 * step);
                assert!((an - fd).norm() <= 1e-6 * an.norm().max(1e-8), "{}", (an - fd).norm() / an.norm());
            }
        }
    }

    #[test]
    fn neo_hookean_coupling_is_strain_independent() {
        let m = nh();
        let f = lift_plane_strain(&Mat2::new(1.2, 0.1, -0.3, 0.9));
        assert_relative_eq!(m.coupling_energy(&f, 1.0).unwrap(), m.c1);
        assert_eq!(m.coupling_stress(&f, 300.0).unwrap(), Mat3::zeros());
        assert_eq!(m.coupling_df_dtheta(&f, 300.0).unwrap(), Mat3::zeros());
        assert_eq!(m.coupling_dtheta(&Mat3::identity(), 1.0).unwrap(), 0.0);
        assert_relative_eq!(m.internal_energy(&f, 293.0).unwrap(), m.c1 * 293.0, max_relative = 1e-15);
        assert_eq!(m.internal_energy(&f, 0.0).unwrap(), 0.0);
        assert_eq!(m.coupling_energy(&f, 0.0).unwrap(), 0.0);
        assert_eq!(m.heat_capacity(&f, 10.0).unwrap(), m.c1);
        assert!(matches!(m.coupling_dtheta(&f, 0.0), Err(Error::NonPositiveTemperature { .. })));
    }

    #[test]
    fn phase_fraction_limits() {
        assert_eq!(phase_fraction(0.0), 0.0);
        assert!(1.0 - phase_fraction(1e12) < 1e-11);
    }

    #[test]
    fn sma_gap_sign_controls_capacity_and_stress() {
        let m = sma();
        let id = Mat3::identity();
        let gap = austenite_energy(&id, m.mu, m.lambda).unwrap() - martensite_energy(&id, m.eps, m.mu, m.lambda).unwrap();
        assert!(gap < 0.0);
        let cap = m.heat_capacity(&id, 293.0).unwrap();
        assert!(cap < m.c1);
        // a well with W_A > W_M raises the capacity above C₁
        let g = shear_well(m.eps * 3.0);
        assert!(m.heat_capacity(&g, 293.0).unwrap() > m.c1);
        // Id is a tie of the two wells; the +ε branch supplies the stress there
        let theta = 250.0;
        let expected = -z_eps_stress(&id, m.eps, m.mu, m.lambda).unwrap() * phase_fraction(theta);
        assert_relative_eq!(m.coupling_stress(&id, theta).unwrap(), expected, epsilon = 1e-15);
        assert!((z_eps_stress(&id, -m.eps, m.mu, m.lambda).unwrap() - z_eps_stress(&id, m.eps, m.mu, m.lambda).unwrap()).norm() > 0.0);
    }

    #[test]
    fn internal_energy_of_sma_matches_definition() {
        let m = sma();
        let f = lift_plane_strain(&Mat2::new(1.1, 0.2, 0.0, 0.95));
        for theta in [0.5, 10.0, 293.0] {
            let w_in = m.coupling_energy(&f, theta).unwrap() - theta * m.coupling_dtheta(&f, theta).unwrap();
            assert_relative_eq!(m.internal_energy(&f, theta).unwrap(), w_in, max_relative = 1e-12);
            let h = 1e-5 * theta;
            let cap_fd = (m.internal_energy(&f, theta + h).unwrap() - m.internal_energy(&f, theta - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(m.heat_capacity(&f, theta).unwrap(), cap_fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn primitive_integrates_internal_energy() {
        let m = sma();
        let f = lift_plane_strain(&Mat2::new(1.05, 0.3, 0.0, 1.0));
        for theta in [1e-4, 0.3, 7.0, 293.0] {
            // composite Simpson on a fine grid
            let n = 20_000;
            let h = theta / n as f64;
            let mut sum = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * m.internal_energy(&f, i as f64 * h).unwrap();
            }
            let simpson = sum * h / 3.0;
            assert_relative_eq!(m.internal_energy_primitive(&f, theta).unwrap(), simpson, max_relative = 1e-10);
        }
    }

    #[test]
    fn dissipation_examples() {
        let m = nh();
        let rot = *Rotation::<3>::about_e3(0.4).matrix();
        assert!(m.dissipation_density(&Mat3::identity(), &rot, 1.0).unwrap() < 1e-28);
        let v2 = m.clone().with_variants(DissipationVariant::V2, HeatSourceVariant::Vh2);
        for phi in [0.1, 0.7, 2.0] {
            let r = *Rotation::<3>::about_e3(phi).matrix();
            let expected = 8.0 * m.nu_visc * (1.0 - phi.cos()).powi(2);
            assert_relative_eq!(v2.dissipation_density(&Mat3::identity(), &r, 1.0).unwrap(), expected, max_relative = 1e-12);
        }
        let f = lift_plane_strain(&Mat2::new(1.2, 0.1, 0.0, 0.8));
        assert_eq!(m.dissipation_density(&f, &f, 1.0).unwrap(), 0.0);
        assert_eq!(v2.dissipation_density(&f, &f, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dissipation_stress_and_hessian_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for variant in [DissipationVariant::V1, DissipationVariant::V2] {
            let m = nh().with_variants(variant, HeatSourceVariant::Vh1);
            for _ in 0..30 {
                let f1 = random_f(&mut rng);
                let f2 = random_f(&mut rng);
                let fd = fd_stress(|g| 0.5 * m.dissipation_density(&f1, g, 1.0).unwrap(), &f2);
                let an = m.dissipation_stress(&f1, &f2).unwrap();
                assert!((fd - an).norm() <= 1e-7 * an.norm());
                let h = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                let s = 1e-6;
                let fd = (m.dissipation_stress(&f1, &(f2 + h * s)).unwrap() - m.dissipation_stress(&f1, &(f2 - h * s)).unwrap()) / (2.0 * s);
                let an = m.dissipation_hessian_apply(&f1, &f2, &h).unwrap();
                assert!((fd - an).norm() <= 1e-7 * an.norm());
            }
        }
    }

    #[test]
    fn xi_rate_examples() {
        let m = nh();
        let f = lift_plane_strain(&Mat2::new(1.2, 0.1, -0.2, 0.8));
        assert_eq!(m.xi_rate(&f, &Mat3::zeros(), 1.0).unwrap(), 0.0);
        let skew = lift_plane_strain(&Mat2::new(0.0, -0.3, 0.3, 0.0)) - lift_plane_strain(&Mat2::zeros());
        let mut w = skew;
        w[(2, 2)] = 0.0;
        assert!(m.xi_rate(&Mat3::identity(), &w, 1.0).unwrap() < 1e-30);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let f = random_f(&mut rng);
            let fdot = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let xi = m.xi_rate(&f, &fdot, 1.0).unwrap();
            let via_stress = ddot(&m.viscous_stress(&f, &fdot), &fdot);
            assert_relative_eq!(xi, via_stress, max_relative = 1e-12);
        }
    }

    #[test]
    fn heat_source_examples() {
        let f = lift_plane_strain(&Mat2::new(1.1, 0.2, -0.1, 0.9));
        for model in [nh(), sma()] {
            for variant in [HeatSourceVariant::Vh1, HeatSourceVariant::Vh2] {
                let m = model.clone().with_variants(DissipationVariant::V1, variant);
                assert_eq!(m.heat_source(&f, &f, 293.0, 0.1).unwrap(), 0.0);
            }
        }
        let m = nh();
        let g = lift_plane_strain(&Mat2::new(1.15, 0.2, -0.1, 0.92));
        let dc = g.transpose() * g - f.transpose() * f;
        let tau = 0.05;
        assert_relative_eq!(
            m.heat_source(&g, &f, 293.0, tau).unwrap(),
            m.nu_visc * dc.norm_squared() / (tau * tau),
            max_relative = 1e-13
        );
    }

    #[test]
    fn heat_source_variants_differ_at_higher_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let tau = 0.1;
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let base = sma();
            let f1 = random_f(&mut rng);
            let dir = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let dir = dir / dir.norm();
            for scale in [1e-2, 1e-3] {
                let f2 = f1 + dir * scale;
                let h1 = base.clone().with_variants(DissipationVariant::V1, HeatSourceVariant::Vh1).heat_source(&f2, &f1, 300.0, tau).unwrap();
                let h2 = base.clone().with_variants(DissipationVariant::V2, HeatSourceVariant::Vh2).heat_source(&f2, &f1, 300.0, tau).unwrap();
                let bound = (f1.norm() + f2.norm()) * scale.powi(2) * (1.0 + 1.0 / tau) / tau;
                worst = worst.max((h1 - h2).abs() / bound);
            }
        }
        // the gap is second order in |F₂ - F₁| with a bounded constant
        assert!(worst < 50.0, "{worst}");
    }

    #[test]
    fn conductivity_pullback_examples() {
        let m = nh();
        assert_relative_eq!(m.conductivity_pullback(&Mat3::identity(), 1.0).unwrap(), Mat3::identity() * m.k_cond);
        assert_relative_eq!(
            m.conductivity_pullback(&(Mat3::identity() * 2.0), 1.0).unwrap(),
            Mat3::identity() * (2.0 * m.k_cond),
            max_relative = 1e-14
        );
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let f = random_f(&mut rng);
            let k = m.conductivity_pullback(&f, 1.0).unwrap();
            crate::tensor::SpdMatrix::new(k).unwrap();
        }
    }
}
