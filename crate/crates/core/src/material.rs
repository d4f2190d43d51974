//! Homogeneous, isotropic poroelastic material.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid material: {field} {constraint} (got {value})")]
pub struct MaterialError {
    pub field: &'static str,
    pub constraint: &'static str,
    pub value: f64,
}

/// How the Biot modulus is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiotModulus {
    Direct(f64),
    /// 1/M = φ0·c_f + (b − φ0)/K_s, with φ0 taken from the material.
    Constituents {
        fluid_compressibility: f64,
        solid_bulk_modulus: f64,
    },
}

/// All coefficients of linear single-phase poroelasticity in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct PoroelasticMaterial {
    /// Drained Young's modulus E (Pa).
    pub youngs_modulus: f64,
    /// Drained Poisson ratio ν.
    pub poisson_ratio: f64,
    /// Biot coefficient b.
    pub biot_coefficient: f64,
    pub biot_modulus: BiotModulus,
    /// Reference porosity φ0.
    pub porosity: f64,
    /// Fluid compressibility c_f (1/Pa) for the density closure. Ignored by
    /// the Biot modulus unless it is given through [`BiotModulus::Constituents`],
    /// which carries its own value.
    pub fluid_compressibility: f64,
    /// Isotropic intrinsic permeability k (m²).
    pub permeability: f64,
    /// Dynamic viscosity μ (Pa·s).
    pub viscosity: f64,
    /// Reference fluid density ρ_f0 (kg/m³).
    pub fluid_density: f64,
    /// Solid grain density ρ_s (kg/m³).
    pub solid_density: f64,
    /// Gravity vector (m/s²).
    pub gravity: Vector3<f64>,
}

impl Default for PoroelasticMaterial {
    fn default() -> Self {
        Self {
            youngs_modulus: 1.0e8,
            poisson_ratio: 0.1,
            biot_coefficient: 1.0,
            biot_modulus: BiotModulus::Direct(2.0e8),
            porosity: 0.2,
            fluid_compressibility: 0.0,
            permeability: 1.0e-13,
            viscosity: 1.0e-3,
            fluid_density: 1000.0,
            solid_density: 2650.0,
            gravity: Vector3::zeros(),
        }
    }
}

fn check(
    ok: bool,
    field: &'static str,
    constraint: &'static str,
    value: f64,
) -> Result<(), MaterialError> {
    if ok {
        Ok(())
    } else {
        Err(MaterialError {
            field,
            constraint,
            value,
        })
    }
}

impl PoroelasticMaterial {
    pub fn validate(&self) -> Result<(), MaterialError> {
        let nu = self.poisson_ratio;
        check(
            self.youngs_modulus > 0.0,
            "youngs_modulus",
            "must be > 0",
            self.youngs_modulus,
        )?;
        check(
            nu > -1.0 && nu < 0.5,
            "poisson_ratio",
            "must lie in (-1, 0.5)",
            nu,
        )?;
        let b = self.biot_coefficient;
        check(
            b >= 0.0 && b <= 1.0,
            "biot_coefficient",
            "must lie in [0, 1]",
            b,
        )?;
        check(
            self.porosity >= 0.0 && self.porosity < 1.0,
            "porosity",
            "must lie in [0, 1)",
            self.porosity,
        )?;
        if let BiotModulus::Constituents {
            fluid_compressibility,
            solid_bulk_modulus,
        } = self.biot_modulus
        {
            check(
                self.porosity > 0.0,
                "porosity",
                "must be > 0 when the Biot modulus is derived",
                self.porosity,
            )?;
            check(
                fluid_compressibility >= 0.0,
                "fluid_compressibility",
                "must be >= 0",
                fluid_compressibility,
            )?;
            check(
                solid_bulk_modulus > 0.0,
                "solid_bulk_modulus",
                "must be > 0",
                solid_bulk_modulus,
            )?;
        }
        let m = self.biot_modulus();
        check(
            m > 0.0 && m.is_finite(),
            "biot_modulus",
            "must be finite and > 0",
            m,
        )?;
        check(
            self.permeability > 0.0,
            "permeability",
            "must be > 0",
            self.permeability,
        )?;
        check(
            self.viscosity > 0.0,
            "viscosity",
            "must be > 0",
            self.viscosity,
        )?;
        check(
            self.fluid_density >= 0.0,
            "fluid_density",
            "must be >= 0",
            self.fluid_density,
        )?;
        check(
            self.solid_density >= 0.0,
            "solid_density",
            "must be >= 0",
            self.solid_density,
        )?;
        check(
            self.fluid_compressibility >= 0.0,
            "fluid_compressibility",
            "must be >= 0",
            self.fluid_compressibility,
        )?;
        Ok(())
    }

    /// M (Pa).
    pub fn biot_modulus(&self) -> f64 {
        match self.biot_modulus {
            BiotModulus::Direct(m) => m,
            BiotModulus::Constituents {
                fluid_compressibility,
                solid_bulk_modulus,
            } => {
                let phi = self.porosity;
                1.0 / (phi * fluid_compressibility
                    + (self.biot_coefficient - phi) / solid_bulk_modulus)
            }
        }
    }

    /// Drained bulk modulus K_dr = E / (3(1 − 2ν)).
    pub fn drained_bulk_modulus(&self) -> f64 {
        self.youngs_modulus / (3.0 * (1.0 - 2.0 * self.poisson_ratio))
    }

    /// Shear modulus G = E / (2(1 + ν)).
    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    /// Lamé λ = K_dr − 2G/3.
    pub fn lame_lambda(&self) -> f64 {
        self.drained_bulk_modulus() - 2.0 * self.shear_modulus() / 3.0
    }

    /// Constrained (oedometric) modulus K_dr + 4G/3.
    pub fn constrained_modulus(&self) -> f64 {
        self.drained_bulk_modulus() + 4.0 * self.shear_modulus() / 3.0
    }

    /// Fixed-stress storage b²/K_dr + 1/M.
    pub fn fixed_stress_storage(&self) -> f64 {
        let b = self.biot_coefficient;
        b * b / self.drained_bulk_modulus() + 1.0 / self.biot_modulus()
    }

    /// Fluid mobility 1/μ applied to geometric transmissibilities.
    pub fn mobility(&self) -> f64 {
        1.0 / self.viscosity
    }

    /// Linearized fluid density ρ_f0 (1 + c_f (p − p0)).
    pub fn fluid_density_at(&self, dp: f64) -> f64 {
        self.fluid_density * (1.0 + self.fluid_compressibility * dp)
    }

    /// Bulk density φ0 ρ_f0 + (1 − φ0) ρ_s for a single saturating phase.
    pub fn bulk_density(&self) -> f64 {
        self.porosity * self.fluid_density + (1.0 - self.porosity) * self.solid_density
    }
}
