//! Physical parameters and data of the coupled problem.

use std::sync::Arc;

use thiserror::Error;

use crate::fem::Element;
use crate::mesh::{MixedMesh, Point, Subdomain};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
/// Scalar on a boundary or interface, given the point and a unit normal
/// (outward from Ω_p on Γ_pn, n_f on Γ).
pub type BoundaryField = Arc<dyn Fn(Point, [f64; 2]) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("spectral bounds must satisfy 0 < lambda_min <= lambda_max, got [{0}, {1}]")]
    SpectralBounds(f64, f64),
    #[error("permeability on triangle {triangle} is not symmetric")]
    AsymmetricPermeability { triangle: usize },
    #[error("permeability eigenvalues [{lo}, {hi}] on triangle {triangle} leave [{lambda_min}, {lambda_max}]")]
    PermeabilityOutOfBounds {
        triangle: usize,
        lo: f64,
        hi: f64,
        lambda_min: f64,
        lambda_max: f64,
    },
}

/// Extra interface terms used by manufactured solutions whose exact fields
/// do not satisfy the homogeneous interface conditions.
#[derive(Clone)]
pub struct InterfaceLoads {
    /// u·n_f − 𝕂∇φ·n_p
    pub r_mass: BoundaryField,
    /// −(T n_f)·n_f − φ
    pub r_normal: BoundaryField,
    /// −(T n_f)·τ − G u·τ
    pub r_tangential: BoundaryField,
}

/// ν, 𝕂, G, σ and the data (g_f, g_p, boundary values).
///
/// Missing forcing terms and boundary data are zero.
#[derive(Clone)]
pub struct ModelParams {
    pub nu: f64,
    pub permeability: TensorField,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// BJS friction coefficient G.
    pub friction: f64,
    /// Auxiliary viscosity; `None` means ν·h on the mesh at hand.
    pub sigma: Option<f64>,
    pub g_f: Option<VectorField>,
    pub g_p: Option<ScalarField>,
    /// Velocity on Γ_f.
    pub velocity_bc: Option<VectorField>,
    /// Head on Γ_pd.
    pub head_bc: Option<ScalarField>,
    /// 𝕂∇φ·n_p on Γ_pn.
    pub neumann_flux: Option<BoundaryField>,
    pub interface_loads: Option<InterfaceLoads>,
    /// Drop the convection term to get the linear Stokes-Darcy problem.
    pub convection: bool,
}

impl std::fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelParams")
            .field("nu", &self.nu)
            .field("lambda_min", &self.lambda_min)
            .field("lambda_max", &self.lambda_max)
            .field("friction", &self.friction)
            .field("sigma", &self.sigma)
            .field("g_f", &self.g_f.is_some())
            .field("g_p", &self.g_p.is_some())
            .field("convection", &self.convection)
            .finish()
    }
}

fn sym_eigenvalues(k: [[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (k[0][0] + k[1][1]);
    let r = (0.25 * (k[0][0] - k[1][1]).powi(2) + k[0][1] * k[1][0]).max(0.0).sqrt();
    (mean - r, mean + r)
}

impl ModelParams {
    /// ν with 𝕂 = I, G = 1, no forcing.
    pub fn new(nu: f64) -> Self {
        ModelParams {
            nu,
            permeability: Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]),
            lambda_min: 1.0,
            lambda_max: 1.0,
            friction: 1.0,
            sigma: None,
            g_f: None,
            g_p: None,
            velocity_bc: None,
            head_bc: None,
            neumann_flux: None,
            interface_loads: None,
            convection: true,
        }
    }

    pub fn with_isotropic_permeability(mut self, k: f64) -> Self {
        self.permeability = Arc::new(move |_| [[k, 0.0], [0.0, k]]);
        self.lambda_min = k;
        self.lambda_max = k;
        self
    }

    pub fn with_permeability(mut self, field: TensorField, lambda_min: f64, lambda_max: f64) -> Self {
        self.permeability = field;
        self.lambda_min = lambda_min;
        self.lambda_max = lambda_max;
        self
    }

    pub fn with_friction(mut self, g: f64) -> Self {
        self.friction = g;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_fluid_force(mut self, g: VectorField) -> Self {
        self.g_f = Some(g);
        self
    }

    pub fn with_porous_source(mut self, g: ScalarField) -> Self {
        self.g_p = Some(g);
        self
    }

    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    /// Same data multiplied by `alpha` (forcing, boundary values, interface loads).
    pub fn scaled_data(&self, alpha: f64) -> Self {
        let mut p = self.clone();
        let sv = |f: &VectorField| -> VectorField {
            let f = Arc::clone(f);
            Arc::new(move |x| {
                let v = f(x);
                [alpha * v[0], alpha * v[1]]
            })
        };
        let ss = |f: &ScalarField| -> ScalarField {
            let f = Arc::clone(f);
            Arc::new(move |x| alpha * f(x))
        };
        p.g_f = self.g_f.as_ref().map(sv);
        p.g_p = self.g_p.as_ref().map(ss);
        p.velocity_bc = self.velocity_bc.as_ref().map(sv);
        p.head_bc = self.head_bc.as_ref().map(ss);
        let sb = |f: &BoundaryField| -> BoundaryField {
            let f = Arc::clone(f);
            Arc::new(move |x, n| alpha * f(x, n))
        };
        p.neumann_flux = self.neumann_flux.as_ref().map(sb);
        p.interface_loads = self.interface_loads.as_ref().map(|l| InterfaceLoads {
            r_mass: sb(&l.r_mass),
            r_normal: sb(&l.r_normal),
            r_tangential: sb(&l.r_tangential),
        });
        p
    }

    pub fn sigma_on(&self, mesh: &MixedMesh) -> f64 {
        self.sigma.unwrap_or(self.nu * mesh.h())
    }

    /// Permeability sampled at the barycenter of a triangle.
    pub fn permeability_at(&self, mesh: &MixedMesh, t: usize) -> [[f64; 2]; 2] {
        (self.permeability)(Element::new(mesh.triangle_points(t)).centroid())
    }

    /// Check positivity of the scalars and the spectral bounds of 𝕂 on every
    /// porous triangle.
    pub fn validate(&self, mesh: &MixedMesh) -> Result<(), ModelError> {
        for (name, value) in [("nu", self.nu), ("G", self.friction)]
            .into_iter()
            .chain(self.sigma.map(|s| ("sigma", s)))
        {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite()) {
            return Err(ModelError::SpectralBounds(self.lambda_min, self.lambda_max));
        }
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if tri.subdomain != Subdomain::Porous {
                continue;
            }
            let k = self.permeability_at(mesh, t);
            let scale = k[0][0].abs().max(k[1][1].abs()).max(k[0][1].abs());
            if (k[0][1] - k[1][0]).abs() > 1e-12 * scale {
                return Err(ModelError::AsymmetricPermeability { triangle: t });
            }
            let (lo, hi) = sym_eigenvalues(k);
            let slack = 1e-12 * self.lambda_max;
            if lo < self.lambda_min - slack || hi > self.lambda_max + slack {
                return Err(ModelError::PermeabilityOutOfBounds {
                    triangle: t,
                    lo,
                    hi,
                    lambda_min: self.lambda_min,
                    lambda_max: self.lambda_max,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle_mesh;

    #[test]
    fn rejects_bad_scalars() {
        let mesh = build_rectangle_mesh(1, 2, 1.0).unwrap();
        assert!(ModelParams::new(1.0).validate(&mesh).is_ok());
        assert!(matches!(
            ModelParams::new(0.0).validate(&mesh),
            Err(ModelError::NonPositive { name: "nu", .. })
        ));
        assert!(ModelParams::new(1.0).with_friction(-1.0).validate(&mesh).is_err());
        assert!(ModelParams::new(1.0).with_sigma(0.0).validate(&mesh).is_err());
    }

    #[test]
    fn checks_spectral_bounds_per_triangle() {
        let mesh = build_rectangle_mesh(2, 4, 1.0).unwrap();
        let aniso: TensorField = Arc::new(|x: Point| [[1.0 + x[0], 0.5], [0.5, 2.0]]);
        // eigenvalues of [[a, .5], [.5, 2]] for a in (1, 2) stay in [0.7, 2.8]
        let ok = ModelParams::new(1.0).with_permeability(Arc::clone(&aniso), 0.7, 2.8);
        assert!(ok.validate(&mesh).is_ok());
        let bad = ModelParams::new(1.0).with_permeability(aniso, 1.0, 2.0);
        assert!(matches!(bad.validate(&mesh), Err(ModelError::PermeabilityOutOfBounds { .. })));
        let skew = ModelParams::new(1.0).with_permeability(Arc::new(|_| [[1.0, 0.1], [0.0, 1.0]]), 0.5, 2.0);
        assert!(matches!(skew.validate(&mesh), Err(ModelError::AsymmetricPermeability { .. })));
    }

    #[test]
    fn eigenvalues_of_symmetric_2x2() {
        let (lo, hi) = sym_eigenvalues([[2.0, 1.0], [1.0, 2.0]]);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }
}
