use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shared scalar function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn scalar_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> ScalarFn {
    Arc::new(f)
}

/// Point load `weight · δ_location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracAtom {
    pub location: f64,
    pub weight: f64,
}

/// One separable term `f^t(t) · f^x(x)` with `f^x = f^x_H + Σ atoms`.
#[derive(Clone)]
pub struct SourceTerm {
    pub temporal: ScalarFn,
    pub temporal_breakpoints: Vec<f64>,
    pub spatial: Option<ScalarFn>,
    pub spatial_breakpoints: Vec<f64>,
    pub atoms: Vec<DiracAtom>,
}

impl SourceTerm {
    pub fn new(temporal: ScalarFn, spatial: ScalarFn) -> Self {
        Self {
            temporal,
            temporal_breakpoints: Vec::new(),
            spatial: Some(spatial),
            spatial_breakpoints: Vec::new(),
            atoms: Vec::new(),
        }
    }

    pub fn with_temporal_breakpoints(mut self, bps: Vec<f64>) -> Self {
        self.temporal_breakpoints = bps;
        self
    }

    pub fn with_spatial_breakpoints(mut self, bps: Vec<f64>) -> Self {
        self.spatial_breakpoints = bps;
        self
    }

    pub fn with_atom(mut self, location: f64, weight: f64) -> Self {
        self.atoms.push(DiracAtom { location, weight });
        self
    }

    /// Term whose spatial factor is only point loads.
    pub fn atoms_only(temporal: ScalarFn, atoms: Vec<DiracAtom>) -> Self {
        Self {
            temporal,
            temporal_breakpoints: Vec::new(),
            spatial: None,
            spatial_breakpoints: Vec::new(),
            atoms,
        }
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm")
            .field("temporal_breakpoints", &self.temporal_breakpoints)
            .field("has_smooth_part", &self.spatial.is_some())
            .field("spatial_breakpoints", &self.spatial_breakpoints)
            .field("atoms", &self.atoms)
            .finish()
    }
}

/// Right-hand side data: a finite sum of separable terms plus the initial datum.
#[derive(Clone)]
pub struct SeparableSource {
    pub terms: Vec<SourceTerm>,
    pub y0: ScalarFn,
    pub y0_breakpoints: Vec<f64>,
}

impl SeparableSource {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), y0: scalar_fn(|_| 0.0), y0_breakpoints: Vec::new() }
    }

    pub fn new(terms: Vec<SourceTerm>, y0: ScalarFn) -> Self {
        Self { terms, y0, y0_breakpoints: Vec::new() }
    }

    pub fn with_y0_breakpoints(mut self, bps: Vec<f64>) -> Self {
        self.y0_breakpoints = bps;
        self
    }

    /// Every Dirac atom must sit strictly inside `(a, b)`.
    pub fn validate(&self, a: f64, b: f64) -> Result<()> {
        for atom in self.terms.iter().flat_map(|t| &t.atoms) {
            if !(atom.location > a && atom.location < b) {
                return Err(Error::InvalidArgument(format!(
                    "Dirac atom at {} is not strictly inside ({a}, {b})",
                    atom.location
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SeparableSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableSource")
            .field("terms", &self.terms)
            .field("y0_breakpoints", &self.y0_breakpoints)
            .finish()
    }
}
