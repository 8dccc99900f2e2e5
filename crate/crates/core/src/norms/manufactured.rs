use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::spacetime_system::{scalar_fn, SeparableSource, SourceTerm, SpaceTimeSolution};

/// Shared scalar field `(t, x) ↦ value`.
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Exact solution with its derivatives, the kinks of each, and matching data.
#[derive(Clone)]
pub struct AnalyticalSolution {
    pub name: String,
    pub y: FieldFn,
    pub y_t: FieldFn,
    pub y_x: FieldFn,
    pub temporal_breakpoints: Vec<f64>,
    pub spatial_breakpoints: Vec<f64>,
    pub source: SeparableSource,
}

impl fmt::Debug for AnalyticalSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticalSolution")
            .field("name", &self.name)
            .field("temporal_breakpoints", &self.temporal_breakpoints)
            .field("spatial_breakpoints", &self.spatial_breakpoints)
            .finish()
    }
}

fn field<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> FieldFn {
    Arc::new(f)
}

fn tent(s: f64) -> f64 {
    0.5 - (s - 0.5).abs()
}

fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl AnalyticalSolution {
    /// `y = sin(πx) cos(πt)`, smooth in space and time.
    pub fn ex1() -> Self {
        let source = SeparableSource::new(
            vec![SourceTerm::new(
                scalar_fn(|t| PI * PI * (PI * t).cos() - PI * (PI * t).sin()),
                scalar_fn(|x| (PI * x).sin()),
            )],
            scalar_fn(|x| (PI * x).sin()),
        );
        Self {
            name: "ex1".into(),
            y: field(|t, x| (PI * x).sin() * (PI * t).cos()),
            y_t: field(|t, x| -PI * (PI * x).sin() * (PI * t).sin()),
            y_x: field(|t, x| PI * (PI * x).cos() * (PI * t).cos()),
            temporal_breakpoints: Vec::new(),
            spatial_breakpoints: Vec::new(),
            source,
        }
    }

    /// `y = (0.5 − |x − 0.5|) e^{−t}`: a spatial kink, so `−y_xx` carries `2δ_{0.5}`.
    pub fn ex2() -> Self {
        let source = SeparableSource::new(
            vec![SourceTerm::new(scalar_fn(|t| (-t).exp()), scalar_fn(|x| -tent(x)))
                .with_spatial_breakpoints(vec![0.5])
                .with_atom(0.5, 2.0)],
            scalar_fn(tent),
        )
        .with_y0_breakpoints(vec![0.5]);
        Self {
            name: "ex2".into(),
            y: field(|t, x| tent(x) * (-t).exp()),
            y_t: field(|t, x| -tent(x) * (-t).exp()),
            y_x: field(|t, x| -sign(x - 0.5) * (-t).exp()),
            temporal_breakpoints: Vec::new(),
            spatial_breakpoints: vec![0.5],
            source,
        }
    }

    /// `y = (0.5 − |t − 0.5|) sin(πx)`: a temporal kink.
    pub fn ex3() -> Self {
        let source = SeparableSource::new(
            vec![SourceTerm::new(
                scalar_fn(|t| PI * PI * tent(t) - sign(t - 0.5)),
                scalar_fn(|x| (PI * x).sin()),
            )
            .with_temporal_breakpoints(vec![0.5])],
            scalar_fn(|_| 0.0),
        );
        Self {
            name: "ex3".into(),
            y: field(|t, x| tent(t) * (PI * x).sin()),
            y_t: field(|t, x| -sign(t - 0.5) * (PI * x).sin()),
            y_x: field(|t, x| PI * tent(t) * (PI * x).cos()),
            temporal_breakpoints: vec![0.5],
            spatial_breakpoints: Vec::new(),
            source,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ex1" => Some(Self::ex1()),
            "ex2" => Some(Self::ex2()),
            "ex3" => Some(Self::ex3()),
            _ => None,
        }
    }

    /// `y ≡ 0` with zero data; errors against it are norms of the discrete solution.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            y: field(|_, _| 0.0),
            y_t: field(|_, _| 0.0),
            y_x: field(|_, _| 0.0),
            temporal_breakpoints: Vec::new(),
            spatial_breakpoints: Vec::new(),
            source: SeparableSource::zero(),
        }
    }

    /// A discrete function viewed as an exact solution; breakpoints at every node.
    /// The data field is left at zero.
    pub fn from_discrete(sol: &SpaceTimeSolution) -> Self {
        let (a, b, c) = (sol.clone(), sol.clone(), sol.clone());
        Self {
            name: "discrete".into(),
            y: field(move |t, x| a.eval(t, x)),
            y_t: field(move |t, x| b.eval_dt(t, x)),
            y_x: field(move |t, x| c.eval_dx(t, x)),
            temporal_breakpoints: sol.time_space().grid().nodes().to_vec(),
            spatial_breakpoints: sol.space().grid().nodes().to_vec(),
            source: SeparableSource::zero(),
        }
    }

    /// `α y`, with the data scaled accordingly.
    pub fn scaled(&self, alpha: f64) -> Self {
        let (y, yt, yx) = (self.y.clone(), self.y_t.clone(), self.y_x.clone());
        let mut source = self.source.clone();
        for term in &mut source.terms {
            let ft = term.temporal.clone();
            term.temporal = scalar_fn(move |t| alpha * ft(t));
        }
        let y0 = source.y0.clone();
        source.y0 = scalar_fn(move |x| alpha * y0(x));
        Self {
            name: format!("{}*{alpha}", self.name),
            y: field(move |t, x| alpha * y(t, x)),
            y_t: field(move |t, x| alpha * yt(t, x)),
            y_x: field(move |t, x| alpha * yx(t, x)),
            temporal_breakpoints: self.temporal_breakpoints.clone(),
            spatial_breakpoints: self.spatial_breakpoints.clone(),
            source,
        }
    }

    pub fn y0(&self, x: f64) -> f64 {
        (self.source.y0)(x)
    }
}
