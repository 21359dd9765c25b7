//! Deterministic covariate paths X(t) built from static features.

use std::fmt;
use std::str::FromStr;

use crate::error::{CoxError, Result};

/// Scalar basis functions of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFn {
    /// 1
    One,
    /// t
    T,
    /// 2t
    TwoT,
    /// 4t² − 2
    Legendre2,
}

impl BasisFn {
    #[inline]
    pub fn eval(self, t: f64) -> f64 {
        match self {
            BasisFn::One => 1.0,
            BasisFn::T => t,
            BasisFn::TwoT => 2.0 * t,
            BasisFn::Legendre2 => 4.0 * t * t - 2.0,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            BasisFn::One => "1",
            BasisFn::T => "t",
            BasisFn::TwoT => "2t",
            BasisFn::Legendre2 => "4t^2-2",
        }
    }
}

impl FromStr for BasisFn {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(BasisFn::One),
            "t" => Ok(BasisFn::T),
            "2t" => Ok(BasisFn::TwoT),
            "4t^2-2" | "4t2-2" => Ok(BasisFn::Legendre2),
            other => Err(CoxError::InvalidPath(format!("unknown basis function `{other}`"))),
        }
    }
}

/// How basis functions combine with the static features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLayout {
    /// X(t) = (b₁(t)·x, b₂(t)·x, …); dimension k·d.
    Stacked,
    /// Features split into k equal blocks, X(t) = Σ bₖ(t)·blockₖ; dimension d/k.
    Blockwise,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariatePathSpec {
    Constant,
    PolynomialBasis { basis: Vec<BasisFn>, layout: BasisLayout },
}

impl CovariatePathSpec {
    /// (x, 2t·x, (4t²−2)·x): a quadratic Legendre expansion for
    /// time-varying coefficients.
    pub fn legendre_quadratic() -> Self {
        CovariatePathSpec::PolynomialBasis {
            basis: vec![BasisFn::One, BasisFn::TwoT, BasisFn::Legendre2],
            layout: BasisLayout::Stacked,
        }
    }

    /// x + t·ε over features laid out as (x, ε).
    pub fn linear_drift() -> Self {
        CovariatePathSpec::PolynomialBasis {
            basis: vec![BasisFn::One, BasisFn::T],
            layout: BasisLayout::Blockwise,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CovariatePathSpec::Constant)
    }

    /// Dimension of X(t) for `feature_dim` static features.
    pub fn covariate_dim(&self, feature_dim: usize) -> Result<usize> {
        match self {
            CovariatePathSpec::Constant => Ok(feature_dim),
            CovariatePathSpec::PolynomialBasis { basis, layout } => {
                if basis.is_empty() {
                    return Err(CoxError::InvalidPath("empty basis".into()));
                }
                match layout {
                    BasisLayout::Stacked => Ok(basis.len() * feature_dim),
                    BasisLayout::Blockwise => {
                        if feature_dim % basis.len() != 0 {
                            return Err(CoxError::InvalidPath(format!(
                                "{feature_dim} features do not split into {} blocks",
                                basis.len()
                            )));
                        }
                        Ok(feature_dim / basis.len())
                    }
                }
            }
        }
    }

    /// Freezes the basis values at time `t` for repeated evaluation.
    pub fn at(&self, t: f64) -> PathPoint<'_> {
        let values = match self {
            CovariatePathSpec::Constant => Vec::new(),
            CovariatePathSpec::PolynomialBasis { basis, .. } => {
                basis.iter().map(|b| b.eval(t)).collect()
            }
        };
        PathPoint { spec: self, values }
    }

    pub fn evaluate(&self, features: &[f64], t: f64) -> Vec<f64> {
        let dim = self
            .covariate_dim(features.len())
            .expect("feature length incompatible with path");
        let mut out = vec![0.0; dim];
        self.at(t).eval_into(features, &mut out);
        out
    }
}

/// A covariate path with its basis evaluated at one time point.
#[derive(Debug, Clone)]
pub struct PathPoint<'a> {
    spec: &'a CovariatePathSpec,
    values: Vec<f64>,
}

impl PathPoint<'_> {
    #[inline]
    pub fn eval_into(&self, features: &[f64], out: &mut [f64]) {
        match self.spec {
            CovariatePathSpec::Constant => out.copy_from_slice(features),
            CovariatePathSpec::PolynomialBasis { layout, .. } => match layout {
                BasisLayout::Stacked => {
                    let d = features.len();
                    for (b, &v) in self.values.iter().enumerate() {
                        for (o, &x) in out[b * d..(b + 1) * d].iter_mut().zip(features) {
                            *o = v * x;
                        }
                    }
                }
                BasisLayout::Blockwise => {
                    let p = out.len();
                    out.iter_mut().for_each(|o| *o = 0.0);
                    for (b, &v) in self.values.iter().enumerate() {
                        for (o, &x) in out.iter_mut().zip(&features[b * p..(b + 1) * p]) {
                            *o += v * x;
                        }
                    }
                }
            },
        }
    }
}

impl fmt::Display for CovariatePathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariatePathSpec::Constant => write!(f, "constant"),
            CovariatePathSpec::PolynomialBasis { basis, layout } => {
                let prefix = match layout {
                    BasisLayout::Stacked => "poly",
                    BasisLayout::Blockwise => "poly-sum",
                };
                let tokens: Vec<_> = basis.iter().map(|b| b.token()).collect();
                write!(f, "{prefix}:{}", tokens.join(","))
            }
        }
    }
}

/// Parses `constant`, `poly:1,2t,4t^2-2` (stacked) or `poly-sum:1,t` (blockwise).
impl FromStr for CovariatePathSpec {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant" {
            return Ok(CovariatePathSpec::Constant);
        }
        let (layout, list) = if let Some(rest) = s.strip_prefix("poly-sum:") {
            (BasisLayout::Blockwise, rest)
        } else if let Some(rest) = s.strip_prefix("poly:") {
            (BasisLayout::Stacked, rest)
        } else {
            return Err(CoxError::InvalidPath(format!("unrecognised path `{s}`")));
        };
        let basis = list.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        if basis.is_empty() {
            return Err(CoxError::InvalidPath("empty basis".into()));
        }
        Ok(CovariatePathSpec::PolynomialBasis { basis, layout })
    }
}
