//! Eigenvalue densities of the measures induced by the Hilbert-Schmidt metric and
//! by monotone metrics. All densities are unnormalized; every quantity built from
//! them is a ratio in which the constants cancel.
//!
//! A monotone metric is fixed by its Morozova-Chentsov function `c(x, y)`. Its
//! eigenvalue density is `prod_i l_i^(-1/2) * prod_{i<j} (l_i - l_j)^2 c(l_i, l_j)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_param::SpectrumPoint;

/// Below this relative gap the Kubo-Mori kernel switches to its series form.
const KUBO_MORI_SERIES_GAP: f64 = 1e-6;

/// Default lower bound on the smallest eigenvalue for monotone weights.
pub const DEFAULT_CLIP_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Hs,
    Bures,
    KuboMori,
    WignerYanase,
    ArithmeticAverage,
    QuasiBures,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Hs => "hs",
            MetricName::Bures => "bures",
            MetricName::KuboMori => "kubo_mori",
            MetricName::WignerYanase => "wigner_yanase",
            MetricName::ArithmeticAverage => "arithmetic_average",
            MetricName::QuasiBures => "quasi_bures",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            MetricName::Hs,
            MetricName::Bures,
            MetricName::KuboMori,
            MetricName::WignerYanase,
            MetricName::ArithmeticAverage,
            MetricName::QuasiBures,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
    }
}

/// Morozova-Chentsov kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CFunction {
    /// `2 / (x + y)`
    Bures,
    /// `(ln x - ln y) / (x - y)`, `1/x` on the diagonal
    KuboMori,
    /// `4 / (sqrt x + sqrt y)^2`
    WignerYanase,
    /// `(x + y) / (2 x y)`
    Maximal,
    /// Weighted sum of other kernels.
    Mixture { parts: Vec<(f64, CFunction)> },
}

impl CFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            CFunction::Bures => 2.0 / (x + y),
            CFunction::KuboMori => kubo_mori(x, y),
            CFunction::WignerYanase => {
                let s = x.sqrt() + y.sqrt();
                4.0 / (s * s)
            }
            CFunction::Maximal => (x + y) / (2.0 * x * y),
            CFunction::Mixture { parts } => parts.iter().map(|(w, c)| w * c.eval(x, y)).sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let CFunction::Mixture { parts } = self {
            if parts.is_empty() || parts.iter().any(|(w, _)| !(*w >= 0.0)) {
                return Err(Error::Config(
                    "mixture kernels need a non-empty list of non-negative weights".into(),
                ));
            }
            for (_, c) in parts {
                c.validate()?;
            }
        }
        Ok(())
    }
}

fn kubo_mori(x: f64, y: f64) -> f64 {
    let m = 0.5 * (x + y);
    let h = 0.5 * (x - y);
    if h.abs() < KUBO_MORI_SERIES_GAP * (x + y) {
        // (ln x - ln y)/(x - y) = artanh(t)/(m t), t = h/m
        let t2 = (h / m) * (h / m);
        (1.0 + t2 / 3.0 + t2 * t2 / 5.0 + t2 * t2 * t2 / 7.0) / m
    } else {
        ((x - y) / y).ln_1p() / (x - y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricKind {
    pub name: MetricName,
    pub c_function: Option<CFunction>,
    pub include_fisher_factor: bool,
}

impl MetricKind {
    pub fn hs() -> Self {
        MetricKind {
            name: MetricName::Hs,
            c_function: None,
            include_fisher_factor: false,
        }
    }

    pub fn monotone(name: MetricName, c: CFunction) -> Self {
        MetricKind {
            name,
            c_function: Some(c),
            include_fisher_factor: true,
        }
    }

    pub fn bures() -> Self {
        Self::monotone(MetricName::Bures, CFunction::Bures)
    }

    pub fn kubo_mori() -> Self {
        Self::monotone(MetricName::KuboMori, CFunction::KuboMori)
    }

    pub fn wigner_yanase() -> Self {
        Self::monotone(MetricName::WignerYanase, CFunction::WignerYanase)
    }

    /// Resolves a metric name, using `overrides` for the kernel when present.
    /// Arithmetic-average and quasi-Bures have no built-in kernel and must be
    /// supplied explicitly.
    pub fn resolve(name: MetricName, overrides: &BTreeMap<MetricName, CFunction>) -> Result<Self> {
        if let Some(c) = overrides.get(&name) {
            if name == MetricName::Hs {
                return Err(Error::Config("the HS metric takes no kernel".into()));
            }
            c.validate()?;
            return Ok(Self::monotone(name, c.clone()));
        }
        match name {
            MetricName::Hs => Ok(Self::hs()),
            MetricName::Bures => Ok(Self::bures()),
            MetricName::KuboMori => Ok(Self::kubo_mori()),
            MetricName::WignerYanase => Ok(Self::wigner_yanase()),
            MetricName::ArithmeticAverage | MetricName::QuasiBures => Err(Error::Config(format!(
                "metric {} needs an explicit c_function definition",
                name.as_str()
            ))),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.c_function.is_some()
    }
}

/// Squared Vandermonde of the spectrum. For a boundary spectrum the pinned zero
/// takes part like any other eigenvalue.
pub fn hs_density(spec: &SpectrumPoint) -> f64 {
    let l = &spec.lambdas;
    let mut w = 1.0;
    for i in 0..l.len() {
        for j in (i + 1)..l.len() {
            let gap = l[i] - l[j];
            w *= gap * gap;
        }
    }
    w
}

pub fn monotone_density(spec: &SpectrumPoint, metric: &MetricKind) -> Result<f64> {
    let c = metric.c_function.as_ref().ok_or_else(|| {
        Error::Domain(format!("{} is not a monotone metric", metric.name.as_str()))
    })?;
    let l = &spec.lambdas;
    if spec.rank_deficient || l.iter().any(|&x| x <= 0.0) {
        return Err(Error::Domain(
            "monotone densities need a strictly positive spectrum".into(),
        ));
    }
    let mut w = 1.0;
    if metric.include_fisher_factor {
        w /= l.iter().product::<f64>().sqrt();
    }
    for i in 0..l.len() {
        for j in (i + 1)..l.len() {
            let gap = l[i] - l[j];
            w *= gap * gap * c.eval(l[i], l[j]);
        }
    }
    Ok(w)
}

/// Dispatches on the metric kind.
pub fn weight(spec: &SpectrumPoint, metric: &MetricKind) -> Result<f64> {
    if metric.is_monotone() {
        monotone_density(spec, metric)
    } else {
        Ok(hs_density(spec))
    }
}

/// Like [`weight`], but monotone weights of spectra with an eigenvalue below
/// `floor` are clipped: `Ok(None)` is returned instead of a weight.
pub fn clipped_weight(spec: &SpectrumPoint, metric: &MetricKind, floor: f64) -> Result<Option<f64>> {
    if metric.is_monotone() && !spec.rank_deficient && spec.min() < floor {
        return Ok(None);
    }
    weight(spec, metric).map(Some)
}
