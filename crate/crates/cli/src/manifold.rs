//! Manifold addresses: `<catalog-name>`, `twistor:<base>:<sign>:t=<val>` or `file:<path>`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ahg_core::catalog::{self, CatalogEntry};
use ahg_core::twistor::{build_twistor_chart, TwistorSign, TwistorSpec};
use ahg_core::{ChartSpec, GeomError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldRef {
    Catalog(String),
    Twistor { base: String, sign: TwistorSign, t: f64 },
    File(PathBuf),
}

impl fmt::Display for ManifoldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldRef::Catalog(name) => f.write_str(name),
            ManifoldRef::Twistor { base, sign, t } => write!(f, "twistor:{base}:{sign}:t={t}"),
            ManifoldRef::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for ManifoldRef {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<ManifoldRef> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(GeomError::UnknownManifold(s.to_string()));
            }
            return Ok(ManifoldRef::File(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("twistor:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [base, sign, t] = parts.as_slice() else {
                return Err(GeomError::UnknownManifold(format!("{s} (expected twistor:<base>:<sign>:t=<val>)")));
            };
            let t = t
                .strip_prefix("t=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| GeomError::UnknownManifold(format!("{s} (fiber scale must read t=<number>)")))?;
            if !catalog::CATALOG_NAMES.contains(base) {
                return Err(GeomError::UnknownManifold(base.to_string()));
            }
            return Ok(ManifoldRef::Twistor { base: base.to_string(), sign: sign.parse()?, t });
        }
        if catalog::CATALOG_NAMES.contains(&s) {
            Ok(ManifoldRef::Catalog(s.to_string()))
        } else {
            Err(GeomError::UnknownManifold(s.to_string()))
        }
    }
}

/// A loaded manifold with whatever extra structure its address carries.
pub struct Manifold {
    pub chart: ChartSpec,
    pub entry: Option<CatalogEntry>,
    pub twistor: Option<TwistorSpec>,
}

impl ManifoldRef {
    pub fn load(&self) -> Result<Manifold> {
        match self {
            ManifoldRef::Catalog(name) => {
                let entry = catalog::load(name)?;
                Ok(Manifold { chart: entry.chart.clone(), entry: Some(entry), twistor: None })
            }
            ManifoldRef::File(path) => {
                let entry = catalog::load_custom(path)?;
                Ok(Manifold { chart: entry.chart.clone(), entry: Some(entry), twistor: None })
            }
            ManifoldRef::Twistor { base, sign, t } => {
                let spec = TwistorSpec::from_catalog(base, *sign, *t)?;
                let chart = build_twistor_chart(&spec)?;
                Ok(Manifold { chart, entry: None, twistor: Some(spec) })
            }
        }
    }
}
