//! JSON interchange for geometries (schema: `schemas/geometry.v1.json`).

use serde::{Deserialize, Serialize};

use super::{make_polygon_povm_oriented, GeometryKind, PovmGeometry, Solid};
use crate::bloch::BlochVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SCHEMA_ID: &str = "povm-geometry/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacetRecord {
    pub normal: [f64; 3],
    pub alpha: f64,
}

/// On-disk geometry record. Directions are `[x, y, z]` Bloch components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryRecord {
    pub kind: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub facets: Vec<FacetRecord>,
    #[serde(default)]
    pub orientation_deg: f64,
}

impl<T: Scalar> From<&PovmGeometry<T>> for GeometryRecord {
    fn from(g: &PovmGeometry<T>) -> Self {
        let arr = |v: BlochVector<T>| v.cast::<f64>().to_array();
        GeometryRecord {
            kind: g.kind().tag().to_string(),
            n: g.outcomes(),
            directions: g.directions().iter().map(|a| arr(*a)).collect(),
            weights: g.weights().iter().map(|w| w.to_f64_lossy()).collect(),
            facets: g
                .facets()
                .iter()
                .map(|f| FacetRecord {
                    normal: arr(f.normal),
                    alpha: f.alpha.to_f64_lossy(),
                })
                .collect(),
            orientation_deg: g.orientation_deg().to_f64_lossy(),
        }
    }
}

type Parts<T> = (
    GeometryKind,
    Vec<BlochVector<T>>,
    Vec<T>,
    Option<Vec<(BlochVector<T>, T)>>,
);

impl GeometryRecord {
    fn parts<T: Scalar>(&self) -> Result<Parts<T>> {
        if self.directions.len() != self.n {
            return Err(Error::InvalidGeometry(format!(
                "N = {} but {} directions listed",
                self.n,
                self.directions.len()
            )));
        }
        let kind = match self.kind.as_str() {
            "polygon" => GeometryKind::Polygon(self.n),
            "custom" => GeometryKind::Custom,
            other => GeometryKind::Solid(other.parse::<Solid>()?),
        };
        let v = |a: &[f64; 3]| BlochVector::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
        let dirs = self.directions.iter().map(v).collect();
        let weights = self.weights.iter().map(|w| T::lit(*w)).collect();
        let facets = (!self.facets.is_empty()).then(|| {
            self.facets
                .iter()
                .map(|f| (v(&f.normal), T::lit(f.alpha)))
                .collect()
        });
        Ok((kind, dirs, weights, facets))
    }

    /// Validated geometry.
    pub fn to_geometry<T: Scalar>(&self) -> Result<PovmGeometry<T>> {
        let (kind, dirs, weights, facets) = self.parts()?;
        let g =
            PovmGeometry::from_parts(kind, dirs, weights, facets, T::lit(self.orientation_deg))?;
        if let GeometryKind::Polygon(n) = kind {
            let reference = make_polygon_povm_oriented::<T>(n, T::lit(self.orientation_deg))?;
            let worst = g
                .directions()
                .iter()
                .zip(reference.directions())
                .map(|(a, b)| a.max_abs_diff(*b))
                .fold(T::zero(), T::max);
            if worst > T::tol(1e-9) {
                return Err(Error::InvalidGeometry(
                    "polygon directions do not match N and orientation_deg".into(),
                ));
            }
        }
        Ok(g)
    }

    /// Geometry without structural validation (for audits of broken files).
    pub fn to_geometry_unchecked<T: Scalar>(&self) -> Result<PovmGeometry<T>> {
        let (kind, dirs, weights, facets) = self.parts()?;
        PovmGeometry::from_parts_unchecked(
            kind,
            dirs,
            weights,
            facets,
            T::lit(self.orientation_deg),
        )
    }
}

impl<T: Scalar> PovmGeometry<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GeometryRecord::from(self)).expect("geometry serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: GeometryRecord = serde_json::from_str(s)?;
        rec.to_geometry()
    }
}
