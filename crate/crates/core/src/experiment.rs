//! Experimental configurations: named geometries, prepared states and the
//! four measurement tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochVector, QubitState};
use crate::error::{Error, Result};
use crate::geometry::{make_platonic_povm, make_polygon_povm_oriented, PovmGeometry, Solid};
use crate::photonics::{CoincidenceConfig, RunLength, SimConfig};
use crate::scalar::Scalar;

/// Built-in experiment description.
pub const DEFAULT_EXPERIMENT_TOML: &str = include_str!("../../../configs/experiment.toml");

/// A geometry named on the command line or in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GeometrySpec {
    Polygon { n: usize, orientation_deg: f64 },
    Solid(Solid),
}

impl GeometrySpec {
    pub fn build<T: Scalar>(&self) -> Result<PovmGeometry<T>> {
        match *self {
            GeometrySpec::Polygon { n, orientation_deg } => {
                make_polygon_povm_oriented(n, T::lit(orientation_deg))
            }
            GeometrySpec::Solid(s) => Ok(make_platonic_povm(s)),
        }
    }

    pub fn outcomes(&self) -> usize {
        match *self {
            GeometrySpec::Polygon { n, .. } => n,
            GeometrySpec::Solid(s) => s.outcomes(),
        }
    }
}

impl fmt::Display for GeometrySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometrySpec::Polygon { n, orientation_deg } if *orientation_deg == 0.0 => {
                write!(f, "polygon:{n}")
            }
            GeometrySpec::Polygon { n, orientation_deg } => {
                write!(f, "polygon:{n}@{orientation_deg}")
            }
            GeometrySpec::Solid(s) => f.write_str(s.name()),
        }
    }
}

impl FromStr for GeometrySpec {
    type Err = Error;

    /// Accepts `N`, `polygon:N`, `polygon:N@deg` and solid names.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let body = s.strip_prefix("polygon:").unwrap_or(s);
        if body.starts_with(|c: char| c.is_ascii_digit()) {
            let (n, deg) = match body.split_once('@') {
                Some((n, d)) => (
                    n,
                    d.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad orientation in `{s}`")))?,
                ),
                None => (body, 0.0),
            };
            let n = n
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad outcome count in `{s}`")))?;
            return Ok(GeometrySpec::Polygon {
                n,
                orientation_deg: deg,
            });
        }
        s.parse::<Solid>().map(GeometrySpec::Solid)
    }
}

/// A prepared polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preparation {
    H,
    V,
    Plus,
    Minus,
    L,
    R,
    /// Octahedron face normal between `H`, `+` and `L`.
    Int,
    /// Linear polarization at this Hilbert-space angle (radians).
    Rotated(f64),
    Bloch([f64; 3]),
}

fn parse_angle(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("cannot parse angle `{s}`"));
    let s = s.trim();
    if let Some(d) = s.strip_suffix("deg") {
        return d
            .trim()
            .parse::<f64>()
            .map(f64::to_radians)
            .map_err(|_| bad());
    }
    let num = |t: &str| -> Result<f64> {
        match t.trim() {
            "pi" => Ok(std::f64::consts::PI),
            t => match t.strip_suffix("pi").or_else(|| t.strip_suffix("*pi")) {
                Some(k) => k
                    .trim_end_matches('*')
                    .parse::<f64>()
                    .map(|k| k * std::f64::consts::PI)
                    .map_err(|_| bad()),
                None => t.parse::<f64>().map_err(|_| bad()),
            },
        }
    };
    match s.split_once('/') {
        Some((a, b)) => {
            let d = num(b)?;
            if d == 0.0 {
                return Err(bad());
            }
            Ok(num(a)? / d)
        }
        None => num(s),
    }
}

impl FromStr for Preparation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "H" | "h" => Preparation::H,
            "V" | "v" => Preparation::V,
            "+" | "D" => Preparation::Plus,
            "-" | "A" => Preparation::Minus,
            "L" | "l" => Preparation::L,
            "R" | "r" => Preparation::R,
            "int" => Preparation::Int,
            _ => {
                if let Some(a) = s.strip_prefix("rot:") {
                    Preparation::Rotated(parse_angle(a)?)
                } else if let Some(v) = s.strip_prefix("bloch:") {
                    let parts: Vec<f64> = v
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Parse(format!("bad Bloch vector `{v}`")))?;
                    let arr: [f64; 3] = parts.try_into().map_err(|_| {
                        Error::Parse(format!("Bloch vector needs 3 components: `{v}`"))
                    })?;
                    Preparation::Bloch(arr)
                } else {
                    return Err(Error::Parse(format!("unknown preparation `{s}`")));
                }
            }
        })
    }
}

impl Preparation {
    pub fn bloch<T: Scalar>(&self) -> BlochVector<T> {
        let b = |x: f64, y: f64, z: f64| BlochVector::new(T::lit(x), T::lit(y), T::lit(z));
        match *self {
            Preparation::H => b(0.0, 0.0, 1.0),
            Preparation::V => b(0.0, 0.0, -1.0),
            Preparation::Plus => b(1.0, 0.0, 0.0),
            Preparation::Minus => b(-1.0, 0.0, 0.0),
            Preparation::L => b(0.0, 1.0, 0.0),
            Preparation::R => b(0.0, -1.0, 0.0),
            Preparation::Int => {
                let c = 1.0 / 3.0f64.sqrt();
                b(c, c, c)
            }
            Preparation::Rotated(theta) => {
                let phi = 2.0 * theta;
                b(phi.sin(), 0.0, phi.cos())
            }
            Preparation::Bloch([x, y, z]) => b(x, y, z),
        }
    }

    pub fn state<T: Scalar>(&self) -> Result<QubitState<T>> {
        QubitState::from_bloch(self.bloch())
    }

    /// Ket-style label, e.g. `|π/8⟩`.
    pub fn label(&self) -> String {
        match *self {
            Preparation::H => "|H⟩".into(),
            Preparation::V => "|V⟩".into(),
            Preparation::Plus => "|+⟩".into(),
            Preparation::Minus => "|−⟩".into(),
            Preparation::L => "|L⟩".into(),
            Preparation::R => "|R⟩".into(),
            Preparation::Int => "|int⟩".into(),
            Preparation::Rotated(t) => {
                let k = std::f64::consts::PI / t;
                if (k - k.round()).abs() < 1e-9 && k.round() != 0.0 {
                    format!("|π/{}⟩", k.round() as i64)
                } else {
                    format!("|{:.4}rad⟩", t)
                }
            }
            Preparation::Bloch([x, y, z]) => format!("r=({x},{y},{z})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub pair_rate_hz: f64,
    pub coincidences: u64,
    pub window_ns: f64,
    pub jitter_ps: f64,
    pub herald_efficiency: f64,
    pub accidental_rate_hz: f64,
    pub calibrated_accidental_rate_hz: f64,
}

impl SourceConfig {
    pub fn coincidence_config(&self) -> CoincidenceConfig {
        CoincidenceConfig {
            window_ps: self.window_ns * 1e3,
            herald_channel: 0,
        }
    }

    pub fn sim_config<T: Scalar>(
        &self,
        state: QubitState<T>,
        geometry: PovmGeometry<T>,
        seed: u64,
    ) -> SimConfig<T> {
        let mut c = SimConfig::new(state, geometry, seed);
        c.pair_rate = self.pair_rate_hz;
        c.length = RunLength::Coincidences(self.coincidences);
        c.window_ps = self.window_ns * 1e3;
        c.jitter_ps = self.jitter_ps;
        c.herald_efficiency = self.herald_efficiency;
        c.accidental_rate = self.accidental_rate_hz;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryEntry {
    #[serde(default)]
    pub polygon: Option<usize>,
    #[serde(default)]
    pub orientation_deg: f64,
    #[serde(default)]
    pub solid: Option<String>,
}

impl GeometryEntry {
    pub fn spec(&self) -> Result<GeometrySpec> {
        match (&self.polygon, &self.solid) {
            (Some(n), None) => Ok(GeometrySpec::Polygon {
                n: *n,
                orientation_deg: self.orientation_deg,
            }),
            (None, Some(s)) => Ok(GeometrySpec::Solid(s.parse()?)),
            _ => Err(Error::Parse(
                "geometry entry needs exactly one of `polygon` or `solid`".into(),
            )),
        }
    }
}

/// One row of a measurement table with the published numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub prep: String,
    /// Published min-entropy from the reconstructed state.
    pub h_a: f64,
    /// Published min-entropy of the prepared state.
    pub h_t: f64,
    /// Closed-form value when it differs from the rounded `h_t`.
    #[serde(default)]
    pub h_t_exact: Option<f64>,
    /// Rows at the maximum, where unmodelled noise moves `h_a`.
    #[serde(default)]
    pub near_max: bool,
}

impl TableRow {
    pub fn preparation(&self) -> Result<Preparation> {
        self.prep.parse()
    }

    /// Reference for the theory column.
    pub fn h_t_reference(&self) -> f64 {
        self.h_t_exact.unwrap_or(self.h_t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub id: String,
    pub geometry: String,
    pub caption: String,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub geometries: BTreeMap<String, GeometryEntry>,
    pub tables: Vec<TableSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_EXPERIMENT_TOML).expect("built-in experiment config parses")
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    fn validate(&self) -> Result<()> {
        for (name, g) in &self.geometries {
            g.spec()
                .map_err(|e| Error::Parse(format!("geometry {name}: {e}")))?;
        }
        for t in &self.tables {
            if !self.geometries.contains_key(&t.geometry) {
                return Err(Error::Parse(format!(
                    "table {} uses unknown geometry {}",
                    t.id, t.geometry
                )));
            }
            for r in &t.rows {
                r.preparation()?;
            }
        }
        Ok(())
    }

    pub fn table(&self, id: &str) -> Result<&TableSpec> {
        self.tables
            .iter()
            .find(|t| t.id.eq_ignore_ascii_case(id))
            .ok_or_else(|| Error::Parse(format!("unknown table `{id}`")))
    }

    /// Resolves a configured geometry name (`F3`, `S6`, ...) or a geometry
    /// string understood by [`GeometrySpec`].
    pub fn geometry_spec(&self, name: &str) -> Result<GeometrySpec> {
        match self.geometries.get(name) {
            Some(g) => g.spec(),
            None => name.parse(),
        }
    }
}
