//! Brute-force convex-hull facets for the handful of outcome directions a
//! qubit POVM has (N ≤ a few dozen).

use super::Facet;
use crate::bloch::BlochVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PLANE_TOL: f64 = 1e-9;

/// Facets (edges in the ZX plane, or faces in 3D) of the hull of `dirs`.
pub(crate) fn hull_facets<T: Scalar>(
    dirs: &[BlochVector<T>],
    planar: bool,
) -> Result<Vec<Facet<T>>> {
    let candidates = if planar {
        planar_candidates(dirs)
    } else {
        solid_candidates(dirs)
    };
    let tol = T::tol(PLANE_TOL);
    let mut facets: Vec<Facet<T>> = Vec::new();
    for (normal, offset) in candidates {
        if facets.iter().any(|f| f.normal.max_abs_diff(normal) <= tol) {
            continue;
        }
        if offset <= tol {
            return Err(Error::InvalidGeometry(
                "outcome directions do not surround the origin".into(),
            ));
        }
        let vertices: Vec<usize> = dirs
            .iter()
            .enumerate()
            .filter(|(_, a)| (a.dot(normal) - offset).abs() <= tol)
            .map(|(i, _)| i)
            .collect();
        let a0 = dirs[vertices[0]];
        let cos_alpha = (a0.dot(normal) / a0.norm()).max(-T::one()).min(T::one());
        facets.push(Facet {
            normal,
            alpha: cos_alpha.acos(),
            vertices,
        });
    }
    if facets.is_empty() {
        return Err(Error::InvalidGeometry("degenerate outcome hull".into()));
    }
    Ok(facets)
}

fn supporting<T: Scalar>(dirs: &[BlochVector<T>], normal: BlochVector<T>, offset: T) -> bool {
    let tol = T::tol(PLANE_TOL);
    dirs.iter().all(|v| v.dot(normal) <= offset + tol)
}

fn planar_candidates<T: Scalar>(dirs: &[BlochVector<T>]) -> Vec<(BlochVector<T>, T)> {
    let mut out = Vec::new();
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            let e = dirs[j] - dirs[i];
            let Some(n) = BlochVector::new(e.z, T::zero(), -e.x).normalized() else {
                continue;
            };
            for n in [n, -n] {
                let d = n.dot(dirs[i]);
                if supporting(dirs, n, d) {
                    out.push((n, d));
                }
            }
        }
    }
    out
}

fn solid_candidates<T: Scalar>(dirs: &[BlochVector<T>]) -> Vec<(BlochVector<T>, T)> {
    let mut out = Vec::new();
    let n = dirs.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let Some(nrm) = (dirs[j] - dirs[i]).cross(dirs[k] - dirs[i]).normalized() else {
                    continue;
                };
                for nrm in [nrm, -nrm] {
                    let d = nrm.dot(dirs[i]);
                    if supporting(dirs, nrm, d) {
                        out.push((nrm, d));
                    }
                }
            }
        }
    }
    out
}
