//! Motion-factorized deformation of canonical Gaussians from tabulated
//! basis motions and per-point coefficients.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GicError, Result};
use crate::geometry::{GaussianPoint, GaussianPointSet};
use crate::Vec3;

/// Lower bound applied to deformed scales.
pub const MIN_SCALE: f64 = 1e-6;
pub const DEFAULT_MOTION_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBasis {
    /// Position offset of this basis at the frame time.
    pub d_mu: Vec3,
    /// Scale offset of this basis at the frame time.
    pub d_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionBasisFrame {
    pub time: f64,
    pub bases: Vec<MotionBasis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFrame {
    pub time: f64,
    /// One weight vector per canonical point.
    pub weights: Vec<Vec<f64>>,
}

/// Moves every canonical Gaussian by the weighted sum of the basis motions.
/// Opacity and color are carried over unchanged.
pub fn compose_deformation(
    canonical: &GaussianPointSet,
    basis: &MotionBasisFrame,
    coeff: &CoefficientFrame,
) -> Result<GaussianPointSet> {
    if coeff.weights.len() != canonical.len() {
        return Err(GicError::invalid(format!(
            "{} weight vectors for {} canonical points",
            coeff.weights.len(),
            canonical.len()
        )));
    }
    let n_m = basis.bases.len();
    let points = canonical
        .points
        .iter()
        .zip(&coeff.weights)
        .enumerate()
        .map(|(i, (p, w))| {
            if w.len() != n_m {
                return Err(GicError::invalid(format!(
                    "point {i}: {} weights for {n_m} motion bases",
                    w.len()
                )));
            }
            let mut center = p.center;
            let mut scale = p.scale;
            for (wi, b) in w.iter().zip(&basis.bases) {
                center += b.d_mu * *wi;
                scale += wi * b.d_s;
            }
            Ok(GaussianPoint {
                center,
                scale: scale.max(MIN_SCALE),
                ..*p
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianPointSet::new(points))
}

#[derive(Serialize, Deserialize)]
struct TrackFile {
    n_m: usize,
    frames: Vec<TrackFrame>,
}

#[derive(Serialize, Deserialize)]
struct TrackFrame {
    t: f64,
    bases: Vec<TrackBasis>,
    weights: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TrackBasis {
    dmu: [f64; 3],
    ds: f64,
}

/// Parses a deformation track document. Frames come back sorted by time.
pub fn parse_deformation_track(
    text: &str,
    source_name: &str,
) -> Result<(Vec<MotionBasisFrame>, Vec<CoefficientFrame>)> {
    if text.trim().is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let parse_err = |location: String, message: String| GicError::Parse {
        source_name: source_name.to_string(),
        location,
        message,
    };
    let file: TrackFile = serde_json::from_str(text).map_err(|e| {
        parse_err(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;

    let mut frames = file.frames;
    frames.sort_by(|a, b| a.t.total_cmp(&b.t));
    let point_count = frames.first().map(|f| f.weights.len());
    let mut bases = Vec::with_capacity(frames.len());
    let mut coeffs = Vec::with_capacity(frames.len());
    for (n, f) in frames.into_iter().enumerate() {
        let loc = || format!("frame {n} (t = {})", f.t);
        if !f.t.is_finite() {
            return Err(parse_err(loc(), "non-finite time".into()));
        }
        if f.bases.len() != file.n_m {
            return Err(parse_err(
                loc(),
                format!("{} bases, expected n_m = {}", f.bases.len(), file.n_m),
            ));
        }
        if Some(f.weights.len()) != point_count {
            return Err(parse_err(loc(), "weight vector count differs between frames".into()));
        }
        if let Some(w) = f.weights.iter().find(|w| w.len() != file.n_m) {
            return Err(parse_err(
                loc(),
                format!("weight vector of length {}, expected {}", w.len(), file.n_m),
            ));
        }
        if f.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(parse_err(loc(), "non-finite weight".into()));
        }
        bases.push(MotionBasisFrame {
            time: f.t,
            bases: f
                .bases
                .iter()
                .map(|b| MotionBasis {
                    d_mu: Vec3::from(b.dmu),
                    d_s: b.ds,
                })
                .collect(),
        });
        coeffs.push(CoefficientFrame {
            time: f.t,
            weights: f.weights,
        });
    }
    Ok((bases, coeffs))
}

pub fn load_deformation_track(
    path: impl AsRef<Path>,
) -> Result<(Vec<MotionBasisFrame>, Vec<CoefficientFrame>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GicError::io(path, e))?;
    parse_deformation_track(&text, &path.display().to_string())
}

pub fn track_to_json(bases: &[MotionBasisFrame], coeffs: &[CoefficientFrame]) -> Result<String> {
    if bases.len() != coeffs.len() {
        return Err(GicError::invalid("basis and coefficient frame counts differ"));
    }
    let n_m = bases.first().map_or(DEFAULT_MOTION_COUNT, |b| b.bases.len());
    let file = TrackFile {
        n_m,
        frames: bases
            .iter()
            .zip(coeffs)
            .map(|(b, c)| TrackFrame {
                t: b.time,
                bases: b
                    .bases
                    .iter()
                    .map(|m| TrackBasis {
                        dmu: m.d_mu.into(),
                        ds: m.d_s,
                    })
                    .collect(),
                weights: c.weights.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| GicError::invalid(e.to_string()))
}

pub fn save_deformation_track(
    path: impl AsRef<Path>,
    bases: &[MotionBasisFrame],
    coeffs: &[CoefficientFrame],
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, track_to_json(bases, coeffs)?).map_err(|e| GicError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn canonical(n: usize, rng: &mut ChaCha8Rng) -> GaussianPointSet {
        GaussianPointSet::new(
            (0..n)
                .map(|_| {
                    GaussianPoint::new(
                        Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                        0.01 + rng.gen::<f64>() * 0.1,
                        rng.gen(),
                        [rng.gen(), rng.gen(), rng.gen()],
                    )
                })
                .collect(),
        )
    }

    fn random_frame(n: usize, n_m: usize, rng: &mut ChaCha8Rng) -> (MotionBasisFrame, CoefficientFrame) {
        let basis = MotionBasisFrame {
            time: 0.5,
            bases: (0..n_m)
                .map(|_| MotionBasis {
                    d_mu: Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    d_s: rng.gen_range(-0.01..0.01),
                })
                .collect(),
        };
        let coeff = CoefficientFrame {
            time: 0.5,
            weights: (0..n).map(|_| (0..n_m).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect(),
        };
        (basis, coeff)
    }

    #[test]
    fn zero_basis_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = canonical(20, &mut rng);
        let basis = MotionBasisFrame {
            time: 0.0,
            bases: vec![MotionBasis { d_mu: Vec3::zeros(), d_s: 0.0 }; 8],
        };
        let coeff = CoefficientFrame {
            time: 0.0,
            weights: vec![vec![0.3; 8]; 20],
        };
        assert_eq!(compose_deformation(&c, &basis, &coeff).unwrap(), c);
    }

    #[test]
    fn unit_weight_translates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = canonical(5, &mut rng);
        let basis = MotionBasisFrame {
            time: 0.0,
            bases: vec![MotionBasis { d_mu: Vec3::x(), d_s: 0.0 }],
        };
        let coeff = CoefficientFrame {
            time: 0.0,
            weights: vec![vec![1.0]; 5],
        };
        let out = compose_deformation(&c, &basis, &coeff).unwrap();
        for (a, b) in out.points.iter().zip(&c.points) {
            assert_eq!(a.center, b.center + Vec3::x());
            assert_eq!(a.opacity, b.opacity);
        }
    }

    #[test]
    fn matches_explicit_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = canonical(30, &mut rng);
        let (basis, coeff) = random_frame(30, 8, &mut rng);
        let out = compose_deformation(&c, &basis, &coeff).unwrap();
        for (n, p) in out.points.iter().enumerate() {
            for axis in 0..3 {
                let mut expect = c.points[n].center[axis];
                for m in 0..8 {
                    expect += coeff.weights[n][m] * basis.bases[m].d_mu[axis];
                }
                assert!((p.center[axis] - expect).abs() < 1e-12);
            }
            let s: f64 = c.points[n].scale
                + (0..8).map(|m| coeff.weights[n][m] * basis.bases[m].d_s).sum::<f64>();
            assert!((p.scale - s.max(MIN_SCALE)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = canonical(3, &mut rng);
        let (basis, mut coeff) = random_frame(3, 8, &mut rng);
        coeff.weights[1].pop();
        assert!(compose_deformation(&c, &basis, &coeff).is_err());
        coeff.weights.pop();
        assert!(compose_deformation(&c, &basis, &coeff).is_err());
    }

    #[test]
    fn track_parsing() {
        assert_eq!(parse_deformation_track("  ", "empty").unwrap(), (vec![], vec![]));
        let bad = r#"{"n_m": 2, "frames": [
            {"t": 0.0, "bases": [{"dmu": [0,0,0], "ds": 0}, {"dmu": [0,0,0], "ds": 0}], "weights": [[1, 2]]},
            {"t": 0.1, "bases": [{"dmu": [0,0,0], "ds": 0}], "weights": [[1, 2]]}
        ]}"#;
        let err = parse_deformation_track(bad, "bad.json").unwrap_err();
        assert!(err.to_string().contains("frame 1"), "{err}");
        let err = parse_deformation_track("{\"n_m\": 2,", "trunc.json").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn track_round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bases = Vec::new();
        let mut coeffs = Vec::new();
        for n in 0..4 {
            let (mut b, mut c) = random_frame(6, 8, &mut rng);
            b.time = 0.75 - n as f64 * 0.25;
            c.time = b.time;
            bases.push(b);
            coeffs.push(c);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("track.json");
        save_deformation_track(&path, &bases, &coeffs).unwrap();
        let (b2, c2) = load_deformation_track(&path).unwrap();
        bases.reverse();
        coeffs.reverse();
        assert_eq!(b2, bases);
        assert_eq!(c2, coeffs);
    }

    proptest! {
        #[test]
        fn position_channel_is_linear_in_basis_scale(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = canonical(8, &mut rng);
            let (basis, coeff) = random_frame(8, 4, &mut rng);
            let scaled = |s: f64| MotionBasisFrame {
                time: basis.time,
                bases: basis.bases.iter().map(|m| MotionBasis { d_mu: m.d_mu * s, d_s: m.d_s * s }).collect(),
            };
            let pa = compose_deformation(&c, &scaled(a), &coeff).unwrap();
            let pb = compose_deformation(&c, &scaled(b), &coeff).unwrap();
            let pab = compose_deformation(&c, &scaled(a + b), &coeff).unwrap();
            for n in 0..8 {
                let lhs = pa.points[n].center + pb.points[n].center - c.points[n].center;
                prop_assert!((lhs - pab.points[n].center).norm() < 1e-9);
                prop_assert!(pab.points[n].scale >= MIN_SCALE);
            }
        }
    }
}
