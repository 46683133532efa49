//! Synthetic fault benchmark: a two-panel piecewise-affine surface buried
//! under a horizontal square, controlled by six depth parameters, with a
//! full-space elastostatic point-force kernel for the forward matrix, a
//! derivative-penalty regularizer on the source lattice, thrust-oriented
//! slip synthesis, and noisy surface data generation.

use crate::error::{Error, Result};
use crate::linalg::banded::BandedSpd;
use crate::linalg::{ForwardOperator, RegularizerGram};
use crate::posterior::{OperatorFactory, PriorSpec};
use crate::rng::{substream, DOMAIN_NOISE, DOMAIN_STATIONS};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::sync::Arc;

/// Horizontal footprint: the square [S_MIN, S_MAX]^2, in km.
pub const S_MIN: f64 = -100.0;
pub const S_MAX: f64 = 200.0;

/// Depth parameters of the reference geometry used to generate data.
pub const FAULT_TRUE_M: [f64; 6] = [24.0, 145.0, -40.0, 8.0, -40.0, -50.0];

/// Affine panel z = a + b x1 + c x2.
#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    c: f64,
}

impl Panel {
    fn depth(&self, x1: f64, x2: f64) -> f64 {
        self.a + self.b * x1 + self.c * x2
    }

    /// Upward unit normal.
    fn normal(&self) -> [f64; 3] {
        let norm = (1.0 + self.b * self.b + self.c * self.c).sqrt();
        [-self.b / norm, -self.c / norm, 1.0 / norm]
    }

    /// Area element of the graph over the horizontal plane.
    fn area_jacobian(&self) -> f64 {
        (1.0 + self.b * self.b + self.c * self.c).sqrt()
    }
}

fn panel_through(p: [f64; 3], q: [f64; 3], r: [f64; 3]) -> Result<Panel> {
    let d1 = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let d2 = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let cross = [
        d1[1] * d2[2] - d1[2] * d2[1],
        d1[2] * d2[0] - d1[0] * d2[2],
        d1[0] * d2[1] - d1[1] * d2[0],
    ];
    let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let n1 = (d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]).sqrt();
    let n2 = (d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]).sqrt();
    if cross_norm <= 1e-12 * n1 * n2 {
        return Err(Error::DegenerateGeometry {
            detail: "collinear control points".into(),
        });
    }
    let det = d1[0] * d2[1] - d2[0] * d1[1];
    if det.abs() <= 1e-12 * n1 * n2 {
        return Err(Error::DegenerateGeometry {
            detail: "vertical panel, depth is not a graph".into(),
        });
    }
    let b = (d1[2] * d2[1] - d2[2] * d1[1]) / det;
    let c = (d1[0] * d2[2] - d2[0] * d1[2]) / det;
    let a = p[2] - b * p[0] - c * p[1];
    Ok(Panel { a, b, c })
}

/// The fault surface: two affine panels glued along the segment from
/// (S_MIN, m2) to (S_MAX, m4) in the horizontal plane. Points with
/// x2 at or below the segment belong to the first panel.
#[derive(Clone, Debug)]
pub struct FaultGeometry {
    control_points: [[f64; 3]; 6],
    panel1: Panel,
    panel2: Panel,
    m2: f64,
    m4: f64,
    cos_dihedral: f64,
}

impl FaultGeometry {
    /// The six corner points P1..P6.
    pub fn control_points(&self) -> &[[f64; 3]; 6] {
        &self.control_points
    }

    /// Horizontal coordinate of the panel divide at x1.
    pub fn divide(&self, x1: f64) -> f64 {
        self.m2 + (x1 - S_MIN) / (S_MAX - S_MIN) * (self.m4 - self.m2)
    }

    fn panel_at(&self, x1: f64, x2: f64) -> &Panel {
        if x2 <= self.divide(x1) {
            &self.panel1
        } else {
            &self.panel2
        }
    }

    pub fn depth(&self, x1: f64, x2: f64) -> f64 {
        self.panel_at(x1, x2).depth(x1, x2)
    }

    /// Upward unit normal of the panel containing (x1, x2).
    pub fn normal(&self, x1: f64, x2: f64) -> [f64; 3] {
        self.panel_at(x1, x2).normal()
    }

    pub fn cos_dihedral(&self) -> f64 {
        self.cos_dihedral
    }

    fn slopes(&self, x1: f64, x2: f64) -> (f64, f64) {
        let panel = self.panel_at(x1, x2);
        (panel.b, panel.c)
    }

    fn area_jacobian(&self, x1: f64, x2: f64) -> f64 {
        self.panel_at(x1, x2).area_jacobian()
    }

    /// Unit tangent pointing in the steepest-descent direction; on a
    /// horizontal panel the fallback direction (0, 1, 0) is returned and the
    /// flag reports the degeneracy to the caller.
    pub fn thrust_direction(&self, x1: f64, x2: f64) -> ([f64; 3], bool) {
        let (b, c) = self.slopes(x1, x2);
        let g2 = b * b + c * c;
        if g2 < 1e-28 {
            return ([0.0, 1.0, 0.0], true);
        }
        let norm = (g2 + g2 * g2).sqrt();
        ([-b / norm, -c / norm, -g2 / norm], false)
    }
}

/// Builds the surface from the six depth controls: P1 = (S_MIN, S_MIN, m1),
/// P2 = (S_MIN, m2, m3), P3 = (S_MAX, m4, m5), P4 = (S_MAX, S_MAX, m6), with
/// P5 and P6 the affine extensions of the panels to the remaining corners.
pub fn geometry_from_m(m: &[f64]) -> Result<FaultGeometry> {
    if m.len() != 6 {
        return Err(Error::DimensionMismatch {
            context: "geometry_from_m",
            expected: 6,
            got: m.len(),
        });
    }
    for &v in m {
        if !v.is_finite() || v.abs() > 200.0 {
            return Err(Error::InvalidParameter {
                detail: format!("depth control {v} outside [-200, 200]"),
            });
        }
    }
    let (m2, m4) = (m[1], m[3]);
    if m2 <= S_MIN || m2 >= S_MAX || m4 <= S_MIN || m4 >= S_MAX {
        return Err(Error::InvalidParameter {
            detail: format!(
                "divide endpoints m2 = {m2}, m4 = {m4} must lie strictly inside ({S_MIN}, {S_MAX})"
            ),
        });
    }
    let p1 = [S_MIN, S_MIN, m[0]];
    let p2 = [S_MIN, m2, m[2]];
    let p3 = [S_MAX, m4, m[4]];
    let p4 = [S_MAX, S_MAX, m[5]];
    let panel1 = panel_through(p1, p2, p3)?;
    let panel2 = panel_through(p2, p3, p4)?;
    let p5 = [S_MAX, S_MIN, panel1.depth(S_MAX, S_MIN)];
    let p6 = [S_MIN, S_MAX, panel2.depth(S_MIN, S_MAX)];
    let n1 = panel1.normal();
    let n2 = panel2.normal();
    let cos_dihedral = n1[0] * n2[0] + n1[1] * n2[1] + n1[2] * n2[2];
    Ok(FaultGeometry {
        control_points: [p1, p2, p3, p4, p5, p6],
        panel1,
        panel2,
        m2,
        m4,
        cos_dihedral,
    })
}

/// Lattice abscissas of the regular grid over [S_MIN, S_MAX].
pub fn lattice_points(grid_m: usize) -> Vec<f64> {
    let h = (S_MAX - S_MIN) / (grid_m - 1) as f64;
    (0..grid_m).map(|i| S_MIN + i as f64 * h).collect()
}

fn trapezoid_line_weights(grid_m: usize) -> Vec<f64> {
    let h = (S_MAX - S_MIN) / (grid_m - 1) as f64;
    (0..grid_m)
        .map(|i| {
            if i == 0 || i == grid_m - 1 {
                0.5 * h
            } else {
                h
            }
        })
        .collect()
}

/// Point-force amplitude per unit of slip in the simplified source model.
/// The value sets the overall operator scale and with it the location of the
/// evidence-optimal regularization weight; it is chosen so that for the
/// reference geometry the optimum falls inside the hyperparameter prior
/// range at both noise levels (about 10^-2.9 at 5% noise, 10^-1.2 at 25%).
pub const SLIP_FORCE_COUPLING: f64 = 0.03;

/// Full-space elastostatic displacement at offset r from a point force f,
/// for a Poisson solid with unit moduli:
/// u = (2 f + r_hat (r_hat . f)) / (12 pi |r|).
pub fn kelvin_displacement(r: [f64; 3], f: [f64; 3]) -> [f64; 3] {
    let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let rh = [r[0] / rn, r[1] / rn, r[2] / rn];
    let rf = rh[0] * f[0] + rh[1] * f[1] + rh[2] * f[2];
    let scale = 1.0 / (12.0 * std::f64::consts::PI * rn);
    [
        scale * (2.0 * f[0] + rh[0] * rf),
        scale * (2.0 * f[1] + rh[1] * rf),
        scale * (2.0 * f[2] + rh[2] * rf),
    ]
}

/// Forward matrix mapping per-node slip magnitudes on the grid_m x grid_m
/// lattice (node k = iy * grid_m + ix) to three displacement components per
/// station. Each column carries the node's quadrature weight, area element,
/// thrust direction, and the slip-to-force coupling; nodes at or above the
/// free surface contribute nothing.
pub fn build_forward_matrix(
    geom: &FaultGeometry,
    grid_m: usize,
    stations: &[[f64; 2]],
) -> Result<ForwardOperator> {
    if grid_m < 2 {
        return Err(Error::InvalidParameter {
            detail: format!("grid side {grid_m} must be at least 2"),
        });
    }
    if stations.is_empty() {
        return Err(Error::InvalidParameter {
            detail: "no stations".into(),
        });
    }
    let p = grid_m * grid_m;
    let xs = lattice_points(grid_m);
    let tw = trapezoid_line_weights(grid_m);

    let mut sources: Vec<Option<([f64; 3], [f64; 3])>> = Vec::with_capacity(p);
    let mut fallbacks = 0usize;
    for iy in 0..grid_m {
        for ix in 0..grid_m {
            let (x1, x2) = (xs[ix], xs[iy]);
            let z = geom.depth(x1, x2);
            if z >= 0.0 {
                sources.push(None);
                continue;
            }
            let (dir, fell_back) = geom.thrust_direction(x1, x2);
            if fell_back {
                fallbacks += 1;
            }
            let w = tw[ix] * tw[iy] * geom.area_jacobian(x1, x2) * SLIP_FORCE_COUPLING;
            sources.push(Some(([x1, x2, z], [w * dir[0], w * dir[1], w * dir[2]])));
        }
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} horizontal lattice nodes use the fallback thrust direction");
    }

    let rows: Vec<[Vec<f64>; 3]> = stations
        .par_iter()
        .map(|station| {
            let mut block = [vec![0.0; p], vec![0.0; p], vec![0.0; p]];
            for (k, src) in sources.iter().enumerate() {
                if let Some((pos, force)) = src {
                    let r = [station[0] - pos[0], station[1] - pos[1], -pos[2]];
                    let u = kelvin_displacement(r, *force);
                    block[0][k] = u[0];
                    block[1][k] = u[1];
                    block[2][k] = u[2];
                }
            }
            block
        })
        .collect();

    let mut matrix = Array2::zeros((3 * stations.len(), p));
    for (s, block) in rows.iter().enumerate() {
        for comp in 0..3 {
            for k in 0..p {
                matrix[[3 * s + comp, k]] = block[comp][k];
            }
        }
    }
    ForwardOperator::from_dense(matrix)
}

/// Derivative-penalty gram D'D + E'E on the lattice, where D differences
/// consecutive nodes along every x1-line and E along every x2-line, each
/// line closed by an identity row on its first node.
pub fn build_regularizer_gram(grid_m: usize) -> Result<RegularizerGram> {
    if grid_m < 2 {
        return Err(Error::InvalidParameter {
            detail: format!("grid side {grid_m} must be at least 2"),
        });
    }
    let p = grid_m * grid_m;
    let mut banded = BandedSpd::zeros(p, grid_m);
    for iy in 0..grid_m {
        for ix in 0..grid_m {
            let k = iy * grid_m + ix;
            banded.add(k, k, if ix == 0 { 1.0 } else { 2.0 });
            if ix + 1 < grid_m {
                banded.add(k + 1, k, -1.0);
            }
            banded.add(k, k, if iy == 0 { 1.0 } else { 2.0 });
            if iy + 1 < grid_m {
                banded.add(k + grid_m, k, -1.0);
            }
        }
    }
    RegularizerGram::banded(banded)
}

/// Compactly supported radial bump for the synthetic slip modulus.
#[derive(Clone, Copy, Debug)]
pub struct SlipShape {
    pub center: (f64, f64),
    pub radius: f64,
    pub amplitude: f64,
}

/// Slip magnitudes and unit thrust directions on the lattice.
#[derive(Clone, Debug)]
pub struct SlipField {
    pub grid_m: usize,
    pub values: Vec<f64>,
    pub directions: Vec<[f64; 3]>,
}

/// Samples amplitude * cos^2(pi r / (2 radius)) inside the radius, zero
/// outside, onto the lattice, with per-node steepest-descent directions.
pub fn synthesize_slip(
    geom: &FaultGeometry,
    grid_m: usize,
    shape: &SlipShape,
) -> Result<SlipField> {
    if grid_m < 2 {
        return Err(Error::InvalidParameter {
            detail: format!("grid side {grid_m} must be at least 2"),
        });
    }
    if !(shape.radius > 0.0) || !(shape.amplitude >= 0.0) {
        return Err(Error::InvalidParameter {
            detail: "slip bump needs a positive radius and nonnegative amplitude".into(),
        });
    }
    let (cx, cy) = shape.center;
    if cx - shape.radius <= S_MIN
        || cx + shape.radius >= S_MAX
        || cy - shape.radius <= S_MIN
        || cy + shape.radius >= S_MAX
    {
        return Err(Error::InvalidParameter {
            detail: "slip bump support must lie strictly inside the footprint".into(),
        });
    }
    let xs = lattice_points(grid_m);
    let mut values = Vec::with_capacity(grid_m * grid_m);
    let mut directions = Vec::with_capacity(grid_m * grid_m);
    let mut fallbacks = 0usize;
    for iy in 0..grid_m {
        for ix in 0..grid_m {
            let (x1, x2) = (xs[ix], xs[iy]);
            let r = ((x1 - cx).powi(2) + (x2 - cy).powi(2)).sqrt();
            let v = if r < shape.radius {
                let t = (std::f64::consts::FRAC_PI_2 * r / shape.radius).cos();
                shape.amplitude * t * t
            } else {
                0.0
            };
            values.push(v);
            let (dir, fell_back) = geom.thrust_direction(x1, x2);
            if fell_back {
                fallbacks += 1;
            }
            directions.push(dir);
        }
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} slip nodes use the fallback thrust direction");
    }
    Ok(SlipField {
        grid_m,
        values,
        directions,
    })
}

/// Noise level as a fraction of the peak free-surface response.
#[derive(Clone, Copy, Debug)]
pub struct NoiseScenario {
    pub label: &'static str,
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseScenario {
    pub fn low(seed: u64) -> Self {
        NoiseScenario {
            label: "low",
            fraction: 0.05,
            seed,
        }
    }

    pub fn high(seed: u64) -> Self {
        NoiseScenario {
            label: "high",
            fraction: 0.25,
            seed,
        }
    }
}

/// Noise-free response, noisy data, the noise scale used, and the realized
/// relative data error.
#[derive(Clone, Debug)]
pub struct GeneratedData {
    pub u_free: Array1<f64>,
    pub u: Array1<f64>,
    pub sigma: f64,
    pub realized_relative_error: f64,
}

/// Applies the forward matrix of the slip field's own lattice to its values
/// and adds white noise with sigma = fraction * max |u_free|.
pub fn generate_data(
    geom: &FaultGeometry,
    slip: &SlipField,
    stations: &[[f64; 2]],
    scenario: &NoiseScenario,
) -> Result<GeneratedData> {
    if !(scenario.fraction > 0.0) || !scenario.fraction.is_finite() {
        return Err(Error::InvalidParameter {
            detail: format!("noise fraction must be positive, got {}", scenario.fraction),
        });
    }
    let op = build_forward_matrix(geom, slip.grid_m, stations)?;
    let g = Array1::from_vec(slip.values.clone());
    let u_free = op.apply(&g.view());
    let peak = u_free.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::InvalidParameter {
            detail: "free-surface response is identically zero".into(),
        });
    }
    let sigma = scenario.fraction * peak;
    let mut rng = substream(scenario.seed, 0, 0, DOMAIN_NOISE);
    let noise = Array1::from_shape_fn(u_free.len(), |_| {
        sigma * rng.sample::<f64, _>(StandardNormal)
    });
    let u = &u_free + &noise;
    let realized_relative_error =
        noise.dot(&noise).sqrt() / u_free.dot(&u_free).sqrt();
    Ok(GeneratedData {
        u_free,
        u,
        sigma,
        realized_relative_error,
    })
}

/// Uniform prior over the depth box, restricted to buildable geometries with
/// divide endpoints strictly inside the footprint and a dihedral cosine of
/// at least 0.8; log10 alpha uniform on [-5, 0].
pub fn fault_prior() -> PriorSpec {
    PriorSpec::new(vec![(-200.0, 200.0); 6], (-5.0, 0.0))
        .expect("static prior box")
        .with_support(Arc::new(|m: &[f64]| {
            m[1] > S_MIN
                && m[1] < S_MAX
                && m[3] > S_MIN
                && m[3] < S_MAX
                && geometry_from_m(m)
                    .map(|g| g.cos_dihedral() >= 0.8)
                    .unwrap_or(false)
        }))
}

/// Quasi-uniform station layout: a ceil(sqrt(count)) grid of cell centers
/// over the footprint, jittered by up to a quarter cell per coordinate.
pub fn jittered_stations(count: usize, seed: u64) -> Vec<[f64; 2]> {
    assert!(count >= 1, "need at least one station");
    let side = (count as f64).sqrt().ceil() as usize;
    let cell = (S_MAX - S_MIN) / side as f64;
    let mut rng = substream(seed, 0, 0, DOMAIN_STATIONS);
    let mut stations = Vec::with_capacity(count);
    'outer: for iy in 0..side {
        for ix in 0..side {
            if stations.len() == count {
                break 'outer;
            }
            let jx = (rng.random::<f64>() - 0.5) * 0.5 * cell;
            let jy = (rng.random::<f64>() - 0.5) * 0.5 * cell;
            stations.push([
                S_MIN + (ix as f64 + 0.5) * cell + jx,
                S_MIN + (iy as f64 + 0.5) * cell + jy,
            ]);
        }
    }
    stations
}

/// Operator family m -> forward matrix at fixed lattice and stations.
pub fn fault_operator_factory(grid_m: usize, stations: Vec<[f64; 2]>) -> OperatorFactory {
    Arc::new(move |m: &[f64]| {
        let geom = geometry_from_m(m)?;
        build_forward_matrix(&geom, grid_m, &stations)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_geometry_is_a_single_horizontal_plane() {
        let d = -35.0;
        let geom = geometry_from_m(&[d, 0.0, d, 0.0, d, d]).unwrap();
        assert_eq!(geom.cos_dihedral(), 1.0);
        for (x1, x2) in [(-100.0, -100.0), (50.0, 10.0), (200.0, 200.0), (0.0, -70.0)] {
            assert_eq!(geom.depth(x1, x2), d);
            assert_eq!(geom.normal(x1, x2), [0.0, 0.0, 1.0]);
        }
        let (dir, fell_back) = geom.thrust_direction(0.0, 0.0);
        assert!(fell_back);
        assert_eq!(dir, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn divide_boundary_values_are_rejected() {
        assert!(matches!(
            geometry_from_m(&[0.0, -100.0, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            geometry_from_m(&[0.0, 0.0, 0.0, 200.0, 0.0, 0.0]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            geometry_from_m(&[0.0, 0.0, 0.0], ),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            geometry_from_m(&[500.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn kernel_decays_with_the_inverse_first_power() {
        let f = [0.3, 0.9, -0.1];
        let u1 = kelvin_displacement([0.0, 0.0, 10.0], f);
        let u2 = kelvin_displacement([0.0, 0.0, 20.0], f);
        for comp in 0..3 {
            if u1[comp].abs() > 1e-12 {
                let exponent = (u1[comp] / u2[comp]).abs().ln() / 2f64.ln();
                assert!(
                    (exponent - 1.0).abs() < 1e-6,
                    "component {comp} exponent {exponent}"
                );
            }
        }
    }

    #[test]
    fn kernel_horizontal_components_are_antisymmetric_under_reflection() {
        let f = [0.0, 1.0, 0.0];
        let depth = 25.0;
        for s in [5.0, 17.0, 60.0] {
            let plus = kelvin_displacement([s, 0.0, depth], f);
            let minus = kelvin_displacement([-s, 0.0, depth], f);
            assert!((plus[0] + minus[0]).abs() < 1e-15);
            assert!((plus[1] - minus[1]).abs() < 1e-15);
            assert!((plus[2] - minus[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_field_gram_energy_counts_the_line_closures() {
        for grid_m in [2, 3, 5, 8] {
            let gram = build_regularizer_gram(grid_m).unwrap();
            let c = 1.5;
            let g = Array1::from_elem(grid_m * grid_m, c);
            let energy = g.dot(&gram.apply(&g.view()));
            let want = 2.0 * grid_m as f64 * c * c;
            assert!(
                (energy - want).abs() < 1e-12 * want,
                "grid {grid_m}: {energy} vs {want}"
            );
        }
    }

    #[test]
    fn slip_bump_hits_amplitude_at_center_and_vanishes_outside() {
        let geom = geometry_from_m(&FAULT_TRUE_M).unwrap();
        let grid_m = 31;
        let shape = SlipShape {
            center: (50.0, 50.0),
            radius: 80.0,
            amplitude: 1.0,
        };
        let slip = synthesize_slip(&geom, grid_m, &shape).unwrap();
        let xs = lattice_points(grid_m);
        let center_idx = xs.iter().position(|x| (x - 50.0).abs() < 1e-9).unwrap();
        let k = center_idx * grid_m + center_idx;
        assert_eq!(slip.values[k], 1.0);
        for iy in 0..grid_m {
            for ix in 0..grid_m {
                let r = ((xs[ix] - 50.0).powi(2) + (xs[iy] - 50.0).powi(2)).sqrt();
                let v = slip.values[iy * grid_m + ix];
                assert!(v >= 0.0);
                if r >= 80.0 {
                    assert_eq!(v, 0.0, "node ({ix},{iy}) at r={r}");
                }
            }
        }
        let zero = synthesize_slip(
            &geom,
            grid_m,
            &SlipShape {
                center: (50.0, 50.0),
                radius: 80.0,
                amplitude: 0.0,
            },
        )
        .unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        assert!(synthesize_slip(
            &geom,
            grid_m,
            &SlipShape {
                center: (150.0, 50.0),
                radius: 80.0,
                amplitude: 1.0,
            }
        )
        .is_err());
    }

    #[test]
    fn thrust_directions_are_unit_tangents() {
        let geom = geometry_from_m(&FAULT_TRUE_M).unwrap();
        let xs = lattice_points(9);
        for &x1 in &xs {
            for &x2 in &xs {
                let (dir, fell_back) = geom.thrust_direction(x1, x2);
                assert!(!fell_back);
                let norm =
                    (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
                let n = geom.normal(x1, x2);
                let along = dir[0] * n[0] + dir[1] * n[1] + dir[2] * n[2];
                assert!(along.abs() < 1e-10, "normal component {along}");
                assert!(dir[2] < 0.0, "thrust must point downhill");
            }
        }
    }

    #[test]
    fn station_layout_is_deterministic_and_inside_the_footprint() {
        let a = jittered_stations(65, 7);
        let b = jittered_stations(65, 7);
        assert_eq!(a.len(), 65);
        assert_eq!(a, b);
        let c = jittered_stations(65, 8);
        assert_ne!(a, c);
        for s in &a {
            assert!(s[0] > S_MIN && s[0] < S_MAX);
            assert!(s[1] > S_MIN && s[1] < S_MAX);
        }
    }

    #[test]
    fn prior_support_accepts_the_reference_and_rejects_folds() {
        let prior = fault_prior();
        assert!(prior.contains_m(&FAULT_TRUE_M));
        assert!(prior.contains_m(&[-35.0, 0.0, -35.0, 0.0, -35.0, -35.0]));
        // Right-angle fold: panels with slopes -1 and +1 along x2.
        assert!(!prior.contains_m(&[0.0, 50.0, -150.0, 50.0, -150.0, 0.0]));
        assert!(!prior.contains_m(&[0.0, -100.0, 0.0, 0.0, 0.0, 0.0]));
        assert!(!prior.contains_m(&[300.0, 0.0, -10.0, 0.0, -10.0, -10.0]));
    }

    #[test]
    fn surface_nodes_above_ground_contribute_zero_columns() {
        // Reference geometry outcrops near P1, so some nodes clip away.
        let geom = geometry_from_m(&FAULT_TRUE_M).unwrap();
        let grid_m = 11;
        let stations = jittered_stations(4, 3);
        let op = build_forward_matrix(&geom, grid_m, &stations).unwrap();
        assert_eq!(op.n(), 12);
        assert_eq!(op.p(), 121);
        let xs = lattice_points(grid_m);
        let mut clipped = 0;
        for iy in 0..grid_m {
            for ix in 0..grid_m {
                if geom.depth(xs[ix], xs[iy]) >= 0.0 {
                    clipped += 1;
                    let col = op.matrix().column(iy * grid_m + ix);
                    assert!(col.iter().all(|v| *v == 0.0));
                }
            }
        }
        assert!(clipped > 0, "reference geometry should outcrop");
        assert!(op.matrix().iter().all(|v| v.is_finite()));
    }
}
