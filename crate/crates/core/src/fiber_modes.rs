//! Step-index fiber LP modes under the weak-guidance approximation: the V
//! number, the characteristic-equation solver, and sampled mode fields.

use std::f64::consts::PI;
use std::fmt;

use crate::bessel::{bessel_j, bessel_k, bessel_k_ratio};
use crate::error::{Error, Result};
use crate::par;

/// Scan density for the characteristic-equation sign search.
const SCAN_SAMPLES: usize = 2000;
const MAX_BISECTIONS: usize = 200;
const ROOT_TOLERANCE: f64 = 1e-12;
const TAIL_SAMPLES: usize = 200;
const TAIL_MIN_W: f64 = 1e-300;
/// Relative norm drift between the full grid and its 2x-decimated subgrid
/// beyond which a mode is considered under-sampled.
const MAX_SAMPLING_DRIFT: f64 = 0.05;

/// Normalized frequency `2 pi a NA / lambda`.
pub fn v_number(core_radius: f64, numerical_aperture: f64, wavelength: f64) -> f64 {
    2.0 * PI * core_radius * numerical_aperture / wavelength
}

/// Physical fiber parameters. Lengths are in micrometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    core_radius: f64,
    numerical_aperture: f64,
    wavelength: f64,
}

impl FiberSpec {
    pub fn new(core_radius: f64, numerical_aperture: f64, wavelength: f64) -> Result<Self> {
        for (name, v) in [
            ("core_radius", core_radius),
            ("numerical_aperture", numerical_aperture),
            ("wavelength", wavelength),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidFiber(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            core_radius,
            numerical_aperture,
            wavelength,
        })
    }

    /// 25 um core diameter, 0.08 NA, 1064 nm: guides ten LP modes.
    pub fn ten_mode() -> Self {
        Self::new(12.5, 0.08, 1.064).expect("valid preset")
    }

    /// 8.2 um core diameter, 0.14 NA, 1073 nm: guides LP01 and LP11.
    pub fn three_mode() -> Self {
        Self::new(4.1, 0.14, 1.073).expect("valid preset")
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }

    pub fn numerical_aperture(&self) -> f64 {
        self.numerical_aperture
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn v_number(&self) -> f64 {
        v_number(self.core_radius, self.numerical_aperture, self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    /// cos(l phi)
    Even,
    /// sin(l phi)
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeId {
    pub l: u32,
    pub m: u32,
    pub parity: Parity,
}

impl ModeId {
    pub fn new(l: u32, m: u32, parity: Parity) -> Self {
        // LP0m has a single, circularly symmetric variant
        let parity = if l == 0 { Parity::Even } else { parity };
        Self { l, m, parity }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LP{}{}", self.l, self.m)?;
        match (self.l, self.parity) {
            (0, _) => Ok(()),
            (_, Parity::Even) => f.write_str("e"),
            (_, Parity::Odd) => f.write_str("o"),
        }
    }
}

/// One guided solution of the characteristic equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub mode: ModeId,
    /// core transverse parameter
    pub u: f64,
    /// cladding decay parameter
    pub w: f64,
}

impl ModeSolution {
    /// Unnormalized field at polar position (r in units of the core radius).
    pub fn field(&self, r_over_a: f64, phi: f64) -> f64 {
        let l = self.mode.l as i32;
        let radial = if r_over_a <= 1.0 {
            bessel_j(l, self.u * r_over_a)
        } else {
            bessel_j(l, self.u) * bessel_k(l, self.w * r_over_a) / bessel_k(l, self.w)
        };
        let angular = match (l, self.mode.parity) {
            (0, _) => 1.0,
            (_, Parity::Even) => (l as f64 * phi).cos(),
            (_, Parity::Odd) => (l as f64 * phi).sin(),
        };
        radial * angular
    }
}

/// Pole-free form of the characteristic equation, `f(u) * J_l(u)` where
/// `f(u) = u J_{l-1}(u)/J_l(u) + w K_{l-1}(w)/K_l(w)`.
fn characteristic(l: i32, u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).sqrt();
    u * bessel_j(l - 1, u) + w * bessel_k_ratio(l, w) * bessel_j(l, u)
}

/// Same function parameterized by the cladding parameter.
fn characteristic_w(l: i32, w: f64, v: f64) -> f64 {
    let u = (v * v - w * w).max(0.0).sqrt();
    u * bessel_j(l - 1, u) + w * bessel_k_ratio(l, w) * bessel_j(l, u)
}

/// Bisection in log(w) for roots squeezed against the cutoff u -> V.
fn bisect_log_w(l: i32, v: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = characteristic_w(l, lo.exp(), v);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f_mid = characteristic_w(l, mid.exp(), v);
        if f_mid == 0.0 {
            return mid.exp();
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn bisect(l: i32, v: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = characteristic(l, lo, v);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f_mid = characteristic(l, mid, v);
        let j = bessel_j(l, mid);
        if f_mid == 0.0 || (j != 0.0 && (f_mid / j).abs() < ROOT_TOLERANCE) {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Roots (u, w) of the order-`l` characteristic equation on (0, V), ascending in u.
fn roots_for_order(l: i32, v: f64) -> Vec<(f64, f64)> {
    let eps = 1e-7 * v;
    let step = (v - 2.0 * eps) / (SCAN_SAMPLES - 1) as f64;
    let mut roots = Vec::new();
    let mut prev_u = eps;
    let mut prev_f = characteristic(l, prev_u, v);
    for k in 1..SCAN_SAMPLES {
        let u = eps + k as f64 * step;
        let f = characteristic(l, u, v);
        if f == 0.0 {
            roots.push(u);
        } else if prev_f != 0.0 && (f < 0.0) != (prev_f < 0.0) {
            roots.push(bisect(l, v, prev_u, u));
        }
        prev_u = u;
        prev_f = f;
    }
    // Near cutoff the fundamental root approaches u = V exponentially fast in
    // 1/V^2, so continue with a log-spaced scan in w towards zero.
    let mut tail = Vec::new();
    let mut prev_lw = (v * v - prev_u * prev_u).sqrt().ln();
    let last_lw = TAIL_MIN_W.ln();
    for k in 1..=TAIL_SAMPLES {
        let lw = prev_lw + (last_lw - prev_lw) / (TAIL_SAMPLES + 1 - k) as f64;
        let f = characteristic_w(l, lw.exp(), v);
        if prev_f != 0.0 && f != 0.0 && (f < 0.0) != (prev_f < 0.0) {
            let w = bisect_log_w(l, v, prev_lw, lw);
            tail.push(w);
        }
        prev_lw = lw;
        prev_f = f;
    }
    roots
        .into_iter()
        .map(|u| (u, (v * v - u * u).sqrt()))
        .chain(tail.into_iter().map(|w| ((v * v - w * w).sqrt(), w)))
        .collect()
}

/// All guided LP modes, parity variants expanded, in canonical order:
/// ascending u (descending effective index), even before odd.
pub fn solve_modes(fiber: &FiberSpec) -> Result<Vec<ModeSolution>> {
    let v = fiber.v_number();
    let mut out = Vec::new();
    for l in 0u32.. {
        let roots = roots_for_order(l as i32, v);
        if roots.is_empty() {
            break;
        }
        for (idx, &(u, w)) in roots.iter().enumerate() {
            let m = idx as u32 + 1;
            let parities: &[Parity] = if l == 0 {
                &[Parity::Even]
            } else {
                &[Parity::Even, Parity::Odd]
            };
            for &p in parities {
                out.push(ModeSolution {
                    mode: ModeId::new(l, m, p),
                    u,
                    w,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoGuidedModes { v });
    }
    out.sort_by(|a, b| {
        a.u.total_cmp(&b.u)
            .then(a.mode.l.cmp(&b.mode.l))
            .then(a.mode.parity.cmp(&b.mode.parity))
    });
    Ok(out)
}

/// Square sampling window centred on the fiber axis. Pixel centres span
/// `[-W, W]` on both axes; row 0 is the top (`y = +W`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    resolution: usize,
    window_half_width: f64,
}

impl GridSpec {
    pub const MIN_RESOLUTION: usize = 16;
    /// Default window half-width in units of the core radius.
    pub const DEFAULT_WINDOW_FACTOR: f64 = 2.0;

    pub fn new(resolution: usize, window_half_width: f64) -> Result<Self> {
        if resolution < Self::MIN_RESOLUTION {
            return Err(Error::InvalidGrid(format!(
                "resolution {resolution} below minimum {}",
                Self::MIN_RESOLUTION
            )));
        }
        if !(window_half_width.is_finite() && window_half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "window half-width must be positive, got {window_half_width}"
            )));
        }
        Ok(Self {
            resolution,
            window_half_width,
        })
    }

    /// Window of `2 a` half-width for the given fiber.
    pub fn for_fiber(fiber: &FiberSpec, resolution: usize) -> Result<Self> {
        Self::new(resolution, Self::DEFAULT_WINDOW_FACTOR * fiber.core_radius())
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn window_half_width(&self) -> f64 {
        self.window_half_width
    }

    pub fn pixel_count(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn pitch(&self) -> f64 {
        2.0 * self.window_half_width / (self.resolution - 1) as f64
    }

    pub fn pixel_area(&self) -> f64 {
        let p = self.pitch();
        p * p
    }

    /// Physical (x, y) of pixel (row, col).
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        let p = self.pitch();
        let x = -self.window_half_width + col as f64 * p;
        let y = self.window_half_width - row as f64 * p;
        (x, y)
    }
}

#[derive(Debug, Clone)]
pub struct SampledMode {
    pub solution: ModeSolution,
    /// row-major `resolution x resolution` samples, normalized
    pub field: Vec<f64>,
    /// factor applied to `ModeSolution::field` to obtain `field`
    pub scale: f64,
}

impl SampledMode {
    pub fn id(&self) -> ModeId {
        self.solution.mode
    }
}

/// Discretely normalized LP mode fields on a grid.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    fiber: FiberSpec,
    grid: GridSpec,
    modes: Vec<SampledMode>,
}

impl ModeBasis {
    pub fn fiber(&self) -> &FiberSpec {
        &self.fiber
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> &[SampledMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn field(&self, k: usize) -> &[f64] {
        &self.modes[k].field
    }

    pub fn ids(&self) -> Vec<ModeId> {
        self.modes.iter().map(SampledMode::id).collect()
    }

    /// Normalized mode `k` at an arbitrary physical point.
    pub fn value_at(&self, k: usize, x: f64, y: f64) -> f64 {
        let m = &self.modes[k];
        let r = (x * x + y * y).sqrt() / self.fiber.core_radius();
        m.scale * m.solution.field(r, y.atan2(x))
    }

    /// Discrete inner product `sum psi_i psi_j dA`.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let dot: f64 = self.modes[i]
            .field
            .iter()
            .zip(&self.modes[j].field)
            .map(|(a, b)| a * b)
            .sum();
        dot * self.grid.pixel_area()
    }

    /// Full discrete Gram matrix, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.inner(i, j);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }
}

fn sample_mode(fiber: &FiberSpec, grid: &GridSpec, solution: ModeSolution) -> Result<SampledMode> {
    let res = grid.resolution();
    let a = fiber.core_radius();
    let rows = par::map_range(res, |row| {
        (0..res)
            .map(|col| {
                let (x, y) = grid.position(row, col);
                solution.field((x * x + y * y).sqrt() / a, y.atan2(x))
            })
            .collect::<Vec<_>>()
    });
    let mut field: Vec<f64> = rows.into_iter().flatten().collect();

    let area = grid.pixel_area();
    let norm: f64 = field.iter().map(|v| v * v).sum::<f64>() * area;
    let coarse: f64 = (0..res)
        .step_by(2)
        .flat_map(|r| (0..res).step_by(2).map(move |c| (r, c)))
        .map(|(r, c)| field[r * res + c].powi(2))
        .sum::<f64>()
        * area
        * 4.0;
    let drift = if norm > 0.0 { (coarse - norm).abs() / norm } else { f64::INFINITY };
    if !(norm.is_finite() && norm > 0.0) || drift > MAX_SAMPLING_DRIFT {
        return Err(Error::ResolutionTooCoarse {
            mode: solution.mode.to_string(),
            drift,
        });
    }
    let scale = norm.sqrt().recip();
    field.iter_mut().for_each(|v| *v *= scale);
    let check: f64 = field.iter().map(|v| v * v).sum::<f64>() * area;
    if (check - 1.0).abs() > 1e-6 {
        return Err(Error::ResolutionTooCoarse {
            mode: solution.mode.to_string(),
            drift: (check - 1.0).abs(),
        });
    }
    Ok(SampledMode {
        solution,
        field,
        scale,
    })
}

/// Samples the first `first_n` guided modes of `fiber` on `grid`.
pub fn sample_basis(fiber: &FiberSpec, grid: &GridSpec, first_n: usize) -> Result<ModeBasis> {
    if grid.window_half_width() < fiber.core_radius() {
        return Err(Error::InvalidGrid(format!(
            "window half-width {} smaller than core radius {}",
            grid.window_half_width(),
            fiber.core_radius()
        )));
    }
    let solutions = solve_modes(fiber)?;
    if first_n == 0 || first_n > solutions.len() {
        return Err(Error::InsufficientModes {
            requested: first_n,
            available: solutions.len(),
        });
    }
    let modes = solutions
        .into_iter()
        .take(first_n)
        .map(|s| sample_mode(fiber, grid, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeBasis {
        fiber: *fiber,
        grid: *grid,
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_number_values() {
        assert!((v_number(12.5, 0.08, 1.064) - 5.905).abs() < 0.01);
        assert!((v_number(4.1, 0.14, 1.073) - 3.361).abs() < 0.001);
        assert_eq!(v_number(1.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn rejects_nonpositive_fiber() {
        assert!(FiberSpec::new(0.0, 0.1, 1.0).is_err());
        assert!(FiberSpec::new(1.0, -0.1, 1.0).is_err());
        assert!(FiberSpec::new(1.0, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn ten_mode_fiber_order() {
        let modes = solve_modes(&FiberSpec::ten_mode()).unwrap();
        let names: Vec<String> = modes.iter().map(|m| m.mode.to_string()).collect();
        assert_eq!(
            names,
            [
                "LP01", "LP11e", "LP11o", "LP21e", "LP21o", "LP02", "LP31e", "LP31o", "LP12e",
                "LP12o"
            ]
        );
    }

    #[test]
    fn three_mode_fiber() {
        let modes = solve_modes(&FiberSpec::three_mode()).unwrap();
        let names: Vec<String> = modes.iter().map(|m| m.mode.to_string()).collect();
        assert_eq!(names, ["LP01", "LP11e", "LP11o"]);
    }

    // Independent count: sign changes of the pole-carrying form
    // u J_{l-1}/J_l + w K_{l-1}/K_l on a dense uniform u grid followed by a
    // log-spaced w tail, discarding changes where J_l flips sign.
    fn brute_count(v: f64) -> usize {
        let mut total = 0;
        for l in 0..12i32 {
            let f = |u: f64, w: f64| {
                u * bessel_j(l - 1, u) / bessel_j(l, u) + w * bessel_k(l - 1, w) / bessel_k(l, w)
            };
            let mut pts: Vec<(f64, f64)> = (0..20_000)
                .map(|k| {
                    let u = 1e-6 * v + k as f64 * v * (1.0 - 2e-6) / 19_999.0;
                    (u, (v * v - u * u).sqrt())
                })
                .collect();
            let w0 = pts.last().unwrap().1;
            // only LP0m roots can hide exponentially close to u = V
            let tail = if l == 0 { 400 } else { 0 };
            pts.extend((1..=tail).map(|k| {
                let w = w0 * (1e-200f64 / w0).powf(k as f64 / 400.0);
                ((v * v - w * w).sqrt(), w)
            }));
            let mut count = 0;
            for pair in pts.windows(2) {
                let ((u0, w0), (u1, w1)) = (pair[0], pair[1]);
                let pole = (bessel_j(l, u0) < 0.0) != (bessel_j(l, u1) < 0.0);
                if !pole && (f(u0, w0) < 0.0) != (f(u1, w1) < 0.0) {
                    count += 1;
                }
            }
            total += if l == 0 { count } else { 2 * count };
        }
        total
    }

    #[test]
    fn single_mode_below_lp11_cutoff() {
        let fiber = FiberSpec::new(1.0, 1.0 / (2.0 * PI), 1.0).unwrap();
        assert!((fiber.v_number() - 1.0).abs() < 1e-12);
        let modes = solve_modes(&fiber).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(brute_count(1.0), 1);
    }

    #[test]
    fn mode_count_matches_brute_force_and_is_monotone() {
        let mut last = 0;
        for &v in &[0.3, 0.5, 1.5, 2.3, 2.6, 3.36, 4.0, 5.0, 5.905, 6.5] {
            let fiber = FiberSpec::new(1.0, v / (2.0 * PI), 1.0).unwrap();
            let n = solve_modes(&fiber).unwrap().len();
            assert_eq!(n, brute_count(v), "V = {v}");
            assert!(n >= last, "mode count dropped at V = {v}");
            last = n;
        }
    }

    #[test]
    fn eigenvalue_pairs_lie_on_v_circle() {
        let fiber = FiberSpec::ten_mode();
        let v = fiber.v_number();
        let mut prev: Option<(u32, f64)> = None;
        for s in solve_modes(&fiber).unwrap() {
            assert!(((s.u * s.u + s.w * s.w) - v * v).abs() / (v * v) < 1e-9);
            assert!(s.u > 0.0 && s.u < v && s.w > 0.0);
            // residual of the original (pole-carrying) equation
            let l = s.mode.l as i32;
            let f = s.u * bessel_j(l - 1, s.u) / bessel_j(l, s.u)
                + s.w * bessel_k(l - 1, s.w) / bessel_k(l, s.w);
            assert!(f.abs() < 1e-9, "{}: residual {f}", s.mode);
            if let Some((pl, pu)) = prev {
                if pl == s.mode.l && s.mode.parity == Parity::Even {
                    assert!(s.u > pu);
                }
            }
            prev = Some((s.mode.l, s.u));
        }
    }

    #[test]
    fn lp01_is_monotone_and_positive_in_core() {
        let fiber = FiberSpec::three_mode();
        let grid = GridSpec::for_fiber(&fiber, 64).unwrap();
        let basis = sample_basis(&fiber, &grid, 1).unwrap();
        let a = fiber.core_radius();
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let r = 2.0 * a * k as f64 / 40.0;
            let v = basis.value_at(0, r, 0.0);
            assert!(v < prev);
            if r <= a {
                assert!(v > 0.0);
            }
            prev = v;
        }
    }

    #[test]
    fn lp11e_is_odd_in_x() {
        let fiber = FiberSpec::three_mode();
        let grid = GridSpec::for_fiber(&fiber, 64).unwrap();
        let basis = sample_basis(&fiber, &grid, 3).unwrap();
        let res = grid.resolution();
        let f = basis.field(1);
        for row in 0..res {
            for col in 0..res {
                let a = f[row * res + col];
                let b = f[row * res + (res - 1 - col)];
                assert!((a + b).abs() < 1e-12);
            }
        }
        let integral: f64 = f.iter().sum::<f64>() * grid.pixel_area();
        assert!(integral.abs() < 1e-6);
    }

    #[test]
    fn three_mode_gram_at_256() {
        let fiber = FiberSpec::three_mode();
        let grid = GridSpec::for_fiber(&fiber, 256).unwrap();
        let basis = sample_basis(&fiber, &grid, 3).unwrap();
        let g = basis.gram();
        for i in 0..3 {
            for j in 0..3 {
                let v = g[i * 3 + j];
                if i == j {
                    assert!((v - 1.0).abs() < 1e-6);
                } else {
                    assert!(v.abs() < 1e-3, "G[{i}][{j}] = {v}");
                }
            }
        }
    }

    #[test]
    fn field_is_continuous_at_core_boundary() {
        let fiber = FiberSpec::ten_mode();
        let grid = GridSpec::for_fiber(&fiber, 32).unwrap();
        let basis = sample_basis(&fiber, &grid, 10).unwrap();
        let a = fiber.core_radius();
        for k in 0..basis.len() {
            for &phi in &[0.1_f64, 0.7, 1.9, 3.0] {
                let inside = basis.value_at(k, (a - 1e-6) * phi.cos(), (a - 1e-6) * phi.sin());
                let outside = basis.value_at(k, (a + 1e-6) * phi.cos(), (a + 1e-6) * phi.sin());
                let scale = inside.abs().max(outside.abs()).max(1e-12);
                assert!((inside - outside).abs() / scale < 0.01, "mode {k}");
            }
        }
    }

    // Even and odd partners are normalized separately on the square grid, so
    // their scales differ slightly; compare with one shared scale.
    #[test]
    fn parity_pairs_share_radial_profile() {
        let fiber = FiberSpec::ten_mode();
        let grid = GridSpec::for_fiber(&fiber, 32).unwrap();
        let basis = sample_basis(&fiber, &grid, 10).unwrap();
        let a = fiber.core_radius();
        for (e, o) in [(1, 2), (3, 4), (6, 7), (8, 9)] {
            for &r in &[0.3 * a, 0.8 * a, 1.4 * a] {
                let ring: Vec<f64> = (0..16)
                    .map(|k| {
                        let phi = k as f64 * 0.39;
                        let (x, y) = (r * phi.cos(), r * phi.sin());
                        let (r, phi) = ((x * x + y * y).sqrt() / a, y.atan2(x));
                        let s = basis.modes()[e].scale;
                        (s * basis.modes()[e].solution.field(r, phi)).powi(2)
                            + (s * basis.modes()[o].solution.field(r, phi)).powi(2)
                    })
                    .collect();
                let first = ring[0];
                for v in &ring {
                    assert!((v - first).abs() <= 1e-6 * first.max(1e-300));
                }
            }
        }
    }

    #[test]
    fn too_many_modes_requested() {
        let fiber = FiberSpec::three_mode();
        let grid = GridSpec::for_fiber(&fiber, 32).unwrap();
        assert!(matches!(
            sample_basis(&fiber, &grid, 4),
            Err(Error::InsufficientModes { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn rejects_small_grid_and_window() {
        assert!(GridSpec::new(8, 1.0).is_err());
        let fiber = FiberSpec::three_mode();
        let grid = GridSpec::new(32, 1.0).unwrap();
        assert!(matches!(sample_basis(&fiber, &grid, 1), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn display_labels() {
        assert_eq!(ModeId::new(0, 2, Parity::Odd).to_string(), "LP02");
        assert_eq!(ModeId::new(3, 1, Parity::Odd).to_string(), "LP31o");
    }
}
