//! Inverse Radon transform on a square grid.
//!
//! Both the forward projector and SART use a pixel-driven operator: the
//! centre of each pixel projects to a fractional bin position and its mass
//! is split linearly between the two nearest bins. Pixels outside the disk
//! inscribed in the binned range are never observed and are held at zero.

use std::f64::consts::PI;

use super::{CovarianceEllipse, Sinogram};
use crate::error::{Error, Result};

/// Square quasi-probability grid over [−extent, extent]².
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub size: usize,
    pub extent: f64,
    /// Row-major, rows along y (increasing), columns along x.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn zeros(size: usize, extent: f64) -> Self {
        Self {
            size,
            extent,
            values: vec![0.0; size * size],
        }
    }

    pub fn pixel(&self) -> f64 {
        2.0 * self.extent / self.size as f64
    }

    /// Centre coordinate of pixel index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.pixel()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.size + ix]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.pixel() * self.pixel()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Centred second moments.
    pub fn covariance(&self) -> CovarianceEllipse {
        let m = self.mass() / (self.pixel() * self.pixel());
        let (mut mx, mut my) = (0.0, 0.0);
        for iy in 0..self.size {
            for ix in 0..self.size {
                let v = self.at(ix, iy);
                mx += v * self.coord(ix);
                my += v * self.coord(iy);
            }
        }
        mx /= m;
        my /= m;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for iy in 0..self.size {
            let y = self.coord(iy) - my;
            for ix in 0..self.size {
                let x = self.coord(ix) - mx;
                let v = self.at(ix, iy);
                sxx += v * x * x;
                syy += v * y * y;
                sxy += v * x * y;
            }
        }
        CovarianceEllipse {
            var_x: sxx / m,
            var_y: syy / m,
            cov_xy: sxy / m,
        }
    }

    /// Zero-mean Gaussian with the given second moments, sampled at pixel
    /// centres and normalized to unit mass.
    pub fn gaussian(ellipse: &CovarianceEllipse, size: usize, extent: f64) -> Result<Self> {
        Self::gaussian_at((0.0, 0.0), ellipse, size, extent)
    }

    pub fn gaussian_at(center: (f64, f64), ellipse: &CovarianceEllipse, size: usize, extent: f64) -> Result<Self> {
        let det = ellipse.var_x * ellipse.var_y - ellipse.cov_xy * ellipse.cov_xy;
        if !(det > 0.0 && ellipse.var_x > 0.0) {
            return Err(Error::Usage("covariance must be positive definite".into()));
        }
        let mut g = Self::zeros(size, extent);
        for iy in 0..size {
            let y = g.coord(iy) - center.1;
            for ix in 0..size {
                let x = g.coord(ix) - center.0;
                let q = (ellipse.var_y * x * x - 2.0 * ellipse.cov_xy * x * y + ellipse.var_x * y * y) / det;
                g.values[iy * size + ix] = (-0.5 * q).exp();
            }
        }
        g.normalize();
        Ok(g)
    }

    fn normalize(&mut self) {
        let m = self.mass();
        if m != 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
    }
}

/// Projection geometry for one angle: bin position of every pixel.
struct View {
    /// Lower bin index per pixel (−1 allowed at the left edge); i32::MIN when masked.
    lower: Vec<i32>,
    /// Weight of bin `lower + 1`.
    frac: Vec<f64>,
}

struct Operator {
    views: Vec<View>,
    bins: usize,
    /// Pixel area over bin width: converts pixel density to bin density.
    scale: f64,
}

impl Operator {
    fn new(grid: &WignerGrid, sino: &Sinogram) -> Self {
        let n = grid.size;
        let bins = sino.bin_count();
        let w = sino.bin_width();
        let r = sino.half_range();
        let first_center = -r + 0.5 * w;
        let views = sino
            .angles
            .iter()
            .map(|theta| {
                let (s, c) = theta.sin_cos();
                let mut lower = vec![i32::MIN; n * n];
                let mut frac = vec![0.0; n * n];
                for iy in 0..n {
                    let y = grid.coord(iy);
                    for ix in 0..n {
                        let x = grid.coord(ix);
                        if x * x + y * y > r * r {
                            continue;
                        }
                        let u = (x * c - y * s - first_center) / w;
                        let fl = u.floor();
                        lower[iy * n + ix] = fl as i32;
                        frac[iy * n + ix] = u - fl;
                    }
                }
                View { lower, frac }
            })
            .collect();
        Self {
            views,
            bins,
            scale: grid.pixel() * grid.pixel() / w,
        }
    }

    fn project(&self, view: &View, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let nb = self.bins as i32;
        for ((lo, fr), v) in view.lower.iter().zip(&view.frac).zip(f) {
            if *lo == i32::MIN {
                continue;
            }
            if *lo >= 0 && *lo < nb {
                out[*lo as usize] += (1.0 - fr) * v * self.scale;
            }
            if *lo + 1 >= 0 && *lo + 1 < nb {
                out[(*lo + 1) as usize] += fr * v * self.scale;
            }
        }
    }

    /// Row sums (per bin) and column sums (per pixel) of one view's matrix.
    fn sums(&self, view: &View) -> (Vec<f64>, Vec<f64>) {
        let nb = self.bins as i32;
        let mut rows = vec![0.0; self.bins];
        let mut cols = vec![0.0; view.lower.len()];
        for (p, (lo, fr)) in view.lower.iter().zip(&view.frac).enumerate() {
            if *lo == i32::MIN {
                continue;
            }
            if *lo >= 0 && *lo < nb {
                rows[*lo as usize] += (1.0 - fr) * self.scale;
                cols[p] += (1.0 - fr) * self.scale;
            }
            if *lo + 1 >= 0 && *lo + 1 < nb {
                rows[(*lo + 1) as usize] += fr * self.scale;
                cols[p] += fr * self.scale;
            }
        }
        (rows, cols)
    }
}

/// Projects `grid` onto the bins and angles of `layout`, overwriting its
/// densities. Marginal along s = x cos θ − y sin θ.
pub fn forward_project(grid: &WignerGrid, layout: &Sinogram) -> Sinogram {
    let op = Operator::new(grid, layout);
    let mut out = layout.clone();
    for (view, col) in op.views.iter().zip(out.density.iter_mut()) {
        op.project(view, &grid.values, col);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SartOptions {
    pub grid_size: usize,
    pub iterations: usize,
    pub relaxation: f64,
    /// Clip negative values after every sweep.
    pub nonnegative: bool,
}

impl Default for SartOptions {
    fn default() -> Self {
        Self {
            grid_size: 128,
            iterations: 10,
            relaxation: 0.3,
            nonnegative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SartReport {
    pub grid: WignerGrid,
    /// ‖p − Af‖/‖p‖ after each sweep, starting with the initial estimate.
    pub residuals: Vec<f64>,
}

fn relative_residual(op: &Operator, f: &[f64], sino: &Sinogram) -> f64 {
    let mut proj = vec![0.0; op.bins];
    let (mut num, mut den) = (0.0, 0.0);
    for (view, col) in op.views.iter().zip(&sino.density) {
        op.project(view, f, &mut proj);
        for (p, d) in proj.iter().zip(col) {
            num += (d - p) * (d - p);
            den += d * d;
        }
    }
    (num / den).sqrt()
}

/// Simultaneous algebraic reconstruction, one view at a time per sweep.
///
/// Starts from the isotropic Gaussian whose variance is the mean column
/// variance and whose centre fits the column means, so the sweeps only have
/// to build the anisotropy.
pub fn sart_reconstruct(sino: &Sinogram, options: &SartOptions) -> Result<SartReport> {
    if options.grid_size < 8 {
        return Err(Error::Usage("reconstruction grid must be at least 8×8".into()));
    }
    if !(options.relaxation > 0.0 && options.relaxation < 2.0) {
        return Err(Error::Usage(format!(
            "relaxation must lie in (0, 2), got {}",
            options.relaxation
        )));
    }
    let moments = sino.column_moments();
    let mean_var = moments.iter().map(|m| m.1).sum::<f64>() / moments.len() as f64;
    if !(mean_var.is_finite() && mean_var > 0.0) {
        return Err(Error::Reconstruction("sinogram columns have no spread".into()));
    }
    let extent = sino.half_range();
    let iso = CovarianceEllipse {
        var_x: mean_var,
        var_y: mean_var,
        cov_xy: 0.0,
    };
    let center = fit_center(&sino.angles, &moments);
    let mut grid = WignerGrid::gaussian_at(center, &iso, options.grid_size, extent)?;
    let op = Operator::new(&grid, sino);
    for (v, lo) in grid.values.iter_mut().zip(&op.views[0].lower) {
        if *lo == i32::MIN {
            *v = 0.0;
        }
    }
    grid.normalize();

    let sums: Vec<(Vec<f64>, Vec<f64>)> = op.views.iter().map(|v| op.sums(v)).collect();
    let mut residuals = vec![relative_residual(&op, &grid.values, sino)];
    let mut rising = 0;
    let mut proj = vec![0.0; op.bins];
    let mut ratio = vec![0.0; op.bins];
    let nb = op.bins as i32;
    for sweep in 0..options.iterations {
        for ((view, col), (rows, cols)) in op.views.iter().zip(&sino.density).zip(&sums) {
            op.project(view, &grid.values, &mut proj);
            for b in 0..op.bins {
                ratio[b] = if rows[b] > 0.0 { (col[b] - proj[b]) / rows[b] } else { 0.0 };
            }
            for (p, v) in grid.values.iter_mut().enumerate() {
                let lo = view.lower[p];
                if lo == i32::MIN || cols[p] == 0.0 {
                    continue;
                }
                let fr = view.frac[p];
                let mut back = 0.0;
                if lo >= 0 && lo < nb {
                    back += (1.0 - fr) * op.scale * ratio[lo as usize];
                }
                if lo + 1 >= 0 && lo + 1 < nb {
                    back += fr * op.scale * ratio[(lo + 1) as usize];
                }
                *v += options.relaxation * back / cols[p];
            }
        }
        if options.nonnegative {
            grid.values.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let r = relative_residual(&op, &grid.values, sino);
        if !r.is_finite() {
            return Err(Error::Reconstruction(format!("residual became {r} at sweep {}", sweep + 1)));
        }
        rising = if r > *residuals.last().unwrap() { rising + 1 } else { 0 };
        residuals.push(r);
        if rising >= 3 {
            return Err(Error::Reconstruction(format!(
                "residual grew for 3 consecutive sweeps: {:?}",
                &residuals[residuals.len() - 4..]
            )));
        }
    }
    grid.normalize();
    Ok(SartReport { grid, residuals })
}

/// Least-squares (x, y) from column means ⟨s⟩ = x cos θ − y sin θ.
fn fit_center(angles: &[f64], moments: &[(f64, f64)]) -> (f64, f64) {
    let (mut cc, mut ss, mut cs, mut bc, mut bs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, (mean, _)) in angles.iter().zip(moments) {
        let (s, c) = t.sin_cos();
        cc += c * c;
        ss += s * s;
        cs += c * s;
        bc += c * mean;
        bs -= s * mean;
    }
    // Normal equations for [c, −s]·[x, y] = mean.
    let det = cc * ss - cs * cs;
    if det.abs() < 1e-12 {
        return (0.0, 0.0);
    }
    ((ss * bc + cs * bs) / det, (cs * bc + cc * bs) / det)
}

/// Integration weight of each angle over a half turn: half the distance to
/// its neighbours, with directions identified modulo π.
fn angle_weights(angles: &[f64]) -> Vec<f64> {
    let m = angles.len();
    let mut order: Vec<(f64, usize)> = angles.iter().enumerate().map(|(i, a)| (a.rem_euclid(PI), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut weights = vec![0.0; m];
    for k in 0..m {
        let prev = if k == 0 { order[m - 1].0 - PI } else { order[k - 1].0 };
        let next = if k == m - 1 { order[0].0 + PI } else { order[k + 1].0 };
        weights[order[k].1] = 0.5 * (next - prev);
    }
    weights
}

/// Filtered backprojection with the Ram-Lak kernel, as an independent
/// check on SART.
pub fn fbp_reconstruct(sino: &Sinogram, grid_size: usize) -> Result<WignerGrid> {
    if grid_size < 8 {
        return Err(Error::Usage("reconstruction grid must be at least 8×8".into()));
    }
    let nb = sino.bin_count();
    let w = sino.bin_width();
    let kernel: Vec<f64> = (0..nb)
        .map(|n| match n {
            0 => 1.0 / (4.0 * w * w),
            n if n % 2 == 1 => -1.0 / ((n * n) as f64 * PI * PI * w * w),
            _ => 0.0,
        })
        .collect();
    let filtered: Vec<Vec<f64>> = sino
        .density
        .iter()
        .map(|col| {
            (0..nb)
                .map(|i| {
                    (0..nb)
                        .map(|j| col[j] * kernel[i.abs_diff(j)])
                        .sum::<f64>()
                        * w
                })
                .collect()
        })
        .collect();
    let weights = angle_weights(&sino.angles);
    let r = sino.half_range();
    let mut grid = WignerGrid::zeros(grid_size, r);
    let first_center = -r + 0.5 * w;
    for (iy, row) in grid.values.chunks_mut(grid_size).enumerate() {
        let y = -r + (iy as f64 + 0.5) * 2.0 * r / grid_size as f64;
        for (ix, v) in row.iter_mut().enumerate() {
            let x = -r + (ix as f64 + 0.5) * 2.0 * r / grid_size as f64;
            if x * x + y * y > r * r {
                continue;
            }
            let mut acc = 0.0;
            for ((theta, q), wt) in sino.angles.iter().zip(&filtered).zip(&weights) {
                let (s, c) = theta.sin_cos();
                let u = (x * c - y * s - first_center) / w;
                let fl = u.floor();
                let i = fl as isize;
                let fr = u - fl;
                let at = |k: isize| if k >= 0 && (k as usize) < nb { q[k as usize] } else { 0.0 };
                acc += wt * ((1.0 - fr) * at(i) + fr * at(i + 1));
            }
            *v = acc;
        }
    }
    grid.normalize();
    Ok(grid)
}
