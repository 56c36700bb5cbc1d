//! Periodic strip `T × (0, ly)` with two boundary rings.
//!
//! Bulk node `(i, j)` sits at `(i·hx, j·hy)`, `i` periodic in `0..nx`,
//! `j ∈ 0..ny`. The rings are collocated with rows `j = 0` (outward normal
//! `−e_y`) and `j = ny − 1` (outward normal `+e_y`).
//!
//! Quadrature is trapezoidal in `y` and periodic-trapezoidal in `x`, and the
//! discrete operators are the exact gradients of the midpoint Dirichlet forms
//! with respect to these weights. Consequently
//!
//! * `⟨Δ_h u, w⟩ = ⟨u, Δ_h w⟩` and `⟨Δ_h u, 1⟩ = 0` for no-flux ghosts,
//! * `½‖∇_h u‖² = −½⟨Δ_h u, u⟩`,
//! * a supplied flux `g` contributes `∫_Γ g` to `∫_Ω Δ_h u`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ring {
    Bottom,
    Top,
}

/// Boundary treatment of [`Grid::laplace_bulk`].
#[derive(Debug, Clone, Copy)]
pub enum Flux<'a> {
    NoFlux,
    /// Outward normal derivative per ring node.
    Supplied(&'a SurfField),
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 8 {
            return Err(Error::InvalidParameter(format!(
                "nx must be >= 8, got {nx}"
            )));
        }
        if ny < 4 {
            return Err(Error::InvalidParameter(format!(
                "ny must be >= 4, got {ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lx, ly must be positive, got {lx}, {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / (ny - 1) as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn bulk_len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn surf_len(&self) -> usize {
        2 * self.nx
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Bulk row carrying a ring.
    pub fn ring_row(&self, ring: Ring) -> usize {
        match ring {
            Ring::Bottom => 0,
            Ring::Top => self.ny - 1,
        }
    }

    /// Quadrature weight of any node in row `j`.
    pub fn bulk_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.hx * self.hy
        } else {
            self.hx * self.hy
        }
    }

    pub fn surf_weight(&self) -> f64 {
        self.hx
    }

    /// `|Ω| = lx·ly`.
    pub fn bulk_measure(&self) -> f64 {
        self.lx * self.ly
    }

    /// `|Γ| = 2·lx`.
    pub fn surf_measure(&self) -> f64 {
        2.0 * self.lx
    }

    pub fn bulk_zeros(&self) -> BulkField {
        BulkField::zeros(self.nx, self.ny)
    }

    pub fn surf_zeros(&self) -> SurfField {
        SurfField::zeros(self.nx)
    }

    pub fn bulk_from_fn(&self, mut f: impl FnMut(f64, f64) -> f64) -> BulkField {
        let mut u = self.bulk_zeros();
        for j in 0..self.ny {
            for i in 0..self.nx {
                u.data[self.idx(i, j)] = f(self.x(i), self.y(j));
            }
        }
        u
    }

    pub fn surf_from_fn(&self, mut f: impl FnMut(Ring, f64) -> f64) -> SurfField {
        let mut v = self.surf_zeros();
        for i in 0..self.nx {
            v.data[i] = f(Ring::Bottom, self.x(i));
            v.data[self.nx + i] = f(Ring::Top, self.x(i));
        }
        v
    }

    pub fn check_bulk(&self, u: &BulkField) -> Result<()> {
        if u.nx != self.nx || u.ny != self.ny {
            return Err(Error::dims(
                format!("bulk {}x{}", self.nx, self.ny),
                format!("bulk {}x{}", u.nx, u.ny),
            ));
        }
        Ok(())
    }

    pub fn check_surf(&self, v: &SurfField) -> Result<()> {
        if v.nx != self.nx {
            return Err(Error::dims(
                format!("rings of {}", self.nx),
                format!("rings of {}", v.nx),
            ));
        }
        Ok(())
    }

    /// Five-point Laplacian, periodic in `x`, with mirror ghosts at the
    /// boundary rows. A supplied outward flux `g` adds `2g/hy` on the rings.
    pub fn laplace_bulk(&self, u: &BulkField, flux: Flux<'_>) -> Result<BulkField> {
        self.check_bulk(u)?;
        if let Flux::Supplied(g) = flux {
            self.check_surf(g)?;
        }
        let (nx, ny) = (self.nx, self.ny);
        let cx = 1.0 / (self.hx * self.hx);
        let cy = 1.0 / (self.hy * self.hy);
        let d = &u.data;
        let mut out = vec![0.0; d.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = self.idx(i, j);
                let ip = self.idx((i + 1) % nx, j);
                let im = self.idx((i + nx - 1) % nx, j);
                let lx = cx * (d[ip] - 2.0 * d[k] + d[im]);
                let ly = if j == 0 {
                    2.0 * cy * (d[self.idx(i, 1)] - d[k])
                } else if j == ny - 1 {
                    2.0 * cy * (d[self.idx(i, ny - 2)] - d[k])
                } else {
                    cy * (d[self.idx(i, j + 1)] - 2.0 * d[k] + d[self.idx(i, j - 1)])
                };
                out[k] = lx + ly;
            }
        }
        if let Flux::Supplied(g) = flux {
            let s = 2.0 / self.hy;
            for i in 0..nx {
                out[self.idx(i, 0)] += s * g.data[i];
                out[self.idx(i, ny - 1)] += s * g.data[nx + i];
            }
        }
        Ok(BulkField { nx, ny, data: out })
    }

    /// Periodic three-point Laplacian on each ring.
    pub fn laplace_surface(&self, v: &SurfField) -> Result<SurfField> {
        self.check_surf(v)?;
        let nx = self.nx;
        let c = 1.0 / (self.hx * self.hx);
        let mut out = vec![0.0; 2 * nx];
        for r in 0..2 {
            let o = r * nx;
            for i in 0..nx {
                let ip = o + (i + 1) % nx;
                let im = o + (i + nx - 1) % nx;
                out[o + i] = c * (v.data[ip] - 2.0 * v.data[o + i] + v.data[im]);
            }
        }
        Ok(SurfField { nx, data: out })
    }

    /// Second-order one-sided outward normal derivative on each ring.
    pub fn normal_derivative(&self, u: &BulkField) -> Result<SurfField> {
        self.check_bulk(u)?;
        let (nx, ny) = (self.nx, self.ny);
        let d = &u.data;
        let c = 1.0 / (2.0 * self.hy);
        let mut out = vec![0.0; 2 * nx];
        for i in 0..nx {
            out[i] = c * (3.0 * d[self.idx(i, 0)] - 4.0 * d[self.idx(i, 1)] + d[self.idx(i, 2)]);
            out[nx + i] = c
                * (3.0 * d[self.idx(i, ny - 1)] - 4.0 * d[self.idx(i, ny - 2)]
                    + d[self.idx(i, ny - 3)]);
        }
        Ok(SurfField { nx, data: out })
    }

    pub fn integrate_bulk(&self, u: &BulkField) -> Result<f64> {
        self.check_bulk(u)?;
        let mut total = 0.0;
        for j in 0..self.ny {
            let row: f64 = u.row(j).iter().sum();
            total += self.bulk_weight(j) * row;
        }
        Ok(total)
    }

    pub fn integrate_surface(&self, v: &SurfField) -> Result<f64> {
        self.check_surf(v)?;
        Ok(self.hx * v.data.iter().sum::<f64>())
    }

    pub fn mean_bulk(&self, u: &BulkField) -> Result<f64> {
        Ok(self.integrate_bulk(u)? / self.bulk_measure())
    }

    pub fn mean_surface(&self, v: &SurfField) -> Result<f64> {
        Ok(self.integrate_surface(v)? / self.surf_measure())
    }

    /// `P_Ω u = u − ⟨u⟩_Ω`.
    pub fn project_zero_mean_bulk(&self, u: &BulkField) -> Result<BulkField> {
        let m = self.mean_bulk(u)?;
        Ok(u.map(|x| x - m))
    }

    /// `P_Γ v = v − ⟨v⟩_Γ`.
    pub fn project_zero_mean_surface(&self, v: &SurfField) -> Result<SurfField> {
        let m = self.mean_surface(v)?;
        Ok(v.map(|x| x - m))
    }

    /// Weighted inner product `Σ w u v` over the bulk.
    pub fn inner_bulk(&self, u: &BulkField, w: &BulkField) -> Result<f64> {
        self.check_bulk(u)?;
        self.check_bulk(w)?;
        let mut total = 0.0;
        for j in 0..self.ny {
            let row: f64 = u.row(j).iter().zip(w.row(j)).map(|(a, b)| a * b).sum();
            total += self.bulk_weight(j) * row;
        }
        Ok(total)
    }

    pub fn inner_surface(&self, v: &SurfField, w: &SurfField) -> Result<f64> {
        self.check_surf(v)?;
        self.check_surf(w)?;
        Ok(self.hx * v.data.iter().zip(&w.data).map(|(a, b)| a * b).sum::<f64>())
    }

    /// `½∫|∇u|²` by midpoint differences; the `x`-differences of the boundary
    /// rows carry half weight.
    pub fn dirichlet_energy_bulk(&self, u: &BulkField) -> Result<f64> {
        self.check_bulk(u)?;
        let (nx, ny) = (self.nx, self.ny);
        let d = &u.data;
        let area = self.hx * self.hy;
        let mut sx = 0.0;
        for j in 0..ny {
            let c = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
            let mut row = 0.0;
            for i in 0..nx {
                let diff = (d[self.idx((i + 1) % nx, j)] - d[self.idx(i, j)]) / self.hx;
                row += diff * diff;
            }
            sx += c * row;
        }
        let mut sy = 0.0;
        for j in 0..ny - 1 {
            for i in 0..nx {
                let diff = (d[self.idx(i, j + 1)] - d[self.idx(i, j)]) / self.hy;
                sy += diff * diff;
            }
        }
        Ok(0.5 * area * (sx + sy))
    }

    /// `½∫_Γ|∇_Γ v|²` summed over both rings.
    pub fn dirichlet_energy_surface(&self, v: &SurfField) -> Result<f64> {
        self.check_surf(v)?;
        let nx = self.nx;
        let mut s = 0.0;
        for r in 0..2 {
            let o = r * nx;
            for i in 0..nx {
                let diff = (v.data[o + (i + 1) % nx] - v.data[o + i]) / self.hx;
                s += diff * diff;
            }
        }
        Ok(0.5 * self.hx * s)
    }

    /// Copy of the ring rows of a bulk field.
    pub fn trace(&self, u: &BulkField) -> Result<SurfField> {
        self.check_bulk(u)?;
        let mut out = self.surf_zeros();
        out.data[..self.nx].copy_from_slice(u.row(0));
        out.data[self.nx..].copy_from_slice(u.row(self.ny - 1));
        Ok(out)
    }

    /// Overwrite the ring rows of `u` with `v`.
    pub fn set_trace(&self, u: &mut BulkField, v: &SurfField) -> Result<()> {
        self.check_bulk(u)?;
        self.check_surf(v)?;
        let (nx, ny) = (self.nx, self.ny);
        u.row_mut(0).copy_from_slice(&v.data[..nx]);
        u.row_mut(ny - 1).copy_from_slice(&v.data[nx..]);
        Ok(())
    }
}

/// Scalar lattice on the bulk nodes, row-major (`k = j·nx + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct BulkField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl BulkField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; nx * ny],
        }
    }

    pub fn constant(nx: usize, ny: usize, c: f64) -> Self {
        Self {
            nx,
            ny,
            data: vec![c; nx * ny],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(Error::dims(nx * ny, data.len()));
        }
        Ok(Self { nx, ny, data })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx + i] = v;
    }
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.nx..(j + 1) * self.nx]
    }
    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nx..(j + 1) * self.nx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Values on the two rings: bottom ring first, then top.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfField {
    nx: usize,
    data: Vec<f64>,
}

impl SurfField {
    pub fn zeros(nx: usize) -> Self {
        Self {
            nx,
            data: vec![0.0; 2 * nx],
        }
    }

    pub fn constant(nx: usize, c: f64) -> Self {
        Self {
            nx,
            data: vec![c; 2 * nx],
        }
    }

    pub fn from_vec(nx: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * nx {
            return Err(Error::dims(2 * nx, data.len()));
        }
        Ok(Self { nx, data })
    }

    pub fn from_rings(bottom: &[f64], top: &[f64]) -> Result<Self> {
        if bottom.len() != top.len() {
            return Err(Error::dims(bottom.len(), top.len()));
        }
        let mut data = bottom.to_vec();
        data.extend_from_slice(top);
        Ok(Self {
            nx: bottom.len(),
            data,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
    pub fn ring(&self, ring: Ring) -> &[f64] {
        match ring {
            Ring::Bottom => &self.data[..self.nx],
            Ring::Top => &self.data[self.nx..],
        }
    }
    pub fn ring_mut(&mut self, ring: Ring) -> &mut [f64] {
        let nx = self.nx;
        match ring {
            Ring::Bottom => &mut self.data[..nx],
            Ring::Top => &mut self.data[nx..],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            nx: self.nx,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub fn laplace_bulk(g: &Grid, u: &BulkField, flux: Flux<'_>) -> Result<BulkField> {
    g.laplace_bulk(u, flux)
}

pub fn laplace_surface(g: &Grid, v: &SurfField) -> Result<SurfField> {
    g.laplace_surface(v)
}

pub fn normal_derivative(g: &Grid, u: &BulkField) -> Result<SurfField> {
    g.normal_derivative(u)
}
