//! Uniform space-time grids, sampled fields, finite differences and cumulative quadratures.
//!
//! Fields are stored slice-major: `values[[j, i]]` is the sample at `t_j`, `x_i`.
//!
//! All derivative stencils are second order and exact on quadratics. The one-sided boundary
//! stencils are chosen so that their leading truncation term equals that of the interior
//! central stencil. The error of a derivative is then a smooth function of position, and
//! differentiating an already differentiated field keeps second-order accuracy up to the
//! boundary.

use std::io::{BufRead, Write};

use ndarray::{Array2, Axis as NdAxis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("field has {found:?} samples, grid needs {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite sample at slice {j}, node {i}")]
    NonFinite { i: usize, j: usize },
    #[error("need at least {needed} time slices, grid has {found}")]
    TooFewSlices { needed: usize, found: usize },
    #[error("reference point {x_ref} outside [{x0}, {x1}]")]
    ReferenceOutside { x_ref: f64, x0: f64, x1: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid physical parameters: {0}")]
    Params(String),
}

/// Uniformly spaced closed interval `[start, end]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Axis {
    pub fn step(&self) -> Option<f64> {
        (self.n > 1).then(|| (self.end - self.start) / (self.n - 1) as f64)
    }

    pub fn node(&self, k: usize) -> f64 {
        match self.step() {
            Some(h) => self.start + k as f64 * h,
            None => self.start,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Uniform discretization of `(x0, x1) × [t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    space: Axis,
    time: Axis,
}

impl SpaceTimeGrid {
    pub fn new(x0: f64, x1: f64, nx: usize, t0: f64, t1: f64, nt: usize) -> Result<Self, GridError> {
        if !(x0.is_finite() && x1.is_finite() && t0.is_finite() && t1.is_finite()) {
            return Err(GridError::Invalid("bounds must be finite".into()));
        }
        if x1 <= x0 {
            return Err(GridError::Invalid(format!("need x1 > x0, got [{x0}, {x1}]")));
        }
        if t1 < t0 {
            return Err(GridError::Invalid(format!("need t1 >= t0, got [{t0}, {t1}]")));
        }
        if nx < 3 {
            return Err(GridError::Invalid(format!("need nx >= 3, got {nx}")));
        }
        if nt < 1 {
            return Err(GridError::Invalid("need nt >= 1".into()));
        }
        if nt > 1 && t1 == t0 {
            return Err(GridError::Invalid("several slices need t1 > t0".into()));
        }
        Ok(SpaceTimeGrid {
            space: Axis { start: x0, end: x1, n: nx },
            time: Axis { start: t0, end: t1, n: nt },
        })
    }

    /// A single time slice at `t`.
    pub fn stationary(x0: f64, x1: f64, nx: usize, t: f64) -> Result<Self, GridError> {
        Self::new(x0, x1, nx, t, t, 1)
    }

    pub fn space(&self) -> Axis {
        self.space
    }

    pub fn time(&self) -> Axis {
        self.time
    }

    pub fn nx(&self) -> usize {
        self.space.n
    }

    pub fn nt(&self) -> usize {
        self.time.n
    }

    pub fn x0(&self) -> f64 {
        self.space.start
    }

    pub fn x1(&self) -> f64 {
        self.space.end
    }

    pub fn t0(&self) -> f64 {
        self.time.start
    }

    pub fn t1(&self) -> f64 {
        self.time.end
    }

    pub fn h(&self) -> f64 {
        self.space.step().expect("nx >= 3")
    }

    /// Time step; `None` for a single slice.
    pub fn tau(&self) -> Option<f64> {
        self.time.step()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.space.node(i)
    }

    pub fn t(&self, j: usize) -> f64 {
        self.time.node(j)
    }

    pub fn xs(&self) -> Vec<f64> {
        self.space.nodes()
    }

    pub fn ts(&self) -> Vec<f64> {
        self.time.nodes()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nt(), self.nx())
    }

    /// Same domain with spacing and step halved.
    pub fn refined(&self) -> Self {
        let nt = if self.nt() > 1 { 2 * self.nt() - 1 } else { 1 };
        SpaceTimeGrid {
            space: Axis { n: 2 * self.nx() - 1, ..self.space },
            time: Axis { n: nt, ..self.time },
        }
    }

    /// Index of the node nearest to `x`, checking that `x` lies in the domain.
    pub fn x_index(&self, x: f64) -> Result<usize, GridError> {
        let (x0, x1) = (self.x0(), self.x1());
        if !(x0..=x1).contains(&x) {
            return Err(GridError::ReferenceOutside { x_ref: x, x0, x1 });
        }
        let k = ((x - x0) / self.h()).round() as usize;
        Ok(k.min(self.nx() - 1))
    }
}

/// `hbar` and `m`, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    hbar: f64,
    m: f64,
}

impl PhysParams {
    pub fn new(hbar: f64, m: f64) -> Result<Self, GridError> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(GridError::Params(format!("hbar must be positive, got {hbar}")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(GridError::Params(format!("m must be positive, got {m}")));
        }
        Ok(PhysParams { hbar, m })
    }

    pub fn unit() -> Self {
        PhysParams { hbar: 1.0, m: 1.0 }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    /// `2m / hbar^2`.
    pub fn beta(&self) -> f64 {
        2.0 * self.m / (self.hbar * self.hbar)
    }
}

/// Real samples on a grid; always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpaceTimeGrid,
    values: Array2<f64>,
}

impl Field {
    pub fn from_values(grid: SpaceTimeGrid, values: Array2<f64>) -> Result<Self, GridError> {
        if values.dim() != grid.shape() {
            return Err(GridError::Shape {
                expected: grid.shape(),
                found: values.dim(),
            });
        }
        if let Some(((j, i), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { i, j });
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Field {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn constant(grid: SpaceTimeGrid, v: f64) -> Self {
        assert!(v.is_finite());
        Field {
            grid,
            values: Array2::from_elem(grid.shape(), v),
        }
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        let values = Array2::from_shape_fn(grid.shape(), |(j, i)| f(grid.x(i), grid.t(j)));
        Self::from_values(grid, values)
    }

    /// Builds a field from per-slice rows.
    pub fn from_slices(grid: SpaceTimeGrid, slices: &[Vec<f64>]) -> Result<Self, GridError> {
        let nx = grid.nx();
        if slices.len() != grid.nt() || slices.iter().any(|s| s.len() != nx) {
            return Err(GridError::Shape {
                expected: grid.shape(),
                found: (slices.len(), slices.first().map_or(0, Vec::len)),
            });
        }
        let flat: Vec<f64> = slices.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec(grid.shape(), flat).expect("shape checked");
        Self::from_values(grid, values)
    }

    pub(crate) fn from_raw(grid: SpaceTimeGrid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        Field { grid, values }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[[j, i]]
    }

    pub fn slice(&self, j: usize) -> Vec<f64> {
        self.values.row(j).to_vec()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field, GridError> {
        Field::from_values(self.grid, self.values.mapv(f))
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let mut out = self.values.clone();
        out.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Field::from_values(self.grid, out)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v).expect("scaling a finite field by a finite factor")
    }

    pub fn add(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field, GridError> {
        self.zip_map(other, |a, b| a * b)
    }

    /// Max-abs norm.
    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Root mean square with trapezoid weights in x (and t when there are several slices).
    pub fn l2(&self) -> f64 {
        weighted_rms(&self.grid, &self.values, None)
    }

    /// First derivative in x.
    pub fn ddx(&self) -> Field {
        let h = self.grid.h();
        let mut out = Array2::zeros(self.grid.shape());
        for (src, mut dst) in self.values.outer_iter().zip(out.outer_iter_mut()) {
            let d = first_derivative(src.as_slice().expect("row-major"), h);
            dst.assign(&ndarray::ArrayView1::from(&d[..]));
        }
        Field::from_raw(self.grid, out)
    }

    /// Second derivative in x.
    pub fn d2dx2(&self) -> Field {
        let h = self.grid.h();
        let mut out = Array2::zeros(self.grid.shape());
        for (src, mut dst) in self.values.outer_iter().zip(out.outer_iter_mut()) {
            let d = second_derivative(src.as_slice().expect("row-major"), h);
            dst.assign(&ndarray::ArrayView1::from(&d[..]));
        }
        Field::from_raw(self.grid, out)
    }

    /// First derivative in t; needs at least three slices.
    pub fn ddt(&self) -> Result<Field, GridError> {
        let nt = self.grid.nt();
        if nt < 3 {
            return Err(GridError::TooFewSlices { needed: 3, found: nt });
        }
        let tau = self.grid.tau().expect("nt >= 3");
        let mut out = Array2::zeros(self.grid.shape());
        for (src, mut dst) in self
            .values
            .axis_iter(NdAxis(1))
            .zip(out.axis_iter_mut(NdAxis(1)))
        {
            let column = src.to_vec();
            let d = first_derivative(&column, tau);
            dst.assign(&ndarray::ArrayView1::from(&d[..]));
        }
        Ok(Field::from_raw(self.grid, out))
    }

    /// Per-slice cumulative trapezoid `F(x, t) = ∫_{x_ref}^x f(x', t) dx'`; `x_ref` is snapped to
    /// the nearest node.
    pub fn cumint_x(&self, x_ref: f64) -> Result<Field, GridError> {
        let k = self.grid.x_index(x_ref)?;
        let h = self.grid.h();
        let mut out = Array2::zeros(self.grid.shape());
        for (src, mut dst) in self.values.outer_iter().zip(out.outer_iter_mut()) {
            let f = src.as_slice().expect("row-major");
            dst[k] = 0.0;
            for i in k + 1..f.len() {
                dst[i] = dst[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
            }
            for i in (0..k).rev() {
                dst[i] = dst[i + 1] - 0.5 * h * (f[i] + f[i + 1]);
            }
        }
        Ok(Field::from_raw(self.grid, out))
    }

    /// Per-node cumulative trapezoid in t starting from `t0`; needs two slices.
    pub fn cumint_t(&self) -> Result<Field, GridError> {
        let nt = self.grid.nt();
        if nt < 2 {
            return Err(GridError::TooFewSlices { needed: 2, found: nt });
        }
        let tau = self.grid.tau().expect("nt >= 2");
        let mut out = Array2::zeros(self.grid.shape());
        for j in 1..nt {
            for i in 0..self.grid.nx() {
                out[[j, i]] = out[[j - 1, i]] + 0.5 * tau * (self.values[[j - 1, i]] + self.values[[j, i]]);
            }
        }
        Ok(Field::from_raw(self.grid, out))
    }

    /// Writes `x,t,value` rows, slice by slice, with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,t,value")?;
        for j in 0..self.grid.nt() {
            let t = self.grid.t(j);
            for i in 0..self.grid.nx() {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", self.grid.x(i), t, self.values[[j, i]])?;
            }
        }
        Ok(())
    }
}

/// Complex samples on a grid, e.g. the wave function.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpaceTimeGrid,
    values: Array2<Complex64>,
}

impl ComplexField {
    pub fn from_values(grid: SpaceTimeGrid, values: Array2<Complex64>) -> Result<Self, GridError> {
        if values.dim() != grid.shape() {
            return Err(GridError::Shape {
                expected: grid.shape(),
                found: values.dim(),
            });
        }
        if let Some(((j, i), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { i, j });
        }
        Ok(ComplexField { grid, values })
    }

    /// `amplitude · exp(i phase / hbar)`.
    pub fn from_polar(amplitude: &Field, phase: &Field, hbar: f64) -> Result<Self, GridError> {
        if amplitude.grid != phase.grid {
            return Err(GridError::GridMismatch);
        }
        let mut values = Array2::zeros(amplitude.grid.shape());
        ndarray::Zip::from(&mut values)
            .and(&amplitude.values)
            .and(&phase.values)
            .for_each(|z, &r, &s| *z = Complex64::from_polar(r, s / hbar));
        Self::from_values(amplitude.grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn re(&self) -> Field {
        Field::from_raw(self.grid, self.values.mapv(|z| z.re))
    }

    pub fn im(&self) -> Field {
        Field::from_raw(self.grid, self.values.mapv(|z| z.im))
    }

    pub fn d2dx2(&self) -> ComplexField {
        let re = self.re().d2dx2();
        let im = self.im().d2dx2();
        combine(&re, &im)
    }

    pub fn ddt(&self) -> Result<ComplexField, GridError> {
        Ok(combine(&self.re().ddt()?, &self.im().ddt()?))
    }

    /// Writes `x,t,re,im` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,t,re,im")?;
        for j in 0..self.grid.nt() {
            let t = self.grid.t(j);
            for i in 0..self.grid.nx() {
                let z = self.values[[j, i]];
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", self.grid.x(i), t, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

fn combine(re: &Field, im: &Field) -> ComplexField {
    let mut values = Array2::zeros(re.grid.shape());
    ndarray::Zip::from(&mut values)
        .and(&re.values)
        .and(&im.values)
        .for_each(|z, &a, &b| *z = Complex64::new(a, b));
    ComplexField {
        grid: re.grid,
        values,
    }
}

/// Validity of each node; `true` means the sample is usable.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask(Array2<bool>);

impl Mask {
    pub fn all(grid: &SpaceTimeGrid) -> Self {
        Mask(Array2::from_elem(grid.shape(), true))
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(usize, usize) -> bool) -> Self {
        Mask(Array2::from_shape_fn(grid.shape(), |(j, i)| f(j, i)))
    }

    pub fn is_valid(&self, j: usize, i: usize) -> bool {
        self.0[[j, i]]
    }

    pub fn count_valid(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.0.iter().all(|&v| v)
    }

    /// Fraction of invalid nodes.
    pub fn masked_fraction(&self) -> f64 {
        1.0 - self.count_valid() as f64 / self.len() as f64
    }

    pub fn and(&self, other: &Mask) -> Mask {
        let mut out = self.0.clone();
        out.zip_mut_with(&other.0, |a, &b| *a = *a && b);
        Mask(out)
    }

    pub fn as_array(&self) -> &Array2<bool> {
        &self.0
    }

    /// Validity after an x-derivative with the given stencil order (1 or 2).
    pub(crate) fn through_x_stencil(&self, order: usize) -> Mask {
        let (nt, nx) = self.0.dim();
        Mask(Array2::from_shape_fn((nt, nx), |(j, i)| {
            stencil_support(i, nx, order).all(|k| self.0[[j, k]])
        }))
    }

    pub(crate) fn through_t_stencil(&self) -> Mask {
        let (nt, nx) = self.0.dim();
        Mask(Array2::from_shape_fn((nt, nx), |(j, i)| {
            stencil_support(j, nt, 1).all(|k| self.0[[k, i]])
        }))
    }

    /// Validity after a cumulative x-integral from node `k`: a node is valid only if every
    /// node between it and `k` is.
    pub(crate) fn through_cumint_x(&self, k: usize) -> Mask {
        let (nt, nx) = self.0.dim();
        let mut out = Array2::from_elem((nt, nx), false);
        for j in 0..nt {
            let mut ok = self.0[[j, k]];
            out[[j, k]] = ok;
            for i in k + 1..nx {
                ok = ok && self.0[[j, i]];
                out[[j, i]] = ok;
            }
            ok = self.0[[j, k]];
            for i in (0..k).rev() {
                ok = ok && self.0[[j, i]];
                out[[j, i]] = ok;
            }
        }
        Mask(out)
    }

    pub(crate) fn through_cumint_t(&self) -> Mask {
        let (nt, nx) = self.0.dim();
        let mut out = Array2::from_elem((nt, nx), false);
        for i in 0..nx {
            let mut ok = true;
            for j in 0..nt {
                ok = ok && self.0[[j, i]];
                out[[j, i]] = ok;
            }
        }
        Mask(out)
    }
}

/// A field with a validity mask; invalid samples hold zero and carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedField {
    pub field: Field,
    pub mask: Mask,
}

impl MaskedField {
    pub fn full(field: Field) -> Self {
        let mask = Mask::all(field.grid());
        MaskedField { field, mask }
    }

    /// Zeroes invalid samples so they cannot leak through later arithmetic.
    pub fn new(field: Field, mask: Mask) -> Self {
        let mut values = field.values;
        ndarray::Zip::from(&mut values)
            .and(&mask.0)
            .for_each(|v, &ok| {
                if !ok {
                    *v = 0.0
                }
            });
        MaskedField {
            field: Field::from_raw(field.grid, values),
            mask,
        }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.field.grid()
    }

    pub fn linf(&self) -> f64 {
        self.field
            .values
            .iter()
            .zip(self.mask.0.iter())
            .filter(|(_, &ok)| ok)
            .fold(0.0_f64, |m, (v, _)| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        weighted_rms(&self.field.grid, &self.field.values, Some(&self.mask))
    }

    pub fn ddx(&self) -> MaskedField {
        MaskedField::new(self.field.ddx(), self.mask.through_x_stencil(1))
    }

    pub fn d2dx2(&self) -> MaskedField {
        MaskedField::new(self.field.d2dx2(), self.mask.through_x_stencil(2))
    }

    pub fn ddt(&self) -> Result<MaskedField, GridError> {
        Ok(MaskedField::new(self.field.ddt()?, self.mask.through_t_stencil()))
    }

    pub fn cumint_x(&self, x_ref: f64) -> Result<MaskedField, GridError> {
        let k = self.field.grid.x_index(x_ref)?;
        Ok(MaskedField::new(self.field.cumint_x(x_ref)?, self.mask.through_cumint_x(k)))
    }

    pub fn cumint_t(&self) -> Result<MaskedField, GridError> {
        Ok(MaskedField::new(self.field.cumint_t()?, self.mask.through_cumint_t()))
    }

    /// Pointwise combination; the result is valid where both inputs are.
    pub fn zip_map(
        &self,
        other: &MaskedField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<MaskedField, GridError> {
        let field = self.field.zip_map(&other.field, f)?;
        Ok(MaskedField::new(field, self.mask.and(&other.mask)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<MaskedField, GridError> {
        Ok(MaskedField::new(self.field.map(f)?, self.mask.clone()))
    }

    /// Like [`Field::write_csv`], with `NaN` at masked nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,t,value")?;
        let g = self.grid();
        for j in 0..g.nt() {
            let t = g.t(j);
            for i in 0..g.nx() {
                let v = if self.mask.is_valid(j, i) { self.field.get(j, i) } else { f64::NAN };
                writeln!(w, "{:.16e},{:.16e},{:.16e}", g.x(i), t, v)?;
            }
        }
        Ok(())
    }
}

/// Nodes touched by the stencil used at node `i` of an `n`-node line.
fn stencil_support(i: usize, n: usize, order: usize) -> std::ops::Range<usize> {
    let width = match order {
        1 => {
            if n >= 4 {
                4
            } else {
                3
            }
        }
        _ => n.min(5),
    };
    if i == 0 {
        0..width.min(n)
    } else if i == n - 1 {
        n - width.min(n)..n
    } else {
        i - 1..i + 2
    }
}

/// Central differences inside; one-sided error-matched stencils at the ends.
// Stencils are written as weighted differences against one node so that constant data gives
// exactly zero (a static amplitude must give an exactly zero flux).
pub(crate) fn first_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "first derivative needs three samples");
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    let l = n - 1;
    if n >= 4 {
        // (-4, 7, -4, 1)/2h: leading error h²f'''/6, same as the central stencil.
        d[0] = (7.0 * (f[1] - f[0]) - 4.0 * (f[2] - f[0]) + (f[3] - f[0])) / (2.0 * h);
        d[l] = -(7.0 * (f[l - 1] - f[l]) - 4.0 * (f[l - 2] - f[l]) + (f[l - 3] - f[l])) / (2.0 * h);
    } else {
        d[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h);
        d[l] = -(4.0 * (f[l - 1] - f[l]) - (f[l - 2] - f[l])) / (2.0 * h);
    }
    d
}

pub(crate) fn second_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "second derivative needs three samples");
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = ((f[i - 1] - f[i]) + (f[i + 1] - f[i])) / h2;
    }
    let l = n - 1;
    // Differences taken from end node `a` walking inwards in direction `s`.
    let side = |a: usize, s: isize, k: isize| f[(a as isize + s * k) as usize] - f[a];
    match n {
        3 => {
            d[0] = d[1];
            d[2] = d[1];
        }
        4 => {
            // (2, -5, 4, -1)/h²
            for (a, s) in [(0, 1), (l, -1)] {
                d[a] = (-5.0 * side(a, s, 1) + 4.0 * side(a, s, 2) - side(a, s, 3)) / h2;
            }
        }
        _ => {
            // (3, -9, 10, -5, 1)/h²: leading error h²f''''/12, same as the central stencil.
            for (a, s) in [(0, 1), (l, -1)] {
                d[a] = (-9.0 * side(a, s, 1) + 10.0 * side(a, s, 2) - 5.0 * side(a, s, 3)
                    + side(a, s, 4))
                    / h2;
            }
        }
    }
    d
}

fn trapezoid_weights(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    w
}

fn weighted_rms(grid: &SpaceTimeGrid, values: &Array2<f64>, mask: Option<&Mask>) -> f64 {
    let wx = trapezoid_weights(grid.nx());
    let wt = trapezoid_weights(grid.nt());
    let mut num = 0.0;
    let mut den = 0.0;
    for ((j, i), v) in values.indexed_iter() {
        if mask.is_some_and(|m| !m.0[[j, i]]) {
            continue;
        }
        let w = wx[i] * wt[j];
        num += w * v * v;
        den += w;
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("no data rows")]
    Empty,
}

/// Rows of a field dump (`x,t,value`, or `x,t,re,im` of which the real part is kept).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    /// `values[j][i]`, slice-major like [`Field`].
    pub values: Vec<Vec<f64>>,
}

impl FieldDump {
    pub fn read<R: BufRead>(reader: R) -> Result<Self, CsvError> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if k == 0 {
                if !line.starts_with("x,t,") {
                    return Err(CsvError::Format {
                        line: 1,
                        message: "expected header starting with `x,t,`".into(),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let cols = cols.map_err(|e| CsvError::Format {
                line: k + 1,
                message: e.to_string(),
            })?;
            if cols.len() < 3 {
                return Err(CsvError::Format {
                    line: k + 1,
                    message: format!("expected at least 3 columns, found {}", cols.len()),
                });
            }
            rows.push((cols[0], cols[1], cols[2]));
        }
        if rows.is_empty() {
            return Err(CsvError::Empty);
        }
        let mut ts: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for &(x, t, v) in &rows {
            if ts.last() != Some(&t) {
                ts.push(t);
                values.push(Vec::new());
            }
            if ts.len() == 1 {
                xs.push(x);
            }
            values.last_mut().expect("pushed").push(v);
        }
        if values.iter().any(|s| s.len() != xs.len()) {
            return Err(CsvError::Format {
                line: 0,
                message: "slices have differing lengths".into(),
            });
        }
        Ok(FieldDump { xs, ts, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(x0: f64, x1: f64, nx: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::stationary(x0, x1, nx, 0.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SpaceTimeGrid::new(1.0, 0.0, 11, 0.0, 1.0, 3).is_err());
        assert!(SpaceTimeGrid::new(0.0, 1.0, 2, 0.0, 1.0, 3).is_err());
        assert!(SpaceTimeGrid::new(0.0, 1.0, 3, 1.0, 0.0, 3).is_err());
        assert!(SpaceTimeGrid::new(0.0, 1.0, 3, 0.0, 0.0, 3).is_err());
        let g = SpaceTimeGrid::new(0.0, 1.0, 11, 0.0, 2.0, 5).unwrap();
        assert_eq!(g.h(), 0.1);
        assert_eq!(g.tau(), Some(0.5));
        assert_eq!(g.x(3), 0.0 + 3.0 * 0.1);
        assert_eq!(grid(0.0, 1.0, 5).tau(), None);
    }

    #[test]
    fn beta_matches_definition() {
        let p = PhysParams::new(0.7, 1.3).unwrap();
        assert_eq!(p.beta(), 2.0 * 1.3 / (0.7 * 0.7));
        assert!(PhysParams::new(0.0, 1.0).is_err());
        assert!(PhysParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid(0.0, 1.0, 3);
        assert!(Field::from_fn(g, |x, _| 1.0 / (x - 0.5)).is_err());
    }

    #[test]
    fn ddx_quadratic_and_constant() {
        let g = grid(0.0, 1.0, 11);
        let f = Field::from_fn(g, |x, _| x * x).unwrap();
        let d = f.ddx();
        for i in 0..11 {
            assert!((d.get(0, i) - 2.0 * g.x(i)).abs() <= 1e-12);
        }
        assert_eq!(Field::constant(g, 3.0).ddx().linf(), 0.0);
    }

    #[test]
    fn ddx_sine_converges() {
        let err = |n| {
            let g = grid(0.0, PI, n);
            let d = Field::from_fn(g, |x, _| x.sin()).unwrap().ddx();
            (0..n).map(|i| (d.get(0, i) - g.x(i).cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(201), err(401));
        assert!(e1 <= 1e-3, "{e1}");
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn d2dx2_cases() {
        let g = grid(0.0, 1.0, 11);
        let d = Field::from_fn(g, |x, _| x * x).unwrap().d2dx2();
        assert!(d.values().iter().all(|v| (v - 2.0).abs() <= 1e-10));
        let d = Field::from_fn(g, |x, _| 3.0 * x - 1.0).unwrap().d2dx2();
        assert!(d.linf() <= 1e-10);

        let g = grid(0.0, PI, 401);
        let d = Field::from_fn(g, |x, _| (2.0 * x).cos()).unwrap().d2dx2();
        let err = (0..401)
            .map(|i| (d.get(0, i) + 4.0 * (2.0 * g.x(i)).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2e-3, "{err}");
    }

    #[test]
    fn small_line_stencils() {
        let g = grid(0.0, 2.0, 3);
        let f = Field::from_fn(g, |x, _| x * x - x).unwrap();
        assert!(f.ddx().values().iter().zip(g.xs()).all(|(d, x)| (d - (2.0 * x - 1.0)).abs() < 1e-12));
        assert!(f.d2dx2().values().iter().all(|d| (d - 2.0).abs() < 1e-12));
        let g = grid(0.0, 3.0, 4);
        let f = Field::from_fn(g, |x, _| x * x * x).unwrap();
        let d2 = f.d2dx2();
        assert!((0..4).all(|i| (d2.get(0, i) - 6.0 * g.x(i)).abs() < 1e-10));
    }

    #[test]
    fn ddt_cases() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 5, 0.0, 1.0, 11).unwrap();
        let d = Field::from_fn(g, |_, t| t * t).unwrap().ddt().unwrap();
        for j in 0..11 {
            assert!((d.get(j, 2) - 2.0 * g.t(j)).abs() <= 1e-10);
        }
        assert_eq!(Field::from_fn(g, |x, _| x).unwrap().ddt().unwrap().linf(), 0.0);

        let g = SpaceTimeGrid::new(0.0, 1.0, 5, 0.0, 1.0, 401).unwrap();
        let c = 0.5;
        let f = Field::from_fn(g, |x, t| (2.0 * c * t).exp() * x * x).unwrap();
        let d = f.ddt().unwrap();
        for ((j, i), v) in d.values().indexed_iter() {
            let exact = 2.0 * c * f.get(j, i);
            if exact != 0.0 {
                assert!(((v - exact) / exact).abs() <= 1e-3);
            }
        }

        let single = grid(0.0, 1.0, 5);
        assert!(matches!(
            Field::zeros(single).ddt(),
            Err(GridError::TooFewSlices { .. })
        ));
    }

    #[test]
    fn cumint_x_cases() {
        let g = grid(0.5, 2.0, 31);
        let f = Field::constant(g, 1.0).cumint_x(0.5).unwrap();
        assert!((0..31).all(|i| (f.get(0, i) - (g.x(i) - 0.5)).abs() < 1e-13));

        let g = grid(0.0, 1.0, 101);
        let f = Field::from_fn(g, |x, _| 2.0 * x).unwrap().cumint_x(0.0).unwrap();
        let h = g.h();
        assert!((0..101).all(|i| (f.get(0, i) - g.x(i).powi(2)).abs() <= h * h));

        let (a, b) = (0.7, 0.4);
        let g = grid(0.5, 1.5, 201);
        let f = Field::from_fn(g, |x, _| (a * x + b).powi(2)).unwrap().cumint_x(0.5).unwrap();
        // Trapezoid error bound (L h²/12) max|f''| with f'' = 2a².
        let bound = 1.0 * g.h().powi(2) / 12.0 * 2.0 * a * a * 1.0001;
        for i in 0..201 {
            let x = g.x(i);
            let exact = ((a * x + b).powi(3) - (a * 0.5 + b).powi(3)) / (3.0 * a);
            assert!((f.get(0, i) - exact).abs() <= bound);
        }

        // Interior reference point integrates both ways.
        let g = grid(-1.0, 1.0, 21);
        let f = Field::constant(g, 2.0).cumint_x(0.0).unwrap();
        assert!((0..21).all(|i| (f.get(0, i) - 2.0 * g.x(i)).abs() < 1e-13));

        assert!(matches!(
            Field::zeros(g).cumint_x(1.5),
            Err(GridError::ReferenceOutside { .. })
        ));
    }

    #[test]
    fn cumint_t_cases() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 3, 0.25, 1.25, 41).unwrap();
        let f = Field::constant(g, 1.0).cumint_t().unwrap();
        assert!((0..41).all(|j| (f.get(j, 1) - (g.t(j) - 0.25)).abs() < 1e-13));
        let q0 = 0.5;
        let s = Field::constant(g, q0).cumint_t().unwrap().scale(-1.0);
        assert!((0..41).all(|j| (s.get(j, 0) + q0 * (g.t(j) - 0.25)).abs() < 1e-13));

        let g = SpaceTimeGrid::new(0.0, 1.0, 3, 0.0, 1.0, 401).unwrap();
        let f = Field::from_fn(g, |_, t| 3.0 * t * t).unwrap().cumint_t().unwrap();
        assert!((0..401).all(|j| (f.get(j, 2) - g.t(j).powi(3)).abs() <= 1e-5));

        assert!(Field::zeros(grid(0.0, 1.0, 3)).cumint_t().is_err());
    }

    #[test]
    fn norms() {
        let g = grid(0.0, 1.0, 11);
        assert_eq!(Field::zeros(g).linf(), 0.0);
        assert_eq!(Field::zeros(g).l2(), 0.0);
        assert_eq!(Field::constant(g, 2.0).linf(), 2.0);
        assert!((Field::constant(g, 2.0).l2() - 2.0).abs() < 1e-15);
        let g = grid(0.0, 1.0, 2001);
        let l2 = Field::from_fn(g, |x, _| x).unwrap().l2();
        assert!((l2 - 1.0 / 3.0_f64.sqrt()).abs() <= 1e-3);
    }

    #[test]
    fn masks_propagate_through_operations() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 11, 0.0, 1.0, 6).unwrap();
        let mask = Mask::from_fn(&g, |j, i| !(j == 2 && i == 5));
        let f = MaskedField::new(Field::constant(g, 1.0), mask);
        assert_eq!(f.field.get(2, 5), 0.0);

        let d = f.ddx();
        assert!(!d.mask.is_valid(2, 4) && !d.mask.is_valid(2, 6) && d.mask.is_valid(2, 3));
        assert!(d.mask.is_valid(1, 5));

        let c = f.cumint_x(0.0).unwrap();
        assert!(c.mask.is_valid(2, 4) && !c.mask.is_valid(2, 5) && !c.mask.is_valid(2, 10));

        let s = f.cumint_t().unwrap();
        assert!(s.mask.is_valid(1, 5) && !s.mask.is_valid(2, 5) && !s.mask.is_valid(5, 5));
        assert!(s.mask.is_valid(5, 4));

        let dt = f.ddt().unwrap();
        assert!(!dt.mask.is_valid(1, 5) && !dt.mask.is_valid(3, 5) && dt.mask.is_valid(4, 5));
        // One-sided stencil at t0 reaches slice 2.
        assert!(!dt.mask.is_valid(0, 5));
        assert!((f.linf() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_through_dump() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 4, 0.0, 0.5, 3).unwrap();
        let f = Field::from_fn(g, |x, t| x + 10.0 * t + 1.0 / 3.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,t,value\n"));
        assert_eq!(text.lines().count(), 1 + 12);
        let dump = FieldDump::read(&buf[..]).unwrap();
        assert_eq!(dump.xs.len(), 4);
        assert_eq!(dump.ts.len(), 3);
        for j in 0..3 {
            for i in 0..4 {
                assert_eq!(dump.values[j][i], f.get(j, i));
            }
        }
        assert!(matches!(FieldDump::read(&b"x,t,value\n"[..]), Err(CsvError::Empty)));
    }
}
