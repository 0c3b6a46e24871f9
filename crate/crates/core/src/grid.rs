//! Structured triangulation of the unit square, nodal fields and the
//! quadrature conventions shared by every estimate.
//!
//! The square `(0,1)²` is cut into `n × n` squares and each square into two
//! right triangles along its south-west/north-east diagonal. A *cell* is one
//! of these triangles. Fields are continuous piecewise-affine functions given
//! by their nodal values, so gradients are exactly constant per cell and
//! reproduce affine functions to machine precision. For the Laplacian this
//! discretization coincides with the classical 5-point stencil.
//!
//! Integrals of cellwise data use the centroid (midpoint) rule; centroid
//! values also decide level-set membership.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::{truncate, Real, Vec2};

/// Uniform `n × n` triangulated mesh of the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mesh {
    n: usize,
}

/// Which half of a square a cell is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Half {
    /// Vertices `(i,j)`, `(i+1,j)`, `(i+1,j+1)`.
    Lower,
    /// Vertices `(i,j)`, `(i+1,j+1)`, `(i,j+1)`.
    Upper,
}

/// One triangle of the mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub index: usize,
    pub i: usize,
    pub j: usize,
    pub half: Half,
    pub nodes: [usize; 3],
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidMesh(format!("need n >= 4, got {n}")));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.n
    }

    /// Cell width `1/n`.
    #[inline]
    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_count(self.n)
    }

    /// Nodes per axis.
    #[inline]
    pub fn side(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        2 * self.n * self.n
    }

    #[inline]
    pub fn interior_count(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    /// Row-major node index: `j` (the y index) is the slow index.
    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    #[inline]
    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % self.side(), k / self.side())
    }

    /// Coordinates computed as `i/n` so that grid lines are exact where representable.
    #[inline]
    pub fn node_coords<T: Real>(&self, k: usize) -> Vec2<T> {
        let (i, j) = self.node_ij(k);
        let n = T::from_count(self.n);
        Vec2::new(T::from_count(i) / n, T::from_count(j) / n)
    }

    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.node_ij(k);
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Area of every cell, `h²/2`.
    #[inline]
    pub fn cell_area<T: Real>(&self) -> T {
        let h = self.h::<T>();
        h * h / T::lit(2.0)
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        let square = index / 2;
        let (i, j) = (square % self.n, square / self.n);
        let sw = self.node_index(i, j);
        let se = self.node_index(i + 1, j);
        let ne = self.node_index(i + 1, j + 1);
        let nw = self.node_index(i, j + 1);
        if index.is_multiple_of(2) {
            Cell {
                index,
                i,
                j,
                half: Half::Lower,
                nodes: [sw, se, ne],
            }
        } else {
            Cell {
                index,
                i,
                j,
                half: Half::Upper,
                nodes: [sw, ne, nw],
            }
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count()).map(move |c| self.cell(c))
    }

    pub fn centroid<T: Real>(&self, cell: &Cell) -> Vec2<T> {
        let h = self.h::<T>();
        let third = T::one() / T::lit(3.0);
        let two_thirds = T::lit(2.0) * third;
        let (ox, oy) = (T::from_count(cell.i), T::from_count(cell.j));
        match cell.half {
            Half::Lower => Vec2::new((ox + two_thirds) * h, (oy + third) * h),
            Half::Upper => Vec2::new((ox + third) * h, (oy + two_thirds) * h),
        }
    }

    /// Gradients of the three nodal basis functions on `cell`, in node order.
    #[inline]
    pub fn basis_gradients<T: Real>(&self, cell: &Cell) -> [Vec2<T>; 3] {
        let inv_h = T::from_count(self.n);
        let z = T::zero();
        match cell.half {
            Half::Lower => [
                Vec2::new(-inv_h, z),
                Vec2::new(inv_h, -inv_h),
                Vec2::new(z, inv_h),
            ],
            Half::Upper => [
                Vec2::new(z, -inv_h),
                Vec2::new(inv_h, z),
                Vec2::new(-inv_h, inv_h),
            ],
        }
    }

    fn check_same(&self, other: &Mesh) -> Result<()> {
        if self != other {
            return Err(Error::MeshMismatch(self.n, other.n));
        }
        Ok(())
    }
}

/// Builds the uniform `n × n` mesh; `n >= 4`.
pub fn build_mesh(n: usize) -> Result<Mesh> {
    Mesh::new(n)
}

/// Nodal values of a continuous piecewise-affine function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    mesh: Mesh,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(mesh: Mesh, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                mesh.node_count(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self::constant(mesh, T::zero())
    }

    pub fn constant(mesh: Mesh, c: T) -> Self {
        Self {
            mesh,
            values: vec![c; mesh.node_count()],
        }
    }

    /// Interpolates `f` at the nodes.
    pub fn from_fn(mesh: Mesh, f: impl Fn(Vec2<T>) -> T) -> Self {
        let values = (0..mesh.node_count())
            .map(|k| f(mesh.node_coords(k)))
            .collect();
        Self { mesh, values }
    }

    /// Interpolates `f` and forces homogeneous Dirichlet values.
    pub fn from_fn_dirichlet(mesh: Mesh, f: impl Fn(Vec2<T>) -> T) -> Self {
        let mut out = Self::from_fn(mesh, f);
        out.zero_boundary();
        out
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.mesh.node_index(i, j)]
    }

    pub fn zero_boundary(&mut self) {
        for k in 0..self.mesh.node_count() {
            if self.mesh.is_boundary(k) {
                self.values[k] = T::zero();
            }
        }
    }

    pub fn boundary_is_zero(&self) -> bool {
        (0..self.mesh.node_count())
            .filter(|&k| self.mesh.is_boundary(k))
            .all(|k| self.values[k] == T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            mesh: self.mesh,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.mesh.check_same(&other.mesh)?;
        Ok(Self {
            mesh: self.mesh,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values
            .iter()
            .fold(T::infinity(), |m, &v| if v < m { v } else { m })
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m })
    }

    /// Value at `cell`'s centroid (mean of its vertices).
    #[inline]
    pub fn centroid_value(&self, cell: &Cell) -> T {
        let [a, b, c] = cell.nodes;
        (self.values[a] + self.values[b] + self.values[c]) / T::lit(3.0)
    }

    pub fn centroid_values(&self) -> Vec<T> {
        self.mesh.cells().map(|c| self.centroid_value(&c)).collect()
    }

    #[inline]
    pub fn cell_gradient(&self, cell: &Cell) -> Vec2<T> {
        let g = self.mesh.basis_gradients::<T>(cell);
        let [a, b, c] = cell.nodes;
        g[0] * self.values[a] + g[1] * self.values[b] + g[2] * self.values[c]
    }

    pub(crate) fn ensure_same_mesh(&self, other: &Self) -> Result<()> {
        self.mesh.check_same(&other.mesh)
    }
}

/// One 2-vector per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellVectorField<T> {
    mesh: Mesh,
    values: Vec<Vec2<T>>,
}

impl<T: Real> CellVectorField<T> {
    pub fn new(mesh: Mesh, values: Vec<Vec2<T>>) -> Result<Self> {
        if values.len() != mesh.cell_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} cell vectors, got {}",
                mesh.cell_count(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    #[inline]
    pub fn values(&self) -> &[Vec2<T>] {
        &self.values
    }

    pub fn norms_sq(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm_sq()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Cellwise gradient of the piecewise-affine interpolant.
pub fn gradient<T: Real>(field: &ScalarField<T>) -> CellVectorField<T> {
    let mesh = *field.mesh();
    let values = mesh.cells().map(|c| field.cell_gradient(&c)).collect();
    CellVectorField { mesh, values }
}

/// `Σ_cells value · |cell|`, summed in cell order.
pub fn integrate<T: Real>(mesh: &Mesh, cellwise: &[T]) -> Result<T> {
    if cellwise.len() != mesh.cell_count() {
        return Err(Error::InvalidArgument(format!(
            "expected {} cell values, got {}",
            mesh.cell_count(),
            cellwise.len()
        )));
    }
    let area = mesh.cell_area::<T>();
    let mut acc = T::zero();
    for &v in cellwise {
        acc += v;
    }
    Ok(acc * area)
}

pub(crate) fn integrate_with<T: Real>(mesh: &Mesh, f: impl Fn(&Cell) -> T) -> T {
    let mut acc = T::zero();
    for c in mesh.cells() {
        acc += f(&c);
    }
    acc * mesh.cell_area::<T>()
}

/// `(∫|field|^q)^{1/q}` with centroid quadrature.
pub fn lq_norm<T: Real>(field: &ScalarField<T>, q: T) -> Result<T> {
    if !(q >= T::one()) || !q.is_finite() {
        return Err(Error::InvalidExponent(q.to_f64_lossy()));
    }
    let mesh = field.mesh();
    let s = if q == T::one() {
        integrate_with(mesh, |c| field.centroid_value(c).abs())
    } else if q == T::lit(2.0) {
        integrate_with(mesh, |c| field.centroid_value(c).powi(2))
    } else {
        integrate_with(mesh, |c| field.centroid_value(c).abs().powf(q))
    };
    Ok(s.powf(q.recip()))
}

pub fn l1_norm<T: Real>(field: &ScalarField<T>) -> T {
    lq_norm(field, T::one()).expect("q = 1 is valid")
}

pub fn l2_norm<T: Real>(field: &ScalarField<T>) -> T {
    lq_norm(field, T::lit(2.0)).expect("q = 2 is valid")
}

/// `(∫|∇field|^p)^{1/p}` for `1 <= p < 2`.
pub fn w1p_seminorm<T: Real>(field: &ScalarField<T>, p: T) -> Result<T> {
    if !(p >= T::one() && p < T::lit(2.0)) {
        return Err(Error::InvalidExponent(p.to_f64_lossy()));
    }
    let s = integrate_with(field.mesh(), |c| field.cell_gradient(c).norm().powf(p));
    Ok(s.powf(p.recip()))
}

/// `(∫|∇field|²)^{1/2}`.
pub fn h1_seminorm<T: Real>(field: &ScalarField<T>) -> T {
    dirichlet_energy(field).sqrt()
}

/// `∫|∇field|²`.
pub fn dirichlet_energy<T: Real>(field: &ScalarField<T>) -> T {
    integrate_with(field.mesh(), |c| field.cell_gradient(c).norm_sq())
}

/// Nodal application of `T_K`.
pub fn truncate_field<T: Real>(field: &ScalarField<T>, k: T) -> Result<ScalarField<T>> {
    if !(k > T::zero()) {
        return Err(Error::InvalidTruncation(k.to_f64_lossy()));
    }
    Ok(field.map(|v| truncate(v, k)))
}

/// Area of the cells whose centroid value `v` satisfies `lo < |v| < hi`.
pub fn level_set_measure<T: Real>(field: &ScalarField<T>, lo: T, hi: T) -> Result<T> {
    if !(lo < hi) {
        return Err(Error::InvalidRange {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    Ok(integrate_with(field.mesh(), |c| {
        let v = field.centroid_value(c).abs();
        if lo < v && v < hi {
            T::one()
        } else {
            T::zero()
        }
    }))
}

/// Writes the field CSV: a `# scalar_field nx=<n> ny=<n>` header, then
/// `i,j,x,y,value` rows in node order.
pub fn write_field_csv<T: Real, W: Write>(field: &ScalarField<T>, mut w: W) -> Result<()> {
    let mesh = field.mesh();
    writeln!(w, "# scalar_field nx={} ny={}", mesh.nx(), mesh.ny())?;
    for (k, v) in field.values().iter().enumerate() {
        let (i, j) = mesh.node_ij(k);
        let p = mesh.node_coords::<T>(k);
        writeln!(w, "{i},{j},{},{},{v}", p.x, p.y)?;
    }
    Ok(())
}

pub fn read_field_csv<T: Real, R: BufRead>(r: R) -> Result<ScalarField<T>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))??;
    let (nx, ny) = parse_header(&header)?;
    if nx != ny {
        return Err(Error::Format(format!("non-square mesh nx={nx} ny={ny}")));
    }
    let mesh = Mesh::new(nx)?;
    let mut values = vec![T::nan(); mesh.node_count()];
    let mut seen = vec![false; mesh.node_count()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format(format!("line {}: `{line}`", lineno + 2));
        if cols.len() != 5 {
            return Err(bad());
        }
        let i: usize = cols[0].trim().parse().map_err(|_| bad())?;
        let j: usize = cols[1].trim().parse().map_err(|_| bad())?;
        let v: T = cols[4].trim().parse().map_err(|_| bad())?;
        if i > nx || j > ny {
            return Err(bad());
        }
        let k = mesh.node_index(i, j);
        values[k] = v;
        seen[k] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let (i, j) = mesh.node_ij(k);
        return Err(Error::Format(format!("missing node ({i},{j})")));
    }
    ScalarField::new(mesh, values)
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format(format!("bad header `{header}`"));
    let rest = header
        .trim()
        .strip_prefix("# scalar_field")
        .ok_or_else(bad)?;
    let (mut nx, mut ny) = (None, None);
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("nx=") {
            nx = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("ny=") {
            ny = v.parse().ok();
        }
    }
    Ok((nx.ok_or_else(bad)?, ny.ok_or_else(bad)?))
}
