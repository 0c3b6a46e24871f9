//! Lowest-order conforming space on the triangulated square: interior-node
//! numbering, sparse assembly and load vectors.
//!
//! Zeroth-order terms and nodal loads use the lumped (vertex) mass, which
//! together with the right-angle triangulation keeps the discrete operators
//! M-matrices. Gradient terms are exact cell integrals since gradients are
//! cellwise constant.

use crate::grid::{Cell, Mesh, ScalarField};
use crate::linalg::CsrMatrix;
use crate::scalar::{Real, Vec2};

const NO_DOF: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct P1Space<T> {
    mesh: Mesh,
    dof_of_node: Vec<usize>,
    node_of_dof: Vec<usize>,
    template: CsrMatrix<T>,
    /// Per cell, value-array positions of the local 3×3 block (`NO_DOF` for boundary rows/cols).
    scatter: Vec<[[usize; 3]; 3]>,
    /// Lumped mass of every node, boundary included.
    node_mass: Vec<T>,
}

impl<T: Real> P1Space<T> {
    pub fn new(mesh: Mesh) -> Self {
        let mut dof_of_node = vec![NO_DOF; mesh.node_count()];
        let mut node_of_dof = Vec::with_capacity(mesh.interior_count());
        for (k, dof) in dof_of_node.iter_mut().enumerate() {
            if !mesh.is_boundary(k) {
                *dof = node_of_dof.len();
                node_of_dof.push(k);
            }
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(7); node_of_dof.len()];
        for cell in mesh.cells() {
            for &a in &cell.nodes {
                let da = dof_of_node[a];
                if da == NO_DOF {
                    continue;
                }
                for &b in &cell.nodes {
                    let db = dof_of_node[b];
                    if db != NO_DOF {
                        rows[da].push(db);
                    }
                }
            }
        }
        let template = CsrMatrix::from_pattern(rows);
        let third = T::one() / T::lit(3.0);
        let area = mesh.cell_area::<T>();
        let mut node_mass = vec![T::zero(); mesh.node_count()];
        let scatter = mesh
            .cells()
            .map(|cell| {
                for &a in &cell.nodes {
                    node_mass[a] += area * third;
                }
                let mut s = [[NO_DOF; 3]; 3];
                for (la, &a) in cell.nodes.iter().enumerate() {
                    for (lb, &b) in cell.nodes.iter().enumerate() {
                        let (da, db) = (dof_of_node[a], dof_of_node[b]);
                        if da != NO_DOF && db != NO_DOF {
                            s[la][lb] = template.position(da, db).expect("in pattern");
                        }
                    }
                }
                s
            })
            .collect();
        Self {
            mesh,
            dof_of_node,
            node_of_dof,
            template,
            scatter,
            node_mass,
        }
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    #[inline]
    pub fn dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    #[inline]
    pub fn node_mass(&self, k: usize) -> T {
        self.node_mass[k]
    }

    #[inline]
    pub fn dof(&self, node: usize) -> Option<usize> {
        let d = self.dof_of_node[node];
        (d != NO_DOF).then_some(d)
    }

    /// Lumped masses of the interior nodes in dof order.
    pub fn dof_masses(&self) -> Vec<T> {
        self.node_of_dof
            .iter()
            .map(|&k| self.node_mass[k])
            .collect()
    }

    pub fn new_matrix(&self) -> CsrMatrix<T> {
        self.template.clone()
    }

    /// Assembles `mass_coef · M_lumped + Σ_T |T| ∇φ_aᵀ J_T ∇φ_b` where
    /// `tensor(cell)` returns `J_T` as a function applied to basis gradients.
    pub fn assemble(
        &self,
        mat: &mut CsrMatrix<T>,
        mass_coef: T,
        tensor: impl Fn(&Cell) -> [[T; 2]; 2],
    ) {
        mat.clear();
        let area = self.mesh.cell_area::<T>();
        for cell in self.mesh.cells() {
            let g = self.mesh.basis_gradients::<T>(&cell);
            let j = tensor(&cell);
            let pos = &self.scatter[cell.index];
            for la in 0..3 {
                for lb in 0..3 {
                    let p = pos[la][lb];
                    if p == NO_DOF {
                        continue;
                    }
                    let jb = Vec2::new(
                        j[0][0] * g[lb].x + j[0][1] * g[lb].y,
                        j[1][0] * g[lb].x + j[1][1] * g[lb].y,
                    );
                    mat.values_mut()[p] += area * g[la].dot(jb);
                }
            }
        }
        if mass_coef != T::zero() {
            for (d, &k) in self.node_of_dof.iter().enumerate() {
                let p = mat.position(d, d).expect("diagonal");
                mat.values_mut()[p] += mass_coef * self.node_mass[k];
            }
        }
    }

    pub fn restrict(&self, field: &ScalarField<T>) -> Vec<T> {
        self.node_of_dof
            .iter()
            .map(|&k| field.values()[k])
            .collect()
    }

    /// Expands interior unknowns into a field with zero boundary values.
    pub fn extend(&self, x: &[T]) -> ScalarField<T> {
        let mut values = vec![T::zero(); self.mesh.node_count()];
        for (d, &k) in self.node_of_dof.iter().enumerate() {
            values[k] = x[d];
        }
        ScalarField::new(self.mesh, values).expect("node count")
    }

    /// `∫ F φ_a` with lumped quadrature.
    pub fn lumped_load(&self, field: &ScalarField<T>) -> Vec<T> {
        self.node_of_dof
            .iter()
            .map(|&k| self.node_mass[k] * field.values()[k])
            .collect()
    }

    /// `Σ_a x_a y_a m_a` over interior nodes.
    pub fn mass_inner(&self, x: &[T], y: &[T]) -> T {
        let mut acc = T::zero();
        for (d, &k) in self.node_of_dof.iter().enumerate() {
            acc += self.node_mass[k] * x[d] * y[d];
        }
        acc
    }

    /// `∫ v · ∇φ_a` for a cellwise-constant vector field `v`.
    pub fn divergence_load(&self, v: impl Fn(&Cell) -> Vec2<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.dofs()];
        self.add_divergence_load(&mut out, T::one(), v);
        out
    }

    /// `out_a += scale · ∫ v · ∇φ_a`.
    pub fn add_divergence_load(&self, out: &mut [T], scale: T, v: impl Fn(&Cell) -> Vec2<T>) {
        let area = self.mesh.cell_area::<T>();
        for cell in self.mesh.cells() {
            let vt = v(&cell);
            if vt.x == T::zero() && vt.y == T::zero() {
                continue;
            }
            let g = self.mesh.basis_gradients::<T>(&cell);
            for (la, &a) in cell.nodes.iter().enumerate() {
                let d = self.dof_of_node[a];
                if d != NO_DOF {
                    out[d] += scale * area * vt.dot(g[la]);
                }
            }
        }
    }

    /// Projects cellwise values to nodes by area-weighted averaging over the
    /// cells sharing each node.
    pub fn project_to_nodes(&self, cellwise: &[T]) -> ScalarField<T> {
        let mut acc = vec![T::zero(); self.mesh.node_count()];
        let mut weight = vec![T::zero(); self.mesh.node_count()];
        let area = self.mesh.cell_area::<T>();
        for cell in self.mesh.cells() {
            for &a in &cell.nodes {
                acc[a] += area * cellwise[cell.index];
                weight[a] += area;
            }
        }
        let values = acc.into_iter().zip(weight).map(|(a, w)| a / w).collect();
        ScalarField::new(self.mesh, values).expect("node count")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_mesh;

    #[test]
    fn laplacian_is_five_point_stencil() {
        let mesh = build_mesh(6).unwrap();
        let space = P1Space::<f64>::new(mesh);
        let mut a = space.new_matrix();
        space.assemble(&mut a, 0.0, |_| [[1.0, 0.0], [0.0, 1.0]]);
        let centre = space.dof(mesh.node_index(3, 3)).unwrap();
        assert!((a.get(centre, centre) - 4.0).abs() < 1e-12);
        for (i, j) in [(2, 3), (4, 3), (3, 2), (3, 4)] {
            let d = space.dof(mesh.node_index(i, j)).unwrap();
            assert!((a.get(centre, d) + 1.0).abs() < 1e-12);
        }
        for (i, j) in [(2, 2), (4, 4)] {
            let d = space.dof(mesh.node_index(i, j)).unwrap();
            assert!(a.get(centre, d).abs() < 1e-12);
        }
    }

    #[test]
    fn lumped_masses_sum_to_area() {
        let mesh = build_mesh(7).unwrap();
        let space = P1Space::<f64>::new(mesh);
        let total: f64 = (0..mesh.node_count()).map(|k| space.node_mass(k)).sum();
        assert!((total - 1.0).abs() < 1e-13);
        let h2 = mesh.h::<f64>().powi(2);
        let k = mesh.node_index(3, 2);
        assert!((space.node_mass(k) - h2).abs() < 1e-15);
    }

    #[test]
    fn projection_preserves_lumped_integral() {
        let mesh = build_mesh(5).unwrap();
        let space = P1Space::<f64>::new(mesh);
        let cellwise: Vec<f64> = (0..mesh.cell_count()).map(|c| (c as f64).sin()).collect();
        let nodal = space.project_to_nodes(&cellwise);
        let lumped: f64 = (0..mesh.node_count())
            .map(|k| space.node_mass(k) * nodal.values()[k])
            .sum();
        let exact = crate::grid::integrate(&mesh, &cellwise).unwrap();
        assert!((lumped - exact).abs() < 1e-13);
    }
}
