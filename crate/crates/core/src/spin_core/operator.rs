use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, Vec3, C64};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Spin magnitude stored as 2s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinQuantum {
    twice_s: u32,
}

impl SpinQuantum {
    pub fn new(s: f64) -> Result<Self> {
        let t = 2.0 * s;
        if !t.is_finite() || t < 0.0 || (t - t.round()).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("spin {s} is not a non-negative half-integer")));
        }
        Ok(Self { twice_s: t.round() as u32 })
    }
    pub const fn half() -> Self {
        Self { twice_s: 1 }
    }
    pub const fn one() -> Self {
        Self { twice_s: 2 }
    }
    pub fn s(&self) -> f64 {
        self.twice_s as f64 / 2.0
    }
    pub fn dim(&self) -> usize {
        self.twice_s as usize + 1
    }
}

/// Dense Hermitian matrix; MHz when used as a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("empty operator".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite operator entry".into()));
        }
        let dev = (&m - m.adjoint()).camax();
        let scale = m.camax().max(1.0);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(dev));
        }
        // Symmetrize away round-off.
        let m = (&m + m.adjoint()).scale(0.5);
        Ok(Self { m })
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        let m = (&m + m.adjoint()).scale(0.5);
        Self { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }
    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { m: self.m.scale(a) }
    }
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(Self { m: &self.m + &other.m })
    }
    /// Real linear combination Σ cᵢ Oᵢ.
    pub fn combine(terms: &[(f64, &Self)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidInput("no terms".into()))?;
        let mut acc = first.1.scale(first.0);
        for (c, o) in &terms[1..] {
            acc = acc.add(&o.scale(*c))?;
        }
        Ok(acc)
    }
    /// Symmetrized product (AB + BA)/2, Hermitian for Hermitian A, B.
    pub fn anticommutator_half(&self, other: &Self) -> Self {
        Self::from_raw((&self.m * &other.m + &other.m * &self.m).scale(0.5))
    }
    pub fn kron(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }
    pub fn expectation(&self, v: &nalgebra::DVector<C64>) -> f64 {
        (v.adjoint() * &self.m * v)[(0, 0)].re
    }
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }
}

pub fn identity(dim: usize) -> HermitianOperator {
    HermitianOperator { m: CMatrix::identity(dim, dim) }
}

/// Angular-momentum matrices in the |m = s … −s⟩ basis.
#[derive(Debug, Clone)]
pub struct SpinOps {
    pub sx: HermitianOperator,
    pub sy: HermitianOperator,
    pub sz: HermitianOperator,
}

impl SpinOps {
    pub fn dim(&self) -> usize {
        self.sz.dim()
    }
    /// n·S for a real 3-vector.
    pub fn along(&self, n: &Vec3) -> HermitianOperator {
        HermitianOperator::from_raw(
            self.sx.m.scale(n.x) + self.sy.m.scale(n.y) + self.sz.m.scale(n.z),
        )
    }
    /// Embed each component as A ⊗ 1 (left) or 1 ⊗ A (right).
    pub fn embed(&self, left: usize, right: usize) -> SpinOps {
        let e = |o: &HermitianOperator| identity(left).kron(o).kron(&identity(right));
        SpinOps { sx: e(&self.sx), sy: e(&self.sy), sz: e(&self.sz) }
    }
}

pub fn spin_operators(s: SpinQuantum) -> SpinOps {
    let n = s.dim();
    let sv = s.s();
    let mut sp = CMatrix::zeros(n, n);
    let mut sz = CMatrix::zeros(n, n);
    for k in 0..n {
        let m = sv - k as f64;
        sz[(k, k)] = Complex64::new(m, 0.0);
        if k > 0 {
            // ⟨m+1|S+|m⟩
            sp[(k - 1, k)] = Complex64::new((sv * (sv + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm).scale(0.5);
    let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
    SpinOps {
        sx: HermitianOperator::from_raw(sx),
        sy: HermitianOperator::from_raw(sy),
        sz: HermitianOperator::from_raw(sz),
    }
}

/// Eigen-decomposition with ascending eigenvalues and orthonormal columns.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn vector(&self, i: usize) -> nalgebra::DVector<C64> {
        self.vectors.column(i).into_owned()
    }
    /// Matrix of ⟨φ_n|O|φ_m⟩.
    pub fn transform(&self, op: &HermitianOperator) -> CMatrix {
        self.vectors.adjoint() * op.matrix() * &self.vectors
    }
}

pub fn eigensystem(h: &HermitianOperator) -> Result<Eigensystem> {
    let dev = (&h.m - h.m.adjoint()).camax();
    if dev > HERMITIAN_TOL * h.m.camax().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let n = h.dim();
    let eig = SymmetricEigen::new(h.m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    // Re-orthonormalize inside near-degenerate clusters, then fix phases.
    let scale = h.m.norm().max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] < 1e-9 * scale {
            end += 1;
        }
        for k in start..end {
            let mut v = vectors.column(k).into_owned();
            for j in start..k {
                let u = vectors.column(j).into_owned();
                let proj = u.dotc(&v);
                v -= u * proj;
            }
            let nv = v.norm();
            vectors.set_column(k, &(v / Complex64::new(nv, 0.0)));
        }
        start = end;
    }
    for k in 0..n {
        let col = vectors.column(k);
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 + 1e-12 { (i, z.norm()) } else { acc });
        let z = col[imax];
        let phase = z.conj() / z.norm();
        let c = vectors.column(k) * phase;
        vectors.set_column(k, &c);
    }
    Ok(Eigensystem { values, vectors })
}

/// Symmetry axis of a defect relative to the lab frame (lab ẑ = bias / sensor axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub theta: f64,
    pub phi: f64,
}

/// Angle between two distinct ⟨111⟩ axes, arccos(−1/3).
pub const TETRAHEDRAL_ANGLE: f64 = 1.910_633_236_249_018_6;

impl Orientation {
    pub fn from_angles(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidInput("non-finite orientation".into()));
        }
        Ok(Self { theta, phi })
    }
    pub fn from_vector(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("orientation vector must be non-zero".into()));
        }
        let u = v / n;
        Ok(Self { theta: u.z.clamp(-1.0, 1.0).acos(), phi: u.y.atan2(u.x) })
    }
    pub fn on_axis() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }
    /// Off-axis ⟨111⟩ direction with azimuth index k ∈ {0,1,2}.
    pub fn off_axis(k: usize) -> Self {
        Self { theta: TETRAHEDRAL_ANGLE, phi: 2.0 * std::f64::consts::PI * k as f64 / 3.0 }
    }
    /// The four ⟨111⟩ axes with the first along lab ẑ.
    pub fn nv_axes() -> [Self; 4] {
        [Self::on_axis(), Self::off_axis(0), Self::off_axis(1), Self::off_axis(2)]
    }
    pub fn axis(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
    /// Columns are the defect-frame x', y', z' axes written in lab coordinates.
    pub fn frame(&self) -> Matrix3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let x = Vector3::new(ct * cp, ct * sp, -st);
        let y = Vector3::new(-sp, cp, 0.0);
        Matrix3::from_columns(&[x, y, self.axis()])
    }
    /// Lab vector expressed in the defect frame.
    pub fn to_local(&self, v: &Vec3) -> Vec3 {
        self.frame().transpose() * v
    }
    pub fn to_lab(&self, v: &Vec3) -> Vec3 {
        self.frame() * v
    }
}

#[cfg(test)]
pub(crate) fn c(re: f64) -> C64 {
    Complex64::new(re, 0.0)
}

#[cfg(test)]
pub(crate) fn real_matrix(m: &nalgebra::DMatrix<f64>) -> CMatrix {
    m.map(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn half_and_one() {
        let h = spin_operators(SpinQuantum::half());
        assert_abs_diff_eq!(h.sz.matrix()[(0, 0)].re, 0.5);
        assert_abs_diff_eq!(h.sz.matrix()[(1, 1)].re, -0.5);
        let o = spin_operators(SpinQuantum::one());
        let d: Vec<f64> = (0..3).map(|i| o.sz.matrix()[(i, i)].re).collect();
        assert_eq!(d, vec![1.0, 0.0, -1.0]);
        let sx2 = o.sx.matrix() * o.sx.matrix();
        assert_abs_diff_eq!(sx2.trace().re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_spin() {
        assert!(SpinQuantum::new(0.3).is_err());
        assert!(SpinQuantum::new(-0.5).is_err());
        assert_eq!(SpinQuantum::new(1.5).unwrap().dim(), 4);
    }

    #[test]
    fn commutators() {
        for s in [0.5, 1.0, 1.5, 2.0] {
            let o = spin_operators(SpinQuantum::new(s).unwrap());
            let (x, y, z) = (o.sx.matrix(), o.sy.matrix(), o.sz.matrix());
            let i = Complex64::new(0.0, 1.0);
            assert!((x * y - y * x - z * i).camax() < 1e-13);
            assert!((y * z - z * y - x * i).camax() < 1e-13);
            assert!((z * x - x * z - y * i).camax() < 1e-13);
        }
    }

    #[test]
    fn eigen_trivial() {
        let m = real_matrix(&nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0])));
        let e = eigensystem(&HermitianOperator::new(m).unwrap()).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        let px = spin_operators(SpinQuantum::half()).sx;
        let e = eigensystem(&px).unwrap();
        assert_abs_diff_eq!(e.values[0], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn frame_is_rotation() {
        for o in Orientation::nv_axes() {
            let f = o.frame();
            assert!((f.transpose() * f - Matrix3::identity()).amax() < 1e-14);
            assert!((f.determinant() - 1.0).abs() < 1e-14);
            assert!((o.axis().norm() - 1.0).abs() < 1e-12);
        }
        let axes = Orientation::nv_axes();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_abs_diff_eq!(axes[i].axis().dot(&axes[j].axis()), -1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }
}
