use serde::{Deserialize, Serialize};

use crate::constants::{PhysicalConstants, GAUSS};
use crate::error::{Error, Result};
use crate::spin_core::{
    build_p1_hamiltonian, eigensystem, p1_electron_ops, spin_operators, Eigensystem,
    HermitianOperator, Orientation, SpinOps, SpinQuantum, Vec3, C64,
};

/// How the bath spin's field enters the sensor's secular coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// Keep only the bath spin component along its quantization axis.
    #[default]
    QuantizationAxis,
    /// Use the full expectation vector ⟨S⟩ of each bath level.
    FullVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BathHamiltonian {
    /// Bare Zeeman spin (free electron or ¹³C), quantized along lab ẑ.
    Zeeman,
    /// Substitutional nitrogen: electron ½ ⊗ ¹⁴N 1.
    P1,
    /// NV spin-1 with axial ¹⁴N hyperfine, quantized along its own axis.
    Nv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum LevelPopulations {
    Thermal,
    Explicit(Vec<f64>),
    /// Electron projected onto m_s in the bath's own frame, nuclei unpolarized.
    ElectronPolarized(i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationGroup {
    pub orientation: Orientation,
    pub weight: f64,
    pub populations: LevelPopulations,
}

/// A bath species: spin structure, coupling γ, orientation classes and populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpeciesSpec {
    pub name: String,
    pub electron_spin: Option<SpinQuantum>,
    pub nuclear_spin: Option<SpinQuantum>,
    pub hamiltonian: BathHamiltonian,
    /// Gyromagnetic ratio of the coupled spin, MHz/T.
    pub gamma: f64,
    pub orientations: Vec<OrientationGroup>,
    pub coupling: CouplingModel,
}

impl BathSpeciesSpec {
    pub fn electron(k: &PhysicalConstants) -> Self {
        Self {
            name: "electron".into(),
            electron_spin: Some(SpinQuantum::half()),
            nuclear_spin: None,
            hamiltonian: BathHamiltonian::Zeeman,
            gamma: k.gamma_e,
            orientations: vec![single_group()],
            coupling: CouplingModel::QuantizationAxis,
        }
    }

    pub fn zeeman_half(name: &str, gamma: f64) -> Self {
        Self {
            name: name.into(),
            electron_spin: Some(SpinQuantum::half()),
            nuclear_spin: None,
            hamiltonian: BathHamiltonian::Zeeman,
            gamma,
            orientations: vec![single_group()],
            coupling: CouplingModel::QuantizationAxis,
        }
    }

    pub fn carbon13(k: &PhysicalConstants) -> Self {
        Self {
            name: "13C".into(),
            electron_spin: None,
            nuclear_spin: Some(SpinQuantum::half()),
            hamiltonian: BathHamiltonian::Zeeman,
            gamma: k.gamma_c13,
            orientations: vec![single_group()],
            coupling: CouplingModel::QuantizationAxis,
        }
    }

    /// P1 bath: one on-axis class (¼) and the three equivalent off-axis classes (¾).
    pub fn p1(k: &PhysicalConstants) -> Self {
        Self {
            name: "P1".into(),
            electron_spin: Some(SpinQuantum::half()),
            nuclear_spin: Some(SpinQuantum::one()),
            hamiltonian: BathHamiltonian::P1,
            gamma: k.gamma_e,
            orientations: vec![
                OrientationGroup {
                    orientation: Orientation::on_axis(),
                    weight: 0.25,
                    populations: LevelPopulations::Thermal,
                },
                OrientationGroup {
                    orientation: Orientation::off_axis(0),
                    weight: 0.75,
                    populations: LevelPopulations::Thermal,
                },
            ],
            coupling: CouplingModel::QuantizationAxis,
        }
    }

    /// One class of NVs along `orientation`, carrying `weight` of the NV density,
    /// optically polarized into m_s = 0.
    pub fn nv_group(k: &PhysicalConstants, orientation: Orientation, weight: f64) -> Self {
        Self {
            name: "NV".into(),
            electron_spin: Some(SpinQuantum::one()),
            nuclear_spin: Some(SpinQuantum::one()),
            hamiltonian: BathHamiltonian::Nv,
            gamma: k.gamma_e,
            orientations: vec![OrientationGroup {
                orientation,
                weight,
                populations: LevelPopulations::ElectronPolarized(0),
            }],
            coupling: CouplingModel::QuantizationAxis,
        }
    }

    pub fn with_coupling(mut self, c: CouplingModel) -> Self {
        self.coupling = c;
        self
    }

    pub fn with_gamma(mut self, g: f64) -> Self {
        self.gamma = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidInput("bath γ must be finite and ≥ 0".into()));
        }
        if self.orientations.is_empty() {
            return Err(Error::InvalidInput("bath needs at least one orientation".into()));
        }
        let w: f64 = self.orientations.iter().map(|g| g.weight).sum();
        if self.orientations.iter().any(|g| g.weight < 0.0) || (w - 1.0).abs() > 1e-9 {
            // Partial weights are allowed for a single addressed class of a larger family.
            if !(self.orientations.len() == 1 && w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidInput(format!("orientation weights sum to {w}")));
            }
        }
        let dim = self.dim();
        for g in &self.orientations {
            if let LevelPopulations::Explicit(p) = &g.populations {
                if p.len() != dim {
                    return Err(Error::InvalidInput(format!("{} populations for {dim} levels", p.len())));
                }
                let s: f64 = p.iter().sum();
                if p.iter().any(|x| *x < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput("populations must be ≥ 0 and sum to 1".into()));
                }
            }
        }
        Ok(())
    }

    fn coupled_spin(&self) -> SpinQuantum {
        self.electron_spin.or(self.nuclear_spin).unwrap_or(SpinQuantum::half())
    }

    pub fn dim(&self) -> usize {
        match self.hamiltonian {
            BathHamiltonian::Zeeman => self.coupled_spin().dim(),
            BathHamiltonian::P1 => 6,
            BathHamiltonian::Nv => 3 * self.nuclear_spin.map_or(1, |s| s.dim()),
        }
    }

    /// Coupled-spin operators in the bath's local frame.
    fn spin_ops(&self) -> SpinOps {
        match self.hamiltonian {
            BathHamiltonian::Zeeman => spin_operators(self.coupled_spin()),
            BathHamiltonian::P1 => p1_electron_ops(),
            BathHamiltonian::Nv => {
                let ni = self.nuclear_spin.map_or(1, |s| s.dim());
                spin_operators(SpinQuantum::one()).embed(1, ni)
            }
        }
    }

    /// Bath Hamiltonian of one orientation class at lab field `b` (Tesla).
    pub fn hamiltonian(&self, group: usize, b: &Vec3, k: &PhysicalConstants) -> Result<HermitianOperator> {
        let o = &self.orientations[group].orientation;
        match self.hamiltonian {
            BathHamiltonian::Zeeman => Ok(self.spin_ops().along(&o.to_local(b)).scale(self.gamma)),
            BathHamiltonian::P1 => build_p1_hamiltonian(b, o, k),
            BathHamiltonian::Nv => {
                let s = self.spin_ops();
                let sz2 = s.sz.anticommutator_half(&s.sz);
                let mut terms: Vec<(f64, HermitianOperator)> =
                    vec![(k.d_gs, sz2), (k.gamma_e, s.along(&o.to_local(b)))];
                if let Some(ns) = self.nuclear_spin {
                    let i = spin_operators(ns).embed(3, 1);
                    terms.push((k.a_hf_nv14n, s.sz.anticommutator_half(&i.sz)));
                    terms.push((k.q_nv14n, i.sz.anticommutator_half(&i.sz)));
                    terms.push((-k.gamma_n14, i.along(&o.to_local(b))));
                }
                let refs: Vec<(f64, &HermitianOperator)> = terms.iter().map(|(c, o)| (*c, o)).collect();
                HermitianOperator::combine(&refs)
            }
        }
    }

    /// Lab axis onto which the coupling is projected in the quantization-axis model.
    pub fn quantization_axis(&self, group: usize) -> Vec3 {
        match self.hamiltonian {
            BathHamiltonian::Nv => self.orientations[group].orientation.axis(),
            _ => Vec3::z(),
        }
    }

    /// Coupled-spin operator along a lab direction, in the local frame.
    pub fn lab_component(&self, group: usize, u: &Vec3) -> HermitianOperator {
        let local = self.orientations[group].orientation.to_local(u);
        self.spin_ops().along(&local)
    }

    /// Drive components along lab x, y and z; a transition is allowed when any of
    /// them connects the two levels.
    pub fn rf_drives(&self, group: usize) -> [HermitianOperator; 3] {
        [
            self.lab_component(group, &Vec3::x()),
            self.lab_component(group, &Vec3::y()),
            self.lab_component(group, &Vec3::z()),
        ]
    }

    pub fn levels(&self, group: usize, b: &Vec3, k: &PhysicalConstants) -> Result<BathLevels> {
        self.validate()?;
        let h = self.hamiltonian(group, b, k)?;
        let eig = eigensystem(&h)?;
        let q = self.quantization_axis(group);
        let probe = self.lab_component(group, &q);
        let (eig, q_resp) = resolve_degenerate(eig, &probe);
        let n = eig.values.len();
        let coupling: Vec<Vec3> = match self.coupling {
            CouplingModel::QuantizationAxis => q_resp.iter().map(|w| q * *w).collect(),
            CouplingModel::FullVector => {
                let comps: Vec<Vec<f64>> = [Vec3::x(), Vec3::y(), Vec3::z()]
                    .iter()
                    .map(|u| {
                        let m = eig.transform(&self.lab_component(group, u));
                        (0..n).map(|i| m[(i, i)].re).collect()
                    })
                    .collect();
                (0..n).map(|i| Vec3::new(comps[0][i], comps[1][i], comps[2][i])).collect()
            }
        };
        let populations = self.populations(group, &eig)?;
        Ok(BathLevels { energies: eig.values.clone(), eig, coupling, populations })
    }

    fn populations(&self, group: usize, eig: &Eigensystem) -> Result<Vec<f64>> {
        let n = eig.values.len();
        match &self.orientations[group].populations {
            LevelPopulations::Thermal => Ok(vec![1.0 / n as f64; n]),
            LevelPopulations::Explicit(p) => Ok(p.clone()),
            LevelPopulations::ElectronPolarized(ms) => {
                let s = self.spin_ops();
                let dim = s.dim();
                let mut proj = nalgebra::DMatrix::<C64>::zeros(dim, dim);
                let mut tr = 0.0;
                for d in 0..dim {
                    if (s.sz.matrix()[(d, d)].re - *ms as f64).abs() < 1e-9 {
                        proj[(d, d)] = C64::new(1.0, 0.0);
                        tr += 1.0;
                    }
                }
                if tr == 0.0 {
                    return Err(Error::InvalidInput(format!("no m_s = {ms} states")));
                }
                let p = HermitianOperator::new(proj)?;
                Ok((0..n).map(|i| p.expectation(&eig.vector(i)) / tr).collect())
            }
        }
    }
}

fn single_group() -> OrientationGroup {
    OrientationGroup { orientation: Orientation::on_axis(), weight: 1.0, populations: LevelPopulations::Thermal }
}

/// Rotate degenerate clusters so `probe` is diagonal there; returns diagonal responses.
fn resolve_degenerate(mut eig: Eigensystem, probe: &HermitianOperator) -> (Eigensystem, Vec<f64>) {
    let n = eig.values.len();
    let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.values[end] - eig.values[end - 1] < 1e-9 * scale {
            end += 1;
        }
        if end - start > 1 {
            let sub = eig.vectors.columns(start, end - start).into_owned();
            let w = sub.adjoint() * probe.matrix() * &sub;
            let local = eigensystem(&HermitianOperator::from_raw(w)).expect("hermitian block");
            let rotated = &sub * &local.vectors;
            for j in 0..end - start {
                eig.vectors.set_column(start + j, &rotated.column(j));
            }
        }
        start = end;
    }
    let m = eig.transform(probe);
    let resp = (0..n).map(|i| m[(i, i)].re).collect();
    (eig, resp)
}

/// Bath eigenlevels with their coupling vectors (lab frame, spin units) and populations.
#[derive(Debug, Clone)]
pub struct BathLevels {
    pub energies: Vec<f64>,
    pub eig: Eigensystem,
    pub coupling: Vec<Vec3>,
    pub populations: Vec<f64>,
}

/// Field of `gauss` along lab ẑ, in Tesla.
pub fn axial_field(gauss: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, gauss * GAUSS)
}

/// Per-level coupling A_k^i (MHz) between an NV pair (m_a, m_b) at the origin and a bath
/// spin at `position` (nm), from exact eigenvalue differences with overlap matching.
pub fn coupling_strengths(
    nv_pair: (i32, i32),
    bath: &BathSpeciesSpec,
    group: usize,
    position: &Vec3,
    b: &Vec3,
    k: &PhysicalConstants,
) -> Result<Vec<f64>> {
    let r = position.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput("bath position must be non-zero".into()));
    }
    let h0 = bath.hamiltonian(group, b, k)?;
    let levels = bath.levels(group, b, k)?;
    let u = position / r;
    let a = Vec3::z() - u * (3.0 * u.z);
    let j = k.dipolar_j(k.gamma_e, bath.gamma) / (r * r * r);
    let v = match bath.coupling {
        CouplingModel::QuantizationAxis => {
            let q = bath.quantization_axis(group);
            bath.lab_component(group, &q).scale(j * a.dot(&q))
        }
        CouplingModel::FullVector => bath.lab_component(group, &a).scale(j),
    };
    let shifted = |m: i32| -> Result<Vec<f64>> {
        let h = h0.add(&v.scale(m as f64))?;
        let e = eigensystem(&h)?;
        Ok(match_by_overlap(&levels.eig, &e))
    };
    let ea = shifted(nv_pair.0)?;
    let eb = shifted(nv_pair.1)?;
    Ok(ea.iter().zip(&eb).map(|(x, y)| x - y).collect())
}

/// Eigenvalues of `e` reordered to follow the reference eigenvectors by maximal overlap.
fn match_by_overlap(reference: &Eigensystem, e: &Eigensystem) -> Vec<f64> {
    let n = reference.values.len();
    let ov = reference.vectors.adjoint() * &e.vectors;
    let mut taken = vec![false; n];
    let mut out = vec![0.0; n];
    // Greedy assignment, largest overlaps first.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((ov[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut done = vec![false; n];
    for (_, i, j) in pairs {
        if !done[i] && !taken[j] {
            done[i] = true;
            taken[j] = true;
            out[i] = e.values[j];
        }
    }
    out
}

