//! Batch front end for `nvdephase`: argument parsing, input ingestion and CSV/JSON output.
//!
//! Scalar results are written as JSON, curves and tables as CSV. `--out -` writes to
//! stdout; file outputs go through a temp file renamed into place.

pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nvdephase::budget::{
    bundled_samples, conversion_analysis, decompose, estimate_concentrations, sensitivity_cwodmr, sensitivity_ramsey,
    Concentrations, CwParams, RamseyParams, SampleRecord, SampleSet, Sensitivity,
};
use nvdephase::fitkit::{
    fit_decay_with, fit_zero_field_odmr, model_select, synth_zero_field_odmr, FitOptions, OdmrSynthParams,
};
use nvdephase::meanfield::{
    analytic_rate_aligned_halfspin, axial_field, bath_transitions, best_pairing, deer_rate, free_rate,
    nearest_transition, nv_offaxis_deer_rate_for, total_dephasing_curve, CouplingModel, DeerMode,
};
use nvdephase::pulsesim::{
    default_tau_grid, log_grid, simulate_interacting_pairs, simulate_single_spin_ensemble, sweep_convergence,
    InteractionDistribution, SingleSpinNoise,
};
use nvdephase::{
    BathSpeciesSpec, ConversionFactors, Error, FitModel, NoiseModel, PhysicalConstants, PulseParams, SequenceKind,
    SequenceSpec, GAUSS,
};

pub use io::{ingest_decay_csv, ingest_samples_json, ingest_spectrum_csv};

/// Default Monte Carlo seed.
pub const DEFAULT_SEED: u64 = 20_240_601;
/// Environment variable naming a constants-override JSON file.
pub const CONSTANTS_ENV: &str = "NVDEPHASE_CONSTANTS";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or malformed input; exit 1.
    Usage(String),
    /// A computation failed to converge or hit a singular system; exit 2.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Quadrature(_) | Error::FitFailed(_) | Error::Singular(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nvdephase", version, about = "Dephasing analysis for NV-center ensembles")]
pub struct Cli {
    /// Physical-constants override JSON (falls back to $NVDEPHASE_CONSTANTS).
    #[arg(long, global = true, value_name = "PATH")]
    pub constants: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Allowed P1 transitions (all four orientation classes) as CSV.
    P1Spectrum(P1SpectrumArgs),
    /// Free-evolution dephasing per ppm of a bath species.
    MeanfieldRate(MeanfieldArgs),
    /// DEER rate per ppm for a P1 line or an off-axis NV class.
    Deer(DeerArgs),
    /// Residual P1 dephasing under continuous bath driving, best of 15 pairings.
    BathDriving(BathDrivingArgs),
    /// Monte Carlo pulse-sequence simulation; writes a decay curve.
    DdSim(DdSimArgs),
    /// Fits a decay curve.
    Fit(FitArgs),
    /// Fits (or synthesizes) a zero-field ODMR spectrum.
    ZfOdmr(ZfOdmrArgs),
    /// Dephasing budget and concentration estimates per sample.
    Budget(BudgetArgs),
    /// Ramsey and CW-ODMR shot-noise sensitivity.
    Sensitivity(SensitivityArgs),
    /// NV conversion analysis against irradiation dose.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-", value_name = "PATH")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct P1SpectrumArgs {
    /// Axial field(s) in Gauss, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "9.5")]
    pub b_gauss: Vec<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Species {
    Electron,
    P1,
    C13,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Coupling {
    QuantizationAxis,
    FullVector,
}

impl From<Coupling> for CouplingModel {
    fn from(c: Coupling) -> Self {
        match c {
            Coupling::QuantizationAxis => CouplingModel::QuantizationAxis,
            Coupling::FullVector => CouplingModel::FullVector,
        }
    }
}

#[derive(Debug, Args)]
pub struct MeanfieldArgs {
    /// Bath species.
    #[arg(long, value_enum, default_value = "electron")]
    pub species: Species,
    /// Axial field(s) in Gauss; more than one writes a per-level CSV table.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub b_gauss: Vec<f64>,
    /// Bath density in ppm for the absolute rate.
    #[arg(long, default_value_t = 1.0)]
    pub density_ppm: f64,
    /// Also report the closed form for a bath aligned with the NV axis (spin-1/2 species).
    #[arg(long)]
    pub aligned: bool,
    /// Which bath spin component couples to the sensor.
    #[arg(long, value_enum, default_value = "quantization-axis")]
    pub coupling: Coupling,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DeerTarget {
    P1,
    NvOffaxis,
}

#[derive(Debug, Args)]
pub struct DeerArgs {
    /// Bath addressed by the DEER pulse.
    #[arg(long, value_enum, default_value = "p1")]
    pub species: DeerTarget,
    /// Axial field in Gauss (P1 only; the NV factor uses a tilted 30 G field).
    #[arg(long, default_value_t = 9.5)]
    pub b_gauss: f64,
    /// Bath line to address, MHz (P1 only).
    #[arg(long, default_value_t = 152.0)]
    pub freq_mhz: f64,
    /// ¹⁴N projection of the addressed NV line.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub m_i: i32,
    /// Apply the finite bath-pulse correction.
    #[arg(long)]
    pub finite_pulse: bool,
    /// Pulse-position sweep at this fixed half-echo (µs) instead of a duration sweep.
    #[arg(long, value_name = "US")]
    pub t_fix_us: Option<f64>,
    /// Bath density in ppm for the absolute rate.
    #[arg(long, default_value_t = 1.0)]
    pub density_ppm: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BathDrivingArgs {
    /// Axial field(s) in Gauss, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,30,100")]
    pub b_gauss: Vec<f64>,
    /// Which bath spin component couples to the sensor.
    #[arg(long, value_enum, default_value = "quantization-axis")]
    pub coupling: Coupling,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DdSimArgs {
    /// ramsey, hahn, cpmg, xy8, xy16, x-x (pair model); dq-ramsey, strain-cpmg (single-spin model).
    #[arg(long, default_value = "xy8")]
    pub sequence: String,
    /// Repetitions of the sequence unit; several values with --convergence.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub n_reps: Vec<u32>,
    /// Pulse spacings in ns (default: 40 log-spaced values, 50 ns to 20 µs).
    #[arg(long, value_delimiter = ',')]
    pub tau_ns: Option<Vec<f64>>,
    /// π-pulse length in ns, 0 for instantaneous pulses.
    #[arg(long, default_value_t = 0.0)]
    pub pi_ns: f64,
    /// Relative Rabi-amplitude error (std).
    #[arg(long, default_value_t = 0.0)]
    pub pulse_error: f64,
    /// Ensemble members.
    #[arg(long, default_value_t = 2000)]
    pub draws: usize,
    /// Monte Carlo seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Per-spin detuning std, MHz (pair model).
    #[arg(long, default_value_t = 1.0)]
    pub disorder_mhz: f64,
    /// Pair coupling std, kHz (pair model).
    #[arg(long, default_value_t = 10.0)]
    pub coupling_khz: f64,
    /// Use a fixed coupling instead of the dipolar angular distribution.
    #[arg(long)]
    pub fixed_coupling: bool,
    /// Linear (Sz) noise std, MHz (single-spin model).
    #[arg(long, default_value_t = 0.1)]
    pub sz_mhz: f64,
    /// Quadratic (Sz²) noise std, MHz (single-spin model).
    #[arg(long, default_value_t = 0.1)]
    pub sz2_mhz: f64,
    /// Rate-vs-N table over a common total-time grid instead of a curve (JSON).
    #[arg(long)]
    pub convergence: bool,
    /// Total sequence times for --convergence, µs: lo,hi,count.
    #[arg(long, value_delimiter = ',', default_value = "2,100,40")]
    pub total_us: Vec<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Decay CSV with header t_us,signal[,sigma].
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// auto, exp, stretched_exp, gaussian_decay or linear.
    #[arg(long, default_value = "auto")]
    pub model: String,
    /// Fit a constant offset as well.
    #[arg(long)]
    pub fit_offset: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ZfOdmrArgs {
    /// Spectrum CSV with header freq_mhz,contrast[,sigma].
    #[arg(long = "in", value_name = "PATH", required_unless_present = "synthesize")]
    pub input: Option<PathBuf>,
    /// Write a synthetic spectrum for this electric-field spread (V/cm) instead of fitting.
    #[arg(long, value_name = "V_PER_CM")]
    pub synthesize: Option<f64>,
    /// Seed for the synthetic field samples.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Sample JSON (default: the bundled reference samples).
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Restrict to one sample.
    #[arg(long)]
    pub sample: Option<String>,
    /// Use the alternative NV-NV factor (20.6 kHz/ppm).
    #[arg(long)]
    pub review_nvnv: bool,
    /// Write the ingested sample set back out instead of the budget.
    #[arg(long)]
    pub emit_samples: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Sample JSON; one estimate per sample with a Ramsey rate.
    #[arg(long = "in", value_name = "PATH", conflicts_with = "gamma2star_khz")]
    pub input: Option<PathBuf>,
    /// Γ₂* in kHz for a single estimate.
    #[arg(long)]
    pub gamma2star_khz: Option<f64>,
    /// NV density, ppm (single estimate, or fallback when a sample has no NV estimate).
    #[arg(long, default_value_t = 0.1)]
    pub density_ppm: f64,
    /// Stretch exponent of the Ramsey decay.
    #[arg(long, default_value_t = 1.0)]
    pub stretch: f64,
    /// Sensing volume, mm³.
    #[arg(long, default_value_t = 0.04)]
    pub volume_mm3: f64,
    /// Readout contrast.
    #[arg(long, default_value_t = 0.02)]
    pub contrast: f64,
    /// Photons per second per NV.
    #[arg(long, default_value_t = 3e4)]
    pub photon_rate: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Sample JSON with doses and initial nitrogen (default: bundled samples).
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `argv` (program name first), runs and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn load_constants(flag: Option<&Path>) -> Result<PhysicalConstants, CliError> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONSTANTS_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
    };
    match path {
        None => Ok(PhysicalConstants::default()),
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            PhysicalConstants::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let k = load_constants(cli.constants.as_deref())?;
    match &cli.command {
        Command::P1Spectrum(a) => p1_spectrum(a, &k),
        Command::MeanfieldRate(a) => meanfield_rate(a, &k),
        Command::Deer(a) => deer(a, &k),
        Command::BathDriving(a) => bath_driving(a, &k),
        Command::DdSim(a) => dd_sim(a),
        Command::Fit(a) => fit(a),
        Command::ZfOdmr(a) => zf_odmr(a, &k),
        Command::Budget(a) => budget(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Convert(a) => convert(a),
    }
}

fn positive_fields(b: &[f64]) -> Result<(), CliError> {
    if b.is_empty() || b.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(CliError::Usage("--b-gauss values must be positive".into()));
    }
    Ok(())
}

fn p1_spectrum(a: &P1SpectrumArgs, k: &PhysicalConstants) -> Result<(), CliError> {
    positive_fields(&a.b_gauss)?;
    let p1 = BathSpeciesSpec::p1(k);
    let mut rows = Vec::new();
    for &bg in &a.b_gauss {
        let b = axial_field(bg);
        for g in 0..p1.orientations.len() {
            let mut ts = bath_transitions(&p1, g, &b, k)?;
            ts.retain(|t| t.freq > 0.0);
            ts.sort_by(|x, y| x.freq.total_cmp(&y.freq));
            for t in ts {
                rows.push(vec![
                    bg.to_string(),
                    t.freq.to_string(),
                    t.strength.to_string(),
                    t.lower.to_string(),
                    t.upper.to_string(),
                    g.to_string(),
                ]);
            }
        }
    }
    io::emit(&a.output.out, &io::table_csv(&["B_gauss", "freq_MHz", "strength", "n", "m", "orientation"], &rows)?)
}

fn species(s: Species, c: Coupling, k: &PhysicalConstants) -> BathSpeciesSpec {
    let b = match s {
        Species::Electron => BathSpeciesSpec::electron(k),
        Species::P1 => BathSpeciesSpec::p1(k),
        Species::C13 => BathSpeciesSpec::carbon13(k),
    };
    b.with_coupling(c.into())
}

#[derive(Serialize)]
struct MeanfieldOut {
    species: String,
    b_gauss: f64,
    coupling: String,
    rate_khz_per_ppm: f64,
    density_ppm: f64,
    rate_khz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_khz_per_ppm: Option<f64>,
}

fn meanfield_rate(a: &MeanfieldArgs, k: &PhysicalConstants) -> Result<(), CliError> {
    positive_fields(&a.b_gauss)?;
    if !(a.density_ppm >= 0.0) {
        return Err(CliError::Usage("--density-ppm must be >= 0".into()));
    }
    let bath = species(a.species, a.coupling, k);
    if a.b_gauss.len() > 1 {
        let curve = total_dephasing_curve(&bath, &a.b_gauss, k)?;
        let mut rows = Vec::new();
        for p in &curve {
            for l in &p.levels {
                rows.push(vec![
                    p.b_gauss.to_string(),
                    l.level.to_string(),
                    l.group.to_string(),
                    l.rate.to_string(),
                    p.total.to_string(),
                ]);
            }
        }
        let header = ["B_gauss", "level_index", "orientation", "rate_kHz_per_ppm", "total"];
        return io::emit(&a.output.out, &io::table_csv(&header, &rows)?);
    }
    let bg = a.b_gauss[0];
    let r = free_rate(&bath, &axial_field(bg), k)?;
    let closed = match (a.aligned, a.species) {
        (false, _) | (true, Species::P1) => None,
        (true, s) => Some(analytic_rate_aligned_halfspin(species(s, a.coupling, k).gamma, k)?.value),
    };
    if a.aligned && closed.is_none() {
        return Err(CliError::Usage("--aligned needs a spin-1/2 species (electron or c13)".into()));
    }
    let out = MeanfieldOut {
        species: bath.name.clone(),
        b_gauss: bg,
        coupling: a.coupling.to_possible_value().expect("named variant").get_name().to_string(),
        rate_khz_per_ppm: r,
        density_ppm: a.density_ppm,
        rate_khz: r * a.density_ppm,
        closed_form_khz_per_ppm: closed,
    };
    io::emit(&a.output.out, &io::json(&out))
}

#[derive(Serialize)]
struct DeerOut {
    species: String,
    b_gauss: f64,
    line_mhz: Option<f64>,
    orientation_class: Option<usize>,
    transition: Option<(usize, usize)>,
    sequence: String,
    finite_pulse: bool,
    rate_khz_per_ppm: f64,
    density_ppm: f64,
    rate_khz: f64,
}

fn deer(a: &DeerArgs, k: &PhysicalConstants) -> Result<(), CliError> {
    let mode = match a.t_fix_us {
        Some(t) if t > 0.0 => DeerMode::PulseSweep { t_fix: t },
        Some(_) => return Err(CliError::Usage("--t-fix-us must be positive".into())),
        None => DeerMode::DurationSweep,
    };
    let out = match a.species {
        DeerTarget::P1 => {
            positive_fields(&[a.b_gauss])?;
            let p1 = BathSpeciesSpec::p1(k);
            let b = axial_field(a.b_gauss);
            let (g, t) = nearest_transition(&p1, &b, a.freq_mhz, k)?;
            let r = deer_rate(&p1, &b, g, (t.lower, t.upper), mode, a.finite_pulse, k)?;
            DeerOut {
                species: r.species,
                b_gauss: a.b_gauss,
                line_mhz: Some(t.freq),
                orientation_class: Some(g),
                transition: r.transition,
                sequence: r.sequence,
                finite_pulse: a.finite_pulse,
                rate_khz_per_ppm: r.value,
                density_ppm: a.density_ppm,
                rate_khz: r.value * a.density_ppm,
            }
        }
        DeerTarget::NvOffaxis => {
            if a.finite_pulse || a.t_fix_us.is_some() {
                return Err(CliError::Usage("NV DEER supports only the ideal duration sweep".into()));
            }
            let b = nvdephase::meanfield::nv_deer_default_field();
            let r = nv_offaxis_deer_rate_for(&b, a.m_i, k)?;
            DeerOut {
                species: r.species,
                b_gauss: b.norm() / GAUSS,
                line_mhz: None,
                orientation_class: None,
                transition: r.transition,
                sequence: r.sequence,
                finite_pulse: false,
                rate_khz_per_ppm: r.value,
                density_ppm: a.density_ppm,
                rate_khz: r.value * a.density_ppm,
            }
        }
    };
    io::emit(&a.output.out, &io::json(&out))
}

fn bath_driving(a: &BathDrivingArgs, k: &PhysicalConstants) -> Result<(), CliError> {
    positive_fields(&a.b_gauss)?;
    let p1 = BathSpeciesSpec::p1(k).with_coupling(a.coupling.into());
    let mut rows = Vec::new();
    for &bg in &a.b_gauss {
        let r = best_pairing(&p1, &axial_field(bg), k)?;
        let pairing = r.best_pairing.iter().map(|(x, y)| format!("{x}-{y}")).collect::<Vec<_>>().join(" ");
        rows.push(vec![
            bg.to_string(),
            r.undriven.to_string(),
            r.best_residual.to_string(),
            r.suppression.to_string(),
            r.best_index.to_string(),
            pairing,
        ]);
    }
    let header = ["B_gauss", "undriven_kHz_per_ppm", "residual_kHz_per_ppm", "suppression", "pairing_index", "pairing"];
    io::emit(&a.output.out, &io::table_csv(&header, &rows)?)
}

fn dd_sim(a: &DdSimArgs) -> Result<(), CliError> {
    let kind = SequenceKind::parse(&a.sequence)?;
    if kind.is_deer() {
        return Err(CliError::Usage(format!("{} is computed by the deer subcommand", kind.name())));
    }
    if a.n_reps.is_empty() || a.n_reps.contains(&0) {
        return Err(CliError::Usage("--n-reps values must be >= 1".into()));
    }
    let pulses = PulseParams { pi_duration_ns: a.pi_ns, amplitude_error_sigma: a.pulse_error };
    let noise = NoiseModel {
        disorder_sigma: 2.0 * std::f64::consts::PI * a.disorder_mhz * 1e6,
        interaction_scale: 2.0 * std::f64::consts::PI * a.coupling_khz * 1e3,
        distribution: if a.fixed_coupling { InteractionDistribution::Fixed } else { InteractionDistribution::Dipolar },
        ensemble_draws: a.draws,
        seed: a.seed,
    };
    if a.convergence {
        let [lo, hi, n] = a.total_us[..] else {
            return Err(CliError::Usage("--total-us takes lo,hi,count".into()));
        };
        if !(lo > 0.0 && hi > lo && n >= 2.0) {
            return Err(CliError::Usage("--total-us needs 0 < lo < hi and count >= 2".into()));
        }
        let table = sweep_convergence(&noise, &pulses, kind, &a.n_reps, &log_grid(lo, hi, n as usize))?;
        return io::emit(&a.output.out, &io::json(&table));
    }
    if a.n_reps.len() != 1 {
        return Err(CliError::Usage("several --n-reps values need --convergence".into()));
    }
    let taus = a.tau_ns.clone().unwrap_or_else(default_tau_grid);
    let seq = SequenceSpec::tau_sweep(kind, a.n_reps[0], taus);
    let curve = match kind {
        SequenceKind::DqRamsey | SequenceKind::StrainCpmg => {
            let n = SingleSpinNoise { delta_sigma: a.sz2_mhz, a_sigma: a.sz_mhz, seed: a.seed };
            simulate_single_spin_ensemble(&n, &seq, a.draws)?
        }
        _ => simulate_interacting_pairs(&noise, &pulses, &seq)?,
    };
    io::emit(&a.output.out, &io::decay_csv(&curve))
}

fn fit(a: &FitArgs) -> Result<(), CliError> {
    let curve = ingest_decay_csv(&a.input)?;
    let r = if a.model == "auto" {
        model_select(&curve)?
    } else {
        let m = FitModel::parse(&a.model)?;
        if m == FitModel::OdmrDip {
            return Err(CliError::Usage("odmr_dip spectra are fitted by zf-odmr".into()));
        }
        fit_decay_with(&curve, m, None, FitOptions { fit_offset: a.fit_offset })?
    };
    io::emit(&a.output.out, &io::json(&r))
}

fn zf_odmr(a: &ZfOdmrArgs, k: &PhysicalConstants) -> Result<(), CliError> {
    if let Some(sigma_e) = a.synthesize {
        let s = synth_zero_field_odmr(&OdmrSynthParams { sigma_e, seed: a.seed, ..Default::default() }, k)?;
        return io::emit(&a.output.out, &io::spectrum_csv(&s));
    }
    let path = a.input.as_ref().expect("clap requires --in without --synthesize");
    let s = ingest_spectrum_csv(path)?;
    io::emit(&a.output.out, &io::json(&fit_zero_field_odmr(&s, k)?))
}

fn load_samples(input: Option<&Path>) -> Result<SampleSet, CliError> {
    match input {
        Some(p) => ingest_samples_json(p),
        None => Ok(SampleSet { provenance: None, version: 1, samples: bundled_samples() }),
    }
}

#[derive(Serialize)]
struct BudgetOut {
    budget: nvdephase::DephasingBudget,
    #[serde(skip_serializing_if = "Option::is_none")]
    concentrations: Option<Concentrations>,
}

fn budget(a: &BudgetArgs) -> Result<(), CliError> {
    let mut set = load_samples(a.input.as_deref())?;
    if let Some(name) = &a.sample {
        set.samples.retain(|r| &r.name == name);
        if set.samples.is_empty() {
            return Err(CliError::Usage(format!("no sample named '{name}'")));
        }
    }
    if a.emit_samples {
        return io::emit(&a.output.out, &io::json(&set));
    }
    let f = if a.review_nvnv { ConversionFactors::default().with_review_nvnv() } else { ConversionFactors::default() };
    let mut out = Vec::with_capacity(set.samples.len());
    for r in &set.samples {
        out.push(BudgetOut { budget: decompose(r, &f)?, concentrations: estimate_concentrations(r, &f).ok() });
    }
    io::emit(&a.output.out, &io::json(&out))
}

#[derive(Serialize)]
struct SensitivityOut {
    sample: Option<String>,
    gamma2star_khz: f64,
    n_nv_ppm: f64,
    ramsey: Sensitivity,
    cw: Sensitivity,
    cw_contrast: f64,
    cw_linewidth_hz: f64,
}

fn sensitivity_one(a: &SensitivityArgs, name: Option<String>, g: f64, stretch: f64, n: f64) -> Result<SensitivityOut, CliError> {
    let ram = sensitivity_ramsey(&RamseyParams {
        gamma2star_khz: g,
        stretch,
        n_nv_ppm: n,
        volume_mm3: a.volume_mm3,
        contrast: a.contrast,
        photon_rate: a.photon_rate,
        ..Default::default()
    })?;
    let (cw, pt) = sensitivity_cwodmr(&CwParams {
        gamma2star_khz: g,
        n_nv_ppm: n,
        volume_mm3: a.volume_mm3,
        photon_rate: a.photon_rate,
        ..Default::default()
    })?;
    Ok(SensitivityOut {
        sample: name,
        gamma2star_khz: g,
        n_nv_ppm: n,
        ramsey: ram,
        cw,
        cw_contrast: pt.contrast,
        cw_linewidth_hz: pt.linewidth_hz,
    })
}

fn sensitivity(a: &SensitivityArgs) -> Result<(), CliError> {
    if let Some(g) = a.gamma2star_khz {
        let s = sensitivity_one(a, None, g, a.stretch, a.density_ppm)?;
        return io::emit(&a.output.out, &io::json(&s));
    }
    let set = load_samples(a.input.as_deref())?;
    let f = ConversionFactors::default();
    let mut out = Vec::new();
    for r in &set.samples {
        let Some(g) = r.gamma2star else { continue };
        out.push(sensitivity_one(a, Some(r.name.clone()), g.value, 1.0, nv_density(r, &f, a.density_ppm))?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("no sample has a gamma2star rate".into()));
    }
    io::emit(&a.output.out, &io::json(&out))
}

/// NV density from the XY8 asymptote, else off-axis DEER, else `fallback`.
fn nv_density(r: &SampleRecord, f: &ConversionFactors, fallback: f64) -> f64 {
    estimate_concentrations(r, f)
        .ok()
        .and_then(|c| c.n_nv.or(c.n_nv_deer))
        .map(|e| e.ppm)
        .filter(|p| *p > 0.0)
        .unwrap_or(fallback)
}

fn convert(a: &ConvertArgs) -> Result<(), CliError> {
    let set = load_samples(a.input.as_deref())?;
    io::emit(&a.output.out, &io::json(&conversion_analysis(&set.samples, &ConversionFactors::default())?))
}
