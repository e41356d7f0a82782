//! Config-driven experiment pipelines behind the `qptkit` binary.
//!
//! A run is described by an [`ExperimentConfig`] (TOML on disk), resolved,
//! validated and executed against a [`SimulatedExecutor`]. Every run writes
//! into its own output directory and every emitted file carries the config
//! hash and the crate version. Nothing time-dependent is persisted, so a
//! rerun of the same config reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{NoiseModel, SimulatedExecutor};
use crate::circuit::{build_trotter1, build_trotter2, decompose, qasm, Bc, Circuit};
use crate::compress::{adam_optimize, epsilon, exact_propagator, AdamConfig, CompressionProblem, ProblemSpec};
use crate::linalg::c64;
use crate::pauli::PauliString;
use crate::tomo::full::{chi_uncertainty, reconstruct_chi, MAX_FULL_QUBITS};
use crate::tomo::selective::conjugate_closure;
use crate::tomo::spectrum::cluster_angles;
use crate::tomo::{
    assemble_sparse_chi, build_mubs, lambda_spectrum, mask_to_ideal_support, process_fidelity, run_full_qpt, select_top_k,
    spectral_stats, sqpt_element, superoperator_from_chi, twirl_diagonal, ChiMatrix, ElementEstimate, HistogramSpec, MubSet,
    SpectralStats, Superoperator, TwirlData, MAX_TOMO_QUBITS,
};
use crate::{Error, Result, VERSION};

/// Largest chain accepted by the scan and compression pipelines.
pub const MAX_EXPERIMENT_QUBITS: usize = 8;
const MAX_LAYERS: usize = 64;
const MAX_SHOTS: usize = 1 << 30;
/// Angular merge tolerance for the ideal eigenvalue clusters.
const CLUSTER_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    InfidelityScan,
    FullQpt,
    Sqpt,
    Twirl,
    Spectrum,
    Compress,
    ExportQasm,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::InfidelityScan => "infidelity_scan",
            ExperimentKind::FullQpt => "full_qpt",
            ExperimentKind::Sqpt => "sqpt",
            ExperimentKind::Twirl => "twirl",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Compress => "compress",
            ExperimentKind::ExportQasm => "export_qasm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitKind {
    Trotter1,
    Trotter2,
    Compressed,
}

impl CircuitKind {
    pub fn name(self) -> &'static str {
        match self {
            CircuitKind::Trotter1 => "trotter1",
            CircuitKind::Trotter2 => "trotter2",
            CircuitKind::Compressed => "compressed",
        }
    }
}

/// Reconstruction strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QptMode {
    /// Full linear-inversion QPT.
    Full,
    /// Twirled diagonal plus selectively measured off-diagonal elements.
    Sqpt,
}

impl QptMode {
    pub fn name(self) -> &'static str {
        match self {
            QptMode::Full => "full",
            QptMode::Sqpt => "sqpt",
        }
    }
}

/// Number of off-diagonal χ elements measured per circuit type in sparse
/// reconstructions. Each selected element brings its conjugate along.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopK {
    pub trotter1: usize,
    pub trotter2: usize,
    pub compressed: usize,
}

impl Default for TopK {
    fn default() -> Self {
        TopK { trotter1: 32, trotter2: 32, compressed: 202 }
    }
}

impl TopK {
    pub fn get(&self, kind: CircuitKind) -> usize {
        match kind {
            CircuitKind::Trotter1 => self.trotter1,
            CircuitKind::Trotter2 => self.trotter2,
            CircuitKind::Compressed => self.compressed,
        }
    }
}

/// Experiment description. All keys are optional in the TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Set by the subcommand when absent.
    pub kind: Option<ExperimentKind>,
    pub num_qubits: usize,
    pub bc: Bc,
    pub t: f64,
    /// Trotter steps, or brickwall layers for compressed circuits.
    pub layers: Vec<usize>,
    pub circuits: Vec<CircuitKind>,
    pub noise: NoiseModel,
    /// Shots per setting; 0 means exact expectation values.
    pub shots: usize,
    /// Master seed; replaces `noise.seed` on resolution.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Reconstruction used by `spectrum`; full for L <= 3, sparse above.
    pub mode: Option<QptMode>,
    pub top_k: TopK,
    /// `|χ_ideal|` at or below this counts as outside the ideal support.
    pub mask_threshold: f64,
    pub adam: AdamConfig,
    pub histogram: HistogramSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            num_qubits: 3,
            bc: Bc::Open,
            t: 1.0,
            layers: vec![1, 2],
            circuits: vec![CircuitKind::Trotter1, CircuitKind::Trotter2, CircuitKind::Compressed],
            noise: NoiseModel::default(),
            shots: 1024,
            seed: 0,
            output_dir: PathBuf::from("runs/qptkit"),
            mode: None,
            top_k: TopK::default(),
            mask_threshold: 1e-10,
            adam: AdamConfig::default(),
            histogram: HistogramSpec::default(),
        }
    }
}

/// Parses `raw` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies one `dotted.key=value` override to a TOML table.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override `{key}`: `{part}` is not a table"))),
        };
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides, and checks the schema.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Reads a config file (or starts from defaults) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with derived fields filled in.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.noise.seed = c.seed;
        c
    }

    /// Reconstruction mode for spectra.
    pub fn spectrum_mode(&self) -> QptMode {
        self.mode.unwrap_or(if self.num_qubits <= MAX_FULL_QUBITS { QptMode::Full } else { QptMode::Sqpt })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let l = self.num_qubits;
        if !(2..=MAX_EXPERIMENT_QUBITS).contains(&l) {
            return bad(format!("num_qubits must lie in 2..={MAX_EXPERIMENT_QUBITS}, got {l}"));
        }
        if self.bc == Bc::Periodic && l < 3 {
            return bad("periodic chains need at least 3 qubits".into());
        }
        if !self.t.is_finite() {
            return bad(format!("t = {} is not finite", self.t));
        }
        if let Some(&n) = self.layers.iter().find(|&&n| n == 0 || n > MAX_LAYERS) {
            return bad(format!("layer counts must lie in 1..={MAX_LAYERS}, got {n}"));
        }
        for (i, a) in self.layers.iter().enumerate() {
            if self.layers[..i].contains(a) {
                return bad(format!("layer count {a} listed twice"));
            }
        }
        for (i, a) in self.circuits.iter().enumerate() {
            if self.circuits[..i].contains(a) {
                return bad(format!("circuit type {} listed twice", a.name()));
            }
        }
        if self.shots > MAX_SHOTS {
            return bad(format!("shots must not exceed {MAX_SHOTS}"));
        }
        if !(self.mask_threshold >= 0.0 && self.mask_threshold.is_finite()) {
            return bad(format!("mask_threshold {} must be non-negative", self.mask_threshold));
        }
        self.noise.validate().map_err(|e| Error::Config(format!("noise: {e}")))?;
        self.adam.validate()?;
        self.histogram.validate()?;
        let tomo_limit = |what: &str, max: usize| {
            if l > max {
                bad(format!("mode/L mismatch: {what} supports at most {max} qubits, got {l}"))
            } else {
                Ok(())
            }
        };
        match self.kind {
            Some(ExperimentKind::FullQpt) => tomo_limit("full QPT", MAX_FULL_QUBITS),
            Some(ExperimentKind::Sqpt) => tomo_limit("selective QPT", MAX_TOMO_QUBITS),
            Some(ExperimentKind::Twirl) => tomo_limit("twirling", MAX_TOMO_QUBITS),
            Some(ExperimentKind::Spectrum) => match self.spectrum_mode() {
                QptMode::Full => tomo_limit("full QPT", MAX_FULL_QUBITS),
                QptMode::Sqpt => tomo_limit("selective QPT", MAX_TOMO_QUBITS),
            },
            _ => Ok(()),
        }
    }

    /// Hash of everything that influences numeric results. The experiment
    /// kind and the output directory are excluded, so the pipeline stages of
    /// one config share a hash.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self.resolved()).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("kind");
            obj.remove("output_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Trained brickwall parameters, cached in `params.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressedParams {
    pub spec: ProblemSpec,
    pub adam: AdamConfig,
    pub theta: Vec<f64>,
    pub phase: f64,
    pub eps: f64,
    pub best_restart: usize,
    pub cnot_count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ParamsFile {
    config_hash: String,
    version: String,
    entries: Vec<CompressedParams>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChiEntry {
    circuit: CircuitKind,
    layers: usize,
    label: String,
    chi: ChiMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChiFile {
    config_hash: String,
    version: String,
    mode: QptMode,
    entries: Vec<ChiEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StatsEntry {
    circuit: CircuitKind,
    layers: usize,
    label: String,
    fidelity: f64,
    stats: SpectralStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StatsFile {
    config_hash: String,
    version: String,
    mode: QptMode,
    /// Arguments of the distinct eigenvalues of the exact channel.
    ideal_angles: Vec<f64>,
    entries: Vec<StatsEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub mean_modulus: f64,
    pub second_moment: f64,
    pub max_modulus: f64,
    pub above_unit_circle: usize,
}

impl From<&SpectralStats> for SpectralSummary {
    fn from(s: &SpectralStats) -> Self {
        SpectralSummary {
            mean_modulus: s.mean_modulus,
            second_moment: s.second_moment,
            max_modulus: s.max_modulus,
            above_unit_circle: s.above_unit_circle,
        }
    }
}

/// Metrics of one circuit in a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub circuit: CircuitKind,
    pub layers: usize,
    pub label: String,
    pub cnot_count: usize,
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
    /// Fidelity after zeroing entries outside the ideal support.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity_masked: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chi_trace: Option<f64>,
    /// Off-diagonal elements measured selectively, both halves of each pair.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub flagged: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectral: Option<SpectralSummary>,
}

/// Summary of a run, also written as `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub version: String,
    pub kind: ExperimentKind,
    pub runs: Vec<RunMetrics>,
    /// Emitted files, relative to the output directory.
    pub files: Vec<PathBuf>,
}

impl ResultRecord {
    pub fn find(&self, circuit: CircuitKind, layers: usize) -> Option<&RunMetrics> {
        self.runs.iter().find(|r| r.circuit == circuit && r.layers == layers)
    }
}

/// One concrete circuit of the run.
struct Prepared {
    kind: CircuitKind,
    layers: usize,
    /// Gate-level form handed to the executor.
    circuit: Circuit,
    cnot_count: usize,
    eps: f64,
}

impl Prepared {
    fn metrics(&self) -> RunMetrics {
        RunMetrics::basic(self.kind, self.layers, self.circuit.label().into(), self.cnot_count, self.eps)
    }
}

impl RunMetrics {
    fn basic(circuit: CircuitKind, layers: usize, label: String, cnot_count: usize, eps: f64) -> RunMetrics {
        RunMetrics {
            circuit,
            layers,
            label,
            cnot_count,
            eps,
            fidelity: None,
            fidelity_masked: None,
            chi_trace: None,
            elements: None,
            flagged: None,
            spectral: None,
        }
    }
}

enum Reconstruction {
    Full { chi: ChiMatrix, sigma_re: Vec<f64>, sigma_im: Vec<f64> },
    Sparse { chi: ChiMatrix, twirl: TwirlData, elements: Vec<ElementEstimate> },
}

impl Reconstruction {
    fn chi(&self) -> &ChiMatrix {
        match self {
            Reconstruction::Full { chi, .. } | Reconstruction::Sparse { chi, .. } => chi,
        }
    }
}

fn fmt_row(fields: &[&dyn std::fmt::Display]) -> String {
    fields.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",")
}

struct Run {
    cfg: ExperimentConfig,
    kind: ExperimentKind,
    hash: String,
    dir: PathBuf,
    files: Vec<PathBuf>,
    u_exact: crate::linalg::ComplexMatrix,
    params: Vec<CompressedParams>,
    params_dirty: bool,
}

impl Run {
    fn start(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Run> {
        let mut cfg = cfg.resolved();
        cfg.kind = Some(kind);
        cfg.validate()?;
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir)?;
        let params = fs::read_to_string(dir.join("params.json"))
            .ok()
            .and_then(|s| serde_json::from_str::<ParamsFile>(&s).ok())
            .map(|f| f.entries)
            .unwrap_or_default();
        let u_exact = exact_propagator(cfg.num_qubits, cfg.bc, cfg.t)?;
        let hash = cfg.hash();
        Ok(Run { cfg, kind, hash, dir, files: Vec::new(), u_exact, params, params_dirty: false })
    }

    fn header(&self) -> String {
        format!("# config_hash={} version={}\n", self.hash, VERSION)
    }

    fn write_csv(&mut self, name: &str, columns: &str, rows: &[String]) -> Result<()> {
        let mut text = self.header();
        text.push_str(columns);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        fs::write(self.dir.join(name), text)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn problem_spec(&self, layers: usize) -> ProblemSpec {
        ProblemSpec { num_qubits: self.cfg.num_qubits, bc: self.cfg.bc, t: self.cfg.t, n_layers: layers }
    }

    fn store_params(&mut self, p: CompressedParams) {
        self.params.retain(|q| !(q.spec == p.spec && q.adam == p.adam));
        self.params.push(p);
        self.params_dirty = true;
    }

    /// Trains a brickwall and records its parameters.
    fn optimize(&mut self, layers: usize) -> Result<(CompressedParams, Vec<Vec<f64>>)> {
        let problem = CompressionProblem::new(self.cfg.num_qubits, self.cfg.bc, self.cfg.t, layers)?;
        let trace = adam_optimize(&problem, &self.cfg.adam)?;
        let cnot_count = problem.circuit(&trace.best_theta)?.cnot_count();
        let p = CompressedParams {
            spec: problem.spec(),
            adam: self.cfg.adam.clone(),
            theta: trace.best_theta,
            phase: trace.best_phase,
            eps: trace.best_eps,
            best_restart: trace.best_restart,
            cnot_count,
        };
        self.store_params(p.clone());
        Ok((p, trace.eps))
    }

    /// Cached parameters for `layers`, training them when absent.
    fn compressed(&mut self, layers: usize) -> Result<CompressedParams> {
        let spec = self.problem_spec(layers);
        if let Some(p) = self.params.iter().find(|p| p.spec == spec && p.adam == self.cfg.adam) {
            return Ok(p.clone());
        }
        Ok(self.optimize(layers)?.0)
    }

    fn prepare(&mut self, kind: CircuitKind, layers: usize) -> Result<Prepared> {
        let (l, bc, t) = (self.cfg.num_qubits, self.cfg.bc, self.cfg.t);
        // the brickwall is trained together with a global phase
        let (built, phase) = match kind {
            CircuitKind::Trotter1 => (build_trotter1(l, bc, t, layers)?, 0.0),
            CircuitKind::Trotter2 => (build_trotter2(l, bc, t, layers)?, 0.0),
            CircuitKind::Compressed => {
                let p = self.compressed(layers)?;
                (crate::circuit::build_brickwall(l, layers, &p.theta)?, p.phase)
            }
        };
        let eps = epsilon(&self.u_exact, &built.unitary()?.scale(c64::from_polar(1.0, phase)))?;
        let cnot_count = built.cnot_count();
        Ok(Prepared { kind, layers, circuit: decompose(&built)?, cnot_count, eps })
    }

    fn prepare_all(&mut self) -> Result<Vec<Prepared>> {
        let mut out = Vec::new();
        for kind in self.cfg.circuits.clone() {
            for &layers in &self.cfg.layers.clone() {
                out.push(self.prepare(kind, layers)?);
            }
        }
        Ok(out)
    }

    fn executor(&self) -> Result<SimulatedExecutor> {
        SimulatedExecutor::new(self.cfg.noise.clone())
    }

    fn ideal_chi(&self) -> Result<ChiMatrix> {
        ChiMatrix::from_unitary(&self.u_exact)
    }

    fn reconstruct(
        &self,
        exec: &SimulatedExecutor,
        p: &Prepared,
        mode: QptMode,
        ideal: &ChiMatrix,
        mubs: Option<&MubSet>,
    ) -> Result<Reconstruction> {
        match mode {
            QptMode::Full => {
                let data = run_full_qpt(exec, &p.circuit, self.cfg.shots)?;
                let chi = reconstruct_chi(&data)?;
                let (sigma_re, sigma_im) = chi_uncertainty(&data)?;
                Ok(Reconstruction::Full { chi, sigma_re, sigma_im })
            }
            QptMode::Sqpt => {
                let mubs = mubs.ok_or_else(|| Error::Contract("sparse reconstruction without MUBs".into()))?;
                let twirl = twirl_diagonal(exec, &p.circuit, self.cfg.shots)?;
                let pairs = select_top_k(ideal, self.cfg.top_k.get(p.kind), self.cfg.mask_threshold);
                let elements = pairs
                    .iter()
                    .map(|&(m, n)| sqpt_element(exec, &p.circuit, m, n, mubs, self.cfg.shots))
                    .collect::<Result<Vec<_>>>()?;
                let upper: Vec<(usize, usize, c64)> = elements.iter().map(|e| (e.m, e.n, e.value)).collect();
                let chi = assemble_sparse_chi(&twirl, &conjugate_closure(&upper))?;
                Ok(Reconstruction::Sparse { chi, twirl, elements })
            }
        }
    }

    fn finish(mut self, runs: Vec<RunMetrics>) -> Result<ResultRecord> {
        if self.params_dirty {
            let file = ParamsFile { config_hash: self.hash.clone(), version: VERSION.into(), entries: self.params.clone() };
            self.write_json("params.json", &file)?;
        }
        let config = serde_json::json!({
            "config_hash": self.hash,
            "version": VERSION,
            "config": self.cfg,
        });
        self.write_json("config.json", &config)?;
        let mut record = ResultRecord {
            config_hash: self.hash.clone(),
            version: VERSION.into(),
            kind: self.kind,
            runs,
            files: self.files.clone(),
        };
        record.files.push(PathBuf::from("result.json"));
        self.write_json("result.json", &record)?;
        Ok(record)
    }
}

fn pauli_label(l: usize, idx: usize) -> Result<String> {
    Ok(PauliString::from_index(l, idx)?.to_string())
}

/// Trains brickwall circuits for every configured layer count; writes
/// `params.json` and `trace.csv` (one row per restart and iteration).
pub fn cmd_compress(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let mut run = Run::start(cfg, ExperimentKind::Compress)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &layers in &run.cfg.layers.clone() {
        let (p, traces) = run.optimize(layers)?;
        for (r, tr) in traces.iter().enumerate() {
            for (i, e) in tr.iter().enumerate() {
                rows.push(fmt_row(&[&layers, &r, &i, e]));
            }
        }
        let label = crate::circuit::build_brickwall(p.spec.num_qubits, layers, &p.theta)?.label().to_string();
        runs.push(RunMetrics::basic(CircuitKind::Compressed, layers, label, p.cnot_count, p.eps));
    }
    run.write_csv("trace.csv", "layers,restart,iteration,eps", &rows)?;
    run.finish(runs)
}

/// ε and CNOT count of every configured circuit; writes `scan.csv`.
pub fn cmd_infidelity_scan(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let mut run = Run::start(cfg, ExperimentKind::InfidelityScan)?;
    let prepared = run.prepare_all()?;
    let rows: Vec<String> =
        prepared.iter().map(|p| fmt_row(&[&p.kind.name(), &p.layers, &p.cnot_count, &p.eps])).collect();
    run.write_csv("scan.csv", "circuit,layers,cnot_count,eps", &rows)?;
    run.finish(prepared.iter().map(Prepared::metrics).collect())
}

/// Process tomography of every configured circuit.
///
/// Writes `chi.csv` and `chi.json` (the reconstructed χ), `fidelity.csv`
/// (F against the exact propagator) and, in sparse mode, `elements.csv`
/// and `twirl.csv`.
pub fn cmd_qpt(cfg: &ExperimentConfig, mode: QptMode) -> Result<ResultRecord> {
    let kind = match mode {
        QptMode::Full => ExperimentKind::FullQpt,
        QptMode::Sqpt => ExperimentKind::Sqpt,
    };
    let mut run = Run::start(cfg, kind)?;
    let l = run.cfg.num_qubits;
    let prepared = run.prepare_all()?;
    let exec = run.executor()?;
    let ideal = run.ideal_chi()?;
    let mubs = if mode == QptMode::Sqpt { Some(build_mubs(l)?) } else { None };

    let mut chi_rows = Vec::new();
    let mut fid_rows = Vec::new();
    let mut elem_rows = Vec::new();
    let mut twirl_rows = Vec::new();
    let mut entries = Vec::new();
    let mut runs = Vec::new();
    for p in &prepared {
        let rec = run.reconstruct(&exec, p, mode, &ideal, mubs.as_ref())?;
        let chi = rec.chi();
        let n = chi.dim();
        let name = p.kind.name();
        match &rec {
            Reconstruction::Full { sigma_re, sigma_im, .. } => {
                for m in 0..n {
                    for k in 0..n {
                        let v = chi.get(m, k);
                        let (pm, pk) = (pauli_label(l, m)?, pauli_label(l, k)?);
                        chi_rows.push(fmt_row(&[&name, &p.layers, &m, &k, &pm, &pk, &v.re, &v.im, &sigma_re[m * n + k], &sigma_im[m * n + k]]));
                    }
                }
            }
            Reconstruction::Sparse { twirl, elements, .. } => {
                let mut sig = std::collections::BTreeMap::new();
                for (m, s) in twirl.sigma.iter().enumerate() {
                    sig.insert((m, m), (*s, 0.0));
                }
                for e in elements {
                    sig.insert((e.m, e.n), (e.sigma_re, e.sigma_im));
                    sig.insert((e.n, e.m), (e.sigma_re, e.sigma_im));
                }
                for (&(m, k), &(sr, si)) in &sig {
                    let v = chi.get(m, k);
                    let (pm, pk) = (pauli_label(l, m)?, pauli_label(l, k)?);
                    chi_rows.push(fmt_row(&[&name, &p.layers, &m, &k, &pm, &pk, &v.re, &v.im, &sr, &si]));
                }
                for e in elements {
                    let (pm, pn) = (pauli_label(l, e.m)?, pauli_label(l, e.n)?);
                    let id = ideal.get(e.m, e.n);
                    elem_rows.push(fmt_row(&[
                        &name, &p.layers, &e.m, &e.n, &pm, &pn, &e.value.re, &e.value.im, &e.sigma_re, &e.sigma_im, &id.re, &id.im,
                        &e.settings, &e.cx_overhead, &e.max_setting_depth, &e.flagged,
                    ]));
                }
                for (a, (&c, (&d, &s))) in twirl.c.iter().zip(twirl.chi_diag.iter().zip(&twirl.sigma)).enumerate() {
                    twirl_rows.push(fmt_row(&[&name, &p.layers, &a, &pauli_label(l, a)?, &c, &d, &s, &ideal.get(a, a).re]));
                }
            }
        }
        let fidelity = process_fidelity(&ideal, chi)?;
        let masked = process_fidelity(&ideal, &mask_to_ideal_support(chi, &ideal, run.cfg.mask_threshold)?)?;
        let tr = chi.trace().re;
        fid_rows.push(fmt_row(&[
            &name, &p.layers, &p.circuit.label(), &p.cnot_count, &p.eps, &fidelity, &masked, &tr, &chi.hermiticity_error(), &chi.tp_deviation(),
        ]));
        let mut m = p.metrics();
        m.fidelity = Some(fidelity);
        m.fidelity_masked = Some(masked);
        m.chi_trace = Some(tr);
        if let Reconstruction::Sparse { elements, .. } = &rec {
            m.elements = Some(2 * elements.len());
            m.flagged = Some(elements.iter().filter(|e| e.flagged).count());
        }
        runs.push(m);
        entries.push(ChiEntry { circuit: p.kind, layers: p.layers, label: p.circuit.label().into(), chi: chi.clone() });
    }
    run.write_csv("chi.csv", "circuit,layers,m,n,pauli_m,pauli_n,re,im,sigma_re,sigma_im", &chi_rows)?;
    run.write_csv(
        "fidelity.csv",
        "circuit,layers,label,cnot_count,eps,fidelity,fidelity_masked,trace,hermiticity_error,tp_deviation",
        &fid_rows,
    )?;
    if mode == QptMode::Sqpt {
        run.write_csv(
            "elements.csv",
            "circuit,layers,m,n,pauli_m,pauli_n,re,im,sigma_re,sigma_im,ideal_re,ideal_im,settings,cx_overhead,max_setting_depth,flagged",
            &elem_rows,
        )?;
        run.write_csv("twirl.csv", "circuit,layers,index,pauli,c,chi_diag,sigma,ideal", &twirl_rows)?;
    }
    let file = ChiFile { config_hash: run.hash.clone(), version: VERSION.into(), mode, entries };
    run.write_json("chi.json", &file)?;
    run.finish(runs)
}

/// χ diagonal of every configured circuit by Pauli twirling; writes `twirl.csv`.
pub fn cmd_twirl(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let mut run = Run::start(cfg, ExperimentKind::Twirl)?;
    let l = run.cfg.num_qubits;
    let prepared = run.prepare_all()?;
    let exec = run.executor()?;
    let ideal = run.ideal_chi()?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for p in &prepared {
        let tw = twirl_diagonal(&exec, &p.circuit, run.cfg.shots)?;
        for (a, (&c, (&d, &s))) in tw.c.iter().zip(tw.chi_diag.iter().zip(&tw.sigma)).enumerate() {
            rows.push(fmt_row(&[&p.kind.name(), &p.layers, &a, &pauli_label(l, a)?, &c, &d, &s, &ideal.get(a, a).re]));
        }
        let mut m = p.metrics();
        m.chi_trace = Some(tw.diag_sum());
        runs.push(m);
    }
    run.write_csv("twirl.csv", "circuit,layers,index,pauli,c,chi_diag,sigma,ideal", &rows)?;
    run.finish(runs)
}

/// Superoperator spectra and modulus statistics.
///
/// χ is taken from `chi.json` in the output directory when it was written
/// by the same config and mode, otherwise reconstructed inline. Full
/// reconstructions are restricted to the ideal support before Λ is formed.
/// Writes `spectrum.csv` and `stats.json`.
pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let mut run = Run::start(cfg, ExperimentKind::Spectrum)?;
    let mode = run.cfg.spectrum_mode();
    let prepared = run.prepare_all()?;
    let ideal = run.ideal_chi()?;
    let cached: Vec<ChiEntry> = fs::read_to_string(run.dir.join("chi.json"))
        .ok()
        .and_then(|s| serde_json::from_str::<ChiFile>(&s).ok())
        .filter(|f| f.config_hash == run.hash && f.mode == mode)
        .map(|f| f.entries)
        .unwrap_or_default();
    let mut exec = None;
    let mubs = if mode == QptMode::Sqpt { Some(build_mubs(run.cfg.num_qubits)?) } else { None };
    let ideal_spec = lambda_spectrum(&Superoperator::from_unitary(&run.u_exact)?)?;
    let ideal_angles = cluster_angles(&ideal_spec, CLUSTER_TOL);

    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut runs = Vec::new();
    for p in &prepared {
        let chi = match cached.iter().find(|e| e.circuit == p.kind && e.layers == p.layers) {
            Some(e) => e.chi.clone(),
            None => {
                if exec.is_none() {
                    exec = Some(run.executor()?);
                }
                let ex = exec.as_ref().expect("just set");
                match run.reconstruct(ex, p, mode, &ideal, mubs.as_ref())? {
                    Reconstruction::Full { chi, .. } | Reconstruction::Sparse { chi, .. } => chi,
                }
            }
        };
        let fidelity = process_fidelity(&ideal, &chi)?;
        let chi = match mode {
            QptMode::Full => mask_to_ideal_support(&chi, &ideal, run.cfg.mask_threshold)?,
            QptMode::Sqpt => chi,
        };
        let spectrum = lambda_spectrum(&superoperator_from_chi(&chi)?)?;
        let stats = spectral_stats(&spectrum, &run.cfg.histogram)?;
        for (k, z) in spectrum.iter().enumerate() {
            rows.push(fmt_row(&[&p.kind.name(), &p.layers, &k, &z.re, &z.im, &z.norm(), &z.arg()]));
        }
        let mut m = p.metrics();
        m.fidelity = Some(fidelity);
        m.spectral = Some(SpectralSummary::from(&stats));
        runs.push(m);
        entries.push(StatsEntry { circuit: p.kind, layers: p.layers, label: p.circuit.label().into(), fidelity, stats });
    }
    run.write_csv("spectrum.csv", "circuit,layers,index,re,im,modulus,arg", &rows)?;
    let stats = StatsFile { config_hash: run.hash.clone(), version: VERSION.into(), mode, ideal_angles, entries };
    run.write_json("stats.json", &stats)?;
    run.finish(runs)
}

/// Writes every configured circuit, lowered to `u`/`cx`, as OpenQASM 3.
pub fn cmd_export_qasm(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let mut run = Run::start(cfg, ExperimentKind::ExportQasm)?;
    let prepared = run.prepare_all()?;
    for p in &prepared {
        let name = format!("{}.qasm", p.circuit.label());
        let text = format!("// config_hash={} version={}\n{}", run.hash, VERSION, qasm::export(&p.circuit)?);
        fs::write(run.dir.join(&name), text)?;
        run.files.push(PathBuf::from(name));
    }
    run.finish(prepared.iter().map(Prepared::metrics).collect())
}

/// Dispatches on `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    match cfg.kind {
        Some(ExperimentKind::Compress) => cmd_compress(cfg),
        Some(ExperimentKind::InfidelityScan) => cmd_infidelity_scan(cfg),
        Some(ExperimentKind::FullQpt) => cmd_qpt(cfg, QptMode::Full),
        Some(ExperimentKind::Sqpt) => cmd_qpt(cfg, QptMode::Sqpt),
        Some(ExperimentKind::Twirl) => cmd_twirl(cfg),
        Some(ExperimentKind::Spectrum) => cmd_spectrum(cfg),
        Some(ExperimentKind::ExportQasm) => cmd_export_qasm(cfg),
        None => Err(Error::Config("no experiment kind given".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            num_qubits: 2,
            layers: vec![1],
            circuits: vec![CircuitKind::Trotter1, CircuitKind::Compressed],
            shots: 0,
            noise: NoiseModel::noiseless(),
            output_dir: dir.to_path_buf(),
            adam: AdamConfig { restarts: 2, max_iters: 300, ..AdamConfig::default() },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(ExperimentConfig::from_toml("", &[]).unwrap(), c);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = ExperimentConfig::from_toml(
            "num_qubits = 4\n[noise]\np2 = 0.02\n",
            &["bc=periodic".into(), "noise.p1=0.005".into(), "layers=[3]".into(), "adam.max_iters=7".into()],
        )
        .unwrap();
        assert_eq!(c.num_qubits, 4);
        assert_eq!(c.bc, Bc::Periodic);
        assert_eq!((c.noise.p1, c.noise.p2), (0.005, 0.02));
        assert_eq!(c.layers, vec![3]);
        assert_eq!(c.adam.max_iters, 7);
        assert!(matches!(ExperimentConfig::from_toml("qubits = 3", &[]), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("", &["noise.p9=1".into()]), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml("", &["novalue".into()]).is_err());
        assert!(ExperimentConfig::from_toml("circuits = [\"trotter3\"]", &[]).is_err());
    }

    #[test]
    fn validation_rejects_mode_mismatch() {
        let mut c = ExperimentConfig { num_qubits: 4, kind: Some(ExperimentKind::FullQpt), ..ExperimentConfig::default() };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("mode/L mismatch"), "{err}");
        c.kind = Some(ExperimentKind::Sqpt);
        c.validate().unwrap();
        c.num_qubits = 5;
        assert!(c.validate().is_err());
        c.kind = Some(ExperimentKind::InfidelityScan);
        c.validate().unwrap();
        for bad in [
            ExperimentConfig { layers: vec![1, 1], ..ExperimentConfig::default() },
            ExperimentConfig { layers: vec![0], ..ExperimentConfig::default() },
            ExperimentConfig { num_qubits: 1, ..ExperimentConfig::default() },
            ExperimentConfig { t: f64::NAN, ..ExperimentConfig::default() },
            ExperimentConfig { mask_threshold: -1.0, ..ExperimentConfig::default() },
            ExperimentConfig { noise: NoiseModel { p1: 2.0, ..NoiseModel::default() }, ..ExperimentConfig::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn hash_ignores_kind_and_output_dir() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { kind: Some(ExperimentKind::Spectrum), output_dir: "elsewhere".into(), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = ExperimentConfig { shots: 10, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
        // noise.seed is derived from seed
        let d = ExperimentConfig { noise: NoiseModel { seed: 9, ..NoiseModel::default() }, ..a.clone() };
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn noise_free_qpt_has_unit_fidelity() {
        let dir = tempfile::tempdir().unwrap();
        let rec = cmd_qpt(&quick(dir.path()), QptMode::Full).unwrap();
        assert_eq!(rec.runs.len(), 2);
        for r in &rec.runs {
            // two-site Trotter is exact and the compressed circuit converges
            assert!(r.eps < 1e-8, "{r:?}");
            assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-6, "{r:?}");
        }
        for f in ["chi.csv", "chi.json", "fidelity.csv", "params.json", "config.json", "result.json"] {
            let text = fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.contains(&rec.config_hash), "{f}");
        }
    }

    #[test]
    fn scan_reuses_trained_parameters_with_their_phase() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            num_qubits: 3,
            circuits: vec![CircuitKind::Compressed],
            adam: AdamConfig { restarts: 2, max_iters: 200, ..AdamConfig::default() },
            ..quick(dir.path())
        };
        let trained = cmd_compress(&cfg).unwrap();
        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace.lines().count(), 2 + 2 * 200);
        let scanned = cmd_infidelity_scan(&cfg).unwrap();
        let (a, b) = (&trained.runs[0], &scanned.runs[0]);
        assert!((a.eps - b.eps).abs() < 1e-12, "{} vs {}", a.eps, b.eps);
        assert_eq!(a.cnot_count, b.cnot_count);
    }

    #[test]
    fn empty_layer_list_gives_header_only_scan() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { layers: vec![], ..quick(dir.path()) };
        let rec = cmd_infidelity_scan(&cfg).unwrap();
        assert!(rec.runs.is_empty());
        let text = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "circuit,layers,cnot_count,eps");
    }

    #[test]
    fn run_requires_kind() {
        assert!(matches!(run(&ExperimentConfig::default()), Err(Error::Config(_))));
    }
}
