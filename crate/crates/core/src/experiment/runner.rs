//! Execution of validated configs: dispatch, payload files and manifest.
//!
//! Seeds follow `master -> (kind label, grid index) -> trial`. Payloads are
//! pure functions of the resolved config; the manifest adds the wall-clock
//! duration and is written after every payload.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::instances::random_measure_tuples;
use super::schema::ResolvedConfig;
use crate::capacity::{cr_capacity_bounds, curve_to_csv, rate_function_curve, Dmc, RateFunctionOptions};
use crate::error::{Error, Result};
use crate::measure::{
    quantized_gaussian_joint, AuxiliaryChannel, BivariateGaussian, DiscreteJoint, MetricSpace, Point,
    ProbabilityMatrix, Quantizer,
};
use crate::prohorov::{prohorov_bruteforce, prohorov_distance};
use crate::protocol::{check_achievability, Protocol, ProtocolConfig, ProtocolReport, Transport};
use crate::seed;
use crate::typicality::{
    conditional_typicality_probability, ld_exponent_estimate, rows_to_csv, typicality_probability, ConditionalParams,
    LdGuard, LdSampler, MarginalModel, SequenceSelector, CSV_HEADER,
};

/// Environment variable that overrides the output root (default: the
/// current directory).
pub const OUTPUT_ROOT_ENV: &str = "CRGEN_OUTPUT_ROOT";

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayloadEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub kind: String,
    /// sha256 of `"blob {len}\0"` followed by the canonical resolved config.
    pub config_hash: String,
    /// Resolved config, defaults included.
    pub config: toml::Table,
    pub payloads: Vec<PayloadEntry>,
    pub duration_seconds: f64,
    pub crate_version: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

/// Git-style blob hash of the canonical resolved config.
pub fn config_hash(config: &ResolvedConfig) -> String {
    let body = config.canonical();
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

/// Output root from [`OUTPUT_ROOT_ENV`], else the current directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

struct Sink {
    dir: PathBuf,
    payloads: Vec<PayloadEntry>,
}

impl Sink {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.payloads.push(PayloadEntry {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }
}

/// Runs `config` under `root`, reporting one line per grid point to `log`.
pub fn run(config: &ResolvedConfig, root: &Path, log: &mut dyn FnMut(&str)) -> Result<RunOutcome> {
    let start = Instant::now();
    let dir = root.join(config.str("output_dir"));
    std::fs::create_dir_all(&dir)?;
    let mut sink = Sink {
        dir: dir.clone(),
        payloads: Vec::new(),
    };
    match config.kind.as_str() {
        "prohorov_validation" => run_prohorov_validation(config, &mut sink, log)?,
        "typicality" => run_typicality(config, &mut sink, log)?,
        "ld_exponent" => run_ld_exponent(config, &mut sink, log)?,
        "protocol" => run_protocol(config, &mut sink, log)?,
        "capacity_bounds" => run_capacity_bounds(config, &mut sink, log)?,
        other => unreachable!("validated kind {other}"),
    }
    let manifest = Manifest {
        kind: config.kind.clone(),
        config_hash: config_hash(config),
        config: config.table.clone(),
        payloads: sink.payloads,
        duration_seconds: start.elapsed().as_secs_f64(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(RunOutcome { output_dir: dir, manifest })
}

fn discrete_source(config: &ResolvedConfig) -> Result<DiscreteJoint> {
    match config.str("source") {
        "dsbs" => DiscreteJoint::dsbs(config.f64("source_p0")),
        "file" => ProbabilityMatrix::load(&config.file("source_file").expect("validated reference"))?.into_joint(),
        "gaussian" => gaussian_surrogate(config),
        other => unreachable!("validated source {other}"),
    }
}

/// Quantized Gaussian pair as a finite joint over cell indices.
fn gaussian_surrogate(config: &ResolvedConfig) -> Result<DiscreteJoint> {
    let g = BivariateGaussian::standard(config.f64("source_rho"))?;
    let q = Quantizer::for_gaussian(0.0, 1.0, config.f64("quant_width"), config.f64("clip_sigmas"))?;
    let measure = quantized_gaussian_joint(&g, &q, &q);
    let pmf: Vec<f64> = (0..q.cells)
        .flat_map(|i| (0..q.cells).map(move |j| (i, j)))
        .map(|(i, j)| measure.mass_of(&Point::Pair([q.center(i), q.center(j)])))
        .collect();
    DiscreteJoint::new(q.cells, q.cells, pmf)
}

fn run_prohorov_validation(config: &ResolvedConfig, sink: &mut Sink, log: &mut dyn FnMut(&str)) -> Result<()> {
    let seed = config.u64("seed");
    let tol = config.f64("tol");
    let max_support = config.usize("max_support");
    let space_name = |s: &MetricSpace| match s {
        MetricSpace::Finite { .. } => "finite",
        MetricSpace::RealLine => "real_line",
        MetricSpace::RealPair => "real_pair",
    };

    let pairs = random_measure_tuples(seed::derive(seed, "pairs", 0), config.usize("pairs"), 2, max_support)?;
    let mut csv = String::from("index,space,support_a,support_b,flow,bruteforce,abs_diff\n");
    let mut max_diff: f64 = 0.0;
    for (k, p) in pairs.iter().enumerate() {
        let flow = prohorov_distance(&p[0], &p[1], tol)?;
        let brute = prohorov_bruteforce(&p[0], &p[1], tol)?;
        max_diff = max_diff.max((flow - brute).abs());
        writeln!(
            csv,
            "{k},{},{},{},{flow:.9},{brute:.9},{:.3e}",
            space_name(p[0].space()),
            p[0].len(),
            p[1].len(),
            (flow - brute).abs()
        )
        .unwrap();
    }
    log(&format!("pairs={} max|flow - bruteforce|={max_diff:.3e}", pairs.len()));
    sink.write("prohorov_pairs.csv", &csv)?;

    let triples = random_measure_tuples(seed::derive(seed, "triples", 0), config.usize("triples"), 3, max_support)?;
    let mut csv = String::from("index,space,d_ab,d_ba,d_bc,d_ac,symmetry_gap,triangle_excess\n");
    let (mut max_sym, mut max_tri, mut in_unit) = (0.0f64, f64::NEG_INFINITY, true);
    for (k, t) in triples.iter().enumerate() {
        let d_ab = prohorov_distance(&t[0], &t[1], tol)?;
        let d_ba = prohorov_distance(&t[1], &t[0], tol)?;
        let d_bc = prohorov_distance(&t[1], &t[2], tol)?;
        let d_ac = prohorov_distance(&t[0], &t[2], tol)?;
        let sym = (d_ab - d_ba).abs();
        let tri = d_ac - d_ab - d_bc;
        max_sym = max_sym.max(sym);
        max_tri = max_tri.max(tri);
        in_unit &= [d_ab, d_ba, d_bc, d_ac].iter().all(|d| (0.0..=1.0).contains(d));
        writeln!(
            csv,
            "{k},{},{d_ab:.9},{d_ba:.9},{d_bc:.9},{d_ac:.9},{sym:.3e},{tri:.3e}",
            space_name(t[0].space())
        )
        .unwrap();
    }
    log(&format!(
        "triples={} max symmetry gap={max_sym:.3e} max triangle excess={max_tri:.3e} in [0,1]={in_unit}",
        triples.len()
    ));
    sink.write("prohorov_triples.csv", &csv)?;

    #[derive(Serialize)]
    struct Summary {
        pairs: usize,
        max_abs_diff: f64,
        triples: usize,
        max_symmetry_gap: f64,
        max_triangle_excess: f64,
        values_in_unit_interval: bool,
    }
    sink.json(
        "prohorov_validation.json",
        &Summary {
            pairs: pairs.len(),
            max_abs_diff: max_diff,
            triples: triples.len(),
            max_symmetry_gap: max_sym,
            max_triangle_excess: max_tri,
            values_in_unit_interval: in_unit,
        },
    )
}

fn run_typicality(config: &ResolvedConfig, sink: &mut Sink, log: &mut dyn FnMut(&str)) -> Result<()> {
    let seed = seed::derive(config.u64("seed"), "typicality", 0);
    let eps = config.f64("epsilon");
    let n_grid = config.usize_list("n_grid");
    let trials = config.usize("trials");
    if config.str("mode") == "marginal" {
        let model = match config.str("source") {
            "gaussian" => MarginalModel::gaussian(0.0, 1.0, config.f64("quant_width"), config.f64("clip_sigmas"))?,
            _ => MarginalModel::Discrete {
                pmf: discrete_source(config)?.marginal_x(),
            },
        };
        let table = typicality_probability(&model, &n_grid, eps, trials, seed)?;
        for r in &table.rows {
            log(&format!("n={} typical={:.4} (se {:.4})", r.n, r.estimate, r.stderr));
        }
        sink.write("typicality.csv", &rows_to_csv(&table.rows))?;
        return sink.json("typicality.json", &table);
    }
    if config.str("source") == "gaussian" {
        return Err(Error::Validation(vec![
            "source: conditional mode needs a discrete source".into(),
        ]));
    }
    let joint = discrete_source(config)?;
    let mut params = ConditionalParams::new(eps, config.f64("delta"))?;
    if config.f64("inner_radius") > 0.0 {
        params.inner_radius = config.f64("inner_radius");
    }
    let report = conditional_typicality_probability(
        &joint,
        &SequenceSelector::TypeRepresentative,
        &params,
        &n_grid,
        trials,
        seed,
    )?;
    let mut csv = format!("{CSV_HEADER},input_distance,precondition_met\n");
    for r in &report.rows {
        log(&format!(
            "n={} jointly typical={:.4} (se {:.4}) input distance={:.4}",
            r.row.n, r.row.estimate, r.row.stderr, r.input_distance
        ));
        let line = rows_to_csv(std::slice::from_ref(&r.row));
        let body = line.lines().nth(1).expect("one data row");
        writeln!(csv, "{body},{:.6},{}", r.input_distance, r.precondition_met).unwrap();
    }
    sink.write("typicality.csv", &csv)?;
    sink.json("typicality.json", &report)
}

fn run_ld_exponent(config: &ResolvedConfig, sink: &mut Sink, log: &mut dyn FnMut(&str)) -> Result<()> {
    let joint = discrete_source(config)?;
    let sampler = match config.str("sampler") {
        "direct" => LdSampler::Direct,
        _ => LdSampler::Tilted,
    };
    let report = ld_exponent_estimate(
        &joint,
        config.f64("epsilon"),
        &config.usize_list("n_grid"),
        config.usize("trials"),
        sampler,
        &LdGuard::default(),
        seed::derive(config.u64("seed"), "ld_exponent", 0),
    )?;
    let mut csv = format!("{CSV_HEADER},exponent\n");
    for r in &report.rows {
        let exponent = r.exponent.map(|e| format!("{e:.6}")).unwrap_or_default();
        log(&format!("n={} estimate={:.4e} exponent={exponent}", r.row.n, r.row.estimate));
        let line = rows_to_csv(std::slice::from_ref(&r.row));
        writeln!(csv, "{},{exponent}", line.lines().nth(1).expect("one data row")).unwrap();
    }
    log(&format!(
        "fitted slope={} I(X;Y)={:.6}",
        report.slope.map(|s| format!("{s:.6}")).unwrap_or_else(|| "none".into()),
        report.mutual_information
    ));
    sink.write("ld_exponent.csv", &csv)?;
    sink.json("ld_exponent.json", &report)
}

/// Protocol configuration for block length `n` from a resolved config.
pub fn protocol_config(config: &ResolvedConfig, n: usize) -> ProtocolConfig {
    let mut c = ProtocolConfig::new(
        n,
        config.f64("sigma_bits"),
        [
            config.f64("delta"),
            config.f64("delta1"),
            config.f64("delta2"),
            config.f64("delta3"),
        ],
        config.f64("channel_budget_bits"),
        config.f64("rate_margin_bits"),
        seed::derive(config.u64("seed"), "protocol", n as u64),
    );
    if config.str("transport") == "noisy" {
        c.transport = Transport::Noisy {
            p_idx: config.f64("p_idx"),
        };
    }
    c.codebook_symbol_budget = u128::from(config.u64("codebook_symbol_budget"));
    c.fresh_codebook = config.bool("fresh_codebook");
    c.miller_madow = config.bool("miller_madow");
    c.enforce_delta1_bound = config.bool("enforce_delta1_bound");
    c
}

/// Auxiliary channel of a protocol config.
pub fn protocol_auxiliary(config: &ResolvedConfig) -> Result<AuxiliaryChannel> {
    match config.str("aux") {
        "file" => ProbabilityMatrix::load(&config.file("aux_file").expect("validated reference"))?.into_auxiliary(),
        _ => AuxiliaryChannel::bsc(config.f64("aux_q")),
    }
}

/// Per-block-length protocol report with its achievability checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolPoint {
    pub report: ProtocolReport,
    pub achievability: crate::protocol::AchievabilityCheck,
}

fn run_protocol(config: &ResolvedConfig, sink: &mut Sink, log: &mut dyn FnMut(&str)) -> Result<()> {
    let source = discrete_source(config)?;
    let aux = protocol_auxiliary(config)?;
    let trials = config.usize("trials");
    let sigma = config.f64("sigma_bits");
    // configuration errors (rate, budget) surface before any trial runs
    let protocols = config
        .usize_list("n_grid")
        .into_iter()
        .map(|n| Protocol::new(&source, &aux, &protocol_config(config, n)))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for p in &protocols {
        let report = p.run_trials(trials)?;
        let i_ux = report.i_ux;
        let achievability = check_achievability(
            &report,
            config.f64("check_epsilon"),
            2.0 * (i_ux + sigma),
            i_ux,
            config.f64("check_gamma_fraction") * i_ux,
        );
        log(&format!(
            "n={} N1={} N2={} Pr(K!=L)={:.4} (se {:.4}) H(K)/n={:.5} fallbacks={} achievable={}",
            report.n,
            report.n1,
            report.n2,
            report.p_disagree,
            report.stderr,
            report.entropy_rate_bits,
            report.diagnostics.encoder_fallbacks,
            achievability.all_pass()
        ));
        let point = ProtocolPoint { report, achievability };
        sink.json(&format!("protocol_n{}.json", point.report.n), &point)?;
        points.push(point);
    }

    #[derive(Serialize)]
    struct Row {
        n: usize,
        p_disagree: f64,
        stderr: f64,
        entropy_rate_bits: f64,
        encoder_fallback_rate: f64,
        all_requirements_pass: bool,
    }
    #[derive(Serialize)]
    struct Summary {
        rows: Vec<Row>,
        /// Each step down in `n` order exceeds two combined standard errors.
        strictly_decreasing_beyond_2se: bool,
    }
    let decreasing = points.windows(2).all(|w| {
        let (a, b) = (&w[0].report, &w[1].report);
        a.p_disagree - b.p_disagree > 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
    });
    sink.json(
        "protocol_summary.json",
        &Summary {
            rows: points
                .iter()
                .map(|p| Row {
                    n: p.report.n,
                    p_disagree: p.report.p_disagree,
                    stderr: p.report.stderr,
                    entropy_rate_bits: p.report.entropy_rate_bits,
                    encoder_fallback_rate: p.report.diagnostics.encoder_fallbacks as f64 / p.report.trials as f64,
                    all_requirements_pass: p.achievability.all_pass(),
                })
                .collect(),
            strictly_decreasing_beyond_2se: decreasing,
        },
    )
}

fn run_capacity_bounds(config: &ResolvedConfig, sink: &mut Sink, log: &mut dyn FnMut(&str)) -> Result<()> {
    let source = discrete_source(config)?;
    let param = config.f64("channel_param");
    let channel = match config.str("channel") {
        "bsc" => Dmc::bsc(param)?,
        "bec" => Dmc::bec(param)?,
        "identity" => Dmc::identity((param as usize).max(1))?,
        _ => Dmc::from_matrix(&ProbabilityMatrix::load(&config.file("channel_file").expect("validated reference"))?)?,
    };
    let opts = RateFunctionOptions {
        restarts: config.usize("restarts"),
        iterations: config.usize("iterations"),
        seed: seed::derive(config.u64("seed"), "rate_function", 0),
        ..RateFunctionOptions::default()
    };
    let capacity = crate::capacity::channel_capacity(&channel, 1e-9)?.capacity;
    let alphas: Vec<f64> = config.f64_list("alpha_fractions").iter().map(|f| f * capacity).collect();
    let bounds = cr_capacity_bounds(&source, &channel, Some(&alphas), &opts)?;
    for p in &bounds.pairs {
        log(&format!(
            "alpha={:.6} L(C-alpha)={:.6} L(C+alpha)={:.6} C={:.6}",
            p.alpha, p.lower, p.upper, p.c_w
        ));
    }
    sink.json("capacity_bounds.json", &bounds)?;
    let ts = config.f64_list("t_grid_bits");
    if !ts.is_empty() {
        let curve = rate_function_curve(&source, &ts, &opts)?;
        for p in &curve {
            log(&format!("t={:.6} L={:.6} feasible={}", p.t, p.value, p.feasible));
        }
        sink.write("rate_function.csv", &curve_to_csv(&curve))?;
    }
    Ok(())
}

/// Process exit code for an error: 2 for invalid configurations, 3 for
/// runtime guards, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::InvalidParameter { .. }
        | Error::RateInadmissible { .. }
        | Error::InvalidDistribution(_)
        | Error::DimensionMismatch(_) => 2,
        Error::Guard { .. } | Error::CodebookBudget { .. } => 3,
        _ => 1,
    }
}
