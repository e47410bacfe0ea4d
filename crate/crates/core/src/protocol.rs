//! Binning protocol for generating common randomness from a correlated pair.
//!
//! Both terminals share a random codebook of `N1 x N2` sequences drawn i.i.d.
//! from `P_U`. The sender looks for the first codeword `u^n(i, j)` (in
//! lexicographic order) that is jointly typical with its observation `x^n`,
//! sets `K` to that codeword and forwards the bin index `i` over the channel;
//! the receiver looks inside bin `i` for the codeword jointly typical with
//! `y^n` and sets `L` to it if it is unique. Every failure maps to a reserved
//! fallback label outside the array, so `K` and `L` share the alphabet of
//! size `N1 N2 + 1`.
//!
//! Codewords are stored as bit planes (one indicator plane per nonzero
//! symbol), which turns a joint type into a handful of popcounts. Joint
//! typicality on finite alphabets is the total variation of the joint type
//! against the target pmf, which coincides with the Prohorov distance under
//! the 0/1 metric.

use std::collections::HashMap;

use rand::{Rng as _, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{markov_extend, AuxiliaryChannel, CategoricalSampler, DiscreteJoint, JointSource, SourceSamples};
use crate::seed;
use crate::typicality::counts_typical;

/// Default limit on `N1 * N2 * n` stored symbols.
pub const DEFAULT_SYMBOL_BUDGET: u128 = 100_000_000;

/// How the bin index crosses the channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transport {
    /// Error-free delivery of every admissible index.
    Ideal,
    /// The index is replaced by a uniformly chosen wrong index with
    /// probability `p_idx`.
    Noisy { p_idx: f64 },
}

fn default_budget() -> u128 {
    DEFAULT_SYMBOL_BUDGET
}

fn default_true() -> bool {
    true
}

fn default_transport() -> Transport {
    Transport::Ideal
}

/// Parameters of one protocol instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub sigma: f64,
    /// Radius for the source pair `(x^n, y^n)` (failure attribution only).
    pub delta: f64,
    /// Encoder radius on `(u^n, x^n)`.
    pub delta1: f64,
    /// Decoder radius on `(u^n, y^n)`.
    pub delta2: f64,
    /// Radius of the triple event in the analysis; recorded, not used.
    pub delta3: f64,
    /// Channel budget `C'` in bits per use.
    pub channel_budget: f64,
    /// Rate margin `sigma'` in bits per use.
    pub rate_margin: f64,
    pub seed: u64,
    #[serde(default = "default_transport")]
    pub transport: Transport,
    #[serde(default = "default_budget")]
    pub codebook_symbol_budget: u128,
    /// Draw a new codebook for every trial instead of one shared codebook.
    #[serde(default)]
    pub fresh_codebook: bool,
    /// Add the Miller–Madow correction to the plug-in entropy of `K`.
    #[serde(default)]
    pub miller_madow: bool,
    /// Require `0 < delta1 < 2 sigma`.
    #[serde(default = "default_true")]
    pub enforce_delta1_bound: bool,
}

impl ProtocolConfig {
    /// A configuration with every optional switch at its default.
    pub fn new(n: usize, sigma: f64, radii: [f64; 4], channel_budget: f64, rate_margin: f64, seed: u64) -> Self {
        Self {
            n,
            sigma,
            delta: radii[0],
            delta1: radii[1],
            delta2: radii[2],
            delta3: radii[3],
            channel_budget,
            rate_margin,
            seed,
            transport: Transport::Ideal,
            codebook_symbol_budget: DEFAULT_SYMBOL_BUDGET,
            fresh_codebook: false,
            miller_madow: false,
            enforce_delta1_bound: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "block length must be at least 1"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma", format!("{} must be positive", self.sigma)));
        }
        for (name, r) in [
            ("delta", self.delta),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta3", self.delta3),
        ] {
            if !(r > 0.0) || !r.is_finite() {
                return Err(invalid(name, format!("radius {r} must be positive")));
            }
        }
        if self.enforce_delta1_bound && self.delta1 >= 2.0 * self.sigma {
            return Err(invalid(
                "delta1",
                format!("{} violates 0 < delta1 < 2 sigma = {}", self.delta1, 2.0 * self.sigma),
            ));
        }
        if !(self.channel_budget >= 0.0) || !(self.rate_margin >= 0.0) {
            return Err(invalid("channel_budget", "C' and sigma' must be nonnegative"));
        }
        if let Transport::Noisy { p_idx } = self.transport {
            if !(0.0..=1.0).contains(&p_idx) {
                return Err(invalid("p_idx", format!("{p_idx} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `ceil(2^{n * exponent})`, at least 1.
pub fn codebook_size(n: usize, exponent: f64) -> Result<u64> {
    let bits = n as f64 * exponent;
    if bits >= 63.0 {
        return Err(invalid("n", format!("codebook dimension 2^{bits:.2} does not fit in 64 bits")));
    }
    Ok((bits.exp2().ceil() as u64).max(1))
}

/// `(N1, N2)` for the given mutual informations.
pub fn codebook_dimensions(n: usize, sigma: f64, i_ux: f64, i_uy: f64) -> Result<(u64, u64)> {
    Ok((
        codebook_size(n, i_ux - i_uy + 4.0 * sigma)?,
        codebook_size(n, i_uy - 2.0 * sigma)?,
    ))
}

/// Bit-plane storage of `n1 * n2` sequences of length `n` over `q` symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub n: usize,
    pub n1: u64,
    pub n2: u64,
    q: usize,
    words: usize,
    /// `[codeword][symbol 1..q][word]`.
    planes: Vec<u64>,
}

fn tail_mask(n: usize) -> u64 {
    match n % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl Codebook {
    /// Draws every symbol i.i.d. from `pu`; codeword `(i, j)` uses its own
    /// derived seed, so the array does not depend on thread scheduling.
    pub fn generate(pu: &[f64], n: usize, n1: u64, n2: u64, seed: u64, budget: u128) -> Result<Self> {
        let symbols = n1 as u128 * n2 as u128 * n as u128;
        if symbols > budget {
            return Err(Error::CodebookBudget {
                n1,
                n2,
                n,
                symbols,
                budget,
            });
        }
        if n == 0 {
            return Err(invalid("n", "block length must be at least 1"));
        }
        let q = pu.len();
        let words = n.div_ceil(64);
        let stride = (q - 1) * words;
        let count = (n1 * n2) as usize;
        let fair_bits = q == 2 && pu[1] == 0.5;
        let sampler = CategoricalSampler::new(pu);
        let mut planes = vec![0u64; count * stride];
        planes
            .par_chunks_mut(stride.max(1))
            .enumerate()
            .for_each(|(c, block)| {
                if stride == 0 {
                    return;
                }
                let mut rng = seed::rng(seed::derive(seed, "codeword", c as u64));
                if fair_bits {
                    // i.i.d. fair bits directly
                    for w in block.iter_mut() {
                        *w = rng.next_u64();
                    }
                } else {
                    for l in 0..n {
                        let a = sampler.sample(&mut rng);
                        if a > 0 {
                            block[(a - 1) * words + l / 64] |= 1u64 << (l % 64);
                        }
                    }
                }
                for a in 0..q - 1 {
                    block[a * words + words - 1] &= tail_mask(n);
                }
            });
        Ok(Self {
            n,
            n1,
            n2,
            q,
            words,
            planes,
        })
    }

    /// Number of labels: every codeword plus the fallback.
    pub fn alphabet_size(&self) -> u64 {
        self.n1 * self.n2 + 1
    }

    /// Label of codeword `(i, j)`, zero-based.
    pub fn label(&self, i: u64, j: u64) -> u64 {
        i * self.n2 + j
    }

    /// Reserved label of the fallback sequence; no codeword carries it.
    pub fn fallback_label(&self) -> u64 {
        self.n1 * self.n2
    }

    /// Symbols of codeword `(i, j)`.
    pub fn codeword(&self, i: u64, j: u64) -> Vec<usize> {
        let block = self.block(self.label(i, j));
        (0..self.n)
            .map(|l| {
                (1..self.q)
                    .find(|&a| block[(a - 1) * self.words + l / 64] >> (l % 64) & 1 == 1)
                    .unwrap_or(0)
            })
            .collect()
    }

    fn block(&self, label: u64) -> &[u64] {
        let stride = (self.q - 1) * self.words;
        &self.planes[label as usize * stride..(label as usize + 1) * stride]
    }

    /// Joint type counts of codeword `label` against a sequence given by its
    /// indicator planes, row-major in `(u, other)`.
    fn joint_counts(&self, label: u64, other: &SymbolPlanes, out: &mut [u64]) {
        let block = self.block(label);
        let m = other.planes.len();
        for b in 0..m {
            let mut rest = other.totals[b];
            for a in 1..self.q {
                let ua = &block[(a - 1) * self.words..a * self.words];
                let c: u64 = ua
                    .iter()
                    .zip(&other.planes[b])
                    .map(|(x, y)| (x & y).count_ones() as u64)
                    .sum();
                out[a * m + b] = c;
                rest -= c;
            }
            out[b] = rest;
        }
    }

    /// Relative frequency of each symbol over the whole array.
    pub fn symbol_frequencies(&self) -> Vec<f64> {
        let total = (self.n1 * self.n2) as f64 * self.n as f64;
        let mut freq = vec![0.0; self.q];
        let stride = (self.q - 1) * self.words;
        for a in 1..self.q {
            let ones: u64 = self
                .planes
                .chunks(stride.max(1))
                .map(|b| b[(a - 1) * self.words..a * self.words].iter().map(|w| w.count_ones() as u64).sum::<u64>())
                .sum();
            freq[a] = ones as f64 / total;
        }
        freq[0] = 1.0 - freq[1..].iter().sum::<f64>();
        freq
    }
}

/// Indicator planes of a symbol sequence.
pub struct SymbolPlanes {
    planes: Vec<Vec<u64>>,
    totals: Vec<u64>,
}

impl SymbolPlanes {
    pub fn new(xs: &[usize], alphabet: usize) -> Self {
        let words = xs.len().div_ceil(64);
        let mut planes = vec![vec![0u64; words]; alphabet];
        let mut totals = vec![0u64; alphabet];
        for (l, &a) in xs.iter().enumerate() {
            planes[a][l / 64] |= 1u64 << (l % 64);
            totals[a] += 1;
        }
        Self { planes, totals }
    }
}

/// Failure cause of a trial with `K != L`, first match in this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorEvent {
    /// The bin index arrived altered.
    Transport,
    /// The source pair was not jointly typical.
    E1,
    /// The encoder found no typical codeword.
    E2,
    /// The decoder found a wrong codeword or several.
    E3,
    /// The decoder found no typical codeword although the encoder succeeded.
    E4,
}

/// Everything observed in one trial. Indices `i_star` and `i_hat` are
/// one-based, with `N1 + 1` standing for the encoder's failure branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub k: u64,
    pub l: u64,
    pub i_star: u64,
    pub i_hat: u64,
    pub decoder_matches: usize,
    pub event: Option<ErrorEvent>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    #[serde(rename = "E1")]
    pub e1: u64,
    #[serde(rename = "E2")]
    pub e2: u64,
    #[serde(rename = "E3")]
    pub e3: u64,
    #[serde(rename = "E4")]
    pub e4: u64,
    pub transport: u64,
}

impl Tallies {
    pub fn total(&self) -> u64 {
        self.e1 + self.e2 + self.e3 + self.e4 + self.transport
    }
}

/// Counters that are not failures but explain them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub encoder_fallbacks: u64,
    pub decoder_ambiguous: u64,
    pub decoder_empty: u64,
    pub distinct_k: u64,
}

/// Aggregate over trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub n: usize,
    pub trials: usize,
    pub p_disagree: f64,
    pub stderr: f64,
    pub entropy_bits: f64,
    pub entropy_rate_bits: f64,
    pub alphabet_size: u64,
    pub n1: u64,
    pub n2: u64,
    pub i_ux: f64,
    pub i_uy: f64,
    pub tallies: Tallies,
    pub diagnostics: Diagnostics,
    pub config_echo: ProtocolConfig,
}

/// A configured protocol: source, auxiliary channel, dimensions and the
/// shared codebook.
pub struct Protocol {
    source: DiscreteJoint,
    config: ProtocolConfig,
    pu: Vec<f64>,
    pmf_ux: Vec<f64>,
    pmf_uy: Vec<f64>,
    i_ux: f64,
    i_uy: f64,
    n1: u64,
    n2: u64,
    codebook: Option<Codebook>,
}

impl Protocol {
    /// Validates the configuration, derives `(N1, N2)`, checks rate
    /// admissibility and, unless codebooks are drawn per trial, builds the
    /// shared codebook.
    pub fn new(source: &DiscreteJoint, aux: &AuxiliaryChannel, config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let ext = markov_extend(source, aux)?;
        let (n1, n2) = codebook_dimensions(config.n, config.sigma, ext.i_ux, ext.i_uy)?;
        let rate = ((n1 + 1) as f64).log2() / config.n as f64;
        let limit = config.channel_budget - config.rate_margin;
        if rate > limit {
            return Err(Error::RateInadmissible { rate, limit });
        }
        let pu = ext.p_u();
        let mut protocol = Self {
            source: source.clone(),
            config: config.clone(),
            pmf_ux: ext.pmf_ux(),
            pmf_uy: ext.pmf_uy(),
            pu,
            i_ux: ext.i_ux,
            i_uy: ext.i_uy,
            n1,
            n2,
            codebook: None,
        };
        if !config.fresh_codebook {
            protocol.codebook = Some(protocol.codebook_for(seed::derive(config.seed, "codebook", 0))?);
        } else {
            // reject oversized configurations before any trial
            let symbols = n1 as u128 * n2 as u128 * config.n as u128;
            if symbols > config.codebook_symbol_budget {
                return Err(Error::CodebookBudget {
                    n1,
                    n2,
                    n: config.n,
                    symbols,
                    budget: config.codebook_symbol_budget,
                });
            }
        }
        Ok(protocol)
    }

    fn codebook_for(&self, seed: u64) -> Result<Codebook> {
        Codebook::generate(&self.pu, self.config.n, self.n1, self.n2, seed, self.config.codebook_symbol_budget)
    }

    pub fn dimensions(&self) -> (u64, u64) {
        (self.n1, self.n2)
    }

    pub fn mutual_informations(&self) -> (f64, f64) {
        (self.i_ux, self.i_uy)
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    /// The shared codebook (absent when codebooks are drawn per trial).
    pub fn codebook(&self) -> Option<&Codebook> {
        self.codebook.as_ref()
    }

    /// Sender: label `K` and one-based bin index `i*`.
    pub fn encode(&self, codebook: &Codebook, x: &[usize]) -> (u64, u64) {
        let planes = SymbolPlanes::new(x, self.source.x_size());
        let mut counts = vec![0u64; codebook.q * self.source.x_size()];
        for i in 0..codebook.n1 {
            for j in 0..codebook.n2 {
                codebook.joint_counts(codebook.label(i, j), &planes, &mut counts);
                if counts_typical(&counts, &self.pmf_ux, self.config.delta1) {
                    return (codebook.label(i, j), i + 1);
                }
            }
        }
        (codebook.fallback_label(), codebook.n1 + 1)
    }

    /// Zero-based `j` of every codeword in bin `i_hat` jointly typical with `y`.
    pub fn decoder_candidates(&self, codebook: &Codebook, y: &[usize], i_hat: u64) -> Vec<u64> {
        if i_hat == 0 || i_hat > codebook.n1 {
            return Vec::new();
        }
        let planes = SymbolPlanes::new(y, self.source.y_size());
        let mut counts = vec![0u64; codebook.q * self.source.y_size()];
        (0..codebook.n2)
            .filter(|&j| {
                codebook.joint_counts(codebook.label(i_hat - 1, j), &planes, &mut counts);
                counts_typical(&counts, &self.pmf_uy, self.config.delta2)
            })
            .collect()
    }

    /// Receiver: the unique typical codeword of bin `i_hat`, else the fallback.
    pub fn decode(&self, codebook: &Codebook, y: &[usize], i_hat: u64) -> u64 {
        match self.decoder_candidates(codebook, y, i_hat).as_slice() {
            [j] => codebook.label(i_hat - 1, *j),
            _ => codebook.fallback_label(),
        }
    }

    /// Delivers `i_star` through the configured transport.
    pub fn transport_index(&self, i_star: u64, rng: &mut seed::Rng) -> u64 {
        transport_index(self.config.transport, i_star, self.n1 + 1, rng)
    }

    /// One trial with the trial's derived seed.
    pub fn trial(&self, t: u64) -> Result<TrialOutcome> {
        let mut rng = seed::rng(seed::derive(self.config.seed, "trial", t));
        let fresh;
        let codebook = match &self.codebook {
            Some(c) => c,
            None => {
                fresh = self.codebook_for(seed::derive(self.config.seed, "codebook", t + 1))?;
                &fresh
            }
        };
        let SourceSamples::Discrete { x, y } =
            JointSource::Discrete(self.source.clone()).sample_with(self.config.n, &mut rng)
        else {
            unreachable!("discrete source")
        };
        let (k, i_star) = self.encode(codebook, &x);
        let i_hat = self.transport_index(i_star, &mut rng);
        let candidates = self.decoder_candidates(codebook, &y, i_hat);
        let l = match candidates.as_slice() {
            [j] => codebook.label(i_hat - 1, *j),
            _ => codebook.fallback_label(),
        };
        let event = (k != l).then(|| {
            let (xs, ys) = (self.source.x_size(), self.source.y_size());
            let mut pair = vec![0u64; xs * ys];
            for (&a, &b) in x.iter().zip(&y) {
                pair[a * ys + b] += 1;
            }
            if i_hat != i_star {
                ErrorEvent::Transport
            } else if !counts_typical(&pair, self.source.pmf(), self.config.delta) {
                ErrorEvent::E1
            } else if k == codebook.fallback_label() {
                ErrorEvent::E2
            } else if candidates.is_empty() {
                ErrorEvent::E4
            } else {
                ErrorEvent::E3
            }
        });
        Ok(TrialOutcome {
            k,
            l,
            i_star,
            i_hat,
            decoder_matches: candidates.len(),
            event,
        })
    }

    /// Runs `trials` trials in parallel and aggregates them in trial order.
    pub fn run_trials(&self, trials: usize) -> Result<ProtocolReport> {
        if trials == 0 {
            return Err(invalid("trials", "at least one trial is required"));
        }
        let outcomes = (0..trials as u64)
            .into_par_iter()
            .map(|t| self.trial(t))
            .collect::<Result<Vec<_>>>()?;
        let fallback = self.n1 * self.n2;
        let mut tallies = Tallies::default();
        let mut diagnostics = Diagnostics::default();
        let mut freq: HashMap<u64, u64> = HashMap::new();
        let mut failures = 0u64;
        for o in &outcomes {
            *freq.entry(o.k).or_default() += 1;
            if o.k == fallback {
                diagnostics.encoder_fallbacks += 1;
            } else if o.i_hat <= self.n1 {
                match o.decoder_matches {
                    0 => diagnostics.decoder_empty += 1,
                    1 => {}
                    _ => diagnostics.decoder_ambiguous += 1,
                }
            }
            if let Some(e) = o.event {
                failures += 1;
                match e {
                    ErrorEvent::Transport => tallies.transport += 1,
                    ErrorEvent::E1 => tallies.e1 += 1,
                    ErrorEvent::E2 => tallies.e2 += 1,
                    ErrorEvent::E3 => tallies.e3 += 1,
                    ErrorEvent::E4 => tallies.e4 += 1,
                }
            }
        }
        diagnostics.distinct_k = freq.len() as u64;
        let mut counts: Vec<u64> = freq.into_values().collect();
        counts.sort_unstable();
        let mut entropy = plug_in_entropy(&counts);
        if self.config.miller_madow {
            entropy += (counts.len() as f64 - 1.0) / (2.0 * trials as f64 * std::f64::consts::LN_2);
        }
        let p = failures as f64 / trials as f64;
        Ok(ProtocolReport {
            n: self.config.n,
            trials,
            p_disagree: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            entropy_bits: entropy,
            entropy_rate_bits: entropy / self.config.n as f64,
            alphabet_size: self.n1 * self.n2 + 1,
            n1: self.n1,
            n2: self.n2,
            i_ux: self.i_ux,
            i_uy: self.i_uy,
            tallies,
            diagnostics,
            config_echo: self.config.clone(),
        })
    }
}

/// Delivers a one-based index from `1..=labels`.
pub fn transport_index(transport: Transport, i_star: u64, labels: u64, rng: &mut seed::Rng) -> u64 {
    match transport {
        Transport::Ideal => i_star,
        Transport::Noisy { p_idx } => {
            if labels < 2 || rng.random::<f64>() >= p_idx {
                i_star
            } else {
                // uniform over the other labels
                let r = rng.random_range(1..labels);
                if r >= i_star { r + 1 } else { r }
            }
        }
    }
}

/// Plug-in entropy in bits of a multiset given by its counts.
pub fn plug_in_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// One requirement of the achievability definition with its margin
/// (positive when satisfied).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AchievabilityCheck {
    /// `Pr{K != L} <= eps`.
    pub agreement: Requirement,
    /// `log2 |K| <= c n`.
    pub cardinality: Requirement,
    /// `H(K) / n > H - gamma`.
    pub entropy: Requirement,
}

impl AchievabilityCheck {
    pub fn all_pass(&self) -> bool {
        self.agreement.pass && self.cardinality.pass && self.entropy.pass
    }
}

/// Checks the three requirements of an achievable rate `h` on a report.
pub fn check_achievability(report: &ProtocolReport, eps: f64, c: f64, h: f64, gamma: f64) -> AchievabilityCheck {
    let log_size = (report.alphabet_size as f64).log2();
    let card_bound = c * report.n as f64;
    AchievabilityCheck {
        agreement: Requirement {
            pass: report.p_disagree <= eps,
            measured: report.p_disagree,
            bound: eps,
            margin: eps - report.p_disagree,
        },
        cardinality: Requirement {
            pass: log_size <= card_bound,
            measured: log_size,
            bound: card_bound,
            margin: card_bound - log_size,
        },
        entropy: Requirement {
            pass: report.entropy_rate_bits > h - gamma,
            measured: report.entropy_rate_bits,
            bound: h - gamma,
            margin: report.entropy_rate_bits - (h - gamma),
        },
    }
}
