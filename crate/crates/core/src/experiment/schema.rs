//! Catalogue of experiment kinds and the schema-driven config validator.
//!
//! A config is one flat TOML table. Every kind declares its fields with a
//! type, a unit, whether it is required, and (for optional fields) the
//! default that validation fills in. The resolved table — user values plus
//! defaults — is what runs, what is hashed and what the manifest echoes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    Int,
    Float,
    Bool,
    Str,
    IntList,
    FloatList,
    /// Path to an existing file, relative to the config's directory.
    File,
}

/// Value constraint checked after the type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "arg")]
pub enum Check {
    None,
    Positive,
    NonNegative,
    /// Within `[0, 1]`.
    Probability,
    /// Non-empty list of positive numbers.
    PositiveList,
    OneOf(&'static [&'static str]),
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: FieldType,
    pub required: bool,
    /// TOML literal filled in when the field is absent.
    pub default: Option<&'static str>,
    pub unit: &'static str,
    pub check: Check,
    pub doc: &'static str,
    /// TOML literal of a valid value, used to build sample configs.
    pub example: &'static str,
}

const fn req(name: &'static str, ty: FieldType, unit: &'static str, check: Check, doc: &'static str, example: &'static str) -> FieldSpec {
    FieldSpec {
        name,
        ty,
        required: true,
        default: None,
        unit,
        check,
        doc,
        example,
    }
}

const fn opt(name: &'static str, ty: FieldType, unit: &'static str, check: Check, default: &'static str, doc: &'static str) -> FieldSpec {
    FieldSpec {
        name,
        ty,
        required: false,
        default: Some(default),
        unit,
        check,
        doc,
        example: default,
    }
}

/// Optional file reference without a default.
const fn opt_file(name: &'static str, doc: &'static str) -> FieldSpec {
    FieldSpec {
        name,
        ty: FieldType::File,
        required: false,
        default: None,
        unit: "path",
        check: Check::None,
        doc,
        example: "\"matrix.toml\"",
    }
}

pub const KINDS: [&str; 5] = [
    "prohorov_validation",
    "typicality",
    "ld_exponent",
    "protocol",
    "capacity_bounds",
];

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSchema {
    pub kind: &'static str,
    pub description: &'static str,
    pub fields: Vec<FieldSpec>,
}

fn common() -> Vec<FieldSpec> {
    vec![
        req("kind", FieldType::Str, "", Check::OneOf(&KINDS), "experiment kind", "\"protocol\""),
        req("seed", FieldType::Int, "", Check::NonNegative, "master seed of every random stream", "1"),
        req("output_dir", FieldType::Str, "path", Check::None, "relative output directory under the output root", "\"out/example\""),
    ]
}

fn source_fields(kinds: &'static [&'static str]) -> Vec<FieldSpec> {
    vec![
        opt("source", FieldType::Str, "", Check::OneOf(kinds), "\"dsbs\"", "source family"),
        opt("source_p0", FieldType::Float, "probability", Check::Probability, "0.1", "DSBS crossover probability"),
        opt("source_rho", FieldType::Float, "", Check::None, "0.5", "Gaussian correlation coefficient"),
        opt_file("source_file", "joint pmf matrix (rows = |X|, cols = |Y|) when source = \"file\""),
        opt("quant_width", FieldType::Float, "", Check::Positive, "0.1", "quantization cell width for Gaussian sources"),
        opt("clip_sigmas", FieldType::Float, "std devs", Check::Positive, "5.0", "quantization clip range in standard deviations"),
    ]
}

/// The fixed catalogue of experiment kinds.
pub fn list_experiments() -> Vec<ExperimentSchema> {
    const ALL_SOURCES: &[&str] = &["dsbs", "gaussian", "file"];
    const DISCRETE: &[&str] = &["dsbs", "file"];
    let with = |extra: Vec<FieldSpec>| {
        let mut f = common();
        f.extend(extra);
        f
    };
    vec![
        ExperimentSchema {
            kind: "prohorov_validation",
            description: "flow-based Prohorov distance against subset enumeration on random measure pairs, plus metric axioms on random triples",
            fields: with(vec![
                opt("pairs", FieldType::Int, "count", Check::Positive, "200", "random measure pairs"),
                opt("triples", FieldType::Int, "count", Check::Positive, "100", "random measure triples"),
                opt("max_support", FieldType::Int, "count", Check::Positive, "8", "largest support size per measure"),
                opt("tol", FieldType::Float, "", Check::Positive, "1e-7", "accuracy requested from both evaluations"),
            ]),
        },
        ExperimentSchema {
            kind: "typicality",
            description: "Monte-Carlo probability of typicality: marginal blocks, or channel outputs given a fixed typical input",
            fields: with({
                let mut f = vec![
                    req("epsilon", FieldType::Float, "", Check::Positive, "typicality radius", "0.05"),
                    req("n_grid", FieldType::IntList, "symbols", Check::PositiveList, "block lengths", "[100, 500]"),
                    req("trials", FieldType::Int, "count", Check::Positive, "trials per block length", "1000"),
                    opt("mode", FieldType::Str, "", Check::OneOf(&["marginal", "conditional"]), "\"marginal\"", "harness"),
                    opt("delta", FieldType::Float, "probability", Check::Probability, "0.05", "conditional mode: target 1 - delta"),
                    opt("inner_radius", FieldType::Float, "", Check::NonNegative, "0.0", "conditional mode: input typicality radius (0 = epsilon / 2)"),
                ];
                f.extend(source_fields(ALL_SOURCES));
                f
            }),
        },
        ExperimentSchema {
            kind: "ld_exponent",
            description: "exponent of the probability that an independent block is jointly typical with a fixed typical sequence",
            fields: with({
                let mut f = vec![
                    req("epsilon", FieldType::Float, "", Check::Positive, "typicality radius", "0.1"),
                    req("n_grid", FieldType::IntList, "symbols", Check::PositiveList, "block lengths", "[50, 100]"),
                    req("trials", FieldType::Int, "count", Check::Positive, "trials per block length", "100000"),
                    opt("sampler", FieldType::Str, "", Check::OneOf(&["tilted", "direct"]), "\"tilted\"", "estimator"),
                ];
                f.extend(source_fields(DISCRETE));
                f
            }),
        },
        ExperimentSchema {
            kind: "protocol",
            description: "end-to-end binning protocol: disagreement probability, entropy rate of K and error-event tallies per block length",
            fields: with({
                let mut f = vec![
                    req("n_grid", FieldType::IntList, "symbols", Check::PositiveList, "block lengths", "[100]"),
                    req("trials", FieldType::Int, "count", Check::Positive, "trials per block length", "200"),
                    req("sigma_bits", FieldType::Float, "bits", Check::Positive, "rate slack sigma", "0.001"),
                    req("delta", FieldType::Float, "", Check::Positive, "source-pair radius", "0.1"),
                    req("delta1", FieldType::Float, "", Check::Positive, "encoder radius", "0.03"),
                    req("delta2", FieldType::Float, "", Check::Positive, "decoder radius", "0.04"),
                    req("delta3", FieldType::Float, "", Check::Positive, "analysis radius (recorded only)", "0.1"),
                    req("channel_budget_bits", FieldType::Float, "bits/use", Check::NonNegative, "channel budget C'", "0.02"),
                    req("rate_margin_bits", FieldType::Float, "bits/use", Check::NonNegative, "rate margin sigma'", "0.01"),
                    opt("aux", FieldType::Str, "", Check::OneOf(&["bsc", "file"]), "\"bsc\"", "auxiliary channel family"),
                    opt("aux_q", FieldType::Float, "probability", Check::Probability, "0.45", "BSC auxiliary crossover"),
                    opt_file("aux_file", "auxiliary channel matrix (rows = |X|) when aux = \"file\""),
                    opt("transport", FieldType::Str, "", Check::OneOf(&["ideal", "noisy"]), "\"ideal\"", "index transport"),
                    opt("p_idx", FieldType::Float, "probability", Check::Probability, "0.0", "noisy transport index error probability"),
                    opt("codebook_symbol_budget", FieldType::Int, "symbols", Check::Positive, "100000000", "limit on N1 * N2 * n"),
                    opt("fresh_codebook", FieldType::Bool, "", Check::None, "false", "new codebook per trial"),
                    opt("miller_madow", FieldType::Bool, "", Check::None, "false", "bias-correct the entropy of K"),
                    opt("enforce_delta1_bound", FieldType::Bool, "", Check::None, "true", "require delta1 < 2 sigma"),
                    opt("check_epsilon", FieldType::Float, "probability", Check::Probability, "0.1", "agreement requirement Pr{K != L} <= epsilon"),
                    opt("check_gamma_fraction", FieldType::Float, "", Check::NonNegative, "0.3", "entropy requirement slack as a fraction of I(U;X)"),
                ];
                f.extend(source_fields(DISCRETE));
                f
            }),
        },
        ExperimentSchema {
            kind: "capacity_bounds",
            description: "channel capacity by Blahut-Arimoto and the bound pairs L(C - alpha), L(C + alpha)",
            fields: with({
                let mut f = vec![
                    req("channel", FieldType::Str, "", Check::OneOf(&["bsc", "bec", "identity", "file"]), "channel family", "\"bsc\""),
                    opt("channel_param", FieldType::Float, "", Check::NonNegative, "0.1", "crossover, erasure probability, or alphabet size"),
                    opt_file("channel_file", "channel matrix when channel = \"file\""),
                    opt("alpha_fractions", FieldType::FloatList, "fraction of C", Check::PositiveList, "[0.2, 0.1, 0.05, 0.02, 0.01]", "alpha grid as fractions of C(W)"),
                    opt("t_grid_bits", FieldType::FloatList, "bits", Check::None, "[]", "extra budgets at which to tabulate L"),
                    opt("restarts", FieldType::Int, "count", Check::NonNegative, "8", "random optimizer starts per budget"),
                    opt("iterations", FieldType::Int, "count", Check::Positive, "200", "ascent iterations per penalty weight"),
                ];
                f.extend(source_fields(ALL_SOURCES));
                f
            }),
        },
    ]
}

/// A validated config with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    pub kind: String,
    pub table: Table,
    /// Directory that relative file references resolve against.
    pub base_dir: PathBuf,
}

fn literal(lit: &str) -> Value {
    let t: Table = toml::from_str(&format!("v = {lit}")).expect("catalogue literals parse");
    t["v"].clone()
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Array(_) => "array",
        _ => "table or datetime",
    }
}

/// Coerces a raw value to the field's type (integers are accepted for
/// floats) and applies the field's check.
fn check_field(field: &FieldSpec, v: &Value, base_dir: &Path) -> std::result::Result<Value, String> {
    let float = |v: &Value| match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    let value = match field.ty {
        FieldType::Int => match v {
            Value::Integer(_) => v.clone(),
            _ => return Err(format!("expected integer, found {}", type_name(v))),
        },
        FieldType::Float => match float(v) {
            Some(f) if f.is_finite() => Value::Float(f),
            Some(_) => return Err("must be finite".into()),
            None => return Err(format!("expected number, found {}", type_name(v))),
        },
        FieldType::Bool => match v {
            Value::Boolean(_) => v.clone(),
            _ => return Err(format!("expected boolean, found {}", type_name(v))),
        },
        FieldType::Str => match v {
            Value::String(_) => v.clone(),
            _ => return Err(format!("expected string, found {}", type_name(v))),
        },
        FieldType::File => match v {
            Value::String(s) => {
                if !base_dir.join(s).is_file() {
                    return Err(format!("file {:?} does not exist", base_dir.join(s)));
                }
                v.clone()
            }
            _ => return Err(format!("expected path string, found {}", type_name(v))),
        },
        FieldType::IntList => match v {
            Value::Array(a) if a.iter().all(|x| matches!(x, Value::Integer(_))) => v.clone(),
            _ => return Err("expected array of integers".into()),
        },
        FieldType::FloatList => match v {
            Value::Array(a) => Value::Array(
                a.iter()
                    .map(|x| float(x).map(Value::Float).ok_or("expected array of numbers".to_string()))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            ),
            _ => return Err("expected array of numbers".into()),
        },
    };
    let num = float(&value);
    match field.check {
        Check::None => {}
        Check::Positive if !(num.unwrap_or(0.0) > 0.0) => return Err("must be positive".into()),
        Check::NonNegative if !(num.unwrap_or(-1.0) >= 0.0) => return Err("must be nonnegative".into()),
        Check::Probability if !(0.0..=1.0).contains(&num.unwrap_or(-1.0)) => return Err("must lie in [0, 1]".into()),
        Check::PositiveList => {
            let items = value.as_array().expect("list types are arrays");
            if items.is_empty() {
                return Err("must be a non-empty list".into());
            }
            if items.iter().any(|x| !(float(x).unwrap_or(0.0) > 0.0)) {
                return Err("every entry must be positive".into());
            }
        }
        Check::OneOf(choices) => {
            let s = value.as_str().unwrap_or_default();
            if !choices.contains(&s) {
                return Err(format!("{s:?} is not one of {choices:?}"));
            }
        }
        _ => {}
    }
    Ok(value)
}

/// Validates `text` against its kind's schema; collects every problem
/// before failing.
pub fn validate_str(text: &str, origin: &str, base_dir: &Path) -> Result<ResolvedConfig> {
    let raw: Table = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        reason: e.to_string(),
    })?;
    let kind = match raw.get("kind") {
        Some(Value::String(k)) if KINDS.contains(&k.as_str()) => k.clone(),
        Some(v) => return Err(Error::Validation(vec![format!("kind: {v} is not one of {KINDS:?}")])),
        None => return Err(Error::Validation(vec!["kind: required field is missing".into()])),
    };
    let schema = list_experiments()
        .into_iter()
        .find(|s| s.kind == kind)
        .expect("kind is in the catalogue");
    let mut problems = Vec::new();
    for key in raw.keys() {
        if !schema.fields.iter().any(|f| f.name == key) {
            problems.push(format!("{key}: unknown field for kind {kind:?}"));
        }
    }
    let mut table = Table::new();
    for field in &schema.fields {
        match (raw.get(field.name), field.default) {
            (Some(v), _) => match check_field(field, v, base_dir) {
                Ok(v) => {
                    table.insert(field.name.into(), v);
                }
                Err(e) => problems.push(format!("{}: {e}", field.name)),
            },
            (None, Some(d)) => {
                table.insert(field.name.into(), literal(d));
            }
            (None, None) if field.required => problems.push(format!("{}: required field is missing", field.name)),
            (None, None) => {}
        }
    }
    // references that only matter for some choices
    for (selector, choice, file) in [
        ("source", "file", "source_file"),
        ("aux", "file", "aux_file"),
        ("channel", "file", "channel_file"),
    ] {
        if table.get(selector).and_then(Value::as_str) == Some(choice) && !table.contains_key(file) {
            problems.push(format!("{file}: required when {selector} = {choice:?}"));
        }
    }
    if let Some(dir) = table.get("output_dir").and_then(Value::as_str) {
        let p = Path::new(dir);
        if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            problems.push("output_dir: must be a relative path without '..'".into());
        }
    }
    if let Some(Value::Array(ns)) = table.get("n_grid") {
        if kind == "ld_exponent" && table.get("source").and_then(Value::as_str) == Some("gaussian") {
            problems.push("source: ld_exponent needs a discrete source".into());
        }
        if ns.is_empty() {
            problems.push("n_grid: must be a non-empty list".into());
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(ResolvedConfig {
        kind,
        table,
        base_dir: base_dir.to_path_buf(),
    })
}

/// Reads and validates a config file.
pub fn validate_file(path: &Path) -> Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate_str(&text, &path.display().to_string(), &base)
}

impl ResolvedConfig {
    fn get(&self, name: &str) -> &Value {
        self.table
            .get(name)
            .unwrap_or_else(|| panic!("field {name} was resolved by validation"))
    }

    pub fn f64(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            v => panic!("field {name} is {v}"),
        }
    }

    pub fn u64(&self, name: &str) -> u64 {
        self.get(name).as_integer().expect("validated integer") as u64
    }

    pub fn usize(&self, name: &str) -> usize {
        self.u64(name) as usize
    }

    pub fn bool(&self, name: &str) -> bool {
        self.get(name).as_bool().expect("validated boolean")
    }

    pub fn str(&self, name: &str) -> &str {
        self.get(name).as_str().expect("validated string")
    }

    pub fn f64_list(&self, name: &str) -> Vec<f64> {
        self.get(name)
            .as_array()
            .expect("validated list")
            .iter()
            .map(|v| v.as_float().unwrap_or_else(|| v.as_integer().unwrap_or(0) as f64))
            .collect()
    }

    pub fn usize_list(&self, name: &str) -> Vec<usize> {
        self.get(name)
            .as_array()
            .expect("validated list")
            .iter()
            .map(|v| v.as_integer().expect("validated integer") as usize)
            .collect()
    }

    pub fn file(&self, name: &str) -> Option<PathBuf> {
        self.table.get(name).and_then(Value::as_str).map(|s| self.base_dir.join(s))
    }

    /// The resolved table in canonical (sorted-key) TOML.
    pub fn canonical(&self) -> String {
        toml::to_string(&self.table).expect("tables serialize")
    }
}

/// A config for `kind` built from every field's example value.
pub fn sample_config(kind: &str) -> Option<String> {
    let schema = list_experiments().into_iter().find(|s| s.kind == kind)?;
    let mut out = String::new();
    for f in schema.fields.iter().filter(|f| f.required) {
        let v = if f.name == "kind" { format!("{kind:?}") } else { f.example.to_string() };
        out.push_str(&format!("{} = {v}\n", f.name));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_has_five_kinds_with_required_and_optional_fields() {
        let list = list_experiments();
        assert_eq!(list.len(), 5);
        assert_eq!(list.iter().map(|s| s.kind).collect::<Vec<_>>(), KINDS);
        for s in &list {
            assert!(s.fields.iter().any(|f| f.required));
            assert!(s.fields.iter().any(|f| !f.required));
        }
    }

    #[test]
    fn sample_configs_round_trip_through_the_validator() {
        for kind in KINDS {
            let text = sample_config(kind).unwrap();
            let r = validate_str(&text, kind, Path::new(".")).unwrap_or_else(|e| panic!("{kind}: {e}"));
            // resolving twice is a fixed point
            let again = validate_str(&r.canonical(), kind, Path::new(".")).unwrap();
            assert_eq!(r, again);
        }
    }

    #[test]
    fn empty_grid_is_reported_by_field() {
        let text = sample_config("typicality").unwrap().replace("n_grid = [100, 500]", "n_grid = []");
        let err = validate_str(&text, "t", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("n_grid"), "{err}");
    }

    #[test]
    fn every_problem_is_collected() {
        let text = "kind = \"protocol\"\nseed = -1\nbogus = 3\noutput_dir = \"../x\"\n";
        let Error::Validation(problems) = validate_str(text, "p", Path::new(".")).unwrap_err() else {
            panic!("expected validation error")
        };
        for needle in ["seed", "bogus", "output_dir", "n_grid: required", "delta1: required"] {
            assert!(problems.iter().any(|p| p.contains(needle)), "{needle}: {problems:?}");
        }
    }

    #[test]
    fn missing_referenced_file_is_rejected() {
        let text = format!("{}source = \"file\"\nsource_file = \"nope.toml\"\n", sample_config("ld_exponent").unwrap());
        let err = validate_str(&text, "l", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("source_file"), "{err}");
        let text = format!("{}source = \"file\"\n", sample_config("ld_exponent").unwrap());
        assert!(validate_str(&text, "l", Path::new(".")).unwrap_err().to_string().contains("required when"));
    }

    #[test]
    fn integers_coerce_to_floats() {
        let text = sample_config("protocol").unwrap().replace("channel_budget_bits = 0.02", "channel_budget_bits = 1");
        let r = validate_str(&text, "p", Path::new(".")).unwrap();
        assert_eq!(r.f64("channel_budget_bits"), 1.0);
        assert!(r.canonical().contains("channel_budget_bits = 1.0"));
    }
}
