//! Run configuration files.
//!
//! TOML with sections `[model]`, `[market]`, `[factor.N]`, `[mc]`,
//! `[cases.NAME]` plus optional grid sections for the table commands.
//! Numbers may be written as decimals, integers or fractions in quotes
//! (`t0 = "7/12"`). A case repeats any subset of factor keys under
//! `[cases.NAME.factor.N]` and inherits the rest from the base factors.
//!
//! ```toml
//! [market]
//! rate = 0.0
//! flat = 100.0            # or: curve = [[0.5, 98.0], [1.0, 100.0]]
//!
//! [factor.1]
//! lambda = 1.0
//! kappa = 0.8
//! sigma = 1.2
//! rho = -0.25
//! v0 = 0.10
//! pattern = "sinusoid"
//! a = 0.25
//! b = 0.15
//! t0 = "7/12"
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::{FuturesCurve, ModelConfig, VolFactor};
use crate::montecarlo::McSettings;
use crate::seasonality::{Pattern, SeasonalitySpec};
use crate::spread::SpreadOptions;

/// Vanilla smile grid: strikes at one expiry.
#[derive(Debug, Clone, PartialEq)]
pub struct SmileGrid {
    pub expiry: f64,
    pub futures_maturity: f64,
    pub strikes: Vec<f64>,
}

/// Calendar spread table layout: rows are expiries (T = T₁), T₂ = T₁ + gap.
#[derive(Debug, Clone, PartialEq)]
pub struct CsoGrid {
    pub expiries: Vec<f64>,
    pub gap: f64,
    pub strikes: Vec<f64>,
}

impl Default for CsoGrid {
    fn default() -> Self {
        Self {
            expiries: (0..11).map(|k| (4 + 3 * k) as f64 / 12.0).collect(),
            gap: 0.5,
            strikes: vec![-10.0, 0.0, 10.0],
        }
    }
}

/// Instantaneous-correlation grid on [0, t1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrGrid {
    pub t1: f64,
    pub t2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub name: String,
    pub label: String,
    pub model: ModelConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub mc: McSettings,
    pub spread: SpreadOptions,
    /// In file order (sorted by name).
    pub cases: Vec<Case>,
    pub smile: SmileGrid,
    /// Term-structure maturities (T = T_m); monthly 1..36 months by default.
    pub term_structure: Vec<f64>,
    pub cso: CsoGrid,
    pub corr: Option<CorrGrid>,
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let known = [
            "model",
            "market",
            "factor",
            "mc",
            "cases",
            "spread",
            "smile",
            "term_structure",
            "cso",
            "corr",
        ];
        if let Some(k) = root.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("{k}: unknown section")));
        }

        let market = table(&root, "market")?;
        let rate = match market.and_then(|m| m.get("rate")) {
            Some(v) => number(v, "market.rate")?,
            None => 0.0,
        };
        let curve = parse_curve(market)?;

        let factor_tables = table(&root, "factor")?
            .ok_or_else(|| Error::Config("factor: at least one [factor.N] section is required".into()))?;
        let factors = parse_factors(factor_tables, None)?;
        if let Some(model) = table(&root, "model")? {
            if let Some(n) = model.get("factors") {
                let n = integer(n, "model.factors")?;
                if n as usize != factors.len() {
                    return Err(Error::Config(format!(
                        "model.factors: declares {n} factors but {} [factor.N] sections are present",
                        factors.len()
                    )));
                }
            }
        }
        let model = ModelConfig::new(factors.iter().map(|(f, _)| *f).collect(), rate, curve.clone())?;

        let mut cases = Vec::new();
        if let Some(ct) = table(&root, "cases")? {
            for (name, value) in ct {
                let case = value
                    .as_table()
                    .ok_or_else(|| Error::Config(format!("cases.{name}: expected a table")))?;
                let label = match case.get("label") {
                    Some(Value::String(s)) => s.clone(),
                    Some(_) => return Err(Error::Config(format!("cases.{name}.label: expected a string"))),
                    None => name.clone(),
                };
                if let Some(k) = case.keys().find(|k| *k != "label" && *k != "factor") {
                    return Err(Error::Config(format!("cases.{name}.{k}: unknown key")));
                }
                let overrides = match case.get("factor") {
                    Some(Value::Table(t)) => Some(t),
                    Some(_) => return Err(Error::Config(format!("cases.{name}.factor: expected a table"))),
                    None => None,
                };
                let fs = match overrides {
                    Some(t) => parse_factors(factor_tables, Some((t, name)))?,
                    None => factors.clone(),
                };
                let model = ModelConfig::new(fs.iter().map(|(f, _)| *f).collect(), rate, curve.clone())
                    .map_err(|e| prefix(e, &format!("cases.{name}.")))?;
                cases.push(Case {
                    name: name.clone(),
                    label,
                    model,
                });
            }
        }

        let mc = parse_mc(table(&root, "mc")?)?;
        let spread = parse_spread(table(&root, "spread")?)?;
        let smile = parse_smile(table(&root, "smile")?)?;
        let term_structure = match table(&root, "term_structure")? {
            Some(t) => {
                sorted_grid(t.get("maturities"), "term_structure.maturities", true)?.unwrap_or_else(monthly_grid)
            }
            None => monthly_grid(),
        };
        let cso = parse_cso(table(&root, "cso")?)?;
        let corr = parse_corr(table(&root, "corr")?)?;

        Ok(Self {
            model,
            mc,
            spread,
            cases,
            smile,
            term_structure,
            cso,
            corr,
        })
    }
}

fn monthly_grid() -> Vec<f64> {
    (1..=36).map(|m| m as f64 / 12.0).collect()
}

fn prefix(e: Error, p: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::invalid(format!("{p}{field}"), reason),
        other => other,
    }
}

fn table<'a>(t: &'a Table, key: &str) -> Result<Option<&'a Table>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Table(x)) => Ok(Some(x)),
        Some(_) => Err(Error::Config(format!("{key}: expected a section"))),
    }
}

/// Decimal, integer or quoted fraction "p/q".
fn number(v: &Value, field: &str) -> Result<f64> {
    let x = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        Value::String(s) => parse_fraction(s)
            .ok_or_else(|| Error::Config(format!("{field}: cannot parse {s:?} as a number or fraction")))?,
        other => {
            return Err(Error::Config(format!(
                "{field}: expected a number, got {}",
                other.type_str()
            )))
        }
    };
    if !x.is_finite() {
        return Err(Error::Config(format!("{field}: must be finite")));
    }
    Ok(x)
}

fn parse_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            (q != 0.0).then(|| p / q)
        }
        None => s.parse().ok(),
    }
}

fn integer(v: &Value, field: &str) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::Config(format!("{field}: expected a non-negative integer"))),
    }
}

fn boolean(v: &Value, field: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Config(format!("{field}: expected true or false")))
}

fn number_list(v: &Value, field: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config(format!("{field}: expected an array")))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{field}[{i}]")))
        .collect()
}

fn sorted_grid(v: Option<&Value>, field: &str, positive: bool) -> Result<Option<Vec<f64>>> {
    let Some(v) = v else { return Ok(None) };
    let g = number_list(v, field)?;
    if g.is_empty() {
        return Err(Error::Config(format!("{field}: grid must be non-empty")));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{field}: grid must be strictly increasing")));
    }
    if positive && g[0] <= 0.0 {
        return Err(Error::Config(format!("{field}: values must be > 0")));
    }
    Ok(Some(g))
}

fn parse_curve(market: Option<&Table>) -> Result<FuturesCurve> {
    let Some(m) = market else {
        return FuturesCurve::flat(100.0);
    };
    if let Some(k) = m.keys().find(|k| !["rate", "flat", "curve"].contains(&k.as_str())) {
        return Err(Error::Config(format!("market.{k}: unknown key")));
    }
    match (m.get("flat"), m.get("curve")) {
        (Some(_), Some(_)) => Err(Error::Config(
            "market.curve: give either flat or curve, not both".into(),
        )),
        (Some(f), None) => FuturesCurve::flat(number(f, "market.flat")?).map_err(|e| prefix(e, "market.")),
        (None, Some(c)) => {
            let rows = c
                .as_array()
                .ok_or_else(|| Error::Config("market.curve: expected an array of [maturity, price]".into()))?;
            let mut points = Vec::with_capacity(rows.len());
            for (i, r) in rows.iter().enumerate() {
                let pair = number_list(r, &format!("market.curve[{i}]"))?;
                if pair.len() != 2 {
                    return Err(Error::Config(format!("market.curve[{i}]: expected [maturity, price]")));
                }
                points.push((pair[0], pair[1]));
            }
            FuturesCurve::new(points).map_err(|e| prefix(e, "market.curve."))
        }
        (None, None) => Ok(FuturesCurve::flat(100.0)?),
    }
}

const FACTOR_KEYS: [&str; 10] = [
    "lambda",
    "kappa",
    "sigma",
    "rho",
    "v0",
    "pattern",
    "a",
    "b",
    "t0",
    "allow_negative_theta",
];

/// Parses `[factor.1]`, `[factor.2]`, … in numeric order, with optional
/// per-case overrides. Returns the factors with their section names.
fn parse_factors(base: &Table, overrides: Option<(&Table, &str)>) -> Result<Vec<(VolFactor, String)>> {
    let mut ids: Vec<(usize, &String)> = Vec::new();
    for k in base.keys() {
        let id: usize = k
            .parse()
            .ok()
            .filter(|i| *i >= 1)
            .ok_or_else(|| Error::Config(format!("factor.{k}: factor sections are numbered 1, 2, ...")))?;
        ids.push((id, k));
    }
    ids.sort();
    if ids.iter().enumerate().any(|(i, (id, _))| *id != i + 1) {
        return Err(Error::Config(
            "factor: sections must be numbered consecutively from 1".into(),
        ));
    }
    if let Some((ov, case)) = overrides {
        if let Some(k) = ov.keys().find(|k| !base.contains_key(*k)) {
            return Err(Error::Config(format!(
                "cases.{case}.factor.{k}: no matching [factor.{k}] section"
            )));
        }
    }
    ids.iter()
        .map(|(_, key)| {
            let t = base[*key]
                .as_table()
                .ok_or_else(|| Error::Config(format!("factor.{key}: expected a section")))?;
            let ov = match overrides {
                Some((ov, case)) => match ov.get(*key) {
                    Some(Value::Table(x)) => Some((x, case)),
                    Some(_) => return Err(Error::Config(format!("cases.{case}.factor.{key}: expected a table"))),
                    None => None,
                },
                None => None,
            };
            parse_factor(t, key, ov).map(|f| (f, (*key).clone()))
        })
        .collect()
}

fn parse_factor(t: &Table, key: &str, ov: Option<(&Table, &str)>) -> Result<VolFactor> {
    for (tab, path) in std::iter::once((t, format!("factor.{key}")))
        .chain(ov.map(|(o, case)| (o, format!("cases.{case}.factor.{key}"))))
    {
        if let Some(k) = tab.keys().find(|k| !FACTOR_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("{path}.{k}: unknown key")));
        }
    }
    let lookup = |name: &str| -> Option<(&Value, String)> {
        if let Some((o, case)) = ov {
            if let Some(v) = o.get(name) {
                return Some((v, format!("cases.{case}.factor.{key}.{name}")));
            }
        }
        t.get(name).map(|v| (v, format!("factor.{key}.{name}")))
    };
    let req = |name: &str| -> Result<f64> {
        let (v, field) = lookup(name).ok_or_else(|| Error::Config(format!("factor.{key}.{name}: missing")))?;
        number(v, &field)
    };
    let opt = |name: &str, default: f64| -> Result<f64> {
        match lookup(name) {
            Some((v, field)) => number(v, &field),
            None => Ok(default),
        }
    };
    let pattern = match lookup("pattern") {
        Some((Value::String(s), field)) => s
            .parse::<Pattern>()
            .map_err(|e| Error::Config(format!("{field}: {e}")))?,
        Some((_, field)) => return Err(Error::Config(format!("{field}: expected a pattern name"))),
        None => Pattern::Constant,
    };
    let allow_negative = match lookup("allow_negative_theta") {
        Some((v, field)) => boolean(v, &field)?,
        None => false,
    };
    let path = match ov {
        Some((_, case)) => format!("cases.{case}.factor.{key}."),
        None => format!("factor.{key}."),
    };
    let (a, b, t0) = (req("a")?, opt("b", 0.0)?, opt("t0", 0.0)?);
    let seasonality = if allow_negative {
        SeasonalitySpec::new_allowing_negative(pattern, a, b, t0)
    } else {
        SeasonalitySpec::new(pattern, a, b, t0)
    }
    .map_err(|e| prefix(e, &path))?;
    VolFactor::new(
        req("lambda")?,
        req("kappa")?,
        opt("sigma", 0.0)?,
        opt("rho", 0.0)?,
        req("v0")?,
        seasonality,
    )
    .map_err(|e| prefix(e, &path))
}

fn parse_mc(t: Option<&Table>) -> Result<McSettings> {
    let mut s = McSettings::default();
    let Some(t) = t else { return Ok(s) };
    for (k, v) in t {
        let field = format!("mc.{k}");
        match k.as_str() {
            "paths" => s.paths = integer(v, &field)? as usize,
            "steps_per_year" => s.steps_per_year = integer(v, &field)? as usize,
            "seed" => s.seed = integer(v, &field)?,
            "antithetic" => s.antithetic = boolean(v, &field)?,
            _ => return Err(Error::Config(format!("{field}: unknown key"))),
        }
    }
    s.validate()?;
    Ok(s)
}

fn parse_spread(t: Option<&Table>) -> Result<SpreadOptions> {
    let mut s = SpreadOptions::default();
    let Some(t) = t else { return Ok(s) };
    for (k, v) in t {
        let field = format!("spread.{k}");
        match k.as_str() {
            "damping" => {
                s.damping = number(v, &field)?;
                if s.damping <= 0.0 {
                    return Err(Error::Config(format!("{field}: must be > 0")));
                }
            }
            "optimize_threshold" => s.optimize_threshold = boolean(v, &field)?,
            _ => return Err(Error::Config(format!("{field}: unknown key"))),
        }
    }
    Ok(s)
}

fn parse_smile(t: Option<&Table>) -> Result<SmileGrid> {
    let mut g = SmileGrid {
        expiry: 0.5,
        futures_maturity: 0.5,
        strikes: (0..=8).map(|i| 80.0 + 5.0 * i as f64).collect(),
    };
    let Some(t) = t else { return Ok(g) };
    let mut maturity = None;
    for (k, v) in t {
        let field = format!("smile.{k}");
        match k.as_str() {
            "expiry" => g.expiry = number(v, &field)?,
            "futures_maturity" => maturity = Some(number(v, &field)?),
            "strikes" => g.strikes = sorted_grid(Some(v), &field, true)?.unwrap(),
            _ => return Err(Error::Config(format!("{field}: unknown key"))),
        }
    }
    g.futures_maturity = maturity.unwrap_or(g.expiry);
    Ok(g)
}

fn parse_cso(t: Option<&Table>) -> Result<CsoGrid> {
    let mut g = CsoGrid::default();
    let Some(t) = t else { return Ok(g) };
    for (k, v) in t {
        let field = format!("cso.{k}");
        match k.as_str() {
            "expiries" => g.expiries = sorted_grid(Some(v), &field, true)?.unwrap(),
            "strikes" => g.strikes = sorted_grid(Some(v), &field, false)?.unwrap(),
            "gap" => {
                g.gap = number(v, &field)?;
                if g.gap <= 0.0 {
                    return Err(Error::Config(format!("{field}: must be > 0")));
                }
            }
            _ => return Err(Error::Config(format!("{field}: unknown key"))),
        }
    }
    Ok(g)
}

fn parse_corr(t: Option<&Table>) -> Result<Option<CorrGrid>> {
    let Some(t) = t else { return Ok(None) };
    let mut g = CorrGrid {
        t1: 1.0,
        t2: 1.5,
        points: 601,
    };
    for (k, v) in t {
        let field = format!("corr.{k}");
        match k.as_str() {
            "t1" => g.t1 = number(v, &field)?,
            "t2" => g.t2 = number(v, &field)?,
            "points" => g.points = integer(v, &field)? as usize,
            _ => return Err(Error::Config(format!("{field}: unknown key"))),
        }
    }
    if !(g.t1 > 0.0 && g.t2 > g.t1) {
        return Err(Error::Config("corr.t2: need 0 < t1 < t2".into()));
    }
    if g.points < 2 {
        return Err(Error::Config("corr.points: need at least 2".into()));
    }
    Ok(Some(g))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[market]
rate = 0.005
flat = 100

[factor.1]
lambda = 2.0
kappa = 0.8
sigma = 1.2
rho = -0.25
v0 = 0.10
pattern = "sinusoid"
a = 0.25
b = 0.0
t0 = "7/12"

[factor.2]
lambda = 0.5
kappa = 0.8
sigma = 0.9
rho = -0.25
v0 = 0.04
pattern = "sinusoid"
a = 0.10
t0 = "7/12"

[cases.case1]
label = "none"

[cases.case3.factor.1]
b = 0.35
allow_negative_theta = true
"#;

    #[test]
    fn parses_cases_and_fractions() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.model.factors().len(), 2);
        assert_eq!(c.model.rate(), 0.005);
        assert!((c.model.factors()[0].seasonality.t0() - 7.0 / 12.0).abs() < 1e-16);
        assert_eq!(c.cases.len(), 2);
        assert_eq!(c.cases[0].label, "none");
        assert_eq!(c.cases[1].model.factors()[0].seasonality.b(), 0.35);
        assert_eq!(c.cases[1].model.factors()[1], c.model.factors()[1]);
        assert_eq!(c.cso.expiries.len(), 11);
        assert_eq!(c.term_structure.len(), 36);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = BASE.replace("kappa = 0.8\nsigma = 1.2", "kappa = -0.8\nsigma = 1.2");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("factor.1.kappa"), "{msg}");

        let bad = BASE.replace("t0 = \"7/12\"\n\n[factor.2]", "t0 = \"7/x\"\n\n[factor.2]");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("factor.1.t0"), "{msg}");

        let bad = BASE.replace("allow_negative_theta = true\n", "");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("cases.case3.factor.1.b"), "{msg}");

        let bad = format!("{BASE}\n[mc]\npaths = 1\n");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("mc.paths"), "{msg}");

        let bad = BASE.replace("lambda = 0.5", "lamda = 0.5");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("factor.2.lamda"), "{msg}");
    }

    #[test]
    fn grids_must_be_sorted() {
        let bad = format!("{BASE}\n[cso]\nstrikes = [0, -10]\n");
        assert!(RunConfig::parse(&bad).unwrap_err().to_string().contains("cso.strikes"));
    }

    #[test]
    fn fraction_parser() {
        assert_eq!(parse_fraction("7/12"), Some(7.0 / 12.0));
        assert_eq!(parse_fraction(" 0.25 "), Some(0.25));
        assert_eq!(parse_fraction("1/0"), None);
    }
}
