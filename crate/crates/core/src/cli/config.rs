//! Flat `key=value` scenario files.
//!
//! ```text
//! # comments and blank lines are ignored
//! mechanism=owa
//! N=5
//! T=500
//! m=20
//! bands=default
//! strategies=truthful
//! worker.3.strategy=shift:0.2@100
//! seed=1
//! ```
//!
//! Step sizes (`alpha`, `beta`, `eta`) accept `auto`. Worker blocks are
//! 1-based (`worker.<i>.band=lo,hi`, `worker.<i>.strategy=...`). An entrant
//! is declared with `arrival.slot`, `arrival.band`, and either
//! `arrival.weight` or `arrival.ratio` plus `arrival.incumbent`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mechanisms::{EmParams, MechanismKind, ParamChoice};
use crate::sim::{ArrivalSpec, ArrivalWeight, FeedbackMode, ScenarioConfig};
use crate::workers::{NoiseBand, StrategySpec};

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "AGGRSIM_SEED";

fn at(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

fn number<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<T> {
    e.value.parse().map_err(|_| at(e.line, format!("{key}: cannot parse '{}'", e.value)))
}

fn step(e: &Entry, key: &str) -> Result<Option<f64>> {
    if e.value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        number(e, key).map(Some)
    }
}

fn band(e: &Entry, key: &str) -> Result<NoiseBand> {
    let (lo, hi) =
        e.value.split_once(',').ok_or_else(|| at(e.line, format!("{key}: expected 'low,high', got '{}'", e.value)))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| at(e.line, format!("{key}: bad number '{s}'")));
    NoiseBand::new(parse(lo)?, parse(hi)?).map_err(|err| at(e.line, format!("{key}: {err}")))
}

fn strategy(e: &Entry, key: &str) -> Result<StrategySpec> {
    e.value.parse().map_err(|err| at(e.line, format!("{key}: {err}")))
}

const KEYS: &[&str] = &[
    "mechanism",
    "n",
    "t",
    "m",
    "seed",
    "bands",
    "strategies",
    "feedback",
    "flip_epsilon",
    "alpha",
    "beta",
    "eta",
    "median_subsample",
    "em.prior_a",
    "em.prior_b",
    "em.truth_prior",
    "em.initial_reliability",
    "arrival.slot",
    "arrival.weight",
    "arrival.ratio",
    "arrival.incumbent",
    "arrival.band",
    "arrival.strategy",
];

/// Parses and validates a scenario. Errors name the offending line.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut workers: BTreeMap<(usize, &'static str), Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| at(line, format!("expected key=value, got '{content}'")))?;
        let key = k.trim().to_ascii_lowercase();
        let entry = Entry { line, value: v.trim() };
        if let Some(rest) = key.strip_prefix("worker.") {
            let (i, field) = rest.split_once('.').ok_or_else(|| at(line, format!("unknown key '{}'", k.trim())))?;
            let i: usize = i.parse().map_err(|_| at(line, format!("bad worker index in '{}'", k.trim())))?;
            let field = match field {
                "band" => "band",
                "strategy" => "strategy",
                _ => return Err(at(line, format!("unknown key '{}'", k.trim()))),
            };
            if i == 0 {
                return Err(at(line, "worker indices start at 1"));
            }
            if workers.insert((i, field), entry).is_some() {
                return Err(at(line, format!("duplicate key '{}'", k.trim())));
            }
            continue;
        }
        if !KEYS.contains(&key.as_str()) {
            return Err(at(line, format!("unknown key '{}'", k.trim())));
        }
        if entries.contains_key(&key) {
            return Err(at(line, format!("duplicate key '{}'", k.trim())));
        }
        entries.insert(key, entry);
    }

    let get = |k: &str| entries.get(k);
    let require = |k: &str, name: &str| get(k).ok_or_else(|| at(0, format!("missing required key '{name}'")));
    let mechanism: MechanismKind = {
        let e = require("mechanism", "mechanism")?;
        e.value.parse().map_err(|err| at(e.line, format!("mechanism: {err}")))?
    };
    let n: usize = number(require("n", "N")?, "N")?;
    let t: usize = number(require("t", "T")?, "T")?;
    let m: usize = match get("m") {
        Some(e) => number(e, "m")?,
        None => 20,
    };
    let seed: u64 = match get("seed") {
        Some(e) => number(e, "seed")?,
        None => 0,
    };
    let mut cfg = ScenarioConfig::preset(mechanism, n, t, m, seed);

    if let Some(e) = get("bands") {
        if !e.value.eq_ignore_ascii_case("default") {
            cfg.bands = e
                .value
                .split(';')
                .map(|b| band(&Entry { line: e.line, value: b.trim() }, "bands"))
                .collect::<Result<_>>()?;
        }
    }
    if let Some(e) = get("strategies") {
        cfg.strategies = vec![strategy(e, "strategies")?; n];
    }
    for ((i, field), e) in &workers {
        let key = format!("worker.{i}.{field}");
        if *i > n {
            return Err(at(e.line, format!("{key}: worker {i} exceeds N = {n}")));
        }
        match *field {
            "band" => {
                if cfg.bands.len() == n {
                    cfg.bands[i - 1] = band(e, &key)?;
                }
            }
            _ => {
                if cfg.strategies.len() == n {
                    cfg.strategies[i - 1] = strategy(e, &key)?;
                }
            }
        }
    }
    if let Some(e) = get("feedback") {
        cfg.feedback = match e.value.to_ascii_lowercase().as_str() {
            "full" => FeedbackMode::Full,
            "limited" => FeedbackMode::Limited,
            "auto" => FeedbackMode::for_mechanism(mechanism),
            other => return Err(at(e.line, format!("feedback: expected full, limited or auto, got '{other}'"))),
        };
    }
    if let Some(e) = get("flip_epsilon") {
        cfg.flip_epsilon = number(e, "flip_epsilon")?;
    }
    let mut params = ParamChoice::default();
    if let Some(e) = get("alpha") {
        params.alpha = step(e, "alpha")?;
    }
    if let Some(e) = get("beta") {
        params.beta = step(e, "beta")?;
    }
    if let Some(e) = get("eta") {
        params.eta = step(e, "eta")?;
    }
    if let Some(e) = get("median_subsample") {
        params.median_subsample = Some(number(e, "median_subsample")?);
    }
    let mut em = EmParams::default();
    for (key, slot) in [
        ("em.prior_a", &mut em.prior_a),
        ("em.prior_b", &mut em.prior_b),
        ("em.truth_prior", &mut em.truth_prior),
        ("em.initial_reliability", &mut em.initial_reliability),
    ] {
        if let Some(e) = get(key) {
            *slot = number(e, key)?;
        }
    }
    if let Err(err) = em.validate() {
        let line = ["em.prior_a", "em.prior_b", "em.truth_prior", "em.initial_reliability"]
            .iter()
            .find_map(|k| get(k).map(|e| e.line))
            .unwrap_or(0);
        return Err(at(line, err.to_string()));
    }
    params.em = em;
    cfg.params = params;

    let arrival_keys =
        ["arrival.slot", "arrival.weight", "arrival.ratio", "arrival.incumbent", "arrival.band", "arrival.strategy"];
    if let Some(first) = arrival_keys.iter().find_map(|k| get(k)) {
        let slot_e = get("arrival.slot").ok_or_else(|| at(first.line, "arrival block needs arrival.slot"))?;
        let band_e = get("arrival.band").ok_or_else(|| at(first.line, "arrival block needs arrival.band"))?;
        let weight = match (get("arrival.weight"), get("arrival.ratio")) {
            (Some(w), None) => ArrivalWeight::Absolute(number(w, "arrival.weight")?),
            (None, Some(r)) => {
                let incumbent: usize = match get("arrival.incumbent") {
                    Some(e) => number(e, "arrival.incumbent")?,
                    None => 1,
                };
                if incumbent == 0 {
                    return Err(at(
                        get("arrival.incumbent").map_or(r.line, |e| e.line),
                        "arrival.incumbent is 1-based",
                    ));
                }
                ArrivalWeight::Ratio { incumbent: incumbent - 1, ratio: number(r, "arrival.ratio")? }
            }
            (Some(_), Some(r)) => return Err(at(r.line, "give either arrival.weight or arrival.ratio, not both")),
            (None, None) => return Err(at(first.line, "arrival block needs arrival.weight or arrival.ratio")),
        };
        cfg.arrival = Some(ArrivalSpec {
            start_slot: number(slot_e, "arrival.slot")?,
            weight,
            band: band(band_e, "arrival.band")?,
            strategy: match get("arrival.strategy") {
                Some(e) => strategy(e, "arrival.strategy")?,
                None => StrategySpec::truthful(),
            },
        });
    }

    let line_of = |field: &str| -> usize {
        let field = field.to_ascii_lowercase();
        let lookup = match field.as_str() {
            "n" | "bands" | "strategies" => get(&field).or_else(|| get("n")),
            "arrival.ratio" => get("arrival.ratio"),
            "arrival" => arrival_keys.iter().find_map(|k| get(k)),
            f if f.starts_with("worker.") => {
                let mut parts = f.splitn(3, '.').skip(1);
                let i = parts.next().and_then(|i| i.parse::<usize>().ok());
                match (i, parts.next()) {
                    (Some(i), Some("band")) if i == n + 1 => get("arrival.band"),
                    (Some(i), Some("strategy")) if i == n + 1 => get("arrival.strategy"),
                    (Some(i), Some("band")) => workers.get(&(i, "band")).or_else(|| get("bands")),
                    (Some(i), Some(_)) => workers.get(&(i, "strategy")).or_else(|| get("strategies")),
                    _ => None,
                }
            }
            f => get(f),
        };
        lookup.map_or(0, |e| e.line)
    };
    match cfg.validate() {
        Ok(()) => {}
        Err(Error::ConfigInvalid(msg)) => {
            let field = msg.split(':').next().unwrap_or("");
            return Err(at(line_of(field), msg));
        }
        Err(e) => return Err(e),
    }
    if cfg.horizon > 0 {
        cfg.resolve_params().map_err(|e| {
            let key = ["alpha", "beta", "eta", "median_subsample", "t"].into_iter().find(|k| get(k).is_some());
            at(key.and_then(get).map_or(0, |e| e.line), e.to_string())
        })?;
    }
    Ok(cfg)
}

/// Applies the seed override from [`SEED_ENV`] if it is set.
pub fn apply_seed_override(cfg: &mut ScenarioConfig) -> Result<()> {
    if let Ok(v) = std::env::var(SEED_ENV) {
        cfg.seed = v
            .trim()
            .parse()
            .map_err(|_| Error::ConfigInvalid(format!("{SEED_ENV}: '{v}' is not an unsigned integer")))?;
    }
    Ok(())
}
