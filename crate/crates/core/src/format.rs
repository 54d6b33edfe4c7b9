//! Constellation files and number formatting.
//!
//! A constellation file is a JSON object:
//!
//! ```json
//! {
//!   "side": "one",
//!   "M": 4,
//!   "energies": [0, 4, 16, 36],
//!   "regions": [["-inf", 2.5], [2.5, 10.5], [10.5, 26.5], [26.5, "inf"]],
//!   "meta": {"snr_db": 20, "N": 128, "K1": 0, "K2": 0, "exponent": 0.16, "case": "exact"}
//! }
//! ```
//!
//! `regions` and every `meta` field are optional. Floats are written with 17
//! significant digits so that values survive a write/read cycle bit for bit;
//! unbounded edges are the strings `"inf"` and `"-inf"`.

use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;
use serde_json::{Map, Value};
use std::path::Path;

use crate::constellation::{Codebook, Side};
use crate::designer::{Design, DesignCase};
use crate::detector::DecisionRegions;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, like C's `%.17g`: fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed. Non-finite values become `inf`, `-inf` and `nan`.
pub fn fmt_f17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses the output of [`fmt_f17`] (and any ordinary float literal).
pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
        "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::Format(format!("not a number: '{s}'"))),
    }
}

struct F17(f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(fmt_f17(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_str(&fmt_f17(self.0))
        }
    }
}

/// Provenance stored alongside a constellation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta {
    pub snr_db: Option<f64>,
    pub n: Option<u32>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub exponent: Option<f64>,
    pub case: Option<DesignCase>,
    /// Normalized noise variance the region centers were built with.
    pub noise_tilde_sq: Option<f64>,
    pub scheme: Option<String>,
}

/// Contents of a constellation file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationFile {
    pub codebook: Codebook,
    pub regions: Option<DecisionRegions>,
    pub meta: Meta,
}

impl ConstellationFile {
    pub fn from_design(design: &Design, meta: Meta) -> Self {
        ConstellationFile {
            codebook: design.codebook.clone(),
            regions: Some(design.regions.clone()),
            meta: Meta {
                exponent: Some(design.exponent),
                case: Some(design.case),
                noise_tilde_sq: Some(design.noise_tilde_sq),
                ..meta
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut obj = Map::new();
        obj.insert("side".into(), Value::String(self.codebook.side().to_string()));
        obj.insert("M".into(), Value::from(self.codebook.size()));
        obj.insert("energies".into(), raw_list(self.codebook.energies())?);
        if let Some(r) = &self.regions {
            let pairs = r
                .intervals()
                .iter()
                .map(|&(lo, hi)| raw_list(&[lo, hi]))
                .collect::<Result<Vec<_>>>()?;
            obj.insert("regions".into(), Value::Array(pairs));
        }
        let m = &self.meta;
        let mut meta = Map::new();
        let mut put = |k: &str, v: Option<f64>| -> Result<()> {
            if let Some(v) = v {
                meta.insert(k.into(), raw(v)?);
            }
            Ok(())
        };
        put("snr_db", m.snr_db)?;
        put("K1", m.k1)?;
        put("K2", m.k2)?;
        put("exponent", m.exponent)?;
        put("noise_tilde_sq", m.noise_tilde_sq)?;
        if let Some(n) = m.n {
            meta.insert("N".into(), Value::from(n));
        }
        if let Some(c) = m.case {
            meta.insert("case".into(), Value::String(c.to_string()));
        }
        if let Some(s) = &m.scheme {
            meta.insert("scheme".into(), Value::String(s.clone()));
        }
        obj.insert("meta".into(), Value::Object(meta));
        let mut out = serde_json::to_string_pretty(&Value::Object(obj))?;
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("constellation file must be a JSON object".into()))?;
        let side: Side = obj
            .get("side")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format("missing 'side'".into()))?
            .parse()?;
        let m = obj
            .get("M")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("missing or invalid 'M'".into()))? as usize;
        let energies = obj
            .get("energies")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Format("missing 'energies'".into()))?
            .iter()
            .map(number)
            .collect::<Result<Vec<_>>>()?;
        let codebook = Codebook::new(side, m, energies)?;

        let meta = match obj.get("meta") {
            None | Some(Value::Null) => Meta::default(),
            Some(Value::Object(mo)) => parse_meta(mo)?,
            Some(_) => return Err(Error::Format("'meta' must be an object".into())),
        };

        let regions = match obj.get("regions") {
            None | Some(Value::Null) => None,
            Some(Value::Array(items)) => {
                let intervals = items
                    .iter()
                    .map(|p| match p.as_array().map(Vec::as_slice) {
                        Some([lo, hi]) => Ok((number(lo)?, number(hi)?)),
                        _ => Err(Error::Format("each region must be a [lo, hi] pair".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let noise = meta.noise_tilde_sq.unwrap_or(0.0);
                Some(regions_from_intervals(&codebook, &intervals, noise)?)
            }
            Some(_) => return Err(Error::Format("'regions' must be an array".into())),
        };
        Ok(ConstellationFile {
            codebook,
            regions,
            meta,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        ConstellationFile::from_json(&std::fs::read_to_string(path)?)
    }
}

fn raw(v: f64) -> Result<Value> {
    Ok(serde_json::to_value(F17(v))?)
}

fn raw_list(vs: &[f64]) -> Result<Value> {
    Ok(serde_json::to_value(vs.iter().map(|&v| F17(v)).collect::<Vec<_>>())?)
}

fn number(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::Format(format!("bad number {n}"))),
        Value::String(s) => parse_f64(s),
        other => Err(Error::Format(format!("expected a number, got {other}"))),
    }
}

fn parse_meta(mo: &Map<String, Value>) -> Result<Meta> {
    let num = |k: &str| mo.get(k).map(number).transpose();
    Ok(Meta {
        snr_db: num("snr_db")?,
        n: mo
            .get("N")
            .map(|v| {
                v.as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| Error::Format("'N' must be a positive integer".into()))
            })
            .transpose()?,
        k1: num("K1")?,
        k2: num("K2")?,
        exponent: num("exponent")?,
        case: mo
            .get("case")
            .and_then(Value::as_str)
            .map(str::parse)
            .transpose()?,
        noise_tilde_sq: num("noise_tilde_sq")?,
        scheme: mo.get("scheme").and_then(Value::as_str).map(String::from),
    })
}

fn regions_from_intervals(codebook: &Codebook, intervals: &[(f64, f64)], noise: f64) -> Result<DecisionRegions> {
    if intervals.len() != codebook.levels() {
        return Err(Error::Regions(format!(
            "{} regions for {} levels",
            intervals.len(),
            codebook.levels()
        )));
    }
    if intervals[0].0 != f64::NEG_INFINITY || intervals[intervals.len() - 1].1 != f64::INFINITY {
        return Err(Error::Regions("outer region edges must be unbounded".into()));
    }
    for w in intervals.windows(2) {
        if w[0].1 != w[1].0 {
            return Err(Error::Regions(format!(
                "regions ({}, {}) and ({}, {}) do not share an edge",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    let centers = codebook.energies().iter().map(|e| e + noise).collect();
    let boundaries = intervals[..intervals.len() - 1].iter().map(|r| r.1).collect();
    DecisionRegions::from_boundaries(centers, boundaries)
}
