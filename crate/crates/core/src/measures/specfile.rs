//! Measure-spec files.
//!
//! A spec is a flat list of `key = value` lines:
//!
//! ```text
//! # quartic target, one dimension
//! family = quartic
//! lambda = 0.25
//! ```
//!
//! Grammar:
//!
//! ```text
//! file    := line*
//! line    := blank | comment | pair
//! comment := ws* "#" any*
//! pair    := ws* key ws* "=" ws* value ws* ("#" any*)?
//! key     := [A-Za-z_][A-Za-z0-9_]*
//! value   := number | number ("," number)+ | word
//! ```
//!
//! Keys may appear once. `family` is required; every other key must belong
//! to the chosen family (table below) and unknown keys are errors. `name`
//! is accepted by every family and overrides the measure label.
//!
//! | family | keys (default) |
//! |--------|----------------|
//! | `gaussian` | `dim` (1), `sigma` (1) |
//! | `quartic` | `dim` (1), `lambda` (required): `|x|^2/2 + lambda sum x_i^4` |
//! | `anisotropic` | `precision` (required, diagonal list), `radial_quartic` (0): `x.Ax/2 + c|x|^4` |
//! | `exponential` | `rate` (1) |
//! | `model_nu` | `A` (required) |
//! | `halfline` | `density` (`one`; or `exp`, `one_plus`, `inv_one_plus`) |
//! | `radial` | `profile` (`exp`; or `one`, `one_plus`, `inv_one_plus`), `dim` (2) |
//! | `uniform` | `body` (required: `square`, `cube`, `disk`, `ball`, `ellipsoid`), `halfwidth` (1), `radius` (1), `axes`, `dim` (2), `scale` (1) |

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use super::{
    add_potentials, make_density, make_exponential, make_gaussian, make_gaussian_precision,
    make_halfline, make_model_nu, make_quartic, make_radial, make_uniform, ConvexBody,
    MeasureSpec, Potential, ScalarProfile,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Numbers(Vec<f64>),
    Word(String),
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value: Value,
    used: bool,
}

struct Fields {
    entries: BTreeMap<String, Entry>,
}

fn spec_err(line: usize, message: impl Into<String>) -> Error {
    Error::Spec {
        line,
        message: message.into(),
    }
}

fn valid_key(k: &str) -> bool {
    let mut c = k.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn parse_value(raw: &str, line: usize) -> Result<Value> {
    if raw.is_empty() {
        return Err(spec_err(line, "missing value"));
    }
    let first = raw.chars().next().unwrap_or(' ');
    if first.is_ascii_digit() || matches!(first, '-' | '+' | '.') {
        let nums = raw
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| spec_err(line, format!("not a finite number: '{}'", p.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Value::Numbers(nums));
    }
    if raw.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
        Ok(Value::Word(raw.to_string()))
    } else {
        Err(spec_err(line, format!("malformed value '{raw}'")))
    }
}

impl Fields {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| spec_err(line, "expected 'key = value'"))?;
            let key = k.trim();
            if !valid_key(key) {
                return Err(spec_err(line, format!("invalid key '{key}'")));
            }
            let value = parse_value(v.trim(), line)?;
            if let Some(prev) = entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value,
                    used: false,
                },
            ) {
                return Err(spec_err(line, format!("duplicate key '{key}' (first on line {})", prev.line)));
            }
        }
        Ok(Fields { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, Value)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn word(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some((_, Value::Word(w))) => Ok(Some(w)),
            Some((line, _)) => Err(spec_err(line, format!("'{key}' expects a word"))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(usize, Vec<f64>)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, Value::Numbers(v))) => Ok(Some((line, v))),
            Some((line, _)) => Err(spec_err(line, format!("'{key}' expects numbers"))),
        }
    }

    fn number(&mut self, key: &str) -> Result<Option<(usize, f64)>> {
        match self.list(key)? {
            None => Ok(None),
            Some((line, v)) if v.len() == 1 => Ok(Some((line, v[0]))),
            Some((line, _)) => Err(spec_err(line, format!("'{key}' expects a single number"))),
        }
    }

    fn required(&mut self, key: &str, family: &str) -> Result<(usize, f64)> {
        self.number(key)?
            .ok_or_else(|| spec_err(0, format!("family '{family}' requires '{key}'")))
    }

    fn number_or(&mut self, key: &str, default: f64) -> Result<(usize, f64)> {
        Ok(self.number(key)?.unwrap_or((0, default)))
    }

    fn dim_or(&mut self, default: usize) -> Result<usize> {
        let (line, v) = self.number_or("dim", default as f64)?;
        if v < 1.0 || v.fract() != 0.0 || v > 64.0 {
            return Err(spec_err(line, format!("dim must be an integer in 1..=64, got {v}")));
        }
        Ok(v as usize)
    }

    fn reject_unused(&self, family: &str) -> Result<()> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(spec_err(e.line, format!("unknown key '{k}' for family '{family}'"))),
            None => Ok(()),
        }
    }
}

fn profile(name: &str, line: usize) -> Result<ScalarProfile> {
    Ok(match name {
        "one" => ScalarProfile::constant(1.0),
        "exp" => ScalarProfile::exponential(),
        "one_plus" => ScalarProfile::one_plus(),
        "inv_one_plus" => ScalarProfile::inv_one_plus(),
        other => return Err(spec_err(line, format!("unknown profile '{other}'"))),
    })
}

// Errors raised by the constructors carry the line of the offending key.
fn at(line: usize, r: Result<MeasureSpec>) -> Result<MeasureSpec> {
    r.map_err(|e| match e {
        Error::Spec { .. } => e,
        other => spec_err(line, other.to_string()),
    })
}

/// Parses a spec document into a measure.
pub fn parse_spec(text: &str) -> Result<MeasureSpec> {
    let mut f = Fields::parse(text)?;
    let family = f
        .word("family")?
        .ok_or_else(|| spec_err(0, "missing 'family'"))?;
    let name = f.word("name")?;
    let m = match family.as_str() {
        "gaussian" => {
            let d = f.dim_or(1)?;
            let (l, s) = f.number_or("sigma", 1.0)?;
            at(l, make_gaussian(d, s))?
        }
        "quartic" => {
            let d = f.dim_or(1)?;
            let (l, lam) = f.required("lambda", &family)?;
            at(l, make_quartic(d, lam))?
        }
        "anisotropic" => {
            let (l, diag) = f
                .list("precision")?
                .ok_or_else(|| spec_err(0, "family 'anisotropic' requires 'precision'"))?;
            if diag.iter().any(|a| !(*a > 0.0)) {
                return Err(spec_err(l, "precision entries must be positive"));
            }
            let (lc, c) = f.number_or("radial_quartic", 0.0)?;
            let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
            if c == 0.0 {
                at(l, make_gaussian_precision(a))?
            } else {
                let scale = 1.0 / diag.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
                let built = Potential::quadratic(a).and_then(|q| {
                    let p = Potential::radial_quartic(diag.len(), c)?;
                    add_potentials(&q, &p)
                });
                let v = built
                    .map_err(|e| spec_err(lc, e.to_string()))?
                    .named(format!("anisotropic(A={diag:?},c={c})"));
                at(lc, make_density(v, scale))?
            }
        }
        "exponential" => {
            let (l, r) = f.number_or("rate", 1.0)?;
            at(l, make_exponential(r))?
        }
        "model_nu" => {
            let (l, a) = f.required("A", &family)?;
            at(l, make_model_nu(a))?
        }
        "halfline" => {
            let w = f.word("density")?.unwrap_or_else(|| "one".into());
            make_halfline(profile(&w, line_of(&f, "density"))?)
        }
        "radial" => {
            let w = f.word("profile")?.unwrap_or_else(|| "exp".into());
            let p = profile(&w, line_of(&f, "profile"))?;
            let d = f.dim_or(2)?;
            at(line_of(&f, "dim"), make_radial(p, d))?
        }
        "uniform" => {
            let body = f
                .word("body")?
                .ok_or_else(|| spec_err(0, "family 'uniform' requires 'body'"))?;
            let bl = line_of(&f, "body");
            let b = match body.as_str() {
                "square" | "cube" => {
                    let d = if body == "square" { 2 } else { f.dim_or(2)? };
                    let (l, h) = f.number_or("halfwidth", 1.0)?;
                    ConvexBody::cube(h, d).map_err(|e| spec_err(l, e.to_string()))?
                }
                "disk" | "ball" => {
                    let d = if body == "disk" { 2 } else { f.dim_or(2)? };
                    let (l, r) = f.number_or("radius", 1.0)?;
                    ConvexBody::ball(r, d).map_err(|e| spec_err(l, e.to_string()))?
                }
                "ellipsoid" => {
                    let (l, ax) = f
                        .list("axes")?
                        .ok_or_else(|| spec_err(bl, "body 'ellipsoid' requires 'axes'"))?;
                    ConvexBody::ellipsoid(ax).map_err(|e| spec_err(l, e.to_string()))?
                }
                other => return Err(spec_err(bl, format!("unknown body '{other}'"))),
            };
            let (ls, s) = f.number_or("scale", 1.0)?;
            let b = b.scaled(s).map_err(|e| spec_err(ls, e.to_string()))?;
            at(bl, make_uniform(b))?
        }
        other => {
            return Err(spec_err(
                line_of(&f, "family"),
                format!("unknown family '{other}'"),
            ))
        }
    };
    f.reject_unused(&family)?;
    Ok(match name {
        Some(n) => MeasureSpec { name: n, ..m },
        None => m,
    })
}

fn line_of(f: &Fields, key: &str) -> usize {
    f.entries.get(key).map_or(0, |e| e.line)
}

/// Reads and parses a spec file.
pub fn load_spec(path: &Path) -> Result<MeasureSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| spec_err(0, format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureKind;

    fn line(e: Error) -> usize {
        match e {
            Error::Spec { line, .. } => line,
            other => panic!("not a spec error: {other}"),
        }
    }

    #[test]
    fn families_parse() {
        let g = parse_spec("family = gaussian\nsigma = 0.5 # narrow\n").unwrap();
        assert!((g.density_1d(0.0) - 2.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let q = parse_spec("# c\n\nfamily=quartic\nlambda=0.25\ndim=2\n").unwrap();
        assert_eq!(q.dim(), 2);
        let n = parse_spec("family = model_nu\nA = 1.0\n").unwrap();
        assert!(n.is_infinite());
        let u = parse_spec("family = uniform\nbody = square\nhalfwidth = 1\nscale = 2\n").unwrap();
        assert!(matches!(u.kind, MeasureKind::UniformOnBody(ConvexBody::Cube { halfwidth, .. }) if halfwidth == 2.0));
        let a = parse_spec("family = anisotropic\nprecision = 1, 4\nradial_quartic = 0.125\n").unwrap();
        assert_eq!(a.dim(), 2);
        let e = parse_spec("family = ellipsoid_missing\n");
        assert_eq!(line(e.unwrap_err()), 1);
        let r = parse_spec("family = radial\nprofile = exp\nname = morgan\n").unwrap();
        assert_eq!(r.name, "morgan");
        assert!(parse_spec("family = halfline\n").unwrap().is_infinite());
        assert!(parse_spec("family = exponential\nrate = 2\n").unwrap().is_probability());
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(line(parse_spec("family = gaussian\nsigma = 0.5\nlambda = 1\n").unwrap_err()), 3);
        assert_eq!(line(parse_spec("family = gaussian\nsigma 0.5\n").unwrap_err()), 2);
        assert_eq!(line(parse_spec("family = gaussian\nsigma = 1\nsigma = 2\n").unwrap_err()), 3);
        assert_eq!(line(parse_spec("family = gaussian\nsigma = -1\n").unwrap_err()), 2);
        assert_eq!(line(parse_spec("family = gaussian\nsigma = abc\n").unwrap_err()), 2);
        assert_eq!(line(parse_spec("family = gaussian\nsigma = nan\n").unwrap_err()), 2);
        assert_eq!(line(parse_spec("family = quartic\n").unwrap_err()), 0);
        assert_eq!(line(parse_spec("sigma = 1\n").unwrap_err()), 0);
        assert_eq!(line(parse_spec("family = gaussian\ndim = 1.5\n").unwrap_err()), 2);
        assert_eq!(line(parse_spec("family = uniform\nbody = cone\n").unwrap_err()), 2);
        assert_eq!(line(parse_spec("family = gaussian\n9key = 1\n").unwrap_err()), 2);
    }
}
