//! Verification reports: named checks with a computed value, the bound it is
//! compared against, and a pass/fail status. Serialized as JSON
//! (`contraction-lab.report.v1`) or CSV.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write;

pub const SCHEMA: &str = "contraction-lab.report.v1";

/// Labels of the statements a check can certify; the README's
/// traceability table maps each label to its statement and checks.
pub mod theorem {
    pub const CONTRACTION: &str = "contr1";
    pub const ANISOTROPIC_CONTRACTION: &str = "contr2";
    pub const DECAY_LEMMA: &str = "decay-lemma";
    pub const HOLDER: &str = "hoelder";
    pub const SODIN: &str = "Sodin-lem";
    pub const MS_CONCENTRATION: &str = "MS-conc";
    pub const CONCENTRATION_TRANSFER: &str = "MS-conc-transfer";
    pub const SET_IMAGE: &str = "set-image";
    pub const HEAT_FLOW: &str = "heatflow-contraction";
    pub const FLOW_TRANSPORT: &str = "Lagr";
    pub const LP_ESTIMATE: &str = "lp-est";
    pub const LP_OPERATOR: &str = "lp-opnorm";
    pub const RADIAL: &str = "radial-criterion";
    pub const MODEL_PROFILE: &str = "nuA-profile";
    pub const MODEL_IMAGE: &str = "nuA-image";
    pub const EXPONENTIAL: &str = "exp-tilt";
    pub const BAKRY_LEDOUX: &str = "bakry-ledoux";
    pub const CORRELATION: &str = "ellipsoid";
    pub const HARGE: &str = "harge";
    pub const B_THEOREM: &str = "B-theorem";
    pub const STRONG_POINCARE: &str = "strongPoin";
    pub const AUDIT: &str = "audit";
}

/// How `computed` is compared to `bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// computed <= bound * (1 + tolerance); for a zero bound the tolerance
    /// is absolute.
    AtMost,
    /// computed >= bound * (1 - tolerance), same convention.
    AtLeast,
    /// |computed - bound| <= tolerance (absolute).
    Near,
}

/// Whether `tolerance` scales with the bound or is an absolute margin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    #[default]
    Relative,
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The check's hypotheses do not hold for these inputs.
    PreconditionFailed,
    /// The statement does not apply (e.g. lemma outside its setting).
    NotApplicable,
    /// The computation could not decide (e.g. decay not observed in range).
    Inconclusive,
    /// Diagnostic only; carries no theorem claim.
    Diagnostic,
}

impl Status {
    pub fn is_failure(self) -> bool {
        matches!(self, Status::Fail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    /// Label of the statement this entry certifies (see README traceability table).
    pub theorem: String,
    #[serde(with = "nullable")]
    pub computed: f64,
    #[serde(with = "nullable")]
    pub bound: f64,
    pub comparison: Comparison,
    #[serde(with = "nullable")]
    pub tolerance: f64,
    #[serde(default)]
    pub tolerance_kind: ToleranceKind,
    pub status: Status,
    pub inputs_digest: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default, with = "nullable_map")]
    pub details: BTreeMap<String, f64>,
}

// JSON has no NaN or infinities: non-finite values are written as null
// and read back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nullable_map {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(m.iter().map(|(k, v)| (k, v.is_finite().then_some(*v))))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let m = BTreeMap::<String, Option<f64>>::deserialize(d)?;
        Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
    }
}

impl CheckEntry {
    /// Builds an entry and decides its status from the comparison.
    pub fn compare(
        name: impl Into<String>,
        theorem: impl Into<String>,
        computed: f64,
        bound: f64,
        comparison: Comparison,
        tolerance: f64,
    ) -> Self {
        let status = if passes(computed, bound, comparison, tolerance) {
            Status::Pass
        } else {
            Status::Fail
        };
        CheckEntry {
            name: name.into(),
            theorem: theorem.into(),
            computed,
            bound,
            comparison,
            tolerance,
            tolerance_kind: ToleranceKind::Relative,
            status,
            inputs_digest: String::new(),
            seed: None,
            note: None,
            details: BTreeMap::new(),
        }
    }

    /// Same as [`CheckEntry::compare`] with an absolute margin for
    /// `AtMost`/`AtLeast`.
    pub fn compare_abs(
        name: impl Into<String>,
        theorem: impl Into<String>,
        computed: f64,
        bound: f64,
        comparison: Comparison,
        tolerance: f64,
    ) -> Self {
        let ok = passes_abs(computed, bound, comparison, tolerance);
        let mut e = CheckEntry::compare(name, theorem, computed, bound, comparison, tolerance);
        e.tolerance_kind = ToleranceKind::Absolute;
        e.status = if ok { Status::Pass } else { Status::Fail };
        e
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    pub fn with_inputs(mut self, inputs: &str) -> Self {
        self.inputs_digest = digest(inputs);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_detail(mut self, key: impl Into<String>, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

pub fn passes(computed: f64, bound: f64, comparison: Comparison, tolerance: f64) -> bool {
    if !computed.is_finite() || bound.is_nan() {
        return false;
    }
    let slack = if bound == 0.0 {
        tolerance
    } else {
        tolerance * bound.abs()
    };
    match comparison {
        Comparison::AtMost => computed <= bound + slack,
        Comparison::AtLeast => computed >= bound - slack,
        Comparison::Near => (computed - bound).abs() <= tolerance,
    }
}

pub fn passes_abs(computed: f64, bound: f64, comparison: Comparison, tolerance: f64) -> bool {
    if !computed.is_finite() || bound.is_nan() {
        return false;
    }
    match comparison {
        Comparison::AtMost => computed <= bound + tolerance,
        Comparison::AtLeast => computed >= bound - tolerance,
        Comparison::Near => (computed - bound).abs() <= tolerance,
    }
}

/// Short SHA-256 digest of a canonical input description.
pub fn digest(inputs: &str) -> String {
    let hash = Sha256::digest(inputs.as_bytes());
    let mut out = String::with_capacity(16);
    for byte in hash.iter().take(8) {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub metadata: BTreeMap<String, String>,
    pub entries: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn new() -> Self {
        VerificationReport {
            schema: SCHEMA.to_string(),
            metadata: BTreeMap::new(),
            entries: Vec::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        for (k, v) in other.metadata {
            self.metadata.entry(k).or_insert(v);
        }
        self.entries.extend(other.entries);
    }

    /// True iff no entry failed. Skipped, inconclusive and diagnostic
    /// entries do not count as failures.
    pub fn all_passed(&self) -> bool {
        !self.entries.iter().any(|e| e.status.is_failure())
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema={}", self.schema);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("name,theorem,computed,bound,comparison,tolerance,status,inputs_digest,seed\n");
        for e in &self.entries {
            let cmp = match e.comparison {
                Comparison::AtMost => "at_most",
                Comparison::AtLeast => "at_least",
                Comparison::Near => "near",
            };
            let status = serde_json::to_value(e.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{},{:e},{},{},{}",
                csv_field(&e.name),
                csv_field(&e.theorem),
                e.computed,
                e.bound,
                cmp,
                e.tolerance,
                status,
                e.inputs_digest,
                e.seed.map(|s| s.to_string()).unwrap_or_default()
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_semantics() {
        assert!(passes(1.0, 1.0, Comparison::AtMost, 0.0));
        assert!(passes(1.0 + 5e-7, 1.0, Comparison::AtMost, 1e-6));
        assert!(!passes(1.01, 1.0, Comparison::AtMost, 1e-6));
        assert!(passes(-1e-9, 0.0, Comparison::AtMost, 0.0));
        assert!(passes(0.5, 0.5 + 1e-11, Comparison::Near, 1e-10));
        assert!(!passes(0.4, 0.5, Comparison::AtLeast, 0.1));
        assert!(!passes(f64::NAN, 1.0, Comparison::AtMost, 1.0));
    }

    #[test]
    fn json_round_trip() {
        let mut r = VerificationReport::new().with_metadata("provenance", "monotone1d");
        r.push(
            CheckEntry::compare("lipschitz", "contraction", 0.5, 1.0, Comparison::AtMost, 1e-6)
                .with_inputs("gaussian->gaussian(0.5)")
                .with_seed(7)
                .with_detail("n_pairs", 100.0),
        );
        let text = r.to_json();
        assert!(text.contains(SCHEMA));
        let back = VerificationReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert!(r.to_csv().lines().nth(2).unwrap().starts_with("name,"));
        let mut r = VerificationReport::new();
        r.push(
            CheckEntry::compare("skip", "audit", f64::NAN, f64::INFINITY, Comparison::AtMost, 0.0)
                .with_detail("x", f64::NAN),
        );
        let back = VerificationReport::from_json(&r.to_json()).unwrap();
        assert!(back.entries[0].computed.is_nan() && back.entries[0].bound.is_nan());
        assert!(back.entries[0].details["x"].is_nan());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest("abc"), "ba7816bf8f01cfea");
    }
}
