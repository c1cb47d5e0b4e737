//! JSON formats for groups and divisors.
//!
//! Scalars are written either as JSON integers or as strings in the
//! shorthand accepted by [`parse_scalar`], e.g. `"6560*3^-8"` or `"-25/24"`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localfield::{parse_scalar, parse_valuation, Field, FieldDescriptor, LocalFieldElement as El};
use crate::projline::{valuation_to_ord, Ball, Divisor0, Moebius, ProjPoint};
use crate::schottky::SchottkyGroup;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Str(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Int(n) => n.to_string(),
            Scalar::Str(s) => s.clone(),
        }
    }

    pub fn to_element(&self, field: &Field, prec: i64) -> Result<El> {
        parse_scalar(&self.text())?.to_element(field, prec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ramification {
    pub e: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Scalar>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallSpec {
    pub index: i32,
    pub center: Scalar,
    /// `v_p` of the radius, so the radius is `p^-radius_val`.
    pub radius_val: Scalar,
    #[serde(default)]
    pub complement: bool,
    #[serde(default)]
    pub closed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub p: u64,
    pub ramification: Ramification,
    pub generators: Vec<[[Scalar; 2]; 2]>,
    pub balls: Vec<BallSpec>,
}

impl GroupSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("group file: {e}")))
    }

    pub fn field(&self) -> Result<Field> {
        match self.ramification.e {
            1 => FieldDescriptor::qp(self.p),
            #[cfg(feature = "eisenstein")]
            2 => {
                let c = self
                    .ramification
                    .c
                    .as_ref()
                    .ok_or_else(|| Error::Parse("e = 2 needs the Eisenstein constant c".into()))?;
                let c = parse_scalar(&c.text())?
                    .as_rational()
                    .ok_or_else(|| Error::Parse("Eisenstein constant must be rational".into()))?;
                FieldDescriptor::eisenstein(self.p, c)
            }
            e => Err(Error::InvalidField(format!("unsupported ramification index {e}"))),
        }
    }

    /// The group with all data at absolute precision `prec`.
    pub fn build(&self, prec: i64) -> Result<SchottkyGroup> {
        let field = self.field()?;
        self.build_in(&field, prec)
    }

    pub fn build_in(&self, field: &Field, prec: i64) -> Result<SchottkyGroup> {
        let mut gens = Vec::new();
        for m in &self.generators {
            let el = |s: &Scalar| s.to_element(field, prec);
            gens.push(Moebius::new(el(&m[0][0])?, el(&m[0][1])?, el(&m[1][0])?, el(&m[1][1])?)?);
        }
        let mut balls = Vec::new();
        for b in &self.balls {
            let center = b.center.to_element(field, prec)?;
            let v = parse_valuation(&b.radius_val.text())?;
            let radius = valuation_to_ord(v, field.ramification()).ok_or_else(|| {
                Error::Parse(format!("radius valuation {v} is not in the value group"))
            })?;
            balls.push((b.index, Ball { center, radius, complement: b.complement, closed: b.closed }));
        }
        SchottkyGroup::new(gens, balls, prec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivisorTerm {
    /// A scalar, or `"inf"` for the point at infinity.
    pub point: Scalar,
    pub mult: i64,
}

pub fn parse_divisor_json(s: &str) -> Result<Vec<DivisorTerm>> {
    serde_json::from_str(s).map_err(|e| Error::Parse(format!("divisor: {e}")))
}

pub fn divisor_from_terms(terms: &[DivisorTerm], field: &Field, prec: i64) -> Result<Divisor0> {
    let mut out = Vec::new();
    for t in terms {
        let p = match &t.point {
            Scalar::Str(s) if matches!(s.trim(), "inf" | "oo" | "infinity") => ProjPoint::Infinity,
            other => ProjPoint::Finite(other.to_element(field, prec)?),
        };
        out.push((p, t.mult));
    }
    Divisor0::new(out)
}

/// Divisor as JSON terms, finite points written as digit expansions.
pub fn divisor_to_terms(d: &Divisor0) -> Vec<DivisorTerm> {
    d.terms()
        .iter()
        .map(|(p, m)| DivisorTerm {
            point: match p {
                ProjPoint::Infinity => Scalar::Str("inf".into()),
                ProjPoint::Finite(x) => Scalar::Str(x.to_terms_string()),
            },
            mult: *m,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MR: &str = r#"{
        "p": 3,
        "ramification": {"e": 1},
        "generators": [[[-5, 32], [-8, 35]], [[-13, 80], [-8, 43]]],
        "balls": [
            {"index": 1, "center": 4, "radius_val": 2},
            {"index": -1, "center": 1, "radius_val": 2},
            {"index": 2, "center": 5, "radius_val": "2"},
            {"index": -2, "center": "2", "radius_val": 2}
        ]
    }"#;

    #[test]
    fn group_roundtrip() {
        let spec = GroupSpec::from_json(MR).unwrap();
        let g = spec.build(30).unwrap();
        assert_eq!(g.genus(), 2);
        assert!(g.verify_good_position().passed());
        let again = GroupSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert!(again.build(30).unwrap().verify_good_position().passed());
    }

    #[test]
    fn malformed_inputs() {
        assert!(GroupSpec::from_json("{").is_err());
        let bad = MR.replace("\"radius_val\": 2}", "\"radius_val\": \"x\"}");
        assert!(GroupSpec::from_json(&bad).unwrap().build(30).is_err());
        let bad = MR.replace("\"p\": 3", "\"p\": 4");
        assert!(GroupSpec::from_json(&bad).unwrap().build(30).is_err());
    }

    #[test]
    fn divisors() {
        let f = FieldDescriptor::qp(3).unwrap();
        let terms = parse_divisor_json(r#"[{"point": 0, "mult": 1}, {"point": "inf", "mult": -1}]"#).unwrap();
        let d = divisor_from_terms(&terms, &f, 20).unwrap();
        assert!(d.contains_infinity());
        let back = divisor_from_terms(&divisor_to_terms(&d), &f, 20).unwrap();
        assert_eq!(back.terms().len(), 2);
        let terms = parse_divisor_json(r#"[{"point": 0, "mult": 1}]"#).unwrap();
        assert!(divisor_from_terms(&terms, &f, 20).is_err());
    }
}
