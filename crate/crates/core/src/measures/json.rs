//! Canonical JSON vocabulary for measure expressions.
//!
//! ```json
//! {"type":"digit","base":2,"probs":["1/3","2/3"]}
//! {"type":"convolve","left":{"type":"lebesgue"},"right":{"type":"atomic","atoms":[{"at":"1/3","weight":"1/1"}]}}
//! ```
//!
//! Rationals are `"num/den"` strings.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{Atom, MeasureError, MeasureExpr, ProbVector};
use crate::exact::UnitRational;
use crate::ratio::{format_ratio, parse_ratio};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MeasureJson {
    Lebesgue,
    Digit { base: u32, probs: Vec<String> },
    Atomic { atoms: Vec<AtomJson> },
    Affine { child: Box<MeasureJson>, scale: String, offset: String },
    Convolve { left: Box<MeasureJson>, right: Box<MeasureJson> },
    Product { first: Box<MeasureJson>, second: Box<MeasureJson> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub at: String,
    pub weight: String,
}

fn rational(field: &'static str, text: &str) -> Result<BigRational, MeasureError> {
    parse_ratio(text).ok_or_else(|| MeasureError::Parse {
        field,
        message: format!("invalid rational {text:?}, expected \"num/den\""),
    })
}

impl TryFrom<MeasureJson> for MeasureExpr {
    type Error = MeasureError;

    fn try_from(value: MeasureJson) -> Result<Self, Self::Error> {
        match value {
            MeasureJson::Lebesgue => Ok(MeasureExpr::Lebesgue),
            MeasureJson::Digit { base, probs } => {
                let entries = probs
                    .iter()
                    .map(|p| {
                        parse_ratio(p).ok_or_else(|| MeasureError::InvalidProbs(format!("invalid rational {p:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                MeasureExpr::digit(base, ProbVector::new(entries)?)
            }
            MeasureJson::Atomic { atoms } => {
                let parsed = atoms
                    .iter()
                    .map(|a| {
                        let at: UnitRational = serde_json::from_value(serde_json::Value::String(a.at.clone()))
                            .map_err(|e| MeasureError::Parse { field: "at", message: e.to_string() })?;
                        Ok((at, rational("weight", &a.weight)?))
                    })
                    .collect::<Result<Vec<_>, MeasureError>>()?;
                MeasureExpr::atomic(parsed)
            }
            MeasureJson::Affine { child, scale, offset } => MeasureExpr::affine(
                MeasureExpr::try_from(*child)?,
                rational("scale", &scale)?,
                rational("offset", &offset)?,
            ),
            MeasureJson::Convolve { left, right } => {
                MeasureExpr::convolve(MeasureExpr::try_from(*left)?, MeasureExpr::try_from(*right)?)
            }
            MeasureJson::Product { first, second } => {
                MeasureExpr::product(MeasureExpr::try_from(*first)?, MeasureExpr::try_from(*second)?)
            }
        }
    }
}

impl From<MeasureExpr> for MeasureJson {
    fn from(value: MeasureExpr) -> Self {
        match value {
            MeasureExpr::Lebesgue => MeasureJson::Lebesgue,
            MeasureExpr::Digit { base, probs } => {
                MeasureJson::Digit { base, probs: probs.entries().iter().map(format_ratio).collect() }
            }
            MeasureExpr::Atomic(atoms) => MeasureJson::Atomic {
                atoms: atoms
                    .into_iter()
                    .map(|Atom { location, weight }| AtomJson {
                        at: location.to_string(),
                        weight: format_ratio(&weight),
                    })
                    .collect(),
            },
            MeasureExpr::AffinePush { child, scale, offset } => MeasureJson::Affine {
                child: Box::new((*child).into()),
                scale: format_ratio(&scale),
                offset: format_ratio(&offset),
            },
            MeasureExpr::Convolve(l, r) => {
                MeasureJson::Convolve { left: Box::new((*l).into()), right: Box::new((*r).into()) }
            }
            MeasureExpr::Product(a, b) => {
                MeasureJson::Product { first: Box::new((*a).into()), second: Box::new((*b).into()) }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_alpha, make_beta};

    #[test]
    fn canonical_digit_form() {
        let text = serde_json::to_string(&make_beta(2).unwrap()).unwrap();
        assert_eq!(text, r#"{"type":"digit","base":2,"probs":["1/3","2/3"]}"#);
    }

    #[test]
    fn nested_round_trip() {
        let expr = MeasureExpr::product(
            MeasureExpr::convolve(make_beta(3).unwrap(), make_alpha(2, 2).unwrap()).unwrap(),
            MeasureExpr::affine(
                MeasureExpr::Lebesgue,
                BigRational::new(1.into(), 2.into()),
                BigRational::new(1.into(), 4.into()),
            )
            .unwrap(),
        )
        .unwrap();
        let text = serde_json::to_string(&expr).unwrap();
        let back: MeasureExpr = serde_json::from_str(&text).unwrap();
        assert_eq!(back, expr);
        assert!(text.contains(r#"{"at":"1/15","weight":"1/2"}"#));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let err =
            serde_json::from_str::<MeasureExpr>(r#"{"type":"digit","base":2,"probs":["1/3","1/3"]}"#).unwrap_err();
        assert!(err.to_string().contains("probs"), "{err}");
        let err = serde_json::from_str::<MeasureExpr>(
            r#"{"type":"affine","child":{"type":"lebesgue"},"scale":"a","offset":"0"}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("scale"), "{err}");
        assert!(serde_json::from_str::<MeasureExpr>(r#"{"type":"cantor"}"#).is_err());
    }
}
