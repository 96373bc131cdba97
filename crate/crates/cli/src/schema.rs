//! JSON Schema descriptions of the wire formats whose Rust types serialize
//! through custom conversions.

use schemars::JsonSchema;

/// A rational written as `"num/den"` (or an integer `"num"`).
#[derive(JsonSchema)]
#[schemars(transparent)]
#[allow(dead_code)]
pub struct RationalSchema(#[schemars(regex(pattern = r"^-?[0-9]+(/[0-9]+)?$"))] String);

#[derive(JsonSchema)]
#[serde(tag = "type", rename_all = "lowercase")]
#[allow(dead_code)]
pub enum MeasureSchema {
    Lebesgue,
    Digit { base: u32, probs: Vec<RationalSchema> },
    Atomic { atoms: Vec<AtomSchema> },
    Affine { child: Box<MeasureSchema>, scale: RationalSchema, offset: RationalSchema },
    Convolve { left: Box<MeasureSchema>, right: Box<MeasureSchema> },
    Product { first: Box<MeasureSchema>, second: Box<MeasureSchema> },
}

#[derive(JsonSchema)]
#[allow(dead_code)]
pub struct AtomSchema {
    at: RationalSchema,
    weight: RationalSchema,
}

/// `x -> scale*x + offset`, mapping `[0,1]` into itself.
#[derive(JsonSchema)]
#[allow(dead_code)]
pub struct AffineSchema {
    scale: RationalSchema,
    offset: RationalSchema,
}

#[derive(JsonSchema)]
#[serde(rename_all = "lowercase")]
#[allow(dead_code)]
pub enum CaseSchema {
    Part1,
    Part2,
}

#[derive(JsonSchema)]
#[allow(dead_code)]
pub struct IntervalSchema {
    lo: RationalSchema,
    hi: RationalSchema,
}

/// Pretty-printed schema of [`crate::config::ExperimentConfig`].
pub fn config_schema() -> String {
    let schema = schemars::schema_for!(crate::config::ExperimentConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes")
}
