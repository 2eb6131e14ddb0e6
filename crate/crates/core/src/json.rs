//! JSON formats shared by the library and the CLI.
//!
//! Channels are `{"M": [[..],[..],[..]], "t": [x, y, z]}`, or
//! `{"lambda": [l1, l2, l3], "t": [..]}` for diagonal `M`. A missing `t`
//! means a unital channel. Floats are written in shortest round-trip form,
//! so parsing the output gives back the same bits.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical::CanonicalChannel;
use crate::channel::{AffineChannel, GeneratorSpec, C64};
use crate::decompose::{DecompositionPlan, PlanKind};
use crate::error::{Error, Result};
use crate::geometry::{ExtremalClass, PureOutputClass};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    #[serde(rename = "M")]
    m: Option<[[f64; 3]; 3]>,
    lambda: Option<[f64; 3]>,
    t: Option<[f64; 3]>,
}

pub fn channel_from_value(v: &Value) -> Result<AffineChannel> {
    let doc: ChannelDoc =
        serde_json::from_value(v.clone()).map_err(|e| Error::InvalidParameter(format!("channel JSON: {e}")))?;
    let m = match (doc.m, doc.lambda) {
        (Some(rows), None) => Matrix3::from_fn(|i, j| rows[i][j]),
        (None, Some(l)) => Matrix3::from_diagonal(&Vector3::from(l)),
        (Some(_), Some(_)) => return Err(Error::InvalidParameter("give either \"M\" or \"lambda\", not both".into())),
        (None, None) => return Err(Error::InvalidParameter("channel JSON needs \"M\" or \"lambda\"".into())),
    };
    AffineChannel::new(m, Vector3::from(doc.t.unwrap_or([0.0; 3])))
}

pub fn channel_from_str(s: &str) -> Result<AffineChannel> {
    let v: Value = serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("malformed JSON: {e}")))?;
    channel_from_value(&v)
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn channel_to_value(phi: &AffineChannel) -> Value {
    json!({ "M": rows(phi.m()), "t": arr(phi.t()) })
}

pub fn canonical_to_value(phi: &AffineChannel, c: &CanonicalChannel) -> Value {
    json!({
        "M": rows(phi.m()),
        "t": arr(phi.t()),
        "lambda": arr(&c.lambda),
        "t_canonical": arr(&c.t_canonical),
        "R1": rows(&c.post_rotation),
        "R2": rows(&c.pre_rotation),
    })
}

pub fn plan_to_value(plan: &DecompositionPlan) -> Value {
    json!({
        "kind": plan.kind,
        "target": plan.target.as_ref().map(channel_to_value),
        "epsilon": plan.epsilon,
        "factors": plan.factors,
        "recomposition_error": plan.recomposition_error,
    })
}

#[derive(Deserialize)]
struct PlanDoc {
    kind: PlanKind,
    target: Option<Value>,
    epsilon: f64,
    factors: Vec<GeneratorSpec>,
    #[serde(default)]
    recomposition_error: f64,
}

pub fn plan_from_value(v: &Value) -> Result<DecompositionPlan> {
    let doc: PlanDoc =
        serde_json::from_value(v.clone()).map_err(|e| Error::InvalidParameter(format!("plan JSON: {e}")))?;
    Ok(DecompositionPlan {
        kind: doc.kind,
        target: doc.target.as_ref().map(channel_from_value).transpose()?,
        epsilon: doc.epsilon,
        factors: doc.factors,
        recomposition_error: doc.recomposition_error,
    })
}

/// Each operator as a 2×2 array of `[re, im]` pairs.
pub fn kraus_to_value(ops: &[Matrix2<C64>]) -> Value {
    let one = |a: &Matrix2<C64>| [0, 1].map(|i| [0, 1].map(|j| [a[(i, j)].re, a[(i, j)].im]));
    Value::from(ops.iter().map(|a| json!(one(a))).collect::<Vec<_>>())
}

pub fn pure_output_to_value(po: &PureOutputClass) -> Value {
    let pts: Vec<[f64; 3]> = po.points().iter().map(|p| p.to_array()).collect();
    json!({ "class": po.count_label(), "points": pts })
}

/// Summary returned by `classify`.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalSummary {
    pub u: f64,
    pub v: f64,
    #[serde(flatten)]
    pub class: ExtremalClass,
}

pub fn classification_to_value(
    kraus_rank: usize,
    indivisible: bool,
    po: &PureOutputClass,
    extremal: Option<&ExtremalSummary>,
) -> Value {
    json!({
        "kraus_rank": kraus_rank,
        "indivisible": indivisible,
        "pure_output": pure_output_to_value(po),
        "extremal": extremal,
    })
}
