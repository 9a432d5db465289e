//! JSON interchange formats.
//!
//! A model is `{"tau": [...], "R": [...]}` and data is
//! `{"sigma": [...], "alpha": [...]}`. Numbers are JSON numbers in float mode
//! and `"p/q"` strings in rational mode; either form is accepted on input.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::inverse::InverseReport;
use crate::model::{Data, Model, PhysicalProfile};
use crate::scalar::Scalar;

fn array<S: Scalar>(values: &[S]) -> Value {
    Value::Array(values.iter().map(Scalar::to_json).collect())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Vec<Value>> {
    obj.get(key)
        .ok_or_else(|| Error::Parse(format!("missing field {key:?}")))?
        .as_array()
        .ok_or_else(|| Error::Parse(format!("field {key:?} must be an array")))
}

fn scalars<S: Scalar>(obj: &Map<String, Value>, key: &str) -> Result<Vec<S>> {
    field(obj, key)?.iter().map(S::from_json).collect()
}

fn object(v: &Value) -> Result<&Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse("expected a JSON object".into()))
}

pub fn model_to_json<S: Scalar>(m: &Model<S>) -> Value {
    json!({ "tau": array(m.tau()), "R": array(m.refl()) })
}

pub fn model_from_json<S: Scalar>(v: &Value) -> Result<Model<S>> {
    let obj = object(v)?;
    Model::new(scalars(obj, "tau")?, scalars(obj, "R")?)
}

pub fn data_to_json<S: Scalar>(d: &Data<S>) -> Value {
    json!({ "sigma": array(d.sigma()), "alpha": array(d.alpha()) })
}

pub fn data_from_json<S: Scalar>(v: &Value) -> Result<Data<S>> {
    let obj = object(v)?;
    Data::new(scalars(obj, "sigma")?, scalars(obj, "alpha")?)
}

/// `{"depths": [...], "densities": [...], "moduli": [...]}`.
pub fn profile_from_json(v: &Value) -> Result<PhysicalProfile> {
    let obj = object(v)?;
    Ok(PhysicalProfile {
        depths: scalars(obj, "depths")?,
        densities: scalars(obj, "densities")?,
        moduli: scalars(obj, "moduli")?,
    })
}

pub fn report_to_json<S: Scalar>(r: &InverseReport<S>) -> Value {
    let rejected: Vec<Value> = r
        .rejected_arrivals
        .iter()
        .map(|(s, a)| json!({ "sigma": s.to_json(), "alpha": a.to_json() }))
        .collect();
    let matched: Vec<Value> = r
        .matched
        .iter()
        .map(|(j, k)| json!({ "index": j, "k": k.as_slice() }))
        .collect();
    json!({
        "model": model_to_json(&r.model),
        "rejected_arrivals": rejected,
        "matched": matched,
        "primary_indices": r.primary_indices,
    })
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialise");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, to_pretty(v))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn model_round_trip_float() {
        let m = Model::new(vec![1.0, 0.1 + 0.2], vec![0.5, -0.7]).unwrap();
        let back: Model<f64> = model_from_json(&model_to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn model_round_trip_rational() {
        let m = Model::new(
            vec![Rational::from_ratio(1, 3), Rational::from_ratio(1, 6)],
            vec![Rational::from_ratio(1, 2), Rational::from_ratio(-2, 7)],
        )
        .unwrap();
        let v = model_to_json(&m);
        assert_eq!(v["tau"][0], "1/3");
        let back: Model<Rational> = model_from_json(&v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn numbers_read_exactly_in_rational_mode() {
        let v: Value = serde_json::from_str(r#"{"tau":[1.0, 0.6], "R":["1/2", 0.7]}"#).unwrap();
        let m: Model<Rational> = model_from_json(&v).unwrap();
        assert_eq!(m.tau()[1], Rational::from_ratio(3, 5));
        assert_eq!(m.refl()[1], Rational::from_ratio(7, 10));
    }

    #[test]
    fn data_validation_applies() {
        let v: Value = serde_json::from_str(r#"{"sigma":[2, 1], "alpha":[1, 1]}"#).unwrap();
        assert!(data_from_json::<f64>(&v).is_err());
        let v: Value = serde_json::from_str(r#"{"sigma":[1, 2]}"#).unwrap();
        assert!(matches!(data_from_json::<f64>(&v), Err(Error::Parse(_))));
    }

    #[test]
    fn profile_parse() {
        let v: Value =
            serde_json::from_str(r#"{"depths":[-1,0,1], "densities":[1,1,4], "moduli":[1,1,1]}"#)
                .unwrap();
        let p = profile_from_json(&v).unwrap();
        assert_eq!(p.densities, vec![1.0, 1.0, 4.0]);
    }
}
