//! Loading set models from JSON files ({"kind": ..., "params": {...}}) or
//! from shorthand names: `r1`..`r9` for the full space, or a registered
//! named shape such as `quadrant`.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use conekit::geom::Vector;
use conekit::setmodel::shapes;
use conekit::setmodel::{
    affine_image, build_model, points_from_csv, ModelSpec, Predicate, ScalarField, SetModel,
};

use crate::expr::{parse_expression, parse_guard};

pub fn load_model(arg: &str) -> Result<SetModel> {
    if let Some(m) = shorthand(arg) {
        return Ok(m);
    }
    let path = Path::new(arg);
    if !path.exists() {
        bail!(
            "model '{arg}' is neither a known shorthand (r1..r9 or a named shape) nor an existing file"
        );
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let points = points_from_csv(&text)?;
        return Ok(build_model(ModelSpec::PointCloud { points })?);
    }
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {arg} as JSON"))?;
    model_from_json(&v)
}

fn shorthand(name: &str) -> Option<SetModel> {
    if let Some(rest) = name.strip_prefix('r') {
        if let Ok(n) = rest.parse::<usize>() {
            if (1..=9).contains(&n) {
                return Some(shapes::full_space(n));
            }
        }
    }
    named_shape(name)
}

fn named_shape(name: &str) -> Option<SetModel> {
    Some(match name {
        "quadrant" => shapes::quadrant(),
        "unit_circle" | "circle" => shapes::circle(1.0),
        "disc" => shapes::disc(1.0),
        "factorial_sequence" => shapes::factorial_sequence(),
        "kinked_b" => shapes::kinked_b(),
        "tsin_curve" => shapes::tsin_curve(),
        "sqrt_abs_graph" => shapes::sqrt_abs_graph(),
        "log_spiral" => shapes::log_spiral(),
        "horn" => shapes::horn(),
        "two_wedges" => shapes::two_wedges(),
        "x_axis" => shapes::x_axis(),
        _ => return None,
    })
}

fn vec_field(v: &Value, key: &str) -> Result<Vector> {
    let arr = v
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("missing numeric array field '{key}'"))?;
    let coords: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
    Ok(Vector::from_vec(coords.ok_or_else(|| anyhow!("non-numeric entry in '{key}'"))?))
}

pub fn model_from_json(v: &Value) -> Result<SetModel> {
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("model JSON needs a string 'kind' field"))?;
    let params = v.get("params").cloned().unwrap_or(Value::Null);
    match kind {
        "named" => {
            let name = params
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| anyhow!("named model needs params.name"))?;
            named_shape(name).ok_or_else(|| anyhow!("unknown named shape '{name}'"))
        }
        "full_space" => {
            let dim = params
                .get("dim")
                .and_then(Value::as_u64)
                .ok_or_else(|| anyhow!("full_space needs params.dim"))? as usize;
            Ok(shapes::full_space(dim))
        }
        "point_cloud" => {
            if let Some(path) = params.get("csv").and_then(Value::as_str) {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                return Ok(build_model(ModelSpec::PointCloud { points: points_from_csv(&text)? })?);
            }
            let pts = params
                .get("points")
                .and_then(Value::as_array)
                .ok_or_else(|| anyhow!("point_cloud needs params.points or params.csv"))?;
            let mut points = Vec::with_capacity(pts.len());
            for p in pts {
                let coords: Option<Vec<f64>> =
                    p.as_array().map(|a| a.iter().map(Value::as_f64).collect()).flatten();
                points.push(Vector::from_vec(
                    coords.ok_or_else(|| anyhow!("each point must be a numeric array"))?,
                ));
            }
            Ok(build_model(ModelSpec::PointCloud { points })?)
        }
        "box" => {
            let lo = vec_field(&params, "lo")?;
            let hi = vec_field(&params, "hi")?;
            Ok(shapes::box_nd(lo.iter().copied().collect(), hi.iter().copied().collect()))
        }
        "interval" => {
            let a = params.get("a").and_then(Value::as_f64).ok_or_else(|| anyhow!("interval needs a"))?;
            let b = params.get("b").and_then(Value::as_f64).ok_or_else(|| anyhow!("interval needs b"))?;
            Ok(shapes::interval(a, b))
        }
        "ball" | "sphere" => {
            let center = vec_field(&params, "center")?;
            let radius = params
                .get("radius")
                .and_then(Value::as_f64)
                .ok_or_else(|| anyhow!("{kind} needs params.radius"))?;
            Ok(if kind == "ball" {
                shapes::ball_at(center, radius)
            } else {
                shapes::sphere_at(center, radius)
            })
        }
        "graph" => {
            let dom = params
                .get("domain")
                .ok_or_else(|| anyhow!("graph needs params.domain (a model object)"))?;
            let domain = model_from_json(dom)?;
            let src = params
                .get("fn")
                .and_then(Value::as_str)
                .ok_or_else(|| anyhow!("graph needs params.fn (expression string)"))?;
            let e = parse_expression(src).map_err(|err| anyhow!("in graph fn: {err}"))?;
            if e.arity() > domain.ambient_dim() {
                bail!("graph fn uses x{} but the domain has dimension {}", e.arity(), domain.ambient_dim());
            }
            let f: ScalarField = Arc::new(move |x: &Vector| e.eval(x));
            Ok(build_model(ModelSpec::GraphSet { domain, f, descriptor: format!("graph of {src}") })?)
        }
        "sublevel" => {
            let dim = params
                .get("dim")
                .and_then(Value::as_u64)
                .ok_or_else(|| anyhow!("sublevel needs params.dim"))? as usize;
            let lo = vec_field(&params, "lo")?;
            let hi = vec_field(&params, "hi")?;
            let src = params
                .get("guard")
                .and_then(Value::as_str)
                .ok_or_else(|| anyhow!("sublevel needs params.guard (comparison expression)"))?;
            let g = parse_guard(src).map_err(|err| anyhow!("in sublevel guard: {err}"))?;
            let budget = params.get("budget").and_then(Value::as_u64).unwrap_or(4096) as usize;
            let predicate: Predicate = Arc::new(move |x: &Vector| g.eval(x));
            Ok(build_model(ModelSpec::Sublevel {
                dim,
                predicate,
                lo,
                hi,
                budget,
                descriptor: format!("points with {src}"),
            })?)
        }
        "curve" => {
            let dim = params
                .get("dim")
                .and_then(Value::as_u64)
                .ok_or_else(|| anyhow!("curve needs params.dim"))? as usize;
            let tr = params
                .get("t_range")
                .and_then(Value::as_array)
                .and_then(|a| Some((a.first()?.as_f64()?, a.get(1)?.as_f64()?)))
                .ok_or_else(|| anyhow!("curve needs params.t_range = [a, b]"))?;
            let maps = params
                .get("map")
                .and_then(Value::as_array)
                .ok_or_else(|| anyhow!("curve needs params.map (array of expressions in t)"))?;
            if maps.len() != dim {
                bail!("curve map has {} components for dimension {dim}", maps.len());
            }
            let mut comps = Vec::new();
            let mut descs = Vec::new();
            for m in maps {
                let src = m.as_str().ok_or_else(|| anyhow!("curve map entries must be strings"))?;
                descs.push(src.to_string());
                comps.push(parse_expression(src).map_err(|err| anyhow!("in curve map: {err}"))?);
            }
            let samples = params.get("samples").and_then(Value::as_u64).unwrap_or(2048) as usize;
            let map = Arc::new(move |t: f64| {
                let p = Vector::from_vec(vec![t]);
                Vector::from_vec(comps.iter().map(|c| c.eval(&p)).collect())
            });
            Ok(build_model(ModelSpec::ParametricCurve {
                dim,
                t_range: tr,
                map,
                samples,
                descriptor: format!("curve ({})", descs.join(", ")),
            })?)
        }
        "union" => {
            let parts = params
                .get("parts")
                .and_then(Value::as_array)
                .ok_or_else(|| anyhow!("union needs params.parts"))?;
            let models: Result<Vec<SetModel>> = parts.iter().map(model_from_json).collect();
            let models = models?;
            if models.is_empty() {
                bail!("union needs at least one part");
            }
            Ok(conekit::setmodel::SetModel::new(shapes::UnionShape::new(models)))
        }
        "affine" => {
            let inner = params
                .get("model")
                .ok_or_else(|| anyhow!("affine needs params.model"))?;
            let model = model_from_json(inner)?;
            let translation = vec_field(&params, "translation")?;
            let rows = params
                .get("rotation")
                .and_then(Value::as_array)
                .ok_or_else(|| anyhow!("affine needs params.rotation (row-major matrix)"))?;
            let n = rows.len();
            let mut entries = Vec::with_capacity(n * n);
            for r in rows {
                let row = r.as_array().ok_or_else(|| anyhow!("rotation rows must be arrays"))?;
                if row.len() != n {
                    bail!("rotation matrix must be square");
                }
                for e in row {
                    entries.push(e.as_f64().ok_or_else(|| anyhow!("non-numeric rotation entry"))?);
                }
            }
            let rot = nalgebra::DMatrix::from_row_slice(n, n, &entries);
            Ok(affine_image(&model, &translation, &rot)?)
        }
        other => bail!("unknown model kind '{other}'"),
    }
}

/// Parses "c1,c2,...,cN" into a point.
pub fn parse_point(s: &str) -> Result<Vector> {
    let coords: Result<Vec<f64>, _> = s.split(',').map(|c| c.trim().parse::<f64>()).collect();
    Ok(Vector::from_vec(coords.with_context(|| format!("parsing point '{s}'"))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands_resolve() {
        assert_eq!(load_model("r3").unwrap().ambient_dim(), 3);
        assert_eq!(load_model("quadrant").unwrap().ambient_dim(), 2);
        assert!(load_model("no_such_model").is_err());
    }

    #[test]
    fn json_models_build() {
        let v: Value = serde_json::from_str(
            r#"{"kind":"union","params":{"parts":[
                {"kind":"box","params":{"lo":[-1,-1],"hi":[1,1]}},
                {"kind":"graph","params":{"domain":{"kind":"interval","params":{"a":-1,"b":1}},"fn":"x^2"}}
            ]}}"#,
        )
        .unwrap();
        let m = model_from_json(&v).unwrap();
        assert_eq!(m.ambient_dim(), 2);
        let d = m.distance(&Vector::from_vec(vec![0.5, 0.25]), 0.1);
        assert!(d.value <= d.err_bound + 1e-9);
    }

    #[test]
    fn points_parse() {
        let p = parse_point("0.5, -1, 2e-3").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[2], 2e-3);
        assert!(parse_point("1,oops").is_err());
    }
}
