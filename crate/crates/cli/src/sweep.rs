//! Parameter sweeps over the cartesian product of axes.

use anyhow::Context;
use rayon::prelude::*;

use crate::args::PointArgs;
use crate::cache::Cache;
use crate::commands::{build_point, execute, set_field, Outcome, PointSpec, UsageError, POINT_COMMANDS};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<String>,
}

/// Parses `NAME=v1,v2,...` or `NAME=start:stop:step` (stop inclusive).
pub fn parse_axis(text: &str) -> Result<Axis, UsageError> {
    let (name, spec) = text
        .split_once('=')
        .ok_or_else(|| UsageError(format!("axis {text:?} is not NAME=VALUES")))?;
    let name = name.trim().to_string();
    let spec = spec.trim();
    if name.is_empty() || spec.is_empty() {
        return Err(UsageError(format!("axis {text:?} is not NAME=VALUES")));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let values = if parts.len() == 3 && !spec.contains(',') && !spec.starts_with("mixed") {
        range_values(&name, parts[0], parts[1], parts[2])?
    } else {
        spec.split(',').map(|v| v.trim().to_string()).collect()
    };
    if values.iter().any(String::is_empty) {
        return Err(UsageError(format!("axis {name} has an empty value")));
    }
    Ok(Axis { name, values })
}

fn range_values(name: &str, start: &str, stop: &str, step: &str) -> Result<Vec<String>, UsageError> {
    let bad = || UsageError(format!("axis {name}: cannot parse range {start}:{stop}:{step}"));
    if let (Ok(a), Ok(b), Ok(s)) = (start.parse::<i64>(), stop.parse::<i64>(), step.parse::<i64>()) {
        if s <= 0 || b < a {
            return Err(UsageError(format!("axis {name}: empty or non-increasing range")));
        }
        return Ok((0..)
            .map(|i| a + i * s)
            .take_while(|&v| v <= b)
            .map(|v| v.to_string())
            .collect());
    }
    let a: f64 = start.parse().map_err(|_| bad())?;
    let b: f64 = stop.parse().map_err(|_| bad())?;
    let s: f64 = step.parse().map_err(|_| bad())?;
    if !(s > 0.0) || b < a {
        return Err(UsageError(format!("axis {name}: empty or non-increasing range")));
    }
    // count first, then generate, so rounding cannot drop the endpoint
    let n = ((b - a) / s + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| format!("{}", a + i as f64 * s)).collect())
}

/// Number of points in the product, saturating.
pub fn product_size(axes: &[Axis]) -> usize {
    axes.iter().fold(1usize, |acc, a| acc.saturating_mul(a.values.len()))
}

/// Resolves every point of the product, last axis varying fastest.
pub fn expand(command: &str, base: &PointArgs, axes: &[Axis], cap: usize) -> anyhow::Result<Vec<PointSpec>> {
    if !POINT_COMMANDS.contains(&command) {
        return Err(UsageError(format!("--cmd must be one of {POINT_COMMANDS:?}, got {command:?}")).into());
    }
    let size = product_size(axes);
    if size > cap {
        return Err(UsageError(format!("sweep has {size} points, above --max-points {cap}")).into());
    }
    let mut points = Vec::with_capacity(size);
    for index in 0..size {
        let mut args = base.clone();
        let mut rem = index;
        for axis in axes.iter().rev() {
            let n = axis.values.len();
            set_field(&mut args, &axis.name, &axis.values[rem % n])?;
            rem /= n;
        }
        points.push(build_point(command, &args).with_context(|| format!("sweep point {index}"))?);
    }
    Ok(points)
}

/// The four series behind the scaling-class table.
pub fn preset(name: &str) -> anyhow::Result<Vec<PointSpec>> {
    if name != "table-i" {
        return Err(UsageError(format!("unknown preset {name:?} (available: table-i)")).into());
    }
    let mut points = Vec::new();
    let series: [(&str, &[(&str, &str)], Vec<usize>); 4] = [
        (
            "ed",
            &[("lambda", "1"), ("alpha", "0.5"), ("coupling", "all-to-all")],
            (8..=20).step_by(2).collect(),
        ),
        (
            "rotor",
            &[("lambda", "0.2"), ("alpha", "0.5"), ("g", "0.05"), ("coupling", "power-law")],
            vec![64, 128, 256, 512, 1024],
        ),
        (
            "toy",
            &[("lambda", "1"), ("alpha", "0.5"), ("choice", "sigma-x"), ("route", "time-domain")],
            vec![32, 64, 128, 256, 512],
        ),
        (
            "toy",
            &[("lambda", "1"), ("alpha", "0.5"), ("choice", "sigma-xx"), ("route", "time-domain")],
            vec![32, 64, 128, 256, 512],
        ),
    ];
    for (command, fixed, sizes) in series {
        let mut base = PointArgs::default();
        for (k, v) in fixed {
            set_field(&mut base, k, v)?;
        }
        for l in sizes {
            let mut args = base.clone();
            args.l = Some(l);
            let mut spec = build_point(command, &args)?;
            // sign alternation is expected here; |delta| is what gets fitted
            spec.warnings.clear();
            points.push(spec);
        }
    }
    Ok(points)
}

/// Runs all points on a pool of `jobs` threads; results keep point order.
pub fn run_points(points: &[PointSpec], cache: Option<&Cache>, jobs: Option<usize>) -> Vec<anyhow::Result<Outcome>> {
    let work = || points.par_iter().map(|p| execute(p, cache)).collect::<Vec<_>>();
    match jobs {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        _ => work(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_forms() {
        assert_eq!(parse_axis("L=8,12,16").unwrap().values, ["8", "12", "16"]);
        assert_eq!(parse_axis("L=8:16:4").unwrap().values, ["8", "12", "16"]);
        assert_eq!(parse_axis("L=8:18:4").unwrap().values, ["8", "12", "16"]);
        assert_eq!(parse_axis("lambda=0.1:0.3:0.1").unwrap().values.len(), 3);
        assert_eq!(parse_axis("choice=mixed:1/3,sigma-x").unwrap().values, ["mixed:1/3", "sigma-x"]);
        assert!(parse_axis("L").is_err());
        assert!(parse_axis("L=16:8:4").is_err());
        assert!(parse_axis("L=8,,12").is_err());
    }

    #[test]
    fn product_order_and_cap() {
        let base = PointArgs {
            lambda: Some(0.3),
            ..PointArgs::default()
        };
        let axes = vec![parse_axis("L=4,8").unwrap(), parse_axis("alpha=0.3,0.7").unwrap()];
        assert_eq!(product_size(&axes), 4);
        let pts = expand("ed", &base, &axes, 100).unwrap();
        let got: Vec<(u64, f64)> = pts
            .iter()
            .map(|p| (p.inputs["L"].as_u64().unwrap(), p.inputs["alpha"].as_f64().unwrap()))
            .collect();
        assert_eq!(got, [(4, 0.3), (4, 0.7), (8, 0.3), (8, 0.7)]);
        assert!(expand("ed", &base, &axes, 3).is_err());
        assert!(expand("fit", &base, &axes, 100).is_err());
    }

    #[test]
    fn preset_covers_four_series() {
        let pts = preset("table-i").unwrap();
        assert_eq!(pts.len(), 7 + 5 + 5 + 5);
        assert!(preset("table-ii").is_err());
    }
}
