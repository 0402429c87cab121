//! Value parsers for the string forms accepted on the command line.

use fluidchain::{vec2, Base, Mat2, RateFunction, TargetDensity, Vec2};

pub fn floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

pub fn point(s: &str) -> Result<Vec2, String> {
    match floats(s)?.as_slice() {
        [a, b] => Ok(vec2(*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

/// Comma-separated numbers taken as a single argument value.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

pub fn list(s: &str) -> Result<List, String> {
    floats(s).map(List)
}

pub fn positive_list(s: &str) -> Result<List, String> {
    let v = floats(s)?;
    if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(List(v))
    } else {
        Err(format!("expected positive numbers, got `{s}`"))
    }
}

/// `key` or `key:name=value,...`, e.g. `gauss-mixture:a=3,alpha=0.25`.
pub fn density(s: &str) -> Result<TargetDensity, String> {
    let (key, params) = s.split_once(':').unwrap_or((s, ""));
    let mut d = TargetDensity::with_defaults(key).map_err(|e| e.to_string())?;
    for kv in params.split(',').filter(|p| !p.is_empty()) {
        let (name, value) = kv.split_once('=').ok_or_else(|| format!("expected name=value, got `{kv}`"))?;
        let value: f64 = value.parse().map_err(|_| format!("`{value}` is not a number"))?;
        let slot = match (&mut d, name) {
            (TargetDensity::GaussMixture { a, .. } | TargetDensity::WeibullMixture { a, .. }, "a") => a,
            (TargetDensity::GaussMixture { alpha, .. } | TargetDensity::WeibullMixture { alpha, .. }, "alpha") => alpha,
            (TargetDensity::WedgeWeibull { delta } | TargetDensity::WeibullMixture { delta, .. }, "delta") => delta,
            _ => return Err(format!("`{key}` has no parameter `{name}`")),
        };
        *slot = value;
    }
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

/// `gaussian` or `ball:<radius>`.
pub fn base(s: &str) -> Result<Base, String> {
    match s.split_once(':') {
        None if s == "gaussian" => Ok(Base::GaussianStd),
        Some(("ball", r)) => {
            let radius = r.parse().map_err(|_| format!("`{r}` is not a number"))?;
            Ok(Base::UniformBall { radius })
        }
        _ => Err(format!("expected `gaussian` or `ball:<radius>`, got `{s}`")),
    }
}

/// One value `s` means `Σ = s² I`; three values are `s11,s12,s22` of `Σ`.
pub fn shape(s: &str) -> Result<Mat2, String> {
    match floats(s)?.as_slice() {
        [s] => Ok(Mat2::identity() * (s * s)),
        [a, b, c] => Ok(Mat2::new(*a, *b, *b, *c)),
        _ => Err(format!("expected one scale or three entries s11,s12,s22, got `{s}`")),
    }
}

/// `poly:<alpha>` or `table:v/phi,v/phi,...`.
pub fn phi(s: &str) -> Result<RateFunction, String> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| format!("expected poly:<alpha> or table:v/phi,..., got `{s}`"))?;
    match kind {
        "poly" => {
            let alpha = rest.parse().map_err(|_| format!("`{rest}` is not a number"))?;
            RateFunction::polynomial(alpha).map_err(|e| e.to_string())
        }
        "table" => {
            let mut knots = Vec::new();
            let mut values = Vec::new();
            for pair in rest.split(',') {
                let (v, p) = pair.split_once('/').ok_or_else(|| format!("expected v/phi, got `{pair}`"))?;
                knots.push(v.parse().map_err(|_| format!("`{v}` is not a number"))?);
                values.push(p.parse().map_err(|_| format!("`{p}` is not a number"))?);
            }
            RateFunction::custom(knots, values).map_err(|e| e.to_string())
        }
        _ => Err(format!("unknown rate function kind `{kind}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities() {
        assert_eq!(density("wedge-super").unwrap(), TargetDensity::WedgeSuper);
        assert_eq!(
            density("weibull-mixture:delta=0.3,a=2").unwrap(),
            TargetDensity::WeibullMixture { a: 2.0, alpha: 0.5, delta: 0.3 }
        );
        assert!(density("wedge-super:a=2").is_err());
        assert!(density("gauss-mixture:alpha=2").is_err());
        assert!(density("banana").is_err());
    }

    #[test]
    fn shapes_and_bases() {
        assert_eq!(shape("2").unwrap(), Mat2::identity() * 4.0);
        assert_eq!(shape("1,0.5,2").unwrap(), Mat2::new(1.0, 0.5, 0.5, 2.0));
        assert!(shape("1,2").is_err());
        assert_eq!(base("ball:1.5").unwrap(), Base::UniformBall { radius: 1.5 });
        assert!(base("uniform").is_err());
    }

    #[test]
    fn rate_functions() {
        assert_eq!(phi("poly:0.5").unwrap().rate_sequence(2).unwrap(), vec![1.0, 1.5]);
        assert!(phi("table:1/1,2/1.5").is_ok());
        assert!(phi("table:1/1,2/0.5").is_err());
        assert!(phi("exp:1").is_err());
    }

    #[test]
    fn points() {
        assert_eq!(point("-1,2.5").unwrap(), vec2(-1.0, 2.5));
        assert!(point("1").is_err());
    }
}
