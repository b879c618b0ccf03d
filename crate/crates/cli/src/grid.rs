//! `start:stop:step` and comma-list grids.

/// A whole list parsed from one flag value.
pub type Grid<T> = Vec<T>;

/// Parses `start:stop:step` (endpoints included within `step/2`), a comma
/// list, or a single value.
pub fn parse_float_grid(s: &str) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(format!("grid {s:?} is not start:stop:step"));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if !(step > 0.0) {
            return Err(format!("grid step must be positive, got {step}"));
        }
        if stop < start {
            return Err(format!("grid stop {stop} is below start {start}"));
        }
        let steps = ((stop - start) / step).round() as usize;
        (0..=steps)
            // 0.03 rather than 0.030000000000000002
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        s.split(',').map(number).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(format!("grid {s:?} is empty"));
    }
    Ok(values)
}

pub fn parse_order_grid(s: &str) -> Result<Vec<usize>, String> {
    let values = parse_float_grid(s)?;
    values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("filter order {v} is not a positive integer"))
            }
        })
        .collect()
}

pub fn parse_coefficients(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(number).collect()
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid() {
        let g = parse_float_grid("0:0.1:0.01").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.03);
        assert_eq!(g[10], 0.1);
        assert_eq!(
            parse_float_grid("0:0.1:0.03").unwrap(),
            vec![0.0, 0.03, 0.06, 0.09]
        );
        assert_eq!(parse_float_grid("1:2:0.6").unwrap(), vec![1.0, 1.6, 2.2]);
        assert_eq!(parse_float_grid("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_float_grid("0,0.2").unwrap(), vec![0.0, 0.2]);
    }

    #[test]
    fn bad_grids() {
        for s in [
            "0:1", "0:1:0", "1:0:0.1", "a:1:0.1", "0:1:-1", "", "0,,1", "nan",
        ] {
            assert!(parse_float_grid(s).is_err(), "{s}");
        }
    }

    #[test]
    fn order_grid() {
        assert_eq!(
            parse_order_grid("3:10:1").unwrap(),
            (3..=10).collect::<Vec<_>>()
        );
        assert_eq!(parse_order_grid("3,7").unwrap(), vec![3, 7]);
        assert!(parse_order_grid("0:2:1").is_err());
        assert!(parse_order_grid("2.5").is_err());
    }
}
