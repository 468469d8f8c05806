//! Text formatting shared by the CSV writers.

/// Round-trip decimal with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(prefix: &str, dim: usize) -> String {
    (1..=dim).map(|i| format!("{prefix}_{i}")).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -2.5e-300, std::f64::consts::PI, 1.0 / 3.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn header_names() {
        assert_eq!(csv_header("x", 3), "x_1,x_2,x_3");
    }
}
