//! Small dense-vector helpers on plain slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Minimal-norm element of the convex hull of `points` (Gilbert's algorithm).
pub fn min_norm_in_hull(points: &[Vec<f64>]) -> Vec<f64> {
    assert!(!points.is_empty(), "empty point set");
    if points.len() == 1 {
        return points[0].clone();
    }
    if points[0].len() == 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let v = if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else if lo > 0.0 {
            lo
        } else {
            hi
        };
        return vec![v];
    }
    let mut x = points
        .iter()
        .min_by(|a, b| norm(a).total_cmp(&norm(b)))
        .cloned()
        .unwrap();
    for _ in 0..10_000 {
        let xx = dot(&x, &x);
        if xx == 0.0 {
            break;
        }
        let s = points
            .iter()
            .min_by(|a, b| dot(&x, a).total_cmp(&dot(&x, b)))
            .unwrap();
        let d = sub(&x, s);
        let gap = dot(&x, &d);
        if gap <= 1e-15 * xx.max(1e-300) {
            break;
        }
        let dd = dot(&d, &d);
        let lambda = (gap / dd).clamp(0.0, 1.0);
        x = axpy(&x, -lambda, &d);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_min_norm_symmetric_pair_is_origin() {
        let v = min_norm_in_hull(&[vec![1.0, 2.0], vec![-1.0, -2.0]]);
        assert!(norm(&v) < 1e-14);
    }

    #[test]
    fn hull_min_norm_projects_onto_segment() {
        let v = min_norm_in_hull(&[vec![1.0, -1.0], vec![1.0, 1.0]]);
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn hull_min_norm_one_dimensional() {
        assert_eq!(min_norm_in_hull(&[vec![-2.0], vec![3.0]]), vec![0.0]);
        assert_eq!(min_norm_in_hull(&[vec![2.0], vec![3.0]]), vec![2.0]);
        assert_eq!(min_norm_in_hull(&[vec![-2.0], vec![-3.0]]), vec![-2.0]);
    }
}
