//! Low-discrepancy sample points.

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in base `b`.
pub fn halton(index: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Halton points mapped into `domain`, starting at sequence position
/// `start + 1` (position 0 is the box corner).
pub fn halton_points(domain: &[[f64; 2]], count: usize, start: usize) -> Vec<Vec<f64>> {
    assert!(domain.len() <= PRIMES.len(), "too many dimensions for the Halton table");
    (0..count)
        .map(|s| {
            let idx = (start + s + 1) as u64;
            domain
                .iter()
                .zip(PRIMES)
                .map(|(b, p)| b[0] + (b[1] - b[0]) * halton(idx, p))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_terms() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn points_stay_inside_box() {
        let d = [[1.0, 2.0], [-0.5, 0.5], [0.0, 10.0]];
        for p in halton_points(&d, 200, 7) {
            for (x, b) in p.iter().zip(&d) {
                assert!(*x > b[0] && *x < b[1]);
            }
        }
    }
}
