//! Degree-2 simplex quadrature in barycentric form.

/// Interior node of the 3D rule.
pub const TET_A: f64 = 0.585_410_196_624_968_5;
/// Remaining barycentric weight of the 3D rule.
pub const TET_B: f64 = 0.138_196_601_125_010_5;

/// Nodes as barycentric coordinates with weights that sum to 1
/// (multiply by `|K|` to integrate).
#[derive(Debug, Clone)]
pub struct Rule {
    pub barycentric: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Edge midpoints in 2D, the four-point symmetric rule in 3D. Both are exact
/// for quadratics.
pub fn degree_two(dim: usize) -> Rule {
    match dim {
        2 => Rule {
            barycentric: vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
        },
        3 => Rule {
            barycentric: (0..4)
                .map(|i| (0..4).map(|j| if i == j { TET_A } else { TET_B }).collect())
                .collect(),
            weights: vec![0.25; 4],
        },
        _ => panic!("quadrature requested for dimension {dim}"),
    }
}

/// Physical location of a barycentric point.
pub fn map_point(points: &[&[f64]], bary: &[f64]) -> Vec<f64> {
    let dim = points[0].len();
    let mut x = vec![0.0; dim];
    for (p, &l) in points.iter().zip(bary) {
        for (xi, pi) in x.iter_mut().zip(p.iter()) {
            *xi += l * pi;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    // integral of l_0^a l_1^b l_2^c (l_3^e) over K is |K| d! a! b! c! / (d + a + b + c)!
    fn exact(dim: usize, powers: &[u32]) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let num: f64 = powers.iter().map(|&p| fact(p)).product::<f64>() * fact(dim as u32);
        num / fact(dim as u32 + powers.iter().sum::<u32>())
    }

    #[test]
    fn exact_for_all_quadratic_monomials() {
        for dim in [2, 3] {
            let rule = degree_two(dim);
            let n = dim + 1;
            for a in 0..n {
                for b in a..n {
                    let mut powers = vec![0u32; n];
                    powers[a] += 1;
                    powers[b] += 1;
                    let q: f64 = rule
                        .barycentric
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[a] * l[b])
                        .sum();
                    assert!((q - exact(dim, &powers)).abs() < 1e-14, "dim {dim} ({a},{b})");
                }
            }
        }
    }
}
