//! Mesh builders shared by the integration tests.
#![allow(dead_code)]

/// Unit square with staggered rows of points: even rows at `i/n`, odd rows
/// shifted by half a spacing plus the two wall points. Rows are spaced so
/// the interior triangles are close to equilateral. Returns Triangle
/// `.node` / `.ele` text.
pub fn staggered_square(n: usize) -> (String, String) {
    let rows = ((n as f64) * 2.0 / 3f64.sqrt()).round() as usize;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut ids: Vec<Vec<usize>> = Vec::new();
    let mut node_lines = Vec::new();
    for r in 0..=rows {
        let y = r as f64 / rows as f64;
        let xs: Vec<f64> = if r % 2 == 0 {
            (0..=n).map(|i| i as f64 / n as f64).collect()
        } else {
            std::iter::once(0.0)
                .chain((0..n).map(|i| (i as f64 + 0.5) / n as f64))
                .chain(std::iter::once(1.0))
                .collect()
        };
        let mut row_ids = Vec::new();
        for &x in &xs {
            let id = node_lines.len();
            let boundary = r == 0 || r == rows || x == 0.0 || x == 1.0;
            node_lines.push(format!("{id} {x:?} {y:?} {}", u8::from(boundary)));
            row_ids.push(id);
        }
        points.push(xs);
        ids.push(row_ids);
    }
    let mut triangles = Vec::new();
    for r in 0..rows {
        let (lo, hi) = (&ids[r], &ids[r + 1]);
        let (xlo, xhi) = (&points[r], &points[r + 1]);
        let (mut i, mut j) = (0, 0);
        while i + 1 < lo.len() || j + 1 < hi.len() {
            let advance_low = if i + 1 >= lo.len() {
                false
            } else if j + 1 >= hi.len() {
                true
            } else {
                xlo[i + 1] <= xhi[j + 1]
            };
            if advance_low {
                triangles.push([lo[i], lo[i + 1], hi[j]]);
                i += 1;
            } else {
                triangles.push([lo[i], hi[j + 1], hi[j]]);
                j += 1;
            }
        }
    }
    let mut node = format!("{} 2 0 1\n", node_lines.len());
    for l in node_lines {
        node.push_str(&l);
        node.push('\n');
    }
    let mut ele = format!("{} 3 0\n", triangles.len());
    for (k, t) in triangles.iter().enumerate() {
        ele.push_str(&format!("{k} {} {} {}\n", t[0], t[1], t[2]));
    }
    (node, ele)
}
