/// Exact squared Euclidean distance (in pixels) from every pixel to the
/// nearest `true` pixel of a row-major `width x height` mask; separable
/// lower-envelope algorithm. Pixels are infinitely far when the mask is
/// empty.
pub fn distance_transform(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(mask.len(), width * height, "mask size");
    let mut grid: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let mut buf = vec![0.0; width.max(height)];
    for x in 0..width {
        for y in 0..height {
            buf[y] = grid[y * width + x];
        }
        let col = transform_1d(&buf[..height]);
        for y in 0..height {
            grid[y * width + x] = col[y];
        }
    }
    for y in 0..height {
        let row = transform_1d(&grid[y * width..(y + 1) * width]);
        grid[y * width..(y + 1) * width].copy_from_slice(&row);
    }
    grid
}

fn transform_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![f64::INFINITY; n];
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return d;
    }
    // Lower envelope of parabolas rooted at finite samples.
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let inter = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
    };
    for &q in &sites {
        loop {
            match v.last() {
                Some(&p) => {
                    let s = inter(q, p);
                    if s <= *z.last().expect("z tracks v") {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
            }
        }
    }
    let mut k = 0;
    for (q, slot) in d.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *slot = (q as f64 - p as f64).powi(2) + f[p];
    }
    d
}
