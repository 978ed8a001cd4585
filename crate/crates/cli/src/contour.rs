use lsd_lab::sim::line_contour;
use num_complex::Complex64;

use crate::Failure;

/// Parses `im=EPS,re=A:B:COUNT` into `COUNT` equispaced points at height `EPS`.
pub fn parse_contour(spec: &str) -> Result<Vec<Complex64>, Failure> {
    let bad = |why: &str| Failure::input(format!("contour {spec:?}: {why}"));
    let mut im: Option<f64> = None;
    let mut re: Option<(f64, f64, usize)> = None;
    for part in spec.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match key.trim() {
            "im" => {
                let v: f64 = value.trim().parse().map_err(|_| bad("bad im"))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(bad("im must be positive"));
                }
                im = Some(v);
            }
            "re" => {
                let fields: Vec<&str> = value.split(':').map(str::trim).collect();
                let [a, b, count] = fields[..] else {
                    return Err(bad("re must be A:B:COUNT"));
                };
                let a: f64 = a.parse().map_err(|_| bad("bad re start"))?;
                let b: f64 = b.parse().map_err(|_| bad("bad re end"))?;
                let count: usize = count.parse().map_err(|_| bad("bad re count"))?;
                if count == 0 || !(a.is_finite() && b.is_finite()) || (count > 1 && !(b > a)) {
                    return Err(bad("re needs A < B and COUNT >= 1"));
                }
                re = Some((a, b, count));
            }
            other => return Err(bad(&format!("unknown key {other:?}"))),
        }
    }
    let (Some(im), Some((a, b, count))) = (im, re) else {
        return Err(bad("both im and re are required"));
    };
    Ok(line_contour(im, a, b, count))
}
