//! Number rendering for machine and human output.

/// 17 significant digits; parses back to the same `f64`.
pub fn machine(x: f64) -> String {
    format!("{x:.16e}")
}

/// Four significant digits for tables meant to be read.
pub fn human(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..4).contains(&mag) {
        let decimals = (3 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}
