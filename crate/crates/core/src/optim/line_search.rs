/// Result of a bounded scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: u64,
}

/// Brent's bounded minimizer on `[a, b]`: golden-section steps with parabolic
/// interpolation when the last steps have been shrinking.
///
/// Stops when the bracket is within `xatol` (plus a relative term) of the
/// incumbent, or after `max_evals` calls. Never evaluates the endpoints.
pub fn brent_bounded(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    xatol: f64,
    max_evals: u64,
) -> LineMinimum {
    assert!(a < b, "empty bracket");
    let start = a + GOLDEN_MEAN * (b - a);
    let f_start = f(start);
    let mut found = brent_bounded_from(f, a, b, start, f_start, xatol, max_evals.saturating_sub(1));
    found.evaluations += 1;
    found
}

const GOLDEN_MEAN: f64 = 0.381_966_011_250_105_1;

/// Same search seeded with a point `x0` inside `(a, b)` whose value `f0` is
/// already known. The result is never worse than `f0`; `evaluations` counts
/// only new calls.
pub fn brent_bounded_from(
    f: &mut dyn FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    x0: f64,
    f0: f64,
    xatol: f64,
    max_evals: u64,
) -> LineMinimum {
    assert!(a < b, "empty bracket");
    assert!(a <= x0 && x0 <= b, "start outside bracket");
    let sqrt_eps = f64::EPSILON.sqrt();
    let golden_mean = GOLDEN_MEAN;

    let mut fulc = x0;
    let mut nfc = fulc;
    let mut xf = fulc;
    let mut rat: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut fx = f0;
    let mut evals = 0;
    let mut ffulc = fx;
    let mut fnfc = fx;
    let mut xm = 0.5 * (a + b);
    let mut tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
    let mut tol2 = 2.0 * tol1;

    while (xf - xm).abs() > tol2 - 0.5 * (b - a) && evals < max_evals {
        let mut golden = true;
        if e.abs() > tol1 {
            golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = if xm >= xf { tol1 } else { -tol1 };
                }
            } else {
                golden = true;
            }
        }
        if golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden_mean * e;
        }
        let step = if rat >= 0.0 { 1.0 } else { -1.0 };
        let x = xf + step * rat.abs().max(tol1);
        let fu = f(x);
        evals += 1;

        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
        tol2 = 2.0 * tol1;
    }
    LineMinimum {
        x: xf,
        value: fx,
        evaluations: evals,
    }
}
