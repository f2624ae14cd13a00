//! Special-function kernel: log-gamma based helpers used by every moment
//! formula in the crate.
//!
//! All gamma-ratio arithmetic is done in log space. `ln_gamma`/`digamma` come
//! from `statrs` (verified against a 30-digit reference grid in the tests
//! below; worst relative error ~1e-14). The crate adds the higher polygamma
//! orders and the cancellation-safe difference quotient `dlg` with its first
//! two derivatives, which the moment curves and their Newton solvers need for
//! small orders.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Trigamma function psi_1(x) for x > 0. Recurrence up to x >= 16, then the
/// Bernoulli tail; relative accuracy ~1e-13.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma domain: x > 0, got {x}");
    let mut acc = 0.0;
    let mut x = x;
    while x < 16.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9)
    let tail = inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 - inv2 / 30.0)));
    acc + tail
}

/// Tetragamma function psi_2(x) for x > 0; relative accuracy ~1e-11.
pub fn tetragamma(x: f64) -> f64 {
    assert!(x > 0.0, "tetragamma domain: x > 0, got {x}");
    let mut acc = 0.0;
    let mut x = x;
    while x < 16.0 {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // -1/x^2 - 1/x^3 - 1/(2x^4) + 1/(6x^6) - 1/(6x^8)
    let tail = -inv2 - inv * inv2 - 0.5 * inv2 * inv2
        + inv2 * inv2 * inv2 * (1.0 / 6.0 - inv2 / 6.0);
    acc + tail
}

/// Pentagamma function psi_3(x) for x > 0; relative accuracy ~1e-10.
pub fn pentagamma(x: f64) -> f64 {
    assert!(x > 0.0, "pentagamma domain: x > 0, got {x}");
    let mut acc = 0.0;
    let mut x = x;
    while x < 16.0 {
        let x2 = x * x;
        acc += 6.0 / (x2 * x2);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 2/x^3 + 3/x^4 + 2/x^5 - 1/x^7 + (4/3)/x^9
    let tail = inv * inv2 * (2.0 + inv * (3.0 + inv * 2.0) + inv2 * inv2 * (-1.0 + inv2 * 4.0 / 3.0));
    acc + tail
}

/// Hexagamma function psi_4(x) for x > 0; relative accuracy ~1e-9.
pub fn hexagamma(x: f64) -> f64 {
    assert!(x > 0.0, "hexagamma domain: x > 0, got {x}");
    let mut acc = 0.0;
    let mut x = x;
    while x < 16.0 {
        let x2 = x * x;
        acc -= 24.0 / (x2 * x2 * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // -(6/x^4 + 12/x^5 + 10/x^6 - 7/x^8 + 12/x^10)
    let tail = -inv2 * inv2 * (6.0 + inv * (12.0 + inv * (10.0 + inv2 * (-7.0 + 12.0 * inv2))));
    acc + tail
}

const DLG_SWITCH: f64 = 1e-3;

/// For `a < 1` shift the Taylor base to `a + 1` (where every polygamma
/// coefficient is O(1)) and carry the exact `ln(1 + h/a)` correction.
fn taylor_base(a: f64) -> (f64, bool) {
    if a < 1.0 {
        (a + 1.0, true)
    } else {
        (a, false)
    }
}

/// `[ln(1+z) - z/(1+z)] / z^2`, the cancellation-safe slope of `ln(1+z)/z`
/// (negated). Positive, `-> 1/2` as `z -> 0`.
fn ln1p_slope(z: f64) -> f64 {
    if z.abs() < 0.25 {
        // 1/2 - 2z/3 + 3z^2/4 - 4z^3/5 + ...
        let mut term = 0.5;
        let mut sum = term;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term *= -z * (k * k) / ((k - 1.0) * (k + 1.0));
            sum += term;
            if term.abs() < 1e-17 {
                return sum;
            }
        }
    } else {
        (z.ln_1p() - z / (1.0 + z)) / (z * z)
    }
}

/// `d^2/dz^2 [ln(1+z)/z]`, cancellation-safe. `-> 2/3` as `z -> 0`.
fn ln1p_curvature(z: f64) -> f64 {
    if z.abs() < 0.25 {
        // 2/3 - 3z/2 + 12z^2/5 - ... : sum over k>=2 of (-1)^k k(k-1) z^(k-2)/(k+1)
        let mut term = 2.0 / 3.0;
        let mut sum = term;
        let mut k = 2.0;
        loop {
            k += 1.0;
            term *= -z * (k * (k - 1.0) * k) / ((k - 1.0) * (k - 2.0) * (k + 1.0));
            sum += term;
            if term.abs() < 1e-17 {
                return sum;
            }
        }
    } else {
        (2.0 * z.ln_1p() - z * (2.0 + 3.0 * z) / ((1.0 + z) * (1.0 + z))) / (z * z * z)
    }
}

/// Difference quotient `(ln Gamma(a + s r) - ln Gamma(a)) / r`.
///
/// This is the building block of every `r`-th moment curve. For small `s*r`
/// the direct difference cancels catastrophically, so a shifted four-term
/// Taylor expansion takes over (relative accuracy ~1e-13 on both branches).
/// `r = 0` returns the exact limit `s * psi(a)`.
pub fn dlg(a: f64, s: f64, r: f64) -> f64 {
    debug_assert!(a > 0.0 && s > 0.0 && r >= 0.0);
    if r == 0.0 {
        return s * digamma(a);
    }
    let h = s * r;
    if h < DLG_SWITCH {
        let (x0, shifted) = taylor_base(a);
        // (ln Gamma(x0 + h) - ln Gamma(x0)) / h
        let quotient = digamma(x0)
            + h * (0.5 * trigamma(x0)
                + h * (tetragamma(x0) / 6.0 + h * pentagamma(x0) / 24.0));
        if shifted {
            s * quotient - (h / a).ln_1p() / r
        } else {
            s * quotient
        }
    } else {
        (ln_gamma(a + h) - ln_gamma(a)) / r
    }
}

/// Derivative of [`dlg`] in `r`; relative accuracy ~1e-9 or better.
pub fn dlg_deriv(a: f64, s: f64, r: f64) -> f64 {
    debug_assert!(a > 0.0 && s > 0.0 && r >= 0.0);
    let h = s * r;
    if h < DLG_SWITCH {
        let (x0, shifted) = taylor_base(a);
        let main = s
            * s
            * (0.5 * trigamma(x0) + h * (tetragamma(x0) / 3.0 + h * pentagamma(x0) / 8.0));
        if shifted {
            main + (s * s) / (a * a) * ln1p_slope(h / a)
        } else {
            main
        }
    } else {
        (s * digamma(a + h) - dlg(a, s, r)) / r
    }
}

/// Second derivative of [`dlg`] in `r`. Used to drive Newton steps in the
/// order allocator; relative accuracy ~1e-6 worst case, far better away from
/// the branch boundary.
pub fn dlg_deriv2(a: f64, s: f64, r: f64) -> f64 {
    debug_assert!(a > 0.0 && s > 0.0 && r >= 0.0);
    let h = s * r;
    if h < 3.0 * DLG_SWITCH {
        let (x0, shifted) = taylor_base(a);
        let s3 = s * s * s;
        let main =
            s3 * (tetragamma(x0) / 3.0 + h * (pentagamma(x0) / 4.0 + h * hexagamma(x0) / 10.0));
        if shifted {
            main - s3 / (a * a * a) * ln1p_curvature(h / a)
        } else {
            main
        }
    } else {
        (s * s * trigamma(a + h) - 2.0 * dlg_deriv(a, s, r)) / r
    }
}

/// `ln Gamma(a) - ln Gamma(b)`.
pub fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    ln_gamma(a) - ln_gamma(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    // 30-digit reference values (mpmath).
    const LN_GAMMA_REFS: &[(f64, f64)] = &[
        (0.000244140625, 8.31762529394318044665581515166),
        (0.03125, 3.44848912779795847968326934527),
        (0.5, 0.572364942924700087071713675677),
        (0.9, 0.0663762397347429711887167398671),
        (1.0, 0.0),
        (1.461632, -0.121486290535839439879258571538),
        (2.5, 0.284682870472919159632494669683),
        (8.25, 9.03318691960512285327455704258),
        (100.5, 361.435540467777621555251912703),
        (1000.25, 5906.94726827111717699648724696),
        (10000.0625, 82100.2931397858955597467401246),
    ];

    #[test]
    fn ln_gamma_matches_reference_to_1e13() {
        for &(x, reference) in LN_GAMMA_REFS {
            let got = ln_gamma(x);
            let denom = reference.abs().max(1.0);
            assert!(
                ((got - reference) / denom).abs() < 1e-13,
                "ln_gamma({x}) = {got}, want {reference}"
            );
        }
    }

    #[test]
    fn polygamma_reference_values() {
        // (x, psi, psi1, psi2) from mpmath at 25 digits
        let refs: &[(f64, f64, f64, f64)] = &[
            (0.015625, -64.55180297316785667, 4097.6081469812325471, -524290.30560802491993),
            (0.1, -10.423754940411076795, 101.43329915079275882, -2001.8614573783440063),
            (0.5, -1.9635100260214234794, 4.9348022005446793094, -16.828796644234319996),
            (1.0, -0.57721566490153286061, 1.6449340668482264365, -2.4041138063191885708),
            (2.5, 0.70315664064524318723, 0.49035775610023486497, -0.23620405164172740300),
            (7.75, 1.9817915626943455972, 0.13771379144765566054, -0.018935466672670957008),
            (8.5, 2.0800908175794201214, 0.12483811891892602199, -0.015564511795903923324),
            (16.5, 2.7727513716226234971, 0.0624796826779689987246, -0.00390244395775376375956),
            (100.5, 4.6051743525818452119, 0.0099999166695831027116, -0.000099997500145817190476),
        ];
        for &(x, psi, psi1, psi2) in refs {
            assert!(((digamma(x) - psi) / psi).abs() < 1e-11, "digamma({x})");
            assert!(((trigamma(x) - psi1) / psi1).abs() < 1e-11, "trigamma({x})");
            assert!(((tetragamma(x) - psi2) / psi2).abs() < 1e-10, "tetragamma({x})");
        }
    }

    #[test]
    fn higher_polygamma_reference_values() {
        let penta: &[(f64, f64)] = &[
            (0.015625, 100663302.11954465632),
            (0.1, 60004.5128767902533843),
            (0.5, 97.4090910340024372364),
            (1.0, 6.4939394022668291491),
            (2.5, 0.223905848817252051255),
            (7.75, 0.0051991522947022234108),
            (8.5, 0.00387614036028239741043),
            (16.5, 0.000487330816683401963328),
            (100.5, 0.00000199990000874870863089),
        ];
        for &(x, want) in penta {
            assert!(((pentagamma(x) - want) / want).abs() < 1e-9, "pentagamma({x})");
        }
        let hexa: &[(f64, f64)] = &[
            (0.1, -2400015.60720319519878),
            (0.5, -771.474249826667225191),
            (1.0, -24.886266123440878232),
            (2.5, -0.313755999506731363375),
            (8.5, -0.00144612496467719696376),
            (16.5, -0.000091256126780499013168),
            (100.5, -5.99950006123837827292e-8),
        ];
        for &(x, want) in hexa {
            assert!(((hexagamma(x) - want) / want).abs() < 1e-8, "hexagamma({x})");
        }
    }

    // (a, s, r, dlg, dlg', dlg'') from mpmath at 40 digits; covers both the
    // series branch (small s*r, small and large a) and the direct branch.
    const DLG_REFS: &[(f64, f64, f64, f64, f64, f64)] = &[
        (0.03125, 0.5, 0.0019, -16.0247223987050911511, 123.180026780840865161, -2552.69682599926469225),
        (1.4616, 1.0, 0.0005, 0.000210782035704456613038, 0.483702808156009237539, -0.294998273299724949291),
        (116.0, 0.9, 0.001, 4.27434979443305653488, 0.00350645338774367601842, -0.0000182149964344525529989),
        (0.25, 0.1, 0.0001, -0.422736754888589132561, 0.0859823350402105522286, -0.0431053999363157246702),
        (0.5, 1.0, 1e-9, -1.96351002355402238197, 2.46740109466274078547, -5.60959885705916731718),
        (2.0, 0.25, 0.0005, 0.10570616060632641117, 0.0201531372695948511047, -0.00210451824819926981105),
        (0.5, 1.0, 2.0, -0.14384103622589046372, 0.423498838435566825473, -0.178319960385449392986),
        (3.0, 0.2, 10.0, 0.248490664978800047744, 0.00527328687075600684368, -0.00016936555120273999067),
        (1.5, 0.5, 0.1, 0.0297609299075077309698, 0.113503538623144414974, -0.0324354297404537739401),
        (0.05, 0.03, 1.0, -0.484258726913469385055, 0.0956747467734180207811, -0.0494001866068372531785),
    ];

    #[test]
    fn dlg_and_derivatives_match_reference() {
        for &(a, s, r, d0, d1, d2) in DLG_REFS {
            let g0 = dlg(a, s, r);
            let g1 = dlg_deriv(a, s, r);
            let g2 = dlg_deriv2(a, s, r);
            assert!(((g0 - d0) / d0).abs() < 1e-11, "dlg({a},{s},{r}) = {g0}, want {d0}");
            assert!(((g1 - d1) / d1).abs() < 1e-8, "dlg'({a},{s},{r}) = {g1}, want {d1}");
            assert!(((g2 - d2) / d2).abs() < 5e-6, "dlg''({a},{s},{r}) = {g2}, want {d2}");
        }
    }

    #[test]
    fn dlg_branches_join_smoothly() {
        for &(a, s) in &[(0.03125, 0.5), (0.5, 1.0), (2.0, 0.25), (116.0, 0.9), (12.0, 0.05)] {
            let switch_r = DLG_SWITCH / s;
            let below = dlg(a, s, switch_r * 0.999);
            let above = dlg(a, s, switch_r * 1.001);
            let slope = dlg_deriv(a, s, switch_r).abs();
            let gap = (above - below).abs();
            let allowed = 2.0 * slope * switch_r * 0.002 + 1e-10 * below.abs().max(1.0);
            assert!(gap <= allowed, "jump at switch for a={a}, s={s}: gap {gap}, allowed {allowed}");
        }
    }

    #[test]
    fn dlg_limits_at_zero_order() {
        for &(a, s) in &[(0.03125, 0.5), (0.7, 0.2), (4.0, 1.0)] {
            assert!((dlg(a, s, 0.0) - s * digamma(a)).abs() < 1e-13 * (s * digamma(a)).abs().max(1.0));
            let want1 = 0.5 * s * s * trigamma(a);
            assert!(((dlg_deriv(a, s, 0.0) - want1) / want1).abs() < 1e-10);
            let want2 = s * s * s * tetragamma(a) / 3.0;
            assert!(((dlg_deriv2(a, s, 0.0) - want2) / want2).abs() < 1e-9);
            // tiny r agrees with the exact limit
            assert!(((dlg(a, s, 1e-12) - dlg(a, s, 0.0)) / dlg(a, s, 0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn dlg_derivatives_match_finite_differences() {
        let cases: [(f64, f64, f64); 4] =
            [(0.5, 1.0, 2.0), (3.0, 0.2, 10.0), (0.05, 0.03, 1.0), (1.5, 0.5, 0.1)];
        for &(a, s, r) in &cases {
            let h = 1e-6 * r.max(1e-3);
            let fd1 = (dlg(a, s, r + h) - dlg(a, s, r - h)) / (2.0 * h);
            let an1 = dlg_deriv(a, s, r);
            assert!(
                ((an1 - fd1) / fd1.abs().max(1e-12)).abs() < 1e-5,
                "dlg_deriv({a},{s},{r}) = {an1}, fd = {fd1}"
            );
            let fd2 = (dlg_deriv(a, s, r + h) - dlg_deriv(a, s, r - h)) / (2.0 * h);
            let an2 = dlg_deriv2(a, s, r);
            assert!(
                ((an2 - fd2) / fd2.abs().max(1e-12)).abs() < 1e-4,
                "dlg_deriv2({a},{s},{r}) = {an2}, fd = {fd2}"
            );
        }
    }
}
