//! End-to-end cross-checks: reference tables, oracle equivalences, closed
//! forms, convergence and Monte-Carlo moment checks. Shared by the
//! acceptance runner and the `verify` command.

use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::asymptotics_enum::{convergence_report, disc_series, ln_bigint, ln_tree_estimate, map_series, residue_class};
use crate::char_system::{solve_characteristic, verify_schema, CharConstants};
use crate::exact_series::{rat, IntSeries, TruncSeries};
use crate::maps::census_count;
use crate::sampler_limit::{empirical_moments, sample_records, CountTables, SampleRecord};
use crate::scheme_constants::{brute_force_schemes, cubic_scheme_count, scheme_table, unicellular_closed_form};
use crate::surface::Surface;
use crate::tree_gf::{legs_series, legs_series_via_y, spine_bivariate, tree_series, tree_series_int, DegreeSet};

/// Reference values of `a(S)` for orientable surfaces, genus 0..=3 by rows
/// and one to four boundary components by columns.
pub const REFERENCE_ORIENTABLE: [[i64; 4]; 4] = [
    [0, 1, 4, 32],
    [1, 28, 664, 14912],
    [105, 8112, 396792, 15663360],
    [50050, 6718856, 51778972, 30074896256],
];

/// Reference values of `a(S)` for non-orientable surfaces, genus 1..=4.
pub const REFERENCE_NON_ORIENTABLE: [[i64; 4]; 4] = [
    [1, 9, 118, 1773],
    [6, 174, 4236, 97134],
    [128, 6786, 249416, 7820190],
    [3780, 301680, 15139800, 610410600],
];

/// Why the orientable reference table cannot be matched; see
/// [`table_reproduction`].
pub const TABLE_BLOCKER: &str = "three genus-3 reference cells (O3.2, O3.3, O3.4) disagree with the \
     values computed here, which the Goulden-Jackson recurrence for rooted cubic maps confirms independently";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The failure is documented as unattainable.
    pub known_blocked: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub threads: usize,
    /// Monte-Carlo samples per size for the limit-law and decay checks.
    pub samples: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 42, threads: 1, samples: 100_000 }
    }
}

fn timed(name: &str, f: impl FnOnce() -> (bool, String)) -> Check {
    let start = Instant::now();
    let (passed, detail) = f();
    Check { name: name.to_string(), passed, known_blocked: false, detail, seconds: start.elapsed().as_secs_f64() }
}

fn d(x: &[u32]) -> DegreeSet {
    DegreeSet::new(x).expect("valid degree set")
}

/// All 32 reference cells of the cubic-scheme tables.
pub fn table_reproduction() -> Check {
    let mut check = timed("table reproduction", || {
        let mut mismatches = Vec::new();
        for (orientable, reference) in [(true, REFERENCE_ORIENTABLE), (false, REFERENCE_NON_ORIENTABLE)] {
            let (g_lo, g_hi) = if orientable { (0, 3) } else { (1, 4) };
            let table = match scheme_table(orientable, g_hi, 4) {
                Ok(t) => t,
                Err(e) => return (false, e.to_string()),
            };
            for entry in table {
                let s = entry.surface;
                if s.genus < g_lo {
                    continue;
                }
                let want = BigInt::from(reference[(s.genus - g_lo) as usize][s.boundaries as usize - 1]);
                if entry.a != want {
                    mismatches.push(format!("{s}: computed {} vs reference {want}", entry.a));
                }
            }
        }
        if mismatches.is_empty() {
            (true, "32/32 cells match".into())
        } else {
            (false, format!("{}/32 cells match; {}", 32 - mismatches.len(), mismatches.join("; ")))
        }
    });
    let blocked = ["O3.2", "O3.3", "O3.4"];
    check.known_blocked = !check.passed && check.detail.matches("computed").count() == blocked.len()
        && blocked.iter().all(|s| check.detail.contains(s));
    if check.known_blocked {
        check.detail = format!("{} [known-blocked: {TABLE_BLOCKER}]", check.detail);
    }
    check
}

pub fn unicellular() -> Check {
    timed("unicellular closed form", || {
        let want = [1i64, 105, 50050];
        for (g, w) in (1..=3u32).zip(want) {
            let formula = unicellular_closed_form(g);
            let solved = match cubic_scheme_count(&Surface::orientable(g, 1)) {
                Ok(a) => a,
                Err(e) => return (false, e.to_string()),
            };
            if formula != BigInt::from(w) || solved != formula {
                return (false, format!("g={g}: closed form {formula}, equations {solved}, expected {w}"));
            }
        }
        (true, "g=1,2,3 give 1, 105, 50050".into())
    })
}

pub fn scheme_oracle() -> Check {
    timed("scheme oracle equivalence", || {
        let mut checked = Vec::new();
        for orientable in [true, false] {
            for genus in 0..=4u32 {
                for boundaries in 1..=4u32 {
                    let Ok(s) = Surface::new(orientable, genus, boundaries) else { continue };
                    if s.is_disc() || s.cubic_edges() > 8 {
                        continue;
                    }
                    let brute = match brute_force_schemes(&s, s.cubic_edges() as usize, true) {
                        Ok(v) => BigInt::from(v.len()),
                        Err(e) => return (false, e.to_string()),
                    };
                    match cubic_scheme_count(&s) {
                        Ok(a) if a == brute => checked.push(s.to_string()),
                        Ok(a) => return (false, format!("{s}: brute force {brute}, equations {a}")),
                        Err(e) => return (false, e.to_string()),
                    }
                }
            }
        }
        (true, format!("{} surfaces agree: {}", checked.len(), checked.join(" ")))
    })
}

pub fn disc_catalan() -> Check {
    timed("disc Catalan", || {
        let series = disc_series(20);
        for n in 3..=20usize {
            let m = n - 2;
            let binom = (0..m).fold(BigInt::one(), |acc, i| acc * BigInt::from(2 * m - i) / BigInt::from(i + 1));
            let catalan = binom / BigInt::from(m + 1);
            if series.coeff(n) != catalan {
                return (false, format!("n={n}: {} vs C({m}) = {catalan}", series.coeff(n)));
            }
        }
        (true, "n=3..20 equal C(n-2)".into())
    })
}

pub fn map_oracle() -> Check {
    timed("map census equivalence", || {
        let mut compared = 0;
        for s in [Surface::cylinder(), Surface::moebius(), Surface::orientable(1, 1)] {
            for delta in [d(&[3]), d(&[4])] {
                let series = match map_series(&s, &delta, 6) {
                    Ok(a) => a,
                    Err(e) => return (false, e.to_string()),
                };
                for n in 1..=6 {
                    if n % delta.period() != residue_class(s.chi(), delta.period()) {
                        continue;
                    }
                    let census = BigInt::from(census_count(&s, delta.degrees(), n));
                    if series.coeff(n) != census {
                        return (false, format!("{s} {delta} n={n}: series {} vs census {census}", series.coeff(n)));
                    }
                    compared += 1;
                }
            }
        }
        (true, format!("{compared} (surface, degrees, n) cells agree"))
    })
}

pub fn characteristic_constants() -> Check {
    timed("characteristic constants", || {
        let tol = 1e-12;
        let mut worst_schema = 0.0f64;
        let c3 = match solve_characteristic(&d(&[3]), 1e-14) {
            Ok(c) => c,
            Err(e) => return (false, e.to_string()),
        };
        let dev3 = [(c3.tau - 0.5).abs(), (c3.rho - 0.25).abs(), (c3.gamma - 0.5).abs()];
        if dev3.iter().any(|&x| x > tol) {
            return (false, format!("Δ={{3}}: {c3:?}"));
        }
        for p in [1i32, 2, 3] {
            let delta = d(&[p as u32 + 2]);
            let c = match solve_characteristic(&delta, 1e-14) {
                Ok(c) => c,
                Err(e) => return (false, e.to_string()),
            };
            let pf = p as f64;
            let tau = (pf + 1.0).powf(-1.0 / pf);
            let rho = (pf.powi(p) / (pf + 1.0).powi(p + 1)).powf(1.0 / pf);
            let gamma = (2.0 * (pf + 1.0).powf(-(pf + 2.0) / pf)).sqrt();
            if (c.tau - tau).abs() > tol || (c.rho - rho).abs() > tol || (c.gamma - gamma).abs() > tol {
                return (false, format!("Δ={{{}}}: {c:?}", p + 2));
            }
            let rep = verify_schema(&delta, &c, 1e-10);
            worst_schema = worst_schema.max(rep.g_residual).max(rep.gw_residual);
            if rep.g_residual > 1e-10 || rep.gw_residual > 1e-10 {
                return (false, format!("Δ={{{}}}: schema residuals {rep:?}", p + 2));
            }
        }
        (true, format!("closed forms within {tol:e}; worst schema residual {worst_schema:.1e}"))
    })
}

pub fn tree_asymptotics() -> Check {
    timed("tree-count asymptotics", || {
        let delta = d(&[3]);
        let c = match solve_characteristic(&delta, 1e-13) {
            Ok(c) => c,
            Err(e) => return (false, e.to_string()),
        };
        let n = 2000;
        let t = tree_series_int(&delta, n + 1);
        let ratio = (ln_bigint(&t.coeff(n + 1)) - ln_tree_estimate(&c, n + 1)).exp();
        ((ratio - 1.0).abs() < 0.02, format!("T(2001)/estimate = {ratio:.6}"))
    })
}

pub fn torus_convergence() -> Check {
    timed("torus convergence", || {
        let rows = match convergence_report(&Surface::orientable(1, 1), &d(&[3]), &[250, 500, 1000, 2000]) {
            Ok(r) => r,
            Err(e) => return (false, e.to_string()),
        };
        let at_1000 = rows.iter().find(|r| r.n == 1000).map_or(f64::NAN, |r| r.ratio);
        let bounded = rows
            .windows(2)
            .all(|w| w[1].scaled_deviation.abs() <= 1.1 * w[0].scaled_deviation.abs() + 1e-9);
        let devs: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.n, r.scaled_deviation)).collect();
        (
            (at_1000 - 1.0).abs() < 0.05 && bounded,
            format!("ratio at 1000 = {at_1000:.5}; sqrt(n)-scaled deviations {}", devs.join(" ")),
        )
    })
}

fn cylinder_records(n: usize, opts: &VerifyOptions) -> Result<Vec<SampleRecord>, String> {
    let tables = CountTables::build(&Surface::cylinder(), &d(&[3]), n).map_err(|e| e.to_string())?;
    Ok(sample_records(&tables, opts.seed, opts.samples, opts.threads, true))
}

/// Cylinder, Δ = {3}, n = 2000: moments r = 1, 2, 3 of `U/√n`.
pub fn limit_law(records: &[SampleRecord], consts: &CharConstants) -> Check {
    timed("limit law moments", || {
        let tolerances = [0.03, 0.05, 0.10];
        let moments = empirical_moments(records, 2000, 3, &Surface::cylinder(), consts);
        let mut ok = true;
        let mut parts = Vec::new();
        for (m, tol) in moments[1..].iter().zip(tolerances) {
            let rel = m.relative_error();
            ok &= rel <= tol;
            parts.push(format!(
                "r={}: {:.5} vs {:.5} (rel {:.4} <= {tol}, se {:.4})",
                m.order, m.empirical, m.theoretical, rel, m.standard_error
            ));
        }
        (ok, format!("{} samples; {}", records.len(), parts.join("; ")))
    })
}

fn non_dissection_fraction(records: &[SampleRecord]) -> f64 {
    records.iter().filter(|r| r.is_dissection == Some(false)).count() as f64 / records.len().max(1) as f64
}

/// Non-dissection fraction at n = 500 over that at n = 2000.
pub fn dissection_decay(small: &[SampleRecord], large: &[SampleRecord]) -> Check {
    timed("non-dissection decay", || {
        let (f_small, f_large) = (non_dissection_fraction(small), non_dissection_fraction(large));
        let ratio = f_small / f_large;
        let violations = small.iter().chain(large).filter(|r| r.all_balanced && r.is_dissection == Some(false)).count();
        (
            (1.4..=2.8).contains(&ratio) && violations == 0,
            format!("f(500) = {f_small:.5}, f(2000) = {f_large:.5}, ratio {ratio:.3}; balanced non-dissections {violations}"),
        )
    })
}

fn random_int_series(rng: &mut ChaCha8Rng, order: usize) -> IntSeries {
    IntSeries::from_coeffs((0..=order).map(|_| BigInt::from(rng.gen_range(-50i64..50))).collect())
}

fn random_rat_series(rng: &mut ChaCha8Rng, order: usize) -> TruncSeries {
    TruncSeries::from_coeffs((0..=order).map(|_| rat(rng.gen_range(-20..20), rng.gen_range(1..6))).collect())
}

/// Seeded versions of the property suites.
pub fn property_suites(opts: &VerifyOptions) -> Check {
    timed("property suites", || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..100 {
            let (a, b, c) = (random_int_series(&mut rng, 10), random_int_series(&mut rng, 10), random_int_series(&mut rng, 10));
            let ring = a.mul(&b) == b.mul(&a)
                && a.mul(&b).mul(&c) == a.mul(&b.mul(&c))
                && a.add(&b).mul(&c) == a.mul(&c).add(&b.mul(&c))
                && a.sub(&a).is_zero();
            let (x, y) = (random_rat_series(&mut rng, 10), random_rat_series(&mut rng, 10));
            let field = x.coeff(0).is_zero() || x.mul(&x.inverse().expect("unit")) == TruncSeries::one(10);
            if !ring || !field || x.mul(&y) != y.mul(&x) {
                return (false, "series ring axiom violated".into());
            }
        }
        let degree_sets = [d(&[3]), d(&[4]), d(&[5]), d(&[3, 4]), d(&[4, 6]), d(&[3, 5, 7])];
        let surfaces = [
            Surface::cylinder(),
            Surface::moebius(),
            Surface::orientable(1, 1),
            Surface::orientable(0, 3),
            Surface::non_orientable(1, 2),
            Surface::non_orientable(2, 1),
        ];
        for delta in &degree_sets {
            let p = delta.period();
            for s in &surfaces {
                let a = match map_series(s, delta, 24) {
                    Ok(a) => a,
                    Err(e) => return (false, e.to_string()),
                };
                if (0..=24).any(|n| n % p != residue_class(s.chi(), p) && !a.coeff(n).is_zero()) {
                    return (false, format!("{s} {delta}: nonzero count off the residue class"));
                }
            }
            for legs in 1..=4 {
                if legs_series_via_y(delta, legs, 20).ok() != Some(legs_series(delta, legs, 20)) {
                    return (false, format!("{delta}: leg routes differ at {legs} legs"));
                }
            }
            let marginal = spine_bivariate(delta, 16, 18).into_iter().fold(TruncSeries::zero(16), |acc, s| acc.add(&s));
            if marginal != tree_series(delta, 17).derive() {
                return (false, format!("{delta}: spine marginal differs from T'"));
            }
        }
        let mut sampled = 0u64;
        for (i, (s, delta, n)) in [
            (Surface::cylinder(), d(&[3]), 300),
            (Surface::orientable(1, 1), d(&[3, 4]), 250),
            (Surface::moebius(), d(&[4]), 240),
            (Surface::orientable(0, 3), d(&[3]), 200),
        ]
        .into_iter()
        .enumerate()
        {
            let tables = match CountTables::build(&s, &delta, n) {
                Ok(t) => t,
                Err(e) => return (false, e.to_string()),
            };
            let records = sample_records(&tables, opts.seed.wrapping_add(i as u64), 2_500, opts.threads, true);
            sampled += records.len() as u64;
            if let Some(r) = records.iter().find(|r| r.all_balanced && r.is_dissection != Some(true)) {
                return (false, format!("{s} {delta} n={n}: balanced sample {} is not a dissection", r.index));
            }
        }
        (true, format!("ring, periodicity, leg routes, spine marginal; balanced => dissection on {sampled} samples"))
    })
}

/// Every check, in a fixed order; `progress` sees each result as it lands.
pub fn run_all(opts: &VerifyOptions, mut progress: impl FnMut(&Check)) -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |c: Check, out: &mut Vec<Check>| {
        progress(&c);
        out.push(c);
    };
    push(table_reproduction(), &mut out);
    push(unicellular(), &mut out);
    push(scheme_oracle(), &mut out);
    push(disc_catalan(), &mut out);
    push(map_oracle(), &mut out);
    push(characteristic_constants(), &mut out);
    push(tree_asymptotics(), &mut out);
    push(torus_convergence(), &mut out);
    let sampling = (|| -> Result<_, String> {
        let consts = solve_characteristic(&d(&[3]), 1e-13).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let large = cylinder_records(2000, opts)?;
        let t_large = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let small = cylinder_records(500, opts)?;
        let t_small = start.elapsed().as_secs_f64();
        Ok((consts, large, t_large, small, t_small))
    })();
    match sampling {
        Ok((consts, large, t_large, small, t_small)) => {
            let mut law = limit_law(&large, &consts);
            law.seconds += t_large;
            push(law, &mut out);
            let mut decay = dissection_decay(&small, &large);
            decay.seconds += t_small;
            push(decay, &mut out);
        }
        Err(e) => {
            for name in ["limit law moments", "non-dissection decay"] {
                let c = Check { name: name.into(), passed: false, known_blocked: false, detail: e.clone(), seconds: 0.0 };
                push(c, &mut out);
            }
        }
    }
    push(property_suites(opts), &mut out);
    out
}
