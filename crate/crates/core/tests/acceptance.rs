//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are never captured.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use banddensity::classify::{classify_lw, classify_penta, mu_lw, mu_penta, Answer, Basis, ClassifyOptions, DensityProperty};
use banddensity::family::{builtin_family, CoefficientFamily, BUILTIN_NAMES};
use banddensity::scalar::{Rational, Scalar};
use banddensity::systems::BandSystem;
use banddensity::verify::{
    agree_check_by_check, bounds_report, summability_monitor, verify_annihilation, verify_lengths,
    verify_penta_relations, verify_xi_identity, CheckStatus,
};
use banddensity::witness::{
    assemble_lw, lw_radii, lw_witness_k1, lw_witness_k2, penta_annihilator, penta_witness_2d, row_mass_diagnostic,
    row_mass_value, triangle_solve, Vertex,
};
use banddensity::xi::{xi_closed, xi_definitional, SparseOperator};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn q(p: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(d))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn system(name: &str) -> BandSystem {
    BandSystem::new(builtin_family(name).unwrap()).unwrap()
}

fn random_rational_operator(rng: &mut ChaCha8Rng, max: usize, entries: usize) -> SparseOperator<Rational> {
    let mut op = SparseOperator::new();
    for _ in 0..entries {
        let (i, j) = (rng.gen_range(0..=max), rng.gen_range(0..=max));
        op.set(i, j, q(rng.gen_range(-20..=20), rng.gen_range(1..=6)));
    }
    op
}

/// Every pair `(t, l)` in the window, not only the band-adjacent ones.
fn biorthogonality() -> Outcome {
    let start = Instant::now();
    for name in BUILTIN_NAMES {
        let s = system(name);
        let (f, fs) = s.window::<Rational>(200).map_err(|e| e.to_string())?;
        for t in 0..=200 {
            for l in 0..=200 {
                let mut r = f[t].dot_exact(&fs[l]).map_err(|e| e.to_string())?;
                if t == l {
                    r -= Rational::one();
                }
                ensure(r.is_zero(), || format!("{name}: residual {r} at ({t}, {l})"))?;
            }
        }
    }
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("5 families, 201x201 pairs, max residual 0, {:?}", start.elapsed()))
}

fn xi_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_float = 0.0f64;
    for name in BUILTIN_NAMES {
        let s = system(name);
        for _ in 0..100 {
            let entries = rng.gen_range(0..=150);
            let op = random_rational_operator(&mut rng, 60, entries);
            let def = xi_definitional(&op, &s, 60).map_err(|e| e.to_string())?;
            let closed = xi_closed(&op, &s, 60).map_err(|e| e.to_string())?;
            ensure(def.values == closed.values, || format!("{name}: exact mismatch"))?;

            let mut fop = SparseOperator::<f64>::new();
            for ((i, j), _) in op.iter() {
                fop.set(i, j, rng.gen_range(-10.0..10.0));
            }
            let def = xi_definitional(&fop, &s, 60).map_err(|e| e.to_string())?.to_f64();
            let closed = xi_closed(&fop, &s, 60).map_err(|e| e.to_string())?.to_f64();
            for (x, y) in def.iter().zip(&closed) {
                let d = (x - y).abs();
                let d = if x == y { 0.0 } else { d };
                worst_float = worst_float.max(d);
            }
        }
    }
    ensure(worst_float <= 1e-10, || format!("float difference {worst_float}"))?;
    within_time(start, Duration::from_secs(10))?;
    Ok(format!("500 operators x 2 modes, exact match, float max diff {worst_float:e}, {:?}", start.elapsed()))
}

fn prefix_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut annihilators, mut perturbed, mut raw, mut failing) = (0, 0, 0, 0);
    for i in 0..500 {
        let name = BUILTIN_NAMES[i % 5];
        let s = system(name);
        let window = 20;
        let mut op = match s.kind() {
            banddensity::FamilyKind::Lw => {
                assemble_lw(&lw_witness_k1::<Rational>(s.family(), window).unwrap()).unwrap()
            }
            banddensity::FamilyKind::Penta => penta_annihilator::<Rational>(s.family(), window / 2).unwrap(),
        };
        match i % 3 {
            0 => annihilators += 1,
            1 => {
                let (r, c) = (rng.gen_range(0..=window), rng.gen_range(0..=window));
                op.add(r, c, q(rng.gen_range(1..=9), rng.gen_range(1..=9)));
                perturbed += 1;
            }
            _ => {
                let entries = rng.gen_range(1..=30);
                op = random_rational_operator(&mut rng, window, entries);
                raw += 1;
            }
        }
        let a = verify_annihilation(&op, &s, window, 0.0).map_err(|e| e.to_string())?;
        let x = verify_xi_identity(&op, &s, window, 0.0).map_err(|e| e.to_string())?;
        ensure(agree_check_by_check(&a, &x), || format!("operator {i} ({name}): reports disagree"))?;
        if !a.passed() {
            failing += 1;
        }
    }
    ensure(failing > 0 && failing < 500, || "mix lacks passing or failing operators".into())?;
    Ok(format!(
        "{annihilators} annihilators, {perturbed} perturbed, {raw} random; {failing} fail, all agree"
    ))
}

fn penta_annihilator_criterion() -> Outcome {
    let s = system("penta_geometric");
    let count = 400;
    let t = penta_annihilator::<Rational>(s.family(), count).map_err(|e| e.to_string())?;
    ensure(t.trace() == -Rational::one(), || format!("trace {}", t.trace()))?;
    let window = 2 * count;
    let rep = verify_annihilation(&t, &s, window, 0.0).map_err(|e| e.to_string())?;
    ensure(rep.passed(), || format!("{:?}", rep.first_failure()))?;
    let checked = rep.count(CheckStatus::Pass);
    ensure(checked == window - 1, || format!("{checked} indices checked"))?;
    let mu = mu_penta::<Rational>(s.family(), count - 1).map_err(|e| e.to_string())?;
    let total = mu.values.iter().fold(Rational::zero(), |acc, v| acc + v.clone().unwrap());
    let bound = Rational::one() + Rational::from_int(2) * &total;
    let mass = t.abs_sum();
    ensure(mass <= bound, || format!("mass {mass} exceeds {bound}"))?;
    Ok(format!(
        "trace -1, {checked} indices annihilated exactly, 2 boundary skipped, mass {:.6} <= {:.6}",
        mass.to_f64(),
        bound.to_f64()
    ))
}

fn penta_planar_criterion() -> Outcome {
    let f = builtin_family("penta_geometric").unwrap();
    let count = 400;
    let w = penta_witness_2d(&f, count).map_err(|e| e.to_string())?;
    let rel = verify_penta_relations(&w.u, &w.v, &f, count, 1e-9).map_err(|e| e.to_string())?;
    ensure(rel.passed(), || format!("{:?}", rel.first_failure()))?;
    for (name, seq, expected) in [("u", &w.u, &w.plan.u), ("v", &w.v, &w.plan.v)] {
        let c = verify_lengths(name, seq, expected, 1e-12);
        ensure(c.status == CheckStatus::Pass, || format!("length {name}: {c:?}"))?;
    }
    let bounds = bounds_report(&w.plan);
    ensure(bounds.passed(), || format!("{:?}", bounds.first_failure()))?;
    let mut squares = w.v.squared_lengths();
    for (n, x) in w.u.squared_lengths().into_iter().enumerate() {
        squares[n] += x;
    }
    let m = summability_monitor(&squares);
    ensure(m.monotone && m.last_decade_increment < 1e-8, || format!("increment {}", m.last_decade_increment))?;
    let worst: Vec<&str> = rel.checks.iter().map(|c| c.worst_value.as_str()).collect();
    Ok(format!(
        "relation residuals {worst:?}, lengths and bounds hold, last-decade increment {:e}",
        m.last_decade_increment
    ))
}

fn lw_witness_criterion() -> Outcome {
    let f = builtin_family("lw_geometric2").unwrap();
    let last = 1000;
    let r = lw_witness_k1::<Rational>(&f, last).map_err(|e| e.to_string())?;
    let mu = mu_lw::<Rational>(&f, last).map_err(|e| e.to_string())?;
    for n in 0..last {
        let a = f.a::<Rational>(n as i64 + 1).unwrap();
        ensure((a * &r.get(n)[0] * &r.get(n + 1)[0]).is_one(), || format!("collinear relation at {n}"))?;
    }
    for n in 0..=last {
        ensure(r.get(n)[0].abs() == mu.values[n], || format!("collinear length at {n}"))?;
    }
    let r2 = lw_witness_k2(&f, last).map_err(|e| e.to_string())?;
    let radii = lw_radii(&f, last).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in 1..=last {
        let a = f.a::<f64>(n as i64).unwrap();
        worst = worst.max((a * r2.dot_with(n, &r2, n - 1) - 1.0).abs());
    }
    ensure(worst <= 1e-10, || format!("planar relation residual {worst}"))?;
    let c = verify_lengths("r", &r2, &radii, 1e-12);
    ensure(c.status == CheckStatus::Pass, || format!("planar lengths {c:?}"))?;
    Ok(format!("collinear exact for n <= {last}, planar residual {worst:e}"))
}

fn telescoping() -> Outcome {
    for name in ["lw_linear", "lw_geometric2", "lw_paired_squares"] {
        let f = builtin_family(name).unwrap();
        let mu = mu_lw::<Rational>(&f, 1001).map_err(|e| e.to_string())?;
        for n in 2..=1000 {
            let a = f.a::<Rational>(n as i64 + 1).unwrap();
            ensure((a * &mu.values[n] * &mu.values[n + 1]).is_one(), || format!("{name} at {n}"))?;
        }
    }
    Ok("3 families, 2 <= n <= 1000, exact".into())
}

fn classification() -> Outcome {
    let start = Instant::now();
    let opts = ClassifyOptions::default();
    let lw = |name: &str, k: usize| classify_lw(&builtin_family(name).unwrap(), k, &opts).unwrap();
    let penta = |name: &str| classify_penta(&builtin_family(name).unwrap(), &opts).unwrap();
    let cases = [
        ("lw_linear k=1", lw("lw_linear", 1), DensityProperty::OnePointDense, Answer::Yes),
        ("lw_linear k=2", lw("lw_linear", 2), DensityProperty::KPointDenseKGe2, Answer::Yes),
        ("lw_paired_squares k=1", lw("lw_paired_squares", 1), DensityProperty::OnePointDense, Answer::Yes),
        ("lw_paired_squares k=2", lw("lw_paired_squares", 2), DensityProperty::KPointDenseKGe2, Answer::No),
        ("lw_geometric2 k=1", lw("lw_geometric2", 1), DensityProperty::OnePointDense, Answer::No),
        ("lw_geometric2 k=2", lw("lw_geometric2", 2), DensityProperty::KPointDenseKGe2, Answer::No),
        ("penta_unit", penta("penta_unit"), DensityProperty::RankOneDense, Answer::Yes),
        ("penta_geometric", penta("penta_geometric"), DensityProperty::RankOneDense, Answer::No),
    ];
    for (label, v, property, answer) in &cases {
        ensure(v.property == *property && v.answer == *answer && v.basis == Basis::SymbolicFact, || {
            format!("{label}: {v:?}")
        })?;
    }
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("8 verdicts from symbolic facts, {:?}", start.elapsed()))
}

fn dot(p: [f64; 2], q: [f64; 2]) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

fn triangle_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    for i in 0..1000 {
        let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let a = sign(&mut rng) * rng.gen_range(0.1..10.0);
        let b = sign(&mut rng) * rng.gen_range(0.1..10.0);
        let x: f64 = rng.gen_range(0.1..10.0);
        let y: f64 = rng.gen_range(0.1..10.0);
        let z = (1.0 / (a * x).powi(2) + 1.0 / (b * y).powi(2)).sqrt();
        let vertex = [Vertex::X, Vertex::Y, Vertex::Z][i % 3];
        let t = triangle_solve(a, b, x, y, z).map_err(|e| format!("feasible tuple rejected: {e}"))?.anchored(vertex);
        for r in [dot(t.x, t.y), dot(t.x, t.z) - 1.0 / a, dot(t.y, t.z) - 1.0 / b] {
            worst = worst.max(r.abs());
        }
        let off = z * if rng.gen_bool(0.5) { rng.gen_range(1.001..2.0) } else { rng.gen_range(0.5..0.999) };
        if triangle_solve(a, b, x, y, off).is_err() {
            rejected += 1;
        }
    }
    ensure(worst <= 1e-10, || format!("inner-product residual {worst}"))?;
    ensure(rejected == 1000, || format!("only {rejected} of 1000 infeasible tuples rejected"))?;
    Ok(format!("1000 feasible, worst residual {worst:e}; 1000 infeasible rejected"))
}

fn row_mass_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let a = q(rng.gen_range(1..=12) * if rng.gen_bool(0.5) { 1 } else { -1 }, rng.gen_range(1..=4));
        let b = q(rng.gen_range(1..=12) * if rng.gen_bool(0.5) { 1 } else { -1 }, rng.gen_range(1..=4));
        let c = q(rng.gen_range(-12..=12), rng.gen_range(1..=4));
        let f = CoefficientFamily::penta(&a.to_string(), &b.to_string(), &c.to_string(), None).unwrap();
        let n = rng.gen_range(0..6usize);
        let mut t = SparseOperator::<f64>::new();
        for _ in 0..12 {
            let (i, j) = (rng.gen_range(0..=14usize), rng.gen_range(0..=14usize));
            t.set(i, j, rng.gen_range(-3.0..3.0));
        }
        let rm = row_mass_diagnostic(&t, &f, n).map_err(|e| e.to_string())?;
        let p = f.penta_at::<f64>(n as i64).unwrap();
        let g = |x: f64| row_mass_value(p.a, p.b, p.c, p.d, rm.xi, x);
        ensure((g(rm.argmin) - rm.min).abs() <= 1e-12, || "minimum is not a value of g".into())?;
        let lo = rm.breakpoints.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rm.breakpoints.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let steps = 9_999;
        let h = (hi - lo) / steps as f64;
        let grid_min = (0..=steps).map(|k| g(lo + h * k as f64)).fold(f64::INFINITY, f64::min);
        ensure(grid_min >= rm.min - 1e-12, || format!("grid {grid_min} beats breakpoints {}", rm.min))?;
        // g is Lipschitz with constant |c/a| + 1 + |d/b|; the grid comes within half a step.
        let lip = (p.c / p.a).abs() + 1.0 + (p.d / p.b).abs();
        ensure(grid_min - rm.min <= lip * h / 2.0 + 1e-12, || "grid far above minimum".into())?;
        worst_gap = worst_gap.max(rm.min - grid_min);
    }
    Ok(format!("100 pairs, grid never below breakpoint minimum (max excess {worst_gap:e})"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("biorthogonality", biorthogonality),
        ("xi oracle equivalence", xi_oracles),
        ("annihilation vs xi identity", prefix_equivalence),
        ("pentadiagonal annihilator", penta_annihilator_criterion),
        ("pentadiagonal planar witness", penta_planar_criterion),
        ("tridiagonal witnesses", lw_witness_criterion),
        ("telescoping identity", telescoping),
        ("classification regression", classification),
        ("triangle lemma suite", triangle_suite),
        ("row-mass diagnostic", row_mass_grid),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
