//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

use std::time::Instant;

use copula_bounds::{
    bound_detailed, brute_force_2ap, brute_force_dap_vertices, certify,
    check_cyclical_monotonicity, convergence_sweep, parse_integrand, solve_hungarian,
    solve_relaxed, BoundOptions, DapInstance, DapSolution, DiscreteCopula, EnvelopeGrid,
    EnvelopeKind, GridSpec, Sense,
};
use copula_bounds_cli::{execute, Command, Options, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A solved LP together with what the certificate checks need.
struct Solved {
    label: String,
    instance: DapInstance,
    solution: DapSolution,
    copula: DiscreteCopula,
    grid: EnvelopeGrid,
}

impl Solved {
    fn new(label: String, instance: DapInstance, solution: DapSolution) -> Self {
        let copula = DiscreteCopula::from_solution(&solution).expect("copula from optimum");
        let grid = EnvelopeGrid::from_coeffs(
            instance.spec(),
            EnvelopeKind::Lower,
            instance.costs().to_vec(),
            2,
        )
        .expect("grid from costs");
        Solved {
            label,
            instance,
            solution,
            copula,
            grid,
        }
    }

    fn solve(label: String, instance: DapInstance) -> Self {
        let solution = solve_relaxed(&instance).unwrap().into_optimal().unwrap();
        Solved::new(label, instance, solution)
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn criterion_1() -> Outcome {
    let options = Options {
        d: Some(3),
        n: Some(40),
        ..Default::default()
    };
    let config = RunConfig::resolve(Command::Rho, options).unwrap();
    let start = Instant::now();
    let out = execute(&config).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let json: serde_json::Value = serde_json::from_str(&out.text).unwrap();
    let rho = json["report"]["rho_lower"].as_f64().unwrap();
    let l3 = json["report"]["l_d"].as_f64().unwrap();
    let raw = json["report"]["lower_value"].as_f64().unwrap();
    outcome(
        (rho + 0.625).abs() <= 0.005 && rho > l3 && (l3 + 2.0 / 3.0).abs() < 1e-15 && secs <= 600.0,
        format!("rho_lower = {rho:.6} (integral {raw:.8}), l_3 = {l3:.6}, {secs:.2} s"),
    )
}

fn criterion_2(solved: &mut Vec<Solved>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 3..=7 {
        for trial in 0..50 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-20..=20) as f64).collect())
                .collect();
            let sense = if trial % 2 == 0 {
                Sense::Minimize
            } else {
                Sense::Maximize
            };
            let brute = brute_force_2ap(&rows, sense).unwrap().value;
            let hungarian = solve_hungarian(&rows, sense).unwrap().value;
            let instance = DapInstance::from_matrix(&rows, sense, 1.0).unwrap();
            let s = Solved::solve(format!("2d n={n} #{trial}"), instance);
            worst = worst
                .max((s.solution.value() - brute).abs())
                .max((hungarian - brute).abs());
            solved.push(s);
            count += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{count} matrices, max |LP - brute force|, |Hungarian - brute force| = {worst:e}"),
    )
}

fn criterion_3(solved: &mut Vec<Solved>) -> Outcome {
    // The min-side gap equals 1/n exactly, so at n = 50 it sits on the
    // threshold; allow for the rounding of the two optimal values.
    const ROUNDING: f64 = 1e-12;
    let f = parse_integrand("x1*x2", 2).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for n in [10, 20, 50] {
        for (sense, target) in [(Sense::Minimize, 1.0 / 6.0), (Sense::Maximize, 1.0 / 3.0)] {
            let spec = GridSpec::new(2, n).unwrap();
            let run = bound_detailed(&f, spec, sense, &BoundOptions::default()).unwrap();
            let r = &run.report;
            ok &= r.lower_value <= target && target <= r.upper_value;
            if n == 50 && sense == Sense::Minimize {
                ok &= r.gap <= 0.02 + ROUNDING;
                lines.push(format!("gap(50) = {:?}", r.gap));
            }
            for side in [run.lower, run.upper] {
                let label = format!("x1*x2 n={n} {} {:?}", sense.short(), side.grid.kind());
                solved.push(Solved {
                    label,
                    instance: side.instance,
                    solution: side.solution,
                    copula: side.copula,
                    grid: side.grid,
                });
            }
        }
    }
    outcome(
        ok,
        format!(
            "1/6 and 1/3 enclosed for n = 10, 20, 50; {}",
            lines.join("")
        ),
    )
}

fn criterion_4(solved: &[Solved]) -> Outcome {
    let mut worst = 0.0f64;
    for s in solved {
        let target = 1.0 / s.copula.spec().n() as f64;
        for sum in s.copula.slice_sums() {
            worst = worst.max((sum - target).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!(
            "{} copulas, max |slice sum - 1/n| = {worst:e}",
            solved.len()
        ),
    )
}

fn criterion_5(solved: &mut Vec<Solved>) -> Outcome {
    let f = parse_integrand("x1*x2*x3", 3).unwrap();
    let entries = convergence_sweep(
        &f,
        3,
        Sense::Minimize,
        &[5, 10, 20],
        &BoundOptions::default(),
    )
    .unwrap();
    let reports: Vec<_> = entries.into_iter().map(|e| e.result.unwrap()).collect();
    let ok = reports.windows(2).all(|w| {
        w[1].lower_value >= w[0].lower_value
            && w[1].upper_value <= w[0].upper_value
            && w[1].gap < w[0].gap
    });
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("n={}: [{:.6}, {:.6}]", r.n, r.lower_value, r.upper_value))
        .collect();
    for n in [5, 10, 20] {
        let run = bound_detailed(
            &f,
            GridSpec::new(3, n).unwrap(),
            Sense::Minimize,
            &BoundOptions::default(),
        )
        .unwrap();
        for side in [run.lower, run.upper] {
            solved.push(Solved {
                label: format!("x1*x2*x3 n={n} {:?}", side.grid.kind()),
                instance: side.instance,
                solution: side.solution,
                copula: side.copula,
                grid: side.grid,
            });
        }
    }
    outcome(ok, summary.join(", "))
}

fn criterion_6(solved: &[Solved]) -> Outcome {
    let mut worst_dual = 0.0f64;
    let mut worst_cyclic = 0.0f64;
    let mut failures = Vec::new();
    for (k, s) in solved.iter().enumerate() {
        let dual = certify(&s.instance, &s.solution, 1e-8);
        worst_dual = worst_dual
            .max(-dual.min_reduced_cost)
            .max(dual.slackness_violation)
            .max(dual.duality_gap.abs());
        if !dual.passed {
            failures.push(format!("{} (dual)", s.label));
        }
        for tuple_size in 2..=4 {
            let cert = check_cyclical_monotonicity(
                &s.copula,
                &s.grid,
                s.instance.sense(),
                1000,
                tuple_size,
                k as u64,
            )
            .unwrap();
            worst_cyclic = worst_cyclic.max(cert.worst_violation);
            if !cert.passed || cert.worst_violation > 1e-8 {
                failures.push(format!("{} (N={tuple_size})", s.label));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} solves, worst dual residual {worst_dual:e}, worst cyclical violation \
             {worst_cyclic:e}{}",
            solved.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failed: {failures:?}")
            }
        ),
    )
}

fn criterion_7(solved: &mut Vec<Solved>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_margin = 0.0f64;
    let mut worst_volume = 0.0f64;
    let mut worst_total = 0.0f64;
    for trial in 0..20 {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(2..=if d == 4 { 4 } else { 7 });
        let spec = GridSpec::new(d, n).unwrap();
        let costs = (0..spec.cell_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let instance = DapInstance::new(spec, Sense::Minimize, costs, 1.0 / n as f64).unwrap();
        let s = Solved::solve(format!("random d={d} n={n} #{trial}"), instance);
        let c = &s.copula;
        for k in 0..d {
            for step in 0..=100 {
                let t = step as f64 / 100.0;
                let mut x = vec![1.0; d];
                x[k] = t;
                worst_margin = worst_margin.max((c.cdf(&x).unwrap() - t).abs());
            }
        }
        for flat in 0..spec.cell_count() {
            let idx = spec.unflat(flat);
            let (lo, hi) = spec.cell_bounds(&idx).unwrap();
            let v = c.c_volume(&lo, &hi).unwrap();
            worst_volume = worst_volume.max((v - c.cell_mass(&idx).unwrap()).abs());
        }
        worst_total = worst_total.max((c.cdf(&vec![1.0; d]).unwrap() - 1.0).abs());
        solved.push(s);
    }
    outcome(
        worst_margin <= 1e-9 && worst_volume <= 1e-9 && worst_total <= 1e-9,
        format!(
            "20 copulas, margin error {worst_margin:e}, cell volume error {worst_volume:e}, \
             |C(1,...,1) - 1| = {worst_total:e}"
        ),
    )
}

fn criterion_8(solved: &mut Vec<Solved>) -> Outcome {
    let spec = GridSpec::new(3, 2).unwrap();
    let mut instances = Vec::new();
    let separable: Vec<f64> = (0..8)
        .map(|f| spec.unflat(f).0.iter().sum::<usize>() as f64)
        .collect();
    for sense in [Sense::Minimize, Sense::Maximize] {
        instances.push(("separable".to_string(), sense, separable.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..40 {
        let costs = if trial % 2 == 0 {
            (0..8).map(|_| rng.random_range(-10..=10) as f64).collect()
        } else {
            (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let sense = if trial % 3 == 0 {
            Sense::Maximize
        } else {
            Sense::Minimize
        };
        instances.push((format!("random #{trial}"), sense, costs));
    }
    let mut worst = 0.0f64;
    let mut separable_value = f64::NAN;
    for (label, sense, costs) in instances {
        let instance = DapInstance::new(spec, sense, costs, 1.0).unwrap();
        let oracle = brute_force_dap_vertices(&instance).unwrap();
        let s = Solved::solve(format!("d=3 n=2 {label}"), instance);
        if label == "separable" && sense == Sense::Minimize {
            separable_value = s.solution.value();
        }
        worst = worst.max((s.solution.value() - oracle).abs());
        solved.push(s);
    }
    outcome(
        worst <= 1e-9 && (separable_value - 9.0).abs() <= 1e-9,
        format!("42 instances, max |LP - vertex enumeration| = {worst:e}, separable min = {separable_value}"),
    )
}

fn main() {
    let mut solved = Vec::new();
    // criteria 4 and 6 check every solve made by the others, so they run last
    let mut results = vec![
        ("1 rho reproduction d=3 n=40", criterion_1()),
        ("2 2D LP equals assignment", criterion_2(&mut solved)),
        ("3 2D limits 1/6 and 1/3", criterion_3(&mut solved)),
        ("5 sandwich and refinement", criterion_5(&mut solved)),
        ("7 CDF contract", criterion_7(&mut solved)),
        ("8 tiny-instance vertex oracle", criterion_8(&mut solved)),
    ];
    results.push(("4 d-fold stochasticity", criterion_4(&solved)));
    results.push(("6 optimality certificates", criterion_6(&solved)));
    results.sort_by_key(|(name, _)| name.split(' ').next().unwrap().parse::<u32>().unwrap());

    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
