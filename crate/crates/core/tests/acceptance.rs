//! Acceptance runner: one PASS/FAIL line per criterion.
//!
//! `cargo test -p cesolve-core --test acceptance` runs everything; pass
//! criterion numbers after `--` to run a subset. Failures are reported but
//! only turn into a non-zero exit status when `CESOLVE_ACCEPTANCE_STRICT` is
//! set.

mod common;

use std::time::{Duration, Instant};

use cesolve_core::experiment::{paired_difference, to_csv_string, MeanStderr};
use cesolve_core::linalg::{frobenius, hermitian_eigenvalues};
use cesolve_core::{
    eta, fourier_basis, gen_independent_ensemble, gen_joint_ensemble, gen_ula_ensemble, jade_diagonalize,
    majorization_check, pgd_solve, project, random_unitary, run_study, summarize, ExperimentConfig,
    HermitianCovariance, Init, JacobiConfig, Method, ObjectiveContext, PgdConfig, ResultRecord, StepRule, Study,
    UlaParams,
};
use common::{gaussian_matrix, gradient_fd_error, hessian_fd, random_circulant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..10 {
        let e = gen_independent_ensemble(8, 4, seed).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let u = random_unitary(8, 1000 + seed);
        worst = worst.max(gradient_fd_error(&ctx, u.matrix(), 1e-5));
    }
    outcome(
        worst <= 1e-6,
        format!("worst relative error {worst:.2e} over 10 instances"),
    )
}

fn hessian_correctness() -> Outcome {
    let mut worst = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for seed in 0..5 {
        let e = gen_independent_ensemble(4, 2, seed).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let u = random_unitary(4, 2000 + seed);
        for m in 0..4 {
            let analytic = ctx.hessian_block(u.matrix(), m).unwrap();
            let fd = hessian_fd(&ctx, u.matrix(), m, m, 1e-5);
            worst = worst.max(frobenius(&(fd - &analytic)) / frobenius(&analytic));
            let (a, b) = ctx.hessian_terms(u.matrix(), m).unwrap();
            for term in [a, b] {
                min_eig = min_eig.min(*hermitian_eigenvalues(&term).last().unwrap());
            }
        }
    }
    outcome(
        worst <= 1e-5 && min_eig >= -1e-10,
        format!("worst relative error {worst:.2e}, smallest term eigenvalue {min_eig:.2e}"),
    )
}

fn projection_optimality() -> Outcome {
    let mut beaten = 0usize;
    let mut worst_idem = 0.0_f64;
    let mut worst_inv = 0.0_f64;
    for seed in 0..10 {
        let v = gaussian_matrix(8, 3000 + seed);
        let p = project(&v).unwrap();
        let best = frobenius(&(&v - p.matrix()));
        for q in 0..10_000 {
            let other = random_unitary(8, 1_000_000 * (seed + 1) + q);
            if frobenius(&(&v - other.matrix())) < best {
                beaten += 1;
            }
        }
        let pp = project(p.matrix()).unwrap();
        worst_idem = worst_idem.max(frobenius(&(pp.matrix() - p.matrix())));
        let w = random_unitary(8, 4000 + seed);
        let z = random_unitary(8, 5000 + seed);
        let lhs = project(&(w.matrix() * &v * z.matrix())).unwrap();
        worst_inv = worst_inv.max(frobenius(&(lhs.matrix() - w.matrix() * p.matrix() * z.matrix())));
    }
    outcome(
        beaten == 0 && worst_idem <= 1e-9 && worst_inv <= 1e-9,
        format!("{beaten} closer samples in 10^5, idempotence {worst_idem:.1e}, invariance {worst_inv:.1e}"),
    )
}

fn monotone_descent() -> Outcome {
    let params = UlaParams::with_rank(8);
    let mut violations = 0usize;
    let mut worst_defect = 0.0_f64;
    let mut parts = Vec::new();
    for kind in ["joint", "independent", "ula"] {
        let mut iters = 0usize;
        for seed in 0..100 {
            let e = match kind {
                "joint" => gen_joint_ensemble(16, 8, seed),
                "independent" => gen_independent_ensemble(16, 8, seed),
                _ => gen_ula_ensemble(16, 8, &params, seed),
            }
            .unwrap();
            let ctx = ObjectiveContext::new(&e.covariances).unwrap();
            let config = PgdConfig {
                step_rule: StepRule::LipschitzBacktracking,
                init: Init::Random(7000 + seed),
                ..PgdConfig::default()
            };
            let r = pgd_solve(&ctx, &config).unwrap();
            iters += r.trace.iterations();
            violations += r
                .trace
                .records
                .windows(2)
                .filter(|w| w[1].cost > w[0].cost + 1e-12)
                .count();
            worst_defect = r
                .trace
                .records
                .iter()
                .fold(worst_defect, |acc, rec| acc.max(rec.defect));
        }
        parts.push(format!("{kind} {iters} iterations"));
    }
    outcome(
        violations == 0 && worst_defect <= 1e-10,
        format!(
            "{violations} violations, worst defect {worst_defect:.1e} ({})",
            parts.join(", ")
        ),
    )
}

fn global_optimality() -> Outcome {
    let mut hits = 0usize;
    let mut worst = 0.0_f64;
    for seed in 0..100 {
        let e = gen_joint_ensemble(16, 8, seed).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let optimum = ctx.cost(e.common_basis.as_ref().unwrap().matrix()).unwrap();
        let config = PgdConfig {
            init: Init::Random(8000 + seed),
            ..PgdConfig::default()
        };
        let r = pgd_solve(&ctx, &config).unwrap();
        let rel = (r.final_cost - optimum) / optimum.abs();
        worst = worst.max(rel);
        if rel <= 1e-6 {
            hits += 1;
        }
    }
    let mut cost_violations = 0usize;
    let mut majorization_violations = 0usize;
    for seed in 0..10 {
        let e = gen_joint_ensemble(16, 8, 500 + seed).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let uc = e.common_basis.as_ref().unwrap().matrix();
        let best = ctx.cost(uc).unwrap();
        let at_c = ctx.quadratic_forms(uc).unwrap();
        for q in 0..10_000 {
            let u = random_unitary(16, 10_000_000 * (seed + 1) + q);
            if ctx.cost(u.matrix()).unwrap() < best {
                cost_violations += 1;
            }
            for (x, y) in at_c.iter().zip(ctx.quadratic_forms(u.matrix()).unwrap()) {
                if !majorization_check(x, &y).unwrap() {
                    majorization_violations += 1;
                }
            }
        }
    }
    outcome(
        hits >= 95 && cost_violations == 0 && majorization_violations == 0,
        format!(
            "{hits}/100 within 1e-6 (worst {worst:.1e}); {cost_violations} cost and \
             {majorization_violations} majorization violations over 10^5 samples"
        ),
    )
}

fn study(study: Study) -> Vec<ResultRecord> {
    let mut config = ExperimentConfig::for_study(study);
    config.trials = 100;
    run_study(&config, threads()).unwrap()
}

fn failures(rows: &[ResultRecord]) -> usize {
    rows.iter().filter(|r| r.status.starts_with("error")).count()
}

fn fmt_curve(points: &[(usize, MeanStderr)]) -> String {
    points
        .iter()
        .map(|(g, m)| format!("{g}:{:.4}±{:.4}", m.mean, m.stderr))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fig1_trend() -> Outcome {
    let rows = study(Study::Fig1);
    let gaps = paired_difference(&rows, Method::OracleCes, Method::Pgd, |r| r.cost);
    let positive = gaps.iter().all(|(_, d)| d.mean > 0.0);
    let mut inversions = 0usize;
    let mut inversion_ok = true;
    for w in gaps.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if b.mean > a.mean {
            inversions += 1;
            inversion_ok &= b.mean - a.mean <= a.stderr.max(b.stderr);
        }
    }
    outcome(
        positive && inversions <= 1 && inversion_ok && failures(&rows) == 0,
        format!("gap by N {}; {inversions} inversions", fmt_curve(&gaps)),
    )
}

fn eta_means(rows: &[ResultRecord], method: Method) -> Vec<(usize, MeanStderr)> {
    summarize(rows)
        .into_iter()
        .filter(|s| s.method == method)
        .map(|s| (s.grid, s.eta))
        .collect()
}

fn fig2_claim() -> Outcome {
    let rows = study(Study::Fig2);
    let pgd = eta_means(&rows, Method::Pgd);
    let jade = eta_means(&rows, Method::Jade);
    let better = pgd.iter().zip(&jade).all(|(p, j)| p.1.mean < j.1.mean);
    outcome(
        better && failures(&rows) == 0,
        format!("eta pgd {} | jade {}", fmt_curve(&pgd), fmt_curve(&jade)),
    )
}

fn fig3_claim() -> Outcome {
    let rows = study(Study::Fig3);
    let pgd = eta_means(&rows, Method::Pgd);
    let fourier = eta_means(&rows, Method::Fourier);
    let better = pgd.iter().zip(&fourier).all(|(p, f)| p.1.mean < f.1.mean);
    let gaps = paired_difference(&rows, Method::Fourier, Method::Pgd, |r| r.eta);
    let shrinking = match (gaps.first(), gaps.last()) {
        (Some(first), Some(last)) => last.1.mean < first.1.mean,
        _ => false,
    };
    outcome(
        better && shrinking && failures(&rows) == 0,
        format!(
            "eta pgd {} | fourier {} | gap {}",
            fmt_curve(&pgd),
            fmt_curve(&fourier),
            fmt_curve(&gaps)
        ),
    )
}

fn oracle_zeros() -> Outcome {
    let mut ces = 0.0_f64;
    let mut jade_joint = 0.0_f64;
    let mut jade_single = 0.0_f64;
    let mut circulant = 0.0_f64;
    for seed in 0..10 {
        let joint = gen_joint_ensemble(16, 8, 900 + seed).unwrap();
        ces = ces.max(eta(joint.common_basis.as_ref().unwrap(), &joint.covariances).unwrap());
        let v = jade_diagonalize(&joint.covariances, &JacobiConfig::default()).unwrap();
        jade_joint = jade_joint.max(eta(&v, &joint.covariances).unwrap());
        let single = gen_independent_ensemble(16, 1, 900 + seed).unwrap();
        let v = jade_diagonalize(&single.covariances, &JacobiConfig::default()).unwrap();
        jade_single = jade_single.max(eta(&v, &single.covariances).unwrap());
        let dim = 4 + 3 * seed as usize;
        let c = HermitianCovariance::new(random_circulant(dim, seed)).unwrap();
        circulant = circulant.max(eta(&fourier_basis(dim), &[c]).unwrap());
    }
    outcome(
        ces <= 1e-12 && jade_joint <= 1e-8 && jade_single <= 1e-8 && circulant <= 1e-10,
        format!(
            "eta at common basis {ces:.1e}, jade commuting {jade_joint:.1e}, jade K=1 {jade_single:.1e}, \
             fourier circulant {circulant:.1e}"
        ),
    )
}

fn reproducibility() -> Outcome {
    let wide = threads().max(4);
    let mut mismatched = Vec::new();
    for study in [Study::Fig1, Study::Fig2, Study::Fig3, Study::Custom] {
        let mut config = ExperimentConfig::for_study(study);
        config.trials = 8;
        if study == Study::Fig3 {
            config.grid = vec![8, 16];
        } else {
            config.grid = vec![16, 64];
        }
        let first = to_csv_string(&run_study(&config, 1).unwrap(), false);
        let second = to_csv_string(&run_study(&config, wide).unwrap(), false);
        if first != second {
            mismatched.push(study.to_string());
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("1 vs {wide} workers, mismatched studies: {mismatched:?}"),
    )
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            1,
            "gradient correctness",
            Some(Duration::from_secs(10)),
            gradient_correctness,
        ),
        (2, "hessian correctness", None, hessian_correctness),
        (3, "projection optimality", None, projection_optimality),
        (4, "monotone descent", None, monotone_descent),
        (
            5,
            "global optimality on joint ensembles",
            Some(Duration::from_secs(180)),
            global_optimality,
        ),
        (6, "cost gap trend in N", Some(Duration::from_secs(600)), fig1_trend),
        (7, "pgd beats jade in eta", Some(Duration::from_secs(600)), fig2_claim),
        (
            8,
            "pgd beats fourier in eta",
            Some(Duration::from_secs(600)),
            fig3_claim,
        ),
        (9, "oracle zeros", None, oracle_zeros),
        (10, "reproducibility across workers", None, reproducibility),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, limit, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = result.pass && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{} [{id:>2}] {name}: {} ({:.1}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        if std::env::var_os("CESOLVE_ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
