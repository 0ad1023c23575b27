//! Acceptance suite. Prints one PASS/FAIL line per criterion and always exits
//! successfully; a FAIL is a finding, not a crash.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistwave_core::*;

const BESSEL_SQ: f64 = 5.783185962946784;

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(lines: &[Line]) {
    println!();
    for l in lines {
        println!("criterion {:>2}: {}  {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} passed", lines.len());
}

fn disc_energy(inv: f64) -> (GroundState, f64) {
    let t = Instant::now();
    let cs = build_cross_section(&ShapeSpec::Disc, 1.0 / inv).unwrap();
    let g = ground_state(&assemble_h_beta0(&cs, 1.0)).unwrap();
    (g, t.elapsed().as_secs_f64())
}

fn criteria_1_2() -> Vec<Line> {
    let (fine, secs) = disc_energy(64.0);
    let (coarse, _) = disc_energy(32.0);
    let err_f = (fine.energy - BESSEL_SQ).abs() / BESSEL_SQ;
    let err_c = (coarse.energy - BESSEL_SQ).abs() / BESSEL_SQ;
    let ratio = err_c / err_f;
    vec![
        Line {
            id: 1,
            pass: err_f < 0.01 && fine.margin > 0.0 && secs < 60.0,
            detail: format!(
                "E = {:.8} (rel err {err_f:.3e}), min f = {:.3e}, {secs:.1} s",
                fine.energy, fine.margin
            ),
        },
        Line {
            id: 2,
            pass: (3.0..=5.0).contains(&ratio),
            detail: format!("err(1/32) = {err_c:.3e}, err(1/64) = {err_f:.3e}, ratio {ratio:.3}"),
        },
    ]
}

fn criterion_3() -> Line {
    let cs = build_cross_section(&ShapeSpec::Disc, 1.0 / 64.0).unwrap();
    let p = TwistProfile::new(1.0, 0.005, 1.0).unwrap();
    let r = compute_bound(&cs, &p, &BoundConfig::default()).unwrap();
    let gate = r.convergence.as_ref().unwrap();
    let pass = r.bound <= 1e-3 && 3.0 * r.bound <= gate.bound_coarse;
    Line {
        id: 3,
        pass,
        detail: format!(
            "bound(1/64) = {:.3e}, bound(1/32) = {:.3e}, label {}",
            r.bound, gate.bound_coarse, r.label
        ),
    }
}

fn criterion_4() -> Line {
    let p = TwistProfile::new(1.0, 0.005, 1.0).unwrap();
    let cfg = BoundConfig { gate: false, ..Default::default() };
    let eps = [0.05, 0.1, 0.2];
    let runs: Vec<BoundReport> = eps
        .iter()
        .map(|&e| {
            let cs = build_cross_section(&ShapeSpec::Ellipse { eccentricity: e }, 1.0 / 32.0).unwrap();
            compute_bound(&cs, &p, &cfg).unwrap()
        })
        .collect();
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = runs.iter().map(|r| r.bound.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let mid = &runs[0].per_s[runs[0].n_q / 2];
    Line {
        id: 4,
        pass: (1.6..=2.4).contains(&slope) && mid.n_neg == 1,
        detail: format!(
            "bounds {:.3e} {:.3e} {:.3e}, slope {slope:.3} (target [1.6, 2.4]), n_neg(H(0)) at eps=0.05: {}",
            runs[0].bound, runs[1].bound, runs[2].bound, mid.n_neg
        ),
    }
}

fn criterion_5() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [1u32, 2] {
        let cs = build_cross_section(&ShapeSpec::ribbon(k), 1.0 / 64.0).unwrap();
        let g = ground_state(&assemble_h_beta0(&cs, 1.0)).unwrap();
        let ratio = angular_energy_ratio(&cs, &g.vector);
        let floor = 4f64.powi(k as i32 + 1) / std::f64::consts::PI.powi(2);
        pass &= ratio > floor;
        parts.push(format!("k={k}: {ratio:.4} > {floor:.4}"));
    }
    Line { id: 5, pass, detail: parts.join(", ") }
}

fn criterion_6() -> Line {
    let cs = build_cross_section(&ShapeSpec::ribbon(1), 1.0 / 64.0).unwrap();
    let gamma = gamma_beta0(1.0, 2.0);
    let c = gamma / 6.0;
    let a2 = alpha_sq(gamma, c).unwrap();
    let p = TwistProfile::new(1.0, 0.9 * c, 1.0).unwrap();
    // three Simpson nodes: only s = 0 lies inside the support
    let cfg = BoundConfig { n_q: 3, gate: false, c: Some(c), ..Default::default() };
    let r = compute_bound(&cs, &p, &cfg).unwrap();
    let lambda = r.per_s[1].lowest.unwrap_or(0.0);
    let h0 = assemble_h_beta0(&cs, 1.0);
    let g = ground_state(&h0).unwrap();
    let af2 = angular_energy_ratio(&cs, &g.vector);
    let mu = p.mu(0.0);
    let rhs = -(mu * (2.0 - mu) / a2) * af2;
    let slack = 1e-8 * h0.scale();
    Line {
        id: 6,
        pass: lambda <= rhs + slack,
        detail: format!("lambda(0) = {lambda:.6}, rhs = {rhs:.6}, slack {slack:.3e}"),
    }
}

fn criterion_7() -> Line {
    let cs = build_cross_section(&ShapeSpec::Ellipse { eccentricity: 0.3 }, 1.0 / 16.0).unwrap();
    let p = TwistProfile::new(1.0, 0.005, 1.0).unwrap();
    let direct = direct_spectrum(&cs, &p, 1.5, &DirectConfig { l_trunc: Some(3.0), ..Default::default() }).unwrap();
    let r = compute_bound(&cs, &p, &BoundConfig { gate: false, ..Default::default() }).unwrap();
    let v = verify_inequality(&direct, &r);
    Line {
        id: 7,
        pass: v.verdict == Verdict::Pass,
        detail: format!(
            "moment = {:.3e} ({} states), bound = {:.3e}, h = 1/16, n_s = {}",
            v.moment,
            direct.eigenvalues.len(),
            v.bound,
            direct.n_s
        ),
    }
}

fn criterion_8() -> Line {
    let g = gamma_beta0(1.0, 2.0) == 1.0 / 192.0;
    let l32 = lt_constant(1.5).unwrap() == 3.0 / 16.0;
    let l12 = lt_constant(0.5).unwrap() == 0.5;
    let rej = alpha_sq(0.3, 0.1).is_err() && alpha_sq(0.3, 0.2).is_err() && alpha_sq(0.3, 0.05).is_ok();
    Line {
        id: 8,
        pass: g && l32 && l12 && rej,
        detail: format!("gamma {g}, L(3/2) {l32}, L(1/2) {l12}, c >= gamma/3 rejected {rej}"),
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> SparseSymOperator {
    let n = rng.gen_range(40..=400);
    let density = rng.gen_range(0.01..0.1);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, rng.gen_range(-1.0..1.0)));
        for j in 0..i {
            if rng.gen::<f64>() < density {
                let v = rng.gen_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
    }
    SparseSymOperator::new(CsrMatrix::from_triplets(n, n, &t), Provenance::External).unwrap()
}

fn criterion_9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    let mut ok = 0;
    for _ in 0..20 {
        let m = random_instance(&mut rng);
        let it = lobpcg(&m, 4, &EigenOptions::default(), &[]).unwrap();
        let dense = dense_eigs(&m, 4);
        let dev = it
            .eigenvalues
            .iter()
            .zip(&dense.eigenvalues)
            .map(|(a, b)| (a - b).abs() / m.scale())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        if dev <= 1e-8 {
            ok += 1;
        }
    }
    Line { id: 9, pass: ok == 20, detail: format!("{ok}/20 instances, worst deviation {worst:.3e} x scale") }
}

fn criterion_10() -> Line {
    let cs = build_cross_section(&ShapeSpec::Ellipse { eccentricity: 0.3 }, 1.0 / 16.0).unwrap();
    let p = TwistProfile::new(1.0, 0.005, 1.0).unwrap();
    let cfg = BoundConfig::default();
    let a = serde_json::to_vec_pretty(&compute_bound(&cs, &p, &cfg).unwrap()).unwrap();
    let b = serde_json::to_vec_pretty(&compute_bound(&cs, &p, &cfg).unwrap()).unwrap();
    Line { id: 10, pass: a == b, detail: format!("two report bodies of {} bytes, identical: {}", a.len(), a == b) }
}

fn main() {
    let t = Instant::now();
    let mut lines = criteria_1_2();
    lines.push(criterion_3());
    lines.push(criterion_4());
    lines.push(criterion_5());
    lines.push(criterion_6());
    lines.push(criterion_7());
    lines.push(criterion_8());
    lines.push(criterion_9());
    lines.push(criterion_10());
    report(&lines);
    println!("acceptance wall time {:.0} s", t.elapsed().as_secs_f64());
}
