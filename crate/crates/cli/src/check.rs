//! `btnslab check`: a fast self-test of the core invariants.

use std::time::Instant;

use btnslab::contraction::fidelity;
use btnslab::models::{psi_l, psi_l_padded, t_state, w_distance_sq_closed_form, w_state, approximation_tradeoff};
use btnslab::variational::objective_value;
use btnslab::{
    border_rank_expectation, btns_evaluate, build_graph, build_weight_state, ed_ground_state, expectation_exact,
    heisenberg_ring, mps_strategy_expectation, random_init, separation_hamiltonian, snake_path, stable_interpolate,
    tns_evaluate, weight_coefficient, weight_mps, weighted_truncate, GraphKind, InterpolationPlan, Objective,
    WeightSpec, C64,
};

use crate::Failure;

type Check = btnslab::Result<Result<String, String>>;

fn verdict(ok: bool, msg: String) -> Result<String, String> {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn coefficients() -> Check {
    let bad = (0..=8u32)
        .flat_map(|a| (0..=a).map(move |alpha| (alpha, a)))
        .filter(|&(alpha, a)| {
            let fact: u64 = (1..=a as u64).product();
            weight_coefficient(alpha, a) != if alpha < a { 0u64.into() } else { fact.into() }
        })
        .count();
    Ok(verdict(bad == 0, format!("{bad} wrong coefficients for a ≤ 8")))
}

fn weight_states() -> Check {
    let mut bad = 0;
    for a in 1..=3 {
        for len in 1..=6 {
            let spec = WeightSpec::new(a, a, len)?;
            bad += usize::from(tns_evaluate(&weight_mps(spec)?)? != build_weight_state(spec)?);
        }
    }
    Ok(verdict(bad == 0, format!("{bad} MPS mismatches for a ≤ 3, L ≤ 6")))
}

fn separation_ground_state() -> Check {
    let ed = ed_ground_state(&separation_hamiltonian(5)?)?;
    let f = fidelity(&ed.state, &psi_l(5)?.state)?;
    let ok = (ed.energy - 0.1).abs() <= 1e-9 && ed.ti_unique && f >= 1.0 - 1e-9;
    Ok(verdict(ok, format!("L=5: E0 = {:.12}, overlap {f:.12}", ed.energy)))
}

fn exact_representations() -> Check {
    let mut worst: f64 = 1.0;
    for k in [psi_l(5)?, psi_l(7)?, t_state()?] {
        let rep = k.btns.as_ref().expect("shipped representation");
        worst = worst.min(fidelity(&btns_evaluate(rep)?, &k.state)?);
    }
    Ok(verdict(worst >= 1.0 - 1e-10, format!("lowest fidelity {worst:.12}")))
}

fn strategies() -> Check {
    let mut worst: f64 = 0.0;
    for (i, len) in (3..=5).enumerate() {
        let shape = build_graph(GraphKind::Ring { len }, 2, 2)?;
        let rep = random_init(&shape, 2, 1, 17 + i as u64)?;
        let h = heisenberg_ring(len)?;
        let exact = expectation_exact(&btns_evaluate(&rep)?, &h)?;
        let path = snake_path(&shape)?;
        let mps = mps_strategy_expectation(&rep, &path, Some(&h))?.re / mps_strategy_expectation(&rep, &path, None)?.re;
        let plan = InterpolationPlan::for_rep(&rep);
        let border = border_rank_expectation(&rep, Some(&h), &plan)?.re / border_rank_expectation(&rep, None, &plan)?.re;
        worst = worst.max((exact - mps).abs()).max((exact - border).abs());
    }
    Ok(verdict(worst <= 1e-7, format!("largest gap {worst:.1e} on rings of 3 to 5")))
}

fn interpolation() -> Check {
    let mut worst: f64 = 0.0;
    for k in 1..=16usize {
        let coeffs: Vec<C64> = (0..k).map(|j| C64::new((j as f64 + 0.5).sin(), (j as f64 * 1.3).cos())).collect();
        let nodes = InterpolationPlan::new(k, k - 1, 2)?.nodes();
        let samples: Vec<C64> = nodes
            .iter()
            .map(|&z| z.powi(2) * coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c))
            .collect();
        worst = worst.max((stable_interpolate(&samples, 2) - coeffs[0]).norm());
    }
    Ok(verdict(worst <= 1e-12, format!("recovery error {worst:.1e}")))
}

fn gradient() -> Check {
    let shape = build_graph(GraphKind::Ring { len: 4 }, 2, 2)?;
    let rep = random_init(&shape, 1, 1, 5)?;
    let obj = Objective::Energy(heisenberg_ring(4)?);
    let (_, grads) = btnslab::objective_and_gradient(&rep, &obj)?;
    let scale = grads.iter().map(|g| g.max_abs()).fold(0.0, f64::max);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (v, g) in grads.iter().enumerate() {
        for k in (0..g.len()).step_by(3) {
            let at = |s: f64| -> btnslab::Result<f64> {
                let mut r = rep.clone();
                let mut m = r.map(v).clone();
                m.data_mut()[k] += C64::new(s * h, 0.0);
                r.set_map(v, m)?;
                objective_value(&r, &obj)
            };
            let fd = (at(1.0)? - at(-1.0)?) / (2.0 * h);
            worst = worst.max((fd - g.data()[k].re).abs() / scale);
        }
    }
    Ok(verdict(worst <= 1e-5, format!("relative error {worst:.1e}")))
}

fn truncation() -> Check {
    let rep = psi_l_padded(5)?;
    let f = fidelity(&btns_evaluate(&weighted_truncate(&rep, 0, 2, 0.3)?)?, &psi_l(5)?.state)?;
    let lost = btns_evaluate(&weighted_truncate(&rep, 0, 2, 1.0)?)?.norm() / btns_evaluate(&rep)?.norm();
    Ok(verdict(f >= 1.0 - 1e-10 && lost <= 1e-12, format!("p=0.3 fidelity {f:.12}, p=1 norm {lost:.1e}")))
}

fn tradeoff() -> Check {
    let grid: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let w = w_state(6)?;
    let rows = approximation_tradeoff(w.degeneration.as_ref().expect("shipped curve"), &grid)?;
    let gap = rows.iter().map(|r| (r.distance.powi(2) - w_distance_sq_closed_form(6, r.eps)).abs()).fold(0.0, f64::max);
    let ok = gap <= 1e-9 && rows.iter().all(|r| r.within_bound());
    Ok(verdict(ok, format!("W L=6 closed form gap {gap:.1e}")))
}

/// Runs every check, printing one line each; fails if any check fails.
pub fn check() -> Result<(), Failure> {
    let checks: [(&str, fn() -> Check); 9] = [
        ("weight coefficients", coefficients),
        ("weight-state MPS", weight_states),
        ("separation ground state", separation_ground_state),
        ("exact representations", exact_representations),
        ("contraction strategies", strategies),
        ("stable interpolation", interpolation),
        ("energy gradient", gradient),
        ("weighted truncation", truncation),
        ("approximation tradeoff", tradeoff),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Err(e.to_string()));
        let took = start.elapsed();
        match outcome {
            Ok(msg) => println!("ok    {name}: {msg} [{took:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg} [{took:.2?}]");
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Other(anyhow::anyhow!("{failed} checks failed")))
    }
}
