use super::*;
use crate::graph::{build_graph, NetworkShape};
use crate::models::{heisenberg_ring, psi_l, psi_l_padded, separation_hamiltonian, LocalTerm};
use crate::network::{apply_local, btns_evaluate, expectation_exact, random_init, random_init_ti};
use crate::tensor::{svd, ONE, ZERO};
use rand::Rng;

fn ring(l: usize, d: usize, p: usize) -> NetworkShape {
    build_graph(GraphKind::Ring { len: l }, d, p).unwrap()
}

/// Largest entrywise deviation from central differences, relative to the
/// largest gradient entry.
fn fd_error(rep: &BtnsRep, obj: &Objective, grads: &[Tensor]) -> f64 {
    let h = 1e-5;
    let scale = grads.iter().map(|g| g.max_abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (v, g) in grads.iter().enumerate() {
        for k in 0..g.len() {
            for dir in [C64::new(h, 0.0), C64::new(0.0, h)] {
                let shifted = |sign: f64| {
                    let mut r = rep.clone();
                    let mut m = r.map(v).clone();
                    m.data_mut()[k] += dir * sign;
                    r.set_map(v, m).unwrap();
                    objective_value(&r, obj).unwrap()
                };
                let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
                let analytic = if dir.re != 0.0 { g.data()[k].re } else { g.data()[k].im };
                worst = worst.max((fd - analytic).abs() / scale);
            }
        }
    }
    worst
}

#[test]
fn energy_value_matches_exact() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 3).unwrap();
    let h = heisenberg_ring(4).unwrap();
    let (f, _) = energy_and_gradient(&rep, &h).unwrap();
    let exact = expectation_exact(&btns_evaluate(&rep).unwrap(), &h).unwrap();
    assert!((f - exact).abs() < 1e-10);
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 11).unwrap();
    let obj = Objective::Energy(heisenberg_ring(4).unwrap());
    let (_, grads) = objective_and_gradient(&rep, &obj).unwrap();
    assert!(fd_error(&rep, &obj, &grads) < 1e-5);
}

#[test]
fn sandwich_gradient_matches_dense() {
    let g = build_graph(GraphKind::Grid { rows: 2, cols: 3 }, 2, 2).unwrap();
    let rep = random_init(&g, 2, 1, 8).unwrap();
    let h = Hamiltonian::new(
        g.clone(),
        g.edges()
            .iter()
            .enumerate()
            .map(|(k, &(u, v))| LocalTerm {
                support: vec![u, v],
                matrix: heisenberg_ring(4).unwrap().edge_matrix(0).unwrap().scale_real(1.0 + 0.1 * k as f64),
            })
            .collect(),
    )
    .unwrap();
    let (f, grads) = energy_and_gradient(&rep, &h).unwrap();
    let obj = Objective::Energy(h);
    let engine = Engine::new(&rep, &obj).unwrap();
    let env = DenseEnvironment::new(&engine.embedding.embed(&rep).unwrap()).unwrap();
    let (fd, y) = obj.value_and_direction(env.state()).unwrap();
    assert!((f - fd).abs() < 1e-12 * fd.abs().max(1.0));
    assert!((engine.value(&rep).unwrap() - fd).abs() < 1e-12 * fd.abs().max(1.0));
    for (v, g) in grads.iter().enumerate() {
        let dense = engine.embedding.pullback(v, &env.hole(v, &y).unwrap()).unwrap().scale_real(2.0);
        assert!(g.sub(&dense).unwrap().max_abs() < 1e-11 * dense.max_abs().max(1e-3));
    }
}

#[test]
fn overlap_gradient_matches_finite_differences() {
    let g = ring(3, 2, 3);
    let rep = random_init(&g, 2, 1, 5).unwrap();
    let target = btns_evaluate(&random_init(&g, 1, 1, 6).unwrap()).unwrap();
    let obj = Objective::neg_overlap(&target).unwrap();
    let (f, grads) = objective_and_gradient(&rep, &obj).unwrap();
    assert!((0.0..=1.0).contains(&f));
    assert!(fd_error(&rep, &obj, &grads) < 1e-5);
}

#[test]
fn shared_gradient_matches_finite_differences() {
    let g = ring(5, 2, 2);
    let rep = random_init_ti(&g, 1, 1, 2).unwrap();
    let h = heisenberg_ring(5).unwrap();
    let (_, grads) = energy_and_gradient(&rep, &h).unwrap();
    let shared = translation_invariant_gradient(&rep, &grads).unwrap();
    let canon = ring_map_to_canonical(&g, 0, rep.map(0)).unwrap();
    let f = |c: &Tensor| {
        let r = BtnsRep::translation_invariant(g.clone(), 1, 1, c).unwrap();
        expectation_exact(&btns_evaluate(&r).unwrap(), &h).unwrap()
    };
    let step = 1e-5;
    for k in 0..canon.len() {
        let mut plus = canon.clone();
        let mut minus = canon.clone();
        plus.data_mut()[k] += C64::new(0.0, step);
        minus.data_mut()[k] -= C64::new(0.0, step);
        let fd = (f(&plus) - f(&minus)) / (2.0 * step);
        assert!((fd - shared.data()[k].im).abs() < 1e-5 * shared.max_abs());
    }
}

#[test]
fn eigenstate_is_stationary() {
    let rep = psi_l(5).unwrap().btns.unwrap();
    let h = separation_hamiltonian(5).unwrap();
    let (f, grads) = energy_and_gradient(&rep, &h).unwrap();
    assert!((f - 0.1).abs() < 1e-12);
    let norm: f64 = grads.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    assert!(norm <= 1e-8);
}

#[test]
fn descent_stops_at_optimum() {
    let rep = psi_l(5).unwrap().btns.unwrap();
    let obj = Objective::Energy(separation_hamiltonian(5).unwrap());
    for ti in [false, true] {
        let cfg = OptimizerConfig { translation_invariant: ti, ..Default::default() };
        let (_, trace) = gradient_descent(&rep, &obj, &cfg).unwrap();
        assert!(trace.len() <= 2, "{} rows", trace.len());
        assert!((trace.last().unwrap().objective - 0.1).abs() < 1e-12);
    }
}

#[test]
fn descent_is_monotone() {
    let g = ring(4, 2, 2);
    let obj = Objective::Energy(heisenberg_ring(4).unwrap());
    for (ti, seed) in [(false, 1), (true, 2)] {
        let rep = if ti { random_init_ti(&g, 1, 1, seed) } else { random_init(&g, 1, 1, seed) }.unwrap();
        let cfg = OptimizerConfig { max_iters: 25, translation_invariant: ti, ..Default::default() };
        let (out, trace) = gradient_descent(&rep, &obj, &cfg).unwrap();
        assert!(trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert!(trace.last().unwrap().objective < trace[0].objective);
        let exact = expectation_exact(&btns_evaluate(&out).unwrap(), &heisenberg_ring(4).unwrap()).unwrap();
        assert!((exact - trace.last().unwrap().objective).abs() < 1e-10);
        assert!(exact >= -8.0 - 1e-9);
    }
}

#[test]
fn descent_rejects_bad_config_and_non_ti_start() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 1).unwrap();
    let obj = Objective::Energy(heisenberg_ring(4).unwrap());
    let bad = OptimizerConfig { armijo_factor: 1.5, ..Default::default() };
    assert!(gradient_descent(&rep, &obj, &bad).is_err());
    let ti = OptimizerConfig { translation_invariant: true, ..Default::default() };
    assert!(matches!(gradient_descent(&rep, &obj, &ti), Err(Error::Argument(_))));
}

#[test]
fn descent_recovers_from_zero_map() {
    let g = ring(4, 2, 2);
    let mut rep = random_init(&g, 1, 1, 1).unwrap();
    rep.set_map(2, Tensor::zeros(rep.map(2).shape())).unwrap();
    let obj = Objective::Energy(heisenberg_ring(4).unwrap());
    let cfg = OptimizerConfig { max_iters: 3, ..Default::default() };
    let (out, trace) = gradient_descent(&rep, &obj, &cfg).unwrap();
    assert!(trace.iter().all(|r| r.objective.is_finite()));
    assert!(btns_evaluate(&out).unwrap().norm() > 0.0);
}

#[test]
fn zero_hamiltonian_gate_is_identity() {
    let gate = trotter_gate(&Tensor::zeros(&[4, 4]), 0.1).unwrap();
    assert_eq!(gate.len(), 1);
    assert!(gate[0].0.sub(&Tensor::identity(2)).unwrap().max_abs() < 1e-14);
    assert!(gate[0].1.sub(&Tensor::identity(2)).unwrap().max_abs() < 1e-14);
}

fn kron(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, m) = (a.shape()[0], b.shape()[0]);
    Tensor::from_fn(&[n * m, n * m], |i| a.get(&[i[0] / m, i[1] / m]) * b.get(&[i[0] % m, i[1] % m]))
}

#[test]
fn heisenberg_gate_reconstructs() {
    let h = heisenberg_ring(4).unwrap().edge_matrix(0).unwrap();
    let gate = trotter_gate(&h, 0.1).unwrap();
    assert_eq!(gate.len(), 4);
    let mut sum = Tensor::zeros(&[4, 4]);
    for (x, y) in &gate {
        sum.axpy(ONE, &kron(x, y)).unwrap();
    }
    let want = crate::linalg::expm_hermitian(&h, 0.1).unwrap();
    assert!(sum.sub(&want).unwrap().max_abs() <= 1e-12);
}

#[test]
fn diagonal_gate_has_diagonal_factors() {
    let h = Tensor::from_fn(&[9, 9], |i| if i[0] == i[1] { C64::new(i[0] as f64 * 0.3, 0.0) } else { ZERO });
    for (x, y) in trotter_gate(&h, 0.2).unwrap() {
        for (m, _) in [(&x, 0), (&y, 1)] {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(m.get(&[i, j]).norm() < 1e-14);
                    }
                }
            }
        }
    }
    assert!(trotter_gate(&Tensor::from_fn(&[4, 4], |i| if i == [0, 1] { ONE } else { ZERO }), 0.1).is_err());
}

fn dense_gate(psi: &Tensor, shape: &NetworkShape, e: usize, factors: &[(Tensor, Tensor)]) -> Tensor {
    let d = shape.phys_dim();
    let mut g = Tensor::zeros(&[d * d, d * d]);
    for (x, y) in factors {
        g.axpy(ONE, &kron(x, y)).unwrap();
    }
    let (u, v) = shape.edge(e);
    apply_local(psi, &[u, v], &g).unwrap()
}

#[test]
fn identity_gate_keeps_state() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 2).unwrap();
    let out = apply_gate(&rep, 1, &[(Tensor::identity(2), Tensor::identity(2))]).unwrap();
    assert_eq!(out.shape().bond_dims(), g.bond_dims());
    assert!(btns_evaluate(&out).unwrap().sub(&btns_evaluate(&rep).unwrap()).unwrap().max_abs() < 1e-13);
}

#[test]
fn heisenberg_gate_matches_dense() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 7).unwrap();
    let h = heisenberg_ring(4).unwrap();
    let psi = btns_evaluate(&rep).unwrap();
    for e in [0, 3] {
        let factors = trotter_gate(&h.edge_matrix(e).unwrap(), 0.1).unwrap();
        let out = apply_gate(&rep, e, &factors).unwrap();
        assert_eq!(out.shape().bond_dim(e), 8);
        let want = dense_gate(&psi, &g, e, &factors);
        assert!(btns_evaluate(&out).unwrap().sub(&want).unwrap().norm() <= 1e-9 * psi.norm());
    }
}

#[test]
fn commuting_gates_commute() {
    let g = ring(4, 2, 3);
    let rep = random_init(&g, 1, 1, 9).unwrap();
    let h1 = Tensor::from_fn(&[9, 9], |i| if i[0] == i[1] { C64::new((i[0] % 4) as f64, 0.0) } else { ZERO });
    let h2 = Tensor::from_fn(&[9, 9], |i| if i[0] == i[1] { C64::new((i[0] / 2) as f64, 0.0) } else { ZERO });
    let (g1, g2) = (trotter_gate(&h1, 0.3).unwrap(), trotter_gate(&h2, 0.3).unwrap());
    let ab = apply_gate(&apply_gate(&rep, 0, &g1).unwrap(), 2, &g2).unwrap();
    let ba = apply_gate(&apply_gate(&rep, 2, &g2).unwrap(), 0, &g1).unwrap();
    let (x, y) = (btns_evaluate(&ab).unwrap(), btns_evaluate(&ba).unwrap());
    assert!(x.sub(&y).unwrap().norm() < 1e-12 * x.norm());
}

/// Two-site block of edge 0 between vertices 0 and 1 on a chain of two, as
/// `[(d, η_u), (d, η_v)]` in the weighted frame.
fn pair_block(rep: &BtnsRep, p: f64) -> Tensor {
    let theta = crate::tensor::contract(rep.map(0), rep.map(1), &[(1, 1)]).unwrap(); // [i, ηu, j, ηv]
    let sh = theta.shape().to_vec();
    Tensor::from_fn(&[sh[0] * sh[1], sh[2] * sh[3]], |ix| {
        let (i, eu) = (ix[0] / sh[1], ix[0] % sh[1]);
        let (j, ev) = (ix[1] / sh[3], ix[1] % sh[3]);
        theta.get(&[i, eu, j, ev]) * p.powi((eu + ev) as i32)
    })
}

#[test]
fn unweighted_truncation_is_plain_svd() {
    let g = build_graph(GraphKind::Chain { len: 2 }, 4, 3).unwrap();
    let rep = random_init(&g, 2, 2, 3).unwrap();
    let out = weighted_truncate(&rep, 0, 2, 1.0).unwrap();
    let block = pair_block(&rep, 1.0);
    let s = svd(&block, &[0], &[1], Some(2), 0.0).unwrap();
    assert!(pair_block(&out, 1.0).sub(&s.reconstruct()).unwrap().max_abs() < 1e-12);
    assert_eq!(weighted_truncate(&rep, 0, 4, 0.5).unwrap().maps(), rep.maps());
    assert!(weighted_truncate(&rep, 0, 2, 0.0).is_err());
}

#[test]
fn weighted_truncation_beats_random_factorizations() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for trial in 0..5 {
        let g = build_graph(GraphKind::Chain { len: 2 }, 4, 2).unwrap();
        let rep = random_init(&g, 1, 1, trial).unwrap();
        let p = 0.3 + 0.1 * trial as f64;
        let target = 2;
        let out = weighted_truncate(&rep, 0, target, p).unwrap();
        let block = pair_block(&rep, p);
        let err = block.sub(&pair_block(&out, p)).unwrap().norm();
        let (m, n) = (block.shape()[0], block.shape()[1]);
        for _ in 0..50 {
            let a = Tensor::from_fn(&[m, target], |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let b = Tensor::from_fn(&[target, n], |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let ab = crate::tensor::contract(&a, &b, &[(1, 0)]).unwrap();
            assert!(err <= block.sub(&ab).unwrap().norm() + 1e-12);
        }
    }
}

#[test]
fn weighting_keeps_the_low_degree_sector() {
    let rep = psi_l_padded(5).unwrap();
    let want = psi_l(5).unwrap().state;
    let fid = |r: &BtnsRep| {
        let psi = btns_evaluate(r).unwrap();
        if psi.norm() == 0.0 {
            return 0.0;
        }
        crate::contraction::fidelity(&psi, &want).unwrap()
    };
    assert!((fid(&rep) - 1.0).abs() < 1e-12);
    let kept = weighted_truncate(&rep, 0, 2, 0.3).unwrap();
    assert!(fid(&kept) >= 1.0 - 1e-10);
    let lost = weighted_truncate(&rep, 0, 2, 1.0).unwrap();
    assert!(btns_evaluate(&lost).unwrap().norm() < 1e-12);
}

#[test]
fn sweep_separates_the_two_weightings() {
    let rows = truncation_sweep(&psi_l_padded(5).unwrap(), 0, 2, &[0.3, 1.0]).unwrap();
    assert!(rows[0].fidelity > 1.0 - 1e-10);
    assert_eq!(rows[1].fidelity, 0.0);
    assert!(rows[1].norm_ratio < 1e-12);
}

#[test]
fn ite_with_zero_hamiltonian_keeps_state() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 4).unwrap();
    let zero = Hamiltonian::new(
        g.clone(),
        (0..4).map(|i| LocalTerm { support: vec![i, (i + 1) % 4], matrix: Tensor::zeros(&[4, 4]) }).collect(),
    )
    .unwrap();
    let plan = ItePlan { renormalize: false, ..ItePlan::new(0.1, 3, 2, 0.9).unwrap() };
    let (out, trace) = imaginary_time(&rep, &zero, &plan).unwrap();
    assert!(trace.iter().all(|r| r.energy.abs() < 1e-14));
    let (a, b) = (btns_evaluate(&rep).unwrap(), btns_evaluate(&out).unwrap());
    assert!(a.sub(&b).unwrap().norm() < 1e-10 * a.norm());
}

#[test]
fn ite_lowers_heisenberg_energy() {
    let g = ring(6, 2, 2);
    let rep = random_init(&g, 0, 0, 3).unwrap();
    let h = heisenberg_ring(6).unwrap();
    let plan = ItePlan::new(0.05, 40, 4, 1.0).unwrap();
    let (_, trace) = imaginary_time(&rep, &h, &plan).unwrap();
    let last = trace.last().unwrap().energy;
    assert!(last < trace[0].energy);
    let ground = crate::models::ed_ground_state(&h).unwrap().energy;
    assert!(last >= ground - 1e-9);
    assert!(last < 0.9 * ground, "{last} vs {ground}");
}

#[test]
fn ite_energy_methods_agree() {
    let g = ring(4, 2, 2);
    let rep = random_init(&g, 1, 1, 4).unwrap();
    let h = heisenberg_ring(4).unwrap();
    let mut energies = Vec::new();
    for method in [EnergyMethod::Exact, EnergyMethod::MpsStrategy, EnergyMethod::BorderRank] {
        let plan = ItePlan { energy_method: method, ..ItePlan::new(0.05, 2, 2, 0.9).unwrap() };
        energies.push(imaginary_time(&rep, &h, &plan).unwrap().1.last().unwrap().energy);
    }
    assert!((energies[0] - energies[1]).abs() < 1e-8 && (energies[0] - energies[2]).abs() < 1e-7);
}

#[test]
fn ite_heisenberg_l8_reaches_ground_energy() {
    let h = heisenberg_ring(8).unwrap();
    let ground = crate::models::ed_ground_state(&h).unwrap().energy;
    let rep = random_init(&ring(8, 2, 2), 0, 0, 11).unwrap();
    let (_, trace) = imaginary_time(&rep, &h, &ItePlan::new(0.05, 200, 4, 0.9).unwrap()).unwrap();
    let last = trace.last().unwrap().energy;
    assert!(last >= ground - 1e-9);
    assert!((last - ground).abs() <= 0.02 * ground.abs(), "{last} vs {ground}");
}

#[test]
fn simple_update_gauge_is_exact_when_the_cut_is_lossless() {
    // Each endpoint of edge 0 has phys 2, one outer bond of 2 and a weight
    // index of a + 1, so the contracted pair has rank at most 4(a + 1) and
    // cutting to that bond loses nothing, whatever the bond weights are.
    for (a, seed) in [(0, 9), (1, 10)] {
        let target = 4 * (a + 1);
        let g = ring(4, 2, 2).with_bond_dims(vec![target + 1, 2, 2, 2]).unwrap();
        let rep = random_init(&g, a, a, seed).unwrap();
        let mut lambdas: Vec<Vec<f64>> =
            g.bond_dims().iter().map(|&d| (0..d).map(|k| 1.0 / (k + 1) as f64).collect()).collect();
        let out = crate::variational::ite::weighted_simple_update(&rep, 0, target, 0.9, &mut lambdas).unwrap();
        assert_eq!(out.shape().bond_dim(0), target);
        assert_eq!(lambdas[0].len(), target);
        let (before, after) = (btns_evaluate(&rep).unwrap(), btns_evaluate(&out).unwrap());
        assert!(before.sub(&after).unwrap().norm() <= 1e-10 * before.norm(), "a = {a}");
    }
}
