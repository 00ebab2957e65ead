//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Criteria 1 and 2 assert the published toy-function targets verbatim. The
//! shipped toy benchmark cannot reach them (see the repository discussion of
//! the toy constants: the failure region of `x1 - x2^2` contains `{x1 <= 0}`,
//! which forces probabilities orders of magnitude above the published
//! values), so those assertions fail by design; the adjacent brute-force
//! cross-checks demonstrate that the pipeline itself reproduces the true
//! values of the benchmark as shipped.

use isra::akmcs::AkmcsConfig;
use isra::benchmarks::{linear_gaussian, oscillator, toy, truss};
use isra::config::CornerSpec;
use isra::dist::{std_normal_cdf, std_normal_quantile};
use isra::ego::{
    expected_improvement_max, expected_improvement_min, EgoConfig, EgoMode,
};
use isra::isra_free::{run_free_isra, FreeIsraConfig, FreeIsraProblem, Level2Space};
use isra::isra_param::{run_param_isra, ParamIsraProblem};
use isra::kriging::{ExperimentalDesign, KrigingModel};
use isra::limit_state::{CountingLimitState, FnLimitState};
use isra::runner::{oracle_free, oracle_param};
use isra::sampling::InputModel;
use isra::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

fn se_of_mean(xs: &[f64]) -> f64 {
    sample_std(xs) / (xs.len() as f64).sqrt()
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

#[test]
fn criterion_1_toy_free_table_values() {
    let started = Instant::now();
    let problem = toy();
    let cfg = FreeIsraConfig {
        level1: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
        level2: AkmcsConfig { n_initial: 4, pool_size: 1_000_000, ..Default::default() },
        level2_space: Level2Space::Auxiliary,
    };
    let reps = 20;
    let mut tilde = Vec::with_capacity(reps);
    let mut lower = Vec::with_capacity(reps);
    let mut upper = Vec::with_capacity(reps);
    let mut n1 = Vec::with_capacity(reps);
    for k in 0..reps {
        let p = FreeIsraProblem {
            g: problem.evaluator.as_ref(),
            variables: &problem.variables_free,
            aux_overrides: &problem.aux_overrides,
            cfg: cfg.clone(),
        };
        let res = run_free_isra(&p, 1000 + k as u64).expect("toy free replication");
        tilde.push(res.level1.pf.pf);
        lower.push(res.pf_lower.pf);
        upper.push(res.pf_upper.pf);
        n1.push(res.n1 as f64);
    }
    let (m_tilde, m_lower, m_upper) = (mean(&tilde), mean(&lower), mean(&upper));
    let m_n1 = mean(&n1);
    let elapsed = started.elapsed().as_secs_f64();

    // brute-force double-loop reference on the same benchmark
    let counted = CountingLimitState::new(problem.evaluator.as_ref());
    let (o_lower, o_upper) =
        oracle_free(&counted, &problem.variables_free, 1_000_000, 424242).expect("oracle");
    let lower_ok = (m_lower - o_lower.pf).abs() <= 3.0 * (se_of_mean(&lower) + o_lower.std_error());
    let upper_ok = (m_upper - o_upper.pf).abs() <= 3.0 * (se_of_mean(&upper) + o_upper.std_error());
    println!(
        "criterion 1 cross-check: {} two-level ({m_lower:.4e}, {m_upper:.4e}) vs double-loop oracle ({:.4e}, {:.4e})",
        verdict(lower_ok && upper_ok),
        o_lower.pf,
        o_upper.pf
    );
    assert!(lower_ok && upper_ok, "two-level bounds drifted from the double-loop oracle");

    let targets = (1.68e-3, 7.78e-5, 1.27e-2);
    let values_ok = within(m_tilde, targets.0, 0.10)
        && within(m_lower, targets.1, 0.10)
        && within(m_upper, targets.2, 0.10);
    let budget_ok = m_n1 <= 25.0;
    let time_ok = elapsed < 600.0;
    println!(
        "criterion 1: {} E[Pf]=({m_tilde:.4e}, {m_lower:.4e}, {m_upper:.4e}) vs published ({:.2e}, {:.2e}, {:.2e}) +-10%; mean N1={m_n1:.1} (cap 25); {elapsed:.0}s (cap 600)",
        verdict(values_ok && budget_ok && time_ok),
        targets.0,
        targets.1,
        targets.2
    );
    assert!(budget_ok, "mean N1 {m_n1} exceeds 25");
    assert!(time_ok, "runtime {elapsed}s exceeds 600s");
    assert!(
        values_ok,
        "published toy values not reproduced: E[Pf]=({m_tilde:.4e}, {m_lower:.4e}, {m_upper:.4e}) \
         vs ({:.2e}, {:.2e}, {:.2e}); the shipped toy provably cannot reach them (see ledger), \
         while the double-loop cross-check above passes",
        targets.0,
        targets.1,
        targets.2
    );
}

#[test]
fn criterion_2_toy_parametric_table_values() {
    let problem = toy();
    let reps = 20;
    let mut lower = Vec::with_capacity(reps);
    let mut upper = Vec::with_capacity(reps);
    let mut n1 = Vec::with_capacity(reps);
    let mut n2_min = Vec::with_capacity(reps);
    for k in 0..reps {
        let p = ParamIsraProblem {
            g: problem.evaluator.as_ref(),
            variables: &problem.variables_param,
            akmcs: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
            ego: EgoConfig { n_initial: 4, mode: EgoMode::Separate, ..Default::default() },
        };
        let res = run_param_isra(&p, 2000 + k as u64).expect("toy parametric replication");
        lower.push(res.pf_lower);
        upper.push(res.pf_upper);
        n1.push(res.n1 as f64);
        n2_min.push(res.n2_lower as f64);
    }
    let (m_lower, m_upper) = (mean(&lower), mean(&upper));
    let cov_upper = sample_std(&upper) / m_upper;
    let (m_n1, m_n2min) = (mean(&n1), mean(&n2_min));

    // corner-sweep oracle on the same benchmark
    let sweep = oracle_param(
        problem.evaluator.as_ref(),
        &problem.variables_param,
        1_000_000,
        CornerSpec::Full,
        777,
    )
    .expect("oracle sweep");
    let o_min = sweep.iter().map(|(_, e)| e.pf).fold(f64::INFINITY, f64::min);
    let o_max = sweep.iter().map(|(_, e)| e.pf).fold(f64::NEG_INFINITY, f64::max);
    let cross_ok = (m_lower - o_min).abs() <= 3.0 * (se_of_mean(&lower) + (o_min / 1e6).sqrt())
        && (m_upper - o_max).abs() <= 3.0 * (se_of_mean(&upper) + (o_max / 1e6).sqrt());
    println!(
        "criterion 2 cross-check: {} nested bounds ({m_lower:.4e}, {m_upper:.4e}) vs corner oracle ({o_min:.4e}, {o_max:.4e})",
        verdict(cross_ok)
    );
    assert!(cross_ok, "nested bounds drifted from the corner-sweep oracle");

    let targets = (1.57e-4, 1.14e-2);
    let values_ok = within(m_lower, targets.0, 0.10) && within(m_upper, targets.1, 0.10);
    let cov_ok = cov_upper <= 0.03;
    let n1_ok = m_n1 <= 25.0;
    let n2_ok = m_n2min <= 15.0;
    println!(
        "criterion 2: {} E[Pf]=({m_lower:.4e}, {m_upper:.4e}) vs published ({:.2e}, {:.2e}) +-10%; CoV[upper]={:.2}% (cap 3%); mean N1={m_n1:.1} (cap 25); mean N2(min)={m_n2min:.1} (cap 15)",
        verdict(values_ok && cov_ok && n1_ok && n2_ok),
        targets.0,
        targets.1,
        100.0 * cov_upper
    );
    assert!(cov_ok, "CoV of the upper bound {cov_upper} exceeds 3%");
    assert!(n1_ok, "mean N1 {m_n1} exceeds 25");
    assert!(n2_ok, "mean N2 of the min run {m_n2min} exceeds 15");
    assert!(
        values_ok,
        "published toy parametric values not reproduced: ({m_lower:.4e}, {m_upper:.4e}) vs \
         ({:.2e}, {:.2e}); unreachable for the shipped toy (see ledger) — the corner-sweep \
         cross-check above passes",
        targets.0,
        targets.1
    );
}

#[test]
fn criterion_3_oscillator_single_runs() {
    let problem = oscillator();

    // parametric mode
    let p = ParamIsraProblem {
        g: problem.evaluator.as_ref(),
        variables: &problem.variables_param,
        akmcs: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
        ego: EgoConfig { n_initial: 6, mode: EgoMode::Separate, ..Default::default() },
    };
    let param = run_param_isra(&p, 31).expect("oscillator parametric");

    // free mode
    let pf = FreeIsraProblem {
        g: problem.evaluator.as_ref(),
        variables: &problem.variables_free,
        aux_overrides: &problem.aux_overrides,
        cfg: FreeIsraConfig {
            level1: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
            level2: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
            level2_space: Level2Space::Auxiliary,
        },
    };
    let free = run_free_isra(&pf, 37).expect("oscillator free");

    // built-in oracles at n = 1e6
    let sweep = oracle_param(
        problem.evaluator.as_ref(),
        &problem.variables_param,
        1_000_000,
        CornerSpec::Grid(3),
        123,
    )
    .expect("oscillator parametric oracle");
    let o_param_min = sweep.iter().map(|(_, e)| *e).min_by(|a, b| a.pf.partial_cmp(&b.pf).unwrap()).unwrap();
    let o_param_max = sweep.iter().map(|(_, e)| *e).max_by(|a, b| a.pf.partial_cmp(&b.pf).unwrap()).unwrap();
    let counted = CountingLimitState::new(problem.evaluator.as_ref());
    let (o_free_lower, o_free_upper) =
        oracle_free(&counted, &problem.variables_free, 1_000_000, 321).expect("oscillator free oracle");

    let param_published = within(param.pf_lower, 2.42e-3, 0.15) && within(param.pf_upper, 9.04e-3, 0.15);
    let free_published = within(free.pf_lower.pf, 7.08e-4, 0.15) && within(free.pf_upper.pf, 1.63e-2, 0.15);
    let se = |run: f64, oracle: &isra::PfEstimate| -> f64 {
        3.0 * ((run * (1.0 - run) / 1e6).sqrt() + oracle.std_error())
    };
    let param_oracle = (param.pf_lower - o_param_min.pf).abs() <= se(param.pf_lower, &o_param_min)
        && (param.pf_upper - o_param_max.pf).abs() <= se(param.pf_upper, &o_param_max);
    let free_oracle = (free.pf_lower.pf - o_free_lower.pf).abs() <= se(free.pf_lower.pf, &o_free_lower)
        && (free.pf_upper.pf - o_free_upper.pf).abs() <= se(free.pf_upper.pf, &o_free_upper);
    let budget = param.n1 <= 400 && free.n1 <= 400;

    let pass = param_published && free_published && param_oracle && free_oracle && budget;
    println!(
        "criterion 3: {} parametric ({:.3e}, {:.3e}) vs published (2.42e-3, 9.04e-3); free ({:.3e}, {:.3e}) vs (7.08e-4, 1.63e-2); oracle param ({:.3e}, {:.3e}), free ({:.3e}, {:.3e}); N1 param {}, free {}",
        verdict(pass),
        param.pf_lower,
        param.pf_upper,
        free.pf_lower.pf,
        free.pf_upper.pf,
        o_param_min.pf,
        o_param_max.pf,
        o_free_lower.pf,
        o_free_upper.pf,
        param.n1,
        free.n1
    );
    assert!(param_published, "parametric bounds ({:.3e}, {:.3e}) outside +-15% of (2.42e-3, 9.04e-3)", param.pf_lower, param.pf_upper);
    assert!(free_published, "free bounds ({:.3e}, {:.3e}) outside +-15% of (7.08e-4, 1.63e-2)", free.pf_lower.pf, free.pf_upper.pf);
    assert!(param_oracle, "parametric bounds disagree with the grid oracle beyond 3 SE");
    assert!(free_oracle, "free bounds disagree with the double-loop oracle beyond 3 SE");
    assert!(budget, "N1 budget exceeded: param {}, free {}", param.n1, free.n1);
}

#[test]
fn criterion_4_containment_parametric_inside_free() {
    // toy, matched seeds and pools
    let problem = toy();
    let mut results = Vec::new();
    for seed in [51u64, 52, 53] {
        let free = run_free_isra(
            &FreeIsraProblem {
                g: problem.evaluator.as_ref(),
                variables: &problem.variables_free,
                aux_overrides: &problem.aux_overrides,
                cfg: FreeIsraConfig {
                    level1: AkmcsConfig { n_initial: 12, pool_size: 500_000, ..Default::default() },
                    level2: AkmcsConfig { n_initial: 4, pool_size: 500_000, ..Default::default() },
                    level2_space: Level2Space::Auxiliary,
                },
            },
            seed,
        )
        .expect("toy free");
        let param = run_param_isra(
            &ParamIsraProblem {
                g: problem.evaluator.as_ref(),
                variables: &problem.variables_param,
                akmcs: AkmcsConfig { n_initial: 12, pool_size: 500_000, ..Default::default() },
                ego: EgoConfig { n_initial: 4, ..Default::default() },
            },
            seed,
        )
        .expect("toy parametric");
        results.push((
            free.pf_lower.pf,
            free.pf_upper.pf,
            param.pf_lower,
            param.pf_upper,
            free.pf_lower.std_error() + (param.pf_lower / 5e5).sqrt(),
            free.pf_upper.std_error() + (param.pf_upper / 5e5).sqrt(),
        ));
    }
    // oscillator from single matched runs
    let osc = oscillator();
    let free = run_free_isra(
        &FreeIsraProblem {
            g: osc.evaluator.as_ref(),
            variables: &osc.variables_free,
            aux_overrides: &osc.aux_overrides,
            cfg: FreeIsraConfig {
                level1: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
                level2: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
                level2_space: Level2Space::Auxiliary,
            },
        },
        99,
    )
    .expect("oscillator free");
    let param = run_param_isra(
        &ParamIsraProblem {
            g: osc.evaluator.as_ref(),
            variables: &osc.variables_param,
            akmcs: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
            ego: EgoConfig { n_initial: 6, ..Default::default() },
        },
        99,
    )
    .expect("oscillator parametric");
    results.push((
        free.pf_lower.pf,
        free.pf_upper.pf,
        param.pf_lower,
        param.pf_upper,
        free.pf_lower.std_error() + (param.pf_lower / 1e6).sqrt(),
        free.pf_upper.std_error() + (param.pf_upper / 1e6).sqrt(),
    ));

    let mut pass = true;
    for (i, (fl, fu, pl, pu, se_lo, se_hi)) in results.iter().enumerate() {
        let contained = *pl >= fl - 2.0 * se_lo && *pu <= fu + 2.0 * se_hi;
        if !contained {
            pass = false;
        }
        println!(
            "criterion 4 case {i}: {} parametric [{pl:.4e}, {pu:.4e}] inside free [{fl:.4e}, {fu:.4e}] (2 SE slack)",
            verdict(contained)
        );
    }
    println!("criterion 4: {}", verdict(pass));
    assert!(pass, "parametric bounds escaped the free bounds beyond 2 MC standard errors");
}

#[test]
fn criterion_5_truss_oracle_equivalence() {
    let problem = truss().expect("truss benchmark");
    let akmcs = AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() };
    let param = run_param_isra(
        &ParamIsraProblem {
            g: problem.evaluator.as_ref(),
            variables: &problem.variables_param,
            akmcs: akmcs.clone(),
            ego: EgoConfig { n_initial: 12, mode: EgoMode::Separate, ..Default::default() },
        },
        7,
    )
    .expect("truss parametric");

    let sweep = oracle_param(
        problem.evaluator.as_ref(),
        &problem.variables_param,
        1_000_000,
        CornerSpec::Synced,
        17,
    )
    .expect("truss corner oracle");
    let o_min = sweep[0].1.pf.min(sweep[1].1.pf);
    let o_max = sweep[0].1.pf.max(sweep[1].1.pf);

    let bounds_ok = within(param.pf_lower, o_min, 0.10) && within(param.pf_upper, o_max, 0.10);

    // optimal parameters at the synchronized corners
    let near = |theta: &[f64], mu: f64, sd: f64| -> bool {
        theta
            .chunks_exact(2)
            .all(|c| (c[0] - mu).abs() <= 0.5 && (c[1] - sd).abs() <= 0.2)
    };
    let corners_ok = near(&param.theta_lower, 95.0, 13.0) && near(&param.theta_upper, 105.0, 17.0);

    let free = run_free_isra(
        &FreeIsraProblem {
            g: problem.evaluator.as_ref(),
            variables: &problem.variables_free,
            aux_overrides: &problem.aux_overrides,
            cfg: FreeIsraConfig {
                level1: akmcs.clone(),
                level2: akmcs,
                level2_space: Level2Space::Auxiliary,
            },
        },
        13,
    )
    .expect("truss free");
    let se_lo = 2.0 * (free.pf_lower.std_error() + (param.pf_lower / 1e6).sqrt());
    let se_hi = 2.0 * (free.pf_upper.std_error() + (param.pf_upper / 1e6).sqrt());
    let containment_ok =
        param.pf_lower >= free.pf_lower.pf - se_lo && param.pf_upper <= free.pf_upper.pf + se_hi;

    let pass = bounds_ok && corners_ok && containment_ok;
    println!(
        "criterion 5: {} parametric ({:.3e}, {:.3e}) vs corner oracle ({o_min:.3e}, {o_max:.3e}) +-10%; theta* lower {:?} / upper {:?}; free ({:.3e}, {:.3e}) contains parametric: {}",
        verdict(pass),
        param.pf_lower,
        param.pf_upper,
        &param.theta_lower[..2],
        &param.theta_upper[..2],
        free.pf_lower.pf,
        free.pf_upper.pf,
        containment_ok
    );
    assert!(
        bounds_ok,
        "parametric bounds ({:.3e}, {:.3e}) deviate more than 10% from the corner oracle ({o_min:.3e}, {o_max:.3e})",
        param.pf_lower, param.pf_upper
    );
    assert!(
        corners_ok,
        "optima not at the synchronized corners: lower {:?}, upper {:?}",
        param.theta_lower, param.theta_upper
    );
    assert!(containment_ok, "free bounds do not contain the parametric bounds");
}

#[test]
fn criterion_6_kriging_property_suite() {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let mut interpolation_ok = true;
    let mut mle_ok = true;
    for data_set in 0..20 {
        let dim = 1 + data_set % 2;
        let n = 6 + data_set % 5;
        let mut ed = ExperimentalDesign::new(dim);
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        while ed.len() < n {
            let x: Vec<f64> = (0..dim).map(|_| 4.0 * rng.random::<f64>()).collect();
            let y = (1.7 * x[0]).sin() + x.iter().sum::<f64>().powi(2) * 0.1
                + 0.3 * rng.random::<f64>();
            if ed.push(&x, y).is_ok() {
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
        let model = KrigingModel::fit(&ed).expect("fit");
        let range = (y_max - y_min).max(1e-12);
        for i in 0..ed.len() {
            let (mu, var) = model.predict_one(ed.row(i)).unwrap();
            if (mu - ed.response(i)).abs() > 1e-6 * range {
                interpolation_ok = false;
            }
            if var > 1e-8 * model.sigma2.max(1e-300) {
                interpolation_ok = false;
            }
        }
        let best = KrigingModel::profiled_nll(&ed, &model.rho).expect("nll at optimum");
        for _ in 0..100 {
            let rho: Vec<f64> = (0..dim)
                .map(|_| 10f64.powf(-2.0 + 3.3 * rng.random::<f64>()))
                .collect();
            if let Some(nll) = KrigingModel::profiled_nll(&ed, &rho) {
                if nll < best - 1e-6 {
                    mle_ok = false;
                }
            }
        }
    }

    // nonnegative predictive variance over a large random query set
    let mut ed = ExperimentalDesign::new(2);
    let mut rng2 = ChaCha12Rng::seed_from_u64(607);
    while ed.len() < 30 {
        let x = [rng2.random::<f64>() * 6.0 - 3.0, rng2.random::<f64>() * 6.0 - 3.0];
        let y = (x[0] - x[1]).tanh() + 0.05 * x[0] * x[1];
        let _ = ed.push(&x, y);
    }
    let model = KrigingModel::fit(&ed).unwrap();
    let n_query = 100_000;
    let mut pts = vec![0.0; n_query * 2];
    for slot in pts.iter_mut() {
        *slot = rng2.random::<f64>() * 12.0 - 6.0;
    }
    let mut mean_out = vec![0.0; n_query];
    let mut var_out = vec![0.0; n_query];
    model.predict_into(&pts, &mut mean_out, &mut var_out);
    let variance_ok = var_out.iter().all(|v| *v >= 0.0 && v.is_finite());

    let pass = interpolation_ok && mle_ok && variance_ok;
    println!(
        "criterion 6: {} interpolation {}, likelihood optimality {}, variance nonnegative over {n_query} points {}",
        verdict(pass),
        verdict(interpolation_ok),
        verdict(mle_ok),
        verdict(variance_ok)
    );
    assert!(interpolation_ok, "interpolation tolerances violated");
    assert!(mle_ok, "random rho beat the fitted optimum");
    assert!(variance_ok, "negative or non-finite predictive variance");
}

#[test]
fn criterion_7_akmcs_linear_gaussian_budget() {
    let mut pass = true;
    let mut detail = String::new();
    for (i, beta) in [2.0f64, 2.5, 3.0].into_iter().enumerate() {
        let problem = linear_gaussian(beta, 2);
        let input = InputModel::precise(vec![
            Distribution::gaussian(0.0, 1.0).unwrap(),
            Distribution::gaussian(0.0, 1.0).unwrap(),
        ]);
        let cfg = AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() };
        let res = isra::akmcs::run_akmcs(
            problem.evaluator.as_ref(),
            &input,
            &cfg,
            8000 + i as u64,
            None,
        )
        .expect("akmcs run");
        let analytic = std_normal_cdf(-beta);
        let se = (analytic * (1.0 - analytic) / 1e6).sqrt();
        let ok = (res.pf.pf - analytic).abs() <= 3.0 * se && res.n_new_calls <= 60 && res.converged;
        if !ok {
            pass = false;
        }
        detail.push_str(&format!(
            " beta={beta}: pf={:.3e} vs {analytic:.3e} (3SE {:.1e}), calls={};",
            res.pf.pf,
            3.0 * se,
            res.n_new_calls
        ));
    }
    println!("criterion 7: {}{detail}", verdict(pass));
    assert!(pass, "linear-Gaussian budget or accuracy violated:{detail}");
}

#[test]
fn criterion_8_expected_improvement_properties() {
    let mut rng = ChaCha12Rng::seed_from_u64(808);
    let mut nonneg_ok = true;
    let mut mirror_ok = true;
    for _ in 0..10_000 {
        let mu = rng.random::<f64>() * 6.0 - 3.0;
        let sd = rng.random::<f64>() * 2.0;
        let p = rng.random::<f64>() * 6.0 - 3.0;
        let ei_min = expected_improvement_min(mu, sd, p);
        let ei_max = expected_improvement_max(mu, sd, p);
        if ei_min < 0.0 || ei_max < 0.0 {
            nonneg_ok = false;
        }
        if (ei_max - expected_improvement_min(-mu, sd, -p)).abs() > 1e-12 {
            mirror_ok = false;
        }
    }

    // Monte Carlo agreement on 100 triples, 1e6 draws each
    let mut mc_ok = true;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu = rng.random::<f64>() * 2.0 - 1.0;
        let sd = 0.05 + rng.random::<f64>();
        let p = mu + (rng.random::<f64>() - 0.5) * 4.0 * sd;
        let n = 1_000_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n / 2 {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            for z in [r * c, r * s] {
                let imp = (p - (mu + sd * z)).max(0.0);
                acc += imp;
                acc2 += imp * imp;
            }
        }
        let mc = acc / n as f64;
        let se = ((acc2 / n as f64 - mc * mc).max(0.0) / n as f64).sqrt();
        let ei = expected_improvement_min(mu, sd, p);
        let dev = (ei - mc).abs();
        worst = worst.max(dev / se.max(1e-300));
        if dev > 3.0 * se + 1e-12 {
            mc_ok = false;
        }
    }

    let pass = nonneg_ok && mirror_ok && mc_ok;
    println!(
        "criterion 8: {} nonnegative {}, mirror identity {}, MC agreement {} (worst {:.2} SE)",
        verdict(pass),
        verdict(nonneg_ok),
        verdict(mirror_ok),
        verdict(mc_ok),
        worst
    );
    assert!(nonneg_ok && mirror_ok, "algebraic EI properties violated");
    assert!(mc_ok, "EI deviates from Monte Carlo beyond 3 standard errors");
}

#[test]
fn criterion_9_determinism_byte_identical_reports() {
    let text = "\
[run]
problem = toy
pbox_mode = parametric
seed = 4242
replications = 2

[akmcs]
n_initial = 12
pool_size = 100000

[ego]
n_initial = 4
";
    let cfg = isra::config::RunConfig::from_text(text).unwrap();
    let a = isra::runner::run_config(&cfg).unwrap();
    let b = isra::runner::run_config(&cfg).unwrap();

    // CSV bodies must agree byte-for-byte except the wall-clock column
    let strip_seconds = |csv: &str| -> String {
        csv.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l).to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let csv_ok = strip_seconds(&a.to_csv()) == strip_seconds(&b.to_csv());

    // enrichment histories (optimizer traces) byte-identical
    let diag = |r: &isra::report::RunReport| serde_json::to_string(&r.diagnostics).unwrap();
    let diag_ok = diag(&a) == diag(&b);

    // also through the free pipeline
    let free_text = text.replace("parametric", "free").replace("[ego]\nn_initial = 4\n", "");
    let free_cfg = isra::config::RunConfig::from_text(&free_text).unwrap();
    let fa = isra::runner::run_config(&free_cfg).unwrap();
    let fb = isra::runner::run_config(&free_cfg).unwrap();
    let free_ok = strip_seconds(&fa.to_csv()) == strip_seconds(&fb.to_csv())
        && serde_json::to_string(&fa.diagnostics).unwrap()
            == serde_json::to_string(&fb.diagnostics).unwrap();

    let pass = csv_ok && diag_ok && free_ok;
    println!(
        "criterion 9: {} parametric CSV {}, histories {}, free pipeline {}",
        verdict(pass),
        verdict(csv_ok),
        verdict(diag_ok),
        verdict(free_ok)
    );
    assert!(csv_ok, "CSV bodies differ between identical runs");
    assert!(diag_ok, "enrichment histories differ between identical runs");
    assert!(free_ok, "free-pipeline rerun not deterministic");
}

// Supporting reference check used by criterion 3's published values: the
// conditional estimate at the in-box optimum matches the published maximum.
#[test]
fn oscillator_conditional_at_reported_optimum() {
    let problem = oscillator();
    let vars = &problem.variables_param;
    let p = ParamIsraProblem {
        g: problem.evaluator.as_ref(),
        variables: vars,
        akmcs: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
        ego: EgoConfig { n_initial: 6, ..Default::default() },
    };
    let layout = isra::isra_param::ThetaLayout::build(vars).unwrap();
    let mut store = isra::isra_param::SharedDesignStore::new(6);
    let cond =
        isra::isra_param::conditional_pf(&[0.49, 0.20, 1.05], &mut store, &p, &layout, 5150)
            .expect("conditional estimate");
    let se = cond.estimate.std_error();
    assert!(
        (cond.estimate.pf - 9.04e-3).abs() <= 9.04e-3 * 0.10 + 3.0 * se,
        "conditional pf {} vs published 9.04e-3",
        cond.estimate.pf
    );
}

// The analytic linear-Gaussian case collapses: zero-width p-boxes give equal
// bounds matching the closed form (supports the oracle contract).
#[test]
fn degenerate_pbox_collapse() {
    let beta = 2.0;
    let problem = linear_gaussian(beta, 2);
    let counted = CountingLimitState::new(problem.evaluator.as_ref());
    let (lower, upper) = oracle_free(&counted, &problem.variables_free, 400_000, 2024).unwrap();
    assert_eq!(lower.pf, upper.pf);
    let analytic = std_normal_cdf(-beta);
    assert!((lower.pf - analytic).abs() <= 3.0 * lower.std_error());
}

// Spec-level sanity for the misclassification threshold used in enrichment.
#[test]
fn misclassification_probability_reference() {
    let g = FnLimitState::new(1, |x| Ok(x[0]));
    let _ = g; // evaluator unused; the check is pointwise
    assert_eq!(isra::akmcs::misclassification_prob(0.0, 1.0), 0.5);
    let p = isra::akmcs::misclassification_prob(2.0, 1.0);
    assert!((p - std_normal_cdf(-2.0)).abs() < 1e-15);
    let q = std_normal_quantile(0.5);
    assert!(q.abs() < 1e-12);
}
