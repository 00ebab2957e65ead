use isra::akmcs::AkmcsConfig;
use isra::benchmarks::truss;
use isra::ego::{Direction, EgoConfig, EgoMode};
use isra::isra_param::*;
use std::io::Write;

fn main() {
    let problem = truss().unwrap();
    let p = ParamIsraProblem {
        g: problem.evaluator.as_ref(),
        variables: &problem.variables_param,
        akmcs: AkmcsConfig { n_initial: 12, pool_size: 1_000_000, ..Default::default() },
        ego: EgoConfig { n_initial: 12, mode: EgoMode::Separate, ..Default::default() },
    };
    let layout = ThetaLayout::build(p.variables).unwrap();
    let mut store = SharedDesignStore::new(7);
    let seed = 7u64;
    let mut f = std::fs::File::create("/tmp/truss_min_log.txt").unwrap();
    let mut eval = |theta: &[f64]| -> Result<isra::ego::PfEval, isra::ego::EvalError> {
        let cond = conditional_pf(theta, &mut store, &p, &layout, seed).map_err(Box::new)?;
        let row: Vec<String> = theta.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{} {:.17e}", row.join(" "), cond.estimate.pf).unwrap();
        Ok(isra::ego::PfEval { pf: cond.estimate.pf, converged: cond.converged })
    };
    let res = isra::ego::run_direction(&mut eval, layout.bounds(), &p.ego, seed, Direction::Min).unwrap();
    println!("min run: best {:.4e} converged {} evals {}", res.best_pf, res.converged, res.t.len());
    // also dump the EGO history: proposals and their EI
    for h in &res.history {
        println!("proposal ei {:.4e} pf {:?}", h.ei, h.pf.map(|v| format!("{v:.4e}")));
    }
}
