use std::io::Write as _;
use std::time::Instant;

use cimac_core::solver::enumerate_reachable;
use cimac_core::{solve, Belief, Scenario, SpaceVariant};

fn scenario(belief: Vec<f64>, space: SpaceVariant, dedup: u32, horizon: usize) -> Scenario {
    Scenario {
        agents: 2,
        horizon,
        alpha: 1.0,
        beta: 0.0,
        grid_step: 0.05,
        prescription_space: space,
        initial_belief: Belief::new(belief).unwrap(),
        baselines: vec![],
        dedup_rounding: dedup,
        max_belief_states: 2_000_000,
    }
}

fn rows() -> Vec<Vec<f64>> {
    let third = 1.0 / 3.0;
    let sixth = 1.0 / 6.0;
    vec![
        vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, third, third, 0.0, third, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, sixth, sixth, 0.0, sixth, sixth, 0.0, sixth, sixth],
        vec![0.0, sixth, sixth, 0.0, 0.0, 0.0, 0.0, third, third],
        vec![0.0, sixth, sixth, 0.0, 0.0, 0.0, 0.0, 2.0 * third, 0.0],
        vec![0.0, third, sixth, 0.0, 0.0, sixth, 0.0, third, 0.0],
    ]
}

fn flush() {
    std::io::stdout().flush().unwrap();
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(String::as_str).unwrap_or("constrained");

    match what {
        "constrained" => {
            for (i, belief) in rows().iter().enumerate() {
                let s = scenario(belief.clone(), SpaceVariant::Constrained, 9, 10);
                let start = Instant::now();
                match solve(&s) {
                    Ok(policy) => {
                        let sizes: Vec<usize> = policy.steps.iter().map(|s| s.len()).collect();
                        println!(
                            "row{} constrained: V1={:.9} elapsed={:?} sizes={:?}",
                            i + 1,
                            policy.initial_value(),
                            start.elapsed(),
                            sizes
                        );
                    }
                    Err(e) => println!("row{} constrained: ERR {e} ({:?})", i + 1, start.elapsed()),
                }
                flush();
            }
        }
        "full9" => {
            for (i, belief) in rows().iter().enumerate() {
                let s = scenario(belief.clone(), SpaceVariant::Full, 9, 10);
                let start = Instant::now();
                match solve(&s) {
                    Ok(policy) => println!(
                        "row{} full d9: V1={:.9} elapsed={:?}",
                        i + 1,
                        policy.initial_value(),
                        start.elapsed()
                    ),
                    Err(e) => println!("row{} full d9: ERR {e} ({:?})", i + 1, start.elapsed()),
                }
                flush();
            }
        }
        "full2" => {
            for (i, belief) in rows().iter().enumerate() {
                let s = scenario(belief.clone(), SpaceVariant::Full, 2, 10);
                let start = Instant::now();
                match solve(&s) {
                    Ok(policy) => {
                        let sizes: Vec<usize> = policy.steps.iter().map(|s| s.len()).collect();
                        println!(
                            "row{} full d2: V1={:.9} elapsed={:?} sizes={:?}",
                            i + 1,
                            policy.initial_value(),
                            start.elapsed(),
                            sizes
                        );
                    }
                    Err(e) => println!("row{} full d2: ERR {e} ({:?})", i + 1, start.elapsed()),
                }
                flush();
            }
        }
        "fwd" => {
            for (i, belief) in rows().iter().enumerate() {
                let s = scenario(belief.clone(), SpaceVariant::Constrained, 9, 10);
                let start = Instant::now();
                match enumerate_reachable(&s) {
                    Ok(reach) => println!(
                        "row{} forward-only: total={} elapsed={:?}",
                        i + 1,
                        reach.total(),
                        start.elapsed()
                    ),
                    Err(e) => println!("row{} forward-only: ERR {e}", i + 1),
                }
                flush();
            }
        }
        other => eprintln!("unknown probe {other}"),
    }
}
