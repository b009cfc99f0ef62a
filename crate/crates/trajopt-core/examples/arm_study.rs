// Scratch experiment runner (not part of the deliverable test surface):
// runs an arm preset over seeds and prints per-seed outcomes.
// args: [preset] [seeds] [gens] [poly_degree] [goal_x] [goal_y]

use nalgebra::{DMatrix, DVector};
use trajopt_core::env::{ArmEnv, EnvModel};
use trajopt_core::optimizer::{
    run_emppi, EarlyStop, EmppiConfig, RunHooks, VersionPreset, INIT_COV_SCALE, INIT_FEEDFORWARD,
};
use trajopt_core::policy::LinearGaussianPolicy;
use trajopt_core::rollout::simulate_mean;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset = match args.get(1).map(|s| s.as_str()).unwrap_or("C") {
        "A" => VersionPreset::A,
        "B" => VersionPreset::B,
        _ => VersionPreset::C,
    };
    let seeds: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let gens: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);
    let degree: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(3);
    let mut env = ArmEnv::paper_default();
    if let (Some(gx), Some(gy)) = (args.get(5), args.get(6)) {
        env.goal = nalgebra::Vector2::new(gx.parse().unwrap(), gy.parse().unwrap());
    }
    if let (Some(ox), Some(oy), Some(or_)) = (args.get(7), args.get(8), args.get(9)) {
        env.obstacle.center = nalgebra::Vector2::new(ox.parse().unwrap(), oy.parse().unwrap());
        env.obstacle.radius = or_.parse().unwrap();
    }

    let mut dists = Vec::new();
    for seed in 0..seeds {
        let mut cfg = EmppiConfig::paper_defaults(seed);
        cfg.generations = gens;
        cfg.poly_degree = degree;
        preset.apply(&mut cfg);
        let initial = LinearGaussianPolicy::constant(
            env.horizon(),
            DVector::from_element(4, INIT_FEEDFORWARD),
            DMatrix::zeros(4, 8),
            DMatrix::identity(4, 4) * INIT_COV_SCALE,
        )
        .unwrap();
        let t0 = std::time::Instant::now();
        let run = run_emppi(&env, &initial, &cfg, &EarlyStop::default(), &mut RunHooks::default())
            .unwrap();
        let (states, det_cost) = simulate_mean(&run.final_policy, &env)
            .unwrap_or((vec![env.initial_state()], f64::INFINITY));
        let dist = env.goal_distance(states.last().unwrap());
        dists.push(dist);
        let e50 = run.records.get(49).map(|r| r.entropy_sum).unwrap_or(f64::NAN);
        let e_last = run.records.last().map(|r| r.entropy_sum).unwrap_or(f64::NAN);
        println!(
            "{preset:?} d={degree} seed={seed}: det_cost={det_cost:.1} goal_dist={dist:.3} entropy g50={e50:.1} gEnd={e_last:.1} [{:.1}s]",
            t0.elapsed().as_secs_f64(),
        );
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let reached = dists.iter().filter(|&&d| d <= 0.1).count();
    println!(
        "=> {preset:?} d={degree}: median={:.3} reached={}/{}",
        dists[dists.len() / 2],
        reached,
        dists.len()
    );
}
