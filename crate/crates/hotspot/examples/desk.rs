//! Runs the desk-scale simulation study for a range of seeds and prints
//! ranking and calibration metrics. Usage: desk [seeds] [n_pairs] [spacing_m]
use hotspot::io::SimRow;
use hotspot::pipeline::evaluate_simulation;
use hotspot::scenario::{build, ScenarioParams};
use hotspot::PipelineConfig;
use hotspot_core::simulate::{hourly_multipliers, simulate_campaign};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).map_or(10, |s| s.parse().unwrap());
    let n_pairs: usize = args.get(2).map_or(2000, |s| s.parse().unwrap());
    let spacing: f64 = args.get(3).map_or(30000.0 / 3600.0, |s| s.parse().unwrap());
    let extra = args.get(4).cloned().unwrap_or_default();
    let mut params = ScenarioParams::default();
    if let Ok(p) = std::env::var("DESK_PEAK") {
        params.peak = p.parse().unwrap();
    }
    let scenario = build(&params).unwrap();
    let hm = hourly_multipliers(&scenario.station).unwrap();
    for seed in 0..seeds {
        let t0 = Instant::now();
        let text = format!(
            "seed = {seed}\n[simulation]\nn_pairs = {n_pairs}\nspacing_m = {spacing}\n{}\n[ensemble]\nmodels = 10\nsubsample = 1000\n[ensemble.fit]\nrestarts = 1\nrel_tol = 1e-9\n",
            extra.replace("\\n", "\n")
        );
        let cfg = PipelineConfig::from_toml(&text).unwrap();
        let campaign = cfg.simulation.campaign(cfg.derived_seed("routes").unwrap()).unwrap();
        let noise = cfg.simulation.noise(cfg.derived_seed("noise").unwrap()).unwrap();
        let obs = simulate_campaign(&scenario.graph, &scenario.raster, &hm, &campaign, &noise).unwrap();
        let rows: Vec<SimRow> = obs.iter().map(|o| SimRow::new(o, spacing)).collect();
        let ev = evaluate_simulation(&rows, &scenario.raster, &cfg).unwrap();
        let exc = ev.after.occupied_exc();
        let mono = exc.windows(2).all(|w| w[0] <= w[1]);
        println!(
            "seed {seed}: n={} train={} test={} rho={:.3} ece {:.4} -> {:.4} brier {:.4} -> {:.4} mono={mono} {:.1}s",
            rows.len(),
            ev.n_train,
            ev.n_test,
            ev.spearman.unwrap_or(f64::NAN),
            ev.ece_before,
            ev.ece_after,
            ev.brier_before,
            ev.brier_after,
            t0.elapsed().as_secs_f64()
        );
        if std::env::var_os("DESK_BINS").is_some() {
            for (name, r) in [("before", &ev.before), ("after", &ev.after)] {
                for b in &r.bins {
                    println!("  {name} bin {} n={} conf={:?} exc={:?}", b.index, b.count, b.conf(), b.exc());
                }
            }
        }
    }
}
