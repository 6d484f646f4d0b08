//! Experiment harness: configuration, seeded parallel trials, evaluation
//! protocols, statistics and CSV output.

pub mod config;
pub mod experiments;
pub mod par;
pub mod probe;
pub mod records;
pub mod stats;

use std::io::Write;

pub use config::{
    AlgorithmSpec, ArmDist, EnvChoice, ExperimentConfig, ExperimentKind, Family, ProbeConfig,
    ProbeKind, Settings, TreeParams,
};
pub use experiments::{
    evaluate_episode, grid_search_c, run_concentration_probe, run_control_evaluation,
    run_experiment, run_synthetic_convergence, ExperimentOutput, Summary,
};
pub use par::{map_indexed, trial_rng};
pub use probe::concentration_probe;
pub use records::{
    read_records, records_to_string, write_records, ExperimentRecord, Metric, HEADER,
};
pub use stats::{fit_polynomial_rate, mean_var, welch_t_test};

use crate::error::Result;

/// Writes summaries as CSV: `env,algorithm,p,C,n_simulations,metric,count,mean,half_width`.
pub fn write_summaries<W: Write>(out: W, summaries: &[Summary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "env",
        "algorithm",
        "p",
        "C",
        "n_simulations",
        "metric",
        "count",
        "mean",
        "half_width",
    ])?;
    for s in summaries {
        w.write_record([
            s.env.clone(),
            s.algorithm.clone(),
            s.p.to_string(),
            s.c.to_string(),
            s.n_simulations.to_string(),
            s.metric.to_string(),
            s.count.to_string(),
            s.mean.to_string(),
            s.half_width.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
