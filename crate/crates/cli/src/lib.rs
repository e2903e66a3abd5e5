//! Configuration, experiment registry and run manifests behind the `lqg`
//! command.

pub mod config;
pub mod error;
pub mod manifest;
pub mod registry;

pub use config::{resolve, Config, Sources};
pub use error::{CliError, Result};
pub use manifest::{write_run, Manifest};
pub use registry::{find, Experiment, Outcome, EXPERIMENTS};

/// Fully qualified config key for a core parameter name, if the experiment's
/// schema declares exactly one key with that name.
pub fn qualify(exp: &Experiment, name: &str) -> Option<String> {
    let hits: Vec<String> = (exp.params)().iter().filter(|p| p.key == name).map(|p| format!("{}.{}", p.section, p.key)).collect();
    (hits.len() == 1).then(|| hits[0].clone())
}

/// Resolves, runs and writes one experiment.
pub fn run(config: &Config, out_dir: &std::path::Path) -> Result<Manifest> {
    let outcome = (config.experiment.run)(config)?;
    write_run(out_dir, config, &outcome)
}
