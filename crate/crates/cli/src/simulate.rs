//! `procest simulate`: seeded dataset generation plus a manifest that
//! records the full resolved config for reproduction.

use procest::format::save_dataset;
use procest::sim::{default_duration_means, generate_dataset, SimulatorConfig};
use procest::{Error, Result};

use crate::args::SimulateArgs;

/// Start from `--config` (or built-in defaults) and let explicit flags
/// override field by field.
fn resolve_config(args: &SimulateArgs) -> Result<SimulatorConfig<f64>> {
    let mut config: SimulatorConfig<f64> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::data(format!("{}: bad simulator config: {e}", path.display())))?
        }
        None => SimulatorConfig::new(0, 60, 6, 16),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(cases) = args.cases {
        config.num_traces = cases;
    }
    if let Some(phases) = args.phases {
        config.num_phases = phases;
        // A new phase count invalidates any inherited duration profile.
        if args.config.is_none() || config.phase_duration_means.len() != phases {
            config.phase_duration_means = default_duration_means(phases);
            config.phase_duration_stds = default_duration_means::<f64>(phases)
                .into_iter()
                .map(|m| m / 6.0)
                .collect();
        }
    }
    if let Some(features) = args.features {
        config.feature_dim = features;
    }
    if let Some(rate) = args.frame_rate {
        config.frame_rate = rate;
    }
    if let Some(means) = &args.duration_means {
        config.phase_duration_means = means.clone();
        if args.duration_stds.is_none() && config.phase_duration_stds.len() != means.len() {
            config.phase_duration_stds = means.iter().map(|m| m / 6.0).collect();
        }
    }
    if let Some(stds) = &args.duration_stds {
        config.phase_duration_stds = stds.clone();
    }
    if let Some(separation) = args.separation {
        config.emission_separation = separation;
    }
    if let Some(noise) = args.noise_std {
        config.noise_std = noise;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let config = resolve_config(&args)?;
    let traces = generate_dataset(&config)?;
    let paths = save_dataset(&traces, &args.out)?;

    let manifest_path = args.out.join("manifest.json");
    let manifest = serde_json::to_string_pretty(&config)
        .map_err(|e| Error::usage(format!("serialize manifest: {e}")))?;
    std::fs::write(&manifest_path, manifest)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", manifest_path.display())))?;

    println!(
        "wrote {} traces to {} (manifest: {})",
        paths.len(),
        args.out.display(),
        manifest_path.display()
    );
    Ok(())
}
