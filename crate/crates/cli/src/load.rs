use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use tapf_core::grid::GridMap;
use tapf_core::instance::{generate_scenario, ScenarioConfig, ScenarioFile, TapfInstance};

/// Where the agents come from.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Random,
    Hotspot,
    File(PathBuf),
}

impl ScenarioSource {
    pub fn parse(s: &str) -> Self {
        match s {
            "random" => ScenarioSource::Random,
            "hotspot" => ScenarioSource::Hotspot,
            path => ScenarioSource::File(PathBuf::from(path)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ScenarioSource::Random => "random".into(),
            ScenarioSource::Hotspot => "hotspot".into(),
            ScenarioSource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub map: Option<PathBuf>,
    pub scenario: ScenarioSource,
    pub agents: Option<usize>,
    pub targets_per_agent: usize,
    pub seed: u64,
}

pub struct Loaded {
    pub instance: TapfInstance,
    pub map_path: PathBuf,
}

pub fn read_map(path: &Path) -> Result<Arc<GridMap>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read map file {}", path.display()))?;
    let map =
        GridMap::parse(&text).with_context(|| format!("invalid map file {}", path.display()))?;
    Ok(Arc::new(map))
}

pub fn load_instance(spec: &InstanceSpec) -> Result<Loaded> {
    match &spec.scenario {
        ScenarioSource::File(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read scenario file {}", path.display()))?;
            let file = ScenarioFile::parse(&text)
                .with_context(|| format!("invalid scenario file {}", path.display()))?;
            let map_path = match &spec.map {
                Some(m) => m.clone(),
                None => path.parent().unwrap_or(Path::new(".")).join(&file.map_path),
            };
            let map = read_map(&map_path)?;
            let mut instance = file
                .to_instance(map)
                .with_context(|| format!("invalid scenario file {}", path.display()))?;
            if let Some(n) = spec.agents {
                if n > instance.num_agents() {
                    bail!(
                        "scenario has {} agents, {n} requested",
                        instance.num_agents()
                    );
                }
                instance = truncate(&instance, n)?;
            }
            Ok(Loaded { instance, map_path })
        }
        generated => {
            let Some(map_path) = spec.map.clone() else {
                bail!("--map is required for generated scenarios");
            };
            let Some(n) = spec.agents else {
                bail!("--agents is required for generated scenarios");
            };
            let map = read_map(&map_path)?;
            let mut cfg = match generated {
                ScenarioSource::Hotspot => ScenarioConfig::hotspot(spec.seed),
                _ => ScenarioConfig::random(spec.seed),
            };
            cfg.targets_per_agent = spec.targets_per_agent;
            let instance = generate_scenario(map, n, &cfg)?;
            Ok(Loaded { instance, map_path })
        }
    }
}

/// Keeps the first `n` agents of a scenario file.
fn truncate(inst: &TapfInstance, n: usize) -> Result<TapfInstance> {
    let starts = inst.starts()[..n].to_vec();
    let targets = (0..n).map(|i| inst.targets(i).to_vec()).collect();
    Ok(TapfInstance::new(inst.shared_map(), starts, targets)?)
}
