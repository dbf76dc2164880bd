//! `sim generate` and `sim serve`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use assimlab_core::simulator::{generate_world, presets, serve, PlantedScenario};
use assimlab_core::Error;

use crate::config::{preset, Study};
use crate::error::CliResult;
use crate::output::atomic_write;

#[derive(Clone, Debug, Default)]
pub struct ScenarioSource {
    pub config: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub preset: Option<String>,
    pub interests: Option<usize>,
    pub scale: Option<u64>,
    pub seed: Option<u64>,
    pub rounding: Option<u32>,
    pub floor: Option<u64>,
}

impl ScenarioSource {
    /// The scenario and the seed its world is generated with.
    pub fn resolve(&self) -> CliResult<(PlantedScenario, u64)> {
        let (mut scenario, seed) = if let Some(path) = &self.scenario {
            (PlantedScenario::load(path)?, self.seed.unwrap_or(0))
        } else if let Some(name) = &self.preset {
            let seed = self.seed.unwrap_or(0);
            (preset(name, self.interests, self.scale, seed)?, seed)
        } else if let Some(config) = &self.config {
            let mut study = Study::load(config)?;
            if let Some(seed) = self.seed {
                study.seed = seed;
            }
            (study.scenario()?, study.seed)
        } else {
            return Err(Error::MissingConfig("one of --config, --scenario or --preset".into()).into());
        };
        if self.rounding.is_some() {
            scenario.rounding = self.rounding;
        }
        if self.floor.is_some() {
            scenario.floor = self.floor;
        }
        Ok((scenario, seed))
    }
}

fn csv_rows<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(Error::from)?;
    for row in rows {
        w.write_record(&row).map_err(Error::from)?;
    }
    Ok(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

/// Writes `scenario.toml`, plus the genre catalog and ground truth for the
/// study preset.
pub fn generate(source: &ScenarioSource, out: &Path) -> CliResult<Vec<PathBuf>> {
    let (scenario, _) = source.resolve()?;
    scenario.validate()?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let mut written = Vec::new();
    let path = out.join("scenario.toml");
    atomic_write(&path, scenario.to_toml()?.as_bytes())?;
    written.push(path);
    if source.preset.as_deref() == Some("study") {
        let genres = csv_rows(
            ["name", "worldwide_audience"],
            presets::study_genres().into_iter().map(|(n, a)| [n, a.to_string()]),
        )?;
        let path = out.join("genres.csv");
        atomic_write(&path, &genres)?;
        written.push(path);
        let truth = csv_rows(
            ["axis", "category", "proportion"],
            presets::study_ground_truth().into_iter().flat_map(|(axis, cats)| {
                cats.into_iter()
                    .map(move |(c, p)| [axis.to_string(), c, p.to_string()])
            }),
        )?;
        let path = out.join("ground_truth.csv");
        atomic_write(&path, &truth)?;
        written.push(path);
    }
    Ok(written)
}

/// Serves the scenario until the process is stopped; prints the endpoint.
pub fn run_server(source: &ScenarioSource, addr: &str) -> CliResult<()> {
    let (scenario, seed) = source.resolve()?;
    let world = generate_world(&scenario, seed)?;
    let handle = serve(Arc::new(world), addr)?;
    println!("{}", serde_json::json!({ "endpoint": handle.count_url() }));
    handle.join();
    Ok(())
}
