#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use demcorrect_core::grid::write_ascii_grid;
use demcorrect_core::synth::{fractal_dem, synth_landcover};
use demcorrect_core::GridF64;

pub fn save(g: &GridF64, path: &Path) {
    std::fs::write(path, write_ascii_grid(g)).unwrap();
}

pub fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demcorrect"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("DEMCORRECT_THREADS", "2")
        .output()
        .unwrap()
}

/// Input rasters and a config pointing at them, all inside one directory.
pub struct Fixture {
    pub root: PathBuf,
    pub config: PathBuf,
    pub dem: GridF64,
    pub reference: GridF64,
}

impl Fixture {
    pub fn write(root: &Path, dem: &GridF64, reference: &GridF64, bare: &GridF64, urban: &GridF64, forest: &GridF64, strata: &GridF64) -> Self {
        for (name, g) in [("dem", dem), ("reference", reference), ("bare", bare), ("urban", urban), ("forest", forest), ("strata", strata)] {
            save(g, &root.join(format!("{name}.asc")));
        }
        let p = |n: &str| root.join(format!("{n}.asc")).display().to_string();
        let config = serde_json::json!({
            "paths": {
                "dem": p("dem"), "reference": p("reference"), "bare": p("bare"), "urban": p("urban"),
                "forest": p("forest"), "strata": p("strata"), "out": root.join("out").display().to_string()
            },
            "features": {
                "roughness": {"radius": 1, "min_valid_fraction": 1.0},
                "tpi": {"radius": 1, "min_valid_fraction": 1.0},
                "vrm": {"radius": 2, "min_valid_fraction": 1.0},
                "landcover": {"radius": 2, "min_valid_fraction": 1.0},
                "texture": {"threshold": 0.5, "window": {"radius": 3, "min_valid_fraction": 1.0}}
            },
            "gbdt": {"n_trees": 20}
        });
        let config_path = root.join("config.json");
        std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
        Self { root: root.to_path_buf(), config: config_path, dem: dem.clone(), reference: reference.clone() }
    }

    /// Smooth terrain (roughness tracks TRI) and bare ground that is exactly
    /// the complement of forest.
    pub fn collinear(root: &Path, decay: f64) -> Self {
        let reference = fractal_dem::<f64>(6, 200.0, 80.0, decay, 31).unwrap();
        let lc = synth_landcover(&reference, 32).unwrap();
        let bare = lc.forest.map_valid(|v| 1.0 - v);
        let dem = reference.zip_valid(&lc.forest, "dem", |z, f| z + 1.0 + 0.5 * f).unwrap();
        Self::write(root, &dem, &reference, &bare, &lc.urban, &lc.forest, &lc.strata)
    }
}
