use std::fs;
use std::path::{Path, PathBuf};

use fepls::io::Manifest;

use crate::args::{FileConfig, Mode, Preset, Target};
use crate::error::CliError;

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

/// Textual form of a resolved setting, for the manifest echo.
pub trait Echo {
    fn echo(&self) -> String;
}

macro_rules! echo_display {
    ($($t:ty),*) => {$(
        impl Echo for $t {
            fn echo(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

echo_display!(f64, usize, u64, bool);

impl Echo for PathBuf {
    fn echo(&self) -> String {
        self.display().to_string()
    }
}

impl<T: Echo> Echo for Vec<T> {
    fn echo(&self) -> String {
        self.iter().map(Echo::echo).collect::<Vec<_>>().join(",")
    }
}

impl Echo for Mode {
    fn echo(&self) -> String {
        match self {
            Mode::Sim => "sim",
            Mode::Data => "data",
        }
        .into()
    }
}

impl Echo for Preset {
    fn echo(&self) -> String {
        match self {
            Preset::Steep => "steep",
            Preset::Shallow => "shallow",
        }
        .into()
    }
}

impl Echo for Target {
    fn echo(&self) -> String {
        match self {
            Target::Quantile => "quantile",
            Target::TailIndex => "tail-index",
        }
        .into()
    }
}

/// Merges command-line values over file values over defaults, recording
/// every resolved setting.
pub struct Resolver {
    pub echo: Manifest,
}

impl Resolver {
    pub fn new(command: &str) -> Self {
        let mut echo = Manifest::new();
        echo.set("command", command);
        Self { echo }
    }

    pub fn pick<T: Echo>(&mut self, key: &str, cli: Option<T>, file: Option<T>, default: T) -> T {
        let v = cli.or(file).unwrap_or(default);
        self.echo.set(format!("config.{key}"), v.echo());
        v
    }

    pub fn pick_opt<T: Echo>(&mut self, key: &str, cli: Option<T>, file: Option<T>) -> Option<T> {
        let v = cli.or(file);
        if let Some(v) = &v {
            self.echo.set(format!("config.{key}"), v.echo());
        }
        v
    }

    pub fn flag(&mut self, key: &str, cli: bool, file: Option<bool>) -> bool {
        let v = cli || file.unwrap_or(false);
        self.echo.set(format!("config.{key}"), v);
        v
    }

    pub fn require<T: Echo>(&mut self, key: &str, cli: Option<T>, file: Option<T>) -> Result<T, CliError> {
        self.pick_opt(key, cli, file)
            .ok_or_else(|| CliError::validation(format!("--{key} is required")))
    }
}
