//! External fine-tuning hook and policy resolution by identifier.

use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;
use tracing::info;

use crate::runtime::{HttpPolicy, HttpPolicyConfig, PolicyClient, PolicyError, ScriptedPolicy};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TuneError {
    #[error("tune hook `{0}` not found")]
    Missing(String),
    #[error("tune hook failed: {0}")]
    Failed(String),
}

/// Produces a new policy identifier from a dataset.
pub trait TuneHook: Send + Sync {
    fn tune(&self, dataset: &Path, base_model: &str, out_dir: &Path) -> Result<String, TuneError>;
}

impl<F> TuneHook for F
where
    F: Fn(&Path, &str, &Path) -> Result<String, TuneError> + Send + Sync,
{
    fn tune(&self, dataset: &Path, base_model: &str, out_dir: &Path) -> Result<String, TuneError> {
        self(dataset, base_model, out_dir)
    }
}

/// Runs `<program> <args..> --dataset <path> --base-model <id> --out <dir>`
/// and takes the last non-empty stdout line as the new policy id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTuneHook {
    program: PathBuf,
    args: Vec<String>,
    dir: Option<PathBuf>,
}

fn resolve_program(program: &str, dir: Option<&Path>) -> Option<PathBuf> {
    let p = Path::new(program);
    if p.components().count() > 1 {
        let p = match dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        };
        return p.is_file().then_some(p);
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|dir| dir.join(program))
            .find(|c| c.is_file())
    })
}

impl CommandTuneHook {
    /// Split `command` on whitespace; the first word must name an existing
    /// file or a program on `PATH`.
    pub fn new(command: &str) -> Result<Self, TuneError> {
        Self::new_in(command, None)
    }

    /// Like [`new`](Self::new), but relative paths resolve against `dir`,
    /// which is also the hook's working directory.
    pub fn new_in(command: &str, dir: Option<&Path>) -> Result<Self, TuneError> {
        let mut words = command.split_whitespace();
        let first = words.next().ok_or_else(|| TuneError::Missing(String::new()))?;
        let program = resolve_program(first, dir).ok_or_else(|| TuneError::Missing(first.to_string()))?;
        Ok(Self {
            program,
            args: words.map(str::to_string).collect(),
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn program(&self) -> &Path {
        &self.program
    }
}

impl TuneHook for CommandTuneHook {
    fn tune(&self, dataset: &Path, base_model: &str, out_dir: &Path) -> Result<String, TuneError> {
        info!(program = %self.program.display(), base_model, "invoking tune hook");
        let mut cmd = Command::new(&self.program);
        if let Some(d) = &self.dir {
            cmd.current_dir(d);
        }
        let out = cmd
            .args(&self.args)
            .arg("--dataset")
            .arg(dataset)
            .arg("--base-model")
            .arg(base_model)
            .arg("--out")
            .arg(out_dir)
            .output()
            .map_err(|e| TuneError::Failed(format!("cannot start {}: {e}", self.program.display())))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(TuneError::Failed(format!("{} ({})", out.status, stderr.trim())));
        }
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .map(str::trim)
            .rfind(|l| !l.is_empty())
            .map(str::to_string)
            .ok_or_else(|| TuneError::Failed("hook printed no policy identifier".into()))
    }
}

/// Turns a policy identifier into a client.
pub trait PolicyFactory: Send + Sync {
    fn open(&self, id: &str) -> Result<Box<dyn PolicyClient>, PolicyError>;
}

/// Resolution order: `scripted:<path>`, `http:<url>[#model]`, then a bare
/// id as `<scripts_dir>/<id>.json`, then a bare id as a model name on
/// `endpoint`.
#[derive(Debug, Clone, Default)]
pub struct DefaultPolicyFactory {
    pub scripts_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
}

impl DefaultPolicyFactory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_scripts_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scripts_dir = Some(dir.into());
        self
    }

    pub fn with_endpoint(mut self, url: impl Into<String>) -> Self {
        self.endpoint = Some(url.into());
        self
    }
}

fn scripted(path: &Path) -> Result<Box<dyn PolicyClient>, PolicyError> {
    ScriptedPolicy::load(path)
        .map(|p| Box::new(p) as Box<dyn PolicyClient>)
        .map_err(|e| PolicyError::Unavailable(e.to_string()))
}

fn http(url: &str, model: &str) -> Result<Box<dyn PolicyClient>, PolicyError> {
    let cfg = HttpPolicyConfig::new(url, model).from_env();
    Ok(Box::new(HttpPolicy::new(cfg)?))
}

impl PolicyFactory for DefaultPolicyFactory {
    fn open(&self, id: &str) -> Result<Box<dyn PolicyClient>, PolicyError> {
        if let Some(path) = id.strip_prefix("scripted:") {
            return scripted(Path::new(path));
        }
        if let Some(rest) = id.strip_prefix("http:") {
            let (url, model) = rest.split_once('#').unwrap_or((rest, ""));
            return http(url, model);
        }
        if let Some(dir) = &self.scripts_dir {
            let candidate = dir.join(format!("{id}.json"));
            if candidate.is_file() {
                return scripted(&candidate);
            }
        }
        match &self.endpoint {
            Some(url) => http(url, id),
            None => Err(PolicyError::Unavailable(format!("cannot resolve policy `{id}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn script(dir: &Path, body: &str) -> String {
        let p = dir.join("hook.sh");
        fs::write(&p, body).unwrap();
        format!("sh {}", p.display())
    }

    #[test]
    fn command_hook_passes_flags_and_reads_last_line() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = script(dir.path(), "echo training >&2\necho \"log $2\"\necho \"$4-next\"\n");
        let hook = CommandTuneHook::new(&cmd).unwrap();
        let id = hook.tune(Path::new("/tmp/d.jsonl"), "m0", dir.path()).unwrap();
        assert_eq!(id, "m0-next");
    }

    #[test]
    fn nonzero_exit_is_failure() {
        let dir = tempfile::tempdir().unwrap();
        let hook = CommandTuneHook::new(&script(dir.path(), "echo boom >&2\nexit 3\n")).unwrap();
        match hook.tune(Path::new("d"), "m0", dir.path()) {
            Err(TuneError::Failed(msg)) => assert!(msg.contains("boom")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_program_is_detected_up_front() {
        assert!(matches!(
            CommandTuneHook::new("/definitely/not/here --x"),
            Err(TuneError::Missing(_))
        ));
        assert!(matches!(
            CommandTuneHook::new("no-such-tune-hook-binary"),
            Err(TuneError::Missing(_))
        ));
    }

    #[test]
    fn factory_resolves_bare_ids_from_scripts_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = ScriptedPolicy::new("m1").with_script("t", vec!["x".into()]);
        fs::write(
            dir.path().join("m1.json"),
            serde_json::to_string(&p.to_file_contents()).unwrap(),
        )
        .unwrap();
        let f = DefaultPolicyFactory::new().with_scripts_dir(dir.path());
        assert_eq!(f.open("m1").unwrap().identifier(), "m1");
        assert!(matches!(f.open("m9"), Err(PolicyError::Unavailable(_))));
        let path = format!("scripted:{}", dir.path().join("m1.json").display());
        assert_eq!(f.open(&path).unwrap().identifier(), "m1");
    }
}
