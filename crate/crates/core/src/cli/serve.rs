use std::io::Write as _;
use std::path::Path;

use super::args::{Context, ServeArgs};
use super::error::CliError;
use super::manifest::Outputs;
use crate::server::{ModelRegistry, Server, ServerConfig, DEFAULT_PORT};

/// Splits `NAME=PATH`; a bare path gets no explicit name.
pub fn split_named(spec: &str) -> (Option<&str>, &str) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (Some(name), path),
        _ => (None, spec),
    }
}

pub fn serve(ctx: &Context, a: &ServeArgs) -> Result<(), CliError> {
    if a.model.is_empty() {
        return Err(CliError::Usage("serve needs at least one --model".into()));
    }
    let bind = a.bind.clone().unwrap_or_else(|| format!("127.0.0.1:{DEFAULT_PORT}"));
    let mut out = Outputs::create(ctx)?;
    let mut registry = ModelRegistry::new();
    for spec in &a.model {
        let (name, path) = split_named(spec);
        let path = Path::new(path);
        out.input(path)?;
        let id = registry.load(name, path)?;
        log::info!("hosting {id} from {}", path.display());
    }
    let config = ServerConfig {
        remote_shutdown: a.remote_shutdown.unwrap_or(true),
    };
    let server = Server::bind(bind.as_str(), registry, config)?;
    out.finish(ctx, None)?;
    let addr = server.local_addr()?;
    println!("listening on {addr}");
    let _ = std::io::stdout().flush();
    server.run()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_and_bare_models() {
        assert_eq!(split_named("cam=models/cam.json"), (Some("cam"), "models/cam.json"));
        assert_eq!(split_named("models/cam.json"), (None, "models/cam.json"));
        assert_eq!(split_named("=x.json"), (None, "=x.json"));
    }
}
