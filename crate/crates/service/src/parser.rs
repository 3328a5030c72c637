//! External dependency parser.
//!
//! Raw sentences go out one per line; CoNLL-U comes back with one block per
//! input sentence, in order. In `command` mode the target is run through
//! `sh -c` with the sentences on standard input; in `http` mode they are
//! POSTed as `text/plain` to the target URL.

use std::io::Write;
use std::process::{Command, Stdio};

use propmatch_core::corpus::{parse_conllu, ParsedSentence};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HookMode {
    #[default]
    None,
    Command,
    Http,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParserHook {
    pub mode: HookMode,
    /// Command line or URL.
    pub target: Option<String>,
}

impl ParserHook {
    pub fn command(target: impl Into<String>) -> Self {
        ParserHook {
            mode: HookMode::Command,
            target: Some(target.into()),
        }
    }

    pub fn http(url: impl Into<String>) -> Self {
        ParserHook {
            mode: HookMode::Http,
            target: Some(url.into()),
        }
    }

    pub fn is_configured(&self) -> bool {
        self.mode != HookMode::None
    }

    /// Parses `sentences`, or returns `None` when no hook is configured.
    pub fn parse(&self, sentences: &[String]) -> Result<Option<Vec<ParsedSentence>>> {
        if self.mode == HookMode::None {
            return Ok(None);
        }
        if sentences.is_empty() {
            return Ok(Some(Vec::new()));
        }
        let target = self
            .target
            .as_deref()
            .ok_or_else(|| ServiceError::Parser("no target configured".into()))?;
        let input: String = sentences.iter().map(|s| s.replace(['\n', '\r'], " ") + "\n").collect();
        let output = match self.mode {
            HookMode::Command => run_command(target, &input)?,
            HookMode::Http => post(target, input)?,
            HookMode::None => unreachable!(),
        };
        let parsed = parse_conllu(output.as_bytes())?;
        if parsed.len() != sentences.len() {
            return Err(ServiceError::Parser(format!(
                "sent {} sentences, got {} parses",
                sentences.len(),
                parsed.len()
            )));
        }
        Ok(Some(parsed))
    }
}

fn run_command(target: &str, input: &str) -> Result<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(target)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ServiceError::Parser(format!("cannot start `{target}`: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = input.to_owned();
    // feed stdin from another thread so a chatty parser cannot deadlock us
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let out = child.wait_with_output()?;
    writer
        .join()
        .map_err(|_| ServiceError::Parser("stdin writer panicked".into()))?
        .map_err(|e| ServiceError::Parser(format!("writing to `{target}`: {e}")))?;
    if !out.status.success() {
        return Err(ServiceError::Parser(format!(
            "`{target}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    String::from_utf8(out.stdout).map_err(|_| ServiceError::Parser("output is not UTF-8".into()))
}

fn post(url: &str, body: String) -> Result<String> {
    let mut resp = ureq::post(url)
        .header("Content-Type", "text/plain; charset=utf-8")
        .send(body)
        .map_err(|e| ServiceError::Parser(format!("POST {url}: {e}")))?;
    resp.body_mut()
        .read_to_string()
        .map_err(|e| ServiceError::Parser(format!("reading response from {url}: {e}")))
}
