//! Child-process sandbox for generated programs.
//!
//! Each execution gets a throwaway working directory, a scrubbed
//! environment, its own process group, an address-space cap
//! (`RLIMIT_AS`) and a wall-clock deadline after which the whole group is
//! killed. On Linux, network access is removed by moving the child into a
//! fresh network namespace, and Landlock confines filesystem writes to the
//! working directory (and denies TCP where the kernel supports it).

use std::path::PathBuf;
use std::process::Stdio;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt};
use tokio::process::Command;

use crate::types::SandboxLimits;

#[cfg(target_os = "linux")]
use super::landlock::{restrict_self, WriteJail};

const DEFAULT_PATH: &str = "/usr/local/bin:/usr/bin:/bin";
const STDERR_CAP: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxVerdict {
    Ok,
    Timeout,
    MemoryExceeded,
    NonzeroExit,
    Forbidden,
}

impl SandboxVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            SandboxVerdict::Ok => "ok",
            SandboxVerdict::Timeout => "timeout",
            SandboxVerdict::MemoryExceeded => "memory_exceeded",
            SandboxVerdict::NonzeroExit => "nonzero_exit",
            SandboxVerdict::Forbidden => "forbidden",
        }
    }
}

impl std::fmt::Display for SandboxVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxOutcome {
    pub stdout: String,
    pub stderr: String,
    /// Exit code, or 128 + signal number when killed by a signal.
    pub exit_status: i32,
    pub wall_time: Duration,
    pub verdict: SandboxVerdict,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("could not start sandboxed program: {0}")]
    SpawnFailure(String),
}

#[derive(Debug, Clone, Default)]
pub struct SandboxOptions {
    /// Keep the working directory after execution (for forensics).
    pub keep_dir: bool,
}

#[derive(Debug)]
pub struct Execution {
    pub outcome: SandboxOutcome,
    /// Set when the working directory was kept.
    pub kept_dir: Option<PathBuf>,
}

pub async fn execute(source: &str, limits: &SandboxLimits) -> Result<SandboxOutcome, SandboxError> {
    Ok(execute_with(source, limits, &SandboxOptions::default()).await?.outcome)
}

pub async fn execute_with(
    source: &str,
    limits: &SandboxLimits,
    options: &SandboxOptions,
) -> Result<Execution, SandboxError> {
    let spawn_err = |what: &str, e: std::io::Error| SandboxError::SpawnFailure(format!("{what}: {e}"));
    let (program, leading_args) = limits
        .interpreter_cmd
        .split_first()
        .ok_or_else(|| SandboxError::SpawnFailure("interpreter command is empty".into()))?;

    let workdir = tempfile::Builder::new()
        .prefix("toolthink-sandbox-")
        .tempdir()
        .map_err(|e| spawn_err("temp dir", e))?;
    let source_path = workdir.path().join(format!("main{}", limits.source_suffix));
    std::fs::write(&source_path, source).map_err(|e| spawn_err("write source", e))?;

    let mut command = Command::new(program);
    command
        .args(leading_args)
        .arg(&source_path)
        .current_dir(workdir.path())
        .env_clear()
        .env("PATH", DEFAULT_PATH)
        .env("HOME", workdir.path())
        .env("TMPDIR", workdir.path())
        .env("LANG", "C.UTF-8")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONIOENCODING", "utf-8")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true);

    #[cfg(target_os = "linux")]
    let jail = WriteJail::prepare(workdir.path()).map_err(|e| spawn_err("landlock", e))?;
    #[cfg(target_os = "linux")]
    let jail_fd = jail.as_ref().map(WriteJail::raw_fd);
    #[cfg(not(target_os = "linux"))]
    let jail_fd: Option<i32> = None;

    install_child_limits(&mut command, limits.memory_bytes, jail_fd);

    let started = Instant::now();
    let mut child = command.spawn().map_err(|e| spawn_err(program, e))?;
    #[cfg(target_os = "linux")]
    drop(jail);
    let pid = child.id();

    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let stdout_task = tokio::spawn(read_capped(stdout, limits.stdout_byte_cap));
    let stderr_task = tokio::spawn(read_capped(stderr, STDERR_CAP));

    let (status, timed_out) = match tokio::time::timeout(limits.wall_time, child.wait()).await {
        Ok(status) => (status.map_err(|e| spawn_err("wait", e))?, false),
        Err(_) => {
            kill_group(pid);
            let _ = child.start_kill();
            (child.wait().await.map_err(|e| spawn_err("wait", e))?, true)
        }
    };
    let wall_time = started.elapsed();
    // Stragglers in the group would hold the pipes open; make sure they go.
    kill_group(pid);

    let grace = Duration::from_millis(500);
    let stdout = tokio::time::timeout(grace, stdout_task).await.ok().and_then(Result::ok).unwrap_or_default();
    let stderr = tokio::time::timeout(grace, stderr_task).await.ok().and_then(Result::ok).unwrap_or_default();

    let exit_status = exit_code(&status);
    let verdict = classify(timed_out, &status, &stderr);
    let outcome = SandboxOutcome { stdout, stderr, exit_status, wall_time, verdict };

    let kept_dir = if options.keep_dir { Some(workdir.keep()) } else { None };
    Ok(Execution { outcome, kept_dir })
}

#[cfg(unix)]
fn install_child_limits(command: &mut Command, memory_bytes: u64, jail_fd: Option<i32>) {
    unsafe {
        command.pre_exec(move || {
            libc::setpgid(0, 0);
            let mem = libc::rlimit { rlim_cur: memory_bytes as libc::rlim_t, rlim_max: memory_bytes as libc::rlim_t };
            if libc::setrlimit(libc::RLIMIT_AS, &mem) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            let no_core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
            libc::setrlimit(libc::RLIMIT_CORE, &no_core);
            #[cfg(target_os = "linux")]
            {
                if libc::unshare(libc::CLONE_NEWNET) != 0 {
                    // Unprivileged fallback; failure leaves Landlock's TCP rule.
                    libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET);
                }
                if let Some(fd) = jail_fd {
                    restrict_self(fd)?;
                }
            }
            #[cfg(not(target_os = "linux"))]
            let _ = jail_fd;
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn install_child_limits(_: &mut Command, _: u64, _: Option<i32>) {}

fn kill_group(pid: Option<u32>) {
    #[cfg(unix)]
    if let Some(pid) = pid {
        unsafe {
            libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
        }
    }
}

async fn read_capped<R: AsyncRead + Unpin>(mut reader: R, cap: usize) -> String {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match reader.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
    }
    String::from_utf8_lossy(&kept).into_owned()
}

fn exit_code(status: &std::process::ExitStatus) -> i32 {
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return 128 + sig;
        }
    }
    status.code().unwrap_or(-1)
}

fn classify(timed_out: bool, status: &std::process::ExitStatus, stderr: &str) -> SandboxVerdict {
    if timed_out {
        return SandboxVerdict::Timeout;
    }
    if status.success() {
        return SandboxVerdict::Ok;
    }
    const MEMORY_MARKERS: [&str; 4] = ["MemoryError", "Cannot allocate memory", "std::bad_alloc", "out of memory"];
    const DENIED_MARKERS: [&str; 6] = [
        "PermissionError",
        "Permission denied",
        "Operation not permitted",
        "Network is unreachable",
        "[Errno 101]",
        "[Errno 13]",
    ];
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        // An unexpected SIGKILL comes from the OOM killer.
        if status.signal() == Some(libc::SIGKILL) {
            return SandboxVerdict::MemoryExceeded;
        }
    }
    if MEMORY_MARKERS.iter().any(|m| stderr.contains(m)) {
        return SandboxVerdict::MemoryExceeded;
    }
    if DENIED_MARKERS.iter().any(|m| stderr.contains(m)) {
        return SandboxVerdict::Forbidden;
    }
    SandboxVerdict::NonzeroExit
}

/// Whether filesystem write confinement is available on this host.
pub fn write_confinement_available() -> bool {
    #[cfg(target_os = "linux")]
    {
        super::landlock::abi_version().is_some()
    }
    #[cfg(not(target_os = "linux"))]
    {
        false
    }
}
