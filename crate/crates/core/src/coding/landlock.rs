//! Minimal Landlock bindings: deny filesystem writes outside one directory
//! and, from ABI 4 on, deny TCP bind/connect.
//!
//! The ruleset is built in the parent; the child only calls
//! `prctl(PR_SET_NO_NEW_PRIVS)` and `landlock_restrict_self`, both of which
//! are async-signal-safe and fine to run between fork and exec.

use std::ffi::CString;
use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd, RawFd};
use std::os::unix::ffi::OsStrExt;
use std::path::Path;

const CREATE_RULESET_VERSION: u32 = 1;
const RULE_PATH_BENEATH: libc::c_int = 1;

const ACCESS_FS_WRITE_FILE: u64 = 1 << 1;
const ACCESS_FS_REMOVE_DIR: u64 = 1 << 4;
const ACCESS_FS_REMOVE_FILE: u64 = 1 << 5;
const ACCESS_FS_MAKE_CHAR: u64 = 1 << 6;
const ACCESS_FS_MAKE_DIR: u64 = 1 << 7;
const ACCESS_FS_MAKE_REG: u64 = 1 << 8;
const ACCESS_FS_MAKE_SOCK: u64 = 1 << 9;
const ACCESS_FS_MAKE_FIFO: u64 = 1 << 10;
const ACCESS_FS_MAKE_BLOCK: u64 = 1 << 11;
const ACCESS_FS_MAKE_SYM: u64 = 1 << 12;
const ACCESS_FS_REFER: u64 = 1 << 13;
const ACCESS_FS_TRUNCATE: u64 = 1 << 14;

const ACCESS_NET_BIND_TCP: u64 = 1 << 0;
const ACCESS_NET_CONNECT_TCP: u64 = 1 << 1;

#[repr(C)]
struct RulesetAttr {
    handled_access_fs: u64,
    handled_access_net: u64,
}

#[repr(C, packed)]
struct PathBeneathAttr {
    allowed_access: u64,
    parent_fd: i32,
}

/// Highest Landlock ABI the running kernel supports, or `None`.
pub fn abi_version() -> Option<u32> {
    let v = unsafe {
        libc::syscall(
            libc::SYS_landlock_create_ruleset,
            std::ptr::null::<RulesetAttr>(),
            0usize,
            CREATE_RULESET_VERSION,
        )
    };
    (v > 0).then_some(v as u32)
}

/// A prepared ruleset, ready to be applied in a forked child.
pub struct WriteJail {
    ruleset: OwnedFd,
}

impl WriteJail {
    /// Builds a ruleset allowing writes only beneath `writable` (plus
    /// `/dev/null`). Returns `Ok(None)` when Landlock is unavailable.
    pub fn prepare(writable: &Path) -> io::Result<Option<WriteJail>> {
        let Some(abi) = abi_version() else { return Ok(None) };

        let mut fs_access = ACCESS_FS_WRITE_FILE
            | ACCESS_FS_REMOVE_DIR
            | ACCESS_FS_REMOVE_FILE
            | ACCESS_FS_MAKE_CHAR
            | ACCESS_FS_MAKE_DIR
            | ACCESS_FS_MAKE_REG
            | ACCESS_FS_MAKE_SOCK
            | ACCESS_FS_MAKE_FIFO
            | ACCESS_FS_MAKE_BLOCK
            | ACCESS_FS_MAKE_SYM;
        if abi >= 2 {
            fs_access |= ACCESS_FS_REFER;
        }
        if abi >= 3 {
            fs_access |= ACCESS_FS_TRUNCATE;
        }
        let net_access = if abi >= 4 { ACCESS_NET_BIND_TCP | ACCESS_NET_CONNECT_TCP } else { 0 };

        let attr = RulesetAttr { handled_access_fs: fs_access, handled_access_net: net_access };
        let attr_size = if abi >= 4 { std::mem::size_of::<RulesetAttr>() } else { std::mem::size_of::<u64>() };
        let fd = unsafe { libc::syscall(libc::SYS_landlock_create_ruleset, &attr as *const RulesetAttr, attr_size, 0u32) };
        if fd < 0 {
            return Err(io::Error::last_os_error());
        }
        let ruleset = unsafe { OwnedFd::from_raw_fd(fd as RawFd) };

        add_path_rule(&ruleset, writable, fs_access)?;
        let dev_null = Path::new("/dev/null");
        if dev_null.exists() {
            add_path_rule(&ruleset, dev_null, ACCESS_FS_WRITE_FILE | (fs_access & ACCESS_FS_TRUNCATE))?;
        }
        Ok(Some(WriteJail { ruleset }))
    }

    pub fn raw_fd(&self) -> RawFd {
        self.ruleset.as_raw_fd()
    }
}

fn add_path_rule(ruleset: &OwnedFd, path: &Path, access: u64) -> io::Result<()> {
    let c_path = CString::new(path.as_os_str().as_bytes()).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let fd = unsafe { libc::open(c_path.as_ptr(), libc::O_PATH | libc::O_CLOEXEC) };
    if fd < 0 {
        return Err(io::Error::last_os_error());
    }
    let parent = unsafe { OwnedFd::from_raw_fd(fd) };
    // Files only accept file-level rights.
    let access = if path.is_dir() { access } else { access & (ACCESS_FS_WRITE_FILE | ACCESS_FS_TRUNCATE) };
    let attr = PathBeneathAttr { allowed_access: access, parent_fd: parent.as_raw_fd() };
    let rc = unsafe {
        libc::syscall(
            libc::SYS_landlock_add_rule,
            ruleset.as_raw_fd(),
            RULE_PATH_BENEATH,
            &attr as *const PathBeneathAttr,
            0u32,
        )
    };
    if rc < 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(())
}

/// Applies a prepared ruleset to the calling process.
///
/// # Safety
/// Intended for the window between fork and exec: performs only raw
/// syscalls and touches no allocator state.
pub unsafe fn restrict_self(ruleset_fd: RawFd) -> io::Result<()> {
    if libc::prctl(libc::PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0 {
        return Err(io::Error::last_os_error());
    }
    if libc::syscall(libc::SYS_landlock_restrict_self, ruleset_fd, 0u32) != 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(())
}
