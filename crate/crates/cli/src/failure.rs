use std::fmt;

pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_USAGE, error: anyhow::anyhow!("{msg}") }
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_IO, error: error.into() }
    }

    pub fn failed(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_FAILED, error: anyhow::anyhow!("{msg}") }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait ResultExt<T> {
    /// Input/output trouble: exit code 3.
    fn io_ctx<C: fmt::Display + Send + Sync + 'static>(self, ctx: impl FnOnce() -> C) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn io_ctx<C: fmt::Display + Send + Sync + 'static>(self, ctx: impl FnOnce() -> C) -> Result<T, Failure> {
        self.map_err(|e| Failure::io(e.into().context(ctx())))
    }
}
