use std::fmt;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure {
            kind: ExitKind::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure {
            kind: ExitKind::Data,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

/// Tags an error with the exit status it should produce.
pub trait Classify<T> {
    fn or_usage(self) -> Result<T, Failure>;
    fn or_data(self) -> Result<T, Failure>;
    fn or_runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: ExitKind::Usage,
            error: e.into(),
        })
    }

    fn or_data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: ExitKind::Data,
            error: e.into(),
        })
    }

    fn or_runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: ExitKind::Runtime,
            error: e.into(),
        })
    }
}
