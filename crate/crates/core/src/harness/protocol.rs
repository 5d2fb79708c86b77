use crate::error::{CocoError, Result};

/// Enforces act-then-reveal: round `t`'s outcome can only be read after
/// the learner's round-`t` action has been committed.
#[derive(Debug, Default)]
pub struct RoundProtocol {
    committed: u64,
    revealed: u64,
}

impl RoundProtocol {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that the action for round `t` is fixed.
    pub fn commit(&mut self, t: u64) -> Result<()> {
        if t != self.revealed + 1 || self.committed != self.revealed {
            return Err(CocoError::ProtocolViolation(
                "action committed out of order",
            ));
        }
        self.committed = t;
        Ok(())
    }

    /// Reads round `t`'s outcome through `source`.
    pub fn reveal<T>(&mut self, t: u64, source: impl FnOnce(u64) -> Result<T>) -> Result<T> {
        if self.committed != t || self.revealed + 1 != t {
            return Err(CocoError::ProtocolViolation(
                "outcome queried before the action was committed",
            ));
        }
        let out = source(t)?;
        self.revealed = t;
        Ok(out)
    }
}
