use std::future::Future;
use std::time::Duration;

use super::BackendError;

/// Bounded retry with capped exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retry_limit: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl RetryPolicy {
    pub fn new(retry_limit: u32, base_delay: Duration) -> Self {
        RetryPolicy { retry_limit, base_delay, max_delay: Duration::from_secs(30) }
    }

    /// Delay before retry number `retry` (0-based). Non-decreasing in `retry`.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(16)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `op` up to `retry_limit + 1` times. Returns the final result and
    /// the number of attempts made.
    pub async fn run<T, F, Fut>(&self, mut op: F) -> (Result<T, BackendError>, u32)
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, BackendError>>,
    {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match op().await {
                Ok(v) => return (Ok(v), attempts),
                Err(e) if e.is_retryable() && attempts <= self.retry_limit => {
                    let wait = self.delay(attempts - 1);
                    tracing::warn!(attempt = attempts, ?wait, error = %e, "retrying completion");
                    if !wait.is_zero() {
                        tokio::time::sleep(wait).await;
                    }
                }
                Err(e) => return (Err(e), attempts),
            }
        }
    }
}
