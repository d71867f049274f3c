use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{IngestError, Result};

/// Retry schedule for page fetches. Attempt `k` (1-based) waits
/// `min(base_timeout + (k-1)·timeout_increment, max_timeout)`; every call to
/// [`fetch_with_retry`] starts again from `base_timeout`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchPolicy {
    #[serde(with = "millis")]
    pub base_timeout: Duration,
    #[serde(with = "millis")]
    pub timeout_increment: Duration,
    #[serde(with = "millis")]
    pub max_timeout: Duration,
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub politeness_delay: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            base_timeout: Duration::from_secs(5),
            timeout_increment: Duration::from_secs(5),
            max_timeout: Duration::from_secs(30),
            max_attempts: 5,
            politeness_delay: Duration::from_millis(500),
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(IngestError::InvalidPolicy(msg.to_string()));
        if self.base_timeout.is_zero()
            || self.timeout_increment.is_zero()
            || self.max_timeout.is_zero()
            || self.politeness_delay.is_zero()
        {
            return fail("all durations must be positive");
        }
        if self.base_timeout > self.max_timeout {
            return fail("base_timeout exceeds max_timeout");
        }
        if self.max_attempts == 0 {
            return fail("max_attempts must be at least 1");
        }
        Ok(())
    }

    /// Timeout used for 1-based attempt `attempt`.
    pub fn timeout_for_attempt(&self, attempt: u32) -> Duration {
        let steps = attempt.saturating_sub(1);
        self.timeout_increment
            .checked_mul(steps)
            .and_then(|inc| self.base_timeout.checked_add(inc))
            .map_or(self.max_timeout, |t| t.min(self.max_timeout))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchFailure {
    /// No response within the attempt's timeout; retried.
    Timeout,
    /// Anything else (refused connection, HTTP error status, missing
    /// fixture); not retried.
    Other(String),
}

/// Request → (body | timeout | failure). Live HTTP, recorded fixtures and
/// scripted simulations all sit behind this.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, timeout: Duration) -> Result<String, FetchFailure>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn get(&self, url: &str, timeout: Duration) -> Result<String, FetchFailure> {
        (**self).get(url, timeout)
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn get(&self, url: &str, timeout: Duration) -> Result<String, FetchFailure> {
        (**self).get(url, timeout)
    }
}

/// Fetches `url`, retrying timed-out attempts with a growing timeout.
/// Non-timeout failures are returned immediately.
pub fn fetch_with_retry(url: &str, policy: &FetchPolicy, transport: &dyn Transport) -> Result<String> {
    policy.validate()?;
    for attempt in 1..=policy.max_attempts {
        let timeout = policy.timeout_for_attempt(attempt);
        match transport.get(url, timeout) {
            Ok(body) => {
                debug!(url, attempt, "fetched");
                return Ok(body);
            }
            Err(FetchFailure::Timeout) => {
                warn!(url, attempt, timeout_ms = timeout.as_millis() as u64, "request timed out");
            }
            Err(FetchFailure::Other(message)) => {
                return Err(IngestError::Transport { url: url.to_string(), message });
            }
        }
    }
    Err(IngestError::RetriesExhausted { url: url.to_string(), attempts: policy.max_attempts })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Timeout,
    Body(String),
    Fail(String),
}

/// Simulated transport that replays a fixed script of outcomes and records
/// every request it sees. Once the script runs out every request times out.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    script: Mutex<VecDeque<ScriptStep>>,
    calls: Mutex<Vec<(String, Duration)>>,
}

impl ScriptedTransport {
    pub fn new(script: impl IntoIterator<Item = ScriptStep>) -> Self {
        ScriptedTransport {
            script: Mutex::new(script.into_iter().collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// `timeouts` timeouts followed by a success with `body`.
    pub fn timeouts_then(timeouts: usize, body: &str) -> Self {
        Self::new(
            std::iter::repeat_n(ScriptStep::Timeout, timeouts)
                .chain(std::iter::once(ScriptStep::Body(body.to_string()))),
        )
    }

    pub fn always_timeout() -> Self {
        Self::default()
    }

    pub fn push(&self, step: ScriptStep) {
        self.script.lock().unwrap().push_back(step);
    }

    pub fn calls(&self) -> Vec<(String, Duration)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn timeouts_seen(&self) -> Vec<Duration> {
        self.calls().into_iter().map(|(_, t)| t).collect()
    }
}

impl Transport for ScriptedTransport {
    fn get(&self, url: &str, timeout: Duration) -> Result<String, FetchFailure> {
        self.calls.lock().unwrap().push((url.to_string(), timeout));
        match self.script.lock().unwrap().pop_front() {
            None | Some(ScriptStep::Timeout) => Err(FetchFailure::Timeout),
            Some(ScriptStep::Body(b)) => Ok(b),
            Some(ScriptStep::Fail(m)) => Err(FetchFailure::Other(m)),
        }
    }
}

/// Replays recorded pages from a directory. A URL resolves through
/// `index.toml` (`[urls]` table of url → file name) when present, otherwise
/// to [`FixtureTransport::file_name_for`].
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    root: PathBuf,
    index: HashMap<String, String>,
}

#[derive(Deserialize)]
struct FixtureIndex {
    #[serde(default)]
    urls: HashMap<String, String>,
}

impl FixtureTransport {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(IngestError::Config(format!(
                "fixture directory {} does not exist",
                root.display()
            )));
        }
        let index_path = root.join("index.toml");
        let index = if index_path.exists() {
            let text = std::fs::read_to_string(&index_path)?;
            toml::from_str::<FixtureIndex>(&text)
                .map_err(|e| IngestError::Config(format!("{}: {e}", index_path.display())))?
                .urls
        } else {
            HashMap::new()
        };
        Ok(FixtureTransport { root, index })
    }

    /// Scheme dropped, every character outside `[A-Za-z0-9.-]` replaced by
    /// `_`.
    pub fn file_name_for(url: &str) -> String {
        let rest = url.split_once("://").map_or(url, |(_, r)| r);
        rest.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect()
    }

    pub fn path_for(&self, url: &str) -> PathBuf {
        match self.index.get(url) {
            Some(name) => self.root.join(name),
            None => self.root.join(Self::file_name_for(url)),
        }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str, _timeout: Duration) -> Result<String, FetchFailure> {
        let path = self.path_for(url);
        std::fs::read_to_string(&path)
            .map_err(|e| FetchFailure::Other(format!("fixture {}: {e}", path.display())))
    }
}

/// Serializes requests per host and keeps at least `delay` between the end of
/// one request and the start of the next to the same host.
#[derive(Debug)]
pub struct HostPacer {
    delay: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl HostPacer {
    pub fn new(delay: Duration) -> Self {
        HostPacer { delay, hosts: Mutex::new(HashMap::new()) }
    }

    pub fn host_of(url: &str) -> &str {
        let rest = url.split_once("://").map_or(url, |(_, r)| r);
        let end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
        &rest[..end]
    }

    /// Runs `request` holding the host's slot.
    pub fn run<R>(&self, url: &str, request: impl FnOnce() -> R) -> R {
        let slot = self
            .hosts
            .lock()
            .unwrap()
            .entry(Self::host_of(url).to_ascii_lowercase())
            .or_default()
            .clone();
        let mut last = slot.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.delay {
                std::thread::sleep(self.delay - elapsed);
            }
        }
        let out = request();
        *last = Some(Instant::now());
        out
    }
}

/// Live HTTP transport, paced per host by the policy's politeness delay.
pub struct HttpTransport {
    agent: ureq::Agent,
    pacer: HostPacer,
}

impl HttpTransport {
    pub fn new(policy: &FetchPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .user_agent("ballotmap/0.1 (+election result archive)")
            .build()
            .into();
        HttpTransport { agent, pacer: HostPacer::new(policy.politeness_delay) }
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, timeout: Duration) -> Result<String, FetchFailure> {
        self.pacer.run(url, || {
            let response = self
                .agent
                .get(url)
                .config()
                .timeout_global(Some(timeout))
                .build()
                .call();
            match response {
                Ok(mut resp) => resp
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| FetchFailure::Other(e.to_string())),
                Err(ureq::Error::Timeout(_)) => Err(FetchFailure::Timeout),
                Err(e) => Err(FetchFailure::Other(e.to_string())),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(v: &[u64]) -> Vec<Duration> {
        v.iter().map(|&s| Duration::from_secs(s)).collect()
    }

    #[test]
    fn first_attempt_success_uses_base_timeout() {
        let t = ScriptedTransport::timeouts_then(0, "ok");
        let body = fetch_with_retry("http://x/a", &FetchPolicy::default(), &t).unwrap();
        assert_eq!(body, "ok");
        assert_eq!(t.timeouts_seen(), secs(&[5]));
    }

    #[test]
    fn two_timeouts_then_success() {
        let t = ScriptedTransport::timeouts_then(2, "ok");
        fetch_with_retry("http://x/a", &FetchPolicy::default(), &t).unwrap();
        assert_eq!(t.timeouts_seen(), secs(&[5, 10, 15]));
    }

    #[test]
    fn exhausted_after_max_attempts() {
        let t = ScriptedTransport::always_timeout();
        let err = fetch_with_retry("http://x/a", &FetchPolicy::default(), &t).unwrap_err();
        assert!(matches!(err, IngestError::RetriesExhausted { attempts: 5, .. }));
        assert_eq!(t.calls().len(), 5);
    }

    #[test]
    fn other_failures_are_not_retried() {
        let t = ScriptedTransport::new([ScriptStep::Fail("refused".into())]);
        let err = fetch_with_retry("http://x/a", &FetchPolicy::default(), &t).unwrap_err();
        assert!(matches!(err, IngestError::Transport { .. }));
        assert_eq!(t.calls().len(), 1);
    }

    #[test]
    fn schedule_caps_at_max_timeout() {
        let policy = FetchPolicy { max_attempts: 9, ..Default::default() };
        let got: Vec<_> = (1..=9).map(|k| policy.timeout_for_attempt(k)).collect();
        assert_eq!(got, secs(&[5, 10, 15, 20, 25, 30, 30, 30, 30]));
    }

    #[test]
    fn policy_validation() {
        let ok = FetchPolicy::default();
        assert!(ok.validate().is_ok());
        assert!(FetchPolicy { max_attempts: 0, ..ok }.validate().is_err());
        assert!(FetchPolicy { base_timeout: Duration::from_secs(40), ..ok }.validate().is_err());
        assert!(FetchPolicy { politeness_delay: Duration::ZERO, ..ok }.validate().is_err());
        let t = ScriptedTransport::timeouts_then(0, "ok");
        assert!(fetch_with_retry("u", &FetchPolicy { max_attempts: 0, ..ok }, &t).is_err());
        assert!(t.calls().is_empty());
    }

    #[test]
    fn fixture_names_and_index() {
        assert_eq!(
            FixtureTransport::file_name_for("https://example.org/results?y=2019&t=p"),
            "example.org_results_y_2019_t_p"
        );
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("index.toml"), "[urls]\n\"https://a/b\" = \"page.html\"\n")
            .unwrap();
        std::fs::write(dir.path().join("page.html"), "<p>hi</p>").unwrap();
        let t = FixtureTransport::open(dir.path()).unwrap();
        assert_eq!(t.get("https://a/b", Duration::from_secs(1)).unwrap(), "<p>hi</p>");
        assert!(matches!(t.get("https://a/c", Duration::from_secs(1)), Err(FetchFailure::Other(_))));
        assert!(FixtureTransport::open(dir.path().join("missing")).is_err());
    }

    #[test]
    fn host_extraction() {
        assert_eq!(HostPacer::host_of("https://Example.org:8080/a/b?q"), "Example.org:8080");
        assert_eq!(HostPacer::host_of("example.org"), "example.org");
    }

    #[test]
    fn pacer_spaces_requests_to_one_host() {
        let pacer = Arc::new(HostPacer::new(Duration::from_millis(40)));
        let start = Instant::now();
        let handles: Vec<_> = (0..3)
            .map(|_| {
                let p = pacer.clone();
                std::thread::spawn(move || p.run("http://h/x", Instant::now))
            })
            .collect();
        let mut starts: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        starts.sort();
        for w in starts.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_millis(40));
        }
        // other hosts are not held back
        let t0 = Instant::now();
        pacer.run("http://other/x", || ());
        assert!(t0.elapsed() < Duration::from_millis(40));
        assert!(start.elapsed() >= Duration::from_millis(80));
    }
}
