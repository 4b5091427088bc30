use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Spawn,
    Recv,
    Send,
    Buffer,
    Fault,
    Terminate,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Spawn => "spawn",
            EventKind::Recv => "recv",
            EventKind::Send => "send",
            EventKind::Buffer => "buffer",
            EventKind::Fault => "fault",
            EventKind::Terminate => "terminate",
        })
    }
}

/// One line of the structured trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Microseconds since the service started.
    pub ts: u64,
    pub service: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pid: Option<String>,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub port: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub transport: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fault: Option<String>,
}

impl Event {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }

    /// The event with timing and transport details removed, for comparing
    /// runs.
    pub fn normalized(&self) -> Event {
        Event {
            ts: 0,
            transport: None,
            ..self.clone()
        }
    }
}

/// Receives every event as it is recorded.
pub type EventSink = Arc<dyn Fn(&Event) + Send + Sync>;

pub(crate) struct EventLog {
    service: String,
    start: Instant,
    events: Arc<Mutex<Vec<Event>>>,
    sink: Option<EventSink>,
}

impl EventLog {
    pub fn new(service: &str, sink: Option<EventSink>) -> Self {
        EventLog {
            service: service.to_owned(),
            start: Instant::now(),
            events: Arc::default(),
            sink,
        }
    }

    pub fn shared(&self) -> Arc<Mutex<Vec<Event>>> {
        self.events.clone()
    }

    pub fn record(
        &self,
        pid: Option<&str>,
        kind: EventKind,
        op: Option<&str>,
        port: Option<&str>,
        transport: Option<&str>,
        fault: Option<String>,
    ) {
        let e = Event {
            ts: self.start.elapsed().as_micros() as u64,
            service: self.service.clone(),
            pid: pid.map(str::to_owned),
            kind,
            op: op.map(str::to_owned),
            port: port.map(str::to_owned),
            transport: transport.map(str::to_owned),
            fault,
        };
        if let Some(sink) = &self.sink {
            sink(&e);
        }
        self.events.lock().unwrap().push(e);
    }
}
