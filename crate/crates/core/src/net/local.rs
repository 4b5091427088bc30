//! In-process transport: named listeners in a registry, connected by
//! in-memory byte pipes. Delivery is ordered and reliable; a link can carry a
//! fixed delay to make ordering effects observable in tests.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::TransportError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("listener closed")]
pub struct ListenerClosed;

#[derive(Default)]
struct PipeState {
    chunks: VecDeque<(Instant, Vec<u8>)>,
    closed: bool,
}

/// One direction of a connection.
#[derive(Default)]
struct Pipe {
    state: Mutex<PipeState>,
    ready: Condvar,
}

impl Pipe {
    fn write(&self, data: &[u8], delay: Duration) -> io::Result<()> {
        let mut st = self.state.lock().unwrap();
        if st.closed {
            return Err(io::ErrorKind::BrokenPipe.into());
        }
        // Never deliver before an earlier chunk: keeps the link ordered.
        let mut due = Instant::now() + delay;
        if let Some((last, _)) = st.chunks.back() {
            due = due.max(*last);
        }
        st.chunks.push_back((due, data.to_vec()));
        self.ready.notify_all();
        Ok(())
    }

    fn read(&self, buf: &mut [u8], timeout: Option<Duration>) -> io::Result<usize> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut st = self.state.lock().unwrap();
        loop {
            let now = Instant::now();
            if let Some((due, _)) = st.chunks.front() {
                if *due <= now {
                    let (_, chunk) = st.chunks.front_mut().unwrap();
                    let n = buf.len().min(chunk.len());
                    buf[..n].copy_from_slice(&chunk[..n]);
                    chunk.drain(..n);
                    if chunk.is_empty() {
                        st.chunks.pop_front();
                    }
                    return Ok(n);
                }
            } else if st.closed {
                return Ok(0);
            }
            let mut wait = st.chunks.front().map(|(due, _)| *due - now);
            if let Some(d) = deadline {
                if d <= now {
                    return Err(io::ErrorKind::TimedOut.into());
                }
                wait = Some(wait.map_or(d - now, |w| w.min(d - now)));
            }
            st = match wait {
                Some(w) => self.ready.wait_timeout(st, w).unwrap().0,
                None => self.ready.wait(st).unwrap(),
            };
        }
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }
}

struct Ends {
    rx: Arc<Pipe>,
    tx: Arc<Pipe>,
    delay: Duration,
    read_timeout: Mutex<Option<Duration>>,
}

impl Drop for Ends {
    fn drop(&mut self) {
        self.tx.close();
        self.rx.close();
    }
}

/// One side of an in-memory connection. Clones share the same side; the
/// connection closes when the last clone is dropped.
#[derive(Clone)]
pub struct LocalStream {
    ends: Arc<Ends>,
}

impl LocalStream {
    fn pair(delay: Duration) -> (LocalStream, LocalStream) {
        let a = Arc::new(Pipe::default());
        let b = Arc::new(Pipe::default());
        let mk = |rx: &Arc<Pipe>, tx: &Arc<Pipe>| LocalStream {
            ends: Arc::new(Ends {
                rx: rx.clone(),
                tx: tx.clone(),
                delay,
                read_timeout: Mutex::new(None),
            }),
        };
        (mk(&a, &b), mk(&b, &a))
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) {
        *self.ends.read_timeout.lock().unwrap() = t;
    }

    /// Closes the sending direction; the peer reads end-of-stream.
    pub fn shutdown_write(&self) {
        self.ends.tx.close();
    }
}

impl Read for LocalStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        let timeout = *self.ends.read_timeout.lock().unwrap();
        self.ends.rx.read(buf, timeout)
    }
}

impl Write for LocalStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.ends.tx.write(buf, self.ends.delay)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Default)]
struct RegistryInner {
    listeners: HashMap<String, Sender<LocalStream>>,
    delays: HashMap<String, Duration>,
}

/// Names reachable through `local://` locations. Cheap to clone; clones
/// share the same namespace.
#[derive(Clone, Default)]
pub struct LocalRegistry {
    inner: Arc<Mutex<RegistryInner>>,
}

impl LocalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn listen(&self, name: &str) -> Result<LocalListener, TransportError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.listeners.contains_key(name) {
            return Err(TransportError::AddressInUse(format!("local://{name}")));
        }
        let (tx, rx) = mpsc::channel();
        inner.listeners.insert(name.to_owned(), tx);
        Ok(LocalListener {
            name: name.to_owned(),
            incoming: Mutex::new(rx),
            registry: self.clone(),
        })
    }

    pub fn dial(&self, name: &str) -> Result<LocalStream, TransportError> {
        let inner = self.inner.lock().unwrap();
        let tx = inner
            .listeners
            .get(name)
            .ok_or_else(|| TransportError::UnknownLocal(name.to_owned()))?;
        let delay = inner.delays.get(name).copied().unwrap_or_default();
        let (client, server) = LocalStream::pair(delay);
        tx.send(server)
            .map_err(|_| TransportError::UnknownLocal(name.to_owned()))?;
        Ok(client)
    }

    /// Delay applied to every chunk written on links dialed to `name` later.
    pub fn set_delay(&self, name: &str, delay: Duration) {
        self.inner.lock().unwrap().delays.insert(name.to_owned(), delay);
    }

    pub fn is_bound(&self, name: &str) -> bool {
        self.inner.lock().unwrap().listeners.contains_key(name)
    }

    fn unregister(&self, name: &str) {
        self.inner.lock().unwrap().listeners.remove(name);
    }
}

/// Accepts connections dialed to one registry name; unregisters on drop.
pub struct LocalListener {
    name: String,
    incoming: Mutex<Receiver<LocalStream>>,
    registry: LocalRegistry,
}

impl LocalListener {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Waits for the next connection; `None` once closed.
    pub fn accept_timeout(&self, timeout: Duration) -> Result<Option<LocalStream>, ListenerClosed> {
        match self.incoming.lock().unwrap().recv_timeout(timeout) {
            Ok(s) => Ok(Some(s)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(ListenerClosed),
        }
    }

    /// Stops accepting: later dials fail with `UnknownLocal`.
    pub fn close(&self) {
        self.registry.unregister(&self.name);
    }
}

impl Drop for LocalListener {
    fn drop(&mut self) {
        self.close();
    }
}
