//! `sodep-lite`: a length-prefixed binary framing, all integers big-endian.
//!
//! ```text
//! frame := len:u32 body
//! body  := kind:u8 corrId:u64 str(operation) value
//! str   := len:u32 utf8-bytes
//! value := tag:u8 payload childCount:u32 (str(name) elemCount:u32 value*)*
//! ```
//!
//! Value tags: 0 void, 1 bool (u8), 2 int (i64), 3 double (binary64 bits),
//! 4 string.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::values::{BasicValue, ValueNode};

/// Frames larger than this are rejected before allocating.
pub const MAX_FRAME: u32 = 64 * 1024 * 1024;
const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Request = 0,
    Response = 1,
    Fault = 2,
}

impl MessageKind {
    fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(MessageKind::Request),
            1 => Some(MessageKind::Response),
            2 => Some(MessageKind::Fault),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub kind: MessageKind,
    pub corr_id: u64,
    pub operation: String,
    pub payload: ValueNode,
}

impl WireMessage {
    pub fn request(corr_id: u64, operation: impl Into<String>, payload: ValueNode) -> Self {
        WireMessage {
            kind: MessageKind::Request,
            corr_id,
            operation: operation.into(),
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed frame at byte {offset}: {reason}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: String,
}

/// Encodes one complete frame.
pub fn encode_sodep_lite(msg: &WireMessage) -> Vec<u8> {
    let mut body = Vec::new();
    body.push(msg.kind as u8);
    body.extend_from_slice(&msg.corr_id.to_be_bytes());
    put_str(&mut body, &msg.operation);
    put_value(&mut body, &msg.payload);
    let mut frame = Vec::with_capacity(body.len() + 4);
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    frame
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_value(out: &mut Vec<u8>, v: &ValueNode) {
    match v.root() {
        BasicValue::Void => out.push(0),
        BasicValue::Bool(b) => {
            out.push(1);
            out.push(u8::from(*b));
        }
        BasicValue::Int(i) => {
            out.push(2);
            out.extend_from_slice(&i.to_be_bytes());
        }
        BasicValue::Double(d) => {
            out.push(3);
            out.extend_from_slice(&d.to_bits().to_be_bytes());
        }
        BasicValue::String(s) => {
            out.push(4);
            put_str(out, s);
        }
    }
    out.extend_from_slice(&(v.children().len() as u32).to_be_bytes());
    for (name, elems) in v.children() {
        put_str(out, name);
        out.extend_from_slice(&(elems.len() as u32).to_be_bytes());
        for e in elems {
            put_value(out, e);
        }
    }
}

/// Decodes a single frame that must span all of `bytes`.
pub fn decode_sodep_lite(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
    let (msg, used) = decode_frame(bytes)?;
    if used != bytes.len() {
        return Err(DecodeError {
            offset: used,
            reason: format!("{} trailing bytes after frame", bytes.len() - used),
        });
    }
    Ok(msg)
}

/// Decodes the frame at the start of `bytes`, returning it and its length.
pub fn decode_frame(bytes: &[u8]) -> Result<(WireMessage, usize), DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let len = r.u32()? as usize;
    let available = bytes.len() - 4;
    if available < len {
        return Err(DecodeError {
            offset: 4,
            reason: format!("frame truncated: length says {len} bytes, {available} follow"),
        });
    }
    let mut body = Reader {
        bytes: &bytes[..4 + len],
        pos: 4,
    };
    let msg = body.message()?;
    if body.pos != 4 + len {
        return Err(DecodeError {
            offset: body.pos,
            reason: "frame body has trailing bytes".into(),
        });
    }
    Ok((msg, 4 + len))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn fail<T>(&self, at: usize, reason: impl Into<String>) -> Result<T, DecodeError> {
        Err(DecodeError {
            offset: at,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&[u8], DecodeError> {
        if self.bytes.len() - self.pos < n {
            return self.fail(self.pos, format!("truncated: need {n} more bytes"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, DecodeError> {
        let len = self.u32()? as usize;
        let at = self.pos;
        let raw = self.take(len)?;
        match std::str::from_utf8(raw) {
            Ok(s) => Ok(s.to_owned()),
            Err(e) => self.fail(at + e.valid_up_to(), "invalid UTF-8"),
        }
    }

    fn message(&mut self) -> Result<WireMessage, DecodeError> {
        let at = self.pos;
        let kind = match MessageKind::from_u8(self.u8()?) {
            Some(k) => k,
            None => return self.fail(at, format!("bad message kind {}", self.bytes[at])),
        };
        let corr_id = self.u64()?;
        let operation = self.str()?;
        let payload = self.value(0)?;
        Ok(WireMessage {
            kind,
            corr_id,
            operation,
            payload,
        })
    }

    fn value(&mut self, depth: usize) -> Result<ValueNode, DecodeError> {
        let at = self.pos;
        if depth > MAX_DEPTH {
            return self.fail(at, "value nesting too deep");
        }
        let root = match self.u8()? {
            0 => BasicValue::Void,
            1 => {
                let b_at = self.pos;
                match self.u8()? {
                    0 => BasicValue::Bool(false),
                    1 => BasicValue::Bool(true),
                    other => return self.fail(b_at, format!("bad bool byte {other}")),
                }
            }
            2 => BasicValue::Int(self.u64()? as i64),
            3 => BasicValue::Double(f64::from_bits(self.u64()?)),
            4 => BasicValue::String(self.str()?),
            tag => return self.fail(at, format!("bad value tag {tag}")),
        };
        let mut node = ValueNode::leaf(root);
        let count = self.u32()?;
        for _ in 0..count {
            let name_at = self.pos;
            let name = self.str()?;
            if node.child(&name).is_some() {
                return self.fail(name_at, format!("duplicate child name {name}"));
            }
            let n_at = self.pos;
            let n = self.u32()?;
            if n == 0 {
                return self.fail(n_at, "empty child vector");
            }
            // Every element takes at least five bytes; reject absurd counts early.
            if (n as usize).saturating_mul(5) > self.bytes.len() - self.pos {
                return self.fail(n_at, format!("truncated: {n} elements cannot fit"));
            }
            let mut elems = Vec::with_capacity(n as usize);
            for _ in 0..n {
                elems.push(self.value(depth + 1)?);
            }
            node.set_children(name, elems);
        }
        Ok(node)
    }
}

/// Reads one frame from a stream. `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<WireMessage>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let n = u32::from_be_bytes(len);
    if n > MAX_FRAME {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {n} bytes exceeds limit"),
        ));
    }
    let mut frame = len.to_vec();
    frame.resize(4 + n as usize, 0);
    r.read_exact(&mut frame[4..])?;
    decode_sodep_lite(&frame)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_frame(w: &mut impl Write, msg: &WireMessage) -> io::Result<()> {
    w.write_all(&encode_sodep_lite(msg))?;
    w.flush()
}
