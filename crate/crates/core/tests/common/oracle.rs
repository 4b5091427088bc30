//! Byte builder written straight from the frame layout, sharing no code with
//! the library encoder.

use microlang::values::{BasicValue, ValueNode};

fn str(out: &mut Vec<u8>, s: &str) {
    let n = s.len() as u32;
    out.extend([(n >> 24) as u8, (n >> 16) as u8, (n >> 8) as u8, n as u8]);
    out.extend(s.bytes());
}

fn u32(out: &mut Vec<u8>, n: usize) {
    let n = n as u32;
    out.extend([(n >> 24) as u8, (n >> 16) as u8, (n >> 8) as u8, n as u8]);
}

fn u64(out: &mut Vec<u8>, n: u64) {
    for shift in (0..8).rev() {
        out.push((n >> (shift * 8)) as u8);
    }
}

fn value(out: &mut Vec<u8>, v: &ValueNode) {
    match v.root() {
        BasicValue::Void => out.push(0),
        BasicValue::Bool(b) => out.extend([1, *b as u8]),
        BasicValue::Int(i) => {
            out.push(2);
            u64(out, *i as u64);
        }
        BasicValue::Double(d) => {
            out.push(3);
            u64(out, d.to_bits());
        }
        BasicValue::String(s) => {
            out.push(4);
            str(out, s);
        }
    }
    u32(out, v.children().len());
    for (name, elems) in v.children() {
        str(out, name);
        u32(out, elems.len());
        for e in elems {
            value(out, e);
        }
    }
}

pub fn frame(kind: u8, corr: u64, op: &str, payload: &ValueNode) -> Vec<u8> {
    let mut body = vec![kind];
    u64(&mut body, corr);
    str(&mut body, op);
    value(&mut body, payload);
    let mut out = Vec::new();
    u32(&mut out, body.len());
    out.extend(body);
    out
}
