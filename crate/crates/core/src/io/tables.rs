//! CSV exports of value vectors, Q-tables and run traces.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value re-parses to the identical `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::qlearning::{QTables, RunTrace};
use crate::value::ValueVector;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn join_indices(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn split_indices(text: &str) -> Result<Vec<usize>> {
    text.split(';')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad index {t:?}: {e}")))
        })
        .collect()
}

fn parse_f64(text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {text:?}: {e}")))
}

fn parse_usize(text: &str) -> Result<usize> {
    text.trim()
        .parse::<usize>()
        .map_err(|e| Error::Parse(format!("bad index {text:?}: {e}")))
}

fn expect_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected CSV header {:?}, expected {expected:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

pub const VALUE_HEADER: [&str; 4] = ["firm", "state", "prev_price_vector", "value"];

pub fn write_values(game: &Game, v: &ValueVector, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VALUE_HEADER)?;
    for e in v.entries(game) {
        w.write_record([
            e.firm.to_string(),
            e.state.to_string(),
            join_indices(&e.prev_prices),
            fmt_f64(e.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values(game: &Game, input: impl Read) -> Result<ValueVector> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(&mut r, &VALUE_HEADER)?;
    let mut v = ValueVector::zeros(game);
    let mut seen = vec![false; game.firms() * game.num_augmented()];
    for rec in r.records() {
        let rec = rec?;
        let firm = parse_usize(&rec[0])?;
        let state = parse_usize(&rec[1])?;
        game.check_firm(firm)?;
        game.check_state(state)?;
        let aug = game.augmented(state, game.joint_space().encode(&split_indices(&rec[2])?)?);
        v.set(firm, aug, parse_f64(&rec[3])?);
        seen[firm * game.num_augmented() + aug] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse("value CSV does not cover every coordinate".into()));
    }
    Ok(v)
}

pub const QTABLE_HEADER: [&str; 4] = ["firm", "state_indices", "action", "value"];

/// `state_indices` is the environment state followed by the previous joint
/// price vector, semicolon-joined.
pub fn write_qtables(game: &Game, q: &QTables, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QTABLE_HEADER)?;
    let space = game.joint_space();
    for i in 0..q.firms() {
        for aug in 0..q.augmented() {
            let (s, prev) = game.split_augmented(aug);
            let mut idx = vec![s];
            idx.extend(space.decode(prev));
            let key = join_indices(&idx);
            for a in 0..q.actions() {
                w.write_record([i.to_string(), key.clone(), a.to_string(), fmt_f64(q.get(i, aug, a))])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_qtables(game: &Game, input: impl Read) -> Result<QTables> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(&mut r, &QTABLE_HEADER)?;
    let mut q = QTables::zeros(game);
    let mut seen = vec![false; q.as_slice().len()];
    let k = game.num_actions();
    for rec in r.records() {
        let rec = rec?;
        let firm = parse_usize(&rec[0])?;
        game.check_firm(firm)?;
        let idx = split_indices(&rec[1])?;
        let (&state, prev) = idx
            .split_first()
            .ok_or_else(|| Error::Parse("empty state_indices".into()))?;
        game.check_state(state)?;
        let aug = game.augmented(state, game.joint_space().encode(prev)?);
        let action = parse_usize(&rec[2])?;
        if action >= k {
            return Err(Error::Index(format!("action {action} outside grid of {k} prices")));
        }
        q.set(firm, aug, action, parse_f64(&rec[3])?);
        seen[(firm * game.num_augmented() + aug) * k + action] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Parse("Q-table CSV does not cover every cell".into()));
    }
    Ok(q)
}

pub const TRACE_HEADER: [&str; 9] = [
    "t",
    "phase",
    "firm",
    "prev_prices",
    "action",
    "reward",
    "q_chosen",
    "alpha_t",
    "state",
];

/// One row per period and firm.
pub fn write_trace(game: &Game, trace: &RunTrace, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let space = game.joint_space();
    for step in &trace.steps {
        let prev = join_indices(&space.decode(step.prev));
        for i in 0..game.firms() {
            w.write_record([
                step.t.to_string(),
                step.phase.as_str().to_string(),
                i.to_string(),
                prev.clone(),
                space.action_of(step.joint, i).to_string(),
                fmt_f64(step.rewards[i]),
                fmt_f64(step.q_chosen[i]),
                fmt_f64(step.alphas[i]),
                step.state.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub phase: String,
    pub firm: usize,
    pub prev_prices: Vec<usize>,
    pub action: usize,
    pub reward: f64,
    pub q_chosen: f64,
    pub alpha_t: f64,
    pub state: usize,
}

pub fn read_trace(input: impl Read) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(&mut r, &TRACE_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TraceRow {
                t: parse_usize(&rec[0])?,
                phase: rec[1].to_string(),
                firm: parse_usize(&rec[2])?,
                prev_prices: split_indices(&rec[3])?,
                action: parse_usize(&rec[4])?,
                reward: parse_f64(&rec[5])?,
                q_chosen: parse_f64(&rec[6])?,
                alpha_t: parse_f64(&rec[7])?,
                state: parse_usize(&rec[8])?,
            })
        })
        .collect()
}
