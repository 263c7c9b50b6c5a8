//! Line-delimited JSON round streams.
//!
//! | mode            | line                         |
//! |-----------------|------------------------------|
//! | covariate       | `{"x":[1.5,1.0],"y":1}`      |
//! | forecast-stream | `{"p":0.42,"y":0}`           |
//! | multi-expert    | `{"p":[0.1,0.5,0.9],"y":1}`  |

use std::fs::File;
use std::io::{BufRead, BufReader, Lines, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{GeneratorKind, Mode};
use super::nature::{Context, Nature, OutcomeRule};
use crate::error::{Error, Result};

/// One fully specified protocol round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub context: Context,
    pub y: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovariateLine {
    x: Vec<f64>,
    y: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForecastLine {
    p: f64,
    y: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpertsLine {
    p: Vec<f64>,
    y: u8,
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("forecast {p} is outside [0, 1]")));
    }
    Ok(())
}

fn parse_round(mode: Mode, text: &str) -> Result<Round> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    let (context, y) = match mode {
        Mode::Covariate => {
            let l: CovariateLine = serde_json::from_str(text).map_err(parse_err)?;
            if l.x.is_empty() || l.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("covariates must be a nonempty array of finite reals"));
            }
            (Context::Covariates(l.x), l.y)
        }
        Mode::ForecastStream => {
            let l: ForecastLine = serde_json::from_str(text).map_err(parse_err)?;
            check_probability(l.p)?;
            (Context::Forecast(l.p), l.y)
        }
        Mode::MultiExpert => {
            let l: ExpertsLine = serde_json::from_str(text).map_err(parse_err)?;
            if l.p.is_empty() {
                return Err(Error::domain("expert forecast array is empty"));
            }
            for &p in &l.p {
                check_probability(p)?;
            }
            (Context::Experts(l.p), l.y)
        }
    };
    if y > 1 {
        return Err(Error::domain(format!("outcome must be 0 or 1, got {y}")));
    }
    Ok(Round { context, y })
}

fn width(context: &Context) -> usize {
    match context {
        Context::Covariates(x) => x.len(),
        Context::Forecast(_) => 1,
        Context::Experts(p) => p.len(),
    }
}

/// Streaming reader; every error carries its 1-based line number.
pub struct StreamReader<R> {
    lines: Lines<R>,
    mode: Mode,
    line_no: usize,
    width: Option<usize>,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(reader: R, mode: Mode) -> Self {
        Self {
            lines: reader.lines(),
            mode,
            line_no: 0,
            width: None,
        }
    }

    /// Lines consumed so far.
    pub fn line_no(&self) -> usize {
        self.line_no
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<Round>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            let at_line = |e: Error| match e {
                Error::Parse { message, .. } => Error::Parse { line: line_no, message },
                other => Error::Line {
                    line: line_no,
                    source: Box::new(other),
                },
            };
            let round = match parse_round(self.mode, &line) {
                Ok(r) => r,
                Err(e) => return Some(Err(at_line(e))),
            };
            let w = width(&round.context);
            match self.width {
                None => self.width = Some(w),
                Some(expected) if expected != w => {
                    return Some(Err(at_line(Error::domain(format!(
                        "row has width {w}, earlier rows have width {expected}"
                    )))))
                }
                _ => {}
            }
            return Some(Ok(round));
        }
    }
}

/// Opens a stream file for reading in `mode`.
pub fn ingest_stream(path: &Path, mode: Mode) -> Result<StreamReader<BufReader<File>>> {
    let file = File::open(path)?;
    Ok(StreamReader::new(BufReader::new(file), mode))
}

pub fn write_round<W: Write>(out: &mut W, round: &Round) -> Result<()> {
    match &round.context {
        Context::Covariates(x) => serde_json::to_writer(&mut *out, &CovariateLine { x: x.clone(), y: round.y })?,
        Context::Forecast(p) => serde_json::to_writer(&mut *out, &ForecastLine { p: *p, y: round.y })?,
        Context::Experts(p) => serde_json::to_writer(&mut *out, &ExpertsLine { p: p.clone(), y: round.y })?,
    }
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `horizon` rounds of a non-adaptive generator, seeded exactly as
/// [`run_experiment`](super::run_experiment) seeds it for the same master seed.
pub fn generate_stream<W: Write>(kind: GeneratorKind, mode: Mode, seed: u64, horizon: u64, mut out: W) -> Result<()> {
    if kind.is_adaptive() {
        return Err(Error::Config(format!(
            "generator `{kind}` reacts to the forecaster and cannot be written to a stream"
        )));
    }
    let mut nature = Nature::new(kind, mode, super::nature_seed(seed))?;
    for t in 1..=horizon {
        let revealed = nature.reveal(t);
        let OutcomeRule::Fixed(y) = revealed.rule else {
            unreachable!("non-adaptive generators fix outcomes up front")
        };
        write_round(
            &mut out,
            &Round {
                context: revealed.context,
                y,
            },
        )?;
    }
    out.flush()?;
    Ok(())
}
