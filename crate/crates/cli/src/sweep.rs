//! Parameter sweeps. Rows are computed on a rayon pool and returned in sweep order.

use rayon::prelude::*;

use crate::error::CliError;
use crate::output::Row;
use crate::settings::{parse_count, parse_f64, Choice, Settings};
use crate::{asymptotic_row, finite_row};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepVar {
    #[value(name = "L")]
    Length,
    #[value(name = "N_source", alias = "N")]
    NSource,
    #[value(name = "lambda")]
    Lambda,
}

impl SweepVar {
    fn name(self) -> &'static str {
        match self {
            SweepVar::Length => "L",
            SweepVar::NSource => "N_source",
            SweepVar::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepValues {
    /// Pulse counts are kept exact.
    Counts(Vec<u64>),
    Reals(Vec<f64>),
}

impl SweepValues {
    pub fn len(&self) -> usize {
        match self {
            SweepValues::Counts(v) => v.len(),
            SweepValues::Reals(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn render(&self) -> String {
        match self {
            SweepValues::Counts(v) => v.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            SweepValues::Reals(v) => v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(","),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub values: SweepValues,
    pub asymptotic: bool,
}

/// `count` points from `start` to `stop`, endpoints exact.
pub fn spaced(start: f64, stop: f64, count: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if count == 0 {
        return Err(CliError::Usage("range count must be >= 1".into()));
    }
    if count == 1 {
        return if start == stop {
            Ok(vec![start])
        } else {
            Err(CliError::Usage("a one-point range needs start == stop".into()))
        };
    }
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(CliError::Usage("log range needs positive ends".into()));
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                start
            } else if i == count - 1 {
                stop
            } else {
                let t = i as f64 / last;
                if log {
                    (start.ln() + (stop.ln() - start.ln()) * t).exp()
                } else {
                    start + (stop - start) * t
                }
            }
        })
        .collect())
}

fn strictly_monotone<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) || v.windows(2).all(|w| w[0] > w[1])
}

impl SweepSpec {
    pub fn parse(var: SweepVar, values: Option<&str>, range: Option<&str>, asymptotic: bool) -> Result<Self, CliError> {
        if asymptotic && var == SweepVar::NSource {
            return Err(CliError::Usage("an asymptotic sweep cannot vary N_source".into()));
        }
        let usage = |m: String| CliError::Usage(m);
        let values = match (values, range) {
            (Some(list), None) => {
                let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                match var {
                    SweepVar::NSource => SweepValues::Counts(
                        items.iter().map(|s| parse_count(s)).collect::<Result<_, _>>().map_err(usage)?,
                    ),
                    _ => {
                        SweepValues::Reals(items.iter().map(|s| parse_f64(s)).collect::<Result<_, _>>().map_err(usage)?)
                    }
                }
            }
            (None, Some(r)) => {
                let parts: Vec<&str> = r.split(',').map(str::trim).collect();
                if !(3..=4).contains(&parts.len()) {
                    return Err(usage(format!("range `{r}` must be start,stop,count[,lin|log]")));
                }
                let start = parse_f64(parts[0]).map_err(usage)?;
                let stop = parse_f64(parts[1]).map_err(usage)?;
                let count: usize = parts[2].parse().map_err(|_| usage(format!("bad range count `{}`", parts[2])))?;
                let log = match parts.get(3).copied().unwrap_or("lin") {
                    "lin" => false,
                    "log" => true,
                    other => return Err(usage(format!("range scale `{other}` is not lin or log"))),
                };
                let xs = spaced(start, stop, count, log)?;
                match var {
                    SweepVar::NSource => SweepValues::Counts(
                        xs.iter()
                            .map(|x| parse_count(&format!("{}", x.round())))
                            .collect::<Result<_, _>>()
                            .map_err(usage)?,
                    ),
                    _ => SweepValues::Reals(xs),
                }
            }
            _ => return Err(usage("give exactly one of --values and --range".into())),
        };
        let ok = match &values {
            SweepValues::Counts(v) => !v.is_empty() && strictly_monotone(v),
            SweepValues::Reals(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()) && strictly_monotone(v),
        };
        if !ok {
            return Err(usage("sweep values must be nonempty, finite and strictly monotone".into()));
        }
        Ok(Self { var, values, asymptotic })
    }

    pub fn header_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("sweep", self.var.name().to_string()),
            ("values", self.values.render()),
            ("asymptotic", self.asymptotic.to_string()),
        ]
    }

    /// Settings for row `i`: the fixed settings with the swept value substituted.
    pub fn row_settings(&self, base: &Settings, i: usize) -> Settings {
        let mut s = base.clone();
        match (&self.values, self.var) {
            (SweepValues::Counts(v), _) => s.n_source = v[i],
            (SweepValues::Reals(v), SweepVar::Length) => s.length_km = v[i],
            (SweepValues::Reals(v), SweepVar::Lambda) => s.lambda = Choice::Fixed(v[i]),
            (SweepValues::Reals(v), SweepVar::NSource) => s.n_source = v[i] as u64,
        }
        s
    }
}

/// Evaluates every row, at most `base.jobs` at a time.
pub fn run(spec: &SweepSpec, base: &Settings) -> Result<Vec<Row>, CliError> {
    // fail on bad fixed parameters before spawning anything
    base.key_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", base.jobs)))?;
    let results: Vec<Result<Row, CliError>> = pool.install(|| {
        (0..spec.values.len())
            .into_par_iter()
            .map(|i| {
                let s = spec.row_settings(base, i);
                if spec.asymptotic {
                    asymptotic_row(&s)
                } else {
                    finite_row(&s).map(|(row, _)| row)
                }
            })
            .collect()
    });
    results.into_iter().collect()
}
