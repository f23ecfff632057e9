use std::path::PathBuf;

use clap::Args;
use dptune_core::simulator::protocol_epsilon;
use dptune_core::{steps_for_epochs, AlphaGrid, MechanismSpec, Variant};

use crate::exit::{CliResult, Failure};
use crate::output::{csv_bytes, emit, write_atomic};
use crate::svg::{Plot, Series};

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Sampling ratio of the DP-SGD base mechanism.
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub sigma: f64,
    /// Training length of the base mechanism; steps = round(epochs / gamma).
    #[arg(long)]
    pub epochs: f64,
    /// Expected number of candidates.
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub delta: f64,
    /// Tuning-set ratios: a comma list (`0.05,0.1`) or `start:stop:step`.
    #[arg(long, value_parser = parse_q_grid)]
    pub q_grid: QGrid,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QGrid(pub Vec<f64>);

fn parse_q_grid(s: &str) -> Result<QGrid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    let qs = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err("range must be start:stop:step".into());
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        // Index-based so values do not drift; rounded to 12 decimals so
        // 0.05·3 prints as 0.15.
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| ((start + step * i as f64) * 1e12).round() / 1e12).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if qs.is_empty() {
        return Err("empty q grid".into());
    }
    if let Some(q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(format!("q must lie in [0, 1], got {q}"));
    }
    Ok(QGrid(qs))
}

pub fn run(args: &CompareArgs) -> CliResult {
    let steps = steps_for_epochs(args.gamma, args.epochs);
    if steps == 0 {
        return Err(Failure::usage("epochs / gamma rounds to zero steps"));
    }
    let base = MechanismSpec::dp_sgd(args.sigma, args.gamma, steps).curve(&AlphaGrid::default())?;
    let mut rows = Vec::with_capacity(args.q_grid.0.len());
    for &q in &args.q_grid.0 {
        let mut eps = [0.0; 3];
        for (slot, v) in eps.iter_mut().zip(Variant::ALL) {
            *slot = protocol_epsilon(v, &base, args.mu, q, args.delta)?.0;
        }
        rows.push((q, eps));
    }
    let bytes = csv_bytes(&["q", "eps_baseline", "eps_variant1", "eps_variant2"], |w| {
        for (q, [b, v1, v2]) in &rows {
            w.write_record([q, b, v1, v2].map(|x| x.to_string()))?;
        }
        Ok(())
    })?;
    emit(args.csv.as_deref(), &bytes)?;

    if let Some(path) = &args.svg {
        let series = Variant::ALL
            .iter()
            .enumerate()
            .map(|(i, v)| Series::line(v.name(), rows.iter().map(|(q, e)| (*q, e[i])).collect()))
            .collect();
        let plot = Plot {
            title: format!("mu = {}, sigma = {}, gamma = {}, {} epochs", args.mu, args.sigma, args.gamma, args.epochs),
            x_label: "q".into(),
            y_label: format!("epsilon at delta = {}", args.delta),
            series,
        };
        write_atomic(path, plot.render().as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_grid_forms() {
        assert_eq!(parse_q_grid("0.1, 0.2").unwrap().0, vec![0.1, 0.2]);
        let r = parse_q_grid("0.05:0.5:0.05").unwrap().0;
        assert_eq!(r.len(), 10);
        assert_eq!((r[2], r[9]), (0.15, 0.5));
        assert!(parse_q_grid("0.1:0.2").is_err());
        assert!(parse_q_grid("1.5").is_err());
        assert!(parse_q_grid("0.2:0.1:0.1").is_err());
    }
}
