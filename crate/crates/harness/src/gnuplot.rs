//! Ready-to-run gnuplot scripts for the CSV outputs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::spec::{rank_label, ExperimentSpec, Kind};

fn quoted(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', "''"))
}

fn preamble(csv: &Path, suffix: &str) -> String {
    let png = csv.with_extension(format!("{suffix}png"));
    format!(
        "set datafile separator ','\nset terminal pngcairo size 900,600\nset output {}\nset key outside right\n",
        quoted(&png)
    )
}

/// Script plotting `csv`, or `None` for commands without a figure.
pub fn script(spec: &ExperimentSpec, csv: &Path) -> Result<Option<String>> {
    let data = quoted(csv);
    let mut s = String::new();
    match spec.kind {
        Kind::SyntheticRun | Kind::RealTensor => {
            let m = spec.ms[0];
            let batches: Vec<String> = spec
                .batches
                .iter()
                .map(|b| b.batch_size(m).map(|b| b.to_string()))
                .collect::<Result<_>>()?;
            let list = batches.join(" ");
            for (col, name, suffix) in [(4, "cost", "cost."), (5, "relative error", "")] {
                s.push_str(&preamble(csv, suffix));
                writeln!(s, "set logscale y\nset xlabel 'epoch'\nset ylabel '{name}'").unwrap();
                writeln!(
                    s,
                    "plot for [b in \"{list}\"] {data} skip 1 using 3:(strcol(2) eq b ? ${col} : 1/0) with lines title (b eq '{m}' ? 'TIHT' : 'StoTIHT b='.b)"
                )
                .unwrap();
                s.push_str("unset logscale y\n");
            }
        }
        Kind::PhaseGrid | Kind::EpochsGrid => {
            let ranks: Vec<String> = spec.ranks.iter().map(rank_label).collect();
            let list = ranks.join(" ");
            let name = if spec.kind == Kind::PhaseGrid {
                "success fraction"
            } else {
                "mean epochs to success"
            };
            s.push_str(&preamble(csv, ""));
            writeln!(s, "set xlabel 'm'\nset ylabel '{name}'").unwrap();
            writeln!(
                s,
                "plot for [r in \"{list}\"] for [a in \"TIHT StoTIHT\"] {data} skip 1 using 1:(strcol(2) eq r && strcol(3) eq a ? $7 : 1/0) with linespoints title a.' '.r"
            )
            .unwrap();
        }
        Kind::Timing => {
            s.push_str(&preamble(csv, ""));
            writeln!(
                s,
                "set style fill solid 0.5\nset boxwidth 0.6\nset ylabel 'seconds per iteration'\nplot {data} skip 1 using 0:6:xtic(2) with boxes title 'measured', '' skip 1 using 0:7 with points pt 7 title 'bound'"
            )
            .unwrap();
        }
        Kind::TripProbe => return Ok(None),
    }
    Ok(Some(s))
}
