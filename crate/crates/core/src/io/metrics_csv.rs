use std::path::Path;

use crate::error::{Error, Result};
use crate::training::{EpochRecord, MetricSeries};

pub const METRICS_HEADER: [&str; 8] = [
    "epoch",
    "nmse",
    "fid",
    "beta",
    "g_ma",
    "p_ma",
    "critic_loss",
    "gen_loss",
];

pub fn write_metrics(path: &Path, series: &MetricSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let io = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(METRICS_HEADER).map_err(io)?;
    for r in &series.records {
        let fields = [r.nmse, r.fid, r.beta, r.g_ma, r.p_ma, r.critic_loss, r.gen_loss];
        let mut row = vec![r.epoch.to_string()];
        row.extend(fields.iter().map(f64::to_string));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<MetricSeries> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let header = r.headers().map_err(|e| Error::Data(e.to_string()))?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Data(format!("unexpected metrics header {header:?}")));
    }
    let mut series = MetricSeries::default();
    for row in r.records() {
        let row = row.map_err(|e| Error::Data(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| Error::Data(format!("bad number `{}` in metrics", &row[i])))
        };
        let epoch = row[0]
            .parse()
            .map_err(|_| Error::Data(format!("bad epoch `{}`", &row[0])))?;
        series.push(EpochRecord {
            epoch,
            nmse: num(1)?,
            fid: num(2)?,
            beta: num(3)?,
            g_ma: num(4)?,
            p_ma: num(5)?,
            critic_loss: num(6)?,
            gen_loss: num(7)?,
        })?;
    }
    Ok(series)
}
